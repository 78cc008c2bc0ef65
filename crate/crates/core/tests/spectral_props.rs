mod common;

use common::*;
use netwave::diffeq::lyapunov_theta;
use netwave::rational::{q, qi};
use netwave::ratlattice::{DelayVector, LevelFrame};
use netwave::signal::{MatrixTuple, Piecewise};
use netwave::spectral::{mu_estimate, mu_hs_estimate, rho_hs, stability_verdict_delays, MatrixFamily, Search, Verdict, SEARCH_CAP};
use netwave::{Mat, C64};
use proptest::prelude::*;
use rand::Rng;

fn real_tuple(r: &mut impl Rng, n: usize, d: usize, bound: f64) -> MatrixTuple<C64> {
    MatrixTuple::new((0..n).map(|_| Mat::from_fn(d, |_, _| C64::new(r.gen_range(-bound..bound), 0.0))).collect()).unwrap()
}

fn scalar_family(a: f64) -> MatrixFamily {
    MatrixFamily::singleton(MatrixTuple::scalars(&[C64::new(a, 0.0)]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn enlarging_the_family_never_lowers_the_norms(seed in any::<u64>()) {
        let mut r = rng(seed);
        let delays = DelayVector::commensurate(&[1, 2], qi(1)).unwrap();
        let a = real_tuple(&mut r, 2, 2, 0.6);
        let b = real_tuple(&mut r, 2, 2, 0.6);
        let small = mu_estimate(&delays, &MatrixFamily::singleton(a.clone()), &qi(8), Search::default()).unwrap();
        let large = mu_estimate(&delays, &MatrixFamily::new(vec![a, b]).unwrap(), &qi(8), Search::default()).unwrap();
        for (s, l) in small.values.iter().zip(&large.values) {
            prop_assert_eq!(&s.level, &l.level);
            prop_assert!(s.norm <= l.norm * (1.0 + 1e-12) + 1e-300);
        }
    }

    #[test]
    fn scalar_growth_is_the_modulus(a in 0.2f64..1.6) {
        let delays = DelayVector::commensurate(&[1], qi(1)).unwrap();
        let v = stability_verdict_delays(&delays, &scalar_family(a), &qi(30), SEARCH_CAP, 0.02).unwrap();
        prop_assert!((v.mu_hat - a).abs() <= 1e-9, "mu_hat {} for {}", v.mu_hat, a);
        if a < 0.95 {
            prop_assert_eq!(v.verdict, Verdict::Stable);
        } else if a > 1.05 {
            prop_assert_eq!(v.verdict, Verdict::Unstable);
        }
    }

    #[test]
    fn bisection_agrees_with_coefficient_growth(a in 0.3f64..0.9) {
        let delays = DelayVector::commensurate(&[1], qi(1)).unwrap();
        let frame = LevelFrame::own(&delays).unwrap();
        let signal = Piecewise::constant(MatrixTuple::scalars(&[C64::new(a, 0.0)]));
        let theta = lyapunov_theta(&[signal], &frame, &qi(40)).unwrap().value.unwrap();
        let bisect = stability_verdict_delays(&delays, &scalar_family(a), &qi(20), SEARCH_CAP, 0.02).unwrap().lyapunov.unwrap();
        prop_assert!((theta - bisect).abs() <= 0.03, "{} vs {}", theta, bisect);
        prop_assert!((bisect - a.ln()).abs() <= 0.02);
    }
}

#[test]
fn hs_estimates_approach_the_spectral_radius() {
    let mut r = rng(41);
    let delays = DelayVector::commensurate(&[1, 2], qi(1)).unwrap();
    let tuple = real_tuple(&mut r, 2, 2, 0.5);
    let rho = rho_hs(&delays, &tuple, 256).unwrap();
    let family = MatrixFamily::singleton(tuple);
    let errors: Vec<f64> = [5, 10, 20]
        .iter()
        .map(|&n| (mu_hs_estimate(&delays, &family, n, 256, Search::default()).unwrap().mu_hs - rho).abs() / rho)
        .collect();
    assert!(errors[2] <= 0.02, "{errors:?}");
    assert!(errors[2] <= errors[0] + 1e-12, "{errors:?}");
}

#[test]
fn rationally_independent_delays_use_more_levels() {
    let commensurate = DelayVector::commensurate(&[1, 2], qi(1)).unwrap();
    let independent = DelayVector::independent(vec![qi(1), q(2, 1)]).unwrap();
    let family = MatrixFamily::singleton(MatrixTuple::scalars(&[C64::new(0.25, 0.0), C64::new(0.125, 0.0)]));
    let a = mu_estimate(&commensurate, &family, &qi(12), Search::default()).unwrap();
    let b = mu_estimate(&independent, &family, &qi(12), Search::default()).unwrap();
    assert!(b.values.len() >= a.values.len());
    // the largest characteristic root is 1/2 for both structures
    assert!((a.mu_hat - 0.5).abs() < 0.1 && (b.mu_hat - 0.5).abs() < 0.1, "{} {}", a.mu_hat, b.mu_hat);
}
