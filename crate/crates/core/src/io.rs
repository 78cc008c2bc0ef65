//! File formats: JSON descriptions of systems and networks, CSV outputs.
//!
//! Rationals are written as `"p/q"` strings. Complex entries are either a
//! plain number or a `[re, im]` pair.

use crate::diffeq::InitialCondition;
use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::rational::{format_q, parse_q, serde_q, Q};
use crate::ratlattice::{DelayVector, IntMatrix};
use crate::scalar::C64;
use crate::signal::{MatrixTuple, Piecewise, SwitchingSignal};
use crate::spectral::MatrixFamily;
use crate::wavenet::{DampingSet, DampingSignal, Network, VertexRole};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    pub fn value(self) -> C64 {
        match self {
            Entry::Real(x) => C64::new(x, 0.0),
            Entry::Complex([re, im]) => C64::new(re, im),
        }
    }
}

impl From<C64> for Entry {
    fn from(z: C64) -> Self {
        if z.im == 0.0 {
            Entry::Real(z.re)
        } else {
            Entry::Complex([z.re, z.im])
        }
    }
}

pub type MatrixSpec = Vec<Vec<Entry>>;

pub fn matrix(spec: &MatrixSpec) -> Result<Mat<C64>> {
    Mat::from_rows(spec.iter().map(|r| r.iter().map(|e| e.value()).collect()).collect())
}

pub fn matrix_spec(m: &Mat<C64>) -> MatrixSpec {
    m.rows().into_iter().map(|r| r.into_iter().map(Entry::from).collect()).collect()
}

pub fn tuple(spec: &[MatrixSpec]) -> Result<MatrixTuple<C64>> {
    MatrixTuple::new(spec.iter().map(matrix).collect::<Result<_>>()?)
}

/// `L = B ℓ`; generators may be omitted for purely combinatorial queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySpec {
    pub b: IntMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "option_q_vec")]
    pub generators: Option<Vec<Q>>,
}

impl DelaySpec {
    pub fn build(&self) -> Result<DelayVector> {
        match &self.generators {
            Some(ell) => DelayVector::numeric(self.b.clone(), ell.clone()),
            None => DelayVector::symbolic(self.b.clone()),
        }
    }
}

mod option_q_vec {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Option<Vec<Q>>, s: S) -> std::result::Result<S::Ok, S::Error> {
        let strings: Option<Vec<String>> = x.as_ref().map(|v| v.iter().map(format_q).collect());
        strings.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Vec<Q>>, D::Error> {
        let v = Option::<Vec<String>>::deserialize(d)?;
        v.map(|v| v.iter().map(|s| parse_q(s).map_err(serde::de::Error::custom)).collect()).transpose()
    }
}

/// A piecewise-constant signal: `values[0]` before the first breakpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec<T> {
    #[serde(default, with = "serde_q::vec")]
    pub breakpoints: Vec<Q>,
    pub values: Vec<T>,
}

impl<T: Clone> SignalSpec<T> {
    pub fn build<U>(&self, f: impl Fn(&T) -> Result<U>) -> Result<Piecewise<U>> {
        Piecewise::new(self.breakpoints.clone(), self.values.iter().map(f).collect::<Result<_>>()?)
    }
}

pub fn switching_signal(spec: &SignalSpec<Vec<MatrixSpec>>) -> Result<SwitchingSignal<C64>> {
    let signal = spec.build(|t| tuple(t))?;
    signal.validate_tuples()?;
    Ok(signal)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Constant vector on `[-L_max, 0)`.
    Constant(Vec<Entry>),
    /// Piecewise-constant values on cells of width `step` covering `[-L_max, 0)`.
    Cells {
        #[serde(with = "serde_q")]
        step: Q,
        values: Vec<Vec<Entry>>,
    },
}

impl InitialSpec {
    pub fn build(&self, l_max: &Q) -> Result<InitialCondition<C64>> {
        match self {
            InitialSpec::Constant(v) => Ok(InitialCondition::constant(l_max.clone(), v.iter().map(|e| e.value()).collect())),
            InitialSpec::Cells { step, values } => InitialCondition::from_cells(
                l_max.clone(),
                step,
                values.iter().map(|r| r.iter().map(|e| e.value()).collect()).collect(),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DifferenceConfig {
    pub delays: DelaySpec,
    pub signal: SignalSpec<Vec<MatrixSpec>>,
    pub initial: InitialSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub delays: DelaySpec,
    /// Elements of the family, each a tuple of `N` matrices.
    pub family: Vec<Vec<MatrixSpec>>,
}

impl FamilyConfig {
    pub fn build(&self) -> Result<(DelayVector, MatrixFamily)> {
        let delays = self.delays.build()?;
        let family = MatrixFamily::new(self.family.iter().map(|t| tuple(t)).collect::<Result<_>>()?)?;
        if family.tuple_len() != delays.len() {
            return Err(Error::Dimension("family tuples and delays differ in length".into()));
        }
        Ok((delays, family))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Constant(Entry),
    Cells(Vec<Entry>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportConfig {
    #[serde(with = "serde_q::vec")]
    pub lengths: Vec<Q>,
    pub transmission: SignalSpec<MatrixSpec>,
    /// One profile per component, constant or sampled at the cell centres.
    pub initial: Vec<ProfileSpec>,
}

impl TransportConfig {
    pub fn profiles(&self, cells: &[usize]) -> Result<Vec<Vec<C64>>> {
        if self.initial.len() != cells.len() {
            return Err(Error::Dimension("one initial profile per component is required".into()));
        }
        self.initial
            .iter()
            .zip(cells)
            .map(|(p, &n)| match p {
                ProfileSpec::Constant(e) => Ok(vec![e.value(); n]),
                ProfileSpec::Cells(v) if v.len() == n => Ok(v.iter().map(|e| e.value()).collect()),
                ProfileSpec::Cells(v) => Err(Error::Dimension(format!("profile has {} cells, grid has {n}", v.len()))),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexSpec {
    pub name: String,
    pub role: VertexRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub from: String,
    pub to: String,
    #[serde(with = "serde_q")]
    pub length: Q,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum WaveInitial {
    /// Random state satisfying the vertex conditions, drawn from the run seed.
    Random,
    /// The periodic solution along the first qualifying path.
    Witness,
    /// Cell samples of `u'` and `v` on every edge.
    Samples { du: Vec<Vec<Entry>>, v: Vec<Vec<Entry>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub vertices: Vec<VertexSpec>,
    pub edges: Vec<EdgeSpec>,
    /// Damping over time, one value per damped vertex in vertex order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<SignalSpec<Vec<String>>>,
    /// Admissible damping values for the stability verdict.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping_set: Option<DampingSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<WaveInitial>,
}

impl NetworkConfig {
    pub fn network(&self) -> Result<Network> {
        let names: Vec<String> = self.vertices.iter().map(|v| v.name.clone()).collect();
        let find = |n: &str| {
            names.iter().position(|m| m == n).ok_or_else(|| Error::invalid(format!("unknown vertex {n:?}")))
        };
        let edges = self.edges.iter().map(|e| Ok((find(&e.from)?, find(&e.to)?))).collect::<Result<Vec<_>>>()?;
        let lengths: Vec<Q> = self.edges.iter().map(|e| e.length.clone()).collect();
        Network::new(
            names.clone(),
            self.vertices.iter().map(|v| v.role).collect(),
            edges,
            crate::wavenet::commensurate_lengths(&lengths)?,
        )
    }

    pub fn damping(&self) -> Result<Option<DampingSignal>> {
        self.damping
            .as_ref()
            .map(|d| d.build(|v| v.iter().map(|s| parse_q(s)).collect::<Result<Vec<_>>>()))
            .transpose()
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: line {}, column {}: {e}", path.display(), e.line(), e.column())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Columns `time, re(u_1), im(u_1), …`.
pub fn write_trajectory_csv(path: &Path, times: &[Q], values: &[Vec<C64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let dim = values.first().map_or(0, Vec::len);
    let mut header = vec!["time".to_string()];
    for i in 1..=dim {
        header.push(format!("re(u{i})"));
        header.push(format!("im(u{i})"));
    }
    w.write_record(&header)?;
    for (t, row) in times.iter().zip(values) {
        let mut record = vec![format!("{}", crate::rational::to_f64(t))];
        for z in row {
            record.push(format!("{}", z.re));
            record.push(format!("{}", z.im));
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_energy_csv(path: &Path, times: &[f64], energies: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["time", "energy"])?;
    for (t, e) in times.iter().zip(energies) {
        w.write_record([t.to_string(), e.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_table_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}
