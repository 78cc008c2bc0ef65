#ifndef NETWAVE_H
#define NETWAVE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum NwStatus {
  NW_STATUS_OK = 0,
  NW_STATUS_NULL_POINTER = 1,
  NW_STATUS_INVALID_INPUT = 2,
  NW_STATUS_DIMENSION = 3,
  NW_STATUS_CAP_EXCEEDED = 4,
  NW_STATUS_NOT_IN_CONSTRAINT_SPACE = 5,
  NW_STATUS_BUFFER_TOO_SMALL = 6,
  NW_STATUS_INTERNAL = 7,
} NwStatus;

// Verdicts reported by the stability functions.
typedef enum NwVerdict {
  NW_VERDICT_STABLE = 0,
  NW_VERDICT_UNSTABLE = 1,
  NW_VERDICT_INCONCLUSIVE = 2,
} NwVerdict;

// A validated wave network with its optional damping description.
typedef struct NwNetwork NwNetwork;

// A finished wave simulation.
typedef struct NwWaveRun NwWaveRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread, or null.
// The pointer stays valid until the next call into this library.
const char *nw_last_error(void);

// Parses a network description (the same JSON as the command-line tool).
//
// # Safety
// `json` must be a nul-terminated string and `out` a valid pointer.
enum NwStatus nw_network_from_json(const char *json, struct NwNetwork **out);

// # Safety
// `net` must come from [`nw_network_from_json`] and not be used afterwards.
void nw_network_free(struct NwNetwork *net);

// # Safety
// `net` must be a live handle or null.
size_t nw_network_edge_count(const struct NwNetwork *net);

// # Safety
// `net` must be a live handle or null.
size_t nw_network_damped_count(const struct NwNetwork *net);

// Writes the `2N × 2N` boundary coupling matrix, row-major, for the given
// damping values (one per damped vertex).
//
// # Safety
// `eta` must hold `n_eta` doubles and `out` must hold `out_len` doubles.
enum NwStatus nw_network_transmission(const struct NwNetwork *net,
                                      const double *eta,
                                      size_t n_eta,
                                      double *out,
                                      size_t out_len);

// Topological stability verdict over the network's `damping_set`.
//
// # Safety
// `net` must be a live handle and `verdict` a valid pointer.
enum NwStatus nw_network_verdict(const struct NwNetwork *net, enum NwVerdict *verdict);

// Simulates from a seeded random admissible state with the network's
// damping signal (zero damping when absent).
//
// # Safety
// `net` must be a live handle, `grid_step` a nul-terminated rational such
// as `"1/16"`, and `out` a valid pointer.
enum NwStatus nw_wave_simulate(const struct NwNetwork *net,
                               const char *grid_step,
                               size_t steps,
                               uint64_t seed,
                               struct NwWaveRun **out);

// # Safety
// `run` must be a live handle or null.
size_t nw_wave_run_len(const struct NwWaveRun *run);

// Copies the energy at every grid time into `out`.
//
// # Safety
// `run` must be a live handle and `out` must hold `out_len` doubles.
enum NwStatus nw_wave_run_energies(const struct NwWaveRun *run, double *out, size_t out_len);

// # Safety
// `run` must come from [`nw_wave_simulate`] and not be used afterwards.
void nw_wave_run_free(struct NwWaveRun *run);

// Stability of a delay equation under switching within a matrix family,
// given as the JSON used by `netwave stability delays`.
//
// # Safety
// `json` and `x_max` must be nul-terminated; `verdict` and `mu_hat` valid.
enum NwStatus nw_delay_verdict(const char *json,
                               const char *x_max,
                               uint64_t cap,
                               double relative_tol,
                               enum NwVerdict *verdict,
                               double *mu_hat);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NETWAVE_H */
