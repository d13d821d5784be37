#ifndef QFOUND_H
#define QFOUND_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define QF_OK 0

// A required pointer argument was null.
#define QF_ERR_NULL 1

// Invalid configuration or parameters.
#define QF_ERR_CONFIG 2

// A numerical contract was violated.
#define QF_ERR_NUMERICAL 3

#define QF_ERR_IO 4

// A string argument was not valid UTF-8.
#define QF_ERR_UTF8 5

// Internal panic caught at the boundary.
#define QF_ERR_PANIC 6

// Observable selector for [`qf_parity_expectation`].
#define QF_OBS_X 0

#define QF_OBS_Y 1

// Opaque multi-qubit state.
typedef struct QfState QfState;

// Opaque gridded wave function.
typedef struct QfWave QfWave;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next call into the library from the same thread.
const char *qf_last_error(void);

// The three-qubit GHZ state.
int32_t qf_state_ghz(struct QfState **out_state);

// An `n`-qubit state from `2^n` amplitudes given as separate real and
// imaginary arrays; they are normalized here and must not all vanish.
int32_t qf_state_new_qubits(uintptr_t n,
                            const double *re,
                            const double *im,
                            uintptr_t len,
                            struct QfState **out_state);

// Number of amplitudes in the state.
int32_t qf_state_len(const struct QfState *state, uintptr_t *out_len);

int32_t qf_state_amplitude(const struct QfState *state,
                           uintptr_t index,
                           double *out_re,
                           double *out_im);

// Releases a state handle. Null is ignored.
void qf_state_free(struct QfState *state);

// ⟨O₀ O₁ … O_{n−1}⟩ where `kinds[i]` (`QF_OBS_X` or `QF_OBS_Y`) selects
// the observable on site `i`.
int32_t qf_parity_expectation(const struct QfState *state,
                              const uint8_t *kinds,
                              uintptr_t n,
                              double *out_value);

// Number of local ±1 assignments satisfying all four GHZ constraints.
int32_t qf_hv_search(uintptr_t *out_count);

// `exp(−l²/2d²)`: amplitude ratio left on a branch at distance `l` from a
// collapse centre.
int32_t qf_tail_ratio(double l, double d, double *out_ratio);

// Credence in heads for a coin with P(heads) = `p_num/p_den`, as a reduced
// fraction.
int32_t qf_sleeping_beauty(int64_t p_num, int64_t p_den, int64_t *out_num, int64_t *out_den);

// A normalized Gaussian packet sampled at `n_points` points spanning
// `[x_min, x_max]` inclusive.
int32_t qf_wave_gaussian(double x_min,
                         double x_max,
                         uintptr_t n_points,
                         double center,
                         double width,
                         double momentum,
                         struct QfWave **out_wave);

int32_t qf_wave_len(const struct QfWave *wave, uintptr_t *out_len);

// ∫|ψ|² over the grid.
int32_t qf_wave_norm(const struct QfWave *wave, double *out_norm);

// Copies |ψ|² into `buf`, which must hold exactly `qf_wave_len` values.
int32_t qf_wave_density(const struct QfWave *wave, double *buf, uintptr_t len);

// Releases a wave handle. Null is ignored.
void qf_wave_free(struct QfWave *wave);

// Runs a scenario from TOML config text and returns the summary JSON in
// `*out_json` (release with [`qf_string_free`]). Nothing is written to disk.
int32_t qf_run_config(const char *config, char **out_json);

// Releases a string returned by this library. Null is ignored.
void qf_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QFOUND_H */
