/* C interface to the acsmc library.
 *
 * Every function returns an acsmc_status. On failure a message describing
 * the error is available from acsmc_last_error() on the calling thread until
 * the next call into the library from that thread.
 *
 * Strings returned through char** out-parameters are owned by the caller and
 * must be released with acsmc_string_free().
 */
#ifndef ACSMC_H
#define ACSMC_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ACSMC_API __declspec(dllexport)
#else
#define ACSMC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum acsmc_status {
  ACSMC_OK = 0,
  ACSMC_ERR_ARGUMENT = 1,  /* null pointer, bad size, value outside its domain */
  ACSMC_ERR_CONFIG = 2,    /* malformed or inconsistent configuration */
  ACSMC_ERR_NUMERICAL = 3, /* degenerate weights, failed factorization, ... */
  ACSMC_ERR_IO = 4,        /* file could not be read or written */
  ACSMC_ERR_INTERNAL = 5
} acsmc_status;

/* A state-space model built from a JSON description. */
typedef struct acsmc_model acsmc_model;

/* Run options for the command entry points. Zero-initialize, then set fields. */
typedef struct acsmc_run_options {
  int has_seed;          /* nonzero: use `seed` instead of the config value */
  uint64_t seed;
  int threads;           /* < 1: config value */
  const char* out;       /* output path or prefix; NULL for none */
  const char* resume;    /* checkpoint path (infer); NULL for none */
  const char* method;    /* restrict likelihood runs to one method; NULL for all */
  int reps;              /* < 1: config value */
  int max_iterations;    /* infer: stop after this many iterations; < 0 runs to completion */
} acsmc_run_options;

ACSMC_API const char* acsmc_version(void);
ACSMC_API const char* acsmc_last_error(void);
ACSMC_API void acsmc_string_free(char* s);
ACSMC_API void acsmc_run_options_init(acsmc_run_options* options);

/* Model handles. `model_json` uses the config file's "model" section format. */
ACSMC_API acsmc_status acsmc_model_create(const char* model_json, acsmc_model** out);
ACSMC_API void acsmc_model_free(acsmc_model* model);
ACSMC_API acsmc_status acsmc_model_dims(const acsmc_model* model, int* state_dim, int* noise_dim, int* obs_dim);

/* Simulates `horizon` observations into `observations` (obs_dim × horizon,
 * column-major: entry (i, t) at observations[t * obs_dim + i]). */
ACSMC_API acsmc_status acsmc_model_simulate(const acsmc_model* model, int horizon, uint64_t seed,
                                            double* observations);

/* One log-likelihood estimate at inverse temperature `lambda`.
 * `method` is "bpf", "csmc", "acsmc" or "kalman"; acsmc uses a uniform ladder
 * of `ladder_steps` temperatures from 0 to `lambda`. */
ACSMC_API acsmc_status acsmc_model_log_likelihood(const acsmc_model* model, const double* observations, int horizon,
                                                  const char* method, int particles, double lambda,
                                                  int ladder_steps, uint64_t seed, double* out);

/* Config-file commands. `report` receives the text meant for stdout. */
ACSMC_API acsmc_status acsmc_cmd_likelihood(const char* config_path, const acsmc_run_options* options,
                                            char** report);
ACSMC_API acsmc_status acsmc_cmd_simulate(const char* config_path, const acsmc_run_options* options, char** report);
ACSMC_API acsmc_status acsmc_cmd_infer(const char* config_path, const acsmc_run_options* options, char** report);

#ifdef __cplusplus
}
#endif

#endif /* ACSMC_H */
