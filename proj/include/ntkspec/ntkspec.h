#ifndef NTKSPEC_H
#define NTKSPEC_H

#include <stddef.h>
#include <stdint.h>

#if defined(NTKSPEC_BUILDING_LIBRARY)
#define NTKSPEC_API __attribute__((visibility("default")))
#else
#define NTKSPEC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ntks_status {
    NTKS_OK = 0,
    NTKS_ERR_INVALID_INPUT = 1,
    NTKS_ERR_DIMENSION = 2,
    NTKS_ERR_ASYMMETRY = 3,
    NTKS_ERR_DEGENERATE = 4,
    NTKS_ERR_PRECONDITION = 5,
    NTKS_ERR_CONFIG = 6,
    NTKS_ERR_NUMERICAL = 7,
    NTKS_ERR_INTERNAL = 8
} ntks_status;

typedef struct ntks_network ntks_network;
typedef struct ntks_dataset ntks_dataset;
typedef struct ntks_kernel ntks_kernel;

/* Message of the last failing call on this thread, "" if none. */
NTKSPEC_API const char* ntks_last_error(void);
NTKSPEC_API const char* ntks_version(void);
NTKSPEC_API const char* ntks_status_name(ntks_status status);

/* He-initialised network. activation is one of cos, sin, relu, identity.
   widths[count-1] must be 1. */
NTKSPEC_API ntks_status ntks_network_create(const size_t* widths, size_t count, const char* activation,
                                            double s, uint64_t seed, ntks_network** out);
NTKSPEC_API void ntks_network_free(ntks_network* net);
NTKSPEC_API size_t ntks_network_parameter_count(const ntks_network* net);
NTKSPEC_API ntks_status ntks_network_forward(const ntks_network* net, const double* x, size_t n0,
                                             double* out);

/* sampler is gaussian or sphere. */
NTKSPEC_API ntks_status ntks_dataset_sample(size_t n0, size_t n, const char* sampler, uint64_t seed,
                                            ntks_dataset** out);
/* Copies n rows of length n0, row-major. */
NTKSPEC_API ntks_status ntks_dataset_from_rows(const double* rows, size_t n, size_t n0,
                                               ntks_dataset** out);
NTKSPEC_API void ntks_dataset_free(ntks_dataset* data);
NTKSPEC_API size_t ntks_dataset_size(const ntks_dataset* data);

NTKSPEC_API ntks_status ntks_kernel_compute(const ntks_network* net, const ntks_dataset* data,
                                            ntks_kernel** out);
NTKSPEC_API void ntks_kernel_free(ntks_kernel* kernel);
NTKSPEC_API size_t ntks_kernel_size(const ntks_kernel* kernel);
NTKSPEC_API double ntks_kernel_lambda_min(const ntks_kernel* kernel);
/* Writes the N*N kernel row-major into buffer (capacity entries). */
NTKSPEC_API ntks_status ntks_kernel_copy(const ntks_kernel* kernel, double* buffer, size_t capacity);
/* Ascending eigenvalues, N entries. */
NTKSPEC_API ntks_status ntks_kernel_eigenvalues(const ntks_kernel* kernel, double* buffer, size_t capacity);

typedef struct ntks_run_options {
    const char* config_path; /* NULL runs the built-in defaults */
    const char* out_dir;     /* NULL skips writing files */
    int has_seed;
    uint64_t seed;
    size_t trials;  /* 0 keeps the config value */
    size_t workers; /* 0 keeps the config value */
} ntks_run_options;

/* experiment is one of ntk_scaling, lipschitz, lemma_probe, memorize,
   bounds_table, ntk_check. A config naming a different experiment is a
   config error. On success *summary_json (if non-NULL) receives a string to
   release with ntks_string_free. */
NTKSPEC_API ntks_status ntks_run_experiment(const char* experiment, const ntks_run_options* options,
                                            char** summary_json);
NTKSPEC_API void ntks_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif
