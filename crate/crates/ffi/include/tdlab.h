#ifndef TDLAB_H
#define TDLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum TdlabStatus {
  TDLAB_STATUS_OK = 0,
  TDLAB_STATUS_NULL_POINTER = 1,
  TDLAB_STATUS_INVALID_ARGUMENT = 2,
  TDLAB_STATUS_DIMENSION_MISMATCH = 3,
  TDLAB_STATUS_BUFFER_TOO_SMALL = 4,
  TDLAB_STATUS_NUMERICAL_ERROR = 5,
  TDLAB_STATUS_IO = 6,
  TDLAB_STATUS_PANIC = 7,
} TdlabStatus;

typedef enum TdlabTask {
  TDLAB_TASK_MC_PREDICTION = 0,
  TDLAB_TASK_MC_CONTROL = 1,
  TDLAB_TASK_ACROBOT_CONTROL = 2,
} TdlabTask;

typedef enum TdlabPreprocessing {
  TDLAB_PREPROCESSING_RAW = 0,
  TDLAB_PREPROCESSING_DISCRETIZE = 1,
  TDLAB_PREPROCESSING_TILECODE = 2,
} TdlabPreprocessing;

typedef enum TdlabSystem {
  TDLAB_SYSTEM_SGD = 0,
  TDLAB_SYSTEM_SGD_ER = 1,
  TDLAB_SYSTEM_ADAM = 2,
  TDLAB_SYSTEM_ADAM_ER = 3,
  TDLAB_SYSTEM_ADAM_ER_TN = 4,
} TdlabSystem;

/*
 Environment with its own reset stream.
 */
typedef struct TdlabEnv TdlabEnv;

typedef struct TdlabFeaturizer TdlabFeaturizer;

typedef struct TdlabNetwork TdlabNetwork;

typedef struct TdlabTTest {
  double t_statistic;
  double degrees_of_freedom;
  double p_value;
  bool significant_at_5pct;
} TdlabTTest;

/*
 One seeded run. `beta1`/`beta2` are ignored by the SGD systems.
 Prediction runs build an evaluation dataset from `walk_steps` and
 `sample_size`.
 */
typedef struct TdlabRunConfig {
  enum TdlabTask task;
  enum TdlabPreprocessing preprocessing;
  enum TdlabSystem system;
  double step_size;
  double beta1;
  double beta2;
  uintptr_t episodes;
  uint64_t seed;
  uintptr_t walk_steps;
  uintptr_t sample_size;
} TdlabRunConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null. The pointer
 stays valid until the next failing call on the same thread.
 */
const char *tdlab_last_error(void);

/*
 # Safety
 `out_env` must be valid for writes.
 */
enum TdlabStatus tdlab_env_new(enum TdlabTask task, uint64_t seed, struct TdlabEnv **out_env);

void tdlab_env_free(struct TdlabEnv *env);

/*
 Observation length of the environment, or 0 for a null handle.

 # Safety
 `env` must be null or a live handle.
 */
uintptr_t tdlab_env_dims(const struct TdlabEnv *env);

/*
 Starts an episode and writes the first observation.

 # Safety
 `env` must be a live handle and `obs` valid for `obs_len` writes.
 */
enum TdlabStatus tdlab_env_reset(struct TdlabEnv *env, double *obs, uintptr_t obs_len);

/*
 Applies action `0..3` and writes reward, terminal flag and the next
 observation.

 # Safety
 `env` must be a live handle; the out pointers must be valid.
 */
enum TdlabStatus tdlab_env_step(struct TdlabEnv *env,
                                uintptr_t action,
                                double *reward,
                                bool *terminal,
                                double *obs,
                                uintptr_t obs_len);

/*
 # Safety
 `out_featurizer` must be valid for writes.
 */
enum TdlabStatus tdlab_featurizer_new(enum TdlabTask task,
                                      enum TdlabPreprocessing preprocessing,
                                      struct TdlabFeaturizer **out_featurizer);

void tdlab_featurizer_free(struct TdlabFeaturizer *f);

/*
 Network input length produced by the featurizer, or 0 for null.

 # Safety
 `f` must be null or a live handle.
 */
uintptr_t tdlab_featurizer_input_length(const struct TdlabFeaturizer *f);

/*
 Writes the dense feature vector of `obs`.

 # Safety
 Pointers must be valid for the given lengths.
 */
enum TdlabStatus tdlab_featurizer_encode(struct TdlabFeaturizer *f,
                                         const double *obs,
                                         uintptr_t obs_len,
                                         double *features,
                                         uintptr_t features_len);

/*
 Xavier-initialized network seeded like a run with `seed`.

 # Safety
 `hidden` must be valid for `n_hidden` reads; `out_net` for writes.
 */
enum TdlabStatus tdlab_network_new(uintptr_t input_length,
                                   const uintptr_t *hidden,
                                   uintptr_t n_hidden,
                                   uintptr_t outputs,
                                   uint64_t seed,
                                   struct TdlabNetwork **out_net);

void tdlab_network_free(struct TdlabNetwork *net);

/*
 Number of parameters, or 0 for null.

 # Safety
 `net` must be null or a live handle.
 */
uintptr_t tdlab_network_param_count(const struct TdlabNetwork *net);

/*
 Copies the flat parameter vector: per layer, row-major weights
 (`fan_out x fan_in`) then biases.

 # Safety
 `params` must be valid for `len` writes.
 */
enum TdlabStatus tdlab_network_get_params(const struct TdlabNetwork *net,
                                          double *params,
                                          uintptr_t len);

/*
 # Safety
 `params` must be valid for `len` reads.
 */
enum TdlabStatus tdlab_network_set_params(struct TdlabNetwork *net,
                                          const double *params,
                                          uintptr_t len);

/*
 Dense forward pass.

 # Safety
 Pointers must be valid for the given lengths.
 */
enum TdlabStatus tdlab_network_forward(struct TdlabNetwork *net,
                                       const double *x,
                                       uintptr_t x_len,
                                       double *outputs,
                                       uintptr_t outputs_len);

/*
 Gradient of output `output_index` at `x` with respect to every
 parameter, in the flat parameter order.

 # Safety
 Pointers must be valid for the given lengths.
 */
enum TdlabStatus tdlab_network_gradient(struct TdlabNetwork *net,
                                        const double *x,
                                        uintptr_t x_len,
                                        uintptr_t output_index,
                                        double *grad,
                                        uintptr_t grad_len);

/*
 Mean pairwise cosine similarity of the value gradients at `n_states`
 raw states stored row-major with `dims` columns.

 # Safety
 `states` must be valid for `n_states * dims` reads.
 */
enum TdlabStatus tdlab_pairwise_interference(struct TdlabNetwork *net,
                                             struct TdlabFeaturizer *featurizer,
                                             const double *states,
                                             uintptr_t n_states,
                                             uintptr_t dims,
                                             double *mean);

/*
 Two-sample t-test; pooled variance unless `welch`.

 # Safety
 `a` and `b` must be valid for their lengths; `result` for writes.
 */
enum TdlabStatus tdlab_ttest(const double *a,
                             uintptr_t a_len,
                             const double *b,
                             uintptr_t b_len,
                             bool welch,
                             struct TdlabTTest *result);

/*
 Runs one seed and writes the per-episode metric (steps for control,
 value error for prediction).

 # Safety
 `config` must be valid for reads, `per_episode` for `len` writes and
 `diverged` for writes.
 */
enum TdlabStatus tdlab_run_single(const struct TdlabRunConfig *config,
                                  double *per_episode,
                                  uintptr_t len,
                                  bool *diverged);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TDLAB_H */
