#ifndef TROPRELU_H
#define TROPRELU_H

/* Generated by cbindgen; do not edit. */

#include <stdbool.h>
#include <stddef.h>

typedef enum TrMode {
  TR_MODE_BOX = 0,
  TR_MODE_ZONE = 1,
  TR_MODE_EXTERNAL = 2,
} TrMode;

typedef enum TrDomain {
  TR_DOMAIN_ZONE = 0,
  TR_DOMAIN_OCTAGON = 1,
} TrDomain;

typedef enum TrTrack {
  TR_TRACK_IO = 0,
  TR_TRACK_ALL = 1,
} TrTrack;

typedef enum TrStatus {
  TR_STATUS_OK = 0,
  TR_STATUS_NULL_POINTER = 1,
  TR_STATUS_INVALID_ARGUMENT = 2,
  TR_STATUS_IO = 3,
  TR_STATUS_PARSE = 4,
  TR_STATUS_DIMENSION_MISMATCH = 5,
  TR_STATUS_EMPTY_ABSTRACTION = 6,
  TR_STATUS_CELL_BUDGET_EXCEEDED = 7,
  TR_STATUS_LP = 8,
  TR_STATUS_PANIC = 9,
} TrStatus;

typedef struct TrAnalysis TrAnalysis;

/**
 * A network under construction or loaded from a file.
 */
typedef struct TrNetwork TrNetwork;

typedef struct TrOptions {
  enum TrMode mode;
  enum TrDomain domain;
  enum TrTrack track;
  /**
   * Membership and verdict tolerance.
   */
  double eps;
  /**
   * Upper bound on subdivision cells.
   */
  size_t cell_budget;
} TrOptions;

/**
 * Message of the last failed call on this thread (empty after success).
 * Valid until the next call into this library on the same thread.
 */
const char *tr_last_error_message(void);

struct TrOptions tr_options_default(void);

/**
 * Reads a Sherlock network file.
 */
enum TrStatus tr_network_load(const char *path, struct TrNetwork **out);

/**
 * Starts an empty network with `inputs` inputs.
 */
enum TrStatus tr_network_new(size_t inputs, struct TrNetwork **out);

/**
 * Appends a layer: `weights` is row-major `outputs × width`, where `width`
 * is the size of the previous layer.
 */
enum TrStatus tr_network_push_layer(struct TrNetwork *net,
                                    size_t outputs,
                                    const double *weights,
                                    const double *bias,
                                    bool relu);

size_t tr_network_inputs(const struct TrNetwork *net);

size_t tr_network_outputs(const struct TrNetwork *net);

void tr_network_free(struct TrNetwork *net);

/**
 * Analyzes `net` over the box `[lo_j, hi_j]`. `subdiv` (nullable) gives
 * the number of pieces per input; `opts` (nullable) defaults to
 * [`tr_options_default`].
 */
enum TrStatus tr_analyze(const struct TrNetwork *net,
                         const double *lo,
                         const double *hi,
                         size_t n_inputs,
                         const struct TrOptions *opts,
                         const size_t *subdiv,
                         struct TrAnalysis **out);

size_t tr_analysis_output_count(const struct TrAnalysis *an);

/**
 * Copies the output intervals into `lo` and `hi`, each of length `len`
 * (the output count).
 */
enum TrStatus tr_analysis_output_bounds(const struct TrAnalysis *an,
                                        double *lo,
                                        double *hi,
                                        size_t len);

/**
 * Number of generators and their dimension in the final abstraction.
 */
enum TrStatus tr_analysis_generator_shape(const struct TrAnalysis *an, size_t *count, size_t *dim);

/**
 * Copies the generators row-major into `buf` of length `count × dim`.
 */
enum TrStatus tr_analysis_generators(const struct TrAnalysis *an, double *buf, size_t len);

/**
 * Checks `in·x + out·y + constant ≥ 0` over the analysis. `restrict_lo`
 * and `restrict_hi` (both nullable) narrow the inputs; when given and the
 * analysis was subdivided, every grid cell is re-analyzed on its own.
 */
enum TrStatus tr_analysis_check(const struct TrAnalysis *an,
                                const double *in_coeffs,
                                size_t n_in,
                                const double *out_coeffs,
                                size_t n_out,
                                double constant,
                                const double *restrict_lo,
                                const double *restrict_hi,
                                bool *verified,
                                double *witness);

void tr_analysis_free(struct TrAnalysis *an);

#endif  /* TROPRELU_H */
