#ifndef CODEREC_H
#define CODEREC_H

/* Generated by cbindgen from the coderec-capi crate. Do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of a fallible call; `Ok` is zero so it tests false in C.
typedef enum CoderecStatus {
  // The call succeeded.
  CODEREC_STATUS_OK = 0,
  // A required pointer argument was null.
  CODEREC_STATUS_NULL_POINTER = 1,
  // An argument violated a documented precondition.
  CODEREC_STATUS_INVALID_ARGUMENT = 2,
  // The operating system reported an I/O failure.
  CODEREC_STATUS_IO = 3,
  // A file was readable but malformed.
  CODEREC_STATUS_FORMAT = 4,
  // The library reached a state that should be unreachable.
  CODEREC_STATUS_INTERNAL = 5,
} CoderecStatus;

// Code family selector; each value names the default candidate set of one
// scheme (four LDPC rates, seven convolutional generator pairs, four turbo
// variants, four shortened polar codes).
typedef enum CoderecScheme {
  CODEREC_SCHEME_LDPC = 0,
  CODEREC_SCHEME_CONV = 1,
  CODEREC_SCHEME_TURBO = 2,
  CODEREC_SCHEME_POLAR = 3,
} CoderecScheme;

// Opaque handle over a candidate set and its decoder configuration.
typedef struct CoderecCandidateSet CoderecCandidateSet;

// Opaque handle over trained classifier weights bound to a candidate set.
typedef struct CoderecClassifier CoderecClassifier;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread.
//
// Returns a NUL-terminated string owned by the library; it is valid until
// the next failing call on the same thread and must not be freed. The
// string is empty when no call has failed yet.
const char *coderec_last_error(void);

// Library version as a static NUL-terminated string (never null).
const char *coderec_version(void);

// Builds the default candidate set for `scheme` into `*out`.
//
// On success `*out` owns the handle and must be released with
// [`coderec_candidate_set_free`]. On failure `*out` is left untouched.
enum CoderecStatus coderec_candidate_set_new(enum CoderecScheme scheme,
                                             struct CoderecCandidateSet **out);

// Releases a candidate-set handle. Null is a no-op.
void coderec_candidate_set_free(struct CoderecCandidateSet *set);

// Number of candidates in the set, or 0 if `set` is null.
size_t coderec_candidate_set_len(const struct CoderecCandidateSet *set);

// Side length of the square evidence tensor, or 0 if `set` is null.
size_t coderec_candidate_set_tensor_side(const struct CoderecCandidateSet *set);

// Copies the NUL-terminated label of candidate `index` into `buf`.
//
// `buf_len` is the capacity of `buf` in bytes including the terminator;
// 24 bytes is enough for every default label. Fails with
// `CODEREC_STATUS_INVALID_ARGUMENT` when the index is out of range or the
// buffer is too small.
enum CoderecStatus coderec_candidate_set_label(const struct CoderecCandidateSet *set,
                                               size_t index,
                                               char *buf,
                                               size_t buf_len);

// Loads trained weights from `weights_path` and binds them to `set`.
//
// The weight file must have been produced by the library's trainer for the
// same candidate-set geometry (tensor side and candidate count); anything
// else fails with `CODEREC_STATUS_INVALID_ARGUMENT`. On success `*out`
// owns the handle and must be released with [`coderec_classifier_free`];
// the `set` handle may be freed independently afterwards.
enum CoderecStatus coderec_classifier_new(const struct CoderecCandidateSet *set,
                                          const char *weights_path,
                                          struct CoderecClassifier **out);

// Releases a classifier handle. Null is a no-op.
void coderec_classifier_free(struct CoderecClassifier *classifier);

// Number of classes the classifier separates, or 0 if `classifier` is null.
//
// This is the length the `probabilities` buffer of [`coderec_classify`]
// must have, and equals the candidate count of the bound set.
size_t coderec_classifier_class_count(const struct CoderecClassifier *classifier);

// Classifies one received frame of `llr_len` demodulated LLRs.
//
// Decodes the frame under every candidate, stacks the re-encode agreement
// evidence, and runs the network. `probabilities`, when non-null, receives
// one softmax probability per candidate (use
// [`coderec_classifier_class_count`] to size it); `class_index`, when
// non-null, receives the argmax. The call is deterministic. Non-finite
// LLRs fail with `CODEREC_STATUS_INVALID_ARGUMENT`.
enum CoderecStatus coderec_classify(struct CoderecClassifier *classifier,
                                    const double *llrs,
                                    size_t llr_len,
                                    double *probabilities,
                                    size_t *class_index);

// Classifies one frame with the training-free max-average detector.
//
// Same decode-and-stack pipeline as [`coderec_classify`], but the decision
// is the candidate whose evidence plane has the largest mean magnitude
// over its own codeword length — no weights required. Useful as a
// reference point and at high SNR.
enum CoderecStatus coderec_baseline_classify(const struct CoderecCandidateSet *set,
                                             const double *llrs,
                                             size_t llr_len,
                                             size_t *class_index);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CODEREC_H */
