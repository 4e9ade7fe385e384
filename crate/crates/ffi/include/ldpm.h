#ifndef LDPM_H
#define LDPM_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes.
 */
typedef enum LdpmError {
  LDPM_ERROR_OK = 0,
  LDPM_ERROR_NULL_POINTER = 1,
  LDPM_ERROR_INVALID_ARGUMENT = 2,
  LDPM_ERROR_INVALID_CHANNEL = 3,
  LDPM_ERROR_INFEASIBLE = 4,
  LDPM_ERROR_PARSE = 5,
  LDPM_ERROR_INTERNAL = 6,
} LdpmError;

/**
 * Opaque channel handle.
 */
typedef struct LdpmChannel LdpmChannel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *ldpm_last_error_message(void);

/**
 * Binary randomized response on {-1, +1}.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum LdpmError ldpm_channel_rr(double epsilon, struct LdpmChannel **out);

/**
 * Binary randomized response with outputs rescaled to {-c, +c}.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum LdpmError ldpm_channel_rr_rescaled(double epsilon, struct LdpmChannel **out);

/**
 * The four-output (epsilon, delta) randomized response.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum LdpmError ldpm_channel_rr_delta(double epsilon, double delta, struct LdpmChannel **out);

/**
 * d-ary randomized response.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum LdpmError ldpm_channel_randomized_response(uintptr_t d,
                                                double epsilon,
                                                struct LdpmChannel **out);

/**
 * Parses a channel from its JSON form.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LdpmError ldpm_channel_from_json(const char *json, struct LdpmChannel **out);

/**
 * Serializes a channel to JSON. Free the result with [`ldpm_string_free`].
 *
 * # Safety
 * `ch` must be a live handle and `out` a valid pointer.
 */
enum LdpmError ldpm_channel_to_json(const struct LdpmChannel *ch, char **out);

/**
 * Number of inputs, or 0 for a null handle.
 *
 * # Safety
 * `ch` must be null or a live handle.
 */
uintptr_t ldpm_channel_input_size(const struct LdpmChannel *ch);

/**
 * Number of outputs, or 0 for a null handle.
 *
 * # Safety
 * `ch` must be null or a live handle.
 */
uintptr_t ldpm_channel_output_size(const struct LdpmChannel *ch);

/**
 * Reads the probability of `output` given `input`.
 *
 * # Safety
 * `ch` must be a live handle and `out` a valid pointer.
 */
enum LdpmError ldpm_channel_entry(const struct LdpmChannel *ch,
                                  uintptr_t input,
                                  uintptr_t output,
                                  double *out);

/**
 * Measures privacy. With a NaN `epsilon_query` writes the smallest pure
 * epsilon (`INFINITY` if none) and delta 0; otherwise writes the query back
 * and the smallest delta at that epsilon.
 *
 * # Safety
 * `ch` must be a live handle; `out_epsilon` and `out_delta` valid pointers.
 */
enum LdpmError ldpm_channel_measure(const struct LdpmChannel *ch,
                                    double epsilon_query,
                                    double *out_epsilon,
                                    double *out_delta);

/**
 * Finds a post-processor that recovers `ch` from binary randomized
 * response (delta 0) or its four-output variant (delta > 0).
 *
 * # Safety
 * `ch` must be a live handle and `out` a valid pointer.
 */
enum LdpmError ldpm_channel_kov_decompose(const struct LdpmChannel *ch,
                                          double epsilon,
                                          double delta,
                                          struct LdpmChannel **out);

/**
 * Applies `post` to the output of `base`. Input `i` of `post` reads output
 * `i` of `base`.
 *
 * # Safety
 * Both handles must be live and `out` a valid pointer.
 */
enum LdpmError ldpm_channel_compose(const struct LdpmChannel *post,
                                    const struct LdpmChannel *base,
                                    struct LdpmChannel **out);

/**
 * Embeds a `d`-input channel into a binary one via the subset of 0-based
 * `members` of size d/2.
 *
 * # Safety
 * `ch` must be a live handle, `members` must point to `len` values and
 * `out` must be a valid pointer.
 */
enum LdpmError ldpm_channel_embed(const struct LdpmChannel *ch,
                                  const uintptr_t *members,
                                  uintptr_t len,
                                  struct LdpmChannel **out);

/**
 * Releases a channel. Null is ignored.
 *
 * # Safety
 * `ch` must be null or a handle not yet freed.
 */
void ldpm_channel_free(struct LdpmChannel *ch);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string from this library not yet freed.
 */
void ldpm_string_free(char *s);

/**
 * Margin of the binomial claim at `(n, m)`; non-positive means it holds.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum LdpmError ldpm_binomial_margin(uintptr_t n, uintptr_t m, double *out);

/**
 * Threshold mean `mu` and its rescaled form `c * mu`.
 *
 * # Safety
 * `out_mu` and `out_mu_eps` must be valid pointers.
 */
enum LdpmError ldpm_mu_threshold(uintptr_t m,
                                 uintptr_t n,
                                 double epsilon,
                                 double *out_mu,
                                 double *out_mu_eps);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LDPM_H */
