/* SPDX-License-Identifier: MIT OR Apache-2.0 */

#ifndef STEERED_DECODE_H
#define STEERED_DECODE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Which parts of the debiasing signal are applied.
 */
typedef enum SdMode {
  SD_MODE_NONE = 0,
  SD_MODE_FULL = 1,
  SD_MODE_EXPERT_ONLY = 2,
  SD_MODE_ANTI_ONLY = 3,
} SdMode;

/*
 Result codes. Values 1 to 3 match the command-line exit codes.
 */
typedef enum SdStatus {
  SD_STATUS_OK = 0,
  SD_STATUS_INVALID_ARGUMENT = 1,
  SD_STATUS_DATA = 2,
  SD_STATUS_TRANSPORT = 3,
  SD_STATUS_NULL_POINTER = 4,
  SD_STATUS_BUFFER_TOO_SMALL = 5,
  SD_STATUS_PANIC = 6,
} SdStatus;

/*
 Opaque next-token distribution provider (n-gram, uniform, remote or
 debiased ensemble).
 */
typedef struct SdProvider SdProvider;

/*
 Opaque vocabulary handle.
 */
typedef struct SdVocab SdVocab;

/*
 Sampling settings; obtain defaults from [`sd_sampler_default`].
 */
typedef struct SdSamplerConfig {
  double top_p;
  double temperature;
  size_t max_new_tokens;
  uint64_t seed;
  bool greedy;
} SdSamplerConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or null. The pointer is
 valid until the next library call on the same thread.
 */
const char *sd_last_error_message(void);

/*
 Default sampler settings: top_p 0.9, temperature 1, 15 new tokens, seed 0.
 */
struct SdSamplerConfig sd_sampler_default(void);

/*
 Loads a vocabulary file (one token per line).
 */
enum SdStatus sd_vocab_load(const char *path, struct SdVocab **out);

void sd_vocab_free(struct SdVocab *vocab);

/*
 Number of tokens, or 0 for a null handle.
 */
size_t sd_vocab_size(const struct SdVocab *vocab);

enum SdStatus sd_vocab_fingerprint(const struct SdVocab *vocab, uint64_t *out);

/*
 Tokenizes `text` into `ids`. `out_len` always receives the full length;
 if it exceeds `capacity` nothing is written and `SD_STATUS_BUFFER_TOO_SMALL`
 is returned.
 */
enum SdStatus sd_vocab_tokenize(const struct SdVocab *vocab,
                                const char *text,
                                uint32_t *ids,
                                size_t capacity,
                                size_t *out_len);

/*
 Loads an n-gram model file.
 */
enum SdStatus sd_ngram_load(const char *path, struct SdProvider **out);

/*
 Uniform provider over a vocabulary.
 */
enum SdStatus sd_uniform_new(const struct SdVocab *vocab, struct SdProvider **out);

/*
 Connects to a logit server and performs the vocabulary handshake.
 */
enum SdStatus sd_remote_connect(const char *url, uint64_t timeout_ms, struct SdProvider **out);

/*
 Wraps `base` with one expert/anti-expert pair. Either side may be null.
 Inputs are shared, not consumed; free them independently.
 */
enum SdStatus sd_debiased_new(const struct SdProvider *base,
                              const struct SdProvider *expert,
                              const struct SdProvider *anti_expert,
                              double alpha,
                              enum SdMode mode,
                              struct SdProvider **out);

void sd_provider_free(struct SdProvider *provider);

/*
 Vocabulary size, or 0 for a null handle.
 */
size_t sd_provider_vocab_size(const struct SdProvider *provider);

/*
 Next-token probabilities for `context`. `len` must equal the provider's
 vocabulary size.
 */
enum SdStatus sd_next_probs(const struct SdProvider *provider,
                            const uint32_t *context,
                            size_t context_len,
                            double *probs,
                            size_t len);

/*
 `softmax(z + alpha * (z_plus - z_minus))` over arrays of length `len`.
 */
enum SdStatus sd_combine_logits(const double *z,
                                const double *z_plus,
                                const double *z_minus,
                                size_t len,
                                double alpha,
                                double *out);

/*
 Hellinger distance between two distributions of length `len`.
 */
enum SdStatus sd_hellinger(const double *p, const double *q, size_t len, double *out);

/*
 Samples a continuation of `prompt`. On success `*out_text` holds a
 NUL-terminated string to be released with [`sd_string_free`].
 */
enum SdStatus sd_generate(const struct SdProvider *provider,
                          const struct SdVocab *vocab,
                          const char *prompt,
                          const struct SdSamplerConfig *config,
                          char **out_text);

void sd_string_free(char *s);

/*
 Parses a 16-hex-digit fingerprint. Exposed for bindings that need to
 compare vocabularies without loading them.
 */
enum SdStatus sd_fingerprint_parse(const char *hex, uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STEERED_DECODE_H */
