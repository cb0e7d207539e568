/*
 * Copyright 2026 The TOD Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#ifndef TOD_TOD_H_
#define TOD_TOD_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define TOD_API __declspec(dllexport)
#else
#define TOD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tod_status {
  TOD_OK = 0,
  TOD_ERR_CONFIG = 1,
  TOD_ERR_DOMAIN = 2,
  TOD_ERR_SCHEMA = 3,
  TOD_ERR_ANNOTATION = 4,
  TOD_ERR_TRAINING = 5,
  TOD_ERR_IO = 6,
  TOD_ERR_INVALID_ARGUMENT = 7,
  TOD_ERR_INTERNAL = 8
} tod_status;

typedef struct tod_config tod_config;
typedef struct tod_encoder tod_encoder;

/* Message of the last failing call on this thread; empty after success. */
TOD_API const char* tod_last_error(void);
TOD_API const char* tod_status_name(int status);
TOD_API const char* tod_version(void);

/* Strings returned through char** out-parameters are released with this. */
TOD_API void tod_string_free(char* s);

TOD_API int tod_config_default(tod_config** out);
TOD_API int tod_config_load(const char* path, tod_config** out);
TOD_API int tod_config_parse(const char* json_text, tod_config** out);
TOD_API void tod_config_free(tod_config* cfg);
/* Replaces the seed list with a single seed. */
TOD_API int tod_config_set_seed(tod_config* cfg, uint64_t seed);
TOD_API int tod_config_set_scenario(tod_config* cfg, const char* scenario);
TOD_API int tod_config_set_out_dir(tod_config* cfg, const char* out_dir);
TOD_API int tod_config_out_dir(const tod_config* cfg, char** out);
TOD_API int tod_config_to_json(const tod_config* cfg, char** out);

/* Runs the configured scenario into out_dir (NULL: the config's out_dir).
 * manifest_json may be NULL. */
TOD_API int tod_run(const tod_config* cfg, const char* out_dir, char** manifest_json);
TOD_API int tod_generate(const tod_config* cfg, const char* out_dir);
/* Number of listed artifacts whose content no longer matches its hash. */
TOD_API int tod_verify_manifest(const char* manifest_path, int* mismatches);

/* Runs the built-in oracles; report holds one "PASS|FAIL name: detail" line
 * per oracle. */
TOD_API int tod_check(uint64_t seed, char** report, int* failures);

TOD_API int tod_encoder_build(int vocab_size, int token_dim, int embed_dim, uint64_t seed,
                              tod_encoder** out);
TOD_API void tod_encoder_free(tod_encoder* enc);
TOD_API int tod_encoder_embed_dim(const tod_encoder* enc, int* out);
/* Writes embed_dim doubles into out. */
TOD_API int tod_encoder_encode_tokens(const tod_encoder* enc, const int32_t* ids, size_t count,
                                      double* out, size_t out_len);
TOD_API int tod_encoder_encode_image(const tod_encoder* enc, const double* feature,
                                     size_t feature_len, double* out, size_t out_len);

#ifdef __cplusplus
}
#endif

#endif /* TOD_TOD_H_ */
