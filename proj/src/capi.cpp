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


#include "tod/tod.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <span>
#include <string>

#include "tod/harness.hpp"
#include "tod/oracles.hpp"

struct tod_config {
  tod::ExperimentConfig cfg;
};

struct tod_encoder {
  tod::Encoder encoder;
};

namespace {

thread_local std::string last_error;

int status_of(tod::ErrorKind kind) {
  switch (kind) {
    case tod::ErrorKind::kConfig: return TOD_ERR_CONFIG;
    case tod::ErrorKind::kDomain: return TOD_ERR_DOMAIN;
    case tod::ErrorKind::kSchema: return TOD_ERR_SCHEMA;
    case tod::ErrorKind::kAnnotation: return TOD_ERR_ANNOTATION;
    case tod::ErrorKind::kTraining: return TOD_ERR_TRAINING;
    case tod::ErrorKind::kIo: return TOD_ERR_IO;
  }
  return TOD_ERR_INTERNAL;
}

template <typename F>
int guarded(F&& body) {
  try {
    last_error.clear();
    body();
    return TOD_OK;
  } catch (const tod::Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const nlohmann::json::exception& e) {
    last_error = std::string("json: ") + e.what();
    return TOD_ERR_CONFIG;
  } catch (const std::exception& e) {
    last_error = e.what();
    return TOD_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown failure";
    return TOD_ERR_INTERNAL;
  }
}

int invalid(const char* what) {
  last_error = what;
  return TOD_ERR_INVALID_ARGUMENT;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* tod_last_error(void) { return last_error.c_str(); }

const char* tod_status_name(int status) {
  switch (status) {
    case TOD_OK: return "ok";
    case TOD_ERR_CONFIG: return "config error";
    case TOD_ERR_DOMAIN: return "domain error";
    case TOD_ERR_SCHEMA: return "schema error";
    case TOD_ERR_ANNOTATION: return "annotation error";
    case TOD_ERR_TRAINING: return "training error";
    case TOD_ERR_IO: return "io error";
    case TOD_ERR_INVALID_ARGUMENT: return "invalid argument";
    default: return "internal error";
  }
}

const char* tod_version(void) { return "1.0.0"; }

void tod_string_free(char* s) { std::free(s); }

int tod_config_default(tod_config** out) {
  if (!out) return invalid("null output pointer");
  return guarded([&] { *out = new tod_config{tod::default_config()}; });
}

int tod_config_load(const char* path, tod_config** out) {
  if (!path || !out) return invalid("null argument");
  return guarded([&] { *out = new tod_config{tod::load_config(path)}; });
}

int tod_config_parse(const char* json_text, tod_config** out) {
  if (!json_text || !out) return invalid("null argument");
  return guarded([&] {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
      tod::fail(tod::ErrorKind::kConfig, std::string("malformed JSON: ") + e.what());
    }
    *out = new tod_config{tod::parse_config(doc)};
  });
}

void tod_config_free(tod_config* cfg) { delete cfg; }

int tod_config_set_seed(tod_config* cfg, uint64_t seed) {
  if (!cfg) return invalid("null config");
  return guarded([&] { cfg->cfg.seeds = {seed}; });
}

int tod_config_set_scenario(tod_config* cfg, const char* scenario) {
  if (!cfg || !scenario) return invalid("null argument");
  return guarded([&] { cfg->cfg.scenario = tod::parse_scenario(scenario); });
}

int tod_config_set_out_dir(tod_config* cfg, const char* out_dir) {
  if (!cfg || !out_dir) return invalid("null argument");
  return guarded([&] { cfg->cfg.out_dir = out_dir; });
}

int tod_config_out_dir(const tod_config* cfg, char** out) {
  if (!cfg || !out) return invalid("null argument");
  return guarded([&] { *out = dup_string(cfg->cfg.out_dir); });
}

int tod_config_to_json(const tod_config* cfg, char** out) {
  if (!cfg || !out) return invalid("null argument");
  return guarded([&] { *out = dup_string(tod::config_to_json(cfg->cfg).dump(2)); });
}

int tod_run(const tod_config* cfg, const char* out_dir, char** manifest_json) {
  if (!cfg) return invalid("null config");
  return guarded([&] {
    const std::string dir = out_dir ? out_dir : cfg->cfg.out_dir;
    const nlohmann::json manifest = tod::run_experiment(cfg->cfg, dir);
    if (manifest_json) *manifest_json = dup_string(manifest.dump(2));
  });
}

int tod_generate(const tod_config* cfg, const char* out_dir) {
  if (!cfg) return invalid("null config");
  return guarded([&] { tod::generate_datasets(cfg->cfg, out_dir ? out_dir : cfg->cfg.out_dir); });
}

int tod_verify_manifest(const char* manifest_path, int* mismatches) {
  if (!manifest_path || !mismatches) return invalid("null argument");
  return guarded([&] {
    *mismatches = static_cast<int>(tod::verify_manifest(manifest_path).size());
  });
}

int tod_check(uint64_t seed, char** report, int* failures) {
  if (!report || !failures) return invalid("null argument");
  return guarded([&] {
    std::string text;
    int failed = 0;
    for (const auto& r : tod::run_oracles(seed)) {
      text += std::string(r.passed ? "PASS " : "FAIL ") + r.name + ": " + r.detail + "\n";
      failed += !r.passed;
    }
    *failures = failed;
    *report = dup_string(text);
  });
}

int tod_encoder_build(int vocab_size, int token_dim, int embed_dim, uint64_t seed,
                      tod_encoder** out) {
  if (!out) return invalid("null output pointer");
  return guarded([&] {
    *out = new tod_encoder{tod::build_encoder({vocab_size, token_dim, embed_dim, seed})};
  });
}

void tod_encoder_free(tod_encoder* enc) { delete enc; }

int tod_encoder_embed_dim(const tod_encoder* enc, int* out) {
  if (!enc || !out) return invalid("null argument");
  *out = enc->encoder.embed_dim();
  last_error.clear();
  return TOD_OK;
}

int tod_encoder_encode_tokens(const tod_encoder* enc, const int32_t* ids, size_t count,
                              double* out, size_t out_len) {
  if (!enc || !ids || !out) return invalid("null argument");
  if (out_len != static_cast<size_t>(enc->encoder.embed_dim())) {
    return invalid("output buffer length must equal embed_dim");
  }
  return guarded([&] {
    const auto z = enc->encoder.encode_tokens(std::span<const int32_t>(ids, count));
    for (size_t i = 0; i < out_len; ++i) out[i] = z[static_cast<int>(i)];
  });
}

int tod_encoder_encode_image(const tod_encoder* enc, const double* feature, size_t feature_len,
                             double* out, size_t out_len) {
  if (!enc || !feature || !out) return invalid("null argument");
  if (out_len != static_cast<size_t>(enc->encoder.embed_dim())) {
    return invalid("output buffer length must equal embed_dim");
  }
  return guarded([&] {
    tod::Vector f(static_cast<Eigen::Index>(feature_len));
    for (size_t i = 0; i < feature_len; ++i) f[static_cast<Eigen::Index>(i)] = feature[i];
    const auto z = enc->encoder.encode_image(f);
    for (size_t i = 0; i < out_len; ++i) out[i] = z[static_cast<int>(i)];
  });
}

}  // extern "C"
