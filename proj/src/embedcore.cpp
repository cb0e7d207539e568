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

#include "tod/embedcore.hpp"

#include <cmath>
#include <random>
#include <string>

namespace tod {

UnitEmbedding UnitEmbedding::normalize(const Vector& v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    fail(ErrorKind::kDomain, "cannot normalize a zero or non-finite vector");
  }
  return UnitEmbedding(v / n);
}

double cosine(const UnitEmbedding& a, const UnitEmbedding& b) {
  return a.vec().dot(b.vec());
}

Encoder Encoder::build(const EncoderConfig& cfg) {
  if (cfg.vocab_size <= 0 || cfg.token_dim <= 0 || cfg.embed_dim <= 0) {
    fail(ErrorKind::kConfig, "encoder dimensions must be positive (vocab_size=" +
                                 std::to_string(cfg.vocab_size) + ", token_dim=" +
                                 std::to_string(cfg.token_dim) + ", embed_dim=" +
                                 std::to_string(cfg.embed_dim) + ")");
  }
  std::mt19937_64 rng(derive_seed(cfg.seed, "encoder"));
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(double(cfg.token_dim)));
  // Row-major fill order so the table does not depend on Eigen's storage order.
  Matrix table(cfg.vocab_size, cfg.token_dim);
  for (int r = 0; r < cfg.vocab_size; ++r)
    for (int c = 0; c < cfg.token_dim; ++c) table(r, c) = normal(rng);
  Matrix proj(cfg.token_dim, cfg.embed_dim);
  for (int r = 0; r < cfg.token_dim; ++r)
    for (int c = 0; c < cfg.embed_dim; ++c) proj(r, c) = normal(rng);
  return Encoder(cfg, std::move(table), std::move(proj));
}

Vector Encoder::token(TokenId id) const {
  if (id < 0 || id >= cfg_.vocab_size) {
    fail(ErrorKind::kDomain, "token id " + std::to_string(id) + " outside vocabulary");
  }
  return token_table_.row(id).transpose();
}

Vector Encoder::mean_of_tokens(std::span<const TokenId> ids) const {
  if (ids.empty()) fail(ErrorKind::kDomain, "empty token sequence");
  Vector acc = Vector::Zero(cfg_.token_dim);
  for (TokenId id : ids) acc += token(id);
  return acc / double(ids.size());
}

UnitEmbedding Encoder::encode_pooled(const Vector& pooled) const {
  if (pooled.size() != cfg_.token_dim) {
    fail(ErrorKind::kDomain, "input has dimension " + std::to_string(pooled.size()) +
                                 ", expected " + std::to_string(cfg_.token_dim));
  }
  return UnitEmbedding::normalize(projection_.transpose() * pooled);
}

UnitEmbedding Encoder::encode_sequence(const TokenEmbeddingSequence& seq) const {
  if (seq.empty()) fail(ErrorKind::kDomain, "empty token embedding sequence");
  Vector acc = Vector::Zero(cfg_.token_dim);
  for (const Vector& v : seq) {
    if (v.size() != cfg_.token_dim) fail(ErrorKind::kDomain, "sequence entry has wrong dimension");
    acc += v;
  }
  return encode_pooled(acc / double(seq.size()));
}

UnitEmbedding Encoder::encode_tokens(std::span<const TokenId> ids) const {
  return encode_pooled(mean_of_tokens(ids));
}

UnitEmbedding Encoder::encode_image(const Vector& feature) const {
  return encode_pooled(feature);
}

Vector Encoder::pooled_backward(const Vector& pooled, const Vector& upstream) const {
  if (upstream.size() != cfg_.embed_dim) {
    fail(ErrorKind::kDomain, "upstream gradient has dimension " +
                                 std::to_string(upstream.size()) + ", expected " +
                                 std::to_string(cfg_.embed_dim));
  }
  const Vector z = projection_.transpose() * pooled;
  const double n = z.norm();
  const Vector u = z / n;
  // d(g . z/|z|)/dz = (g - (g.u) u) / |z|
  const Vector dz = (upstream - upstream.dot(u) * u) / n;
  return projection_ * dz;
}

std::vector<Vector> Encoder::encode_sequence_backward(const TokenEmbeddingSequence& seq,
                                                      const Vector& upstream) const {
  if (seq.empty()) fail(ErrorKind::kDomain, "empty token embedding sequence");
  Vector acc = Vector::Zero(cfg_.token_dim);
  for (const Vector& v : seq) acc += v;
  const double k = double(seq.size());
  const Vector g = pooled_backward(acc / k, upstream) / k;
  return std::vector<Vector>(seq.size(), g);
}

}  // namespace tod
