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

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tod/common.hpp"

namespace tod {

struct EncoderConfig {
  int vocab_size = 16384;
  int token_dim = 64;
  int embed_dim = 32;
  std::uint64_t seed = 7;
};

// A vector of unit Euclidean norm. Only obtainable through normalize(), so
// every instance satisfies the invariant.
class UnitEmbedding {
 public:
  static UnitEmbedding normalize(const Vector& v);

  const Vector& vec() const { return v_; }
  int dim() const { return static_cast<int>(v_.size()); }
  double operator[](int i) const { return v_[i]; }
  UnitEmbedding operator-() const { return UnitEmbedding(-v_); }

 private:
  explicit UnitEmbedding(Vector v) : v_(std::move(v)) {}
  Vector v_;
};

double cosine(const UnitEmbedding& a, const UnitEmbedding& b);

// Ordered d_tok-dimensional inputs: table lookups and free vectors alike.
using TokenEmbeddingSequence = std::vector<Vector>;

// Frozen mini dual encoder: mean-pool -> linear projection -> L2 normalize.
// The projection is shared by the text and the image pathway, which puts
// both modalities in one embedding space.
class Encoder {
 public:
  static Encoder build(const EncoderConfig& cfg);

  const EncoderConfig& config() const { return cfg_; }
  int vocab_size() const { return cfg_.vocab_size; }
  int token_dim() const { return cfg_.token_dim; }
  int embed_dim() const { return cfg_.embed_dim; }

  const Matrix& token_table() const { return token_table_; }  // vocab x d_tok
  const Matrix& projection() const { return projection_; }    // d_tok x d

  Vector token(TokenId id) const;
  Vector mean_of_tokens(std::span<const TokenId> ids) const;

  UnitEmbedding encode_sequence(const TokenEmbeddingSequence& seq) const;
  UnitEmbedding encode_tokens(std::span<const TokenId> ids) const;
  UnitEmbedding encode_image(const Vector& feature) const;
  // Shared tail of both pathways, applied to an already pooled vector.
  UnitEmbedding encode_pooled(const Vector& pooled) const;

  // Gradient of upstream . encode_sequence(seq) with respect to each entry.
  std::vector<Vector> encode_sequence_backward(const TokenEmbeddingSequence& seq,
                                               const Vector& upstream) const;
  // Gradient of upstream . encode_pooled(pooled) with respect to pooled.
  Vector pooled_backward(const Vector& pooled, const Vector& upstream) const;

 private:
  Encoder(EncoderConfig cfg, Matrix table, Matrix proj)
      : cfg_(cfg), token_table_(std::move(table)), projection_(std::move(proj)) {}

  EncoderConfig cfg_;
  Matrix token_table_;
  Matrix projection_;
};

inline Encoder build_encoder(const EncoderConfig& cfg) { return Encoder::build(cfg); }

}  // namespace tod
