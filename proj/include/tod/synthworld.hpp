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
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tod/common.hpp"
#include "tod/embedcore.hpp"

namespace tod {

using Rng = std::mt19937_64;

struct ClassSpec {
  std::string name;
  TokenId name_token = -1;
  std::vector<std::vector<TokenId>> descriptor_pool;
  // Probability that a generated text description carries the class name.
  double name_token_rate = 0.0;
};

struct AttributeSpec {
  int id = 0;  // stable position in the world's attribute pool (target = 0)
  std::string name;
  std::vector<ClassSpec> classes;

  int class_count() const { return static_cast<int>(classes.size()); }
};

// Row-major indexing over a product of class counts, target first.
class GroupLayout {
 public:
  GroupLayout() = default;
  explicit GroupLayout(std::vector<int> class_counts);

  int group_count() const { return group_count_; }
  int dimension_count() const { return static_cast<int>(counts_.size()); }
  const std::vector<int>& class_counts() const { return counts_; }

  int index(int y, std::span<const int> b) const;
  int index(std::span<const int> labels) const;  // labels = (y, b1, ..., bk)
  std::vector<int> decode(int g) const;

 private:
  std::vector<int> counts_;
  int group_count_ = 0;
};

// Target attribute, labeled bias attributes, and unlabeled distractors.
// Every attribute carries its pool id, so samples can be regrouped by any
// subset of attributes.
struct AttributeSchema {
  AttributeSpec target;
  std::vector<AttributeSpec> biases;
  std::vector<AttributeSpec> distractors;
  TokenId separator = -1;
  std::vector<TokenId> template_tokens;

  int attribute_count() const {
    return 1 + static_cast<int>(biases.size() + distractors.size());
  }
  GroupLayout layout() const;
  const AttributeSpec& attribute(int id) const;
  const AttributeSpec* find(const std::string& name) const;
  std::vector<int> bias_ids() const;

  // Same world with a different set of labeled attributes; every attribute
  // not named becomes a distractor. Throws a config error on unknown names.
  AttributeSchema with_biases(const std::vector<std::string>& names) const;
};

struct AttributeDescription {
  std::string name;
  std::vector<std::string> classes;
  double name_token_rate = 0.0;
};

// Knobs of the synthetic token geometry.
struct WorldShape {
  int pool_size = 8;            // descriptor sequences per class
  int min_descriptor_length = 3;
  int max_descriptor_length = 5;
  int concept_tokens = 12;      // distinct descriptor tokens per class
  int template_length = 5;
  // Cosine between each target class name and the name of the bias class it
  // co-occurs with; the source of zero-shot bias.
  double spurious_alignment = 0.6;
  // Cosine between a descriptor token and its class anchor direction.
  double descriptor_alignment = 0.4;
};

struct SchemaDescription {
  AttributeDescription target;
  std::vector<AttributeDescription> biases;
  std::vector<AttributeDescription> distractors;
  WorldShape shape;
  std::uint64_t seed = 0;  // drives descriptor pool sampling
};

// Assigns token ids for names, separator, template and descriptor pools.
// Token choice is driven by the frozen encoder geometry.
AttributeSchema build_schema(const SchemaDescription& desc, const Encoder& encoder);

// labels: class index per attribute id, -1 where the attribute is absent.
struct TextSample {
  std::vector<TokenId> tokens;
  int y = 0;
  std::vector<int> b;
  int g = 0;
  std::vector<int> labels;
};

struct ImageSample {
  Vector feature;
  int y = 0;
  std::vector<int> b;
  int g = 0;
  std::vector<int> labels;
};

// Source of per-class descriptions. The template provider samples the fixed
// descriptor pools; other generators can be plugged in behind this interface.
class DescriptionProvider {
 public:
  virtual ~DescriptionProvider() = default;
  virtual std::vector<TokenId> describe(const AttributeSchema& schema, int attribute_id,
                                        int class_index, Rng& rng) const = 0;
};

class TemplateDescriptionProvider final : public DescriptionProvider {
 public:
  std::vector<TokenId> describe(const AttributeSchema& schema, int attribute_id,
                                int class_index, Rng& rng) const override;
};

std::vector<TokenId> sample_class_description(const AttributeSchema& schema, int attribute_id,
                                              int class_index, Rng& rng);

struct DescriptionPart {
  int attribute_id = 0;
  int class_index = 0;
  std::vector<TokenId> tokens;
};

// Parts for the target and every bias, in schema order, optionally followed
// by distractor parts. Labels come from the parts' source classes.
TextSample compose_description(const AttributeSchema& schema,
                               std::span<const DescriptionPart> parts);

struct TextOptions {
  int distractor_parts = 0;  // unlabeled distractor descriptions per text
};

std::vector<TextSample> build_balanced_text_set(const AttributeSchema& schema, int n_per_group,
                                                Rng& rng, const TextOptions& options = {},
                                                const DescriptionProvider* provider = nullptr);

// Latent caption: descriptor tokens of every attribute (never class names).
ImageSample render_image(const AttributeSchema& schema, const Encoder& encoder, int y,
                         std::span<const int> b, Rng& rng, double noise_std);

// Group counts of a biased image set, target-major; the correlated bias
// class of target class i is class i of each bias attribute.
std::vector<int> biased_group_counts(const GroupLayout& layout, int n_total, double rho);

std::vector<ImageSample> build_biased_image_set(const AttributeSchema& schema,
                                                const Encoder& encoder, int n_total, double rho,
                                                Rng& rng, double noise_std);

std::vector<ImageSample> build_balanced_image_set(const AttributeSchema& schema,
                                                  const Encoder& encoder, int n_per_group,
                                                  Rng& rng, double noise_std);

// Regroups labels by target x the listed attribute ids.
int regroup_index(std::span<const int> labels, const AttributeSchema& schema,
                  std::span<const int> attribute_ids);

}  // namespace tod
