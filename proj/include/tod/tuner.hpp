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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tod/embedcore.hpp"
#include "tod/metrics.hpp"
#include "tod/synthworld.hpp"

namespace tod {

// kMultiTarget enumerates target x every bias; kSingleTarget the target only.
enum class PredictionMode { kMultiTarget, kSingleTarget };

std::string prediction_mode_name(PredictionMode mode);
PredictionMode parse_prediction_mode(const std::string& name);

// Learnable context v_1..v_M followed, per composition, by the frozen class
// name tokens joined with the separator: [v_1..v_M, target_i, sep, bias_j, ...].
struct PromptState {
  Matrix context;  // M x d_tok, the only trainable parameters
  PredictionMode mode = PredictionMode::kMultiTarget;
  GroupLayout layout;  // compositions enumerated by the prompts
  int target_id = 0;
  std::vector<int> bias_ids;  // attribute ids named after the target, in order
  std::vector<std::vector<TokenId>> suffixes;  // frozen part per composition

  int context_length() const { return static_cast<int>(context.rows()); }
  int composition_count() const { return static_cast<int>(suffixes.size()); }
  // Composition index of a sample given its labels by attribute id.
  int composition_of(std::span<const int> labels) const;
};

PromptState init_prompt_state(std::span<const TokenId> init_tokens, const AttributeSchema& schema,
                              const Encoder& encoder, PredictionMode mode);

struct PromptEmbeddings {
  std::vector<UnitEmbedding> embeddings;  // one per composition
  std::vector<Vector> pooled;             // pre-projection means, kept for backward
  std::vector<int> lengths;               // prompt token counts
};

PromptEmbeddings build_prompt_embeddings(const PromptState& state, const Encoder& encoder);

// Probabilities over all compositions, flattened in group order.
struct ProbabilityMatrix {
  std::vector<double> values;

  int size() const { return static_cast<int>(values.size()); }
  double operator[](int i) const { return values[i]; }
  double sum() const;
  int argmax() const;  // lowest index on ties
};

ProbabilityMatrix forward_probabilities(const UnitEmbedding& x, const PromptEmbeddings& prompts,
                                        double logit_scale);
ProbabilityMatrix softmax_of_similarities(std::span<const double> similarities,
                                          double logit_scale);

double ranking_loss(const ProbabilityMatrix& p, int positive, double margin);
double ranking_loss(const ProbabilityMatrix& p, const GroupLayout& layout, int y,
                    std::span<const int> b, double margin);

struct TrainConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int warmup_epochs = 1;
  int total_epochs = 10;
  int batch_size = 256;
  double margin = 0.1;
  double logit_scale = 4.0;
  int context_length = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

// A sample reduced to what the loss sees: its embedding and the index of its
// ground-truth composition in the prompt layout.
struct LabeledEmbedding {
  UnitEmbedding embedding;
  int label = 0;
};

std::vector<LabeledEmbedding> embed_texts(std::span<const TextSample> texts,
                                          const Encoder& encoder, const PromptState& state);
std::vector<LabeledEmbedding> embed_images(std::span<const ImageSample> images,
                                           const Encoder& encoder, const PromptState& state);

struct LossAndGradient {
  double loss = 0.0;  // batch mean
  Matrix gradient;    // same shape as PromptState::context
};

LossAndGradient loss_gradients(std::span<const LabeledEmbedding> batch, const PromptState& state,
                               const Encoder& encoder, const TrainConfig& cfg);

double batch_loss(std::span<const LabeledEmbedding> batch, const PromptState& state,
                  const Encoder& encoder, const TrainConfig& cfg);

// Central differences of batch_loss over every context coordinate.
Matrix finite_difference_gradient(std::span<const LabeledEmbedding> batch,
                                  const PromptState& state, const Encoder& encoder,
                                  const TrainConfig& cfg, double step);

struct OptimizerState {
  Matrix momentum_buffer;
  int epoch = 0;
  long step = 0;
};

OptimizerState init_optimizer(const PromptState& state);

// Linear warmup from 0 over warmup_epochs, measured in fractional epochs.
double warmup_learning_rate(const TrainConfig& cfg, double epoch_progress);

// Momentum SGD with weight decay on the context; throws a training error on
// a non-finite gradient.
void sgd_step(PromptState& state, const Matrix& gradient, OptimizerState& opt,
              const TrainConfig& cfg, double epoch_progress);

struct LossRecord {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<GroupMetrics> val_metrics;
  std::vector<double> test_loss;            // filled when a test set is given
  std::vector<GroupMetrics> test_metrics;

  int epochs() const { return static_cast<int>(train_loss.size()); }
};

// Images in the evaluation sets are scored on the prompt layout for the loss
// and regrouped by `eval_attribute_ids` (target x those attributes) for metrics.
struct EvalSet {
  std::vector<LabeledEmbedding> examples;
  std::vector<PredictionRecord> truth;  // true labels and evaluation groups
  int group_count = 0;
};

EvalSet make_eval_set(std::span<const ImageSample> images, const Encoder& encoder,
                      const PromptState& state, const AttributeSchema& world,
                      std::span<const int> eval_attribute_ids);

struct TrainResult {
  std::vector<PromptState> snapshots;  // one per epoch, after that epoch
  LossRecord record;
};

TrainResult train(std::span<const LabeledEmbedding> train_set, const EvalSet& validation,
                  const TrainConfig& cfg, const PromptState& initial, const Encoder& encoder,
                  const EvalSet* test = nullptr);

// Context vectors and training config as JSON, doubles at round-trip precision.
std::string checkpoint_json(const PromptState& state, const TrainConfig& cfg, int epoch);
// Restores the context of `state` from a checkpoint; shapes must match.
void load_checkpoint(const std::string& json_text, PromptState& state);

// Columns: epoch, train_loss, val_loss, val_wg, val_avg.
std::string loss_record_csv(const LossRecord& record);

}  // namespace tod
