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


#include "tod/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "tod/evalkit.hpp"

namespace tod {

std::string prediction_mode_name(PredictionMode mode) {
  return mode == PredictionMode::kMultiTarget ? "mtp" : "stp";
}

PredictionMode parse_prediction_mode(const std::string& name) {
  if (name == "mtp") return PredictionMode::kMultiTarget;
  if (name == "stp") return PredictionMode::kSingleTarget;
  fail(ErrorKind::kConfig, "unknown prediction mode '" + name + "' (expected mtp or stp)");
}

int PromptState::composition_of(std::span<const int> labels) const {
  std::vector<int> sub{labels[target_id]};
  for (int id : bias_ids) {
    if (id >= static_cast<int>(labels.size()) || labels[id] < 0) {
      fail(ErrorKind::kDomain, "sample has no label for prompt attribute " + std::to_string(id));
    }
    sub.push_back(labels[id]);
  }
  return layout.index(sub);
}

PromptState init_prompt_state(std::span<const TokenId> init_tokens, const AttributeSchema& schema,
                              const Encoder& encoder, PredictionMode mode) {
  if (init_tokens.empty()) fail(ErrorKind::kConfig, "prompt context length must be at least 1");
  PromptState state;
  state.mode = mode;
  state.context.resize(static_cast<Eigen::Index>(init_tokens.size()), encoder.token_dim());
  for (std::size_t k = 0; k < init_tokens.size(); ++k)
    state.context.row(static_cast<Eigen::Index>(k)) = encoder.token(init_tokens[k]).transpose();
  state.target_id = schema.target.id;
  std::vector<const AttributeSpec*> attrs{&schema.target};
  if (mode == PredictionMode::kMultiTarget) {
    for (const auto& b : schema.biases) {
      attrs.push_back(&b);
      state.bias_ids.push_back(b.id);
    }
  }
  std::vector<int> counts;
  for (const auto* a : attrs) counts.push_back(a->class_count());
  state.layout = GroupLayout(counts);
  for (int g = 0; g < state.layout.group_count(); ++g) {
    const std::vector<int> labels = state.layout.decode(g);
    std::vector<TokenId> suffix;
    for (std::size_t k = 0; k < attrs.size(); ++k) {
      if (k > 0) suffix.push_back(schema.separator);
      suffix.push_back(attrs[k]->classes[labels[k]].name_token);
    }
    state.suffixes.push_back(std::move(suffix));
  }
  return state;
}

PromptEmbeddings build_prompt_embeddings(const PromptState& state, const Encoder& encoder) {
  if (state.context.rows() < 1) fail(ErrorKind::kDomain, "prompt has no context vectors");
  const Vector context_sum = state.context.colwise().sum().transpose();
  PromptEmbeddings out;
  for (const auto& suffix : state.suffixes) {
    Vector acc = context_sum;
    for (TokenId t : suffix) acc += encoder.token(t);
    const int len = state.context_length() + static_cast<int>(suffix.size());
    Vector pooled = acc / double(len);
    out.embeddings.push_back(encoder.encode_pooled(pooled));
    out.pooled.push_back(std::move(pooled));
    out.lengths.push_back(len);
  }
  return out;
}

double ProbabilityMatrix::sum() const {
  return std::accumulate(values.begin(), values.end(), 0.0);
}

int ProbabilityMatrix::argmax() const {
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

ProbabilityMatrix softmax_of_similarities(std::span<const double> similarities,
                                          double logit_scale) {
  if (!(logit_scale > 0.0)) fail(ErrorKind::kDomain, "logit scale must be positive");
  if (similarities.empty()) fail(ErrorKind::kDomain, "no compositions to score");
  const double peak = *std::max_element(similarities.begin(), similarities.end());
  ProbabilityMatrix p;
  p.values.resize(similarities.size());
  double z = 0.0;
  for (std::size_t k = 0; k < similarities.size(); ++k) {
    p.values[k] = std::exp(logit_scale * (similarities[k] - peak));
    z += p.values[k];
  }
  for (double& v : p.values) v /= z;
  return p;
}

ProbabilityMatrix forward_probabilities(const UnitEmbedding& x, const PromptEmbeddings& prompts,
                                        double logit_scale) {
  std::vector<double> sims;
  sims.reserve(prompts.embeddings.size());
  for (const auto& e : prompts.embeddings) sims.push_back(cosine(x, e));
  return softmax_of_similarities(sims, logit_scale);
}

double ranking_loss(const ProbabilityMatrix& p, int positive, double margin) {
  if (positive < 0 || positive >= p.size()) {
    fail(ErrorKind::kDomain, "ground-truth composition " + std::to_string(positive) + " out of range");
  }
  // Extended accumulator: equal hinge terms sum without intermediate rounding.
  long double loss = 0.0L;
  for (int k = 0; k < p.size(); ++k) {
    if (k == positive) continue;
    loss += std::max(0.0, margin - (p[positive] - p[k]));
  }
  return static_cast<double>(loss);
}

double ranking_loss(const ProbabilityMatrix& p, const GroupLayout& layout, int y,
                    std::span<const int> b, double margin) {
  if (layout.group_count() != p.size()) {
    fail(ErrorKind::kDomain, "probability matrix does not match the layout");
  }
  return ranking_loss(p, layout.index(y, b), margin);
}

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) fail(ErrorKind::kConfig, std::string(name) + " must be positive");
  };
  auto non_negative = [](double v, const char* name) {
    if (!(v >= 0.0)) fail(ErrorKind::kConfig, std::string(name) + " must be non-negative");
  };
  non_negative(learning_rate, "learning_rate");
  non_negative(momentum, "momentum");
  non_negative(weight_decay, "weight_decay");
  non_negative(warmup_epochs, "warmup_epochs");
  non_negative(total_epochs, "total_epochs");
  positive(batch_size, "batch_size");
  positive(margin, "margin");
  positive(logit_scale, "logit_scale");
  positive(context_length, "context_length");
  if (warmup_epochs > total_epochs) {
    fail(ErrorKind::kConfig, "warmup_epochs exceeds total_epochs");
  }
}

std::vector<LabeledEmbedding> embed_texts(std::span<const TextSample> texts,
                                          const Encoder& encoder, const PromptState& state) {
  std::vector<LabeledEmbedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts)
    out.push_back({encoder.encode_tokens(t.tokens), state.composition_of(t.labels)});
  return out;
}

std::vector<LabeledEmbedding> embed_images(std::span<const ImageSample> images,
                                           const Encoder& encoder, const PromptState& state) {
  std::vector<LabeledEmbedding> out;
  out.reserve(images.size());
  for (const auto& img : images)
    out.push_back({encoder.encode_image(img.feature), state.composition_of(img.labels)});
  return out;
}

namespace {

void check_batch(std::span<const LabeledEmbedding> batch, const PromptState& state) {
  if (batch.empty()) fail(ErrorKind::kDomain, "empty batch");
  for (const auto& ex : batch) {
    if (ex.label < 0 || ex.label >= state.composition_count()) {
      fail(ErrorKind::kDomain, "sample label outside the prompt compositions");
    }
  }
}

}  // namespace

LossAndGradient loss_gradients(std::span<const LabeledEmbedding> batch, const PromptState& state,
                               const Encoder& encoder, const TrainConfig& cfg) {
  check_batch(batch, state);
  const PromptEmbeddings prompts = build_prompt_embeddings(state, encoder);
  const int n = state.composition_count();
  const double inv_batch = 1.0 / double(batch.size());
  std::vector<Vector> upstream(n, Vector::Zero(encoder.embed_dim()));
  std::vector<double> dp(n), dlogit(n);
  LossAndGradient out;
  for (const auto& ex : batch) {
    const ProbabilityMatrix p = forward_probabilities(ex.embedding, prompts, cfg.logit_scale);
    out.loss += ranking_loss(p, ex.label, cfg.margin) * inv_batch;
    std::fill(dp.begin(), dp.end(), 0.0);
    int active = 0;
    for (int k = 0; k < n; ++k) {
      if (k == ex.label) continue;
      if (cfg.margin - (p[ex.label] - p[k]) > 0.0) {
        dp[k] = 1.0;
        ++active;
      }
    }
    if (active == 0) continue;
    dp[ex.label] = -double(active);
    double mean_dp = 0.0;
    for (int k = 0; k < n; ++k) mean_dp += dp[k] * p[k];
    for (int k = 0; k < n; ++k) {
      dlogit[k] = p[k] * (dp[k] - mean_dp);
      upstream[k] += (cfg.logit_scale * dlogit[k] * inv_batch) * ex.embedding.vec();
    }
  }
  // Every context vector enters each prompt through the same mean, so all
  // rows share one gradient.
  Vector row = Vector::Zero(encoder.token_dim());
  for (int k = 0; k < n; ++k) {
    row += encoder.pooled_backward(prompts.pooled[k], upstream[k]) / double(prompts.lengths[k]);
  }
  out.gradient = row.transpose().replicate(state.context_length(), 1);
  return out;
}

double batch_loss(std::span<const LabeledEmbedding> batch, const PromptState& state,
                  const Encoder& encoder, const TrainConfig& cfg) {
  check_batch(batch, state);
  const PromptEmbeddings prompts = build_prompt_embeddings(state, encoder);
  double loss = 0.0;
  for (const auto& ex : batch) {
    loss += ranking_loss(forward_probabilities(ex.embedding, prompts, cfg.logit_scale), ex.label,
                         cfg.margin);
  }
  return loss / double(batch.size());
}

Matrix finite_difference_gradient(std::span<const LabeledEmbedding> batch,
                                  const PromptState& state, const Encoder& encoder,
                                  const TrainConfig& cfg, double step) {
  if (!(step > 0.0)) fail(ErrorKind::kDomain, "finite-difference step must be positive");
  PromptState probe = state;
  Matrix grad(state.context.rows(), state.context.cols());
  for (Eigen::Index r = 0; r < grad.rows(); ++r) {
    for (Eigen::Index c = 0; c < grad.cols(); ++c) {
      const double base = state.context(r, c);
      probe.context(r, c) = base + step;
      const double up = batch_loss(batch, probe, encoder, cfg);
      probe.context(r, c) = base - step;
      const double down = batch_loss(batch, probe, encoder, cfg);
      probe.context(r, c) = base;
      grad(r, c) = (up - down) / (2.0 * step);
    }
  }
  return grad;
}

OptimizerState init_optimizer(const PromptState& state) {
  OptimizerState opt;
  opt.momentum_buffer = Matrix::Zero(state.context.rows(), state.context.cols());
  return opt;
}

double warmup_learning_rate(const TrainConfig& cfg, double epoch_progress) {
  if (cfg.warmup_epochs <= 0) return cfg.learning_rate;
  return cfg.learning_rate * std::min(1.0, epoch_progress / double(cfg.warmup_epochs));
}

void sgd_step(PromptState& state, const Matrix& gradient, OptimizerState& opt,
              const TrainConfig& cfg, double epoch_progress) {
  if (gradient.rows() != state.context.rows() || gradient.cols() != state.context.cols() ||
      opt.momentum_buffer.rows() != state.context.rows() ||
      opt.momentum_buffer.cols() != state.context.cols()) {
    fail(ErrorKind::kDomain, "gradient or momentum buffer shape does not match the context");
  }
  if (!gradient.allFinite()) {
    fail(ErrorKind::kTraining, "non-finite gradient at epoch " + std::to_string(opt.epoch) +
                                   ", step " + std::to_string(opt.step));
  }
  const double lr = warmup_learning_rate(cfg, epoch_progress);
  const Matrix direction = gradient + cfg.weight_decay * state.context;
  opt.momentum_buffer = cfg.momentum * opt.momentum_buffer + direction;
  state.context -= lr * opt.momentum_buffer;
  ++opt.step;
}

EvalSet make_eval_set(std::span<const ImageSample> images, const Encoder& encoder,
                      const PromptState& state, const AttributeSchema& world,
                      std::span<const int> eval_attribute_ids) {
  EvalSet set;
  set.group_count = world.target.class_count();
  for (int id : eval_attribute_ids) set.group_count *= world.attribute(id).class_count();
  set.examples = embed_images(images, encoder, state);
  set.truth.reserve(images.size());
  for (const auto& img : images) {
    PredictionRecord rec;
    rec.true_y = img.labels[world.target.id];
    for (int id : eval_attribute_ids) rec.true_b.push_back(img.labels[id]);
    rec.group = regroup_index(img.labels, world, eval_attribute_ids);
    set.truth.push_back(std::move(rec));
  }
  return set;
}

TrainResult train(std::span<const LabeledEmbedding> train_set, const EvalSet& validation,
                  const TrainConfig& cfg, const PromptState& initial, const Encoder& encoder,
                  const EvalSet* test) {
  cfg.validate();
  if (train_set.empty()) fail(ErrorKind::kConfig, "training set is empty");
  if (validation.examples.empty()) fail(ErrorKind::kConfig, "validation set is empty");
  TrainResult result;
  PromptState state = initial;
  OptimizerState opt = init_optimizer(state);
  const std::size_t n = train_set.size();
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t steps = (n + bs - 1) / bs;
  std::vector<std::size_t> order(n);
  std::vector<LabeledEmbedding> batch;
  for (int epoch = 0; epoch < cfg.total_epochs; ++epoch) {
    opt.epoch = epoch;
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle/" + std::to_string(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double train_loss = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      batch.clear();
      for (std::size_t i = s * bs; i < std::min(n, (s + 1) * bs); ++i)
        batch.push_back(train_set[order[i]]);
      const LossAndGradient lg = loss_gradients(batch, state, encoder, cfg);
      train_loss += lg.loss * double(batch.size());
      const double progress = epoch + double(s + 1) / double(steps);
      sgd_step(state, lg.gradient, opt, cfg, progress);
    }
    result.record.train_loss.push_back(train_loss / double(n));
    result.record.val_loss.push_back(batch_loss(validation.examples, state, encoder, cfg));
    result.record.val_metrics.push_back(evaluate(validation, state, encoder, cfg.logit_scale));
    if (test) {
      result.record.test_loss.push_back(batch_loss(test->examples, state, encoder, cfg));
      result.record.test_metrics.push_back(evaluate(*test, state, encoder, cfg.logit_scale));
    }
    result.snapshots.push_back(state);
  }
  return result;
}

std::string checkpoint_json(const PromptState& state, const TrainConfig& cfg, int epoch) {
  nlohmann::json ctx = nlohmann::json::array();
  for (Eigen::Index r = 0; r < state.context.rows(); ++r) {
    std::vector<double> row(state.context.cols());
    for (Eigen::Index c = 0; c < state.context.cols(); ++c) row[c] = state.context(r, c);
    ctx.push_back(row);
  }
  nlohmann::json j = {
      {"epoch", epoch},
      {"mode", prediction_mode_name(state.mode)},
      {"context", ctx},
      {"suffixes", state.suffixes},
      {"train",
       {{"learning_rate", cfg.learning_rate},
        {"momentum", cfg.momentum},
        {"weight_decay", cfg.weight_decay},
        {"warmup_epochs", cfg.warmup_epochs},
        {"total_epochs", cfg.total_epochs},
        {"batch_size", cfg.batch_size},
        {"margin", cfg.margin},
        {"logit_scale", cfg.logit_scale},
        {"context_length", cfg.context_length},
        {"seed", cfg.seed}}}};
  return j.dump(2);
}

void load_checkpoint(const std::string& json_text, PromptState& state) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kIo, std::string("malformed checkpoint: ") + e.what());
  }
  const auto& ctx = j.at("context");
  if (static_cast<Eigen::Index>(ctx.size()) != state.context.rows()) {
    fail(ErrorKind::kConfig, "checkpoint context length does not match the prompt");
  }
  if (parse_prediction_mode(j.at("mode").get<std::string>()) != state.mode) {
    fail(ErrorKind::kConfig, "checkpoint prediction mode does not match the prompt");
  }
  for (Eigen::Index r = 0; r < state.context.rows(); ++r) {
    const auto row = ctx[r].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != state.context.cols()) {
      fail(ErrorKind::kConfig, "checkpoint token dimension does not match the encoder");
    }
    for (Eigen::Index c = 0; c < state.context.cols(); ++c) state.context(r, c) = row[c];
  }
}

std::string loss_record_csv(const LossRecord& record) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,train_loss,val_loss,val_wg,val_avg\n";
  for (int e = 0; e < record.epochs(); ++e) {
    out << e << ',' << record.train_loss[e] << ',' << record.val_loss[e] << ','
        << record.val_metrics[e].worst_group << ',' << record.val_metrics[e].average << '\n';
  }
  return out.str();
}

}  // namespace tod
