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

#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "tod/evalkit.hpp"

namespace tod {
namespace {

SchemaDescription TwoByTwo() {
  SchemaDescription d;
  d.target = {"bird", {"landbird", "waterbird"}, 1.0};
  d.biases = {{"place", {"land", "water"}, 0.0}};
  d.seed = 5;
  return d;
}

class Tuner : public ::testing::Test {
 protected:
  Encoder encoder = build_encoder({2048, 32, 16, 7});
  AttributeSchema schema = build_schema(TwoByTwo(), encoder);

  PromptState State(PredictionMode mode) const {
    return init_prompt_state(schema.template_tokens, schema, encoder, mode);
  }

  std::vector<LabeledEmbedding> Texts(const PromptState& state, int per_group, std::uint64_t seed) const {
    Rng rng(seed);
    const auto texts = build_balanced_text_set(schema, per_group, rng);
    return embed_texts(texts, encoder, state);
  }

  EvalSet Images(const PromptState& state, int n, std::uint64_t seed) const {
    Rng rng(seed);
    const auto imgs = build_biased_image_set(schema, encoder, n, 0.9, rng, 0.02);
    const std::vector<int> eval_ids{schema.biases[0].id};
    return make_eval_set(imgs, encoder, state, schema, eval_ids);
  }
};

double RelativeError(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

TEST_F(Tuner, InitCopiesTemplateRows) {
  const PromptState s = State(PredictionMode::kMultiTarget);
  ASSERT_EQ(s.context_length(), 5);
  for (int k = 0; k < 5; ++k)
    EXPECT_EQ(Vector(s.context.row(k).transpose()), encoder.token(schema.template_tokens[k]));
  EXPECT_EQ(s.composition_count(), 4);
  EXPECT_EQ(State(PredictionMode::kSingleTarget).composition_count(), 2);
  const std::vector<TokenId> none;
  try {
    init_prompt_state(none, schema, encoder, PredictionMode::kMultiTarget);
    FAIL() << "expected configuration error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

TEST_F(Tuner, PromptLayoutAndSuffixes) {
  const PromptState s = State(PredictionMode::kMultiTarget);
  const PromptEmbeddings p = build_prompt_embeddings(s, encoder);
  ASSERT_EQ(p.embeddings.size(), 4u);
  EXPECT_EQ(s.suffixes[1], (std::vector<TokenId>{schema.target.classes[0].name_token, schema.separator,
                                                  schema.biases[0].classes[1].name_token}));
  for (int g = 0; g < 4; ++g) {
    EXPECT_EQ(p.lengths[g], 8);
    for (int h = g + 1; h < 4; ++h) EXPECT_LT(cosine(p.embeddings[g], p.embeddings[h]), 1.0 - 1e-9);
  }
  std::vector<TokenId> full(schema.template_tokens.begin(), schema.template_tokens.end());
  full.insert(full.end(), s.suffixes[2].begin(), s.suffixes[2].end());
  EXPECT_LT((p.embeddings[2].vec() - encoder.encode_tokens(full).vec()).norm(), 1e-12);
}

TEST_F(Tuner, ContextPermutationIsInvisible) {
  PromptState s = State(PredictionMode::kMultiTarget);
  const PromptEmbeddings before = build_prompt_embeddings(s, encoder);
  s.context.row(0).swap(s.context.row(3));
  const PromptEmbeddings after = build_prompt_embeddings(s, encoder);
  for (int g = 0; g < 4; ++g)
    EXPECT_LT((before.embeddings[g].vec() - after.embeddings[g].vec()).norm(), 1e-14);
}

TEST(Probabilities, SoftmaxWorkedExample) {
  const std::vector<double> sims{0.9, 0.1, 0.1, 0.1};
  const ProbabilityMatrix p = softmax_of_similarities(sims, 1.0);
  const double expected = std::exp(0.9) / (std::exp(0.9) + 3.0 * std::exp(0.1));
  EXPECT_NEAR(p[0], expected, 1e-15);
  EXPECT_NEAR(p[0], 0.426, 5e-4);
  EXPECT_NEAR(p.sum(), 1.0, 1e-12);
}

TEST(Probabilities, UniformAndNormalized) {
  const std::vector<double> flat(6, 0.37);
  const ProbabilityMatrix u = softmax_of_similarities(flat, 4.0);
  for (int i = 0; i < 6; ++i) EXPECT_DOUBLE_EQ(u[i], 1.0 / 6.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> cos(-1.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> sims(2 + t % 7);
    for (double& v : sims) v = cos(rng);
    EXPECT_NEAR(softmax_of_similarities(sims, 1.0 + t).sum(), 1.0, 1e-9);
  }
}

TEST(Probabilities, ArgmaxIgnoresScale) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> cos(-1.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> sims(4);
    for (double& v : sims) v = cos(rng);
    const int ref = softmax_of_similarities(sims, 1.0).argmax();
    for (double s : {4.0, 8.0, 100.0}) EXPECT_EQ(softmax_of_similarities(sims, s).argmax(), ref);
  }
}

TEST(Loss, WorkedHingeExample) {
  ProbabilityMatrix p{{0.5, 0.2, 0.2, 0.1}};
  EXPECT_NEAR(ranking_loss(p, 0, 0.4), 0.2, 1e-15);
  const GroupLayout layout({2, 2});
  const std::vector<int> b{0};
  EXPECT_NEAR(ranking_loss(p, layout, 0, b, 0.4), 0.2, 1e-15);
}

TEST(Loss, UniformEntries) {
  for (int n : {2, 4, 16}) {
    ProbabilityMatrix p{std::vector<double>(n, 1.0 / n)};
    EXPECT_DOUBLE_EQ(ranking_loss(p, 0, 0.3), (n - 1) * 0.3);
  }
}

TEST(Loss, ZeroExactlyWhenSeparated) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> v(4);
    double z = 0;
    for (double& x : v) z += (x = u(rng));
    for (double& x : v) x /= z;
    const ProbabilityMatrix p{v};
    const double margin = 0.05 + 0.4 * u(rng);
    bool separated = true;
    for (int k = 1; k < 4; ++k) separated &= v[0] - v[k] >= margin;
    const double loss = ranking_loss(p, 0, margin);
    EXPECT_GE(loss, 0.0);
    EXPECT_EQ(loss == 0.0, separated);
  }
}

TEST(Loss, InvalidGroundTruth) {
  ProbabilityMatrix p{{0.5, 0.5}};
  try {
    ranking_loss(p, 2, 0.1);
    FAIL() << "expected domain error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDomain);
  }
}

TEST_F(Tuner, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, 0.3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const PredictionMode mode = trial % 2 ? PredictionMode::kSingleTarget : PredictionMode::kMultiTarget;
    PromptState s = State(mode);
    for (int i = 0; i < s.context.size(); ++i) s.context.data()[i] += noise(rng);
    TrainConfig cfg;
    cfg.margin = 0.2 + 0.7 * u(rng);
    cfg.logit_scale = 1.0 + 7.0 * u(rng);
    const auto batch = Texts(s, 3, 100 + trial);
    const LossAndGradient lg = loss_gradients(batch, s, encoder, cfg);
    ASSERT_GT(lg.loss, 0.0);
    const Matrix fd = finite_difference_gradient(batch, s, encoder, cfg, 1e-5);
    EXPECT_LT(RelativeError(lg.gradient, fd), 1e-5) << "trial " << trial;
    EXPECT_NEAR(lg.loss, batch_loss(batch, s, encoder, cfg), 1e-14);
  }
}

TEST_F(Tuner, FiniteDifferenceConvergesQuadratically) {
  PromptState s = State(PredictionMode::kMultiTarget);
  TrainConfig cfg;
  cfg.margin = 2.0;  // every hinge active, so the loss is smooth
  cfg.logit_scale = 8.0;
  const auto batch = Texts(s, 2, 7);
  const Matrix h1 = finite_difference_gradient(batch, s, encoder, cfg, 4e-2);
  const Matrix h2 = finite_difference_gradient(batch, s, encoder, cfg, 2e-2);
  const Matrix h3 = finite_difference_gradient(batch, s, encoder, cfg, 1e-2);
  const double ratio = (h1 - h2).norm() / (h2 - h3).norm();
  EXPECT_GT(ratio, 3.5);
  EXPECT_LT(ratio, 4.5);
}

TEST_F(Tuner, FlatRegionHasZeroGradient) {
  const PromptState s = State(PredictionMode::kMultiTarget);
  TrainConfig cfg;
  cfg.margin = 1e-6;
  cfg.logit_scale = 4.0;
  const PromptEmbeddings p = build_prompt_embeddings(s, encoder);
  std::vector<LabeledEmbedding> batch;
  for (int g = 0; g < 4; ++g) batch.push_back({p.embeddings[g], g});
  const LossAndGradient lg = loss_gradients(batch, s, encoder, cfg);
  EXPECT_EQ(lg.loss, 0.0);
  EXPECT_EQ(lg.gradient.norm(), 0.0);
  EXPECT_EQ(finite_difference_gradient(batch, s, encoder, cfg, 1e-9).norm(), 0.0);
}

TEST_F(Tuner, DuplicatedBatchKeepsMeanGradient) {
  const PromptState s = State(PredictionMode::kMultiTarget);
  TrainConfig cfg;
  auto batch = Texts(s, 4, 8);
  const LossAndGradient once = loss_gradients(batch, s, encoder, cfg);
  const auto copy = batch;
  batch.insert(batch.end(), copy.begin(), copy.end());
  const LossAndGradient twice = loss_gradients(batch, s, encoder, cfg);
  EXPECT_NEAR(once.loss, twice.loss, 1e-14);
  EXPECT_LT(RelativeError(twice.gradient, once.gradient), 1e-12);
}

TEST_F(Tuner, DegenerateBiasReducesToSingleTarget) {
  const PromptState stp = State(PredictionMode::kSingleTarget);
  PromptState mtp = stp;
  mtp.mode = PredictionMode::kMultiTarget;
  mtp.layout = GroupLayout({2, 1});
  mtp.bias_ids = {schema.biases[0].id};
  TrainConfig cfg;
  std::vector<LabeledEmbedding> batch_stp = Texts(stp, 4, 9);
  std::vector<LabeledEmbedding> batch_mtp = batch_stp;
  for (auto& ex : batch_mtp) {
    const std::vector<int> labels{ex.label, 0};
    EXPECT_EQ(mtp.layout.index(labels), ex.label);
  }
  const LossAndGradient a = loss_gradients(batch_stp, stp, encoder, cfg);
  const LossAndGradient b = loss_gradients(batch_mtp, mtp, encoder, cfg);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.gradient, b.gradient);
  ProbabilityMatrix p{{0.7, 0.3}};
  const std::vector<int> only{0};
  EXPECT_EQ(ranking_loss(p, 1, 0.2), ranking_loss(p, mtp.layout, 1, only, 0.2));
}

TEST(Sgd, NullLearningRate) {
  PromptState s;
  s.context = Matrix::Random(3, 4);
  const Matrix before = s.context;
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  OptimizerState opt = init_optimizer(s);
  sgd_step(s, Matrix::Random(3, 4), opt, cfg, 2.0);
  EXPECT_EQ(s.context, before);
}

TEST(Sgd, PureDecayStep) {
  PromptState s;
  s.context = Matrix::Random(3, 4);
  const Matrix before = s.context;
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.weight_decay = 0.01;
  OptimizerState opt = init_optimizer(s);
  sgd_step(s, Matrix::Zero(3, 4), opt, cfg, 3.0);
  EXPECT_LT((s.context - before * (1.0 - 0.1 * 0.01)).cwiseAbs().maxCoeff(), 1e-16);
}

TEST(Sgd, MomentumAccumulates) {
  PromptState s;
  s.context = Matrix::Zero(1, 1);
  TrainConfig cfg;
  cfg.learning_rate = 1.0;
  cfg.weight_decay = 0.0;
  cfg.momentum = 0.5;
  OptimizerState opt = init_optimizer(s);
  const Matrix g = Matrix::Constant(1, 1, 1.0);
  sgd_step(s, g, opt, cfg, 5.0);
  sgd_step(s, g, opt, cfg, 5.0);
  EXPECT_DOUBLE_EQ(s.context(0, 0), -1.0 - 1.5);
}

TEST(Sgd, WarmupRamp) {
  TrainConfig cfg;
  cfg.learning_rate = 0.2;
  cfg.warmup_epochs = 1;
  EXPECT_NEAR(warmup_learning_rate(cfg, 0.5), 0.1, 1e-15);
  EXPECT_NEAR(warmup_learning_rate(cfg, 0.25), 0.05, 1e-15);
  EXPECT_EQ(warmup_learning_rate(cfg, 1.0), 0.2);
  EXPECT_EQ(warmup_learning_rate(cfg, 7.3), 0.2);
  cfg.warmup_epochs = 0;
  EXPECT_EQ(warmup_learning_rate(cfg, 0.0), 0.2);
}

TEST(Sgd, NonFiniteGradientAborts) {
  PromptState s;
  s.context = Matrix::Zero(2, 2);
  TrainConfig cfg;
  OptimizerState opt = init_optimizer(s);
  Matrix g = Matrix::Zero(2, 2);
  g(1, 0) = std::nan("");
  try {
    sgd_step(s, g, opt, cfg, 1.0);
    FAIL() << "expected training error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kTraining);
  }
}

TEST(TrainConfigCheck, RejectsBadValues) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.warmup_epochs = 11;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = TrainConfig{};
  cfg.margin = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = TrainConfig{};
  cfg.logit_scale = -1.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST_F(Tuner, TrainingRecordsAndFreezesEncoder) {
  const PromptState init = State(PredictionMode::kMultiTarget);
  const auto texts = Texts(init, 100, 10);
  const EvalSet val = Images(init, 200, 11);
  const Matrix table = encoder.token_table();
  const Matrix proj = encoder.projection();
  TrainConfig cfg;
  cfg.total_epochs = 4;
  cfg.batch_size = 64;
  cfg.learning_rate = 0.02;
  const TrainResult r = train(texts, val, cfg, init, encoder);
  ASSERT_EQ(r.snapshots.size(), 4u);
  EXPECT_EQ(r.record.epochs(), 4);
  EXPECT_EQ(r.record.val_loss.size(), 4u);
  EXPECT_EQ(r.record.val_metrics.size(), 4u);
  EXPECT_TRUE(r.record.test_loss.empty());
  EXPECT_EQ(encoder.token_table(), table);
  EXPECT_EQ(encoder.projection(), proj);
  for (const auto& snap : r.snapshots) {
    EXPECT_EQ(snap.suffixes, init.suffixes);
    EXPECT_TRUE(snap.context.allFinite());
  }
  EXPECT_NE(r.snapshots.back().context, init.context);

  const TrainResult again = train(texts, val, cfg, init, encoder);
  EXPECT_EQ(again.record.train_loss, r.record.train_loss);
  EXPECT_EQ(again.record.val_loss, r.record.val_loss);
  EXPECT_EQ(again.snapshots.back().context, r.snapshots.back().context);

  cfg.seed = 99;
  const TrainResult other = train(texts, val, cfg, init, encoder);
  EXPECT_NE(other.snapshots.back().context, r.snapshots.back().context);
}

TEST_F(Tuner, ImageTrainingUsesSameLoop) {
  const PromptState init = State(PredictionMode::kMultiTarget);
  Rng rng(12);
  const auto imgs = build_balanced_image_set(schema, encoder, 20, rng, 0.02);
  const auto examples = embed_images(imgs, encoder, init);
  const EvalSet val = Images(init, 100, 13);
  TrainConfig cfg;
  cfg.total_epochs = 2;
  const TrainResult r = train(examples, val, cfg, init, encoder, &val);
  EXPECT_EQ(r.record.epochs(), 2);
  EXPECT_EQ(r.record.test_loss.size(), 2u);
  EXPECT_EQ(r.record.test_loss, r.record.val_loss);
}

TEST_F(Tuner, ZeroEpochsIsZeroShot) {
  const PromptState init = State(PredictionMode::kMultiTarget);
  const EvalSet val = Images(init, 200, 14);
  TrainConfig cfg;
  cfg.total_epochs = 0;
  cfg.warmup_epochs = 0;
  const TrainResult r = train(Texts(init, 5, 15), val, cfg, init, encoder);
  EXPECT_TRUE(r.snapshots.empty());
  const PromptState zs = zero_shot_prompt_state(schema, schema.template_tokens, encoder,
                                                PredictionMode::kMultiTarget);
  EXPECT_EQ(zs.context, init.context);
  const GroupMetrics a = evaluate(val, zs, encoder, 4.0);
  const GroupMetrics b = evaluate(val, init, encoder, 4.0);
  EXPECT_EQ(a.worst_group, b.worst_group);
  EXPECT_EQ(a.average, b.average);
}

TEST_F(Tuner, CheckpointRoundTrip) {
  PromptState s = State(PredictionMode::kMultiTarget);
  s.context.array() += 1.0 / 3.0;
  TrainConfig cfg;
  const std::string text = checkpoint_json(s, cfg, 3);
  PromptState restored = State(PredictionMode::kMultiTarget);
  load_checkpoint(text, restored);
  EXPECT_EQ(restored.context, s.context);
  PromptState wrong = State(PredictionMode::kMultiTarget);
  wrong.context.resize(2, wrong.context.cols());
  EXPECT_THROW(load_checkpoint(text, wrong), Error);
}

TEST(LossRecordCsv, HeaderAndRows) {
  LossRecord r;
  r.train_loss = {0.5, 0.25};
  r.val_loss = {0.75, 0.125};
  r.val_metrics.resize(2);
  const std::string csv = loss_record_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,train_loss,val_loss,val_wg,val_avg");
  EXPECT_NE(csv.find("\n1,0.25,0.125,"), std::string::npos);
}

}  // namespace
}  // namespace tod
