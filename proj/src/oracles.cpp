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


#include "tod/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tod/evalkit.hpp"

namespace tod {

namespace {

struct Fixture {
  Encoder encoder;
  AttributeSchema schema;
  PromptState state;
  std::vector<LabeledEmbedding> batch;
  TrainConfig cfg;
};

Fixture random_fixture(std::uint64_t seed, int trial) {
  Rng rng(derive_seed(seed, "oracle/" + std::to_string(trial)));
  std::uniform_int_distribution<int> classes(2, 3);
  std::uniform_int_distribution<int> bias_count(1, 2);
  Fixture f{build_encoder(EncoderConfig{256, 32, 16, rng()}), {}, {}, {}, {}};
  SchemaDescription desc;
  desc.target = {"t", {}, 1.0};
  for (int c = classes(rng); c > 0; --c) desc.target.classes.push_back("t" + std::to_string(c));
  for (int b = bias_count(rng); b > 0; --b) {
    AttributeDescription a{"b" + std::to_string(b), {}, 0.5};
    for (int c = classes(rng); c > 0; --c) a.classes.push_back(a.name + "_" + std::to_string(c));
    desc.biases.push_back(a);
  }
  desc.shape.concept_tokens = 4;
  desc.shape.template_length = 3;
  desc.seed = rng();
  f.schema = build_schema(desc, f.encoder);
  const PredictionMode mode =
      trial % 2 ? PredictionMode::kSingleTarget : PredictionMode::kMultiTarget;
  f.state = init_prompt_state(f.schema.template_tokens, f.schema, f.encoder, mode);
  std::normal_distribution<double> noise(0.0, 0.3);
  for (Eigen::Index r = 0; r < f.state.context.rows(); ++r)
    for (Eigen::Index c = 0; c < f.state.context.cols(); ++c) f.state.context(r, c) += noise(rng);
  const auto texts = build_balanced_text_set(f.schema, 2, rng);
  f.batch = embed_texts(texts, f.encoder, f.state);
  std::uniform_real_distribution<double> margin(0.2, 0.9), scale(1.0, 8.0);
  f.cfg.margin = margin(rng);
  f.cfg.logit_scale = scale(rng);
  return f;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

OracleResult gradient_oracle(std::uint64_t seed) {
  double worst = 0.0;
  const int trials = 10;
  for (int t = 0; t < trials; ++t) {
    const Fixture f = random_fixture(seed, t);
    const Matrix analytic = loss_gradients(f.batch, f.state, f.encoder, f.cfg).gradient;
    const Matrix numeric = finite_difference_gradient(f.batch, f.state, f.encoder, f.cfg, 1e-5);
    const double denom = std::max({analytic.norm(), numeric.norm(), 1e-12});
    worst = std::max(worst, (analytic - numeric).norm() / denom);
  }
  return {"gradient_vs_finite_difference", worst < 1e-5,
          std::to_string(trials) + " trials, max relative error " + fmt(worst)};
}

OracleResult probability_oracle(std::uint64_t seed) {
  double worst = 0.0;
  bool identities = true;
  for (int t = 0; t < 10; ++t) {
    const Fixture f = random_fixture(seed, 100 + t);
    const PromptEmbeddings prompts = build_prompt_embeddings(f.state, f.encoder);
    for (const auto& ex : f.batch) {
      const ProbabilityMatrix p = forward_probabilities(ex.embedding, prompts, f.cfg.logit_scale);
      worst = std::max(worst, std::abs(p.sum() - 1.0));
    }
    const int n = f.state.composition_count();
    ProbabilityMatrix uniform;
    uniform.values.assign(n, 1.0 / n);
    if (ranking_loss(uniform, 0, f.cfg.margin) != (n - 1) * f.cfg.margin) identities = false;
    ProbabilityMatrix peaked;
    peaked.values.assign(n, 0.0);
    peaked.values[0] = 1.0;
    if (ranking_loss(peaked, 0, 0.5) != 0.0) identities = false;
  }
  return {"probability_and_loss_identities", worst < 1e-9 && identities,
          "max |sum - 1| " + fmt(worst)};
}

OracleResult metric_oracle(std::uint64_t seed) {
  // 9/10, 1/2, 4/5, 3/3 correct per group.
  std::vector<PredictionRecord> fixture;
  const int totals[4] = {10, 2, 5, 3}, correct[4] = {9, 1, 4, 3};
  for (int g = 0; g < 4; ++g) {
    for (int i = 0; i < totals[g]; ++i) {
      PredictionRecord r;
      r.true_y = g / 2;
      r.group = g;
      r.predicted_y = i < correct[g] ? r.true_y : 1 - r.true_y;
      fixture.push_back(r);
    }
  }
  const GroupMetrics m = compute_group_metrics(fixture, 4);
  bool ok = m.worst_group == 0.5 && m.average == 17.0 / 20.0 && m.gap == m.average - m.worst_group;
  Rng rng(derive_seed(seed, "oracle/metrics"));
  for (int t = 0; t < 100 && ok; ++t) {
    std::uniform_int_distribution<int> size(1, 200), group(0, 7), label(0, 1);
    std::vector<PredictionRecord> recs(size(rng));
    std::vector<int> count(8, 0), hit(8, 0);
    for (auto& r : recs) {
      r.group = group(rng);
      r.true_y = label(rng);
      r.predicted_y = label(rng);
      ++count[r.group];
      hit[r.group] += r.predicted_y == r.true_y;
    }
    const GroupMetrics got = compute_group_metrics(recs, 8);
    double wg = 2.0;
    int total_hit = 0;
    for (int g = 0; g < 8; ++g) {
      if (count[g]) wg = std::min(wg, double(hit[g]) / count[g]);
      total_hit += hit[g];
    }
    ok = got.worst_group == wg && got.average == double(total_hit) / double(recs.size());
  }
  return {"group_metric_tally", ok, "fixture WG " + fmt(m.worst_group) + ", Avg " + fmt(m.average)};
}

OracleResult argmax_oracle(std::uint64_t seed) {
  const Fixture f = random_fixture(seed, 200);
  const PromptEmbeddings prompts = build_prompt_embeddings(f.state, f.encoder);
  bool ok = true;
  for (const auto& ex : f.batch) {
    const int ref = predict(ex.embedding, prompts, f.state, 1.0).predicted_y;
    const int ref_flat = forward_probabilities(ex.embedding, prompts, 1.0).argmax();
    for (double s : {4.0, 8.0, 100.0}) {
      ok = ok && predict(ex.embedding, prompts, f.state, s).predicted_y == ref &&
           forward_probabilities(ex.embedding, prompts, s).argmax() == ref_flat;
    }
  }
  return {"argmax_invariance", ok, std::to_string(f.batch.size()) + " samples, s in {1, 4, 8, 100}"};
}

}  // namespace

std::vector<OracleResult> run_oracles(std::uint64_t seed) {
  return {gradient_oracle(seed), probability_oracle(seed), metric_oracle(seed), argmax_oracle(seed)};
}

}  // namespace tod
