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


#include "tod/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tod {

SchemaDescription world_description(const ExperimentConfig& cfg,
                                    const std::vector<std::string>& biases,
                                    const std::vector<std::string>& distractors,
                                    std::uint64_t seed) {
  auto lookup = [&](const std::string& name) {
    for (const auto& a : cfg.world.attributes)
      if (a.name == name) return a;
    fail(ErrorKind::kConfig, "unknown attribute '" + name + "'");
  };
  SchemaDescription desc;
  desc.target = cfg.world.target;
  for (const auto& b : biases) desc.biases.push_back(lookup(b));
  for (const auto& d : distractors) desc.distractors.push_back(lookup(d));
  desc.shape = cfg.world.shape;
  desc.shape.template_length = cfg.train.context_length;
  desc.seed = seed;
  return desc;
}

MetricSummary summarize(const std::vector<GroupMetrics>& per_seed) {
  MetricSummary s;
  if (per_seed.empty()) return s;
  auto stats = [&](auto get, double& mean, double& sd) {
    double sum = 0.0;
    for (const auto& m : per_seed) sum += get(m);
    mean = sum / double(per_seed.size());
    double sq = 0.0;
    for (const auto& m : per_seed) sq += (get(m) - mean) * (get(m) - mean);
    sd = per_seed.size() > 1 ? std::sqrt(sq / double(per_seed.size() - 1)) : 0.0;
  };
  stats([](const GroupMetrics& m) { return m.worst_group; }, s.wg_mean, s.wg_std);
  stats([](const GroupMetrics& m) { return m.average; }, s.avg_mean, s.avg_std);
  stats([](const GroupMetrics& m) { return m.gap; }, s.gap_mean, s.gap_std);
  return s;
}

namespace {

std::vector<GroupMetrics> test_metrics(const std::vector<ArmResult>& runs) {
  std::vector<GroupMetrics> out;
  for (const auto& r : runs) out.push_back(r.test);
  return out;
}

// A world instance for one seed: schema plus its validation and test images.
struct SeedWorld {
  std::uint64_t seed = 0;
  AttributeSchema world;
  std::vector<ImageSample> val;
  std::vector<ImageSample> test;
};

SeedWorld make_world(const ExperimentConfig& cfg, const Encoder& encoder,
                     const std::vector<std::string>& biases,
                     const std::vector<std::string>& distractors, std::uint64_t seed) {
  SeedWorld sw;
  sw.seed = seed;
  sw.world = build_schema(world_description(cfg, biases, distractors, derive_seed(seed, "schema")),
                          encoder);
  const double rho = cfg.evaluation.correlation_rate;
  const double noise = cfg.world.image_noise_std;
  Rng val_rng(derive_seed(seed, "val"));
  sw.val = build_biased_image_set(sw.world, encoder, cfg.evaluation.val_size, rho, val_rng, noise);
  Rng test_rng(derive_seed(seed, "test"));
  sw.test = build_biased_image_set(sw.world, encoder, cfg.evaluation.test_size, rho, test_rng, noise);
  return sw;
}

std::vector<TextSample> make_texts(const ExperimentConfig& cfg, const AttributeSchema& view,
                                   std::uint64_t seed) {
  std::string stage = "text";
  for (const auto& b : view.biases) stage += "/" + b.name;
  Rng rng(derive_seed(seed, stage));
  TextOptions options;
  options.distractor_parts =
      std::min<int>(cfg.world.distractor_parts, static_cast<int>(view.distractors.size()));
  return build_balanced_text_set(view, cfg.world.text_per_group, rng, options);
}

struct ArmSpec {
  const AttributeSchema* view = nullptr;  // attributes named by the prompts
  PredictionMode mode = PredictionMode::kMultiTarget;
  std::vector<int> val_ids;   // validation grouping attributes
  std::vector<int> test_ids;  // test grouping attributes
  SelectionPolicy policy = SelectionPolicy::kWorstGroup;
  const std::vector<ImageSample>* val_override = nullptr;
};

// Trains on `train_set` (texts or images, already embedded) or, when it is
// empty, evaluates the untrained template prompts.
template <typename MakeTrain>
ArmResult run_arm(const ExperimentConfig& cfg, const Encoder& encoder, const SeedWorld& sw,
                  const ArmSpec& spec, MakeTrain make_train) {
  ArmResult out;
  out.seed = sw.seed;
  PromptState initial =
      zero_shot_prompt_state(*spec.view, sw.world.template_tokens, encoder, spec.mode);
  const EvalSet test = make_eval_set(sw.test, encoder, initial, sw.world, spec.test_ids);
  const std::vector<LabeledEmbedding> train_set = make_train(initial);
  if (train_set.empty()) {
    out.test = evaluate(test, initial, encoder, cfg.train.logit_scale);
    out.state = std::move(initial);
    return out;
  }
  const auto& val_images = spec.val_override ? *spec.val_override : sw.val;
  const EvalSet val = make_eval_set(val_images, encoder, initial, sw.world, spec.val_ids);
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(sw.seed, "train");
  TrainResult tr = train(train_set, val, tc, initial, encoder);
  if (tr.snapshots.empty()) {
    out.test = evaluate(test, initial, encoder, cfg.train.logit_scale);
    out.state = std::move(initial);
  } else {
    out.selected_epoch = select_checkpoint(tr.record.val_metrics, spec.policy);
    out.state = tr.snapshots[out.selected_epoch];
    out.test = evaluate(test, out.state, encoder, cfg.train.logit_scale);
  }
  out.record = std::move(tr.record);
  return out;
}

auto no_training() {
  return [](const PromptState&) { return std::vector<LabeledEmbedding>{}; };
}

auto text_training(const Encoder& encoder, const std::vector<TextSample>& texts) {
  return [&encoder, &texts](const PromptState& state) {
    return embed_texts(texts, encoder, state);
  };
}

auto image_training(const Encoder& encoder, const std::vector<ImageSample>& images) {
  return [&encoder, &images](const PromptState& state) {
    return embed_images(images, encoder, state);
  };
}

std::vector<ImageSample> balanced_images(const ExperimentConfig& cfg, const Encoder& encoder,
                                         const SeedWorld& sw, int per_group) {
  if (per_group > cfg.sweep.max_per_group) {
    fail(ErrorKind::kConfig, "image set of " + std::to_string(per_group) +
                                 " per group exceeds the generator capacity");
  }
  Rng rng(derive_seed(sw.seed, "image_train/" + std::to_string(per_group)));
  return build_balanced_image_set(sw.world, encoder, per_group, rng, cfg.world.image_noise_std);
}

}  // namespace

StandardResult run_standard(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const Encoder encoder = build_encoder(cfg.encoder);
  StandardResult result;
  for (std::uint64_t seed : cfg.seeds) {
    const SeedWorld sw = make_world(cfg, encoder, cfg.world.biases, cfg.world.distractors, seed);
    const auto texts = make_texts(cfg, sw.world, seed);
    ArmSpec spec{&sw.world, PredictionMode::kMultiTarget, sw.world.bias_ids(), sw.world.bias_ids(),
                 cfg.evaluation.selection};
    result.tod.push_back(run_arm(cfg, encoder, sw, spec, text_training(encoder, texts)));
    spec.mode = PredictionMode::kSingleTarget;
    result.stp.push_back(run_arm(cfg, encoder, sw, spec, text_training(encoder, texts)));
  }
  return result;
}

std::vector<AblationCell> run_ablation_grid(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const Encoder encoder = build_encoder(cfg.encoder);
  std::vector<AblationCell> cells(4);
  cells[0] = {false, false, "zero_shot", {}, {}};
  cells[1] = {true, false, "mtp_image", {}, {}};
  cells[2] = {false, true, "stp_text", {}, {}};
  cells[3] = {true, true, "tod", {}, {}};
  for (std::uint64_t seed : cfg.seeds) {
    const SeedWorld sw = make_world(cfg, encoder, cfg.world.biases, cfg.world.distractors, seed);
    const auto texts = make_texts(cfg, sw.world, seed);
    const auto images = balanced_images(cfg, encoder, sw, cfg.ablation.image_per_group);
    const std::vector<int> ids = sw.world.bias_ids();
    for (auto& cell : cells) {
      ArmSpec spec{&sw.world,
                   cell.multi_target ? PredictionMode::kMultiTarget : PredictionMode::kSingleTarget,
                   ids, ids, cfg.evaluation.selection};
      if (!cell.multi_target && !cell.text_only) {
        cell.runs.push_back(run_arm(cfg, encoder, sw, spec, no_training()));
      } else if (cell.text_only) {
        cell.runs.push_back(run_arm(cfg, encoder, sw, spec, text_training(encoder, texts)));
      } else {
        cell.runs.push_back(run_arm(cfg, encoder, sw, spec, image_training(encoder, images)));
      }
    }
  }
  for (auto& cell : cells) cell.summary = summarize(test_metrics(cell.runs));
  return cells;
}

std::vector<SweepPoint> run_image_sweep(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const Encoder encoder = build_encoder(cfg.encoder);
  std::vector<SweepPoint> points;
  for (int n : cfg.sweep.samples_per_group) points.push_back({n, {}, {}});
  points.push_back({0, {}, {}});
  for (std::uint64_t seed : cfg.seeds) {
    const SeedWorld sw = make_world(cfg, encoder, cfg.world.biases, cfg.world.distractors, seed);
    const std::vector<int> ids = sw.world.bias_ids();
    const ArmSpec spec{&sw.world, PredictionMode::kMultiTarget, ids, ids, cfg.evaluation.selection};
    for (auto& p : points) {
      if (p.samples_per_group == 0) {
        const auto texts = make_texts(cfg, sw.world, seed);
        p.runs.push_back(run_arm(cfg, encoder, sw, spec, text_training(encoder, texts)));
      } else {
        const auto images = balanced_images(cfg, encoder, sw, p.samples_per_group);
        p.runs.push_back(run_arm(cfg, encoder, sw, spec, image_training(encoder, images)));
      }
    }
  }
  for (auto& p : points) p.summary = summarize(test_metrics(p.runs));
  return points;
}

std::vector<MultibiasRow> run_multibias(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const auto& names = cfg.multibias.biases;
  if (names.size() < 2) fail(ErrorKind::kConfig, "multibias.biases: needs at least 2 attributes");
  const Encoder encoder = build_encoder(cfg.encoder);
  std::vector<MultibiasRow> rows(names.size());
  for (std::size_t k = 0; k < names.size(); ++k) rows[k].bias = names[k];
  for (std::uint64_t seed : cfg.seeds) {
    const SeedWorld sw = make_world(cfg, encoder, names, cfg.multibias.distractors, seed);
    const auto texts = make_texts(cfg, sw.world, seed);
    const std::vector<int> ids = sw.world.bias_ids();
    const ArmSpec tod_spec{&sw.world, PredictionMode::kMultiTarget, ids, ids,
                           cfg.evaluation.selection};
    const ArmResult tod = run_arm(cfg, encoder, sw, tod_spec, text_training(encoder, texts));
    const PromptState zero = zero_shot_prompt_state(sw.world, sw.world.template_tokens, encoder,
                                                    PredictionMode::kSingleTarget);
    for (std::size_t k = 0; k < names.size(); ++k) {
      const std::vector<int> one{ids[k]};
      const EvalSet tod_test = make_eval_set(sw.test, encoder, tod.state, sw.world, one);
      const EvalSet zs_test = make_eval_set(sw.test, encoder, zero, sw.world, one);
      rows[k].tod.push_back(evaluate(tod_test, tod.state, encoder, cfg.train.logit_scale));
      rows[k].zero_shot.push_back(evaluate(zs_test, zero, encoder, cfg.train.logit_scale));
    }
  }
  for (auto& r : rows) {
    r.tod_summary = summarize(r.tod);
    r.zero_shot_summary = summarize(r.zero_shot);
  }
  return rows;
}

std::vector<UnknownBiasRow> run_unknown_bias(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const auto& ub = cfg.unknown_bias;
  if (ub.hidden.empty()) fail(ErrorKind::kConfig, "unknown_bias.hidden: must name an attribute");
  if (ub.auxiliaries.empty()) fail(ErrorKind::kConfig, "unknown_bias.auxiliaries: must be non-empty");
  const Encoder encoder = build_encoder(cfg.encoder);
  std::vector<std::string> distractors;
  for (const auto& a : ub.auxiliaries)
    if (a != ub.hidden) distractors.push_back(a);
  std::vector<UnknownBiasRow> rows;
  rows.push_back({"", {}, {}});
  for (const auto& a : ub.auxiliaries) rows.push_back({a, {}, {}});
  for (std::uint64_t seed : cfg.seeds) {
    const SeedWorld sw = make_world(cfg, encoder, {ub.hidden}, distractors, seed);
    const std::vector<int> hidden_ids = sw.world.bias_ids();
    const ArmSpec zs_spec{&sw.world, PredictionMode::kSingleTarget, {}, hidden_ids,
                          SelectionPolicy::kAverage};
    rows[0].runs.push_back(run_arm(cfg, encoder, sw, zs_spec, no_training()));
    for (std::size_t k = 0; k < ub.auxiliaries.size(); ++k) {
      const AttributeSchema view = sw.world.with_biases({ub.auxiliaries[k]});
      const std::vector<int> aux_ids = view.bias_ids();
      // Validation images lose the hidden attribute's labels unless the
      // auxiliary is that attribute.
      std::vector<ImageSample> val = sw.val;
      if (aux_ids.front() != hidden_ids.front()) {
        for (auto& img : val) {
          img.labels[hidden_ids.front()] = -1;
          img.b.clear();
          img.g = -1;
        }
      }
      ArmSpec spec{&view, PredictionMode::kMultiTarget, aux_ids, hidden_ids,
                   SelectionPolicy::kAverage, &val};
      const auto texts = make_texts(cfg, view, seed);
      rows[k + 1].runs.push_back(run_arm(cfg, encoder, sw, spec, text_training(encoder, texts)));
    }
  }
  for (auto& r : rows) r.summary = summarize(test_metrics(r.runs));
  return rows;
}

MeanCurve mean_curve(const std::vector<ArmResult>& runs) {
  MeanCurve c;
  if (runs.empty()) return c;
  const int epochs = runs.front().record.epochs();
  c.train_loss.assign(epochs, 0.0);
  c.val_loss.assign(epochs, 0.0);
  for (const auto& r : runs) {
    if (r.record.epochs() != epochs) fail(ErrorKind::kDomain, "runs differ in epoch count");
    for (int e = 0; e < epochs; ++e) {
      c.train_loss[e] += r.record.train_loss[e] / double(runs.size());
      c.val_loss[e] += r.record.val_loss[e] / double(runs.size());
    }
  }
  return c;
}

}  // namespace tod
