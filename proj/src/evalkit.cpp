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


#include "tod/evalkit.hpp"

#include <sstream>

namespace tod {

PredictionRecord predict(const UnitEmbedding& image, const PromptEmbeddings& prompts,
                         const PromptState& state, double logit_scale, bool keep_probabilities) {
  if (!(logit_scale > 0.0)) fail(ErrorKind::kDomain, "logit scale must be positive");
  const int n = static_cast<int>(prompts.embeddings.size());
  int best = 0;
  double best_sim = cosine(image, prompts.embeddings[0]);
  for (int k = 1; k < n; ++k) {
    const double sim = cosine(image, prompts.embeddings[k]);
    if (sim > best_sim) {
      best = k;
      best_sim = sim;
    }
  }
  PredictionRecord rec;
  const std::vector<int> labels = state.layout.decode(best);
  rec.predicted_y = labels[0];
  rec.predicted_b.assign(labels.begin() + 1, labels.end());
  if (keep_probabilities) rec.probabilities = forward_probabilities(image, prompts, logit_scale).values;
  return rec;
}

PredictionRecord predict(const ImageSample& image, const PromptEmbeddings& prompts,
                         const PromptState& state, double logit_scale, const Encoder& encoder) {
  PredictionRecord rec = predict(encoder.encode_image(image.feature), prompts, state, logit_scale);
  rec.true_y = image.y;
  rec.true_b = image.b;
  rec.group = image.g;
  return rec;
}

PromptState zero_shot_prompt_state(const AttributeSchema& schema,
                                   std::span<const TokenId> template_tokens,
                                   const Encoder& encoder, PredictionMode mode) {
  if (template_tokens.empty()) fail(ErrorKind::kConfig, "zero-shot template is empty");
  return init_prompt_state(template_tokens, schema, encoder, mode);
}

std::vector<PredictionRecord> predict_set(const EvalSet& set, const PromptState& state,
                                          const Encoder& encoder, double logit_scale,
                                          bool keep_probabilities) {
  const PromptEmbeddings prompts = build_prompt_embeddings(state, encoder);
  std::vector<PredictionRecord> out;
  out.reserve(set.examples.size());
  for (std::size_t i = 0; i < set.examples.size(); ++i) {
    PredictionRecord rec =
        predict(set.examples[i].embedding, prompts, state, logit_scale, keep_probabilities);
    rec.true_y = set.truth[i].true_y;
    rec.true_b = set.truth[i].true_b;
    rec.group = set.truth[i].group;
    out.push_back(std::move(rec));
  }
  return out;
}

GroupMetrics evaluate(const EvalSet& set, const PromptState& state, const Encoder& encoder,
                      double logit_scale) {
  const auto records = predict_set(set, state, encoder, logit_scale);
  return compute_group_metrics(records, set.group_count);
}

nlohmann::json group_metrics_json(const GroupMetrics& metrics) {
  nlohmann::json groups = nlohmann::json::array();
  for (const GroupStat& g : metrics.groups) {
    groups.push_back({{"count", g.count},
                      {"correct", g.correct},
                      {"accuracy", g.accuracy},
                      {"empty", g.empty()}});
  }
  return {{"wg", metrics.worst_group},
          {"avg", metrics.average},
          {"gap", metrics.gap},
          {"worst_group_index", metrics.worst_group_index},
          {"groups", groups}};
}

std::string predictions_jsonl(std::span<const PredictionRecord> records) {
  std::ostringstream out;
  for (const PredictionRecord& r : records) {
    nlohmann::json j = {{"predicted_y", r.predicted_y}, {"predicted_b", r.predicted_b},
                        {"true_y", r.true_y},           {"true_b", r.true_b},
                        {"group", r.group}};
    if (!r.probabilities.empty()) j["probabilities"] = r.probabilities;
    out << j.dump() << '\n';
  }
  return out.str();
}

}  // namespace tod
