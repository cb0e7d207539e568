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

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tod/embedcore.hpp"
#include "tod/metrics.hpp"
#include "tod/synthworld.hpp"
#include "tod/tuner.hpp"

namespace tod {

// Argmax composition over the prompts; ties go to the lowest flat index.
// The true-label fields of the record are left for the caller.
PredictionRecord predict(const UnitEmbedding& image, const PromptEmbeddings& prompts,
                         const PromptState& state, double logit_scale,
                         bool keep_probabilities = false);

PredictionRecord predict(const ImageSample& image, const PromptEmbeddings& prompts,
                         const PromptState& state, double logit_scale, const Encoder& encoder);

// Untrained prompts whose context is the template embeddings.
PromptState zero_shot_prompt_state(const AttributeSchema& schema,
                                   std::span<const TokenId> template_tokens,
                                   const Encoder& encoder, PredictionMode mode);

std::vector<PredictionRecord> predict_set(const EvalSet& set, const PromptState& state,
                                          const Encoder& encoder, double logit_scale,
                                          bool keep_probabilities = false);

GroupMetrics evaluate(const EvalSet& set, const PromptState& state, const Encoder& encoder,
                      double logit_scale);

nlohmann::json group_metrics_json(const GroupMetrics& metrics);
// One JSON object per line.
std::string predictions_jsonl(std::span<const PredictionRecord> records);

}  // namespace tod
