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
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tod/embedcore.hpp"
#include "tod/evalkit.hpp"
#include "tod/metrics.hpp"
#include "tod/synthworld.hpp"
#include "tod/tuner.hpp"

namespace tod {

enum class Scenario { kStandard, kAblationGrid, kImageSweep, kMultibias, kUnknownBias };

std::string scenario_name(Scenario s);
Scenario parse_scenario(const std::string& name);

struct WorldConfig {
  AttributeDescription target{"bird", {"landbird", "waterbird"}, 1.0};
  // Every non-target attribute.
  std::vector<AttributeDescription> attributes{{"place", {"land", "water"}, 0.0}};
  std::vector<std::string> biases{"place"};  // correlated with the target in images
  std::vector<std::string> distractors;          // present in images, never labeled
  WorldShape shape;
  double image_noise_std = 0.02;
  int text_per_group = 2500;
  int distractor_parts = 0;
};

struct EvaluationConfig {
  int val_size = 2000;
  int test_size = 4000;
  double correlation_rate = 0.95;
  SelectionPolicy selection = SelectionPolicy::kWorstGroup;
};

struct AblationConfig {
  int image_per_group = 53;  // image set of the multi-target, image-trained cell
};

struct SweepConfig {
  std::vector<int> samples_per_group{1, 4, 16, 53};
  int max_per_group = 10000;
};

struct MultibiasConfig {
  std::vector<std::string> biases;
  std::vector<std::string> distractors;
};

struct UnknownBiasConfig {
  std::string hidden;
  std::vector<std::string> auxiliaries;
};

struct ExperimentConfig {
  Scenario scenario = Scenario::kStandard;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  EncoderConfig encoder;
  WorldConfig world;
  TrainConfig train;
  EvaluationConfig evaluation;
  AblationConfig ablation;
  SweepConfig sweep;
  MultibiasConfig multibias;
  UnknownBiasConfig unknown_bias;
  std::string out_dir = "runs/default";
  nlohmann::json calibration;  // free-form notes carried through unchanged
};

// Missing fields keep their defaults; unknown or ill-typed fields raise a
// config error naming the field path.
ExperimentConfig parse_config(const nlohmann::json& doc);
// The calibrated configuration shipped as configs/default.json.
ExperimentConfig default_config();
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
void validate_config(const ExperimentConfig& cfg);

// World description for a given set of correlated biases and distractors.
SchemaDescription world_description(const ExperimentConfig& cfg,
                                    const std::vector<std::string>& biases,
                                    const std::vector<std::string>& distractors,
                                    std::uint64_t seed);

// One trained (or zero-shot) arm on one seed.
struct ArmResult {
  std::uint64_t seed = 0;
  int selected_epoch = -1;  // -1 for an untrained arm
  GroupMetrics test;
  LossRecord record;
  PromptState state;
};

struct MetricSummary {
  double wg_mean = 0, wg_std = 0, avg_mean = 0, avg_std = 0, gap_mean = 0, gap_std = 0;
};

MetricSummary summarize(const std::vector<GroupMetrics>& per_seed);

struct StandardResult {
  std::vector<ArmResult> tod;
  std::vector<ArmResult> stp;  // single-target text run, kept for loss curves
};

struct AblationCell {
  bool multi_target = false;
  bool text_only = false;
  std::string label;
  std::vector<ArmResult> runs;
  MetricSummary summary;
};

struct SweepPoint {
  int samples_per_group = 0;  // 0 marks the text-only reference
  std::vector<ArmResult> runs;
  MetricSummary summary;
};

struct MultibiasRow {
  std::string bias;
  std::vector<GroupMetrics> zero_shot;  // per seed, regrouped by target x bias
  std::vector<GroupMetrics> tod;
  MetricSummary zero_shot_summary;
  MetricSummary tod_summary;
};

struct UnknownBiasRow {
  std::string auxiliary;  // empty for the zero-shot row
  std::vector<ArmResult> runs;
  MetricSummary summary;
};

StandardResult run_standard(const ExperimentConfig& cfg);
std::vector<AblationCell> run_ablation_grid(const ExperimentConfig& cfg);
std::vector<SweepPoint> run_image_sweep(const ExperimentConfig& cfg);
std::vector<MultibiasRow> run_multibias(const ExperimentConfig& cfg);
std::vector<UnknownBiasRow> run_unknown_bias(const ExperimentConfig& cfg);

// Seed-mean loss curves of several runs.
struct MeanCurve {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
};
MeanCurve mean_curve(const std::vector<ArmResult>& runs);

// Runs the configured scenario, writes every artifact plus manifest.json
// into `out_dir`, and returns the manifest.
nlohmann::json run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

// Writes the datasets and schema of the standard world for the first seed.
nlohmann::json generate_datasets(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

std::string sha256_file(const std::filesystem::path& path);

// Re-hashes every artifact listed in a manifest; returns the mismatches.
std::vector<std::string> verify_manifest(const std::filesystem::path& manifest_path);

std::string text_sample_jsonl(std::span<const TextSample> samples);
std::string image_sample_jsonl(std::span<const ImageSample> samples);
nlohmann::json schema_json(const AttributeSchema& schema);

}  // namespace tod
