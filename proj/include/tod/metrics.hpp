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

namespace tod {

struct PredictionRecord {
  int predicted_y = 0;
  std::vector<int> predicted_b;  // empty for single-target prompts
  int true_y = 0;
  std::vector<int> true_b;
  int group = 0;                     // evaluation group of the true labels
  std::vector<double> probabilities;  // optional, flattened composition order
};

struct GroupStat {
  int count = 0;
  int correct = 0;
  double accuracy = 0.0;  // 0 when the group is empty
  bool empty() const { return count == 0; }
};

// Correctness counts the target prediction only.
struct GroupMetrics {
  std::vector<GroupStat> groups;
  double worst_group = 0.0;
  double average = 0.0;
  double gap = 0.0;
  int worst_group_index = -1;

  std::vector<bool> empty_mask() const;
  int total_count() const;
};

GroupMetrics compute_group_metrics(std::span<const PredictionRecord> records, int group_count);

// Builds metrics from per-group tallies; shared by every aggregation path.
GroupMetrics metrics_from_tallies(std::vector<GroupStat> groups);

enum class SelectionPolicy { kWorstGroup, kAverage };

std::string selection_policy_name(SelectionPolicy policy);
SelectionPolicy parse_selection_policy(const std::string& name);

// Index of the best epoch by the policy's score; ties go to the earliest.
int select_checkpoint(std::span<const GroupMetrics> per_epoch, SelectionPolicy policy);

// Min-max normalization to [0, 1]; a constant curve maps to all zeros.
std::vector<double> normalize_curve(std::span<const double> values);

}  // namespace tod
