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

#include "tod/metrics.hpp"

#include <algorithm>
#include <limits>

#include "tod/common.hpp"

namespace tod {

std::vector<bool> GroupMetrics::empty_mask() const {
  std::vector<bool> mask;
  mask.reserve(groups.size());
  for (const GroupStat& g : groups) mask.push_back(g.empty());
  return mask;
}

int GroupMetrics::total_count() const {
  int n = 0;
  for (const GroupStat& g : groups) n += g.count;
  return n;
}

GroupMetrics metrics_from_tallies(std::vector<GroupStat> groups) {
  GroupMetrics m;
  int total = 0;
  int correct = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < groups.size(); ++i) {
    GroupStat& g = groups[i];
    total += g.count;
    correct += g.correct;
    if (g.empty()) {
      g.accuracy = 0.0;
      continue;
    }
    g.accuracy = double(g.correct) / double(g.count);
    if (g.accuracy < worst) {
      worst = g.accuracy;
      m.worst_group_index = int(i);
    }
  }
  if (total == 0) fail(ErrorKind::kDomain, "all groups are empty");
  m.groups = std::move(groups);
  m.worst_group = worst;
  m.average = double(correct) / double(total);
  m.gap = m.average - m.worst_group;
  return m;
}

GroupMetrics compute_group_metrics(std::span<const PredictionRecord> records, int group_count) {
  if (records.empty()) fail(ErrorKind::kDomain, "no prediction records");
  if (group_count <= 0) fail(ErrorKind::kDomain, "group count must be positive");
  std::vector<GroupStat> groups(group_count);
  for (const PredictionRecord& r : records) {
    if (r.group < 0 || r.group >= group_count) {
      fail(ErrorKind::kDomain, "record group " + std::to_string(r.group) + " out of range");
    }
    GroupStat& g = groups[r.group];
    ++g.count;
    if (r.predicted_y == r.true_y) ++g.correct;
  }
  return metrics_from_tallies(std::move(groups));
}

std::string selection_policy_name(SelectionPolicy policy) {
  return policy == SelectionPolicy::kWorstGroup ? "worst_group" : "average";
}

SelectionPolicy parse_selection_policy(const std::string& name) {
  if (name == "worst_group") return SelectionPolicy::kWorstGroup;
  if (name == "average") return SelectionPolicy::kAverage;
  fail(ErrorKind::kConfig, "unknown selection policy '" + name + "'");
}

int select_checkpoint(std::span<const GroupMetrics> per_epoch, SelectionPolicy policy) {
  if (per_epoch.empty()) fail(ErrorKind::kDomain, "empty loss record");
  int best = 0;
  auto score = [policy](const GroupMetrics& m) {
    return policy == SelectionPolicy::kWorstGroup ? m.worst_group : m.average;
  };
  for (std::size_t e = 1; e < per_epoch.size(); ++e) {
    if (score(per_epoch[e]) > score(per_epoch[best])) best = int(e);
  }
  return best;
}

std::vector<double> normalize_curve(std::span<const double> values) {
  if (values.size() < 2) fail(ErrorKind::kDomain, "curve needs at least two points");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  std::vector<double> out(values.size(), 0.0);
  if (range > 0.0) {
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - lo) / range;
  }
  return out;
}

}  // namespace tod
