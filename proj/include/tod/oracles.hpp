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
#include <string>
#include <vector>

namespace tod {

struct OracleResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Self-checks behind the `check` command: analytic gradients against finite
// differences, probability and loss identities, the metric tally, and
// argmax invariance under logit rescaling.
std::vector<OracleResult> run_oracles(std::uint64_t seed = 0);

}  // namespace tod
