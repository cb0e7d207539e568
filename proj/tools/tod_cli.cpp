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


#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tod/tod.h"

namespace {

constexpr int kUsageError = 2;

int report(int status) {
  std::fprintf(stderr, "error: %s: %s\n", tod_status_name(status), tod_last_error());
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text-only debiasing experiments on a synthetic dual-encoder world", "tod"};
  app.require_subcommand(1);

  std::string config_path, out_dir, scenario;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config (JSON)");
    cmd->add_option("--out", out_dir, "output directory (TOD_OUT_DIR overrides)");
    cmd->add_option("--seed", seed, "run a single seed instead of the configured list");
    return cmd;
  };
  CLI::App* generate = add_common(app.add_subcommand("generate", "write datasets and schema"));
  CLI::App* run = add_common(app.add_subcommand("run", "run the configured scenario"));
  run->add_option("--scenario", scenario,
                  "standard, ablation_grid, image_sweep, multibias or unknown_bias");
  CLI::App* ablate = add_common(app.add_subcommand("ablate", "multi-target x text-only grid"));
  CLI::App* sweep = add_common(app.add_subcommand("sweep", "image samples-per-group sweep"));
  CLI::App* multibias = add_common(app.add_subcommand("multibias", "several bias attributes"));
  CLI::App* unknown = add_common(app.add_subcommand("unknownbias", "auxiliary attributes only"));
  CLI::App* check = app.add_subcommand("check", "run gradient and metric oracles");
  check->add_option("--seed", seed, "oracle seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "usage error: %s (see --help)\n", e.what());
    return kUsageError;
  }

  if (check->parsed()) {
    char* text = nullptr;
    int failures = 0;
    const int status = tod_check(seed, &text, &failures);
    if (status != TOD_OK) return report(status);
    std::fputs(text, stdout);
    tod_string_free(text);
    return failures == 0 ? 0 : 1;
  }

  CLI::App* cmd = app.get_subcommands().front();
  tod_config* cfg = nullptr;
  int status = config_path.empty() ? tod_config_default(&cfg)
                                   : tod_config_load(config_path.c_str(), &cfg);
  if (status != TOD_OK) return report(status);
  if (cmd->count("--seed") > 0 && (status = tod_config_set_seed(cfg, seed)) != TOD_OK) {
    tod_config_free(cfg);
    return report(status);
  }
  const char* forced = nullptr;
  if (cmd == ablate) forced = "ablation_grid";
  if (cmd == sweep) forced = "image_sweep";
  if (cmd == multibias) forced = "multibias";
  if (cmd == unknown) forced = "unknown_bias";
  if (cmd == run && !scenario.empty()) forced = scenario.c_str();
  if (forced && (status = tod_config_set_scenario(cfg, forced)) != TOD_OK) {
    tod_config_free(cfg);
    return report(status);
  }

  std::string target = out_dir;
  if (const char* env = std::getenv("TOD_OUT_DIR"); env && *env) target = env;
  if (target.empty()) {
    char* configured = nullptr;
    if ((status = tod_config_out_dir(cfg, &configured)) != TOD_OK) {
      tod_config_free(cfg);
      return report(status);
    }
    target = configured;
    tod_string_free(configured);
  }

  status = cmd == generate ? tod_generate(cfg, target.c_str())
                           : tod_run(cfg, target.c_str(), nullptr);
  tod_config_free(cfg);
  if (status != TOD_OK) return report(status);
  std::printf("wrote %s\n", target.c_str());
  return 0;
}
