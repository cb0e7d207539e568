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


#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "tod/harness.hpp"

namespace tod {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Collects written files so the manifest can list them with hashes.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) fail(ErrorKind::kIo, "cannot create output directory " + root_.string() + ": " + ec.message());
  }

  void write(const std::string& relative, const std::string& content) {
    const fs::path path = root_ / relative;
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
    out << content;
    out.close();
    if (!out) fail(ErrorKind::kIo, "failed while writing " + path.string());
    files_.push_back(relative);
  }

  json inventory() const {
    json list = json::array();
    for (const auto& f : files_) {
      const fs::path p = root_ / f;
      list.push_back({{"path", f}, {"sha256", sha256_file(p)}, {"bytes", fs::file_size(p)}});
    }
    return list;
  }

  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
  std::vector<std::string> files_;
};

class MetricsTable {
 public:
  void add(const std::string& scenario, const std::string& seed, int epoch,
           const GroupMetrics& m) {
    rows_.push_back({scenario, seed, epoch, m});
    width_ = std::max(width_, m.groups.size());
  }
  void add_summary(const std::string& scenario, const std::vector<GroupMetrics>& per_seed) {
    const MetricSummary s = summarize(per_seed);
    summaries_.push_back({scenario, "mean", s.wg_mean, s.avg_mean, s.gap_mean});
    summaries_.push_back({scenario, "std", s.wg_std, s.avg_std, s.gap_std});
  }
  std::string csv() const {
    std::ostringstream out;
    out << "scenario,seed,epoch_selected,wg,avg,gap";
    for (std::size_t g = 0; g < width_; ++g) out << ",acc_g" << g;
    out << '\n';
    for (const auto& r : rows_) {
      out << r.scenario << ',' << r.seed << ',' << r.epoch << ',' << num(r.m.worst_group) << ','
          << num(r.m.average) << ',' << num(r.m.gap);
      for (std::size_t g = 0; g < width_; ++g) {
        out << ',';
        if (g < r.m.groups.size() && !r.m.groups[g].empty()) out << num(r.m.groups[g].accuracy);
      }
      out << '\n';
    }
    for (const auto& s : summaries_) {
      out << s.scenario << ',' << s.seed << ",," << num(s.wg) << ',' << num(s.avg) << ','
          << num(s.gap) << std::string(width_, ',') << '\n';
    }
    return out.str();
  }

 private:
  struct Row {
    std::string scenario, seed;
    int epoch;
    GroupMetrics m;
  };
  struct Summary {
    std::string scenario, seed;
    double wg, avg, gap;
  };
  std::vector<Row> rows_;
  std::vector<Summary> summaries_;
  std::size_t width_ = 0;
};

void add_runs(MetricsTable& table, const std::string& label, const std::vector<ArmResult>& runs) {
  std::vector<GroupMetrics> all;
  for (const auto& r : runs) {
    table.add(label, std::to_string(r.seed), r.selected_epoch, r.test);
    all.push_back(r.test);
  }
  table.add_summary(label, all);
}

json summary_json(const MetricSummary& s) {
  return {{"wg_mean", s.wg_mean}, {"wg_std", s.wg_std},   {"avg_mean", s.avg_mean},
          {"avg_std", s.avg_std}, {"gap_mean", s.gap_mean}, {"gap_std", s.gap_std}};
}

json runs_json(const std::vector<ArmResult>& runs) {
  json list = json::array();
  for (const auto& r : runs) {
    list.push_back({{"seed", r.seed},
                    {"epoch_selected", r.selected_epoch},
                    {"metrics", group_metrics_json(r.test)}});
  }
  return list;
}

std::string curve_rows(const MeanCurve& c, const std::string& mode) {
  std::ostringstream out;
  const int n = static_cast<int>(c.train_loss.size());
  std::vector<double> tn(n, 0.0), vn(n, 0.0);
  if (n >= 2) {
    tn = normalize_curve(c.train_loss);
    vn = normalize_curve(c.val_loss);
  }
  for (int e = 0; e < n; ++e) {
    out << e << ',' << num(c.train_loss[e]) << ',' << num(c.val_loss[e]) << ',' << num(tn[e]) << ','
        << num(vn[e]) << ',' << mode << '\n';
  }
  return out.str();
}

const char* kCurveHeader = "epoch,train_loss,val_loss,train_loss_norm,val_loss_norm,mode\n";

void write_arm_details(ArtifactWriter& w, const ExperimentConfig& cfg, const std::string& tag,
                       const std::vector<ArmResult>& runs) {
  for (const auto& r : runs) {
    if (r.selected_epoch < 0) continue;
    const std::string dir = "seed_" + std::to_string(r.seed) + "/";
    w.write(dir + "checkpoint_" + tag + ".json", checkpoint_json(r.state, cfg.train, r.selected_epoch));
    w.write(dir + "loss_record_" + tag + ".csv", loss_record_csv(r.record));
  }
}

json scenario_standard(ArtifactWriter& w, const ExperimentConfig& cfg) {
  const StandardResult res = run_standard(cfg);
  MetricsTable table;
  add_runs(table, "standard", res.tod);
  w.write("metrics.csv", table.csv());
  w.write("loss_curve.csv", kCurveHeader + curve_rows(mean_curve(res.stp), "stp") +
                                curve_rows(mean_curve(res.tod), "mtp"));
  write_arm_details(w, cfg, "mtp", res.tod);
  write_arm_details(w, cfg, "stp", res.stp);
  json out = {{"tod", runs_json(res.tod)},
              {"tod_summary", summary_json(summarize([&] {
                 std::vector<GroupMetrics> v;
                 for (const auto& r : res.tod) v.push_back(r.test);
                 return v;
               }()))},
              {"stp", runs_json(res.stp)}};
  w.write("metrics.json", out.dump(2));
  return out;
}

json scenario_ablation(ArtifactWriter& w, const ExperimentConfig& cfg) {
  const auto cells = run_ablation_grid(cfg);
  MetricsTable table;
  std::ostringstream csv;
  csv << "cell,multi_target,text_only,wg,avg,gap,wg_std,avg_std,gap_std\n";
  json out = json::array();
  for (const auto& c : cells) {
    add_runs(table, "ablation/" + c.label, c.runs);
    const MetricSummary& s = c.summary;
    csv << c.label << ',' << int(c.multi_target) << ',' << int(c.text_only) << ',' << num(s.wg_mean)
        << ',' << num(s.avg_mean) << ',' << num(s.gap_mean) << ',' << num(s.wg_std) << ','
        << num(s.avg_std) << ',' << num(s.gap_std) << '\n';
    out.push_back({{"cell", c.label},
                   {"multi_target", c.multi_target},
                   {"text_only", c.text_only},
                   {"runs", runs_json(c.runs)},
                   {"summary", summary_json(s)}});
  }
  w.write("ablation.csv", csv.str());
  w.write("metrics.csv", table.csv());
  std::string curves = kCurveHeader;
  for (const auto& c : cells) {
    if (c.text_only) curves += curve_rows(mean_curve(c.runs), c.multi_target ? "mtp" : "stp");
  }
  w.write("loss_curve.csv", curves);
  return out;
}

json scenario_sweep(ArtifactWriter& w, const ExperimentConfig& cfg) {
  const auto points = run_image_sweep(cfg);
  MetricsTable table;
  std::ostringstream csv;
  csv << "setting,samples_per_group,wg,avg,gap,wg_std\n";
  json out = json::array();
  for (const auto& p : points) {
    const bool text = p.samples_per_group == 0;
    const std::string setting = text ? "text_only" : "image";
    add_runs(table, "sweep/" + (text ? setting : "n" + std::to_string(p.samples_per_group)), p.runs);
    csv << setting << ',' << (text ? std::string() : std::to_string(p.samples_per_group)) << ','
        << num(p.summary.wg_mean) << ',' << num(p.summary.avg_mean) << ','
        << num(p.summary.gap_mean) << ',' << num(p.summary.wg_std) << '\n';
    out.push_back({{"setting", setting},
                   {"samples_per_group", p.samples_per_group},
                   {"runs", runs_json(p.runs)},
                   {"summary", summary_json(p.summary)}});
  }
  w.write("sweep.csv", csv.str());
  w.write("metrics.csv", table.csv());
  return out;
}

json scenario_multibias(ArtifactWriter& w, const ExperimentConfig& cfg) {
  const auto rows = run_multibias(cfg);
  MetricsTable table;
  std::ostringstream csv;
  csv << "bias,wg_zero_shot,wg_tod,avg_zero_shot,avg_tod\n";
  json out = json::array();
  double zs = 0, tod = 0, zs_avg = 0, tod_avg = 0;
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < r.tod.size(); ++k) {
      const std::string seed = std::to_string(cfg.seeds[k]);
      table.add("multibias/" + r.bias + "/zero_shot", seed, -1, r.zero_shot[k]);
      table.add("multibias/" + r.bias + "/tod", seed, -1, r.tod[k]);
    }
    table.add_summary("multibias/" + r.bias + "/zero_shot", r.zero_shot);
    table.add_summary("multibias/" + r.bias + "/tod", r.tod);
    csv << r.bias << ',' << num(r.zero_shot_summary.wg_mean) << ',' << num(r.tod_summary.wg_mean)
        << ',' << num(r.zero_shot_summary.avg_mean) << ',' << num(r.tod_summary.avg_mean) << '\n';
    zs += r.zero_shot_summary.wg_mean / double(rows.size());
    tod += r.tod_summary.wg_mean / double(rows.size());
    zs_avg += r.zero_shot_summary.avg_mean / double(rows.size());
    tod_avg += r.tod_summary.avg_mean / double(rows.size());
    out.push_back({{"bias", r.bias},
                   {"zero_shot", summary_json(r.zero_shot_summary)},
                   {"tod", summary_json(r.tod_summary)}});
  }
  csv << "average," << num(zs) << ',' << num(tod) << ',' << num(zs_avg) << ',' << num(tod_avg) << '\n';
  w.write("multibias.csv", csv.str());
  w.write("metrics.csv", table.csv());
  return out;
}

json scenario_unknown(ArtifactWriter& w, const ExperimentConfig& cfg) {
  const auto rows = run_unknown_bias(cfg);
  MetricsTable table;
  std::ostringstream csv;
  csv << "method,auxiliary,wg,avg,gap,wg_std\n";
  json out = json::array();
  for (const auto& r : rows) {
    const bool zs = r.auxiliary.empty();
    add_runs(table, zs ? "unknown_bias/zero_shot" : "unknown_bias/" + r.auxiliary, r.runs);
    csv << (zs ? "zero_shot" : "tod") << ',' << r.auxiliary << ',' << num(r.summary.wg_mean) << ','
        << num(r.summary.avg_mean) << ',' << num(r.summary.gap_mean) << ','
        << num(r.summary.wg_std) << '\n';
    out.push_back({{"method", zs ? "zero_shot" : "tod"},
                   {"auxiliary", r.auxiliary},
                   {"runs", runs_json(r.runs)},
                   {"summary", summary_json(r.summary)}});
  }
  w.write("unknownbias.csv", csv.str());
  w.write("metrics.csv", table.csv());
  return out;
}

}  // namespace

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 15];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) EVP_DigestUpdate(ctx, buf, in.gcount());
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i)
    hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

std::vector<std::string> verify_manifest(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) fail(ErrorKind::kIo, "cannot read " + manifest_path.string());
  const json m = json::parse(in);
  std::vector<std::string> bad;
  for (const auto& a : m.at("artifacts")) {
    const fs::path p = manifest_path.parent_path() / a.at("path").get<std::string>();
    if (!fs::exists(p) || sha256_file(p) != a.at("sha256").get<std::string>()) {
      bad.push_back(a.at("path").get<std::string>());
    }
  }
  return bad;
}

json run_experiment(const ExperimentConfig& cfg, const fs::path& out_dir) {
  validate_config(cfg);
  const auto start = std::chrono::steady_clock::now();
  ArtifactWriter w(out_dir);
  json results;
  SelectionPolicy policy = cfg.evaluation.selection;
  switch (cfg.scenario) {
    case Scenario::kStandard: results = scenario_standard(w, cfg); break;
    case Scenario::kAblationGrid: results = scenario_ablation(w, cfg); break;
    case Scenario::kImageSweep: results = scenario_sweep(w, cfg); break;
    case Scenario::kMultibias: results = scenario_multibias(w, cfg); break;
    case Scenario::kUnknownBias:
      results = scenario_unknown(w, cfg);
      policy = SelectionPolicy::kAverage;
      break;
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json manifest = {{"scenario", scenario_name(cfg.scenario)},
                   {"selection_policy", selection_policy_name(policy)},
                   {"seeds", cfg.seeds},
                   {"config", config_to_json(cfg)},
                   {"results", results},
                   {"artifacts", w.inventory()},
                   {"wall_clock_seconds", seconds}};
  std::ofstream out(out_dir / "manifest.json", std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write manifest in " + out_dir.string());
  out << manifest.dump(2) << '\n';
  return manifest;
}

std::string text_sample_jsonl(std::span<const TextSample> samples) {
  std::ostringstream out;
  for (const auto& s : samples) {
    out << json{{"tokens", s.tokens}, {"y", s.y}, {"b", s.b}, {"g", s.g}, {"labels", s.labels}}.dump()
        << '\n';
  }
  return out.str();
}

std::string image_sample_jsonl(std::span<const ImageSample> samples) {
  std::ostringstream out;
  for (const auto& s : samples) {
    std::vector<double> f(s.feature.data(), s.feature.data() + s.feature.size());
    out << json{{"feature", f}, {"y", s.y}, {"b", s.b}, {"g", s.g}, {"labels", s.labels}}.dump()
        << '\n';
  }
  return out.str();
}

json schema_json(const AttributeSchema& schema) {
  auto attr = [](const AttributeSpec& a) {
    json classes = json::array();
    for (const auto& c : a.classes) {
      classes.push_back({{"name", c.name},
                         {"name_token", c.name_token},
                         {"name_token_rate", c.name_token_rate},
                         {"descriptor_pool", c.descriptor_pool}});
    }
    return json{{"id", a.id}, {"name", a.name}, {"classes", classes}};
  };
  json biases = json::array(), distractors = json::array();
  for (const auto& a : schema.biases) biases.push_back(attr(a));
  for (const auto& a : schema.distractors) distractors.push_back(attr(a));
  return {{"target", attr(schema.target)},
          {"biases", biases},
          {"distractors", distractors},
          {"separator", schema.separator},
          {"template_tokens", schema.template_tokens},
          {"group_count", schema.layout().group_count()}};
}

json generate_datasets(const ExperimentConfig& cfg, const fs::path& out_dir) {
  validate_config(cfg);
  const Encoder encoder = build_encoder(cfg.encoder);
  const std::uint64_t seed = cfg.seeds.front();
  const AttributeSchema world = build_schema(
      world_description(cfg, cfg.world.biases, cfg.world.distractors, derive_seed(seed, "schema")),
      encoder);
  ArtifactWriter w(out_dir);
  w.write("schema.json", schema_json(world).dump(2));
  std::string stage = "text";
  for (const auto& b : world.biases) stage += "/" + b.name;
  Rng text_rng(derive_seed(seed, stage));
  TextOptions options;
  options.distractor_parts =
      std::min<int>(cfg.world.distractor_parts, static_cast<int>(world.distractors.size()));
  const auto texts = build_balanced_text_set(world, cfg.world.text_per_group, text_rng, options);
  w.write("text_train.jsonl", text_sample_jsonl(texts));
  const double rho = cfg.evaluation.correlation_rate;
  const double noise = cfg.world.image_noise_std;
  Rng val_rng(derive_seed(seed, "val"));
  w.write("image_val.jsonl", image_sample_jsonl(build_biased_image_set(
                                 world, encoder, cfg.evaluation.val_size, rho, val_rng, noise)));
  Rng test_rng(derive_seed(seed, "test"));
  w.write("image_test.jsonl", image_sample_jsonl(build_biased_image_set(
                                  world, encoder, cfg.evaluation.test_size, rho, test_rng, noise)));
  json manifest = {{"scenario", "generate"},
                   {"seed", seed},
                   {"config", config_to_json(cfg)},
                   {"artifacts", w.inventory()}};
  std::ofstream out(out_dir / "manifest.json", std::ios::trunc);
  out << manifest.dump(2) << '\n';
  return manifest;
}

}  // namespace tod
