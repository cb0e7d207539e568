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


#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>
#include <vector>

#include "tod/harness.hpp"

namespace tod {

using nlohmann::json;

std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::kStandard: return "standard";
    case Scenario::kAblationGrid: return "ablation_grid";
    case Scenario::kImageSweep: return "image_sweep";
    case Scenario::kMultibias: return "multibias";
    case Scenario::kUnknownBias: return "unknown_bias";
  }
  return "standard";
}

Scenario parse_scenario(const std::string& name) {
  for (Scenario s : {Scenario::kStandard, Scenario::kAblationGrid, Scenario::kImageSweep,
                     Scenario::kMultibias, Scenario::kUnknownBias}) {
    if (scenario_name(s) == name) return s;
  }
  fail(ErrorKind::kConfig, "unknown scenario '" + name + "'");
}

namespace {

template <typename T>
struct is_vector : std::false_type {};
template <typename U>
struct is_vector<std::vector<U>> : std::true_type {};

// nlohmann converts 2.5 to an int silently; integral fields must be integers.
template <typename T>
bool exact_type(const json& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v.is_boolean();
  } else if constexpr (std::is_integral_v<T>) {
    return v.is_number_integer() && (std::is_signed_v<T> || v.is_number_unsigned());
  } else if constexpr (is_vector<T>::value) {
    if (!v.is_array()) return false;
    for (const auto& e : v)
      if (!exact_type<typename T::value_type>(e)) return false;
    return true;
  } else {
    return true;
  }
}

// Walks one JSON object, reporting problems with their field path.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail(ErrorKind::kConfig, where() + ": expected an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = node_.find(key);
    if (it == node_.end()) return;
    if (!exact_type<T>(*it)) fail(ErrorKind::kConfig, field(key) + ": wrong type");
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      fail(ErrorKind::kConfig, field(key) + ": wrong type");
    }
  }

  bool has(const char* key) {
    seen_.insert(key);
    return node_.contains(key);
  }
  Section child(const char* key) {
    seen_.insert(key);
    return Section(node_.at(key), field(key));
  }
  const json& raw(const char* key) {
    seen_.insert(key);
    return node_.at(key);
  }
  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!seen_.count(it.key())) fail(ErrorKind::kConfig, field(it.key()) + ": unknown field");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

AttributeDescription parse_attribute(const json& node, const std::string& path) {
  Section s(node, path);
  AttributeDescription a;
  s.read("name", a.name);
  s.read("classes", a.classes);
  s.read("name_token_rate", a.name_token_rate);
  s.finish();
  if (a.name.empty()) fail(ErrorKind::kConfig, path + ".name: must be non-empty");
  return a;
}

json attribute_json(const AttributeDescription& a) {
  return {{"name", a.name}, {"classes", a.classes}, {"name_token_rate", a.name_token_rate}};
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig cfg;
  Section root(doc, "");
  if (root.has("scenario")) {
    std::string name;
    root.read("scenario", name);
    try {
      cfg.scenario = parse_scenario(name);
    } catch (const Error& e) {
      fail(ErrorKind::kConfig, std::string("scenario: ") + e.what());
    }
  }
  root.read("seeds", cfg.seeds);
  root.read("out_dir", cfg.out_dir);
  if (root.has("calibration")) cfg.calibration = root.raw("calibration");

  if (root.has("encoder")) {
    Section s = root.child("encoder");
    s.read("vocab_size", cfg.encoder.vocab_size);
    s.read("token_dim", cfg.encoder.token_dim);
    s.read("embed_dim", cfg.encoder.embed_dim);
    s.read("seed", cfg.encoder.seed);
    s.finish();
  }
  if (root.has("world")) {
    Section s = root.child("world");
    WorldConfig& w = cfg.world;
    if (s.has("target")) w.target = parse_attribute(s.raw("target"), s.field("target"));
    if (s.has("attributes")) {
      const json& list = s.raw("attributes");
      if (!list.is_array()) fail(ErrorKind::kConfig, s.field("attributes") + ": expected an array");
      w.attributes.clear();
      for (std::size_t i = 0; i < list.size(); ++i) {
        w.attributes.push_back(
            parse_attribute(list[i], s.field("attributes") + "[" + std::to_string(i) + "]"));
      }
    }
    s.read("biases", w.biases);
    s.read("distractors", w.distractors);
    s.read("image_noise_std", w.image_noise_std);
    s.read("text_per_group", w.text_per_group);
    s.read("distractor_parts", w.distractor_parts);
    if (s.has("shape")) {
      Section sh = s.child("shape");
      sh.read("pool_size", w.shape.pool_size);
      sh.read("min_descriptor_length", w.shape.min_descriptor_length);
      sh.read("max_descriptor_length", w.shape.max_descriptor_length);
      sh.read("concept_tokens", w.shape.concept_tokens);
      sh.read("spurious_alignment", w.shape.spurious_alignment);
      sh.read("descriptor_alignment", w.shape.descriptor_alignment);
      sh.finish();
    }
    s.finish();
  }
  if (root.has("train")) {
    Section s = root.child("train");
    TrainConfig& t = cfg.train;
    s.read("learning_rate", t.learning_rate);
    s.read("momentum", t.momentum);
    s.read("weight_decay", t.weight_decay);
    s.read("warmup_epochs", t.warmup_epochs);
    s.read("total_epochs", t.total_epochs);
    s.read("batch_size", t.batch_size);
    s.read("margin", t.margin);
    s.read("logit_scale", t.logit_scale);
    s.read("context_length", t.context_length);
    s.finish();
  }
  if (root.has("evaluation")) {
    Section s = root.child("evaluation");
    s.read("val_size", cfg.evaluation.val_size);
    s.read("test_size", cfg.evaluation.test_size);
    s.read("correlation_rate", cfg.evaluation.correlation_rate);
    if (s.has("selection")) {
      std::string name;
      s.read("selection", name);
      try {
        cfg.evaluation.selection = parse_selection_policy(name);
      } catch (const Error& e) {
        fail(ErrorKind::kConfig, s.field("selection") + ": " + e.what());
      }
    }
    s.finish();
  }
  if (root.has("ablation")) {
    Section s = root.child("ablation");
    s.read("image_per_group", cfg.ablation.image_per_group);
    s.finish();
  }
  if (root.has("sweep")) {
    Section s = root.child("sweep");
    s.read("samples_per_group", cfg.sweep.samples_per_group);
    s.read("max_per_group", cfg.sweep.max_per_group);
    s.finish();
  }
  if (root.has("multibias")) {
    Section s = root.child("multibias");
    s.read("biases", cfg.multibias.biases);
    s.read("distractors", cfg.multibias.distractors);
    s.finish();
  }
  if (root.has("unknown_bias")) {
    Section s = root.child("unknown_bias");
    s.read("hidden", cfg.unknown_bias.hidden);
    s.read("auxiliaries", cfg.unknown_bias.auxiliaries);
    s.finish();
  }
  root.finish();
  validate_config(cfg);
  return cfg;
}

ExperimentConfig default_config() {
  static const char* const kText =
#include "tod_default_config.inc"
      ;
  return parse_config(json::parse(kText));
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, path.string() + ": malformed JSON: " + e.what());
  }
  return parse_config(doc);
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.seeds.empty()) fail(ErrorKind::kConfig, "seeds: must list at least one seed");
  const WorldConfig& w = cfg.world;
  std::set<std::string> known;
  for (const auto& a : w.attributes) {
    if (a.name == w.target.name) {
      fail(ErrorKind::kConfig, "world.attributes: '" + a.name + "' duplicates the target");
    }
    if (!known.insert(a.name).second) {
      fail(ErrorKind::kConfig, "world.attributes: duplicate attribute '" + a.name + "'");
    }
  }
  auto check_names = [&](const std::vector<std::string>& names, const std::string& path) {
    for (const auto& n : names) {
      if (n == w.target.name) fail(ErrorKind::kConfig, path + ": '" + n + "' is the target attribute");
      if (!known.count(n)) fail(ErrorKind::kConfig, path + ": unknown attribute '" + n + "'");
    }
  };
  check_names(w.biases, "world.biases");
  check_names(w.distractors, "world.distractors");
  check_names(cfg.multibias.biases, "multibias.biases");
  check_names(cfg.multibias.distractors, "multibias.distractors");
  check_names(cfg.unknown_bias.auxiliaries, "unknown_bias.auxiliaries");
  if (!cfg.unknown_bias.hidden.empty()) {
    check_names({cfg.unknown_bias.hidden}, "unknown_bias.hidden");
  }
  if (w.biases.empty()) fail(ErrorKind::kConfig, "world.biases: needs at least one bias attribute");
  if (w.text_per_group < 1) fail(ErrorKind::kConfig, "world.text_per_group: must be at least 1");
  if (!(w.image_noise_std >= 0.0)) fail(ErrorKind::kConfig, "world.image_noise_std: must be >= 0");
  if (cfg.evaluation.val_size < 1 || cfg.evaluation.test_size < 1) {
    fail(ErrorKind::kConfig, "evaluation: val_size and test_size must be positive");
  }
  const double rho = cfg.evaluation.correlation_rate;
  if (!(rho >= 0.5 && rho <= 1.0)) {
    fail(ErrorKind::kConfig, "evaluation.correlation_rate: must lie in [0.5, 1]");
  }
  try {
    cfg.train.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kConfig, std::string("train: ") + e.what());
  }
  if (cfg.sweep.samples_per_group.empty()) {
    fail(ErrorKind::kConfig, "sweep.samples_per_group: must be non-empty");
  }
  for (int n : cfg.sweep.samples_per_group) {
    if (n < 1 || n > cfg.sweep.max_per_group) {
      fail(ErrorKind::kConfig, "sweep.samples_per_group: " + std::to_string(n) +
                                   " outside [1, " + std::to_string(cfg.sweep.max_per_group) + "]");
    }
  }
  if (cfg.ablation.image_per_group < 1) {
    fail(ErrorKind::kConfig, "ablation.image_per_group: must be at least 1");
  }
}

json config_to_json(const ExperimentConfig& cfg) {
  const WorldConfig& w = cfg.world;
  json attrs = json::array();
  for (const auto& a : w.attributes) attrs.push_back(attribute_json(a));
  json doc = {
      {"scenario", scenario_name(cfg.scenario)},
      {"seeds", cfg.seeds},
      {"out_dir", cfg.out_dir},
      {"encoder",
       {{"vocab_size", cfg.encoder.vocab_size},
        {"token_dim", cfg.encoder.token_dim},
        {"embed_dim", cfg.encoder.embed_dim},
        {"seed", cfg.encoder.seed}}},
      {"world",
       {{"target", attribute_json(w.target)},
        {"attributes", attrs},
        {"biases", w.biases},
        {"distractors", w.distractors},
        {"image_noise_std", w.image_noise_std},
        {"text_per_group", w.text_per_group},
        {"distractor_parts", w.distractor_parts},
        {"shape",
         {{"pool_size", w.shape.pool_size},
          {"min_descriptor_length", w.shape.min_descriptor_length},
          {"max_descriptor_length", w.shape.max_descriptor_length},
          {"concept_tokens", w.shape.concept_tokens},
          {"spurious_alignment", w.shape.spurious_alignment},
          {"descriptor_alignment", w.shape.descriptor_alignment}}}}},
      {"train",
       {{"learning_rate", cfg.train.learning_rate},
        {"momentum", cfg.train.momentum},
        {"weight_decay", cfg.train.weight_decay},
        {"warmup_epochs", cfg.train.warmup_epochs},
        {"total_epochs", cfg.train.total_epochs},
        {"batch_size", cfg.train.batch_size},
        {"margin", cfg.train.margin},
        {"logit_scale", cfg.train.logit_scale},
        {"context_length", cfg.train.context_length}}},
      {"evaluation",
       {{"val_size", cfg.evaluation.val_size},
        {"test_size", cfg.evaluation.test_size},
        {"correlation_rate", cfg.evaluation.correlation_rate},
        {"selection", selection_policy_name(cfg.evaluation.selection)}}},
      {"ablation", {{"image_per_group", cfg.ablation.image_per_group}}},
      {"sweep",
       {{"samples_per_group", cfg.sweep.samples_per_group},
        {"max_per_group", cfg.sweep.max_per_group}}},
      {"multibias",
       {{"biases", cfg.multibias.biases}, {"distractors", cfg.multibias.distractors}}},
      {"unknown_bias",
       {{"hidden", cfg.unknown_bias.hidden}, {"auxiliaries", cfg.unknown_bias.auxiliaries}}}};
  if (!cfg.calibration.is_null()) doc["calibration"] = cfg.calibration;
  return doc;
}

}  // namespace tod
