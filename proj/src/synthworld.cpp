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


#include "tod/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

namespace tod {

GroupLayout::GroupLayout(std::vector<int> class_counts) : counts_(std::move(class_counts)) {
  group_count_ = 1;
  for (int c : counts_) {
    if (c < 1) fail(ErrorKind::kSchema, "group layout needs positive class counts");
    group_count_ *= c;
  }
}

int GroupLayout::index(std::span<const int> labels) const {
  if (labels.size() != counts_.size()) {
    fail(ErrorKind::kDomain, "expected " + std::to_string(counts_.size()) + " labels, got " +
                                 std::to_string(labels.size()));
  }
  int g = 0;
  for (std::size_t k = 0; k < counts_.size(); ++k) {
    if (labels[k] < 0 || labels[k] >= counts_[k]) {
      fail(ErrorKind::kDomain, "label " + std::to_string(labels[k]) + " out of range for dimension " +
                                   std::to_string(k));
    }
    g = g * counts_[k] + labels[k];
  }
  return g;
}

int GroupLayout::index(int y, std::span<const int> b) const {
  std::vector<int> labels;
  labels.reserve(b.size() + 1);
  labels.push_back(y);
  labels.insert(labels.end(), b.begin(), b.end());
  return index(labels);
}

std::vector<int> GroupLayout::decode(int g) const {
  if (g < 0 || g >= group_count_) fail(ErrorKind::kDomain, "group index out of range");
  std::vector<int> labels(counts_.size());
  for (int k = static_cast<int>(counts_.size()) - 1; k >= 0; --k) {
    labels[k] = g % counts_[k];
    g /= counts_[k];
  }
  return labels;
}

GroupLayout AttributeSchema::layout() const {
  std::vector<int> counts{target.class_count()};
  for (const auto& b : biases) counts.push_back(b.class_count());
  return GroupLayout(counts);
}

const AttributeSpec& AttributeSchema::attribute(int id) const {
  if (target.id == id) return target;
  for (const auto& a : biases)
    if (a.id == id) return a;
  for (const auto& a : distractors)
    if (a.id == id) return a;
  fail(ErrorKind::kDomain, "unknown attribute id " + std::to_string(id));
}

const AttributeSpec* AttributeSchema::find(const std::string& name) const {
  if (target.name == name) return &target;
  for (const auto& a : biases)
    if (a.name == name) return &a;
  for (const auto& a : distractors)
    if (a.name == name) return &a;
  return nullptr;
}

std::vector<int> AttributeSchema::bias_ids() const {
  std::vector<int> ids;
  for (const auto& b : biases) ids.push_back(b.id);
  return ids;
}

AttributeSchema AttributeSchema::with_biases(const std::vector<std::string>& names) const {
  std::vector<AttributeSpec> pool = biases;
  pool.insert(pool.end(), distractors.begin(), distractors.end());
  std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  AttributeSchema view = *this;
  view.biases.clear();
  view.distractors.clear();
  std::set<std::string> picked;
  for (const auto& n : names) {
    if (n == target.name) fail(ErrorKind::kConfig, "attribute '" + n + "' is the target");
    auto it = std::find_if(pool.begin(), pool.end(), [&](const auto& a) { return a.name == n; });
    if (it == pool.end()) fail(ErrorKind::kConfig, "unknown attribute '" + n + "'");
    if (!picked.insert(n).second) fail(ErrorKind::kConfig, "attribute '" + n + "' listed twice");
    view.biases.push_back(*it);
  }
  for (const auto& a : pool)
    if (!picked.count(a.name)) view.distractors.push_back(a);
  return view;
}

namespace {

void check_description(const SchemaDescription& desc) {
  if (desc.target.classes.size() < 2) {
    fail(ErrorKind::kSchema, "target attribute '" + desc.target.name + "' needs at least 2 classes");
  }
  if (desc.biases.empty()) fail(ErrorKind::kSchema, "schema needs at least one bias attribute");
  std::set<std::string> attr_names, class_names;
  auto visit = [&](const AttributeDescription& a) {
    if (a.classes.size() < 2) {
      fail(ErrorKind::kSchema, "attribute '" + a.name + "' needs at least 2 classes");
    }
    if (!attr_names.insert(a.name).second) {
      fail(ErrorKind::kSchema, "duplicate attribute name '" + a.name + "'");
    }
    if (!(a.name_token_rate >= 0.0 && a.name_token_rate <= 1.0)) {
      fail(ErrorKind::kSchema, "name token rate of '" + a.name + "' outside [0, 1]");
    }
    for (const auto& c : a.classes)
      if (!class_names.insert(c).second) {
        fail(ErrorKind::kSchema, "duplicate class name '" + c + "'");
      }
  };
  visit(desc.target);
  for (const auto& a : desc.biases) visit(a);
  for (const auto& a : desc.distractors) visit(a);
  const WorldShape& s = desc.shape;
  if (s.pool_size < 1 || s.concept_tokens < 1) {
    fail(ErrorKind::kSchema, "descriptor pools must be non-empty");
  }
  if (s.min_descriptor_length < 1 || s.max_descriptor_length < s.min_descriptor_length) {
    fail(ErrorKind::kSchema, "invalid descriptor length range");
  }
  if (s.template_length < 1) fail(ErrorKind::kSchema, "template must be non-empty");
  if (!(std::abs(s.spurious_alignment) <= 1.0) || !(std::abs(s.descriptor_alignment) <= 1.0)) {
    fail(ErrorKind::kSchema, "alignments must lie in [-1, 1]");
  }
}

// Share of the vocabulary, closest to the median projected norm, eligible as names.
constexpr double kNameNormShare = 0.1;
// Of those, the share each world draws from, so names differ between seeds.
constexpr double kNameDrawShare = 0.5;

// Greedy token picker over the projected, normalized vocabulary.
class TokenAllocator {
 public:
  TokenAllocator(const Encoder& encoder, Rng& rng)
      : projected_(encoder.token_table() * encoder.projection()),
        used_(encoder.vocab_size(), false) {
    directions_ = projected_.rowwise().normalized();
    const Vector norms = projected_.rowwise().norm();
    std::vector<double> sorted(norms.data(), norms.data() + norms.size());
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double median = sorted[sorted.size() / 2];
    const Vector offset = (norms.array() / median - 1.0).abs().matrix();
    std::vector<double> spread(offset.data(), offset.data() + offset.size());
    const auto cut = static_cast<std::ptrdiff_t>(kNameNormShare * double(spread.size()));
    std::nth_element(spread.begin(), spread.begin() + cut, spread.end());
    off_norm_ = Vector::Zero(norms.size());
    std::bernoulli_distribution eligible(kNameDrawShare);
    for (int i = 0; i < norms.size(); ++i)
      if (offset[i] > spread[cut] || !eligible(rng)) off_norm_[i] = 1e3;
  }

  // Added to name scores so that every class name has about the same
  // projected length and no class gets a head start in cosine ranking.
  const Vector& name_penalty() const { return off_norm_; }

  int remaining() const { return static_cast<int>(std::count(used_.begin(), used_.end(), false)); }
  const Matrix& directions() const { return directions_; }

  TokenId take(TokenId id) {
    used_[id] = true;
    return id;
  }

  // Unused token with the lowest score; ties go to the lowest id.
  TokenId take_best(const Vector& score) {
    TokenId best = -1;
    double best_score = std::numeric_limits<double>::infinity();
    for (int i = 0; i < score.size(); ++i) {
      if (!used_[i] && score[i] < best_score) {
        best = i;
        best_score = score[i];
      }
    }
    if (best < 0) fail(ErrorKind::kSchema, "vocabulary exhausted while assigning tokens");
    return take(best);
  }

  // Tokens whose projected embeddings nearly cancel, so the template adds
  // little direction of its own to a prompt.
  std::vector<TokenId> take_neutral(int count) {
    std::vector<TokenId> out;
    Vector sum = Vector::Zero(projected_.cols());
    for (int k = 0; k < count; ++k) {
      Vector score = (projected_.rowwise() + sum.transpose()).rowwise().norm();
      out.push_back(take_best(score));
      sum += projected_.row(out.back()).transpose();
    }
    return out;
  }

  // Unused token least aligned with every token in `avoid`.
  TokenId take_orthogonal(const std::vector<TokenId>& avoid) {
    Vector score = off_norm_;
    for (TokenId t : avoid) score += (directions_ * directions_.row(t).transpose()).cwiseAbs();
    return take_best(score);
  }

 private:
  Matrix projected_;
  Matrix directions_;
  Vector off_norm_;
  std::vector<bool> used_;
};

AttributeSpec make_attribute(int id, const AttributeDescription& d) {
  AttributeSpec spec;
  spec.id = id;
  spec.name = d.name;
  for (const auto& c : d.classes) {
    ClassSpec cls;
    cls.name = c;
    cls.name_token_rate = d.name_token_rate;
    spec.classes.push_back(cls);
  }
  return spec;
}

}  // namespace

AttributeSchema build_schema(const SchemaDescription& desc, const Encoder& encoder) {
  check_description(desc);
  const WorldShape& shape = desc.shape;
  AttributeSchema schema;
  schema.target = make_attribute(0, desc.target);
  int next_id = 1;
  for (const auto& b : desc.biases) schema.biases.push_back(make_attribute(next_id++, b));
  for (const auto& d : desc.distractors) schema.distractors.push_back(make_attribute(next_id++, d));

  int classes = 0;
  for (int id = 0; id < schema.attribute_count(); ++id)
    classes += schema.attribute(id).class_count();
  const long demand = 1L + shape.template_length + long(classes) * (1 + shape.concept_tokens);
  if (demand > encoder.vocab_size()) {
    fail(ErrorKind::kSchema, "schema needs " + std::to_string(demand) + " tokens but the vocabulary has " +
                                 std::to_string(encoder.vocab_size()));
  }

  Rng name_rng(derive_seed(desc.seed, "names"));
  TokenAllocator alloc(encoder, name_rng);
  schema.separator = alloc.take(0);
  schema.template_tokens = alloc.take_neutral(shape.template_length);

  // Bias and distractor names are mutually near-orthogonal; each target name
  // leans toward the names of the bias classes it co-occurs with.
  std::vector<TokenId> names;
  auto non_target = [&](AttributeSpec& a) {
    for (auto& c : a.classes) {
      c.name_token = alloc.take_orthogonal(names);
      names.push_back(c.name_token);
    }
  };
  for (auto& a : schema.biases) non_target(a);
  for (auto& a : schema.distractors) non_target(a);

  const Matrix& dirs = alloc.directions();
  auto correlated = [&](int target_class) {
    std::vector<TokenId> out;
    for (const auto& b : schema.biases)
      out.push_back(b.classes[target_class % b.class_count()].name_token);
    return out;
  };
  for (int i = 0; i < schema.target.class_count(); ++i) {
    std::vector<TokenId> linked = correlated(i);
    std::vector<TokenId> others;
    for (TokenId t : names)
      if (std::find(linked.begin(), linked.end(), t) == linked.end()) others.push_back(t);
    Vector score = alloc.name_penalty();
    for (TokenId t : others) score += (dirs * dirs.row(t).transpose()).cwiseAbs();
    for (TokenId t : linked) {
      score += ((dirs * dirs.row(t).transpose()).array() - shape.spurious_alignment).abs().matrix();
    }
    auto& cls = schema.target.classes[i];
    cls.name_token = alloc.take_best(score);
    names.push_back(cls.name_token);
  }

  // Descriptor tokens sit at a fixed cosine to their class direction and stay
  // clear of every other class direction and non-target name. Target directions drop
  // the part of the class name shared with the correlated bias names, so
  // images carry no name-level shortcut.
  std::vector<std::vector<Vector>> anchors(schema.attribute_count());
  for (int id = 0; id < schema.attribute_count(); ++id) {
    const AttributeSpec& a = schema.attribute(id);
    for (int c = 0; c < a.class_count(); ++c) {
      Vector anchor = dirs.row(a.classes[c].name_token).transpose();
      if (id == schema.target.id) {
        for (TokenId t : correlated(c)) {
          Vector u = dirs.row(t).transpose();
          anchor -= anchor.dot(u) * u;
        }
      }
      anchors[id].push_back(anchor.normalized());
    }
  }
  Rng rng(derive_seed(desc.seed, "schema"));
  auto fill_pools = [&](AttributeSpec& a) {
    for (int c = 0; c < a.class_count(); ++c) {
      ClassSpec& cls = a.classes[c];
      Vector score = ((dirs * anchors[a.id][c]).array() - shape.descriptor_alignment).abs().matrix();
      for (int id = 0; id < schema.attribute_count(); ++id) {
        const AttributeSpec& other = schema.attribute(id);
        for (int k = 0; k < other.class_count(); ++k) {
          if (id == a.id && k == c) continue;
          score += (dirs * anchors[id][k]).cwiseAbs();
          if (id != schema.target.id)
            score += (dirs * dirs.row(other.classes[k].name_token).transpose()).cwiseAbs();
        }
      }
      std::vector<TokenId> concept_ids;
      for (int k = 0; k < shape.concept_tokens; ++k) concept_ids.push_back(alloc.take_best(score));
      std::uniform_int_distribution<int> length(shape.min_descriptor_length,
                                                shape.max_descriptor_length);
      std::uniform_int_distribution<int> pick(0, shape.concept_tokens - 1);
      for (int p = 0; p < shape.pool_size; ++p) {
        std::vector<TokenId> seq(length(rng));
        for (auto& t : seq) t = concept_ids[pick(rng)];
        cls.descriptor_pool.push_back(std::move(seq));
      }
    }
  };
  fill_pools(schema.target);
  for (auto& a : schema.biases) fill_pools(a);
  for (auto& a : schema.distractors) fill_pools(a);
  return schema;
}

std::vector<TokenId> TemplateDescriptionProvider::describe(const AttributeSchema& schema,
                                                           int attribute_id, int class_index,
                                                           Rng& rng) const {
  const AttributeSpec& attr = schema.attribute(attribute_id);
  if (class_index < 0 || class_index >= attr.class_count()) {
    fail(ErrorKind::kDomain, "unknown class " + std::to_string(class_index) + " of attribute '" +
                                 attr.name + "'");
  }
  const ClassSpec& cls = attr.classes[class_index];
  if (cls.descriptor_pool.empty()) fail(ErrorKind::kSchema, "empty descriptor pool");
  std::uniform_int_distribution<std::size_t> pick(0, cls.descriptor_pool.size() - 1);
  std::bernoulli_distribution with_name(cls.name_token_rate);
  std::vector<TokenId> out;
  const auto& seq = cls.descriptor_pool[pick(rng)];
  if (with_name(rng)) out.push_back(cls.name_token);
  out.insert(out.end(), seq.begin(), seq.end());
  return out;
}

std::vector<TokenId> sample_class_description(const AttributeSchema& schema, int attribute_id,
                                              int class_index, Rng& rng) {
  return TemplateDescriptionProvider().describe(schema, attribute_id, class_index, rng);
}

namespace {

int label_slots(const AttributeSchema& schema) {
  int max_id = schema.target.id;
  for (const auto& a : schema.biases) max_id = std::max(max_id, a.id);
  for (const auto& a : schema.distractors) max_id = std::max(max_id, a.id);
  return max_id + 1;
}

// Recovers the source class of a part from its tokens.
bool part_matches(const ClassSpec& cls, std::span<const TokenId> tokens) {
  std::span<const TokenId> body = tokens;
  if (!body.empty() && body.front() == cls.name_token) body = body.subspan(1);
  if (body.empty()) return tokens.size() == 1;
  return std::any_of(cls.descriptor_pool.begin(), cls.descriptor_pool.end(), [&](const auto& seq) {
    return std::equal(seq.begin(), seq.end(), body.begin(), body.end());
  });
}

}  // namespace

TextSample compose_description(const AttributeSchema& schema,
                               std::span<const DescriptionPart> parts) {
  const std::size_t labeled = 1 + schema.biases.size();
  if (parts.size() < labeled) {
    fail(ErrorKind::kAnnotation, "description needs one part for the target and each bias");
  }
  TextSample sample;
  sample.labels.assign(label_slots(schema), -1);

  for (std::size_t k = 0; k < parts.size(); ++k) {
    const DescriptionPart& part = parts[k];
    int expected_id = -1;
    if (k == 0) {
      expected_id = schema.target.id;
    } else if (k < labeled) {
      expected_id = schema.biases[k - 1].id;
    } else if (std::none_of(schema.distractors.begin(), schema.distractors.end(),
                            [&](const auto& a) { return a.id == part.attribute_id; })) {
      fail(ErrorKind::kAnnotation, "part " + std::to_string(k) + " is not from a distractor attribute");
    }
    if (expected_id >= 0 && part.attribute_id != expected_id) {
      fail(ErrorKind::kAnnotation, "part " + std::to_string(k) + " comes from the wrong attribute");
    }
    const AttributeSpec* attr = nullptr;
    try {
      attr = &schema.attribute(part.attribute_id);
    } catch (const Error&) {
      fail(ErrorKind::kAnnotation, "part from unknown attribute " + std::to_string(part.attribute_id));
    }
    if (part.class_index < 0 || part.class_index >= attr->class_count() ||
        !part_matches(attr->classes[part.class_index], part.tokens)) {
      fail(ErrorKind::kAnnotation, "part " + std::to_string(k) + " is not from a known pool of '" +
                                       attr->name + "'");
    }
    if (sample.labels[part.attribute_id] >= 0) {
      fail(ErrorKind::kAnnotation, "attribute '" + attr->name + "' described twice");
    }
    sample.labels[part.attribute_id] = part.class_index;
    if (k > 0) sample.tokens.push_back(schema.separator);
    sample.tokens.insert(sample.tokens.end(), part.tokens.begin(), part.tokens.end());
  }
  sample.y = parts[0].class_index;
  for (std::size_t k = 1; k < labeled; ++k) sample.b.push_back(parts[k].class_index);
  sample.g = schema.layout().index(sample.y, sample.b);
  return sample;
}

std::vector<TextSample> build_balanced_text_set(const AttributeSchema& schema, int n_per_group,
                                                Rng& rng, const TextOptions& options,
                                                const DescriptionProvider* provider) {
  if (n_per_group < 1) fail(ErrorKind::kConfig, "n_per_group must be at least 1");
  if (options.distractor_parts < 0 ||
      options.distractor_parts > static_cast<int>(schema.distractors.size())) {
    fail(ErrorKind::kConfig, "distractor_parts exceeds the number of distractor attributes");
  }
  TemplateDescriptionProvider fallback;
  const DescriptionProvider& source = provider ? *provider : fallback;
  const GroupLayout layout = schema.layout();
  std::vector<TextSample> out;
  out.reserve(std::size_t(n_per_group) * layout.group_count());
  for (int g = 0; g < layout.group_count(); ++g) {
    const std::vector<int> labels = layout.decode(g);
    for (int n = 0; n < n_per_group; ++n) {
      std::vector<DescriptionPart> parts;
      parts.push_back({schema.target.id, labels[0],
                       source.describe(schema, schema.target.id, labels[0], rng)});
      for (std::size_t k = 0; k < schema.biases.size(); ++k) {
        const int id = schema.biases[k].id;
        parts.push_back({id, labels[k + 1], source.describe(schema, id, labels[k + 1], rng)});
      }
      if (options.distractor_parts > 0) {
        std::vector<int> order(schema.distractors.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (int k = 0; k < options.distractor_parts; ++k) {
          const AttributeSpec& a = schema.distractors[order[k]];
          std::uniform_int_distribution<int> cls(0, a.class_count() - 1);
          const int c = cls(rng);
          parts.push_back({a.id, c, source.describe(schema, a.id, c, rng)});
        }
      }
      out.push_back(compose_description(schema, parts));
    }
  }
  return out;
}

ImageSample render_image(const AttributeSchema& schema, const Encoder& encoder, int y,
                         std::span<const int> b, Rng& rng, double noise_std) {
  if (!(noise_std >= 0.0)) fail(ErrorKind::kConfig, "image noise std must be non-negative");
  ImageSample img;
  img.y = y;
  img.b.assign(b.begin(), b.end());
  img.g = schema.layout().index(y, b);
  img.labels.assign(label_slots(schema), -1);

  std::vector<TokenId> caption;
  auto add = [&](const AttributeSpec& a, int c) {
    const auto& pool = a.classes[c].descriptor_pool;
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    const auto& seq = pool[pick(rng)];
    caption.insert(caption.end(), seq.begin(), seq.end());
    img.labels[a.id] = c;
  };
  add(schema.target, y);
  for (std::size_t k = 0; k < schema.biases.size(); ++k) add(schema.biases[k], b[k]);
  for (const auto& a : schema.distractors) {
    std::uniform_int_distribution<int> cls(0, a.class_count() - 1);
    add(a, cls(rng));
  }
  img.feature = encoder.mean_of_tokens(caption);
  if (noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, noise_std);
    for (int i = 0; i < img.feature.size(); ++i) img.feature[i] += noise(rng);
  }
  return img;
}

std::vector<int> biased_group_counts(const GroupLayout& layout, int n_total, double rho) {
  if (!(rho >= 0.5 && rho <= 1.0)) fail(ErrorKind::kConfig, "correlation rate must lie in [0.5, 1]");
  const auto& counts = layout.class_counts();
  const int n_target = counts[0];
  if (n_total < 0 || n_total % n_target != 0) {
    fail(ErrorKind::kConfig, "n_total=" + std::to_string(n_total) +
                                 " is not divisible by the number of target classes (" +
                                 std::to_string(n_target) + ")");
  }
  const int per_class = n_total / n_target;
  const int inner = layout.group_count() / n_target;
  std::vector<int> out(layout.group_count(), 0);
  for (int y = 0; y < n_target; ++y) {
    // Bias attributes are drawn independently given y: the correlated class
    // gets rho, the other classes share 1 - rho evenly.
    std::vector<double> quota(inner);
    for (int j = 0; j < inner; ++j) {
      const std::vector<int> labels = layout.decode(y * inner + j);
      double w = 1.0;
      for (std::size_t k = 1; k < labels.size(); ++k) {
        const int cb = counts[k];
        w *= labels[k] == y % cb ? rho : (1.0 - rho) / double(cb - 1);
      }
      quota[j] = w * per_class;
    }
    // Largest-remainder rounding; ties go to the lower group index.
    std::vector<int> alloc(inner);
    int assigned = 0;
    for (int j = 0; j < inner; ++j) {
      alloc[j] = static_cast<int>(std::floor(quota[j] + 1e-9));
      assigned += alloc[j];
    }
    std::vector<int> order(inner);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return quota[a] - alloc[a] > quota[b] - alloc[b] + 1e-12;
    });
    for (int k = 0; assigned < per_class; ++k, ++assigned) ++alloc[order[k % inner]];
    for (int j = 0; j < inner; ++j) out[y * inner + j] = alloc[j];
  }
  return out;
}

namespace {

std::vector<ImageSample> render_counts(const AttributeSchema& schema, const Encoder& encoder,
                                       const std::vector<int>& counts, Rng& rng,
                                       double noise_std) {
  const GroupLayout layout = schema.layout();
  std::vector<ImageSample> out;
  for (int g = 0; g < layout.group_count(); ++g) {
    const std::vector<int> labels = layout.decode(g);
    const std::span<const int> b(labels.data() + 1, labels.size() - 1);
    for (int n = 0; n < counts[g]; ++n)
      out.push_back(render_image(schema, encoder, labels[0], b, rng, noise_std));
  }
  return out;
}

}  // namespace

std::vector<ImageSample> build_biased_image_set(const AttributeSchema& schema,
                                                const Encoder& encoder, int n_total, double rho,
                                                Rng& rng, double noise_std) {
  return render_counts(schema, encoder, biased_group_counts(schema.layout(), n_total, rho), rng,
                       noise_std);
}

std::vector<ImageSample> build_balanced_image_set(const AttributeSchema& schema,
                                                  const Encoder& encoder, int n_per_group,
                                                  Rng& rng, double noise_std) {
  if (n_per_group < 1) fail(ErrorKind::kConfig, "n_per_group must be at least 1");
  return render_counts(schema, encoder, std::vector<int>(schema.layout().group_count(), n_per_group),
                       rng, noise_std);
}

int regroup_index(std::span<const int> labels, const AttributeSchema& schema,
                  std::span<const int> attribute_ids) {
  std::vector<int> counts{schema.target.class_count()};
  std::vector<int> sub{labels[schema.target.id]};
  for (int id : attribute_ids) {
    counts.push_back(schema.attribute(id).class_count());
    if (id < 0 || id >= static_cast<int>(labels.size()) || labels[id] < 0) {
      fail(ErrorKind::kDomain, "sample has no label for attribute id " + std::to_string(id));
    }
    sub.push_back(labels[id]);
  }
  return GroupLayout(counts).index(sub);
}

}  // namespace tod
