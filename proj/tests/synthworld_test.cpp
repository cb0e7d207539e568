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
#include <map>
#include <set>

#include "gtest/gtest.h"

namespace tod {
namespace {

SchemaDescription Waterbirds() {
  SchemaDescription d;
  d.target = {"bird", {"landbird", "waterbird"}, 1.0};
  d.biases = {{"place", {"land", "water"}, 0.0}};
  d.seed = 11;
  return d;
}

SchemaDescription CelebA() {
  SchemaDescription d;
  d.target = {"hair", {"dark", "blond"}, 1.0};
  d.biases = {{"gender", {"female", "male"}, 0.0},
              {"age", {"young", "old"}, 0.0},
              {"wavy", {"straight", "wavy"}, 0.0}};
  d.distractors = {{"smile", {"neutral", "smiling"}, 0.0},
                   {"glasses", {"none", "eyeglasses"}, 0.0},
                   {"hat", {"bare", "hat"}, 0.0}};
  d.seed = 3;
  return d;
}

class World : public ::testing::Test {
 protected:
  Encoder encoder = build_encoder({4096, 32, 16, 7});
};

std::set<TokenId> NameTokens(const AttributeSchema& s) {
  std::set<TokenId> out;
  for (int id = 0; id < s.attribute_count(); ++id)
    for (const auto& c : s.attribute(id).classes) out.insert(c.name_token);
  return out;
}

TEST_F(World, WaterbirdsShape) {
  const AttributeSchema s = build_schema(Waterbirds(), encoder);
  EXPECT_EQ(s.target.class_count(), 2);
  EXPECT_EQ(s.biases.at(0).class_count(), 2);
  EXPECT_EQ(s.layout().group_count(), 4);
  EXPECT_EQ(static_cast<int>(s.template_tokens.size()), 5);
}

TEST_F(World, CelebAShape) {
  const AttributeSchema s = build_schema(CelebA(), encoder);
  EXPECT_EQ(s.layout().group_count(), 16);
  EXPECT_EQ(s.attribute_count(), 7);
}

TEST_F(World, SchemaErrors) {
  auto expect_schema_error = [&](const SchemaDescription& d) {
    try {
      build_schema(d, encoder);
      FAIL() << "expected schema error";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kSchema);
    }
  };
  SchemaDescription one_class = Waterbirds();
  one_class.target.classes = {"landbird"};
  expect_schema_error(one_class);
  SchemaDescription dup = Waterbirds();
  dup.biases[0].classes = {"land", "landbird"};
  expect_schema_error(dup);
  SchemaDescription empty_pool = Waterbirds();
  empty_pool.shape.pool_size = 0;
  expect_schema_error(empty_pool);
  SchemaDescription no_bias = Waterbirds();
  no_bias.biases.clear();
  expect_schema_error(no_bias);
  const Encoder tiny = build_encoder({40, 8, 4, 1});
  EXPECT_THROW(build_schema(Waterbirds(), tiny), Error);
}

TEST_F(World, TokensAreDistinctAndPoolsDisjoint) {
  const AttributeSchema s = build_schema(CelebA(), encoder);
  const std::set<TokenId> names = NameTokens(s);
  EXPECT_EQ(names.size(), 14u);
  for (int id = 0; id < s.attribute_count(); ++id) {
    const AttributeSpec& a = s.attribute(id);
    std::vector<std::set<TokenId>> per_class;
    for (const auto& c : a.classes) {
      std::set<TokenId> toks;
      ASSERT_FALSE(c.descriptor_pool.empty());
      for (const auto& seq : c.descriptor_pool) {
        EXPECT_GE(seq.size(), 3u);
        EXPECT_LE(seq.size(), 5u);
        for (TokenId t : seq) {
          EXPECT_FALSE(names.count(t)) << "descriptor pool holds a class name";
          EXPECT_NE(t, s.separator);
          toks.insert(t);
        }
      }
      per_class.push_back(toks);
    }
    for (std::size_t i = 0; i < per_class.size(); ++i)
      for (std::size_t j = i + 1; j < per_class.size(); ++j)
        for (TokenId t : per_class[i]) EXPECT_FALSE(per_class[j].count(t));
  }
}

TEST_F(World, SchemaIsDeterministic) {
  const AttributeSchema a = build_schema(CelebA(), encoder);
  const AttributeSchema b = build_schema(CelebA(), encoder);
  EXPECT_EQ(a.template_tokens, b.template_tokens);
  for (int id = 0; id < a.attribute_count(); ++id)
    for (int c = 0; c < a.attribute(id).class_count(); ++c) {
      EXPECT_EQ(a.attribute(id).classes[c].name_token, b.attribute(id).classes[c].name_token);
      EXPECT_EQ(a.attribute(id).classes[c].descriptor_pool, b.attribute(id).classes[c].descriptor_pool);
    }
}

TEST_F(World, NamesShareProjectedLength) {
  const AttributeSchema s = build_schema(CelebA(), encoder);
  std::vector<double> lengths;
  for (TokenId t : NameTokens(s)) lengths.push_back((encoder.projection().transpose() * encoder.token(t)).norm());
  const auto [lo, hi] = std::minmax_element(lengths.begin(), lengths.end());
  EXPECT_LT(*hi / *lo - 1.0, 0.05);
}

TEST_F(World, NamesVaryWithSeed) {
  SchemaDescription d = Waterbirds();
  const AttributeSchema a = build_schema(d, encoder);
  d.seed += 1;
  const AttributeSchema b = build_schema(d, encoder);
  EXPECT_NE(NameTokens(a), NameTokens(b));
}

TEST_F(World, DescriptorsAvoidOtherClasses) {
  const AttributeSchema s = build_schema(Waterbirds(), encoder);
  auto mean_dir = [&](const ClassSpec& c) {
    Vector m = Vector::Zero(encoder.token_dim());
    for (const auto& seq : c.descriptor_pool) m += encoder.mean_of_tokens(seq);
    return encoder.encode_image(m);
  };
  const UnitEmbedding d0 = mean_dir(s.target.classes[0]);
  const UnitEmbedding d1 = mean_dir(s.target.classes[1]);
  EXPECT_LT(std::abs(cosine(d0, d1)), 0.25);
  for (int c = 0; c < 2; ++c) {
    const std::vector<TokenId> bias_name{s.biases[0].classes[c].name_token};
    EXPECT_LT(std::abs(cosine(c == 0 ? d0 : d1, encoder.encode_tokens(bias_name))), 0.25);
  }
}

TEST_F(World, TargetNamesLeanTowardCorrelatedBias) {
  SchemaDescription d = Waterbirds();
  d.shape.spurious_alignment = 0.6;
  const AttributeSchema s = build_schema(d, encoder);
  for (int c = 0; c < 2; ++c) {
    const std::vector<TokenId> t{s.target.classes[c].name_token};
    const std::vector<TokenId> same{s.biases[0].classes[c].name_token};
    const std::vector<TokenId> other{s.biases[0].classes[1 - c].name_token};
    const UnitEmbedding zt = encoder.encode_tokens(t);
    EXPECT_NEAR(cosine(zt, encoder.encode_tokens(same)), 0.6, 0.05);
    EXPECT_LT(std::abs(cosine(zt, encoder.encode_tokens(other))), 0.2);
  }
}

TEST_F(World, DescriptionNameRate) {
  SchemaDescription d = Waterbirds();
  d.target.name_token_rate = 0.9;
  const AttributeSchema s = build_schema(d, encoder);
  Rng rng(1);
  int with_name = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto seq = sample_class_description(s, 0, 1, rng);
    with_name += std::count(seq.begin(), seq.end(), s.target.classes[1].name_token) > 0;
  }
  EXPECT_GE(with_name / 10000.0, 0.88);
  EXPECT_LE(with_name / 10000.0, 0.92);
}

TEST_F(World, DescriptionDegenerateRates) {
  const AttributeSchema s = build_schema(Waterbirds(), encoder);
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const auto target = sample_class_description(s, 0, 0, rng);
    EXPECT_EQ(target.front(), s.target.classes[0].name_token);
    const auto bias = sample_class_description(s, 1, 1, rng);
    EXPECT_EQ(std::count(bias.begin(), bias.end(), s.biases[0].classes[1].name_token), 0);
  }
  EXPECT_THROW(sample_class_description(s, 0, 2, rng), Error);
  EXPECT_THROW(sample_class_description(s, 9, 0, rng), Error);
}

TEST_F(World, ComposeAssignsLabels) {
  const AttributeSchema s = build_schema(Waterbirds(), encoder);
  Rng rng(3);
  const std::vector<DescriptionPart> water_on_land{
      {0, 1, sample_class_description(s, 0, 1, rng)}, {1, 0, sample_class_description(s, 1, 0, rng)}};
  const TextSample t = compose_description(s, water_on_land);
  EXPECT_EQ(t.y, 1);
  EXPECT_EQ(t.b, std::vector<int>{0});
  EXPECT_EQ(t.g, 2);
  EXPECT_EQ(std::count(t.tokens.begin(), t.tokens.end(), s.separator), 1);
  const std::vector<DescriptionPart> land_on_land{
      {0, 0, sample_class_description(s, 0, 0, rng)}, {1, 0, sample_class_description(s, 1, 0, rng)}};
  EXPECT_EQ(compose_description(s, land_on_land).g, 0);
}

TEST_F(World, ComposeRejectsForeignParts) {
  const AttributeSchema s = build_schema(Waterbirds(), encoder);
  Rng rng(4);
  const auto land = sample_class_description(s, 1, 0, rng);
  const std::vector<DescriptionPart> swapped{{0, 1, land}, {1, 0, land}};
  try {
    compose_description(s, swapped);
    FAIL() << "expected annotation error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kAnnotation);
  }
  const std::vector<DescriptionPart> too_few{{0, 1, sample_class_description(s, 0, 1, rng)}};
  EXPECT_THROW(compose_description(s, too_few), Error);
}

TEST_F(World, DistractorOrderLeavesLabels) {
  const AttributeSchema s = build_schema(CelebA(), encoder);
  Rng rng(5);
  std::vector<DescriptionPart> parts{{0, 1, sample_class_description(s, 0, 1, rng)}};
  for (int k = 0; k < 3; ++k) {
    const int id = s.biases[k].id;
    parts.push_back({id, k % 2, sample_class_description(s, id, k % 2, rng)});
  }
  for (const auto& a : s.distractors) parts.push_back({a.id, 1, sample_class_description(s, a.id, 1, rng)});
  const TextSample base = compose_description(s, parts);
  std::reverse(parts.begin() + 4, parts.end());
  const TextSample shuffled = compose_description(s, parts);
  EXPECT_EQ(base.y, shuffled.y);
  EXPECT_EQ(base.b, shuffled.b);
  EXPECT_EQ(base.g, shuffled.g);
}

TEST_F(World, BalancedTextSet) {
  const AttributeSchema s = build_schema(Waterbirds(), encoder);
  Rng a(6), b(6);
  const auto texts = build_balanced_text_set(s, 2500, a);
  ASSERT_EQ(texts.size(), 10000u);
  std::map<int, int> hist;
  const GroupLayout layout = s.layout();
  for (const auto& t : texts) {
    ++hist[t.g];
    EXPECT_EQ(t.g, layout.index(t.y, t.b));
    EXPECT_FALSE(t.tokens.empty());
  }
  for (int g = 0; g < 4; ++g) EXPECT_EQ(hist[g], 2500);
  const auto again = build_balanced_text_set(s, 2500, b);
  for (std::size_t i = 0; i < texts.size(); ++i) EXPECT_EQ(texts[i].tokens, again[i].tokens);
  EXPECT_THROW(build_balanced_text_set(s, 0, a), Error);
}

TEST_F(World, TextWithDistractorParts) {
  const AttributeSchema s = build_schema(CelebA(), encoder);
  Rng rng(7);
  TextOptions opts;
  opts.distractor_parts = 3;
  const auto texts = build_balanced_text_set(s, 3, rng, opts);
  EXPECT_EQ(texts.size(), 48u);
  for (const auto& t : texts) {
    EXPECT_EQ(std::count(t.tokens.begin(), t.tokens.end(), s.separator), 6);
    EXPECT_EQ(t.g, s.layout().index(t.y, t.b));
  }
}

TEST_F(World, NoiselessImageMatchesCaption) {
  SchemaDescription d = Waterbirds();
  d.shape.pool_size = 1;
  const AttributeSchema s = build_schema(d, encoder);
  Rng rng(8);
  const std::vector<int> b{1};
  const ImageSample img = render_image(s, encoder, 0, b, rng, 0.0);
  std::vector<TokenId> caption = s.target.classes[0].descriptor_pool[0];
  const auto& bias = s.biases[0].classes[1].descriptor_pool[0];
  caption.insert(caption.end(), bias.begin(), bias.end());
  EXPECT_LT((encoder.encode_image(img.feature).vec() - encoder.encode_tokens(caption).vec()).norm(),
            1e-12);
  EXPECT_EQ(img.g, 1);
}

TEST_F(World, NoisyImageMeanConverges) {
  SchemaDescription d = Waterbirds();
  d.shape.pool_size = 1;
  const AttributeSchema s = build_schema(d, encoder);
  Rng rng(9);
  const std::vector<int> b{0};
  const Vector clean = render_image(s, encoder, 1, b, rng, 0.0).feature;
  const int n = 2000;
  const double sigma = 0.1;
  Vector sum = Vector::Zero(clean.size());
  for (int i = 0; i < n; ++i) sum += render_image(s, encoder, 1, b, rng, sigma).feature;
  const double se = sigma / std::sqrt(double(n));
  EXPECT_LT((sum / n - clean).cwiseAbs().maxCoeff(), 4.0 * se);
  EXPECT_THROW(render_image(s, encoder, 2, b, rng, 0.0), Error);
}

TEST(BiasedCounts, WorkedExamples) {
  const GroupLayout layout({2, 2});
  EXPECT_EQ(biased_group_counts(layout, 1000, 0.95), (std::vector<int>{475, 25, 25, 475}));
  EXPECT_EQ(biased_group_counts(layout, 1000, 0.5), (std::vector<int>{250, 250, 250, 250}));
  EXPECT_EQ(biased_group_counts(layout, 1000, 1.0), (std::vector<int>{500, 0, 0, 500}));
  try {
    biased_group_counts(layout, 1001, 0.95);
    FAIL() << "expected configuration error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
  EXPECT_THROW(biased_group_counts(layout, 1000, 0.4), Error);
}

TEST(BiasedCounts, RealizedRateWithinRounding) {
  Rng rng(10);
  std::uniform_real_distribution<double> rho_dist(0.5, 1.0);
  std::uniform_int_distribution<int> n_dist(1, 600);
  for (int t = 0; t < 200; ++t) {
    const int cb = 2 + t % 3;
    const GroupLayout layout({2, cb});
    const double rho = rho_dist(rng);
    const int n = 2 * n_dist(rng);
    const auto counts = biased_group_counts(layout, n, rho);
    for (int y = 0; y < 2; ++y) {
      int total = 0;
      for (int j = 0; j < cb; ++j) total += counts[y * cb + j];
      ASSERT_EQ(total, n / 2);
      const double realized = double(counts[y * cb + y]) / total;
      EXPECT_LT(std::abs(realized - rho), 1.0 / total) << "rho " << rho << " n " << n;
    }
  }
}

TEST_F(World, BiasedImageSet) {
  const AttributeSchema s = build_schema(Waterbirds(), encoder);
  Rng rng(11);
  const auto imgs = build_biased_image_set(s, encoder, 1000, 0.95, rng, 0.02);
  std::map<int, int> hist;
  for (const auto& i : imgs) {
    ++hist[i.g];
    EXPECT_EQ(i.g, s.layout().index(i.y, i.b));
  }
  EXPECT_EQ(hist[0], 475);
  EXPECT_EQ(hist[1], 25);
  EXPECT_EQ(hist[2], 25);
  EXPECT_EQ(hist[3], 475);
}

TEST_F(World, BalancedImageSet) {
  const AttributeSchema s = build_schema(Waterbirds(), encoder);
  Rng rng(12);
  const auto imgs = build_balanced_image_set(s, encoder, 53, rng, 0.02);
  ASSERT_EQ(imgs.size(), 212u);
  std::map<int, int> hist;
  for (const auto& i : imgs) ++hist[i.g];
  for (int g = 0; g < 4; ++g) EXPECT_EQ(hist[g], 53);
  EXPECT_EQ(build_balanced_image_set(s, encoder, 1, rng, 0.02).size(), 4u);
}

TEST_F(World, ViewsAndRegrouping) {
  const AttributeSchema s = build_schema(CelebA(), encoder);
  const AttributeSchema view = s.with_biases({"smile"});
  EXPECT_EQ(view.biases.size(), 1u);
  EXPECT_EQ(view.distractors.size(), 5u);
  EXPECT_EQ(view.layout().group_count(), 4);
  EXPECT_THROW(s.with_biases({"unknown"}), Error);
  EXPECT_THROW(s.with_biases({"hair"}), Error);
  Rng rng(13);
  const std::vector<int> b{1, 0, 1};
  const ImageSample img = render_image(s, encoder, 1, b, rng, 0.0);
  const std::vector<int> age{s.biases[1].id};
  EXPECT_EQ(regroup_index(img.labels, s, age), 2);
  const std::vector<int> smile{view.biases[0].id};
  EXPECT_GE(img.labels[smile[0]], 0);
  EXPECT_EQ(regroup_index(img.labels, s, smile), 2 + img.labels[smile[0]]);
}

TEST(Layout, RowMajorRoundTrip) {
  const GroupLayout layout({2, 3, 2});
  EXPECT_EQ(layout.group_count(), 12);
  for (int g = 0; g < 12; ++g) EXPECT_EQ(layout.index(layout.decode(g)), g);
  const std::vector<int> b{2, 1};
  EXPECT_EQ(layout.index(1, b), 1 * 6 + 2 * 2 + 1);
  const std::vector<int> bad{3, 0};
  EXPECT_THROW(layout.index(0, bad), Error);
}

}  // namespace
}  // namespace tod
