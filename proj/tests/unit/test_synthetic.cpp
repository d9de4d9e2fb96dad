// Copyright 2026 The komei Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <doctest.h>

#include <set>
#include <string>

#include "komei/error.hpp"
#include "komei/synthetic.hpp"

using namespace komei;

TEST_CASE("scenario names parse") {
  CHECK(parse_scenario("overfit") == Scenario::overfit);
  CHECK(parse_scenario("image") == Scenario::image_planted);
  CHECK(parse_scenario("audio") == Scenario::speech_planted);
  CHECK(to_string(Scenario::speech_planted) == "speech");
  CHECK_THROWS_AS(parse_scenario("video"), ConfigError);
}

TEST_CASE("overfit corpus has the requested shape") {
  SyntheticSpec spec;
  spec.seed = 3;
  const auto d = generate_synthetic(spec);
  CHECK(d.vocab.categories.size() == 5);
  CHECK(d.vocab.members.size() == 10);
  CHECK(d.truth.entries.size() == 10);
  CHECK(d.train_sentences.size() == 200);
  CHECK(d.test_sentences.size() == 200);
  CHECK_FALSE(d.images.has_value());
  std::set<std::string> context;
  for (const auto& line : d.train_sentences) {
    const auto toks = tokenize(line);
    CHECK(toks.size() == 7);
    for (const auto& t : toks) {
      if (t[0] == 'w') context.insert(t);
    }
  }
  CHECK(context.size() <= 50);

  const auto c = build_synthetic_corpus(d, 0.8, 3);
  CHECK(c.train.size() == 160);
  CHECK(c.val.size() == 40);
  CHECK(c.test.size() == 200);
  for (const auto& s : c.test) {
    CHECK(s.media_key.substr(0, 2) == "eu");
    CHECK(mask_count(s) == 1);
  }
}

TEST_CASE("generation is seeded") {
  SyntheticSpec spec;
  spec.scenario = Scenario::image_planted;
  spec.categories = 4;
  spec.seed = 1;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  CHECK(a.train_sentences == b.train_sentences);
  CHECK(*a.images == *b.images);
  spec.seed = 2;
  CHECK(generate_synthetic(spec).train_sentences != a.train_sentences);
}

TEST_CASE("planted tables carry the category signal in one modality") {
  SyntheticSpec spec;
  spec.scenario = Scenario::image_planted;
  spec.categories = 4;
  spec.noise = 0.0;
  const auto d = generate_synthetic(spec);
  REQUIRE(d.images.has_value());
  REQUIRE(d.speech.has_value());
  CHECK(d.images->size() == 16);
  const Tensor2& kw = *d.images->find("kw1x0");
  const Tensor2& eu = *d.images->find("eu1x1");
  CHECK(kw.rows() == 4);
  CHECK(kw == eu);
  CHECK(*d.images->find("kw0x0") != kw);
  CHECK(*d.speech->find("kw1x0") != *d.speech->find("eu1x1"));

  spec.scenario = Scenario::speech_planted;
  const auto s = generate_synthetic(spec);
  CHECK(s.speech->find("kw2x0")->rows() == 3);
  CHECK(*s.speech->find("kw2x0") == *s.speech->find("eu2x1"));
}

TEST_CASE("paired scenarios share context words within a pair") {
  SyntheticSpec spec;
  spec.scenario = Scenario::image_planted;
  spec.categories = 4;
  const auto d = generate_synthetic(spec);
  const auto c = build_synthetic_corpus(d, 0.8, 0);
  std::set<std::string> ctx[4];
  for (const auto& s : c.train) {
    for (const auto& t : s.tokens) ctx[*s.label].insert(t);
  }
  CHECK(ctx[0] == ctx[1]);
  CHECK(ctx[2] != ctx[0]);
}

TEST_CASE("invalid specs are config errors") {
  SyntheticSpec spec;
  spec.scenario = Scenario::image_planted;
  spec.categories = 5;
  CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);
  SyntheticSpec tiny;
  tiny.context_words = 2;
  CHECK_THROWS_AS(generate_synthetic(tiny), ConfigError);
}
