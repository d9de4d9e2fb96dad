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

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "komei/corpus.hpp"
#include "komei/error.hpp"
#include "komei/util.hpp"
#include "test_support.hpp"

using namespace komei;

namespace {

KeywordVocabulary drug_vocab() {
  KeywordVocabulary v;
  v.domain = Domain::drug;
  v.categories = {"marijuana", "cocaine", "methamphetamine", "heroin"};
  v.members = {{"marijuana", 0}, {"weed", 0}, {"coke", 1}, {"crystal meth", 2}, {"crystal", 3}};
  return v;
}

std::vector<std::string> mask_free(const MaskedSample& s) {
  std::vector<std::string> out;
  for (const auto& t : s.tokens) {
    if (t != kMaskToken) out.push_back(t);
  }
  return out;
}

}  // namespace

TEST_CASE("tokenizer lowercases and splits on punctuation") {
  CHECK(tokenize("Sold SOME marijuana, today!") ==
        std::vector<std::string>{"sold", "some", "marijuana", "today"});
  CHECK(tokenize("don't   stop") == std::vector<std::string>{"don't", "stop"});
  CHECK(tokenize("  ").empty());
  CHECK(tokenize("caf\xc3\xa9-bar") == std::vector<std::string>{"caf\xc3\xa9", "bar"});
}

TEST_CASE("training samples mask one keyword occurrence each") {
  const auto vocab = drug_vocab();
  const std::vector<std::string> raw{"sold some marijuana today", "no keyword here",
                                     "weed and coke for sale"};
  const auto s = build_training_set(raw, vocab);
  REQUIRE(s.size() == 3);
  CHECK(s[0].tokens == std::vector<std::string>{"sold", "some", "[MASK]", "today"});
  CHECK(s[0].label == 0u);
  CHECK(s[0].media_key == "marijuana");
  CHECK(s[0].split == Split::train);
  CHECK(s[1].tokens == std::vector<std::string>{"[MASK]", "and", "coke", "for", "sale"});
  CHECK(s[1].media_key == "weed");
  CHECK(s[2].tokens == std::vector<std::string>{"weed", "and", "[MASK]", "for", "sale"});
  CHECK(s[2].label == 1u);
  for (const auto& x : s) CHECK(mask_count(x) == 1);
  std::set<std::string> ids;
  for (const auto& x : s) ids.insert(x.id);
  CHECK(ids.size() == s.size());
}

TEST_CASE("multi-word keywords match longest first") {
  const std::vector<std::string> raw{"got crystal meth again", "crystal clear"};
  const auto s = build_training_set(raw, drug_vocab());
  REQUIRE(s.size() == 2);
  CHECK(s[0].tokens == std::vector<std::string>{"got", "[MASK]", "again"});
  CHECK(s[0].label == 2u);
  CHECK(s[0].media_key == "crystal meth");
  CHECK(s[1].label == 3u);
}

TEST_CASE("empty vocabulary is a config error") {
  KeywordVocabulary v;
  v.categories = {"a"};
  const std::vector<std::string> raw{"x"};
  CHECK_THROWS_AS(build_training_set(raw, v), ConfigError);
}

TEST_CASE("test samples are keyed by the euphemism surface") {
  KeywordVocabulary v;
  v.domain = Domain::weapon;
  v.categories = {"gun", "knife"};
  v.members = {{"gun", 0}, {"knife", 1}};
  GroundTruthMap gt;
  gt.entries = {{"nine", 0}, {"shank", 1}};
  const std::vector<std::string> raw{"Back up before I pull my nine on you", "nothing", "a shank"};
  const auto s = build_test_set(raw, gt, &v);
  REQUIRE(s.size() == 2);
  CHECK(s[0].tokens == std::vector<std::string>{"back", "up", "before", "i", "pull", "my", "[MASK]",
                                                "on", "you"});
  CHECK(s[0].label == 0u);
  CHECK(s[0].media_key == "nine");
  CHECK(s[0].split == Split::test);
  CHECK(s[1].media_key == "shank");
}

TEST_CASE("euphemism that is also a target keyword warns and stays a test occurrence") {
  const auto v = drug_vocab();
  GroundTruthMap gt;
  gt.entries = {{"coke", 1}};
  std::vector<std::string> warnings;
  ScopedWarningSink sink([&](const std::string& m) { warnings.push_back(m); });
  const std::vector<std::string> raw{"some coke"};
  const auto s = build_test_set(raw, gt, &v);
  CHECK(s.size() == 1);
  CHECK(warnings.size() == 1);
}

TEST_CASE("split is an exact seeded partition") {
  std::vector<MaskedSample> samples(10);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i].id = "s" + std::to_string(i);
    samples[i].tokens = {"[MASK]"};
  }
  const auto a = split(samples, 0.8, 7);
  const auto b = split(samples, 0.8, 7);
  CHECK(a.train.size() == 8);
  CHECK(a.val.size() == 2);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  std::multiset<std::string> all;
  for (const auto& s : a.train) all.insert(s.id);
  for (const auto& s : a.val) {
    CHECK(s.split == Split::val);
    all.insert(s.id);
  }
  CHECK(all.size() == 10);
  CHECK(std::set<std::string>(all.begin(), all.end()).size() == 10);

  CHECK(split(samples, 0.7, 1).train.size() == 7);
  CHECK(split(samples, 0.75, 1).train.size() == 8);
}

TEST_CASE("split edge cases") {
  std::vector<MaskedSample> one(1);
  one[0].tokens = {"[MASK]"};
  int warned = 0;
  ScopedWarningSink sink([&](const std::string&) { ++warned; });
  const auto r = split(one, 0.8, 1);
  CHECK(r.train.size() == 1);
  CHECK(r.val.empty());
  CHECK(warned == 1);
  CHECK_THROWS_AS(split({}, 0.8, 1), DataError);
  CHECK_THROWS_AS(split(one, 1.0, 1), ConfigError);
  CHECK_THROWS_AS(split(one, 0.0, 1), ConfigError);
}

TEST_CASE("corpus JSON lines round trip") {
  const std::vector<std::string> raw{"weed and coke", "sold marijuana"};
  auto samples = build_training_set(raw, drug_vocab());
  samples[1].label.reset();
  std::ostringstream out;
  write_corpus(out, samples);
  CHECK(out.str().substr(0, 7) == "{\"id\":\"");
  std::istringstream in(out.str());
  const auto back = read_corpus(in);
  CHECK(back == samples);
  std::ostringstream again;
  write_corpus(again, back);
  CHECK(again.str() == out.str());

  std::istringstream empty("");
  CHECK(read_corpus(empty).empty());
}

TEST_CASE("corpus parse errors carry the line number") {
  const std::string good = sample_to_json_line(build_training_set(
      std::vector<std::string>{"weed"}, drug_vocab())[0]);
  auto line_of = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      read_corpus(in);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of(good + "\n" + R"({"id":"x","label":0,"media_key":"w","split":"train"})" + "\n") == 2);
  CHECK(line_of(good + "\n" + good + "\n{not json\n") == 3);
  CHECK(line_of(R"({"id":"x","tokens":["a"],"label":0,"media_key":"w","split":"train"})") == 1);
  CHECK(line_of(R"({"id":"x","tokens":["[MASK]"],"label":0,"media_key":"w","split":"bogus"})") == 1);
}

TEST_CASE("vocabulary and ground truth files round trip") {
  komei::testing::TempDir dir;
  const auto v = drug_vocab();
  write_vocabulary(v, dir / "vocab.json");
  const auto back = load_vocabulary(dir / "vocab.json");
  CHECK(back.categories == v.categories);
  CHECK(back.members == v.members);
  CHECK(back.domain == Domain::drug);

  GroundTruthMap gt;
  gt.entries = {{"ice", 2}, {"snow", 1}};
  write_ground_truth(gt, v, dir / "truth.json");
  CHECK(load_ground_truth(dir / "truth.json", v).entries == gt.entries);
  CHECK(parse_ground_truth(R"({"ice": 2})", v).entries[0].second == 2u);
  CHECK_THROWS_AS(parse_ground_truth(R"({"ice": "nope"})", v), FormatError);
  CHECK_THROWS_AS(parse_ground_truth(R"({"ice": 9})", v), FormatError);
  CHECK_THROWS_AS(parse_vocabulary("{"), FormatError);
  CHECK_THROWS_AS(load_vocabulary(dir / "missing.json"), IoError);
}

TEST_CASE("sexuality vocabularies default to no images") {
  const auto v = parse_vocabulary(R"({"domain":"sexuality","categories":["a"],"members":{"x":"a"}})");
  CHECK_FALSE(v.has_images);
  CHECK(v.has_speech);
}

TEST_CASE("corpus files are byte-identical across rebuilds") {
  komei::testing::TempDir dir;
  const std::vector<std::string> raw{"weed and coke", "crystal meth", "marijuana weed"};
  write_corpus(build_training_set(raw, drug_vocab()), dir / "a.jsonl");
  write_corpus(build_training_set(raw, drug_vocab()), dir / "b.jsonl");
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
  const auto samples = read_corpus(dir / "a.jsonl");
  CHECK(samples.size() == 5);
  for (const auto& s : samples) CHECK(mask_free(s).size() + 1 == s.tokens.size());
}
