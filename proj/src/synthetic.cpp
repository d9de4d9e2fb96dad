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


#include "komei/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "komei/error.hpp"
#include "komei/util.hpp"

namespace komei {

std::string_view to_string(Scenario s) noexcept {
  switch (s) {
    case Scenario::overfit:
      return "overfit";
    case Scenario::image_planted:
      return "image";
    case Scenario::speech_planted:
      return "speech";
  }
  return "?";
}

Scenario parse_scenario(std::string_view s) {
  if (s == "overfit") return Scenario::overfit;
  if (s == "image" || s == "image_planted") return Scenario::image_planted;
  if (s == "speech" || s == "speech_planted" || s == "audio") return Scenario::speech_planted;
  throw ConfigError("unknown scenario '" + std::string(s) + "' (overfit | image | speech)");
}

namespace {

std::string surface(const char* prefix, std::size_t cat, std::size_t k) {
  return prefix + std::to_string(cat) + "x" + std::to_string(k);
}

Tensor2 planted(const std::vector<double>& proto, std::size_t rows, double noise, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, noise);
  Tensor2 t(rows, proto.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < proto.size(); ++c) t(r, c) = proto[c] + dist(rng);
  }
  return t;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  const bool paired = spec.scenario != Scenario::overfit;
  if (spec.categories == 0 || spec.keywords_per_category == 0 || spec.dim == 0) {
    throw ConfigError("synthetic corpus needs categories, keywords and a positive dim");
  }
  if (paired && spec.categories % 2 != 0) throw ConfigError("planted scenarios need an even category count");
  const std::size_t groups = paired ? spec.categories / 2 : spec.categories;
  // 60% of the context vocabulary is topical, the rest is shared filler.
  const std::size_t per_group = std::max<std::size_t>(1, spec.context_words * 3 / 5 / groups);
  const std::size_t topical = per_group * groups;
  if (topical >= spec.context_words) throw ConfigError("context vocabulary too small for the category count");
  const std::size_t filler = spec.context_words - topical;

  std::mt19937_64 rng(splitmix64(spec.seed ^ 0x73796e7468ULL));
  SyntheticData out;
  out.vocab.domain = Domain::custom;
  for (std::size_t c = 0; c < spec.categories; ++c) out.vocab.categories.push_back("cat" + std::to_string(c));
  for (std::size_t c = 0; c < spec.categories; ++c) {
    for (std::size_t k = 0; k < spec.keywords_per_category; ++k) {
      out.vocab.members.emplace_back(surface("kw", c, k), c);
      out.truth.entries.emplace_back(surface("eu", c, k), c);
    }
  }

  auto sentences = [&](std::size_t count, const char* prefix) {
    std::vector<std::string> lines;
    std::uniform_int_distribution<std::size_t> pick_cat(0, spec.categories - 1);
    std::uniform_int_distribution<std::size_t> pick_kw(0, spec.keywords_per_category - 1);
    std::uniform_int_distribution<std::size_t> pick_topic(0, per_group - 1);
    std::uniform_int_distribution<std::size_t> pick_filler(0, filler - 1);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t cat = pick_cat(rng);
      const std::size_t group = paired ? cat / 2 : cat;
      std::vector<std::string> words;
      for (int w = 0; w < 3; ++w) words.push_back("w" + std::to_string(group * per_group + pick_topic(rng)));
      for (int w = 0; w < 3; ++w) words.push_back("w" + std::to_string(topical + pick_filler(rng)));
      std::shuffle(words.begin(), words.end(), rng);
      std::uniform_int_distribution<std::size_t> pos(0, words.size());
      words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos(rng)), surface(prefix, cat, pick_kw(rng)));
      std::string line;
      for (const auto& w : words) line += (line.empty() ? "" : " ") + w;
      lines.push_back(std::move(line));
    }
    return lines;
  };
  out.train_sentences = sentences(spec.train_sentences, "kw");
  out.test_sentences = sentences(spec.test_sentences, "eu");

  if (paired) {
    std::normal_distribution<double> unit(0.0, 1.0);
    std::vector<std::vector<double>> protos(spec.categories, std::vector<double>(spec.dim));
    for (auto& p : protos) {
      double n2 = 0.0;
      for (double& v : p) {
        v = unit(rng);
        n2 += v * v;
      }
      for (double& v : p) v /= std::sqrt(n2);
    }
    const bool image_signal = spec.scenario == Scenario::image_planted;
    EmbeddingTable images(Modality::image, spec.dim), speech(Modality::speech, spec.dim);
    auto add_surface = [&](const std::string& key, std::size_t cat) {
      if (image_signal) {
        images.add(key, planted(protos[cat], 4, spec.noise, rng));
        speech.add(key, toy_evidence(key, Modality::speech, spec.dim, spec.seed));
      } else {
        images.add(key, toy_evidence(key, Modality::image, spec.dim, spec.seed));
        speech.add(key, planted(protos[cat], 3, spec.noise, rng));
      }
    };
    for (const auto& [key, cat] : out.vocab.members) add_surface(key, cat);
    for (const auto& [key, cat] : out.truth.entries) add_surface(key, cat);
    out.images = std::move(images);
    out.speech = std::move(speech);
  }
  return out;
}

SyntheticCorpus build_synthetic_corpus(const SyntheticData& data, double ratio, std::uint64_t seed) {
  SyntheticCorpus c;
  auto parts = split(build_training_set(data.train_sentences, data.vocab), ratio, seed);
  c.train = std::move(parts.train);
  c.val = std::move(parts.val);
  c.test = build_test_set(data.test_sentences, data.truth, &data.vocab);
  return c;
}

}  // namespace komei
