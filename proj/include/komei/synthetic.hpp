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


#pragma once

// Synthetic corpora with a known answer.
//
//   overfit         context words identify the category; evidence comes from
//                   toy features keyed on the keyword itself.
//   image_planted   categories come in pairs (0,1), (2,3), ... that share
//                   their context words, so text alone can only find the pair.
//                   Image vectors are a per-category prototype plus noise and
//                   resolve the pair; speech is uninformative.
//   speech_planted  the same with the roles of image and speech swapped.
//
// Keyword surfaces look like "kw2x1", euphemisms "eu2x1", context words "w17".

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "komei/corpus.hpp"
#include "komei/encoders.hpp"

namespace komei {

enum class Scenario { overfit, image_planted, speech_planted };

std::string_view to_string(Scenario s) noexcept;
Scenario parse_scenario(std::string_view s);

struct SyntheticSpec {
  Scenario scenario = Scenario::overfit;
  std::size_t train_sentences = 200;
  std::size_t test_sentences = 200;
  std::size_t categories = 5;
  std::size_t context_words = 50;
  std::size_t keywords_per_category = 2;
  std::size_t dim = 32;  // evidence width for both tables
  double noise = 0.05;   // per-coordinate std around the planted prototype
  std::uint64_t seed = 0;
};

struct SyntheticData {
  KeywordVocabulary vocab;
  GroundTruthMap truth;
  std::vector<std::string> train_sentences;
  std::vector<std::string> test_sentences;
  std::optional<EmbeddingTable> images;  // absent for overfit (toy fallback)
  std::optional<EmbeddingTable> speech;
};

/// Throws ConfigError for planted scenarios with an odd category count.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

struct SyntheticCorpus {
  std::vector<MaskedSample> train;
  std::vector<MaskedSample> val;
  std::vector<MaskedSample> test;
};

/// Masks, splits train/val by ratio and seed, and masks the test sentences.
SyntheticCorpus build_synthetic_corpus(const SyntheticData& data, double ratio, std::uint64_t seed);

}  // namespace komei
