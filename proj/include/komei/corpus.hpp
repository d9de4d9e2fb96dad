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

// Self-supervised corpus construction: every occurrence of a known keyword in
// a raw sentence becomes one sample with that occurrence replaced by [MASK].
// Training samples mask target keywords and are labeled with the keyword's
// category; test samples mask euphemisms and are labeled from the ground
// truth list. media_key is the surface form that was masked.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace komei {

inline constexpr std::string_view kMaskToken = "[MASK]";

enum class Domain { drug, weapon, sexuality, custom };
enum class Split { train, val, test };

std::string_view to_string(Domain d) noexcept;
std::string_view to_string(Split s) noexcept;
Domain parse_domain(std::string_view s);
Split parse_split(std::string_view s);

struct KeywordVocabulary {
  Domain domain = Domain::custom;
  std::vector<std::string> categories;
  /// surface keyword -> category index, in vocabulary (priority) order.
  std::vector<std::pair<std::string, std::size_t>> members;
  bool has_images = true;
  bool has_speech = true;

  /// Throws ConfigError on duplicate categories, empty vocabulary or bad indices.
  void validate() const;
  std::optional<std::size_t> category_index(std::string_view name) const;
  std::optional<std::size_t> category_of(std::string_view surface) const;
};

/// euphemism surface -> category index, in file order.
struct GroundTruthMap {
  std::vector<std::pair<std::string, std::size_t>> entries;

  std::optional<std::size_t> category_of(std::string_view surface) const;
};

struct MaskedSample {
  std::string id;
  std::vector<std::string> tokens;  // exactly one kMaskToken
  std::optional<std::size_t> label;
  std::string media_key;
  Split split = Split::train;

  bool operator==(const MaskedSample&) const = default;
};

/// ASCII-lowercases, then splits on every byte outside [a-z0-9'] and
/// outside UTF-8 multibyte sequences.
std::vector<std::string> tokenize(std::string_view text);

std::vector<MaskedSample> build_training_set(std::span<const std::string> raw_sentences,
                                             const KeywordVocabulary& vocab);

/// Euphemisms that collide with a target keyword of vocab (when given) are
/// reported through warn() and still treated as test occurrences.
std::vector<MaskedSample> build_test_set(std::span<const std::string> raw_sentences,
                                         const GroundTruthMap& euphemisms,
                                         const KeywordVocabulary* vocab = nullptr);

struct SplitResult {
  std::vector<MaskedSample> train;
  std::vector<MaskedSample> val;
};

/// Seeded shuffle, then the first ceil(ratio * N) samples go to train.
SplitResult split(std::vector<MaskedSample> samples, double ratio, std::uint64_t seed);

/// Number of mask sentinels in a sample's tokens.
std::size_t mask_count(const MaskedSample& s);

// ---- files -----------------------------------------------------------------

std::string sample_to_json_line(const MaskedSample& s);
void write_corpus(std::ostream& out, std::span<const MaskedSample> samples);
void write_corpus(std::span<const MaskedSample> samples, const std::filesystem::path& path);
/// Throws ParseError carrying the 1-based line of the first malformed record.
std::vector<MaskedSample> read_corpus(std::istream& in);
std::vector<MaskedSample> read_corpus(const std::filesystem::path& path);

KeywordVocabulary load_vocabulary(const std::filesystem::path& path);
KeywordVocabulary parse_vocabulary(std::string_view json_text);
void write_vocabulary(const KeywordVocabulary& vocab, const std::filesystem::path& path);

/// Values may be category names of vocab or integer indices.
GroundTruthMap load_ground_truth(const std::filesystem::path& path, const KeywordVocabulary& vocab);
GroundTruthMap parse_ground_truth(std::string_view json_text, const KeywordVocabulary& vocab);
void write_ground_truth(const GroundTruthMap& gt, const KeywordVocabulary& vocab,
                        const std::filesystem::path& path);

/// One sentence per line; blank lines are kept (they produce no samples).
std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(std::span<const std::string> lines, const std::filesystem::path& path);

}  // namespace komei
