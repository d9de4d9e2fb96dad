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


#include "komei/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "komei/error.hpp"
#include "komei/util.hpp"

namespace komei {

using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Domain d) noexcept {
  switch (d) {
    case Domain::drug: return "drug";
    case Domain::weapon: return "weapon";
    case Domain::sexuality: return "sexuality";
    case Domain::custom: return "custom";
  }
  return "custom";
}

std::string_view to_string(Split s) noexcept {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Domain parse_domain(std::string_view s) {
  for (Domain d : {Domain::drug, Domain::weapon, Domain::sexuality, Domain::custom}) {
    if (s == to_string(d)) return d;
  }
  throw ConfigError("unknown domain '" + std::string(s) + "'");
}

Split parse_split(std::string_view s) {
  for (Split x : {Split::train, Split::val, Split::test}) {
    if (s == to_string(x)) return x;
  }
  throw FormatError("unknown split '" + std::string(s) + "'");
}

void KeywordVocabulary::validate() const {
  if (categories.empty() || members.empty()) throw ConfigError("keyword vocabulary is empty");
  std::unordered_set<std::string> seen;
  for (const auto& c : categories) {
    if (!seen.insert(c).second) throw ConfigError("duplicate category '" + c + "'");
  }
  std::unordered_set<std::string> surfaces;
  for (const auto& [surface, cat] : members) {
    if (cat >= categories.size()) {
      throw ConfigError("keyword '" + surface + "' maps to invalid category " + std::to_string(cat));
    }
    if (!surfaces.insert(surface).second) throw ConfigError("duplicate keyword '" + surface + "'");
  }
}

std::optional<std::size_t> KeywordVocabulary::category_index(std::string_view name) const {
  auto it = std::find(categories.begin(), categories.end(), name);
  if (it == categories.end()) return std::nullopt;
  return static_cast<std::size_t>(it - categories.begin());
}

std::optional<std::size_t> KeywordVocabulary::category_of(std::string_view surface) const {
  for (const auto& [s, c] : members) {
    if (s == surface) return c;
  }
  return std::nullopt;
}

std::optional<std::size_t> GroundTruthMap::category_of(std::string_view surface) const {
  for (const auto& [s, c] : entries) {
    if (s == surface) return c;
  }
  return std::nullopt;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    const bool word = (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') ||
                      (u >= '0' && u <= '9') || u == '\'' || u >= 0x80;
    if (word) {
      cur.push_back((u >= 'A' && u <= 'Z') ? static_cast<char>(u - 'A' + 'a') : ch);
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

namespace {

struct Pattern {
  std::vector<std::string> tokens;
  std::string surface;
  std::size_t category;
};

class Matcher {
 public:
  explicit Matcher(std::span<const std::pair<std::string, std::size_t>> entries) {
    for (const auto& [surface, cat] : entries) {
      auto toks = tokenize(surface);
      if (toks.empty()) {
        warn("keyword '" + surface + "' has no tokens; ignored");
        continue;
      }
      by_first_[toks.front()].push_back(patterns_.size());
      patterns_.push_back(Pattern{std::move(toks), surface, cat});
    }
  }

  // Longest pattern matching at position i; earlier patterns win ties.
  const Pattern* match_at(const std::vector<std::string>& toks, std::size_t i) const {
    auto it = by_first_.find(toks[i]);
    if (it == by_first_.end()) return nullptr;
    const Pattern* best = nullptr;
    for (std::size_t idx : it->second) {
      const Pattern& p = patterns_[idx];
      if (best && p.tokens.size() <= best->tokens.size()) continue;
      if (i + p.tokens.size() > toks.size()) continue;
      if (std::equal(p.tokens.begin(), p.tokens.end(), toks.begin() + static_cast<std::ptrdiff_t>(i))) {
        best = &p;
      }
    }
    return best;
  }

 private:
  std::vector<Pattern> patterns_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_first_;
};

std::vector<MaskedSample> mask_occurrences(std::span<const std::string> raw, const Matcher& matcher,
                                           std::string_view id_prefix, Split split) {
  std::vector<MaskedSample> out;
  for (const auto& sentence : raw) {
    const auto toks = tokenize(sentence);
    std::vector<std::pair<std::size_t, const Pattern*>> hits;
    for (std::size_t i = 0; i < toks.size();) {
      if (const Pattern* p = matcher.match_at(toks, i)) {
        hits.emplace_back(i, p);
        i += p->tokens.size();
      } else {
        ++i;
      }
    }
    for (const auto& [pos, p] : hits) {
      MaskedSample s;
      s.id = std::string(id_prefix) + "-" + std::to_string(out.size());
      s.tokens.assign(toks.begin(), toks.begin() + static_cast<std::ptrdiff_t>(pos));
      s.tokens.emplace_back(kMaskToken);
      s.tokens.insert(s.tokens.end(), toks.begin() + static_cast<std::ptrdiff_t>(pos + p->tokens.size()),
                      toks.end());
      s.label = p->category;
      s.media_key = p->surface;
      s.split = split;
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace

std::vector<MaskedSample> build_training_set(std::span<const std::string> raw_sentences,
                                             const KeywordVocabulary& vocab) {
  vocab.validate();
  return mask_occurrences(raw_sentences, Matcher(vocab.members), "train", Split::train);
}

std::vector<MaskedSample> build_test_set(std::span<const std::string> raw_sentences,
                                         const GroundTruthMap& euphemisms,
                                         const KeywordVocabulary* vocab) {
  if (euphemisms.entries.empty()) throw ConfigError("ground-truth map is empty");
  if (vocab != nullptr) {
    for (const auto& [surface, cat] : euphemisms.entries) {
      if (cat >= vocab->categories.size()) {
        throw ConfigError("euphemism '" + surface + "' maps to invalid category");
      }
      if (vocab->category_of(surface)) {
        warn("euphemism '" + surface + "' is also a target keyword; treated as a test occurrence");
      }
    }
  }
  return mask_occurrences(raw_sentences, Matcher(euphemisms.entries), "test", Split::test);
}

SplitResult split(std::vector<MaskedSample> samples, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0, 1)");
  if (samples.empty()) throw DataError("cannot split an empty corpus");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  // The small slack keeps products such as 0.7 * 10 from rounding up a slot.
  const auto n_train = static_cast<std::size_t>(
      std::ceil(ratio * static_cast<double>(samples.size()) - 1e-9));
  SplitResult out;
  for (std::size_t k = 0; k < order.size(); ++k) {
    MaskedSample& s = samples[order[k]];
    if (k < n_train) {
      s.split = Split::train;
      out.train.push_back(std::move(s));
    } else {
      s.split = Split::val;
      out.val.push_back(std::move(s));
    }
  }
  if (out.val.empty()) warn("split left the validation set empty");
  return out;
}

std::size_t mask_count(const MaskedSample& s) {
  return static_cast<std::size_t>(std::count(s.tokens.begin(), s.tokens.end(), kMaskToken));
}

// ---- JSON lines ----------------------------------------------------------------

std::string sample_to_json_line(const MaskedSample& s) {
  ordered_json j;
  j["id"] = s.id;
  j["tokens"] = s.tokens;
  j["label"] = s.label ? ordered_json(*s.label) : ordered_json(nullptr);
  j["media_key"] = s.media_key;
  j["split"] = std::string(to_string(s.split));
  return j.dump();
}

void write_corpus(std::ostream& out, std::span<const MaskedSample> samples) {
  for (const auto& s : samples) out << sample_to_json_line(s) << '\n';
}

void write_corpus(std::span<const MaskedSample> samples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_corpus(out, samples);
  if (!out) throw IoError("write failed: " + path.string());
}

namespace {

MaskedSample sample_from_json(const ordered_json& j, std::size_t line) {
  auto need = [&](const char* key) -> const ordered_json& {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(line, std::string("missing field \"") + key + "\"");
    return *it;
  };
  MaskedSample s;
  try {
    s.id = need("id").get<std::string>();
    s.tokens = need("tokens").get<std::vector<std::string>>();
    if (auto it = j.find("label"); it != j.end() && !it->is_null()) {
      if (!it->is_number_unsigned()) throw ParseError(line, "label must be a non-negative integer");
      s.label = it->get<std::size_t>();
    }
    s.media_key = need("media_key").get<std::string>();
    s.split = parse_split(need("split").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(line, e.what());
  } catch (const FormatError& e) {
    throw ParseError(line, e.what());
  }
  if (mask_count(s) != 1) throw ParseError(line, "sample must contain exactly one [MASK]");
  return s;
}

}  // namespace

std::vector<MaskedSample> read_corpus(std::istream& in) {
  std::vector<MaskedSample> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line, e.what());
    }
    if (!j.is_object()) throw ParseError(line, "record is not a JSON object");
    out.push_back(sample_from_json(j, line));
  }
  return out;
}

std::vector<MaskedSample> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus " + path.string());
  return read_corpus(in);
}

// ---- vocabulary and ground truth ----------------------------------------------

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void dump_json(const ordered_json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

std::size_t resolve_category(const ordered_json& v, const KeywordVocabulary& vocab,
                             const std::string& key) {
  if (v.is_number_unsigned()) {
    const auto idx = v.get<std::size_t>();
    if (idx >= vocab.categories.size()) throw FormatError("'" + key + "': category index out of range");
    return idx;
  }
  if (v.is_string()) {
    if (auto idx = vocab.category_index(v.get<std::string>())) return *idx;
    throw FormatError("'" + key + "': unknown category '" + v.get<std::string>() + "'");
  }
  throw FormatError("'" + key + "': category must be a name or index");
}

}  // namespace

KeywordVocabulary parse_vocabulary(std::string_view json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("vocabulary: ") + e.what());
  }
  KeywordVocabulary v;
  try {
    if (j.contains("domain")) v.domain = parse_domain(j.at("domain").get<std::string>());
    v.categories = j.at("categories").get<std::vector<std::string>>();
    v.has_images = j.value("has_images", v.domain != Domain::sexuality);
    v.has_speech = j.value("has_speech", true);
    for (const auto& [surface, cat] : j.at("members").items()) {
      v.members.emplace_back(surface, resolve_category(cat, v, surface));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("vocabulary: ") + e.what());
  }
  v.validate();
  return v;
}

KeywordVocabulary load_vocabulary(const std::filesystem::path& path) {
  return parse_vocabulary(slurp(path));
}

void write_vocabulary(const KeywordVocabulary& vocab, const std::filesystem::path& path) {
  ordered_json j;
  j["domain"] = std::string(to_string(vocab.domain));
  j["has_images"] = vocab.has_images;
  j["has_speech"] = vocab.has_speech;
  j["categories"] = vocab.categories;
  ordered_json members = ordered_json::object();
  for (const auto& [surface, cat] : vocab.members) members[surface] = vocab.categories.at(cat);
  j["members"] = std::move(members);
  dump_json(j, path);
}

GroundTruthMap parse_ground_truth(std::string_view json_text, const KeywordVocabulary& vocab) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("ground truth: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("ground truth must be a JSON object");
  GroundTruthMap gt;
  for (const auto& [surface, cat] : j.items()) {
    gt.entries.emplace_back(surface, resolve_category(cat, vocab, surface));
  }
  return gt;
}

GroundTruthMap load_ground_truth(const std::filesystem::path& path, const KeywordVocabulary& vocab) {
  return parse_ground_truth(slurp(path), vocab);
}

void write_ground_truth(const GroundTruthMap& gt, const KeywordVocabulary& vocab,
                        const std::filesystem::path& path) {
  ordered_json j = ordered_json::object();
  for (const auto& [surface, cat] : gt.entries) j[surface] = vocab.categories.at(cat);
  dump_json(j, path);
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

void write_lines(std::span<const std::string> lines, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& l : lines) out << l << '\n';
}

}  // namespace komei
