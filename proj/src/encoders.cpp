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


#include "komei/encoders.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "binio.hpp"
#include "komei/error.hpp"
#include "komei/util.hpp"

namespace komei {

std::string_view to_string(Modality m) noexcept {
  return m == Modality::image ? "image" : "speech";
}

// ---- table -------------------------------------------------------------------------

EmbeddingTable::EmbeddingTable(Modality modality, std::size_t dim) : modality_(modality), dim_(dim) {}

void EmbeddingTable::add(std::string key, Tensor2 vectors) {
  if (vectors.rows() == 0) throw FormatError("embedding entry '" + key + "' has no vectors");
  if (vectors.cols() != dim_) {
    throw FormatError("embedding entry '" + key + "' has width " + std::to_string(vectors.cols()) +
                      ", table dim is " + std::to_string(dim_));
  }
  if (index_.count(key)) throw FormatError("duplicate embedding key '" + key + "'");
  for (double& v : vectors.data()) v = static_cast<double>(static_cast<float>(v));
  index_.emplace(key, entries_.size());
  entries_.push_back(Entry{std::move(key), std::move(vectors)});
}

const Tensor2* EmbeddingTable::find(std::string_view key) const {
  auto it = index_.find(std::string(key));
  return it == index_.end() ? nullptr : &entries_[it->second].vectors;
}

namespace {

using detail::ByteReader;
using detail::ByteWriter;

constexpr char kMagic[4] = {'K', 'O', 'M', 'E'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

std::vector<std::uint8_t> serialize_table(const EmbeddingTable& table) {
  ByteWriter w;
  w.bytes(std::string_view(kMagic, 4));
  w.u32(kVersion);
  w.u8(static_cast<std::uint8_t>(table.modality()));
  w.u32(static_cast<std::uint32_t>(table.dim()));
  w.u32(static_cast<std::uint32_t>(table.size()));
  for (const auto& e : table.entries()) {
    if (e.key.size() > 0xffff || e.vectors.rows() > 0xffff) {
      throw FormatError("KOME: entry '" + e.key + "' exceeds 16-bit limits");
    }
    w.u16(static_cast<std::uint16_t>(e.key.size()));
    w.bytes(e.key);
    w.u16(static_cast<std::uint16_t>(e.vectors.rows()));
    for (double v : e.vectors.data()) w.f32(static_cast<float>(v));
  }
  return w.take();
}

EmbeddingTable parse_table(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "KOME");
  if (r.bytes(4, "magic") != std::string_view(kMagic, 4)) throw FormatError("KOME: bad magic");
  if (const auto version = r.u32("version"); version != kVersion) {
    throw FormatError("KOME: unsupported version " + std::to_string(version));
  }
  const auto modality = r.u8("modality");
  if (modality != 1 && modality != 2) {
    throw FormatError("KOME: unknown modality code " + std::to_string(modality));
  }
  const std::size_t dim = r.u32("dim");
  const std::size_t count = r.u32("entry count");
  EmbeddingTable table(static_cast<Modality>(modality), dim);
  for (std::size_t e = 0; e < count; ++e) {
    const std::size_t entry_offset = r.offset();
    const std::size_t key_len = r.u16("key length");
    std::string key = r.bytes(key_len, "key");
    const std::size_t vec_count = r.u16("vector count");
    if (vec_count == 0) {
      throw FormatError("KOME: entry '" + key + "' at offset " + std::to_string(entry_offset) +
                        " has no vectors");
    }
    std::vector<double> values(vec_count * dim);
    r.need(values.size() * 4, "vector data");
    for (double& v : values) {
      const float f = r.f32("vector data");
      if (!std::isfinite(f)) throw FormatError("KOME: non-finite value in entry '" + key + "'");
      v = f;
    }
    if (table.find(key)) throw FormatError("KOME: duplicate key '" + key + "'");
    table.add(std::move(key), Tensor2(vec_count, dim, std::move(values)));
  }
  if (r.offset() != bytes.size()) {
    warn("KOME: " + std::to_string(bytes.size() - r.offset()) + " trailing bytes ignored");
  }
  return table;
}

void write_table(const EmbeddingTable& table, const std::filesystem::path& path) {
  detail::write_file_bytes(path, serialize_table(table));
}

EmbeddingTable load_embedding_table(const std::filesystem::path& path) {
  return parse_table(detail::read_file_bytes(path));
}

// ---- toy features -------------------------------------------------------------------

std::vector<std::vector<double>> toy_encode(std::string_view surface, Modality modality,
                                            std::size_t dim, std::uint64_t seed, std::size_t count) {
  if (count == 0) count = modality == Modality::image ? 4 : 3;
  const std::uint64_t base =
      splitmix64(fnv1a64(surface) ^ splitmix64(seed) ^
                 (static_cast<std::uint64_t>(modality) << 56));
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::mt19937_64 rng(splitmix64(base + k));
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> v(dim);
    double norm2 = 0.0;
    while (norm2 == 0.0 && dim > 0) {
      for (double& x : v) x = dist(rng);
      norm2 = 0.0;
      for (double x : v) norm2 += x * x;
    }
    const double inv = dim > 0 ? 1.0 / std::sqrt(norm2) : 0.0;
    for (double& x : v) x *= inv;
    out.push_back(std::move(v));
  }
  return out;
}

Tensor2 toy_evidence(std::string_view surface, Modality modality, std::size_t dim,
                     std::uint64_t seed, std::size_t count) {
  const auto vecs = toy_encode(surface, modality, dim, seed, count);
  Tensor2 out(vecs.size(), dim);
  for (std::size_t r = 0; r < vecs.size(); ++r) {
    std::copy(vecs[r].begin(), vecs[r].end(), out.row_span(r).begin());
  }
  return out;
}

// ---- text -------------------------------------------------------------------------------

TokenVocabulary::TokenVocabulary() : TokenVocabulary(std::vector<std::string>{}) {}

TokenVocabulary::TokenVocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty()) tokens_ = {std::string(kUnkToken), std::string(kMaskToken)};
  if (tokens_.size() < 2 || tokens_[kUnk] != kUnkToken || tokens_[kMask] != kMaskToken) {
    throw FormatError("token vocabulary must start with [UNK], [MASK]");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], i).second) {
      throw FormatError("duplicate token '" + tokens_[i] + "' in vocabulary");
    }
  }
}

TokenVocabulary TokenVocabulary::build(std::span<const MaskedSample> samples) {
  std::vector<std::string> words;
  for (const auto& s : samples) {
    for (const auto& t : s.tokens) {
      if (t != kMaskToken && t != kUnkToken) words.push_back(t);
    }
  }
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  std::vector<std::string> all{std::string(kUnkToken), std::string(kMaskToken)};
  all.insert(all.end(), words.begin(), words.end());
  return TokenVocabulary(std::move(all));
}

std::size_t TokenVocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<std::size_t> TokenVocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

TextEncoderParams TextEncoderParams::create(std::size_t vocab_size, std::size_t d_t,
                                            std::size_t d_g, std::mt19937_64& rng) {
  TextEncoderParams p;
  p.embedding = std::make_shared<Parameter>("text.embedding", random_normal(vocab_size, d_t, 1.0, rng));
  p.w1 = std::make_shared<Parameter>("text.w1",
                                     random_normal(d_t, d_g, 1.0 / std::sqrt(double(d_t)), rng));
  p.b1 = std::make_shared<Parameter>("text.b1", Tensor2(1, d_g), true, false);
  p.w2 = std::make_shared<Parameter>("text.w2",
                                     random_normal(d_g, d_g, 1.0 / std::sqrt(double(d_g)), rng));
  p.b2 = std::make_shared<Parameter>("text.b2", Tensor2(1, d_g), true, false);
  return p;
}

Var encode_text(Tape& tape, const std::vector<std::vector<std::size_t>>& token_ids,
                const TextEncoderParams& params) {
  for (const auto& ids : token_ids) {
    if (ids.empty()) throw DomainError("encode_text: empty token list");
  }
  Var bag = embedding_bag_mean(tape.param(*params.embedding), token_ids);
  Var hidden = relu(linear(bag, tape.param(*params.w1), tape.param(*params.b1)));
  return linear(hidden, tape.param(*params.w2), tape.param(*params.b2));
}

Tensor2 encode_text(std::span<const std::string> tokens, const TokenVocabulary& vocab,
                    const TextEncoderParams& params) {
  if (tokens.empty()) throw DomainError("encode_text: empty token list");
  Tape tape;
  return encode_text(tape, {vocab.encode(tokens)}, params).value();
}

// ---- projections ---------------------------------------------------------------------------

ProjectionParams ProjectionParams::create(const std::string& name, std::size_t d_in,
                                          std::size_t d_g, std::mt19937_64& rng) {
  ProjectionParams p;
  p.w = std::make_shared<Parameter>(name + ".w",
                                    random_normal(d_in, d_g, std::sqrt(2.0 / double(d_in)), rng));
  p.b = std::make_shared<Parameter>(name + ".b", Tensor2(1, d_g), true, false);
  return p;
}

std::string_view to_string(SpeechPool p) noexcept { return p == SpeechPool::mean ? "mean" : "none"; }

SpeechPool parse_speech_pool(std::string_view s) {
  if (s == "mean") return SpeechPool::mean;
  if (s == "none") return SpeechPool::none;
  throw ConfigError("speech_pool must be 'mean' or 'none', got '" + std::string(s) + "'");
}

Var project_evidence(Var vectors, const ProjectionParams& proj) {
  Tape& t = vectors.tape();
  if (vectors.cols() != proj.w->value.rows()) {
    throw ConfigError("evidence width " + std::to_string(vectors.cols()) +
                      " does not match projection input " + std::to_string(proj.w->value.rows()));
  }
  return relu(linear(vectors, t.param(*proj.w), t.param(*proj.b)));
}

Tensor2 project_image(const Tensor2& image_vectors, const ProjectionParams& proj) {
  Tape tape;
  return project_evidence(tape.constant(image_vectors), proj).value();
}

Tensor2 pool_frames(const Tensor2& frames, SpeechPool pool) {
  if (frames.rows() == 0) throw EmptyEvidenceError("speech evidence has no frames");
  if (pool == SpeechPool::none) return frames;
  Tensor2 mean(1, frames.cols());
  for (std::size_t r = 0; r < frames.rows(); ++r) {
    for (std::size_t c = 0; c < frames.cols(); ++c) mean(0, c) += frames(r, c);
  }
  for (double& v : mean.data()) v /= static_cast<double>(frames.rows());
  return mean;
}

Tensor2 project_speech(const Tensor2& frames, const ProjectionParams& proj, SpeechPool pool) {
  Tape tape;
  return project_evidence(tape.constant(pool_frames(frames, pool)), proj).value();
}

}  // namespace komei
