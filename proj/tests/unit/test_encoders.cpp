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

#include <cmath>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "komei/encoders.hpp"
#include "komei/error.hpp"
#include "komei/util.hpp"
#include "test_support.hpp"

using namespace komei;
using komei::testing::random_tensor;

namespace {

EmbeddingTable sample_table() {
  EmbeddingTable t(Modality::image, 3);
  t.add("weed", Tensor2::from_rows({{0.5, -1.25, 2}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}}));
  t.add("ice", Tensor2::from_rows({{0.1, 0.2, 0.3}}));
  return t;
}

ProjectionParams identity_projection(std::size_t d) {
  ProjectionParams p;
  p.w = std::make_shared<Parameter>("w", Tensor2::identity(d));
  p.b = std::make_shared<Parameter>("b", Tensor2(1, d));
  return p;
}

}  // namespace

TEST_CASE("KOME tables round trip byte for byte") {
  const auto table = sample_table();
  const auto bytes = serialize_table(table);
  CHECK(bytes.size() == 17 + (2 + 4 + 2 + 12 * 4) + (2 + 3 + 2 + 3 * 4));
  CHECK(std::memcmp(bytes.data(), "KOME", 4) == 0);
  const auto back = parse_table(bytes);
  CHECK(back == table);
  CHECK(back.modality() == Modality::image);
  CHECK(back.find("ice") != nullptr);
  CHECK(back.find("nope") == nullptr);
  CHECK(serialize_table(back) == bytes);

  komei::testing::TempDir dir;
  write_table(table, dir / "t.kome");
  CHECK(load_embedding_table(dir / "t.kome") == table);
}

TEST_CASE("values are stored at 32-bit precision") {
  EmbeddingTable t(Modality::speech, 1);
  t.add("k", Tensor2(1, 1, 0.1));
  CHECK((*t.find("k"))(0, 0) == static_cast<double>(0.1f));
}

TEST_CASE("empty tables are valid") {
  const EmbeddingTable empty(Modality::speech, 5);
  const auto back = parse_table(serialize_table(empty));
  CHECK(back.size() == 0);
  CHECK(back.dim() == 5);
  CHECK(back.modality() == Modality::speech);
}

TEST_CASE("malformed KOME files are rejected") {
  auto bytes = serialize_table(sample_table());
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(parse_table(bad_magic), FormatError);

  auto bad_version = bytes;
  bad_version[4] = 2;
  CHECK_THROWS_AS(parse_table(bad_version), FormatError);

  auto bad_modality = bytes;
  bad_modality[8] = 7;
  CHECK_THROWS_AS(parse_table(bad_modality), FormatError);

  const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + 30);
  try {
    parse_table(cut);
    FAIL("truncated table parsed");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("offset 25") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_table(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 3)), IoError);

  CHECK_THROWS_AS(load_embedding_table("/nonexistent/dir/t.kome"), IoError);
}

TEST_CASE("duplicate and malformed entries are rejected") {
  EmbeddingTable t(Modality::image, 2);
  t.add("a", Tensor2(1, 2));
  CHECK_THROWS_AS(t.add("a", Tensor2(1, 2)), FormatError);
  CHECK_THROWS_AS(t.add("b", Tensor2(1, 3)), FormatError);
  CHECK_THROWS_AS(t.add("c", Tensor2(0, 2)), FormatError);
}

TEST_CASE("trailing bytes produce a warning") {
  auto bytes = serialize_table(sample_table());
  bytes.push_back(0);
  int warned = 0;
  ScopedWarningSink sink([&](const std::string&) { ++warned; });
  CHECK(parse_table(bytes) == sample_table());
  CHECK(warned == 1);
}

TEST_CASE("toy features are deterministic unit vectors") {
  const auto a = toy_encode("weed", Modality::image, 16, 9);
  const auto b = toy_encode("weed", Modality::image, 16, 9);
  CHECK(a == b);
  CHECK(a.size() == 4);
  CHECK(toy_encode("weed", Modality::speech, 16, 9).size() == 3);
  CHECK(toy_encode("weed", Modality::speech, 16, 9, 1).size() == 1);
  for (const auto& v : a) {
    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    CHECK(std::abs(std::sqrt(n2) - 1.0) < 1e-9);
  }
  CHECK(toy_encode("coke", Modality::image, 16, 9) != a);
  CHECK(toy_encode("weed", Modality::image, 16, 10) != a);
  CHECK(toy_encode("weed", Modality::speech, 16, 9, 4) != a);
  CHECK(a[0] != a[1]);
  const Tensor2 e = toy_evidence("weed", Modality::image, 16, 9);
  CHECK(e.rows() == 4);
  CHECK(e(2, 5) == a[2][5]);
}

TEST_CASE("token vocabulary reserves UNK and MASK") {
  std::vector<MaskedSample> s(2);
  s[0].tokens = {"b", "[MASK]", "a"};
  s[1].tokens = {"a", "c", "[MASK]"};
  const auto v = TokenVocabulary::build(s);
  CHECK(v.tokens() == std::vector<std::string>{"[UNK]", "[MASK]", "a", "b", "c"});
  CHECK(v.id("[MASK]") == TokenVocabulary::kMask);
  CHECK(v.id("zzz") == TokenVocabulary::kUnk);
  CHECK_THROWS_AS(TokenVocabulary({"a", "b"}), FormatError);
  CHECK_THROWS_AS(TokenVocabulary({"[UNK]", "[MASK]", "a", "a"}), FormatError);
}

TEST_CASE("text encoder is deterministic and mean-pooled") {
  std::mt19937_64 rng(3);
  const auto p = TextEncoderParams::create(6, 5, 4, rng);
  const TokenVocabulary vocab({"[UNK]", "[MASK]", "a", "b", "c", "d"});
  const std::vector<std::string> sent{"a", "[MASK]", "c"};
  const Tensor2 t1 = encode_text(sent, vocab, p);
  CHECK(t1.rows() == 1);
  CHECK(t1.cols() == 4);
  CHECK(encode_text(sent, vocab, p) == t1);

  const std::vector<std::string> one_unk{"x"};
  const std::vector<std::string> many_unk{"x", "y", "zz", "w"};
  CHECK(komei::testing::max_abs_diff(encode_text(one_unk, vocab, p), encode_text(many_unk, vocab, p)) <
        1e-15);
  CHECK_THROWS_AS(encode_text(std::vector<std::string>{}, vocab, p), DomainError);
}

TEST_CASE("image projection applies ReLU per vector") {
  const auto id = identity_projection(3);
  const Tensor2 x = Tensor2::from_rows({{0.5, 1, 2}, {0, 3, 4}, {1, 1, 1}, {2, 0, 0}});
  const Tensor2 out = project_image(x, id);
  CHECK(out == x);
  CHECK(out.rows() == 4);
  CHECK(project_image(Tensor2::row({-1, -2, -3}), id) == Tensor2(1, 3));

  std::mt19937_64 rng(4);
  const auto p = ProjectionParams::create("proj", 5, 3, rng);
  CHECK_THROWS_AS(project_image(Tensor2(1, 4), p), ConfigError);
}

TEST_CASE("speech projection pools frames") {
  const auto id = identity_projection(2);
  const Tensor2 same = Tensor2::from_rows({{0.5, 2}, {0.5, 2}, {0.5, 2}});
  CHECK(pool_frames(same, SpeechPool::mean) == Tensor2::row({0.5, 2}));
  CHECK(pool_frames(same, SpeechPool::none) == same);
  const Tensor2 one = Tensor2::row({0.25, -1});
  CHECK(project_speech(one, id, SpeechPool::mean) == project_speech(one, id, SpeechPool::none));
  CHECK(project_speech(Tensor2::row({-1, -1}), id, SpeechPool::mean) == Tensor2(1, 2));
  CHECK_THROWS_AS(pool_frames(Tensor2(0, 2), SpeechPool::mean), EmptyEvidenceError);
  CHECK(parse_speech_pool("none") == SpeechPool::none);
  CHECK_THROWS_AS(parse_speech_pool("max"), ConfigError);
}
