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


#include "komei/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "komei/error.hpp"
#include "komei/util.hpp"

namespace komei {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("invalid value '" + std::string(v) + "' for " + std::string(key));
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("invalid boolean '" + std::string(v) + "' for " + std::string(key));
}

std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct Field {
  const char* name;
  bool is_path;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, std::string_view)> set;
};

template <typename T>
Field size_field(const char* name, T TrainConfig::*member) {
  return {name, false, [member](const TrainConfig& c) { return std::to_string(c.*member); },
          [name, member](TrainConfig& c, std::string_view v) { c.*member = parse_number<T>(name, v); }};
}

Field real_field(const char* name, double TrainConfig::*member) {
  return {name, false, [member](const TrainConfig& c) { return fmt_double(c.*member); },
          [name, member](TrainConfig& c, std::string_view v) {
            c.*member = parse_number<double>(name, v);
          }};
}

Field bool_field(const char* name, bool TrainConfig::*member) {
  return {name, false, [member](const TrainConfig& c) { return std::string(c.*member ? "true" : "false"); },
          [name, member](TrainConfig& c, std::string_view v) { c.*member = parse_bool(name, v); }};
}

Field path_field(const char* name, std::string TrainConfig::*member) {
  return {name, true, [member](const TrainConfig& c) { return c.*member; },
          [member](TrainConfig& c, std::string_view v) { c.*member = std::string(v); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      size_field("d_g", &TrainConfig::d_g),
      size_field("d_v", &TrainConfig::d_v),
      size_field("d_s", &TrainConfig::d_s),
      size_field("d_t", &TrainConfig::d_t),
      size_field("batch_size", &TrainConfig::batch_size),
      real_field("lr", &TrainConfig::lr),
      size_field("warmup_steps", &TrainConfig::warmup_steps),
      real_field("weight_decay", &TrainConfig::weight_decay),
      real_field("adam_beta1", &TrainConfig::adam_beta1),
      real_field("adam_beta2", &TrainConfig::adam_beta2),
      real_field("adam_eps", &TrainConfig::adam_eps),
      size_field("epochs", &TrainConfig::epochs),
      size_field("patience", &TrainConfig::patience),
      size_field("seed", &TrainConfig::seed),
      real_field("tau", &TrainConfig::tau),
      Field{"align_reduction", false,
            [](const TrainConfig& c) {
              return std::string(c.align_reduction == AlignmentConfig::Reduction::mean ? "mean" : "sum");
            },
            [](TrainConfig& c, std::string_view v) {
              if (v == "mean") {
                c.align_reduction = AlignmentConfig::Reduction::mean;
              } else if (v == "sum") {
                c.align_reduction = AlignmentConfig::Reduction::sum;
              } else {
                throw ConfigError("align_reduction must be 'mean' or 'sum'");
              }
            }},
      real_field("alpha", &TrainConfig::alpha),
      real_field("beta", &TrainConfig::beta),
      real_field("gamma", &TrainConfig::gamma),
      bool_field("share_an", &TrainConfig::share_an),
      bool_field("use_text", &TrainConfig::use_text),
      bool_field("use_image", &TrainConfig::use_image),
      bool_field("use_speech", &TrainConfig::use_speech),
      bool_field("cfa", &TrainConfig::cfa),
      bool_field("ca", &TrainConfig::ca),
      bool_field("gu", &TrainConfig::gu),
      bool_field("sa", &TrainConfig::sa),
      Field{"speech_pool", false, [](const TrainConfig& c) { return std::string(to_string(c.speech_pool)); },
            [](TrainConfig& c, std::string_view v) { c.speech_pool = parse_speech_pool(v); }},
      real_field("an_eps", &TrainConfig::an_eps),
      bool_field("toy_fallback", &TrainConfig::toy_fallback),
      size_field("toy_seed", &TrainConfig::toy_seed),
      real_field("split_ratio", &TrainConfig::split_ratio),
      path_field("corpus", &TrainConfig::corpus),
      path_field("test", &TrainConfig::test),
      path_field("vocab", &TrainConfig::vocab),
      path_field("images", &TrainConfig::images),
      path_field("speech", &TrainConfig::speech),
  };
  return f;
}

const Field& field(std::string_view key) {
  for (const auto& f : fields()) {
    if (key == f.name) return f;
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

void TrainConfig::validate() const {
  if (d_g == 0 || d_v == 0 || d_s == 0) throw ConfigError("dimensions must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (beta < 0.0 || gamma < 0.0) throw ConfigError("beta and gamma must be non-negative");
  if (!(an_eps > 0.0)) throw ConfigError("an_eps must be positive");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("split_ratio must lie in (0, 1)");
  if (sa && !gu) throw ConfigError("sa requires gu (stack order ca -> gu -> sa)");
  if (gu && !ca) throw ConfigError("gu requires ca (stack order ca -> gu -> sa)");
  if (!use_text) {
    if (use_image == use_speech) {
      throw ConfigError("text may only be disabled for a single-evidence (V or A) model");
    }
  }
}

void TrainConfig::set(std::string_view key, std::string_view value) {
  field(key).set(*this, trim(value));
}

std::string TrainConfig::get(std::string_view key) const { return field(key).get(*this); }

const std::vector<std::string>& TrainConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.emplace_back(f.name);
    return out;
  }();
  return k;
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.name) + "=" + f.get(*this) + "\n";
  return out;
}

std::string TrainConfig::model_text() const {
  std::string out;
  for (const auto& f : fields()) {
    if (!f.is_path) out += std::string(f.name) + "=" + f.get(*this) + "\n";
  }
  return out;
}

std::uint64_t TrainConfig::hash() const { return fnv1a64(model_text()); }

TrainConfig parse_config_text(std::string_view text, TrainConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(n) + ": expected key=value");
    try {
      base.set(trim(std::string_view(t).substr(0, eq)), std::string_view(t).substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(n) + ": " + e.what());
    }
  }
  return base;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), std::move(base));
}

}  // namespace komei
