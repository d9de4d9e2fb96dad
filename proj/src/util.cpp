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


#include "komei/util.hpp"

#include <cstdio>
#include <iostream>
#include <utility>

namespace komei {

namespace {

WarningSink& current_sink() {
  static WarningSink sink;
  return sink;
}

}  // namespace

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void warn(const std::string& message) {
  if (auto& sink = current_sink()) {
    sink(message);
    return;
  }
  std::cerr << "komei: warning: " << message << '\n';
}

ScopedWarningSink::ScopedWarningSink(WarningSink sink)
    : previous_(std::exchange(current_sink(), std::move(sink))) {}

ScopedWarningSink::~ScopedWarningSink() { current_sink() = std::move(previous_); }

}  // namespace komei
