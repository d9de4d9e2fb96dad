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

#include <iosfwd>

namespace komei::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,  // bad flags, missing arguments, invalid config
  kData = 2,   // unreadable or malformed inputs
  kCheck = 3,  // a verification command found a failure
};

/// Runs one command. Reports go to out, diagnostics to err with a
/// "komei: <kind> error:" prefix.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace komei::cli
