// Copyright 2026 The ioc Authors
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

#include <cstdlib>
#include <iostream>
#include <string>

namespace ioc::log {

// Verbosity is controlled by the IOC_LOG environment variable:
// off | warn | debug. Default is warn.
enum class Level { off = 0, warn = 1, debug = 2 };

inline Level level() {
  static const Level value = [] {
    const char* env = std::getenv("IOC_LOG");
    if (env == nullptr) return Level::warn;
    const std::string s(env);
    if (s == "off") return Level::off;
    if (s == "debug") return Level::debug;
    return Level::warn;
  }();
  return value;
}

inline void warn(const std::string& message) {
  if (level() >= Level::warn) std::cerr << "[ioc] warning: " << message << '\n';
}

inline void debug(const std::string& message) {
  if (level() >= Level::debug) std::cerr << "[ioc] debug: " << message << '\n';
}

}  // namespace ioc::log
