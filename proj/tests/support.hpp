// Copyright 2026 The weakfb Authors
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

#include <filesystem>

#include <json.hpp>

#include "weakfb/io.hpp"
#include "weakfb/linalg.hpp"

namespace weakfb::testing {

// Reference values produced by tools/gen_fixtures.py.
inline const nlohmann::json& oracles() {
  static const nlohmann::json j =
      nlohmann::json::parse(read_text_file(std::filesystem::path(WEAKFB_FIXTURE_DIR) / "oracles.json"));
  return j;
}

inline Matrix mat(const nlohmann::json& j) { return matrix_from_json(j); }

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace weakfb::testing
