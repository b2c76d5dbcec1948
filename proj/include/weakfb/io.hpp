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
#include <string>
#include <vector>

#include <json.hpp>

#include "weakfb/chaos.hpp"
#include "weakfb/feedback.hpp"
#include "weakfb/linalg.hpp"

namespace weakfb {

/// Shortest text that round-trips: printf "%.17g".
std::string format_real(double x);

/// Matrices as {"dim": d, "entries": [[re, im], ...]} in row-major order.
/// A plain nested array of rows of [re, im] pairs (or reals) is accepted too.
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

DensityMatrix load_density_matrix(const std::filesystem::path& path);
/// A named observable ("sigma_z", "x", ...) or a path to a matrix file.
Observable load_observable(const std::string& name_or_path);

std::string read_text_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// RFC 4180-style CSV assembled in memory.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  void add_row(const std::vector<double>& values);
  void add_row(const std::vector<std::string>& cells);
  std::size_t rows() const { return rows_; }
  const std::string& text() const { return text_; }
  void write(const std::filesystem::path& path) const { write_file_atomic(path, text_); }

 private:
  void append(const std::vector<std::string>& cells);

  std::size_t columns_;
  std::size_t rows_ = 0;
  std::string text_;
};

std::string csv_escape(const std::string& cell);

/// t, re/im of every entry of rho (row-major), then the step diagnostics.
CsvTable trajectory_csv(const Trajectory& traj);
/// t, separation
CsvTable divergence_csv(const DivergenceSeries& series);
nlohmann::json divergence_summary(const DivergenceSeries& series);

/// Line plot of column `y` against column `x` of an existing CSV file.
void render_svg(const std::filesystem::path& csv_path, const std::filesystem::path& svg_path,
                const std::string& x, const std::string& y, bool log_y = false);

}  // namespace weakfb
