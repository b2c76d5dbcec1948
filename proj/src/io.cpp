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

#include "weakfb/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace weakfb {

std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json entries = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) entries.push_back({m(i, j).real(), m(i, j).imag()});
  }
  return {{"dim", m.rows()}, {"entries", entries}};
}

namespace {

Complex parse_entry(const nlohmann::json& e) {
  if (e.is_number()) return {e.get<double>(), 0.0};
  if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
    return {e[0].get<double>(), e[1].get<double>()};
  }
  throw ValidationError("matrix entries must be numbers or [re, im] pairs");
}

}  // namespace

Matrix matrix_from_json(const nlohmann::json& j) {
  if (j.is_object() && j.contains("bloch")) {
    const auto& b = j.at("bloch");
    if (!b.is_array() || b.size() != 3) throw ValidationError("\"bloch\" must be a 3-vector");
    return from_bloch(Eigen::Vector3d(b[0].get<double>(), b[1].get<double>(), b[2].get<double>())).matrix();
  }
  if (j.is_object()) {
    if (!j.contains("dim") || !j.contains("entries")) throw ValidationError("matrix object needs dim and entries");
    const int d = j.at("dim").get<int>();
    const auto& entries = j.at("entries");
    if (d < 1 || !entries.is_array() || entries.size() != static_cast<std::size_t>(d) * d) {
      throw DimensionError("matrix entries do not match dim");
    }
    Matrix m(d, d);
    for (int r = 0; r < d; ++r) {
      for (int c = 0; c < d; ++c) m(r, c) = parse_entry(entries[static_cast<std::size_t>(r) * d + c]);
    }
    return m;
  }
  if (j.is_array() && !j.empty()) {
    const auto d = static_cast<Eigen::Index>(j.size());
    Matrix m(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
      const auto& row = j[static_cast<std::size_t>(r)];
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != d) throw DimensionError("matrix must be square");
      for (Eigen::Index c = 0; c < d; ++c) m(r, c) = parse_entry(row[static_cast<std::size_t>(c)]);
    }
    return m;
  }
  throw ValidationError("unrecognized matrix JSON");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path.string());
  return buf.str();
}

namespace {

nlohmann::json parse_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace

DensityMatrix load_density_matrix(const std::filesystem::path& path) {
  const nlohmann::json j = parse_json_file(path);
  try {
    return DensityMatrix(matrix_from_json(j));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

Observable load_observable(const std::string& name_or_path) {
  try {
    return Observable::named(name_or_path);
  } catch (const ValidationError&) {
    if (!std::filesystem::exists(name_or_path)) {
      throw ValidationError("unknown observable '" + name_or_path + "' (not a name or a file)");
    }
  }
  const nlohmann::json j = parse_json_file(name_or_path);
  try {
    return Observable(matrix_from_json(j), std::filesystem::path(name_or_path).stem().string());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(name_or_path + ": " + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw IoError("error writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot rename onto " + path.string() + ": " + ec.message());
  }
}

std::string csv_escape(const std::string& cell) {
  if (cell.find_first_of(",\"\r\n") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

CsvTable::CsvTable(std::vector<std::string> header) : columns_(header.size()) {
  if (header.empty()) throw ValidationError("CSV needs at least one column");
  append(header);
}

void CsvTable::append(const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) text_ += ',';
    text_ += csv_escape(cells[i]);
  }
  text_ += "\r\n";
}

void CsvTable::add_row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw ValidationError("CSV row width does not match the header");
  append(cells);
  ++rows_;
}

void CsvTable::add_row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_real(v));
  add_row(cells);
}

CsvTable trajectory_csv(const Trajectory& traj) {
  const int d = traj.states.empty() ? 0 : traj.states.front().dim();
  std::vector<std::string> header{"t"};
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      header.push_back("re_" + std::to_string(i) + std::to_string(j));
      header.push_back("im_" + std::to_string(i) + std::to_string(j));
    }
  }
  header.insert(header.end(), {"trace_error", "hermiticity_error", "eigenvalue_drift"});
  CsvTable table(header);
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    std::vector<double> row{traj.times[k]};
    const Matrix& m = traj.states[k].matrix();
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        row.push_back(m(i, j).real());
        row.push_back(m(i, j).imag());
      }
    }
    const StepDiagnostics diag = k < traj.diagnostics.size() ? traj.diagnostics[k] : StepDiagnostics{};
    row.insert(row.end(), {diag.trace_error, diag.hermiticity_error, diag.eigenvalue_drift});
    table.add_row(row);
  }
  return table;
}

CsvTable divergence_csv(const DivergenceSeries& series) {
  CsvTable table({"t", "separation"});
  for (std::size_t i = 0; i < series.times.size(); ++i) table.add_row({series.times[i], series.separations[i]});
  return table;
}

nlohmann::json divergence_summary(const DivergenceSeries& series) {
  const LyapunovFit& f = series.lyapunov_fit;
  return {{"metric", std::string(to_string(series.metric))},
          {"initial_separation", series.initial_separation},
          {"final_separation", series.separations.empty() ? 0.0 : series.separations.back()},
          {"lambda", f.lambda},
          {"r_squared", f.r_squared},
          {"fit_window", {f.t0, f.t1}},
          {"fit_points", f.points},
          {"growth_found", f.growth_found}};
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace

void render_svg(const std::filesystem::path& csv_path, const std::filesystem::path& svg_path, const std::string& x,
                const std::string& y, bool log_y) {
  std::istringstream in(read_text_file(csv_path));
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty CSV " + csv_path.string());
  const auto header = split_csv_line(line);
  auto column = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw ValidationError("CSV has no column '" + name + "'");
  };
  const std::size_t cx = column(x);
  const std::size_t cy = column(y);
  std::vector<std::pair<double, double>> pts;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() <= std::max(cx, cy)) continue;
    const double vx = std::stod(cells[cx]);
    double vy = std::stod(cells[cy]);
    if (log_y) {
      if (!(vy > 0.0)) continue;
      vy = std::log10(vy);
    }
    if (std::isfinite(vx) && std::isfinite(vy)) pts.emplace_back(vx, vy);
  }

  constexpr double w = 640.0;
  constexpr double h = 400.0;
  constexpr double pad = 50.0;
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  if (!pts.empty()) {
    x0 = x1 = pts.front().first;
    y0 = y1 = pts.front().second;
    for (const auto& [px, py] : pts) {
      x0 = std::min(x0, px);
      x1 = std::max(x1, px);
      y0 = std::min(y0, py);
      y1 = std::max(y1, py);
    }
  }
  if (x1 == x0) x1 = x0 + 1.0;
  if (y1 == y0) y1 = y0 + 1.0;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << pad << "\" y1=\"" << h - pad << "\" x2=\"" << w - pad << "\" y2=\"" << h - pad
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << h - pad
      << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << w / 2 << "\" y=\"" << h - 12 << "\" text-anchor=\"middle\">" << x << "</text>\n";
  svg << "<text x=\"14\" y=\"" << h / 2 << "\" transform=\"rotate(-90 14 " << h / 2
      << ")\" text-anchor=\"middle\">" << (log_y ? "log10 " + y : y) << "</text>\n";
  svg << "<text x=\"" << pad << "\" y=\"" << h - pad + 16 << "\">" << format_real(x0) << "</text>\n";
  svg << "<text x=\"" << w - pad << "\" y=\"" << h - pad + 16 << "\" text-anchor=\"end\">" << format_real(x1)
      << "</text>\n";
  svg << "<text x=\"" << pad - 4 << "\" y=\"" << pad << "\" text-anchor=\"end\">" << format_real(y1) << "</text>\n";
  svg << "<text x=\"" << pad - 4 << "\" y=\"" << h - pad << "\" text-anchor=\"end\">" << format_real(y0)
      << "</text>\n";
  svg << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
  char buf[64];
  for (const auto& [px, py] : pts) {
    const double sx = pad + (px - x0) / (x1 - x0) * (w - 2 * pad);
    const double sy = h - pad - (py - y0) / (y1 - y0) * (h - 2 * pad);
    std::snprintf(buf, sizeof buf, "%.2f,%.2f ", sx, sy);
    svg << buf;
  }
  svg << "\"/>\n</svg>\n";
  write_file_atomic(svg_path, svg.str());
}

}  // namespace weakfb
