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

#include <cstdlib>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "weakfb/errors.hpp"
#include "weakfb/io.hpp"

namespace weakfb {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "weakfb_unit" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(Io, RealsRoundTrip) {
  const double x = 0.1 + 0.2;
  EXPECT_EQ(std::stod(format_real(x)), x);
}

TEST(Io, CsvEscapingAndLineEndings) {
  EXPECT_EQ(csv_escape("plain"), "plain");
  EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
  CsvTable t({"a", "b"});
  t.add_row(std::vector<double>{1.0, 0.5});
  EXPECT_EQ(t.text(), "a,b\r\n1,0.5\r\n");
  EXPECT_THROW(t.add_row(std::vector<double>{1.0}), ValidationError);
}

TEST(Io, MatrixJsonForms) {
  Matrix m(2, 2);
  m << Complex(0.7, 0), Complex(0.1, -0.2), Complex(0.1, 0.2), Complex(0.3, 0);
  EXPECT_EQ(matrix_from_json(matrix_to_json(m)), m);
  const Matrix b = matrix_from_json(nlohmann::json::parse(R"({"bloch": [0, 0, 1]})"));
  EXPECT_NEAR(b(0, 0).real(), 1.0, 1e-15);
  const Matrix rows = matrix_from_json(nlohmann::json::parse("[[0.5, 0], [0, 0.5]]"));
  EXPECT_EQ(rows(1, 1), Complex(0.5, 0));
  EXPECT_THROW(matrix_from_json(nlohmann::json::parse(R"({"dim": 2, "entries": [[1, 0]]})")), ValidationError);
}

TEST(Io, LoadErrors) {
  const fs::path dir = scratch("load");
  EXPECT_THROW(load_density_matrix(dir / "missing.json"), IoError);
  write_file_atomic(dir / "bad.json", "{not json");
  EXPECT_THROW(load_density_matrix(dir / "bad.json"), ValidationError);
  write_file_atomic(dir / "neg.json", "[[1.5, 0], [0, -0.5]]");
  EXPECT_THROW(load_density_matrix(dir / "neg.json"), ValidationError);
  EXPECT_THROW(load_observable("not_an_observable"), ValidationError);
}

int cli(const std::string& args) {
  const int status = std::system((std::string(WEAKFB_CLI_PATH) + " " + args + " > /dev/null 2>&1").c_str());
  return WEXITSTATUS(status);
}

TEST(Cli, ExitCodes) {
  const fs::path out = scratch("cli");
  const std::string o = " --out " + out.string();
  EXPECT_EQ(cli("measure --bloch 0,0,1 --N 10 --delta 1 --trials 5" + o), 0);
  EXPECT_EQ(cli("measure --bloch 0,0,1 --N 0" + o), 2);
  EXPECT_EQ(cli("measure --bloch 2,0,0" + o), 2);
  EXPECT_EQ(cli("chaos --k 500" + o), 2);
  EXPECT_EQ(cli("chaos --policy nope" + o), 2);
  EXPECT_EQ(cli("nls --policy z_conditioned_flip" + o), 2);
  EXPECT_EQ(cli("measure --unknown-flag" + o), 2);
  EXPECT_EQ(cli("measure --rho " + (out / "missing.json").string() + o), 4);
  EXPECT_EQ(cli("nls --policy constant_hamiltonian --hx 100 --dt 0.01" + o), 2);
}

TEST(Cli, WritesSummaryAndCsv) {
  const fs::path out = scratch("files");
  ASSERT_EQ(cli("chaos --k 3 --s0 1e-6 --t 10 --seed 11 --svg --out " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "chaos_divergence.csv"));
  EXPECT_TRUE(fs::exists(out / "chaos_divergence.svg"));
  const auto summary = nlohmann::json::parse(read_text_file(out / "chaos_summary.json"));
  EXPECT_EQ(summary["command"], "chaos");
  EXPECT_EQ(summary["seed"], 11);
  EXPECT_EQ(summary["policy"]["parameters"]["k"], 3.0);
}

TEST(Cli, ConfigFlagsAreOverriddenByCommandLine) {
  const fs::path out = scratch("config");
  write_file_atomic(out / "s.toml", "seed = 4\n[measure]\nbloch = [0, 0, 1]\nN = 10\ntrials = 3\n");
  ASSERT_EQ(cli("--config " + (out / "s.toml").string() + " --seed 9 --out " + out.string()), 0);
  const auto summary = nlohmann::json::parse(read_text_file(out / "measure_summary.json"));
  EXPECT_EQ(summary["seed"], 9);
  EXPECT_EQ(summary["trials"], 3);
}

}  // namespace
}  // namespace weakfb
