// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <sstream>

#include "cli.hpp"
#include "helpers.hpp"
#include "lesiongraph/io.hpp"

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = lesiongraph::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

using lesiongraph::read_text_file;

TEST_CASE("gen twice with the same seed writes identical files") {
  const auto dir = testing::scratch_dir("cli-gen");
  for (const char* sub : {"a", "b"}) {
    const Run r = cli({"gen", "--seed", "11", "--n-patients", "220", "--features", "6", "--informative-features", "3",
                       "--clinical-dim", "3", "--max-lesions", "6", "--out", (dir / sub).string()});
    REQUIRE(r.code == 0);
  }
  CHECK(read_text_file(dir / "a/clinical.csv") == read_text_file(dir / "b/clinical.csv"));
  CHECK(read_text_file(dir / "a/lesions.csv") == read_text_file(dir / "b/lesions.csv"));
}

TEST_CASE("train, gridsearch, compare and export-attention run end to end") {
  const auto dir = testing::scratch_dir("cli-flow");
  REQUIRE(cli({"gen", "--seed", "12", "--n-patients", "220", "--features", "6", "--informative-features", "3", "--clinical-dim",
               "3", "--max-lesions", "6", "--out", (dir / "cohort").string()})
              .code == 0);
  const std::string clin = (dir / "cohort/clinical.csv").string();
  const std::string les = (dir / "cohort/lesions.csv").string();

  const Run tr = cli({"train", "--clinical", clin, "--lesions", les, "--variant", "cross-attention",
                      "--seed", "3", "--epochs", "2", "--hidden", "4", "--out",
                      (dir / "train").string()});
  REQUIRE(tr.code == 0);
  CHECK(std::filesystem::exists(dir / "train/checkpoint.json"));

  const Run ex = cli({"export-attention", "--clinical", clin, "--lesions", les, "--checkpoint",
                      (dir / "train/checkpoint.json").string(), "--out", (dir / "att").string()});
  REQUIRE(ex.code == 0);
  CHECK(read_text_file(dir / "att/attention.csv").find("patient_id") != std::string::npos);

  const Run gs = cli({"gridsearch", "--clinical", clin, "--lesions", les, "--variant",
                      "mlp-clinical", "--variant", "mil-image", "--seed", "4", "--epochs", "2",
                      "--repeats", "2", "--grid-lr", "0.01", "--grid-hidden", "4", "--grid-gamma",
                      "1", "--grid-dropout", "0", "--out", (dir / "gs").string()});
  REQUIRE(gs.code == 0);
  const Run cmp = cli({"compare", "--in", (dir / "gs").string(), "--out", (dir / "cmp").string()});
  REQUIRE(cmp.code == 0);
  const std::string summary = read_text_file(dir / "cmp/summary.csv");
  std::size_t data_rows = 0;
  std::istringstream lines(summary);
  for (std::string line; std::getline(lines, line);)
    if (!line.empty() && line[0] != '#') ++data_rows;
  CHECK(data_rows == 3);  // header plus one row per variant
}

TEST_CASE("check-grad writes one row per parameter") {
  const auto dir = testing::scratch_dir("cli-grad");
  const Run r = cli({"check-grad", "--seed", "1", "--out", dir.string()});
  CHECK((r.code == 0 || r.code == 1));
  const std::string csv = read_text_file(dir / "gradcheck.csv");
  CHECK(csv.find("layer:gatv2") != std::string::npos);
  CHECK(csv.find("model:cross-attention") != std::string::npos);
  CHECK(count_lines(csv) > 50);
}

TEST_CASE("bad invocations fail with a nonzero exit and a message") {
  CHECK(cli({}).code != 0);
  CHECK(cli({"gen"}).code != 0);
  const Run missing = cli({"gridsearch", "--clinical", "/nonexistent.csv", "--lesions",
                           "/nonexistent.csv", "--seed", "1"});
  CHECK(missing.code != 0);
  CHECK_FALSE(missing.err.empty());
  const auto dir = testing::scratch_dir("cli-bad");
  lesiongraph::write_text_file(dir / "c.csv", "patient_id,label,c0\nA,1,0\n");
  lesiongraph::write_text_file(dir / "l.csv", "patient_id,lesion_id,px,py,pz,f0\nB,b,0,0,0,1\n");
  const Run orphan = cli({"compare", "--in", (dir / "c.csv").string()});
  CHECK(orphan.code != 0);
  const Run bad_variant =
      cli({"gridsearch", "--clinical", (dir / "c.csv").string(), "--lesions",
           (dir / "l.csv").string(), "--variant", "nope", "--seed", "1"});
  CHECK(bad_variant.code != 0);
}
