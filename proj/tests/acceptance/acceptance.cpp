// SPDX-License-Identifier: Apache-2.0
// Prints one PASS/FAIL line per acceptance criterion; exit code 1 if any fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <sstream>
#include <thread>

#include <fmt/core.h>
#include <fmt/format.h>

#include "cli.hpp"
#include "inputs.hpp"
#include "lesiongraph/gradcheck.hpp"
#include "lesiongraph/graph_build.hpp"
#include "lesiongraph/io.hpp"
#include "lesiongraph/metrics.hpp"
#include "lesiongraph/protocol.hpp"
#include "lesiongraph/synth.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace lesiongraph;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o) {
  failures += o.pass ? 0 : 1;
  fmt::print("criterion {} {:<28} {}  {}\n", id, name, o.pass ? "PASS" : "FAIL", o.detail);
  std::fflush(stdout);
}

std::vector<int> selected;  // empty: every criterion

template <class F>
void check(int id, const std::string& name, F&& f) {
  if (!selected.empty() && std::find(selected.begin(), selected.end(), id) == selected.end()) return;
  Outcome o;
  try {
    o = f();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  report(id, name, o);
}

int cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

fs::path cache_root() {
  if (const char* env = std::getenv("LESIONGRAPH_ACCEPTANCE_CACHE")) return env;
  return LESIONGRAPH_ACCEPTANCE_CACHE_DEFAULT;
}

Outcome gradients() {
  const auto start = std::chrono::steady_clock::now();
  const auto cases = run_gradient_checks(GradCheckDims{3, 5, 4, 6}, 0, 1e-5, 1e-4);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::size_t params = 0, failed_params = 0, entries = 0, failed_entries = 0;
  double worst = 0.0;
  std::string worst_name;
  for (const auto& c : cases) {
    for (const auto& e : c.report.entries) {
      ++params;
      entries += e.entries;
      failed_entries += e.failing;
      if (!e.passed) ++failed_params;
      if (e.rel_error > worst) {
        worst = e.rel_error;
        worst_name = c.name + "/" + e.name;
      }
    }
  }
  return {failed_params == 0 && secs < 60.0,
          fmt::format("{} cases, {}/{} parameters and {}/{} entries below 1e-4, worst {:.2e} "
                      "({}), {:.1f}s",
                      cases.size(), params - failed_params, params, entries - failed_entries,
                      entries, worst, worst_name, secs)};
}

Outcome attention_rows() {
  Rng rng = make_rng(2, "acceptance-rows");
  std::uniform_int_distribution<std::size_t> count(1, 12);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const PatientInput x = testing::random_input(count(rng), 5, 4, rng);
    const auto params = testing::jittered_params(Variant::kCrossAttention, 5, 4, 6, rng, 1.0);
    diff::Graph g;
    const auto bound = diff::bind_params(g, params, false);
    const ForwardTrace trace = build_forward(g, Variant::kCrossAttention, bound, x, {});
    g.forward(trace.prob);
    std::vector<diff::NodeId> maps = trace.gat_attention;
    maps.insert(maps.end(), trace.cross_attention.begin(), trace.cross_attention.end());
    for (diff::NodeId id : maps) {
      const Matrix& m = g.value(id);
      for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto row = m.row_span(r);
        worst = std::max(worst, std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0));
      }
    }
  }
  return {worst <= 1e-12, fmt::format("max |row sum - 1| = {:.2e} over 100 instances", worst)};
}

Outcome permutation() {
  Rng rng = make_rng(3, "acceptance-perm");
  std::uniform_int_distribution<std::size_t> count(2, 20);
  std::size_t mismatches = 0, checks = 0;
  for (Variant v : {Variant::kCrossAttention, Variant::kMilImage, Variant::kGraphConvImage}) {
    for (int trial = 0; trial < 50; ++trial) {
      const PatientInput x = testing::random_input(count(rng), 5, 4, rng);
      const auto params = testing::jittered_params(v, 5, 4, 8, rng);
      const double base = predict(v, params, x);
      std::vector<std::size_t> order(x.lesion_count());
      std::iota(order.begin(), order.end(), 0);
      for (int k = 0; k < 3; ++k) {
        std::shuffle(order.begin(), order.end(), rng);
        ++checks;
        mismatches += predict(v, params, permute_lesions(x, order)) != base;
      }
    }
  }
  return {mismatches == 0, fmt::format("{} of {} permuted predictions differ", mismatches, checks)};
}

Outcome edge_kernel() {
  const Cohort c = testing::toy_cohort(30, 5, 2, 4, 9);
  const PopulationStats stats = population_stats(c.patients(), 0.5);
  bool diag = true;
  for (const auto& p : c.patients()) {
    const LesionGraph g = build_graph(p, stats);
    for (std::size_t i = 0; i < g.size(); ++i) diag = diag && g.edge_weights(i, i) == 1.0;
  }
  PopulationStats hand;
  hand.sigma_centroid = 1.7;
  hand.sigma_feature = 0.6;
  hand.gamma = 3.0;
  PatientRecord pair;
  pair.id = "H";
  pair.clinical = {0.0};
  pair.lesions = {{"a", {0, 0, 0}, {1, 1}}, {"b", {0, 0, 3.0 * 1.7 * 1.7}, {1, 1}}};
  const double hand_err = std::abs(build_graph(pair, hand).edge_weights(0, 1) - std::exp(-1.0));

  Rng rng = make_rng(4, "acceptance-gamma");
  std::uniform_real_distribution<double> u(0.0, 4.0), g(0.05, 20.0);
  std::size_t violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    PatientRecord p;
    p.id = "M";
    p.clinical = {0.0};
    p.lesions = {{"a", {u(rng), u(rng), u(rng)}, {u(rng), u(rng)}},
                 {"b", {u(rng), u(rng), u(rng)}, {u(rng), u(rng)}}};
    PopulationStats lo = hand;
    lo.gamma = g(rng);
    const PopulationStats hi = lo.with_gamma(lo.gamma + g(rng));
    violations += build_graph(p, hi).edge_weights(0, 1) < build_graph(p, lo).edge_weights(0, 1);
  }
  return {diag && hand_err <= 1e-12 && violations == 0,
          fmt::format("diagonal exact: {}, hand case error {:.1e}, {} monotonicity violations",
                      diag ? "yes" : "no", hand_err, violations)};
}

Outcome auc_oracle() {
  Rng rng = make_rng(5, "acceptance-auc");
  std::uniform_int_distribution<int> level(0, 9);
  std::uniform_int_distribution<std::size_t> size(4, 150);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = size(rng);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = trial % 2 ? 0.1 * level(rng) : std::normal_distribution<double>()(rng);
      y[i] = static_cast<int>(rng() % 2);
    }
    y[0] = 0;
    y[1] = 1;
    mismatches += roc_auc(s, y) != testing::oracle::pair_auc(s, y);
  }
  return {mismatches == 0, fmt::format("{} of 200 sets differ from pair counting", mismatches)};
}

Outcome welch() {
  Rng rng = make_rng(6, "acceptance-welch");
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> size(3, 20);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(size(rng)), b(size(rng));
    for (double& v : a) v = 0.7 + 0.05 * n(rng);
    for (double& v : b) v = 0.7 + 0.02 * trial / 5.0 + 0.08 * n(rng);
    const auto stat = testing::oracle::welch_statistic(a, b);
    worst = std::max(worst, std::abs(welch_ttest(a, b).p_value -
                                     testing::oracle::t_two_sided(stat.t, stat.df)));
  }
  const std::vector<double> same{0.71, 0.69, 0.74, 0.66};
  const double p_same = welch_ttest(same, same).p_value;
  return {worst <= 1e-6 && p_same == 1.0,
          fmt::format("max |p - quadrature| = {:.1e}, identical samples p = {}", worst, p_same)};
}

Outcome table_one() {
  const fs::path root = cache_root();
  const fs::path cohort_dir = root / "cohort-42";
  if (cli({"gen", "--seed", "42", "--out", cohort_dir.string()}) != 0) return {false, "gen failed"};
  const std::vector<std::string> variants{"cross-attention", "ablation-concat-fusion",
                                          "mlp-clinical", "graphconv-image"};
  const GridSpec grid;
  const ProtocolOptions defaults;
  const fs::path clin = cohort_dir / "clinical.csv", les = cohort_dir / "lesions.csv";
  const std::string config = fmt::format(
      "gridsearch variants={} {} epochs={} repeats={} subsets={} clinical={:016x} "
      "lesions={:016x}",
      fmt::join(variants, "/"), grid.describe(), defaults.epochs, defaults.repeats,
      defaults.subsets, fnv1a(read_text_file(clin)), fnv1a(read_text_file(les)));
  const std::string tag = artifact_tag(42, config);
  const fs::path out = root / "protocol-42";
  const fs::path report_path = out / "report.csv";

  bool reused = false;
  if (fs::exists(report_path)) {
    const std::string text = read_text_file(report_path);
    reused = text.rfind("# " + tag + "\n", 0) == 0;
  }
  if (!reused) {
    const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::string> args{"gridsearch", "--clinical", clin.string(), "--lesions",
                                  les.string(), "--seed", "42", "--workers",
                                  std::to_string(workers), "--out", out.string()};
    for (const auto& v : variants) {
      args.push_back("--variant");
      args.push_back(v);
    }
    if (cli(args) != 0) return {false, "gridsearch failed"};
  }
  const EvalReport rep = read_report_csv(report_path);
  const auto xatt = rep.test_aucs(Variant::kCrossAttention);
  const auto concat = rep.test_aucs(Variant::kAblationConcatFusion);
  const auto mlp = rep.test_aucs(Variant::kMlpClinical);
  const auto gc = rep.test_aucs(Variant::kGraphConvImage);
  if (xatt.size() != 10 || concat.size() != 10 || mlp.size() != 10 || gc.size() != 10) {
    return {false, "report does not hold 10 repeats per variant"};
  }
  const double mx = mean(xatt), mc = mean(concat), mm = mean(mlp), mg = mean(gc);
  const double p = welch_ttest(xatt, concat).p_value;
  const bool ok = mx > mc && mx > mm && mx > mg && mx >= 0.65 && p < 0.05;
  return {ok, fmt::format("cross-attention {:.3f}±{:.3f}, concat {:.3f}±{:.3f}, mlp-clinical "
                          "{:.3f}±{:.3f}, graphconv {:.3f}±{:.3f}, Welch p vs concat {:.3g}{}",
                          mx, sample_std(xatt), mc, sample_std(concat), mm, sample_std(mlp), mg,
                          sample_std(gc), p, reused ? " (tag-verified cached report)" : "")};
}

Outcome determinism() {
  const fs::path root = cache_root() / "determinism";
  fs::remove_all(root);
  if (cli({"gen", "--seed", "8", "--n-patients", "240", "--max-lesions", "8", "--out",
           (root / "cohort").string()}) != 0) {
    return {false, "gen failed"};
  }
  const std::string clin = (root / "cohort/clinical.csv").string();
  const std::string les = (root / "cohort/lesions.csv").string();
  const unsigned many = std::max(2u, std::thread::hardware_concurrency());
  for (const auto& [name, workers] : {std::pair<std::string, unsigned>{"a", 1}, {"b", many}}) {
    const int code = cli({"gridsearch", "--clinical", clin, "--lesions", les, "--seed", "8",
                          "--variant", "cross-attention", "--variant", "mil-image", "--variant",
                          "ablation-concat-fusion", "--repeats", "3", "--epochs", "4",
                          "--grid-lr", "0.01,0.001", "--grid-hidden", "8", "--grid-gamma", "0.1,1",
                          "--grid-dropout", "0.2", "--workers", std::to_string(workers), "--out",
                          (root / name).string()});
    if (code != 0) return {false, "gridsearch failed"};
  }
  bool same = true;
  for (const char* file : {"report.csv", "grid.csv", "summary.csv"}) {
    same = same && read_text_file(root / "a" / file) == read_text_file(root / "b" / file);
  }
  return {same, fmt::format("report, grid and summary CSVs {} (1 vs {} workers)",
                            same ? "byte-identical" : "differ", many)};
}

Outcome degenerate() {
  SynthConfig c;
  c.n_patients = 200;
  c.max_lesions = 1;
  c.feature_dim = 6;
  c.clinical_dim = 3;
  c.informative_features = 3;
  c.seed = 9;
  std::vector<PatientRecord> patients;
  const Cohort base = generate(c);
  for (std::size_t i = 0; i < base.size(); ++i) {
    PatientRecord p = base[i];
    p.clinical[2] = 1.5;
    for (auto& l : p.lesions) l.features[5] = -2.0;
    if (i % 2 == 1) {  // give half the patients a second lesion at the same spot
      Lesion twin = p.lesions[0];
      twin.id += "b";
      p.lesions.push_back(twin);
    }
    patients.push_back(std::move(p));
  }
  const fs::path root = cache_root() / "degenerate";
  fs::remove_all(root);
  write_cohort(Cohort(patients), root / "clinical.csv", root / "lesions.csv", "degenerate");
  const int code = cli({"gridsearch", "--clinical", (root / "clinical.csv").string(), "--lesions",
                        (root / "lesions.csv").string(), "--seed", "9", "--repeats", "2",
                        "--epochs", "2", "--grid-lr", "0.01", "--grid-hidden", "4",
                        "--grid-gamma", "1", "--grid-dropout", "0.2", "--out",
                        (root / "run").string()});
  if (code != 0) return {false, "gridsearch over every variant failed"};
  const EvalReport rep = read_report_csv(root / "run/report.csv");
  bool finite = rep.selected.size() == 16;
  for (const auto& r : rep.selected) finite = finite && std::isfinite(r.test_auc);
  return {finite, fmt::format("all 8 variants trained on single-lesion and duplicated-lesion "
                              "patients with constant columns; {} finite results",
                              rep.selected.size())};
}

}  // namespace

// `--only N` (repeatable) restricts the run to the listed criteria.
int main(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; i += 2) {
    if (std::string(argv[i]) == "--only") selected.push_back(std::atoi(argv[i + 1]));
  }
  check(1, "gradient correctness", gradients);
  check(2, "attention normalization", attention_rows);
  check(3, "permutation invariance", permutation);
  check(4, "edge-weight kernel", edge_kernel);
  check(5, "ROC AUC oracle", auc_oracle);
  check(6, "Welch t-test", welch);
  check(7, "synthetic ordering", table_one);
  check(8, "determinism", determinism);
  check(9, "degenerate inputs", degenerate);
  fmt::print("{} of {} criteria failed\n", failures, selected.empty() ? 9 : selected.size());
  return failures == 0 ? 0 : 1;
}
