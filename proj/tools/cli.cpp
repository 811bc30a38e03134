// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <optional>
#include <ostream>

#include "lesiongraph/attention.hpp"
#include "lesiongraph/checkpoint.hpp"
#include "lesiongraph/errors.hpp"
#include "lesiongraph/gradcheck.hpp"
#include "lesiongraph/io.hpp"
#include "lesiongraph/log.hpp"
#include "lesiongraph/metrics.hpp"
#include "lesiongraph/protocol.hpp"
#include "lesiongraph/synth.hpp"

namespace lesiongraph::cli {

namespace fs = std::filesystem;

namespace {

struct CohortArgs {
  std::string clinical;
  std::string lesions;

  // Content hashes rather than paths, so a moved copy tags identically.
  std::string fingerprint() const {
    return fmt::format("clinical={:016x} lesions={:016x}", fnv1a(read_text_file(clinical)),
                       fnv1a(read_text_file(lesions)));
  }
};

void add_cohort_flags(CLI::App* cmd, CohortArgs& a) {
  cmd->add_option("--clinical", a.clinical, "clinical CSV (patient_id,label,c0..)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--lesions", a.lesions, "lesion CSV (patient_id,lesion_id,px,py,pz,f0..)")
      ->required()
      ->check(CLI::ExistingFile);
}

fs::path prepare_out(const std::string& out) {
  const fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

struct GenArgs {
  SynthConfig config;
  std::string config_file;
  std::string out = ".";
};

int run_gen(const GenArgs& a, CLI::App* cmd, std::ostream& out) {
  SynthConfig config = a.config_file.empty() ? SynthConfig{} : SynthConfig::load(a.config_file);
  // Explicit flags override the file.
  auto set = [&](const char* flag, auto member) {
    if (cmd->count(flag) > 0) config.*member = a.config.*member;
  };
  set("--seed", &SynthConfig::seed);
  set("--n-patients", &SynthConfig::n_patients);
  set("--positive-ratio", &SynthConfig::positive_ratio);
  set("--min-lesions", &SynthConfig::min_lesions);
  set("--max-lesions", &SynthConfig::max_lesions);
  set("--features", &SynthConfig::feature_dim);
  set("--clinical-dim", &SynthConfig::clinical_dim);
  set("--informative-features", &SynthConfig::informative_features);
  set("--clinical-strength", &SynthConfig::clinical_strength);
  set("--imaging-strength", &SynthConfig::imaging_strength);
  set("--interaction-strength", &SynthConfig::interaction_strength);
  set("--noise", &SynthConfig::noise);

  const Cohort cohort = generate(config);
  const fs::path dir = prepare_out(a.out);
  const std::string json = config.to_json();
  const std::string tag = artifact_tag(config.seed, json);
  write_cohort(cohort, dir / "clinical.csv", dir / "lesions.csv", tag);
  write_text_file(dir / "synth_config.json", json + "\n");
  fmt::print(out, "generated {} patients ({} positive) into {}\n", cohort.size(),
             cohort.positives(), dir.string());
  return 0;
}

struct TrainArgs {
  CohortArgs cohort;
  std::string variant = "cross-attention";
  std::uint64_t seed = 0;
  std::size_t epochs = 100;
  std::size_t repeat = 0;
  HyperParams hyper;
  std::string out = ".";
};

int run_train(const TrainArgs& a, std::ostream& out) {
  const Variant variant = parse_variant(a.variant);
  const Cohort cohort = load_cohort(a.cohort.clinical, a.cohort.lesions);
  const SplitPlan plan = make_splits(cohort.labels(), a.seed, a.repeat + 1);
  const auto& rep = plan.repeats.at(a.repeat);
  const PreparedRepeat prep = prepare_repeat(cohort, rep.train);
  const PopulationStats stats = prep.stats.with_gamma(a.hyper.gamma);
  const auto inputs = make_inputs(prep.standardized, stats);
  auto pick = [&](std::span<const std::size_t> idx) {
    std::vector<PatientInput> v;
    for (auto i : idx) v.push_back(inputs[i]);
    return v;
  };
  const auto train_set = pick(rep.train);
  const auto val_set = pick(rep.validation);
  const auto test_set = pick(plan.test);

  TrainOptions opt;
  opt.epochs = a.epochs;
  opt.seed = a.seed;
  opt.repeat = a.repeat;
  const TrainResult result = train(variant, train_set, val_set, a.hyper, opt);

  std::vector<int> test_labels;
  for (const auto& p : test_set) test_labels.push_back(p.label);
  Rng subset_rng = make_rng(a.seed, "test-subsets", {a.repeat});
  const auto subsets = balanced_subsets(test_labels, opt.subsets, subset_rng);
  const double test_auc =
      balanced_auc(predict_all(variant, result.best_params, test_set), test_labels, subsets);

  const std::string config =
      fmt::format("train variant={} lr={} hidden={} gamma={} dropout={} epochs={} repeat={} {}",
                  a.variant, a.hyper.lr, a.hyper.hidden, a.hyper.gamma, a.hyper.dropout,
                  a.epochs, a.repeat, a.cohort.fingerprint());
  const std::string tag = artifact_tag(a.seed, config);
  const fs::path dir = prepare_out(a.out);

  Checkpoint ckpt{variant,           a.hyper,           a.seed, config,
                  prep.clinical_scaler, prep.imaging_scaler, stats,  result.best_params};
  save_checkpoint(ckpt, dir / "checkpoint.json");

  fmt::memory_buffer csv;
  fmt::format_to(std::back_inserter(csv), "# {}\n", tag);
  fmt::format_to(std::back_inserter(csv), "epoch,train_loss,val_auc\n");
  for (const auto& m : result.history) {
    fmt::format_to(std::back_inserter(csv), "{},{},{}\n", m.epoch, m.train_loss, m.val_auc);
  }
  write_text_file(dir / "metrics.csv", std::string_view(csv.data(), csv.size()));
  fmt::print(out, "{}: best epoch {} val_auc {:.4f} test_auc {:.4f}\n", a.variant,
             result.best_epoch, result.best_val_auc, test_auc);
  return 0;
}

struct GridArgs {
  CohortArgs cohort;
  std::vector<std::string> variants;
  std::uint64_t seed = 0;
  ProtocolOptions options;
  GridSpec grid;
  std::string out = ".";
};

int run_gridsearch(GridArgs a, std::ostream& out) {
  std::vector<Variant> variants;
  if (a.variants.empty()) {
    variants.assign(kAllVariants.begin(), kAllVariants.end());
  } else {
    for (const auto& tag : a.variants) variants.push_back(parse_variant(tag));
  }
  a.options.seed = a.seed;
  const Cohort cohort = load_cohort(a.cohort.clinical, a.cohort.lesions);
  const SplitPlan plan = make_splits(cohort.labels(), a.seed, a.options.repeats);

  std::vector<std::string> tags;
  for (Variant v : variants) tags.emplace_back(variant_tag(v));
  const std::string config = fmt::format(
      "gridsearch variants={} {} epochs={} repeats={} subsets={} {}", fmt::join(tags, "/"),
      a.grid.describe(), a.options.epochs, a.options.repeats, a.options.subsets,
      a.cohort.fingerprint());
  const std::string tag = artifact_tag(a.seed, config);
  spdlog::info("gridsearch: {} patients, {} workers, {}", cohort.size(), a.options.workers,
               config);

  const EvalReport report = grid_search(variants, cohort, plan, a.grid, a.options);
  const fs::path dir = prepare_out(a.out);
  write_text_file(dir / "report.csv", report_csv(report.selected, tag));
  write_text_file(dir / "grid.csv", report_csv(report.all, tag));
  const auto summary = summarize(report);
  write_text_file(dir / "summary.csv", summary_csv(summary, tag));
  for (const auto& row : summary) {
    fmt::print(out, "{:<30} test AUC {:.3f} +/- {:.3f}\n", row.variant, row.mean_test_auc,
               row.std_test_auc);
  }
  return 0;
}

int run_compare(const std::string& in, const std::string& out_dir, std::ostream& out) {
  fs::path report_path(in);
  if (fs::is_directory(report_path)) report_path /= "report.csv";
  if (!fs::exists(report_path)) throw IngestionError("no report at " + report_path.string());
  const std::string text = read_text_file(report_path);
  // Carry the gridsearch tag forward.
  std::string tag;
  if (text.rfind("# ", 0) == 0) tag = text.substr(2, text.find('\n') - 2);
  const auto summary = summarize(read_report_csv(report_path));
  const fs::path dir = out_dir.empty() ? report_path.parent_path() : prepare_out(out_dir);
  write_text_file(dir / "summary.csv", summary_csv(summary, tag));
  fmt::print(out, "{:<30} {:>7} {:>7} {:>10}\n", "variant", "mean", "std", "p(vs xatt)");
  for (const auto& row : summary) {
    fmt::print(out, "{:<30} {:>7.3f} {:>7.3f} {:>10}\n", row.variant, row.mean_test_auc,
               row.std_test_auc, row.p_value ? fmt::format("{:.3g}", *row.p_value) : "-");
  }
  return 0;
}

struct ExportArgs {
  CohortArgs cohort;
  std::string checkpoint;
  std::string out = ".";
};

int run_export(const ExportArgs& a, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const Cohort cohort = load_cohort(a.cohort.clinical, a.cohort.lesions);
  const Cohort standardized = standardize(cohort, ckpt.clinical_scaler, ckpt.imaging_scaler);
  const auto inputs = make_inputs(standardized, ckpt.stats);
  const std::string config = fmt::format("export-attention checkpoint={:016x} {}",
                                         fnv1a(read_text_file(a.checkpoint)),
                                         a.cohort.fingerprint());
  const fs::path dir = prepare_out(a.out);
  write_text_file(dir / "attention.csv",
                  attention_csv(ckpt.variant, ckpt.params, inputs, artifact_tag(ckpt.seed, config)));
  fmt::print(out, "attention of {} patients written to {}\n", inputs.size(),
             (dir / "attention.csv").string());
  return 0;
}

struct GradArgs {
  GradCheckDims dims;
  std::uint64_t seed = 0;
  double h = 1e-5;
  double tol = 1e-4;
  std::string out;
};

int run_check_grad(const GradArgs& a, std::ostream& out) {
  const auto cases = run_gradient_checks(a.dims, a.seed, a.h, a.tol);
  bool ok = true;
  for (const auto& c : cases) {
    ok = ok && c.report.all_passed();
    std::size_t failing = 0;
    double noise = 0.0;
    for (const auto& e : c.report.entries) {
      failing += e.failing;
      noise = std::max(noise, e.failing_abs_diff);
    }
    fmt::print(out, "{:<48} {} max rel error {:.2e}", c.name,
               c.report.all_passed() ? "pass" : "FAIL", c.report.max_rel_error());
    if (failing > 0) fmt::print(out, " ({} entries, largest |a-b| {:.1e})", failing, noise);
    fmt::print(out, "\n");
  }
  if (!a.out.empty()) {
    const std::string config = fmt::format("check-grad L={} F={} C={} H={} h={} tol={}",
                                           a.dims.lesions, a.dims.features, a.dims.clinical,
                                           a.dims.hidden, a.h, a.tol);
    write_text_file(prepare_out(a.out) / "gradcheck.csv",
                    gradcheck_csv(cases, artifact_tag(a.seed, config)));
  }
  fmt::print(out, "{}\n", ok ? "all gradient checks passed" : "gradient check FAILED");
  return ok ? 0 : 1;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  init_logging();
  CLI::App app{"Multi-lesion graph classifier: synthetic data, training and evaluation"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "write a synthetic cohort");
  gen_cmd->add_option("--seed", gen.config.seed, "random seed")->required();
  gen_cmd->add_option("--config", gen.config_file, "synth config JSON")->check(CLI::ExistingFile);
  gen_cmd->add_option("--n-patients", gen.config.n_patients);
  gen_cmd->add_option("--positive-ratio", gen.config.positive_ratio);
  gen_cmd->add_option("--min-lesions", gen.config.min_lesions);
  gen_cmd->add_option("--max-lesions", gen.config.max_lesions);
  gen_cmd->add_option("--features", gen.config.feature_dim);
  gen_cmd->add_option("--clinical-dim", gen.config.clinical_dim);
  gen_cmd->add_option("--informative-features", gen.config.informative_features);
  gen_cmd->add_option("--clinical-strength", gen.config.clinical_strength);
  gen_cmd->add_option("--imaging-strength", gen.config.imaging_strength);
  gen_cmd->add_option("--interaction-strength", gen.config.interaction_strength);
  gen_cmd->add_option("--noise", gen.config.noise);
  gen_cmd->add_option("--out", gen.out, "output directory");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "train one configuration on one split");
  add_cohort_flags(train_cmd, tr.cohort);
  train_cmd->add_option("--variant", tr.variant);
  train_cmd->add_option("--seed", tr.seed)->required();
  train_cmd->add_option("--epochs", tr.epochs);
  train_cmd->add_option("--repeat", tr.repeat, "which train/validation reshuffle");
  train_cmd->add_option("--lr", tr.hyper.lr);
  train_cmd->add_option("--hidden", tr.hyper.hidden);
  train_cmd->add_option("--gamma", tr.hyper.gamma);
  train_cmd->add_option("--dropout", tr.hyper.dropout);
  train_cmd->add_option("--out", tr.out);

  GridArgs gs;
  auto* grid_cmd = app.add_subcommand("gridsearch", "repeated grid search over variants");
  add_cohort_flags(grid_cmd, gs.cohort);
  grid_cmd->add_option("--variant", gs.variants, "variant tag (repeatable; default all)");
  grid_cmd->add_option("--seed", gs.seed)->required();
  grid_cmd->add_option("--epochs", gs.options.epochs);
  grid_cmd->add_option("--repeats", gs.options.repeats);
  grid_cmd->add_option("--grid-lr", gs.grid.lr)->delimiter(',');
  grid_cmd->add_option("--grid-hidden", gs.grid.hidden)->delimiter(',');
  grid_cmd->add_option("--grid-gamma", gs.grid.gamma)->delimiter(',');
  grid_cmd->add_option("--grid-dropout", gs.grid.dropout)->delimiter(',');
  grid_cmd->add_option("--workers", gs.options.workers)->check(CLI::PositiveNumber);
  grid_cmd->add_option("--out", gs.out);

  std::string compare_in;
  std::string compare_out;
  auto* compare_cmd = app.add_subcommand("compare", "summarize a gridsearch report");
  compare_cmd->add_option("--in", compare_in, "gridsearch output directory or report.csv")
      ->required()
      ->check(CLI::ExistingPath);
  compare_cmd->add_option("--out", compare_out, "defaults to the report's directory");

  ExportArgs ex;
  auto* export_cmd = app.add_subcommand("export-attention", "dump attention maps per patient");
  add_cohort_flags(export_cmd, ex.cohort);
  export_cmd->add_option("--checkpoint", ex.checkpoint)->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--out", ex.out);

  GradArgs gc;
  auto* grad_cmd = app.add_subcommand("check-grad", "finite-difference gradient checks");
  grad_cmd->add_option("--seed", gc.seed);
  grad_cmd->add_option("--num-lesions", gc.dims.lesions);
  grad_cmd->add_option("--features", gc.dims.features);
  grad_cmd->add_option("--clinical-dim", gc.dims.clinical);
  grad_cmd->add_option("--hidden", gc.dims.hidden);
  grad_cmd->add_option("--step", gc.h);
  grad_cmd->add_option("--tol", gc.tol);
  grad_cmd->add_option("--out", gc.out);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (gen_cmd->parsed()) return run_gen(gen, gen_cmd, out);
    if (train_cmd->parsed()) return run_train(tr, out);
    if (grid_cmd->parsed()) return run_gridsearch(gs, out);
    if (compare_cmd->parsed()) return run_compare(compare_in, compare_out, out);
    if (export_cmd->parsed()) return run_export(ex, out);
    if (grad_cmd->parsed()) return run_check_grad(gc, out);
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return 1;
  }
  return 2;
}

}  // namespace lesiongraph::cli
