// SPDX-License-Identifier: Apache-2.0
#include "lesiongraph/protocol.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "lesiongraph/errors.hpp"
#include "lesiongraph/io.hpp"
#include "lesiongraph/metrics.hpp"

namespace lesiongraph {

namespace {

std::size_t stratum_count(std::size_t set_size, std::size_t positives, std::size_t total) {
  return static_cast<std::size_t>(
      std::llround(static_cast<double>(set_size) * static_cast<double>(positives) /
                   static_cast<double>(total)));
}

template <typename T>
std::vector<T> gather(const std::vector<T>& all, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(all[i]);
  return out;
}

std::string format_gamma(const GridResult& r) {
  return uses_graph(r.variant) ? fmt::format("{}", r.point.gamma) : std::string("NA");
}

}  // namespace

SplitPlan make_splits(std::span<const int> labels, std::uint64_t seed, std::size_t repeats) {
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(i);
  if (pos.size() < 2 || neg.size() < 2) {
    throw ProtocolError(fmt::format("cohort too small to split: {} positives, {} negatives",
                                    pos.size(), neg.size()));
  }
  const std::size_t n = labels.size();
  const auto held_out = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
  const std::size_t held_pos = stratum_count(held_out, pos.size(), n);
  const std::size_t held_neg = held_out - held_pos;
  // Test and validation each take held_pos / held_neg; training needs both classes left.
  if (held_pos == 0 || held_neg == 0 || 2 * held_pos >= pos.size() ||
      2 * held_neg >= neg.size()) {
    throw ProtocolError(fmt::format(
        "cohort too small to split: {} patients give {} held-out ({} positive) per set", n,
        held_out, held_pos));
  }

  SplitPlan plan;
  plan.seed = seed;
  Rng test_rng = make_rng(seed, "test-split");
  std::shuffle(pos.begin(), pos.end(), test_rng);
  std::shuffle(neg.begin(), neg.end(), test_rng);
  plan.test.assign(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(held_pos));
  plan.test.insert(plan.test.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(held_neg));
  std::sort(plan.test.begin(), plan.test.end());

  const std::vector<std::size_t> rest_pos(pos.begin() + static_cast<std::ptrdiff_t>(held_pos),
                                          pos.end());
  const std::vector<std::size_t> rest_neg(neg.begin() + static_cast<std::ptrdiff_t>(held_neg),
                                          neg.end());
  for (std::size_t r = 0; r < repeats; ++r) {
    Rng rng = make_rng(seed, "val-split", {r});
    auto rp = rest_pos;
    auto rn = rest_neg;
    std::shuffle(rp.begin(), rp.end(), rng);
    std::shuffle(rn.begin(), rn.end(), rng);
    SplitPlan::Repeat rep;
    rep.validation.assign(rp.begin(), rp.begin() + static_cast<std::ptrdiff_t>(held_pos));
    rep.validation.insert(rep.validation.end(), rn.begin(),
                          rn.begin() + static_cast<std::ptrdiff_t>(held_neg));
    rep.train.assign(rp.begin() + static_cast<std::ptrdiff_t>(held_pos), rp.end());
    rep.train.insert(rep.train.end(), rn.begin() + static_cast<std::ptrdiff_t>(held_neg), rn.end());
    std::sort(rep.validation.begin(), rep.validation.end());
    std::sort(rep.train.begin(), rep.train.end());
    plan.repeats.push_back(std::move(rep));
  }
  return plan;
}

std::vector<GridPoint> GridSpec::points(Variant v) const {
  if (lr.empty() || hidden.empty() || gamma.empty() || dropout.empty()) {
    throw ContractError("grid has an empty axis");
  }
  const std::size_t n_gamma = uses_graph(v) ? gamma.size() : 1;
  std::vector<GridPoint> out;
  for (double l : lr)
    for (std::size_t h : hidden)
      for (std::size_t g = 0; g < n_gamma; ++g)
        for (double d : dropout) out.push_back({l, h, gamma[g], d});
  return out;
}

std::string GridSpec::describe() const {
  return fmt::format("lr={} hidden={} gamma={} dropout={}", fmt::join(lr, "/"),
                     fmt::join(hidden, "/"), fmt::join(gamma, "/"), fmt::join(dropout, "/"));
}

std::vector<double> EvalReport::test_aucs(Variant v) const {
  std::vector<double> out;
  for (const auto& r : selected)
    if (r.variant == v) out.push_back(r.test_auc);
  return out;
}

PreparedRepeat prepare_repeat(const Cohort& cohort, std::span<const std::size_t> train) {
  PreparedRepeat prep;
  const Cohort train_raw = cohort.subset(train);
  prep.clinical_scaler = fit_scaler(train_raw.patients(), FeatureKind::kClinical);
  prep.imaging_scaler = fit_scaler(train_raw.patients(), FeatureKind::kImaging);
  prep.standardized = standardize(cohort, prep.clinical_scaler, prep.imaging_scaler);
  const Cohort train_std = prep.standardized.subset(train);
  prep.stats = population_stats(train_std.patients());
  return prep;
}

EvalReport grid_search(std::span<const Variant> variants, const Cohort& cohort,
                       const SplitPlan& plan, const GridSpec& grid,
                       const ProtocolOptions& options) {
  if (variants.empty()) throw ContractError("grid_search: no variants");
  const std::size_t repeats = std::min(options.repeats, plan.repeats.size());
  if (repeats == 0) throw ContractError("grid_search: no repeats");

  const bool any_graph =
      std::any_of(variants.begin(), variants.end(), [](Variant v) { return uses_graph(v); });
  const std::vector<double> gammas =
      any_graph ? grid.gamma : std::vector<double>{grid.gamma.at(0)};

  struct SplitInputs {
    std::vector<PatientInput> train, validation, test;
  };
  // inputs[repeat][gamma index]
  std::vector<std::vector<SplitInputs>> inputs(repeats);
  std::vector<std::vector<std::vector<std::size_t>>> test_subsets(repeats);
  const std::vector<int> all_labels = cohort.labels();
  const std::vector<int> test_labels = gather(all_labels, plan.test);
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto& rep = plan.repeats[r];
    const PreparedRepeat prep = prepare_repeat(cohort, rep.train);
    for (double gamma : gammas) {
      const auto all = make_inputs(prep.standardized, prep.stats.with_gamma(gamma));
      inputs[r].push_back({gather(all, rep.train), gather(all, rep.validation),
                           gather(all, plan.test)});
    }
    Rng rng = make_rng(options.seed, "test-subsets", {r});
    test_subsets[r] = balanced_subsets(test_labels, options.subsets, rng);
  }

  struct Job {
    Variant variant;
    std::size_t repeat;
    std::size_t grid_index;
    GridPoint point;
    std::size_t gamma_index;
  };
  std::vector<Job> jobs;
  for (Variant v : variants) {
    const auto points = grid.points(v);
    for (std::size_t r = 0; r < repeats; ++r) {
      for (std::size_t k = 0; k < points.size(); ++k) {
        const auto g_it = std::find(gammas.begin(), gammas.end(), points[k].gamma);
        jobs.push_back({v, r, k, points[k], static_cast<std::size_t>(g_it - gammas.begin())});
      }
    }
  }

  std::vector<GridResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    while (true) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      {
        std::lock_guard lock(failure_mutex);
        if (failure) return;
      }
      const Job& job = jobs[j];
      try {
        const SplitInputs& data = inputs[job.repeat][job.gamma_index];
        TrainOptions topt;
        topt.epochs = options.epochs;
        topt.subsets = options.subsets;
        topt.seed = options.seed;
        topt.repeat = job.repeat;
        topt.grid_index = job.grid_index;
        const TrainResult trained =
            train(job.variant, data.train, data.validation, job.point.hyper(), topt);
        const auto scores = predict_all(job.variant, trained.best_params, data.test);
        GridResult& out = results[j];
        out.variant = job.variant;
        out.repeat = job.repeat;
        out.grid_index = job.grid_index;
        out.point = job.point;
        out.val_auc = trained.best_val_auc;
        out.test_auc = balanced_auc(scores, test_labels, test_subsets[job.repeat]);
        out.best_epoch = trained.best_epoch;
        const std::size_t finished = done.fetch_add(1) + 1;
        spdlog::debug("[{}/{}] {} repeat {} grid {}: val {:.4f} test {:.4f}", finished, jobs.size(),
                      variant_tag(job.variant), job.repeat, job.grid_index, out.val_auc,
                      out.test_auc);
        if (finished % 50 == 0 || finished == jobs.size()) {
          spdlog::info("grid search: {}/{} trainings done", finished, jobs.size());
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  const std::size_t n_workers = std::max<std::size_t>(1, std::min(options.workers, jobs.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  EvalReport report;
  report.all = results;
  for (Variant v : variants) {
    for (std::size_t r = 0; r < repeats; ++r) {
      const GridResult* best = nullptr;
      for (const auto& res : results) {
        if (res.variant != v || res.repeat != r) continue;
        if (best == nullptr || res.val_auc > best->val_auc) best = &res;
      }
      report.selected.push_back(*best);
    }
  }
  return report;
}

std::vector<SummaryRow> summarize(const EvalReport& report) {
  std::vector<SummaryRow> out;
  const auto reference = report.test_aucs(Variant::kCrossAttention);
  for (Variant v : kAllVariants) {
    std::vector<double> test;
    std::vector<double> val;
    for (const auto& r : report.selected) {
      if (r.variant != v) continue;
      test.push_back(r.test_auc);
      val.push_back(r.val_auc);
    }
    if (test.empty()) continue;
    SummaryRow row;
    row.variant = std::string(variant_tag(v));
    row.repeats = test.size();
    row.mean_test_auc = mean(test);
    row.std_test_auc = sample_std(test);
    row.mean_val_auc = mean(val);
    if (v != Variant::kCrossAttention && !reference.empty()) {
      try {
        row.p_value = welch_ttest(reference, test).p_value;
      } catch (const ProtocolError&) {
        row.p_value.reset();
      }
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::string report_csv(std::span<const GridResult> rows, const std::string& tag) {
  fmt::memory_buffer out;
  if (!tag.empty()) fmt::format_to(std::back_inserter(out), "# {}\n", tag);
  fmt::format_to(std::back_inserter(out), "variant,repeat,lr,hidden,gamma,dropout,val_auc,test_auc\n");
  for (const auto& r : rows) {
    fmt::format_to(std::back_inserter(out), "{},{},{},{},{},{},{},{}\n", variant_tag(r.variant),
                   r.repeat, r.point.lr, r.point.hidden, format_gamma(r), r.point.dropout,
                   r.val_auc, r.test_auc);
  }
  return {out.data(), out.size()};
}

EvalReport read_report_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const std::size_t c_variant = table.column("variant");
  const std::size_t c_repeat = table.column("repeat");
  const std::size_t c_lr = table.column("lr");
  const std::size_t c_hidden = table.column("hidden");
  const std::size_t c_gamma = table.column("gamma");
  const std::size_t c_dropout = table.column("dropout");
  const std::size_t c_val = table.column("val_auc");
  const std::size_t c_test = table.column("test_auc");
  EvalReport report;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::string where = fmt::format("{}:{}", path.string(), table.line_numbers[i]);
    GridResult r;
    try {
      r.variant = parse_variant(row[c_variant]);
    } catch (const std::invalid_argument& e) {
      throw SchemaError(where + ": " + e.what());
    }
    r.repeat = static_cast<std::size_t>(parse_int(row[c_repeat], where));
    r.point.lr = parse_double(row[c_lr], where);
    r.point.hidden = static_cast<std::size_t>(parse_int(row[c_hidden], where));
    r.point.gamma = row[c_gamma] == "NA" ? 0.0 : parse_double(row[c_gamma], where);
    r.point.dropout = parse_double(row[c_dropout], where);
    r.val_auc = parse_double(row[c_val], where);
    r.test_auc = parse_double(row[c_test], where);
    report.selected.push_back(r);
  }
  return report;
}

std::string summary_csv(std::span<const SummaryRow> rows, const std::string& tag) {
  fmt::memory_buffer out;
  if (!tag.empty()) fmt::format_to(std::back_inserter(out), "# {}\n", tag);
  fmt::format_to(std::back_inserter(out),
                 "variant,repeats,mean_test_auc,std_test_auc,mean_val_auc,"
                 "p_value_vs_cross_attention\n");
  for (const auto& r : rows) {
    fmt::format_to(std::back_inserter(out), "{},{},{:.6f},{:.6f},{:.6f},{}\n", r.variant,
                   r.repeats, r.mean_test_auc, r.std_test_auc, r.mean_val_auc,
                   r.p_value ? fmt::format("{:.6g}", *r.p_value) : std::string("NA"));
  }
  return {out.data(), out.size()};
}

}  // namespace lesiongraph
