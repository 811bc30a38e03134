// SPDX-License-Identifier: Apache-2.0
#include "lesiongraph/synth.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <random>

#include "lesiongraph/errors.hpp"
#include "lesiongraph/io.hpp"
#include "lesiongraph/rng.hpp"

namespace lesiongraph {

namespace {

using nlohmann::json;

void standardize_in_place(std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  const double sd = std::sqrt(ss / static_cast<double>(xs.size()));
  for (double& x : xs) x = sd > 0.0 ? (x - m) / sd : 0.0;
}

std::size_t count_above(const std::vector<double>& xs, double tau) {
  return static_cast<std::size_t>(
      std::count_if(xs.begin(), xs.end(), [tau](double x) { return x > tau; }));
}

}  // namespace

void SynthConfig::validate() const {
  if (n_patients < 2) throw ContractError("synth: need at least two patients");
  if (!(positive_ratio > 0.0 && positive_ratio < 1.0)) {
    throw ContractError(fmt::format("synth: positive_ratio {} outside (0, 1)", positive_ratio));
  }
  if (min_lesions == 0 || min_lesions > max_lesions) {
    throw ContractError(
        fmt::format("synth: lesion range [{}, {}] is invalid", min_lesions, max_lesions));
  }
  if (feature_dim == 0 || clinical_dim == 0) throw ContractError("synth: zero dimension");
  if (informative_features > feature_dim) {
    throw ContractError("synth: more informative features than features");
  }
  for (double v : {noise, lesion_jitter, feature_noise}) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ContractError("synth: noise levels must be finite and non-negative");
    }
  }
  if (!(cube_mm > 0.0)) throw ContractError("synth: cube size must be positive");
}

std::string SynthConfig::to_json() const {
  const json j = {{"n_patients", n_patients},
                  {"positive_ratio", positive_ratio},
                  {"min_lesions", min_lesions},
                  {"max_lesions", max_lesions},
                  {"feature_dim", feature_dim},
                  {"clinical_dim", clinical_dim},
                  {"informative_features", informative_features},
                  {"clinical_strength", clinical_strength},
                  {"imaging_strength", imaging_strength},
                  {"interaction_strength", interaction_strength},
                  {"noise", noise},
                  {"lesion_jitter", lesion_jitter},
                  {"feature_noise", feature_noise},
                  {"cube_mm", cube_mm},
                  {"seed", seed}};
  return j.dump();
}

SynthConfig SynthConfig::from_json(const std::string& text) {
  SynthConfig c;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("synth config: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("synth config: expected a JSON object");
  auto take = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const json::exception& e) {
      throw SchemaError(fmt::format("synth config: field '{}': {}", key, e.what()));
    }
  };
  for (const auto& [key, _] : j.items()) {
    static const char* known[] = {"n_patients",        "positive_ratio",   "min_lesions",
                                  "max_lesions",       "feature_dim",      "clinical_dim",
                                  "informative_features", "clinical_strength", "imaging_strength",
                                  "interaction_strength", "noise",         "lesion_jitter",
                                  "feature_noise",     "cube_mm",          "seed"};
    if (std::find_if(std::begin(known), std::end(known),
                     [&](const char* k) { return key == k; }) == std::end(known)) {
      throw SchemaError("synth config: unknown field '" + key + "'");
    }
  }
  take("n_patients", c.n_patients);
  take("positive_ratio", c.positive_ratio);
  take("min_lesions", c.min_lesions);
  take("max_lesions", c.max_lesions);
  take("feature_dim", c.feature_dim);
  take("clinical_dim", c.clinical_dim);
  take("informative_features", c.informative_features);
  take("clinical_strength", c.clinical_strength);
  take("imaging_strength", c.imaging_strength);
  take("interaction_strength", c.interaction_strength);
  take("noise", c.noise);
  take("lesion_jitter", c.lesion_jitter);
  take("feature_noise", c.feature_noise);
  take("cube_mm", c.cube_mm);
  take("seed", c.seed);
  c.validate();
  return c;
}

SynthConfig SynthConfig::load(const std::filesystem::path& path) {
  return from_json(read_text_file(path));
}

SynthResult generate_with_truth(const SynthConfig& config) {
  config.validate();
  const std::size_t n = config.n_patients;
  std::vector<PatientRecord> patients(n);
  std::vector<double> clin_mean(n);
  std::vector<double> clin_max(n);
  std::vector<double> img_max(n);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> position(0.0, config.cube_mm);

  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = make_rng(config.seed, "synth-patient", {i});
    PatientRecord& p = patients[i];
    p.id = fmt::format("P{:04d}", i);
    p.clinical.resize(config.clinical_dim);
    for (double& v : p.clinical) v = gauss(rng);
    double sum = 0.0;
    for (double v : p.clinical) sum += v;
    clin_mean[i] = sum / static_cast<double>(config.clinical_dim);
    clin_max[i] = *std::max_element(p.clinical.begin(), p.clinical.end());

    // The first two patients pin both ends of the lesion-count range.
    std::size_t count;
    if (i == 0) {
      count = config.min_lesions;
    } else if (i == 1) {
      count = config.max_lesions;
    } else {
      count = std::uniform_int_distribution<std::size_t>(config.min_lesions,
                                                         config.max_lesions)(rng);
    }
    const double u = gauss(rng);
    double best = -INFINITY;
    for (std::size_t l = 0; l < count; ++l) {
      Lesion lesion;
      lesion.id = fmt::format("L{:02d}", l);
      for (double& x : lesion.centroid) x = position(rng);
      const double a = u + config.lesion_jitter * gauss(rng);
      best = std::max(best, a);
      lesion.features.resize(config.feature_dim);
      for (std::size_t f = 0; f < config.feature_dim; ++f) {
        lesion.features[f] = f < config.informative_features
                                 ? a + config.feature_noise * gauss(rng)
                                 : gauss(rng);
      }
      p.lesions.push_back(std::move(lesion));
    }
    img_max[i] = best;
  }

  standardize_in_place(clin_mean);
  standardize_in_place(clin_max);
  standardize_in_place(img_max);

  SynthTruth truth;
  truth.clinical_score = clin_mean;
  truth.imaging_score = img_max;
  truth.gate = clin_max;
  truth.logit.resize(n);
  std::vector<double> noisy(n);
  Rng noise_rng = make_rng(config.seed, "synth-label-noise");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    truth.logit[i] = config.clinical_strength * clin_mean[i] +
                     config.imaging_strength * img_max[i] +
                     config.interaction_strength * clin_max[i] * std::max(0.0, img_max[i]);
    // Logistic draw by inversion; open interval keeps the log finite.
    const double q = std::clamp(unit(noise_rng), 1e-12, 1.0 - 1e-12);
    noisy[i] = truth.logit[i] + config.noise * std::log(q / (1.0 - q));
  }

  // Bisection on the threshold over the realized cohort.
  const auto target = static_cast<std::size_t>(
      std::llround(config.positive_ratio * static_cast<double>(n)));
  double lo = *std::min_element(noisy.begin(), noisy.end()) - 1.0;
  double hi = *std::max_element(noisy.begin(), noisy.end()) + 1.0;
  double tau = hi;
  std::size_t positives = 0;
  for (int iter = 0; iter < 200; ++iter) {
    tau = 0.5 * (lo + hi);
    positives = count_above(noisy, tau);
    if (positives == target) break;
    (positives > target ? lo : hi) = tau;
  }
  const double achieved = static_cast<double>(positives) / static_cast<double>(n);
  if (positives == 0 || positives == n || std::abs(achieved - config.positive_ratio) > 0.02) {
    throw GenerationError(fmt::format(
        "synth: threshold search reached {} positives of {} (target ratio {}), ties in the "
        "label score prevent calibration",
        positives, n, config.positive_ratio));
  }
  truth.threshold = tau;
  for (std::size_t i = 0; i < n; ++i) patients[i].label = noisy[i] > tau ? 1 : 0;
  return {Cohort(std::move(patients)), std::move(truth)};
}

Cohort generate(const SynthConfig& config) { return generate_with_truth(config).cohort; }

}  // namespace lesiongraph
