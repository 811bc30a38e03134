// SPDX-License-Identifier: Apache-2.0
#include "lesiongraph/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include "lesiongraph/errors.hpp"
#include "lesiongraph/io.hpp"

namespace lesiongraph {

namespace {

using nlohmann::json;

json scaler_json(const RobustScaler& s) {
  return {{"kind", s.kind == FeatureKind::kClinical ? "clinical" : "imaging"},
          {"median", s.median},
          {"iqr", s.iqr}};
}

RobustScaler parse_scaler(const json& j) {
  RobustScaler s;
  s.kind = j.at("kind").get<std::string>() == "clinical" ? FeatureKind::kClinical
                                                         : FeatureKind::kImaging;
  j.at("median").get_to(s.median);
  j.at("iqr").get_to(s.iqr);
  if (s.median.size() != s.iqr.size()) throw SchemaError("checkpoint: scaler length mismatch");
  s.fitted = true;
  return s;
}

}  // namespace

std::string checkpoint_json(const Checkpoint& ckpt) {
  json params = json::object();
  for (const auto& [name, m] : ckpt.params) {
    const auto values = m.data();
    params[name] = {{"rows", m.rows()},
                    {"cols", m.cols()},
                    {"values", std::vector<double>(values.begin(), values.end())}};
  }
  const json j = {
      {"format", "lesiongraph-checkpoint-1"},
      {"artifact", artifact_tag(ckpt.seed, ckpt.config)},
      {"variant", std::string(variant_tag(ckpt.variant))},
      {"hyper",
       {{"lr", ckpt.hyper.lr},
        {"hidden", ckpt.hyper.hidden},
        {"gamma", ckpt.hyper.gamma},
        {"dropout", ckpt.hyper.dropout}}},
      {"seed", ckpt.seed},
      {"config", ckpt.config},
      {"clinical_scaler", scaler_json(ckpt.clinical_scaler)},
      {"imaging_scaler", scaler_json(ckpt.imaging_scaler)},
      {"stats",
       {{"sigma_centroid", ckpt.stats.sigma_centroid},
        {"sigma_feature", ckpt.stats.sigma_feature},
        {"gamma", ckpt.stats.gamma},
        {"pair_count", ckpt.stats.pair_count}}},
      {"params", params}};
  return j.dump(1);
}

Checkpoint parse_checkpoint(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "lesiongraph-checkpoint-1") {
      throw SchemaError("checkpoint: unknown format");
    }
    Checkpoint c;
    c.variant = parse_variant(j.at("variant").get<std::string>());
    const json& h = j.at("hyper");
    h.at("lr").get_to(c.hyper.lr);
    h.at("hidden").get_to(c.hyper.hidden);
    h.at("gamma").get_to(c.hyper.gamma);
    h.at("dropout").get_to(c.hyper.dropout);
    j.at("seed").get_to(c.seed);
    j.at("config").get_to(c.config);
    c.clinical_scaler = parse_scaler(j.at("clinical_scaler"));
    c.imaging_scaler = parse_scaler(j.at("imaging_scaler"));
    const json& s = j.at("stats");
    s.at("sigma_centroid").get_to(c.stats.sigma_centroid);
    s.at("sigma_feature").get_to(c.stats.sigma_feature);
    s.at("gamma").get_to(c.stats.gamma);
    s.at("pair_count").get_to(c.stats.pair_count);
    for (const auto& [name, m] : j.at("params").items()) {
      const auto rows = m.at("rows").get<std::size_t>();
      const auto cols = m.at("cols").get<std::size_t>();
      auto values = m.at("values").get<std::vector<double>>();
      if (values.size() != rows * cols) {
        throw SchemaError("checkpoint: parameter '" + name + "' has the wrong size");
      }
      c.params.emplace(name, Matrix(rows, cols, std::move(values)));
    }
    return c;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_text_file(path, checkpoint_json(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_text_file(path));
}

}  // namespace lesiongraph
