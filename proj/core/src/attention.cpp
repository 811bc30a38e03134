// SPDX-License-Identifier: Apache-2.0
#include "lesiongraph/attention.hpp"

#include <fmt/format.h>

namespace lesiongraph {

std::string attention_csv(Variant v, const ModelParams& params,
                          std::span<const PatientInput> patients, const std::string& tag) {
  fmt::memory_buffer out;
  if (!tag.empty()) fmt::format_to(std::back_inserter(out), "# {}\n", tag);
  fmt::format_to(std::back_inserter(out), "patient_id,block,kind,row,col,attention\n");
  diff::Graph g;
  for (const auto& x : patients) {
    g.clear();
    const auto bound = diff::bind_params(g, params, false);
    const ForwardTrace trace = build_forward(g, v, bound, x, {});
    g.forward(trace.prob);
    // Rows come back in input lesion order; GAT columns are lesions too.
    const std::size_t n = x.lesion_count();
    std::vector<std::size_t> position(n);
    for (std::size_t k = 0; k < n; ++k) {
      position[trace.lesion_order.empty() ? k : trace.lesion_order[k]] = k;
    }
    auto dump = [&](const std::vector<diff::NodeId>& maps, std::string_view kind,
                    bool lesion_cols) {
      for (std::size_t b = 0; b < maps.size(); ++b) {
        const Matrix& a = g.value(maps[b]);
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t c = 0; c < a.cols(); ++c) {
            const double value = a(position[r], lesion_cols ? position[c] : c);
            fmt::format_to(std::back_inserter(out), "{},{},{},{},{},{}\n", x.patient_id, b + 1,
                           kind, r, c, value);
          }
        }
      }
    };
    dump(trace.gat_attention, "gat", true);
    dump(trace.cross_attention, "cross", false);
  }
  return {out.data(), out.size()};
}

}  // namespace lesiongraph
