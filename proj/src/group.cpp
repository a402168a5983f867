#include "cospadi/group.hpp"

#include <chrono>

#include "cospadi/error.hpp"

namespace cospadi {

void LayerGroup::validate() const {
  if (weights.empty()) throw GroupShapeError("group '" + id + "' has no members");
  if (calibration.size() != weights.size() || (!names.empty() && names.size() != weights.size()))
    throw GroupShapeError("group '" + id + "': member, weight and calibration counts differ");
  const auto& w0 = weights.front();
  const auto& x0 = calibration.front();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const auto& w = weights[i];
    const auto& x = calibration[i];
    const std::string who = names.empty() ? std::to_string(i) : names[i];
    if (w.rows() != w0.rows() || w.cols() != w0.cols()) {
      throw GroupShapeError("group '" + id + "': member '" + who + "' is " +
                            std::to_string(w.rows()) + "x" + std::to_string(w.cols()) +
                            ", expected " + std::to_string(w0.rows()) + "x" +
                            std::to_string(w0.cols()));
    }
    if (x.rows() != x0.rows() || x.cols() != x0.cols() || x.cols() != w.rows()) {
      throw GroupShapeError("group '" + id + "': calibration of member '" + who +
                            "' is " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                            ", expected " + std::to_string(x0.rows()) + "x" +
                            std::to_string(w0.rows()));
    }
  }
}

CompressedFactorization GroupResult::layer(std::size_t i) const {
  CompressedFactorization out;
  out.dictionary = combined.dictionary;
  out.codes = slices.at(i);
  out.plan = combined.plan;
  out.plan.d2 = out.codes.cols();
  out.report = combined.report;
  return out;
}

GroupResult compress_group(const LayerGroup& group, const SizingPlan& plan,
                           const CompressOptions& options) {
  group.validate();
  const std::size_t g = group.group_size();
  const std::size_t d2 = group.weights.front().cols();
  if (plan.d2 != d2 * g || plan.d1 != group.weights.front().rows()) {
    throw ShapeError("compress_group: plan sized for " + std::to_string(plan.d1) + "x" +
                     std::to_string(plan.d2) + ", group concatenates to " +
                     std::to_string(group.weights.front().rows()) + "x" + std::to_string(d2 * g));
  }

  const auto start = std::chrono::steady_clock::now();
  GroupResult out;
  if (g == 1) {
    out.combined = compress_layer(group.weights.front(), group.calibration.front(), plan, options);
  } else {
    out.combined = compress_layer(hconcat(group.weights), vstack(group.calibration), plan, options);
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  for (std::size_t i = 0; i < g; ++i) {
    out.slices.push_back(out.combined.codes.slice_columns(i * d2, d2));
    const std::string name = group.names.empty() ? group.id + "." + std::to_string(i) : group.names[i];
    out.rows.push_back(evaluate_sparse(name, "cospadi", group.weights[i], group.calibration[i],
                                       out.combined.dictionary, out.slices.back(), plan,
                                       out.combined.report.iterations_run, seconds));
  }
  return out;
}

}  // namespace cospadi
