#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "uecg/nn/rng.hpp"
#include "uecg/nn/tensor.hpp"

namespace uecg::nn {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> per_param;
  double max_rel_err = 0.0;
  bool pass = false;
  double tolerance = 0.0;
};

// Central-difference check of the analytic gradients of `loss_fn` with respect
// to `params`. The loss closure must rebuild its graph on every call. At most
// `max_coords` coordinates per tensor are probed (sampled without
// replacement); probed values are restored bitwise. Relative error uses a
// small floor so coordinates whose true derivative is at noise level do not
// dominate the report.
template <typename S>
GradCheckReport grad_check(const std::function<Tensor<S>()>& loss_fn,
                           const std::vector<std::pair<std::string, Tensor<S>>>& params,
                           double h, double tolerance, std::size_t max_coords, Rng& rng) {
  if (params.empty()) throw ValidationError("grad_check: no parameters given");
  for (const auto& [name, p] : params)
    if (!p.requires_grad())
      throw ValidationError("grad_check: parameter '" + name + "' does not require grad");

  // Analytic pass.
  for (const auto& [name, p] : params) const_cast<Tensor<S>&>(p).zero_grad();
  Tensor<S> loss = loss_fn();
  if (!std::isfinite(static_cast<double>(loss.scalar())))
    throw NumericError("grad_check: loss is not finite");
  loss.backward();
  std::vector<std::vector<S>> analytic;
  analytic.reserve(params.size());
  for (const auto& [name, p] : params) analytic.push_back(p.g());

  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const auto& name = params[pi].first;
    auto& tensor = const_cast<Tensor<S>&>(params[pi].second);
    auto& vals = tensor.v();

    std::vector<std::size_t> coords(vals.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (coords.size() > max_coords) {
      // Partial Fisher-Yates: the first max_coords entries become the sample.
      for (std::size_t i = 0; i < max_coords; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(coords.size() - i));
        std::swap(coords[i], coords[j]);
      }
      coords.resize(max_coords);
    }

    GradCheckEntry entry{name, 0.0, coords.size()};
    for (const std::size_t ci : coords) {
      const S saved = vals[ci];
      vals[ci] = static_cast<S>(static_cast<double>(saved) + h);
      const double up = static_cast<double>(loss_fn().scalar());
      vals[ci] = static_cast<S>(static_cast<double>(saved) - h);
      const double down = static_cast<double>(loss_fn().scalar());
      vals[ci] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double an = static_cast<double>(analytic[pi][ci]);
      const double denom = std::max({std::fabs(an), std::fabs(numeric), 1e-4});
      const double rel = std::fabs(an - numeric) / denom;
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.per_param.push_back(std::move(entry));
  }
  report.pass = report.max_rel_err < tolerance;
  return report;
}

}  // namespace uecg::nn
