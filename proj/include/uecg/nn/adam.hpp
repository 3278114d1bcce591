#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "uecg/nn/tensor.hpp"

namespace uecg::nn {

// Adam with bias correction. A slot may carry a row mask (over the leading
// dimension); masked-out rows are skipped entirely, so their values and moment
// buffers stay bitwise untouched no matter what gradient arrived.
template <typename S>
class Adam {
 public:
  struct Hyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  explicit Adam(Hyper h = {}) : h_(h) {}

  void add_param(const std::string& name, Tensor<S> p) {
    add_param(name, std::move(p), {});
  }

  void add_param(const std::string& name, Tensor<S> p, std::vector<std::uint8_t> row_mask) {
    if (!p.requires_grad())
      throw TrainingError("adam: parameter '" + name + "' does not require grad");
    if (!row_mask.empty() && row_mask.size() != p.shape()[0])
      throw DimensionError("adam: mask length " + std::to_string(row_mask.size()) +
                           " for parameter '" + name + "' with leading dim " +
                           std::to_string(p.shape()[0]));
    const std::size_t sz = p.size();
    slots_.push_back(Slot{name, std::move(p), std::move(row_mask),
                          std::vector<S>(sz, S(0)), std::vector<S>(sz, S(0))});
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(h_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(h_.beta2, static_cast<double>(t_));
    for (auto& s : slots_) {
      auto& nd = s.param.node();
      if (nd.grad.size() != nd.value.size())
        throw TrainingError("adam: missing gradient for parameter '" + s.name + "'");
      const std::size_t rows = nd.shape.empty() ? 1 : nd.shape[0];
      const std::size_t row_len = nd.value.size() / (rows ? rows : 1);
      for (std::size_t r = 0; r < rows; ++r) {
        if (!s.row_mask.empty() && !s.row_mask[r]) continue;
        for (std::size_t j = 0; j < row_len; ++j) {
          const std::size_t i = r * row_len + j;
          const double g = static_cast<double>(nd.grad[i]);
          const double m = h_.beta1 * static_cast<double>(s.m[i]) + (1.0 - h_.beta1) * g;
          const double v = h_.beta2 * static_cast<double>(s.v[i]) + (1.0 - h_.beta2) * g * g;
          s.m[i] = static_cast<S>(m);
          s.v[i] = static_cast<S>(v);
          const double update = h_.lr * (m / c1) / (std::sqrt(v / c2) + h_.eps);
          nd.value[i] = static_cast<S>(static_cast<double>(nd.value[i]) - update);
        }
      }
    }
  }

  void zero_grad() {
    for (auto& s : slots_) s.param.zero_grad();
  }

  std::uint64_t step_count() const { return t_; }

  std::size_t param_count() const { return slots_.size(); }

  // Scalars actually subject to updates, i.e. honoring row masks.
  std::size_t trainable_scalar_count() const {
    std::size_t n = 0;
    for (const auto& s : slots_) {
      const auto& nd = s.param.node();
      const std::size_t rows = nd.shape.empty() ? 1 : nd.shape[0];
      const std::size_t row_len = nd.value.size() / (rows ? rows : 1);
      if (s.row_mask.empty()) {
        n += nd.value.size();
      } else {
        for (std::size_t r = 0; r < rows; ++r)
          if (s.row_mask[r]) n += row_len;
      }
    }
    return n;
  }

 private:
  struct Slot {
    std::string name;
    Tensor<S> param;
    std::vector<std::uint8_t> row_mask;
    std::vector<S> m, v;
  };

  Hyper h_;
  std::uint64_t t_ = 0;
  std::vector<Slot> slots_;
};

}  // namespace uecg::nn
