#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "uecg/nn/tensor.hpp"

namespace uecg::model {

// Named handle onto a parameter tensor. `group` partitions parameters for the
// stage freeze rules; `row_mask` (when set) points at the owner's trainable-row
// mask so the optimizer can skip frozen rows of an otherwise trainable tensor.
template <typename S>
struct ParamEntry {
  std::string name;
  nn::Tensor<S> tensor;
  std::string group;
  const std::vector<std::uint8_t>* row_mask = nullptr;
};

template <typename S>
using Registry = std::vector<ParamEntry<S>>;

template <typename S>
void add_entry(Registry<S>& reg, std::string name, nn::Tensor<S> t, std::string group,
               const std::vector<std::uint8_t>* row_mask = nullptr) {
  reg.push_back(ParamEntry<S>{std::move(name), std::move(t), std::move(group), row_mask});
}

// Prefix every name in `sub` and splice it into `reg`.
template <typename S>
void merge_registry(Registry<S>& reg, const std::string& prefix, Registry<S> sub) {
  for (auto& e : sub) {
    e.name = prefix + e.name;
    reg.push_back(std::move(e));
  }
}

}  // namespace uecg::model
