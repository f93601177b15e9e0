#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "emap/tensor/tape.hpp"

namespace emap {

/// A differentiable computation under test: maps recorded inputs to any output tensor.
using GradCheckFn = std::function<Var<double>(Tape<double>&, std::span<const Var<double>>)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares reverse-mode gradients with central finite differences in 64-bit.
///
/// Non-scalar outputs are reduced to sum(output .* R) with R a fixed seeded
/// random tensor. The relative error of each scalar is
/// |a - n| / max(|a|, |n|, 1e-8). When the second difference shows that the
/// stencil straddles a kink, the step shrinks by 8x, at most four times.
GradCheckResult grad_check_detailed(const GradCheckFn& fn, const std::vector<Tensor64>& inputs, double eps = 1e-4,
                                    std::uint64_t projection_seed = 0x5eed);

inline double grad_check(const GradCheckFn& fn, const std::vector<Tensor64>& inputs, double eps = 1e-4) {
  return grad_check_detailed(fn, inputs, eps).max_relative_error;
}

}  // namespace emap
