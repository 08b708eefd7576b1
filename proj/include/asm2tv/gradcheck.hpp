#pragma once

#include <functional>
#include <vector>

#include "asm2tv/tensor.hpp"

namespace asm2tv {

/// Largest |analytic - central| / (|analytic| + |central| + 1e-12) over every
/// coordinate of x. `f` must be deterministic; a repeated evaluation at x that
/// differs raises std::runtime_error. x must be a requires-grad leaf; its grad
/// is cleared before and after.
double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double step);

/// Same check over several leaves at once, for closures that read model
/// parameters directly.
double finite_diff_check(const std::function<Tensor()>& f, std::vector<Tensor> leaves, double step);

}  // namespace asm2tv
