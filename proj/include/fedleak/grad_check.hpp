#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "fedleak/matrix.hpp"

namespace fedleak {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t param_count = 0;
    // Flat index (across all checked parameters in order) of the worst entry.
    std::size_t worst_index = 0;
};

struct GradCheckItem {
    Matrix* value;        // perturbed in place during the check, restored after
    const Matrix* grad;   // analytic gradient produced by `evaluate(true)`
};

/// Validates analytic gradients against central finite differences with step
/// 1e-4. `evaluate(true)` must run a full forward/backward, filling the grad
/// matrices referenced by `params`, and return the loss; `evaluate(false)`
/// only needs to return the loss under the current parameter values.
/// Relative error uses denominator max(|analytic|, |numeric|, 1e-8).
GradCheckReport grad_check(const std::function<double(bool)>& evaluate,
                           const std::vector<GradCheckItem>& params, double step = 1e-4);

}  // namespace fedleak
