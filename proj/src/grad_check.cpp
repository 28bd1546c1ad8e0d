#include "fedleak/grad_check.hpp"

#include <cmath>
#include <string>

#include "fedleak/error.hpp"

namespace fedleak {

GradCheckReport grad_check(const std::function<double(bool)>& evaluate,
                           const std::vector<GradCheckItem>& params, double step) {
    const double base_loss = evaluate(true);
    if (!std::isfinite(base_loss)) {
        throw ConfigError("grad_check: model loss is not finite (" + std::to_string(base_loss) + ")");
    }

    // Snapshot the analytic gradients before perturbation runs overwrite them.
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params) {
        analytic.emplace_back(p.grad->data().begin(), p.grad->data().end());
    }

    GradCheckReport report;
    std::size_t flat = 0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Matrix& value = *params[pi].value;
        for (std::size_t i = 0; i < value.size(); ++i, ++flat) {
            double& entry = value.data()[i];
            const double original = entry;
            entry = original + step;
            const double loss_plus = evaluate(false);
            entry = original - step;
            const double loss_minus = evaluate(false);
            entry = original;
            if (!std::isfinite(loss_plus) || !std::isfinite(loss_minus)) {
                throw ConfigError("grad_check: perturbed loss is not finite");
            }
            const double numeric = (loss_plus - loss_minus) / (2.0 * step);
            const double a = analytic[pi][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            const double rel = std::abs(a - numeric) / denom;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_index = flat;
            }
        }
    }
    report.param_count = flat;
    return report;
}

}  // namespace fedleak
