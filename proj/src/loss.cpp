#include "fedleak/loss.hpp"

#include <cmath>
#include <string>

#include "fedleak/error.hpp"

namespace fedleak {

std::pair<double, Matrix> softmax_cross_entropy(const Matrix& logits, std::size_t label) {
    if (logits.rows() != 1) {
        throw ShapeError("softmax_cross_entropy expects a single logit row, got " +
                         std::to_string(logits.rows()) + " rows");
    }
    const std::size_t classes = logits.cols();
    if (label >= classes) {
        throw IndexError("label " + std::to_string(label) + " out of range for " +
                         std::to_string(classes) + " classes");
    }
    double maxv = logits(0, 0);
    for (std::size_t c = 1; c < classes; ++c) maxv = std::max(maxv, logits(0, c));
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) sum += std::exp(logits(0, c) - maxv);
    const double log_sum = maxv + std::log(sum);

    Matrix dlogits(1, classes);
    for (std::size_t c = 0; c < classes; ++c) {
        dlogits(0, c) = std::exp(logits(0, c) - log_sum);
    }
    const double loss = log_sum - logits(0, label);
    dlogits(0, label) -= 1.0;
    return {loss, dlogits};
}

std::pair<double, Matrix> batch_loss(const Matrix& logits, const std::vector<std::size_t>& labels,
                                     LossKind kind) {
    if (logits.rows() != labels.size()) {
        throw ShapeError("batch_loss: " + std::to_string(logits.rows()) + " logit rows vs " +
                         std::to_string(labels.size()) + " labels");
    }
    const std::size_t m = logits.rows();
    const std::size_t classes = logits.cols();
    Matrix dlogits(m, classes);
    double total = 0.0;
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
        if (labels[i] >= classes) {
            throw IndexError("label " + std::to_string(labels[i]) + " out of range for " +
                             std::to_string(classes) + " classes");
        }
        if (kind == LossKind::cross_entropy) {
            Matrix row(1, classes, std::vector<double>(logits.row(i).begin(), logits.row(i).end()));
            auto [loss, drow] = softmax_cross_entropy(row, labels[i]);
            total += loss;
            for (std::size_t c = 0; c < classes; ++c) dlogits(i, c) = drow(0, c) * inv_m;
        } else {
            // Squared distance to the one-hot target, averaged over classes.
            double loss = 0.0;
            for (std::size_t c = 0; c < classes; ++c) {
                const double target = (c == labels[i]) ? 1.0 : 0.0;
                const double diff = logits(i, c) - target;
                loss += diff * diff;
                dlogits(i, c) = 2.0 * diff / static_cast<double>(classes) * inv_m;
            }
            total += loss / static_cast<double>(classes);
        }
    }
    return {total * inv_m, dlogits};
}

}  // namespace fedleak
