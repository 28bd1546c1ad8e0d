#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "fedleak/matrix.hpp"

namespace fedleak {

enum class LossKind { cross_entropy, mean_squared_error };

/// Numerically stable softmax cross-entropy for a single 1xC logit row.
/// Returns the loss and dloss/dlogits = softmax(logits) - onehot(label).
std::pair<double, Matrix> softmax_cross_entropy(const Matrix& logits, std::size_t label);

/// Mean over the batch of the per-row loss; dlogits already carries the 1/m
/// batch factor. `kind` selects cross-entropy or mean squared error against
/// the one-hot target.
std::pair<double, Matrix> batch_loss(const Matrix& logits, const std::vector<std::size_t>& labels,
                                     LossKind kind);

}  // namespace fedleak
