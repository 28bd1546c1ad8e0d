#pragma once

#include <cstddef>

#include "fedleak/matrix.hpp"

namespace fedleak {

enum class ModuleKind { linear_leakage, zero_gradient };
enum class Insertion { image_front, post_embedding };

/// The adversarial two-linear-layer block (ReLU in between). Neuron j of the
/// first layer computes mean(x) - h_j, so its activation pattern encodes the
/// brightness bin of the input. The linear-leakage form uses the full bin
/// vector as thresholds; the zero-gradient form places every threshold at the
/// top of the auxiliary range so in-distribution inputs never activate and
/// the first-layer gradients vanish identically.
struct CraftedModule {
    Matrix w1;  // k x d, every row [1/d, ..., 1/d]
    Matrix b1;  // 1 x k
    Matrix w2;  // d x k, all rows identical (constant value)
    Matrix b2;  // 1 x d
    ModuleKind kind = ModuleKind::linear_leakage;
    Insertion insertion = Insertion::image_front;

    std::size_t bins() const { return w1.rows(); }
    std::size_t input_dim() const { return w1.cols(); }
};

}  // namespace fedleak
