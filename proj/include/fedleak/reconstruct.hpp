#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "fedleak/data.hpp"
#include "fedleak/matrix.hpp"
#include "fedleak/param_io.hpp"
#include "fedleak/round.hpp"

namespace fedleak {

enum class Modality { image, text };
enum class BinStatus { recovered, empty, collision_suspect };

struct BinRecovery {
    std::size_t bin = 0;                 // 1..k
    std::optional<std::vector<double>> vec;  // clipped for images; absent when empty
    std::vector<double> raw;             // unclipped ratio, kept for diagnostics
    double denom_mass = 0.0;             // |g_b1 difference| for this bin
    BinStatus status = BinStatus::empty;
};

struct RecoveredBatch {
    std::vector<BinRecovery> items;  // ordered by bin index, length k
    Modality modality = Modality::image;

    std::size_t occupied() const;
};

struct RecoveredText {
    std::vector<std::size_t> tokens;
    std::vector<double> per_position_distance;
};

/// Extracts the crafted block's first-layer gradient estimates from the
/// aggregate: slices crafted.w1/crafted.b1 by layout and sign-normalizes via
/// the update->gradient estimate.
std::pair<Matrix, std::vector<double>> slice_crafted_grads(const std::vector<double>& aggregate,
                                                           const BlockLayout& layout, double lr,
                                                           std::size_t local_epochs);

/// Consecutive-difference ratio over the first-layer gradients: bin l holds
/// (g_w1[l+1]-g_w1[l]) / (g_b1[l+1]-g_b1[l]) with the (k+1)-th entries zero.
/// A bin is empty when its denominator magnitude falls below
/// eps_rel * max|g_b1|. Image outputs are clipped to [0,1] (raw kept).
RecoveredBatch recover_bins(const Matrix& g_w1, const std::vector<double>& g_b1, Modality modality,
                            double eps_rel = 1e-8);

/// Splits a recovered l*e vector into l chunks and maps each chunk to the
/// vocabulary row minimizing Euclidean distance (ties to the lowest index).
RecoveredText invert_embeddings(const std::vector<double>& flat, const Matrix& embedding);

struct TextRecoveryOutput {
    struct Item {
        std::size_t bin = 0;
        RecoveredText recovered;
        std::string text;              // detokenized, trailing pads stripped
        double mean_distance = 0.0;
    };
    std::vector<Item> records;
};

TextRecoveryOutput recover_text_batch(const RecoveredBatch& batch, const Matrix& embedding,
                                      const Vocabulary& vocab);

/// Full attack path from the attacker's view alone.
RecoveredBatch reconstruct_from_view(const AttackerView& view, Modality modality,
                                     double eps_rel = 1e-8);

}  // namespace fedleak
