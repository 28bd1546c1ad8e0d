#include "fedleak/reconstruct.hpp"

#include <algorithm>
#include <cmath>

#include "fedleak/error.hpp"
#include "fedleak/model.hpp"

namespace fedleak {

std::size_t RecoveredBatch::occupied() const {
    std::size_t n = 0;
    for (const auto& item : items) {
        if (item.status != BinStatus::empty) ++n;
    }
    return n;
}

std::pair<Matrix, std::vector<double>> slice_crafted_grads(const std::vector<double>& aggregate,
                                                           const BlockLayout& layout, double lr,
                                                           std::size_t local_epochs) {
    if (aggregate.size() != layout.total()) {
        throw ShapeError("aggregate length " + std::to_string(aggregate.size()) +
                         " does not match layout total " + std::to_string(layout.total()));
    }
    const BlockInfo& w1 = layout.find("crafted.w1");
    const BlockInfo& b1 = layout.find("crafted.b1");
    const std::vector<double> grads = estimate_gradient(aggregate, local_epochs, lr);

    Matrix g_w1(w1.rows, w1.cols,
                std::vector<double>(grads.begin() + w1.offset,
                                    grads.begin() + w1.offset + w1.rows * w1.cols));
    std::vector<double> g_b1(grads.begin() + b1.offset, grads.begin() + b1.offset + b1.cols);
    if (g_b1.size() != g_w1.rows()) {
        throw ShapeError("crafted.b1 length does not match crafted.w1 row count");
    }
    return {std::move(g_w1), std::move(g_b1)};
}

RecoveredBatch recover_bins(const Matrix& g_w1, const std::vector<double>& g_b1, Modality modality,
                            double eps_rel) {
    const std::size_t k = g_w1.rows();
    if (g_b1.size() != k) {
        throw ShapeError("recover_bins: g_b1 length " + std::to_string(g_b1.size()) +
                         " does not match k = " + std::to_string(k));
    }
    const std::size_t d = g_w1.cols();

    double bias_peak = 0.0;
    for (double g : g_b1) bias_peak = std::max(bias_peak, std::abs(g));
    const double eps = eps_rel * bias_peak;

    RecoveredBatch batch;
    batch.modality = modality;
    batch.items.resize(k);
    for (std::size_t l = 0; l < k; ++l) {
        BinRecovery& item = batch.items[l];
        item.bin = l + 1;
        // Differences against the (k+1)-th virtual row, which is zero.
        const double denom = (l + 1 < k ? g_b1[l + 1] : 0.0) - g_b1[l];
        item.denom_mass = std::abs(denom);
        if (bias_peak == 0.0 || item.denom_mass < eps || item.denom_mass == 0.0) {
            item.status = BinStatus::empty;
            continue;
        }
        item.raw.resize(d);
        for (std::size_t c = 0; c < d; ++c) {
            const double numer = (l + 1 < k ? g_w1(l + 1, c) : 0.0) - g_w1(l, c);
            item.raw[c] = numer / denom;
        }
        item.vec = item.raw;
        if (modality == Modality::image) {
            for (double& v : *item.vec) v = std::clamp(v, 0.0, 1.0);
        }
        item.status = BinStatus::recovered;
    }
    return batch;
}

RecoveredText invert_embeddings(const std::vector<double>& flat, const Matrix& embedding) {
    const std::size_t e = embedding.cols();
    if (e == 0 || flat.size() % e != 0) {
        throw ShapeError("invert_embeddings: vector length " + std::to_string(flat.size()) +
                         " is not a multiple of embedding dim " + std::to_string(e));
    }
    const std::size_t positions = flat.size() / e;
    const std::size_t vocab = embedding.rows();

    RecoveredText out;
    out.tokens.resize(positions);
    out.per_position_distance.resize(positions);
    for (std::size_t p = 0; p < positions; ++p) {
        const double* chunk = flat.data() + p * e;
        double best = 0.0;
        std::size_t best_tok = 0;
        for (std::size_t v = 0; v < vocab; ++v) {
            const double* row = embedding.row(v).data();
            double dist2 = 0.0;
            for (std::size_t j = 0; j < e; ++j) {
                const double diff = chunk[j] - row[j];
                dist2 += diff * diff;
            }
            if (v == 0 || dist2 < best) {  // strict < keeps the lowest index on ties
                best = dist2;
                best_tok = v;
            }
        }
        out.tokens[p] = best_tok;
        out.per_position_distance[p] = std::sqrt(best);
    }
    return out;
}

TextRecoveryOutput recover_text_batch(const RecoveredBatch& batch, const Matrix& embedding,
                                      const Vocabulary& vocab) {
    if (batch.modality != Modality::text) {
        throw ConfigError("recover_text_batch: batch modality is not text");
    }
    TextRecoveryOutput out;
    for (const auto& item : batch.items) {
        if (item.status == BinStatus::empty || !item.vec) continue;
        TextRecoveryOutput::Item rec;
        rec.bin = item.bin;
        rec.recovered = invert_embeddings(*item.vec, embedding);

        std::size_t last = rec.recovered.tokens.size();
        while (last > 0 && rec.recovered.tokens[last - 1] == Vocabulary::pad_index) --last;
        std::string text;
        for (std::size_t p = 0; p < last; ++p) {
            if (p) text += ' ';
            text += vocab.token_strings[rec.recovered.tokens[p]];
        }
        rec.text = std::move(text);

        double total = 0.0;
        for (double dist : rec.recovered.per_position_distance) total += dist;
        rec.mean_distance = rec.recovered.per_position_distance.empty()
                                ? 0.0
                                : total / static_cast<double>(rec.recovered.per_position_distance.size());
        out.records.push_back(std::move(rec));
    }
    return out;
}

RecoveredBatch reconstruct_from_view(const AttackerView& view, Modality modality, double eps_rel) {
    auto [g_w1, g_b1] = slice_crafted_grads(view.aggregate, view.layout, view.lr, view.local_epochs);
    return recover_bins(g_w1, g_b1, modality, eps_rel);
}

}  // namespace fedleak
