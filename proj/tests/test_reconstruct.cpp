#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fedleak/craft.hpp"
#include "fedleak/data.hpp"
#include "fedleak/error.hpp"
#include "fedleak/metrics.hpp"
#include "fedleak/model.hpp"
#include "fedleak/reconstruct.hpp"
#include "fedleak/rng.hpp"
#include "fedleak/round.hpp"

using namespace fedleak;

namespace {

constexpr std::size_t kDim = 36;  // 6x6 images

// Constant-brightness sample with a zero-mean pattern on top, so brightness
// is exactly `level` while the pixel content is distinctive.
ImageSample patterned_sample(double level, std::uint64_t tag) {
    Rng rng(tag);
    std::vector<double> px(kDim);
    double mean = 0.0;
    for (double& v : px) {
        v = rng.uniform(-1.0, 1.0);
        mean += v;
    }
    mean /= kDim;
    const double amp = 0.08;
    for (double& v : px) v = level + amp * (v - mean);
    return {px, tag % 2, "pattern:" + std::to_string(tag)};
}

// Auxiliary set with brightness uniform over (0.1, 0.9).
std::vector<ImageSample> uniform_aux(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<ImageSample> aux;
    for (std::size_t i = 0; i < n; ++i) {
        aux.push_back(patterned_sample(rng.uniform(0.1, 0.9), seed * 1000 + i));
    }
    return aux;
}

struct MiniRound {
    AttackerView view;
    BinVector bins;
    std::vector<ImageSample> batch;
};

// One attack round over a constructed victim batch: n clients, SA on.
MiniRound image_round(const std::vector<ImageSample>& victim_batch, std::size_t k, double lr,
                      double codec_scale, std::size_t epochs = 1,
                      LossKind loss = LossKind::cross_entropy, std::uint64_t seed = 5) {
    MiniRound out;
    out.batch = victim_batch;
    const auto aux = uniform_aux(400, seed);
    out.bins = bin_vector(estimate_cdf(aux), k);
    const auto leakage = craft_linear_leakage(out.bins, kDim, 1.0);
    const auto zero = craft_zero_gradient(out.bins, kDim, 1.0);

    std::vector<std::vector<double>> aux_inputs;
    for (const auto& s : aux) aux_inputs.push_back(s.pixels);
    const auto stats = measure_activation_stats(leakage, aux_inputs);
    const Head head = attack_tuned_head(kDim, 16, 2, stats.center, stats.spread);

    ImageSplit split;
    split.auxiliary = aux;
    split.victim_pool = victim_batch;
    split.client_pools = {victim_batch, uniform_aux(8, seed + 1), uniform_aux(8, seed + 2)};

    RoundConfig config;
    config.n_clients = 3;
    config.victim = 0;
    config.local_epochs = epochs;
    config.lr = lr;
    config.k = k;
    config.seed = seed;
    config.codec.scale = codec_scale;
    config.codec.clip = std::max(64.0, 1073741824.0 / codec_scale);
    config.loss = loss;

    out.view = run_round(config, split, leakage, zero, head).view;
    return out;
}

double max_abs_err(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

}  // namespace

TEST_CASE("slice_crafted_grads inverts flattening") {
    const auto aux = uniform_aux(100, 3);
    const auto bins = bin_vector(estimate_cdf(aux), 4);
    const auto module = craft_linear_leakage(bins, kDim, 1.0);
    ImageModel model(kDim, random_head(kDim, 8, 2, 4));
    model.graft(module);
    model.forward_backward({aux[0], aux[1], aux[2]});
    const auto layout = layout_of(model.blocks());
    const auto grads = flatten_grads(model.blocks());

    // update = -lr * grads; slicing recovers the gradient segments
    const double lr = 0.25;
    std::vector<double> update(grads.size());
    for (std::size_t i = 0; i < grads.size(); ++i) update[i] = -lr * grads[i];

    auto [g_w1, g_b1] = slice_crafted_grads(update, layout, lr, 1);
    const auto& w1 = layout.find("crafted.w1");
    for (std::size_t i = 0; i < g_w1.size(); ++i) {
        CHECK(g_w1.data()[i] == doctest::Approx(grads[w1.offset + i]).epsilon(1e-12));
    }
    const auto& b1 = layout.find("crafted.b1");
    for (std::size_t i = 0; i < g_b1.size(); ++i) {
        CHECK(g_b1[i] == doctest::Approx(grads[b1.offset + i]).epsilon(1e-12));
    }

    update.pop_back();
    CHECK_THROWS_AS(slice_crafted_grads(update, layout, lr, 1), ShapeError);
}

TEST_CASE("single sample is recovered almost exactly through the full round") {
    const auto round = image_round({patterned_sample(0.47, 901)}, 8, 1.0, 1073741824.0 /* 2^30 */);
    const auto batch = reconstruct_from_view(round.view, Modality::image);
    REQUIRE(batch.occupied() == 1);
    for (const auto& item : batch.items) {
        if (item.status == BinStatus::empty) continue;
        CHECK(item.bin == bin_index(round.bins, 0.47));
        CHECK(max_abs_err(*item.vec, round.batch[0].pixels) < 1e-6);
    }
}

TEST_CASE("distinct bins recover every sample above 60 dB") {
    // k samples placed at the midpoints of the k-1 interior recoverable
    // intervals (the below-h1 interval leaves no signature).
    const std::size_t k = 8;
    const auto aux = uniform_aux(400, 7);
    const auto bins = bin_vector(estimate_cdf(aux), k);
    std::vector<ImageSample> victims;
    for (std::size_t j = 0; j + 1 < k; ++j) {
        victims.push_back(patterned_sample(0.5 * (bins.h[j] + bins.h[j + 1]), 700 + j));
    }
    const auto round = image_round(victims, k, 1.0, 1073741824.0, 1, LossKind::cross_entropy, 7);
    const auto recovered = reconstruct_from_view(round.view, Modality::image);
    REQUIRE(recovered.occupied() == victims.size());

    for (std::size_t j = 0; j < victims.size(); ++j) {
        const std::size_t bin = bin_index(round.bins, brightness(victims[j].pixels));
        const auto& item = recovered.items[bin - 1];
        REQUIRE(item.status == BinStatus::recovered);
        CHECK(psnr(*item.vec, victims[j].pixels) > 60.0);
    }
}

TEST_CASE("recovery theorem holds with the default codec and mse loss") {
    const std::size_t k = 8;
    const auto aux = uniform_aux(400, 11);
    const auto bins = bin_vector(estimate_cdf(aux), k);
    std::vector<ImageSample> victims;
    for (std::size_t j = 0; j + 1 < k; j += 2) {
        victims.push_back(patterned_sample(0.5 * (bins.h[j] + bins.h[j + 1]), 810 + j));
    }
    for (LossKind loss : {LossKind::cross_entropy, LossKind::mean_squared_error}) {
        const auto round = image_round(victims, k, 32.0, 1048576.0 /* 2^20 */, 1, loss, 11);
        const auto recovered = reconstruct_from_view(round.view, Modality::image);
        for (const auto& v : victims) {
            const std::size_t bin = bin_index(round.bins, brightness(v.pixels));
            const auto& item = recovered.items[bin - 1];
            REQUIRE(item.status == BinStatus::recovered);
            CHECK(max_abs_err(*item.vec, v.pixels) <= 1e-4);
        }
    }
}

TEST_CASE("two equal-brightness samples collide into one mixture bin") {
    auto a = patterned_sample(0.5, 31);
    auto b = a;
    std::reverse(b.pixels.begin(), b.pixels.end());
    b.source_id = "pattern:31r";
    REQUIRE(brightness(a.pixels) == doctest::Approx(brightness(b.pixels)).epsilon(1e-12));

    const auto round = image_round({a, b}, 8, 1.0, 1073741824.0, 1, LossKind::cross_entropy, 13);
    const auto recovered = reconstruct_from_view(round.view, Modality::image);
    CHECK(recovered.occupied() == 1);
    for (const auto& item : recovered.items) {
        if (item.status == BinStatus::empty) continue;
        // the mixture interpolates the two inputs
        const double to_a = max_abs_err(*item.vec, a.pixels);
        const double to_b = max_abs_err(*item.vec, b.pixels);
        CHECK(to_a > 1e-3);
        CHECK(to_b > 1e-3);
    }
}

TEST_CASE("recover_bins is invariant to gradient rescaling") {
    const auto round = image_round({patterned_sample(0.3, 41), patterned_sample(0.6, 42)}, 6, 1.0,
                                   1073741824.0, 1, LossKind::cross_entropy, 17);
    auto [g_w1, g_b1] = slice_crafted_grads(round.view.aggregate, round.view.layout, round.view.lr,
                                            round.view.local_epochs);
    const auto base = recover_bins(g_w1, g_b1, Modality::image);
    for (double c : {1e-3, 1.0, 1e3}) {
        Matrix sw = scale(g_w1, c);
        auto sb = g_b1;
        for (double& v : sb) v *= c;
        const auto scaled = recover_bins(sw, sb, Modality::image);
        REQUIRE(scaled.items.size() == base.items.size());
        for (std::size_t i = 0; i < base.items.size(); ++i) {
            CHECK(scaled.items[i].status == base.items[i].status);
            if (base.items[i].vec) {
                CHECK(max_abs_err(*scaled.items[i].vec, *base.items[i].vec) < 1e-12);
            }
        }
    }
}

TEST_CASE("victim batch order does not change the recovery") {
    std::vector<ImageSample> batch = {patterned_sample(0.25, 51), patterned_sample(0.45, 52),
                                      patterned_sample(0.7, 53)};
    const auto fwd = image_round(batch, 8, 1.0, 1073741824.0, 1, LossKind::cross_entropy, 19);
    std::reverse(batch.begin(), batch.end());
    const auto rev = image_round(batch, 8, 1.0, 1073741824.0, 1, LossKind::cross_entropy, 19);

    const auto ra = reconstruct_from_view(fwd.view, Modality::image);
    const auto rb = reconstruct_from_view(rev.view, Modality::image);
    for (std::size_t i = 0; i < ra.items.size(); ++i) {
        CHECK(ra.items[i].status == rb.items[i].status);
        if (ra.items[i].vec && rb.items[i].vec) {
            CHECK(max_abs_err(*ra.items[i].vec, *rb.items[i].vec) < 1e-9);
        }
    }
}

TEST_CASE("empty-bin threshold is relative to the gradient scale") {
    Matrix g_w1(3, 4);
    std::vector<double> g_b1 = {1.0, 1.0, 0.0};  // bins 1 and 3 carry mass, bin 2 none
    g_w1(0, 0) = 1.0;
    g_w1(1, 0) = 1.0;
    const auto batch = recover_bins(g_w1, g_b1, Modality::image);
    CHECK(batch.items[0].status == BinStatus::empty);      // difference g2-g1 = 0
    CHECK(batch.items[1].status == BinStatus::recovered);  // g3-g2 = -1
    CHECK(batch.items[2].status == BinStatus::empty);      // 0-g3 = 0

    // all-zero gradients: everything empty, no 0/0
    const auto silent = recover_bins(Matrix(3, 4), {0.0, 0.0, 0.0}, Modality::image);
    for (const auto& item : silent.items) CHECK(item.status == BinStatus::empty);
}

TEST_CASE("invert_embeddings nearest-row lookup") {
    Matrix table(6, 4);
    Rng rng(61);
    for (std::size_t v = 1; v < 6; ++v) {
        for (std::size_t j = 0; j < 4; ++j) table(v, j) = rng.uniform(-1.0, 1.0);
    }
    // row 0 (pad) stays zero by construction

    // exact row
    std::vector<double> chunk(table.row(3).begin(), table.row(3).end());
    auto rec = invert_embeddings(chunk, table);
    CHECK(rec.tokens == std::vector<std::size_t>{3});
    CHECK(rec.per_position_distance[0] == 0.0);

    // min inter-row gap
    double min_gap = 1e9;
    for (std::size_t a = 0; a < 6; ++a) {
        for (std::size_t b = a + 1; b < 6; ++b) {
            double d2 = 0;
            for (std::size_t j = 0; j < 4; ++j) {
                const double diff = table(a, j) - table(b, j);
                d2 += diff * diff;
            }
            min_gap = std::min(min_gap, std::sqrt(d2));
        }
    }
    // noise below half the gap cannot flip the winner
    auto noisy = chunk;
    noisy[0] += 0.4 * min_gap;
    rec = invert_embeddings(noisy, table);
    CHECK(rec.tokens == std::vector<std::size_t>{3});

    // all-zero chunk with pad row zero maps to pad
    rec = invert_embeddings({0, 0, 0, 0}, table);
    CHECK(rec.tokens == std::vector<std::size_t>{Vocabulary::pad_index});

    CHECK_THROWS_AS(invert_embeddings({1.0, 2.0, 3.0}, table), ShapeError);
}

TEST_CASE("single text record recovers to an exact string") {
    auto [records, vocab] = synth_text(200, 2, 80, 8, 10, 71);
    const std::size_t l = 10, e = 8;
    std::vector<TextRecord> aux(records.begin(), records.begin() + 150);
    const Matrix embedding = make_embedding(vocab.size(), e, 71);
    const auto bins = bin_vector(estimate_cdf(aux, embedding, l), 8);
    const auto leakage = craft_linear_leakage(bins, l * e, 0.125, Insertion::post_embedding);
    const auto zero = craft_zero_gradient(bins, l * e, 0.125, Insertion::post_embedding);

    // pick a victim record that actually activates the module
    TextModel probe(embedding, l, random_head(l * e, 8, 2, 72));
    TextRecord victim;
    bool found = false;
    for (std::size_t i = 150; i < records.size(); ++i) {
        const std::size_t bin = bin_index(bins, brightness(probe.embed_record(records[i])));
        if (bin >= 1 && bin < 8) {
            victim = records[i];
            found = true;
            break;
        }
    }
    REQUIRE(found);

    std::vector<std::vector<double>> aux_inputs;
    for (const auto& r : aux) aux_inputs.push_back(probe.embed_record(r));
    const auto stats = measure_activation_stats(leakage, aux_inputs);
    const Head head = attack_tuned_head(l * e, 16, 2, stats.center, stats.spread);

    TextSplit split;
    split.auxiliary = aux;
    split.victim_pool = {victim};
    split.client_pools = {{victim}, {records[160], records[161]}};

    RoundConfig config;
    config.n_clients = 2;
    config.victim = 0;
    config.local_epochs = 1;
    config.lr = 1.0;
    config.k = 8;
    config.seed = 73;
    config.codec.scale = 1073741824.0;
    config.codec.clip = 64.0;

    const auto result = run_round(config, split, leakage, zero, head, embedding, l);
    const auto batch = reconstruct_from_view(result.view, Modality::text);
    const auto text = recover_text_batch(batch, embedding, vocab);
    REQUIRE(text.records.size() == 1);  // empty bins emit nothing

    const auto ref = strip_trailing_pads(victim.tokens);
    const auto hyp = strip_trailing_pads(text.records[0].recovered.tokens);
    CHECK(ref == hyp);
    CHECK(wer(ref, hyp) == 0.0);
}
