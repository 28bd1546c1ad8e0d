#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fedleak/craft.hpp"
#include "fedleak/data.hpp"
#include "fedleak/error.hpp"
#include "fedleak/model.hpp"
#include "fedleak/reconstruct.hpp"
#include "fedleak/round.hpp"

using namespace fedleak;

namespace {

struct Rig {
    ImageSplit split;
    BinVector bins;
    CraftedModule leakage;
    CraftedModule zero;
    Head head;
    std::size_t d = 0;
    RoundConfig config;
};

Rig make_rig(std::size_t n_clients, std::size_t k = 8, std::uint64_t seed = 63) {
    Rig rig;
    const auto samples = synth_images(60 * n_clients, 6, 2, seed);
    rig.split = split_for_attack(samples, 0.2, n_clients, 0, seed);
    rig.d = 36;
    auto cdf = estimate_cdf(rig.split.auxiliary);
    pad_with_upper_bound(cdf, 1.0);  // zero-gradient silencing covers all inputs
    rig.bins = bin_vector(cdf, k);
    rig.leakage = craft_linear_leakage(rig.bins, rig.d, 1.0);
    rig.zero = craft_zero_gradient(rig.bins, rig.d, 1.0);
    rig.head = random_head(rig.d, 16, 2, seed + 1);
    rig.config.n_clients = n_clients;
    rig.config.victim = 0;
    rig.config.local_epochs = 1;
    rig.config.lr = 0.5;
    rig.config.k = k;
    rig.config.seed = seed;
    return rig;
}

// SA-disabled oracle: replay one client's local training directly.
UpdateVector replay_client(const Rig& rig, std::size_t client) {
    ImageModel model(rig.d, rig.head);
    model.graft(client == rig.config.victim ? rig.leakage : rig.zero);
    return local_train(model, rig.split.client_pools[client], rig.config.local_epochs,
                       rig.config.batch_size, rig.config.lr,
                       client_train_seed(rig.config.seed, client), rig.config.loss);
}

}  // namespace

TEST_CASE("aggregate crafted segments equal the victim update within codec tolerance") {
    Rig rig = make_rig(5);
    const auto result = run_round(rig.config, rig.split, rig.leakage, rig.zero, rig.head);

    const auto victim_update = replay_client(rig, 0);
    REQUIRE(result.view.aggregate.size() == victim_update.size());

    const double tol = 5.0 / (2.0 * rig.config.codec.scale);
    const auto& w1 = result.view.layout.find("crafted.w1");
    const auto& b1 = result.view.layout.find("crafted.b1");
    for (std::size_t i = 0; i < w1.rows * w1.cols; ++i) {
        CHECK(std::abs(result.view.aggregate[w1.offset + i] - victim_update[w1.offset + i]) <= tol);
    }
    for (std::size_t i = 0; i < b1.cols; ++i) {
        CHECK(std::abs(result.view.aggregate[b1.offset + i] - victim_update[b1.offset + i]) <= tol);
    }

    // single local epoch: the aggregate w1 segment is the victim gradient * (-lr)
    ImageModel victim_model(rig.d, rig.head);
    victim_model.graft(rig.leakage);
    victim_model.forward_backward(rig.split.client_pools[0]);
    const auto grads = flatten_grads(victim_model.blocks());
    for (std::size_t i = 0; i < w1.rows * w1.cols; ++i) {
        CHECK(std::abs(result.view.aggregate[w1.offset + i] + rig.config.lr * grads[w1.offset + i]) <=
              tol + 1e-12);
    }
}

TEST_CASE("honest clients contribute exactly zero crafted first-layer updates") {
    Rig rig = make_rig(4);
    const auto& w1 = [&] {
        ImageModel m(rig.d, rig.head);
        m.graft(rig.leakage);
        return layout_of(m.blocks());
    }();
    for (std::size_t client = 1; client < 4; ++client) {
        const auto update = replay_client(rig, client);
        const auto& info = w1.find("crafted.w1");
        const auto& binfo = w1.find("crafted.b1");
        for (std::size_t i = 0; i < info.rows * info.cols; ++i) CHECK(update[info.offset + i] == 0.0);
        for (std::size_t i = 0; i < binfo.cols; ++i) CHECK(update[binfo.offset + i] == 0.0);
    }
}

TEST_CASE("empty victim pool produces an all-empty recovery") {
    Rig rig = make_rig(3);
    rig.split.client_pools[0].clear();
    rig.split.victim_pool.clear();
    const auto result = run_round(rig.config, rig.split, rig.leakage, rig.zero, rig.head);
    CHECK(!result.transcript.warnings.empty());

    const auto batch = reconstruct_from_view(result.view, Modality::image);
    for (const auto& item : batch.items) {
        CHECK(item.status == BinStatus::empty);
    }
}

TEST_CASE("client count does not change what the attacker sees") {
    // Same victim data and seeds, more honest clients: the crafted segments
    // of the aggregate stay the same up to codec quantization.
    Rig small = make_rig(5, 8, 77);
    Rig large = make_rig(5, 8, 77);
    large.config.n_clients = 25;
    large.split.client_pools.resize(25);
    for (std::size_t c = 5; c < 25; ++c) large.split.client_pools[c] = large.split.client_pools[1];

    const auto a = run_round(small.config, small.split, small.leakage, small.zero, small.head);
    const auto b = run_round(large.config, large.split, large.leakage, large.zero, large.head);

    const auto& w1 = a.view.layout.find("crafted.w1");
    const double tol = (5.0 + 25.0) / (2.0 * small.config.codec.scale);
    for (std::size_t i = 0; i < w1.rows * w1.cols; ++i) {
        CHECK(std::abs(a.view.aggregate[w1.offset + i] - b.view.aggregate[w1.offset + i]) <= tol);
    }
}

TEST_CASE("out-of-range honest samples cancel under consecutive differencing") {
    // Without the upper-bound pad, honest samples brighter than the
    // auxiliary maximum activate every zero-gradient neuron identically, so
    // their pollution is constant across rows and drops out of the ratio's
    // consecutive differences for all interior bins.
    const auto samples = synth_images(240, 6, 2, 97);
    auto split = split_for_attack(samples, 0.2, 3, 0, 97);
    const auto bins = bin_vector(estimate_cdf(split.auxiliary), 8);  // no pad
    const auto leakage = craft_linear_leakage(bins, 36, 1.0);
    const auto zero = craft_zero_gradient(bins, 36, 1.0);
    const Head head = random_head(36, 16, 2, 98);

    bool honest_out_of_range = false;
    for (std::size_t c = 1; c < 3; ++c) {
        for (const auto& s : split.client_pools[c]) {
            honest_out_of_range |= brightness(s.pixels) > bins.h.back();
        }
    }
    REQUIRE(honest_out_of_range);  // the leak-through scenario is real here

    RoundConfig config;
    config.n_clients = 3;
    config.victim = 0;
    config.local_epochs = 1;
    config.lr = 0.5;
    config.k = 8;
    config.seed = 97;

    const auto result = run_round(config, split, leakage, zero, head);

    // victim-only oracle round
    ImageModel victim_model(36, head);
    victim_model.graft(leakage);
    const auto victim_update =
        local_train(victim_model, split.client_pools[0], 1, 0, config.lr,
                    client_train_seed(config.seed, 0), config.loss);

    auto [agg_w1, agg_b1] = slice_crafted_grads(result.view.aggregate, result.view.layout, config.lr, 1);
    auto [vic_w1, vic_b1] = slice_crafted_grads(victim_update, result.view.layout, config.lr, 1);

    const double tol = 8.0 * 3.0 / (2.0 * config.codec.scale) / config.lr;
    for (std::size_t l = 0; l + 1 < 8; ++l) {
        for (std::size_t c = 0; c < 36; ++c) {
            const double agg_diff = agg_w1(l + 1, c) - agg_w1(l, c);
            const double vic_diff = vic_w1(l + 1, c) - vic_w1(l, c);
            CHECK(std::abs(agg_diff - vic_diff) <= tol);
        }
        CHECK(std::abs((agg_b1[l + 1] - agg_b1[l]) - (vic_b1[l + 1] - vic_b1[l])) <= tol);
    }
}

TEST_CASE("round validation") {
    Rig rig = make_rig(3);

    rig.config.victim = 3;
    CHECK_THROWS_AS(run_round(rig.config, rig.split, rig.leakage, rig.zero, rig.head), IndexError);
    rig.config.victim = 0;

    // module kinds must match their roles
    CHECK_THROWS_AS(run_round(rig.config, rig.split, rig.zero, rig.zero, rig.head), ConfigError);
    CHECK_THROWS_AS(run_round(rig.config, rig.split, rig.leakage, rig.leakage, rig.head), ConfigError);

    // weights must sum to one
    rig.config.weights = {0.5, 0.2, 0.2};
    CHECK_THROWS_AS(run_round(rig.config, rig.split, rig.leakage, rig.zero, rig.head), ConfigError);
}

TEST_CASE("transcript records client sample counts, not updates") {
    Rig rig = make_rig(4);
    const auto result = run_round(rig.config, rig.split, rig.leakage, rig.zero, rig.head);
    REQUIRE(result.transcript.clients.size() == 4);
    for (std::size_t c = 0; c < 4; ++c) {
        CHECK(result.transcript.clients[c].client == c);
        CHECK(result.transcript.clients[c].samples == rig.split.client_pools[c].size());
    }
    CHECK(result.transcript.total_ms >= 0.0);
}

TEST_CASE("the attack path needs only the attacker view") {
    // Reconstruction runs from the AttackerView alone: aggregate, layout and
    // published artifacts. No per-client state crosses this interface.
    Rig rig = make_rig(5);
    const AttackerView view = run_round(rig.config, rig.split, rig.leakage, rig.zero, rig.head).view;
    const auto batch = reconstruct_from_view(view, Modality::image);
    CHECK(batch.items.size() == rig.bins.k());
    CHECK(batch.occupied() > 0);
}

TEST_CASE("text round runs end to end") {
    auto [records, vocab] = synth_text(120, 2, 60, 8, 10, 15);
    const std::size_t l = 10, e = 4;
    const auto split = split_for_attack(records, 0.25, 3, 0, 15);
    const Matrix embedding = make_embedding(vocab.size(), e, 15);
    const auto bins = bin_vector(estimate_cdf(split.auxiliary, embedding, l), 6);
    const auto leakage = craft_linear_leakage(bins, l * e, 1.0 / 6.0, Insertion::post_embedding);
    const auto zero = craft_zero_gradient(bins, l * e, 1.0 / 6.0, Insertion::post_embedding);
    const Head head = random_head(l * e, 12, 2, 16);

    RoundConfig config;
    config.n_clients = 3;
    config.victim = 0;
    config.local_epochs = 1;
    config.lr = 0.5;
    config.k = 6;
    config.seed = 15;

    const auto result = run_round(config, split, leakage, zero, head, embedding, l);
    CHECK(result.view.embedding.has_value());
    const auto batch = reconstruct_from_view(result.view, Modality::text);
    CHECK(batch.items.size() == 6);
}
