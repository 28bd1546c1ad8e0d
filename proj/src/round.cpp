#include "fedleak/round.hpp"

#include <chrono>
#include <cmath>
#include <future>

#include "fedleak/error.hpp"
#include "fedleak/rng.hpp"

namespace fedleak {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::vector<double> uniform_weights(std::size_t n) {
    return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

void validate_modules(const CraftedModule& victim_module, const CraftedModule& honest_module) {
    if (victim_module.kind != ModuleKind::linear_leakage) {
        throw ConfigError("run_round: victim module must be the linear-leakage form");
    }
    if (honest_module.kind != ModuleKind::zero_gradient) {
        throw ConfigError("run_round: honest-client module must be the zero-gradient form");
    }
    if (victim_module.bins() != honest_module.bins() ||
        victim_module.input_dim() != honest_module.input_dim()) {
        throw ConfigError("run_round: victim and honest modules must share shape");
    }
}

// Builds one client's model, trains it on its pool, returns the update.
template <typename MakeModel, typename Sample>
UpdateVector train_client(const MakeModel& make_model, const CraftedModule& module,
                          const std::vector<Sample>& pool, const RoundConfig& config,
                          std::size_t client, std::size_t update_len) {
    if (pool.empty()) return UpdateVector(update_len, 0.0);
    auto model = make_model();
    model.graft(module);
    return local_train(model, pool, config.local_epochs, config.batch_size, config.lr,
                       client_train_seed(config.seed, client), config.loss);
}

template <typename MakeModel, typename Sample>
RoundResult run_round_impl(const RoundConfig& config, const DatasetSplit<Sample>& split,
                           const CraftedModule& victim_module, const CraftedModule& honest_module,
                           const MakeModel& make_model, std::optional<Matrix> published_embedding) {
    validate(config);
    validate_modules(victim_module, honest_module);
    if (split.client_pools.size() != config.n_clients) {
        throw ConfigError("run_round: split has " + std::to_string(split.client_pools.size()) +
                          " client pools for " + std::to_string(config.n_clients) + " clients");
    }

    const auto round_start = Clock::now();
    RoundResult result;

    // Layout of the published model (identical for every client).
    BlockLayout layout;
    {
        auto model = make_model();
        model.graft(victim_module);
        layout = layout_of(model.blocks());
    }
    const std::size_t update_len = layout.total();

    // Clients train independently on isolated replicas.
    std::vector<std::future<UpdateVector>> futures(config.n_clients);
    std::vector<Clock::time_point> starts(config.n_clients);
    for (std::size_t c = 0; c < config.n_clients; ++c) {
        const CraftedModule& module = (c == config.victim) ? victim_module : honest_module;
        const auto& pool = split.client_pools[c];
        starts[c] = Clock::now();
        futures[c] = std::async(std::launch::async, [&, c]() {
            return train_client(make_model, module, pool, config, c, update_len);
        });
    }

    std::vector<UpdateVector> updates;
    updates.reserve(config.n_clients);
    for (std::size_t c = 0; c < config.n_clients; ++c) {
        updates.push_back(futures[c].get());
        result.transcript.clients.push_back(
            {c, split.client_pools[c].size(), ms_since(starts[c])});
        if (split.client_pools[c].empty()) {
            result.transcript.warnings.push_back("client " + std::to_string(c) +
                                                 " has no local data; zero update");
        }
    }

    const auto mask_start = Clock::now();
    const MaskedBundle bundle = mask_updates(updates, mix_seed(config.seed, {kMaskStream}), config.codec);
    result.transcript.mask_ms = ms_since(mask_start);

    const auto agg_start = Clock::now();
    const auto weights = config.weights.empty() ? uniform_weights(config.n_clients) : config.weights;
    result.view.aggregate = aggregate(bundle, weights, config.codec);
    result.transcript.aggregate_ms = ms_since(agg_start);

    result.view.layout = std::move(layout);
    result.view.lr = config.lr;
    result.view.local_epochs = config.local_epochs;
    result.view.embedding = std::move(published_embedding);
    result.transcript.total_ms = ms_since(round_start);
    return result;
}

}  // namespace

void validate(const RoundConfig& config) {
    if (config.n_clients < 1) throw ConfigError("round: need at least one client");
    if (config.victim >= config.n_clients) {
        throw IndexError("round: victim " + std::to_string(config.victim) + " out of range for " +
                         std::to_string(config.n_clients) + " clients");
    }
    if (config.local_epochs < 1) throw ConfigError("round: local_epochs must be >= 1");
    if (!config.weights.empty()) {
        if (config.weights.size() != config.n_clients) {
            throw ConfigError("round: weight count does not match client count");
        }
        double sum = 0.0;
        for (double w : config.weights) {
            if (w < 0.0) throw ConfigError("round: negative client weight");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("round: client weights must sum to 1");
    }
}

std::uint64_t client_train_seed(std::uint64_t round_seed, std::size_t client) {
    return mix_seed(round_seed, {kClientStream, client});
}

RoundResult run_round(const RoundConfig& config, const ImageSplit& split,
                      const CraftedModule& victim_module, const CraftedModule& honest_module,
                      const Head& head) {
    const std::size_t d = victim_module.input_dim();
    auto make_model = [&]() { return ImageModel(d, head); };
    return run_round_impl(config, split, victim_module, honest_module, make_model, std::nullopt);
}

RoundResult run_round(const RoundConfig& config, const TextSplit& split,
                      const CraftedModule& victim_module, const CraftedModule& honest_module,
                      const Head& head, const Matrix& embedding, std::size_t max_len) {
    auto make_model = [&]() { return TextModel(embedding, max_len, head); };
    return run_round_impl(config, split, victim_module, honest_module, make_model, embedding);
}

}  // namespace fedleak
