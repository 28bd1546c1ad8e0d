#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedleak/crafted_module.hpp"
#include "fedleak/data.hpp"
#include "fedleak/model.hpp"
#include "fedleak/param_io.hpp"
#include "fedleak/secagg.hpp"

namespace fedleak {

struct RoundConfig {
    std::size_t n_clients = 5;
    std::size_t victim = 0;
    std::size_t local_epochs = 1;
    double lr = 0.01;
    std::size_t batch_size = 0;  // 0 = full batch
    std::size_t k = 0;           // crafted bin count, echoed into the transcript
    std::uint64_t seed = 0;
    std::vector<double> weights;  // empty = uniform 1/n
    FixedPointCodec codec;
    LossKind loss = LossKind::cross_entropy;
};

void validate(const RoundConfig& config);

/// Everything the attacker legitimately sees after the round: the decoded
/// aggregate, the layout of the model it published, and the published
/// artifacts themselves. Reconstruction consumes only this struct; per-client
/// data never leaves run_round.
struct AttackerView {
    std::vector<double> aggregate;
    BlockLayout layout;
    double lr = 0.0;
    std::size_t local_epochs = 1;
    std::optional<Matrix> embedding;  // published table (text rounds)
};

struct ClientStat {
    std::size_t client = 0;
    std::size_t samples = 0;
    double train_ms = 0.0;
};

struct RoundTranscript {
    std::vector<ClientStat> clients;
    double mask_ms = 0.0;
    double aggregate_ms = 0.0;
    double total_ms = 0.0;
    std::vector<std::string> warnings;
};

struct RoundResult {
    AttackerView view;
    RoundTranscript transcript;
};

/// Training seed for one client, derived from the round seed. Exposed so
/// oracle tests can replay a client's local training exactly.
std::uint64_t client_train_seed(std::uint64_t round_seed, std::size_t client);

/// One full attack round: publish per-client crafted models (victim gets the
/// linear-leakage module, everyone else the zero-gradient module, head
/// parameters shared), run local training, mask, and aggregate. Clients with
/// empty pools contribute zero updates and a transcript warning.
RoundResult run_round(const RoundConfig& config, const ImageSplit& split,
                      const CraftedModule& victim_module, const CraftedModule& honest_module,
                      const Head& head);

RoundResult run_round(const RoundConfig& config, const TextSplit& split,
                      const CraftedModule& victim_module, const CraftedModule& honest_module,
                      const Head& head, const Matrix& embedding, std::size_t max_len);

}  // namespace fedleak
