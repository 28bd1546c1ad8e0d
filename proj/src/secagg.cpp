#include "fedleak/secagg.hpp"

#include <cmath>
#include <string>

#include "fedleak/error.hpp"
#include "fedleak/rng.hpp"

namespace fedleak {

std::uint64_t FixedPointCodec::encode(double x) const {
    const double clamped = std::min(std::max(x, -clip), clip);
    const double scaled = std::nearbyint(clamped * scale);
    return static_cast<std::uint64_t>(static_cast<std::int64_t>(scaled));
}

double FixedPointCodec::decode(std::uint64_t word) const {
    return static_cast<double>(static_cast<std::int64_t>(word)) / scale;
}

std::vector<std::uint64_t> FixedPointCodec::encode_vector(const std::vector<double>& xs) const {
    std::vector<std::uint64_t> words(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) words[i] = encode(xs[i]);
    return words;
}

std::vector<double> FixedPointCodec::decode_vector(const std::vector<std::uint64_t>& words) const {
    std::vector<double> xs(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) xs[i] = decode(words[i]);
    return xs;
}

MaskedBundle mask_updates(const std::vector<std::vector<double>>& updates, std::uint64_t round_seed,
                          const FixedPointCodec& codec) {
    if (updates.empty()) throw ConfigError("mask_updates: need at least one client");
    const std::size_t length = updates[0].size();
    for (const auto& u : updates) {
        if (u.size() != length) {
            throw ProtocolError("mask_updates: update length mismatch (" + std::to_string(u.size()) +
                                " vs " + std::to_string(length) + ")");
        }
    }

    MaskedBundle bundle;
    bundle.updates.reserve(updates.size());
    for (std::size_t i = 0; i < updates.size(); ++i) {
        MaskedUpdate m;
        m.client = i;
        m.words = codec.encode_vector(updates[i]);
        for (std::uint64_t w : m.words) bundle.checksum += w;
        bundle.updates.push_back(std::move(m));
    }

    for (std::size_t i = 0; i < updates.size(); ++i) {
        for (std::size_t j = i + 1; j < updates.size(); ++j) {
            Rng prg(mix_seed(round_seed, {kMaskStream, i, j}));
            auto& wi = bundle.updates[i].words;
            auto& wj = bundle.updates[j].words;
            for (std::size_t t = 0; t < length; ++t) {
                const std::uint64_t mask = prg.next_u64();
                wi[t] += mask;
                wj[t] -= mask;
            }
        }
    }
    return bundle;
}

std::vector<double> aggregate(const MaskedBundle& bundle, const std::vector<double>& weights,
                              const FixedPointCodec& codec) {
    if (bundle.updates.empty()) throw ProtocolError("aggregate: no masked updates");
    const std::size_t length = bundle.updates[0].words.size();
    if (weights.size() != bundle.updates.size()) {
        throw ProtocolError("aggregate: " + std::to_string(weights.size()) + " weights for " +
                            std::to_string(bundle.updates.size()) + " updates");
    }
    double wsum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw ConfigError("aggregate: negative client weight");
        if (std::abs(w - weights[0]) > 1e-12) {
            throw ConfigError("aggregate: non-uniform client weights require client-side scaling, "
                              "which the masking step does not perform");
        }
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-9) throw ConfigError("aggregate: client weights must sum to 1");

    std::vector<std::uint64_t> sum(length, 0);
    std::uint64_t word_total = 0;
    for (const auto& u : bundle.updates) {
        if (u.words.size() != length) throw ProtocolError("aggregate: masked update length mismatch");
        for (std::size_t t = 0; t < length; ++t) sum[t] += u.words[t];
    }
    for (std::uint64_t w : sum) word_total += w;
    if (word_total != bundle.checksum) {
        throw ProtocolError("aggregate: checksum mismatch (dropped or corrupted masked update)");
    }
    return codec.decode_vector(sum);
}

}  // namespace fedleak
