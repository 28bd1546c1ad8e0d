#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace fedleak {

/// Fixed-point encoding into 64-bit words (two's complement, modulo 2^64).
/// Integer modular arithmetic makes the pairwise masks cancel exactly in the
/// sum, which floating-point masks would not. Values are clamped to +-clip
/// before rounding; the round-trip error is at most 1/(2*scale) per
/// coordinate for in-range values.
struct FixedPointCodec {
    double scale = 1048576.0;           // 2^20
    double clip = 1073741824.0 / 1048576.0;  // 2^30 / scale

    std::uint64_t encode(double x) const;
    double decode(std::uint64_t word) const;

    std::vector<std::uint64_t> encode_vector(const std::vector<double>& xs) const;
    std::vector<double> decode_vector(const std::vector<std::uint64_t>& words) const;
};

struct MaskedUpdate {
    std::size_t client = 0;
    std::vector<std::uint64_t> words;
};

/// Output of the masking step. The checksum is the modular sum of all plain
/// encoded words; it equals the word-sum of the correct aggregate, so it
/// reveals nothing beyond the aggregate itself, but a dropped or corrupted
/// client makes it mismatch.
struct MaskedBundle {
    std::vector<MaskedUpdate> updates;
    std::uint64_t checksum = 0;
};

/// Masks each encoded update with pairwise PRG streams: for every ordered
/// pair i<j the stream seeded by (round_seed, i, j) is added to client i's
/// words and subtracted from client j's (mod 2^64), so individual updates
/// are hidden while the sum is preserved exactly.
MaskedBundle mask_updates(const std::vector<std::vector<double>>& updates, std::uint64_t round_seed,
                          const FixedPointCodec& codec);

/// Modular word-sum of all masked updates, verified against the bundle
/// checksum, then decoded. This is the abstract aggregation output: the
/// coordinate-wise sum of the plain updates within n/(2*scale) per entry.
/// The client weights must be uniform (updates are not pre-scaled); they are
/// validated and otherwise only recorded by the caller -- every use of the
/// aggregate downstream is invariant to a positive scalar factor.
std::vector<double> aggregate(const MaskedBundle& bundle, const std::vector<double>& weights,
                              const FixedPointCodec& codec);

}  // namespace fedleak
