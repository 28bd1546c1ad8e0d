#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fedleak/data.hpp"
#include "fedleak/reconstruct.hpp"

namespace fedleak {

/// 10*log10(peak^2/MSE), capped at 200 dB when the vectors are identical.
double psnr(const std::vector<double>& a, const std::vector<double>& b, double peak = 1.0);

/// Mean local SSIM over 8x8 sliding windows (stride 1), C1=(0.01)^2,
/// C2=(0.03)^2 for peak 1. Inputs are side x side images in [0,1].
double ssim(const std::vector<double>& a, const std::vector<double>& b, std::size_t side);

/// Levenshtein distance (unit costs) divided by reference length. The
/// reference must be non-empty after pad stripping by the caller.
double wer(const std::vector<std::size_t>& reference, const std::vector<std::size_t>& hypothesis);

struct MatchThresholds {
    double psnr_th = 20.0;
    double ssim_th = 0.9;
    double wer_th = 0.05;
};

struct MatchedPair {
    std::size_t bin = 0;       // 1-based bin index
    std::string source_id;
    double psnr = 0.0;
    double ssim = 0.0;
    double wer = 0.0;
    bool success = false;      // meets the modality's thresholds
};

struct MatchResult {
    std::vector<MatchedPair> pairs;
    std::vector<std::string> unmatched_samples;
    double rate = 0.0;                 // successful pairs / |truth|
    double per_sample_rate = 0.0;      // diagnostic: samples with any bin above threshold / |truth|
    double mean_psnr_success = 0.0;
    double mean_ssim_success = 0.0;
    double mean_wer_success = 0.0;
    double mean_psnr_all = 0.0;        // over all matched pairs, successful or not
    double mean_ssim_all = 0.0;
};

/// Greedy best-first assignment of recovered bins to ground-truth samples:
/// repeatedly pair the globally best (bin, sample) score (PSNR for images,
/// 1-WER for text) and remove both. Rate counts pairs meeting the
/// thresholds, divided by |truth|. Quality means are reported over
/// successful pairs (and over all pairs for reference).
MatchResult match_and_rate(const RecoveredBatch& recovered, const std::vector<ImageSample>& truth,
                           std::size_t side, const MatchThresholds& thresholds);

MatchResult match_and_rate(const TextRecoveryOutput& recovered, const std::vector<TextRecord>& truth,
                           const MatchThresholds& thresholds);

/// Marks recovered-but-unsuccessful bins as collision suspects (evaluation
/// metadata; at attack time clean samples and mixtures are not always
/// distinguishable).
void annotate_collisions(RecoveredBatch& batch, const MatchResult& result);

/// Reference tokens with trailing pads removed.
std::vector<std::size_t> strip_trailing_pads(const std::vector<std::size_t>& tokens);

}  // namespace fedleak
