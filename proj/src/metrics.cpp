#include "fedleak/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fedleak/error.hpp"

namespace fedleak {

namespace {
constexpr double kPsnrCap = 200.0;
}

double psnr(const std::vector<double>& a, const std::vector<double>& b, double peak) {
    if (a.size() != b.size()) {
        throw ShapeError("psnr: length mismatch " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    }
    if (a.empty() || peak <= 0.0) throw ConfigError("psnr: empty input or non-positive peak");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        mse += diff * diff;
    }
    mse /= static_cast<double>(a.size());
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

double ssim(const std::vector<double>& a, const std::vector<double>& b, std::size_t side) {
    constexpr std::size_t kWindow = 8;
    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;
    if (a.size() != side * side || b.size() != side * side) {
        throw ShapeError("ssim: inputs must be " + std::to_string(side) + "x" + std::to_string(side));
    }
    if (side < kWindow) {
        throw ShapeError("ssim: image side " + std::to_string(side) + " smaller than window " +
                         std::to_string(kWindow));
    }
    const double n = static_cast<double>(kWindow * kWindow);
    double total = 0.0;
    std::size_t windows = 0;
    for (std::size_t r = 0; r + kWindow <= side; ++r) {
        for (std::size_t c = 0; c + kWindow <= side; ++c) {
            double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
            for (std::size_t i = 0; i < kWindow; ++i) {
                for (std::size_t j = 0; j < kWindow; ++j) {
                    const double va = a[(r + i) * side + c + j];
                    const double vb = b[(r + i) * side + c + j];
                    sa += va;
                    sb += vb;
                    saa += va * va;
                    sbb += vb * vb;
                    sab += va * vb;
                }
            }
            const double mu_a = sa / n, mu_b = sb / n;
            const double var_a = saa / n - mu_a * mu_a;
            const double var_b = sbb / n - mu_b * mu_b;
            const double cov = sab / n - mu_a * mu_b;
            const double score = ((2 * mu_a * mu_b + kC1) * (2 * cov + kC2)) /
                                 ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
            total += score;
            ++windows;
        }
    }
    return total / static_cast<double>(windows);
}

double wer(const std::vector<std::size_t>& reference, const std::vector<std::size_t>& hypothesis) {
    if (reference.empty()) throw ConfigError("wer: empty reference");
    const std::size_t n = reference.size(), m = hypothesis.size();
    std::vector<std::size_t> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t subst = prev[j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, subst});
        }
        std::swap(prev, cur);
    }
    return static_cast<double>(prev[m]) / static_cast<double>(n);
}

std::vector<std::size_t> strip_trailing_pads(const std::vector<std::size_t>& tokens) {
    std::size_t last = tokens.size();
    while (last > 0 && tokens[last - 1] == Vocabulary::pad_index) --last;
    return {tokens.begin(), tokens.begin() + last};
}

namespace {

struct ScoreEntry {
    std::size_t row = 0;  // index into candidate list
    std::size_t col = 0;  // index into truth list
    double score = 0.0;
};

// Greedy best-first matching over a dense score table; returns (row, col)
// pairs, each row and column used at most once.
std::vector<std::pair<std::size_t, std::size_t>> greedy_match(std::vector<ScoreEntry> entries,
                                                              std::size_t rows, std::size_t cols) {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const ScoreEntry& a, const ScoreEntry& b) { return a.score > b.score; });
    std::vector<bool> row_used(rows, false), col_used(cols, false);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& e : entries) {
        if (row_used[e.row] || col_used[e.col]) continue;
        row_used[e.row] = true;
        col_used[e.col] = true;
        pairs.emplace_back(e.row, e.col);
    }
    return pairs;
}

void finalize_means(MatchResult& result, std::size_t truth_count) {
    std::size_t successes = 0;
    double psnr_s = 0, ssim_s = 0, wer_s = 0, psnr_a = 0, ssim_a = 0;
    for (const auto& p : result.pairs) {
        psnr_a += p.psnr;
        ssim_a += p.ssim;
        if (p.success) {
            ++successes;
            psnr_s += p.psnr;
            ssim_s += p.ssim;
            wer_s += p.wer;
        }
    }
    result.rate = truth_count ? static_cast<double>(successes) / static_cast<double>(truth_count) : 0.0;
    if (successes) {
        result.mean_psnr_success = psnr_s / successes;
        result.mean_ssim_success = ssim_s / successes;
        result.mean_wer_success = wer_s / successes;
    }
    if (!result.pairs.empty()) {
        result.mean_psnr_all = psnr_a / result.pairs.size();
        result.mean_ssim_all = ssim_a / result.pairs.size();
    }
}

}  // namespace

MatchResult match_and_rate(const RecoveredBatch& recovered, const std::vector<ImageSample>& truth,
                           std::size_t side, const MatchThresholds& thresholds) {
    std::vector<const BinRecovery*> bins;
    for (const auto& item : recovered.items) {
        if (item.status != BinStatus::empty && item.vec) bins.push_back(&item);
    }

    std::vector<ScoreEntry> entries;
    entries.reserve(bins.size() * truth.size());
    std::vector<double> best_per_sample(truth.size(), -std::numeric_limits<double>::infinity());
    std::vector<std::vector<double>> psnr_table(bins.size(), std::vector<double>(truth.size()));
    for (std::size_t r = 0; r < bins.size(); ++r) {
        for (std::size_t c = 0; c < truth.size(); ++c) {
            const double score = psnr(*bins[r]->vec, truth[c].pixels);
            psnr_table[r][c] = score;
            entries.push_back({r, c, score});
            best_per_sample[c] = std::max(best_per_sample[c], score);
        }
    }

    MatchResult result;
    for (const auto& [r, c] : greedy_match(std::move(entries), bins.size(), truth.size())) {
        MatchedPair pair;
        pair.bin = bins[r]->bin;
        pair.source_id = truth[c].source_id;
        pair.psnr = psnr_table[r][c];
        pair.ssim = ssim(*bins[r]->vec, truth[c].pixels, side);
        pair.success = pair.psnr >= thresholds.psnr_th && pair.ssim >= thresholds.ssim_th;
        result.pairs.push_back(std::move(pair));
    }

    std::vector<bool> matched(truth.size(), false);
    for (const auto& p : result.pairs) {
        for (std::size_t c = 0; c < truth.size(); ++c) {
            if (truth[c].source_id == p.source_id) matched[c] = true;
        }
    }
    std::size_t nearest_hits = 0;
    for (std::size_t c = 0; c < truth.size(); ++c) {
        if (!matched[c]) result.unmatched_samples.push_back(truth[c].source_id);
        if (best_per_sample[c] >= thresholds.psnr_th) ++nearest_hits;
    }
    result.per_sample_rate =
        truth.empty() ? 0.0 : static_cast<double>(nearest_hits) / static_cast<double>(truth.size());
    finalize_means(result, truth.size());
    return result;
}

MatchResult match_and_rate(const TextRecoveryOutput& recovered, const std::vector<TextRecord>& truth,
                           const MatchThresholds& thresholds) {
    std::vector<ScoreEntry> entries;
    std::vector<std::vector<double>> wer_table(recovered.records.size(),
                                               std::vector<double>(truth.size()));
    std::vector<double> best_per_sample(truth.size(), std::numeric_limits<double>::infinity());
    for (std::size_t r = 0; r < recovered.records.size(); ++r) {
        const auto hyp = strip_trailing_pads(recovered.records[r].recovered.tokens);
        for (std::size_t c = 0; c < truth.size(); ++c) {
            const auto ref = strip_trailing_pads(truth[c].tokens);
            const double w = ref.empty() ? 1.0 : wer(ref, hyp);
            wer_table[r][c] = w;
            entries.push_back({r, c, 1.0 - w});
            best_per_sample[c] = std::min(best_per_sample[c], w);
        }
    }

    MatchResult result;
    for (const auto& [r, c] : greedy_match(std::move(entries), recovered.records.size(), truth.size())) {
        MatchedPair pair;
        pair.bin = recovered.records[r].bin;
        pair.source_id = truth[c].source_id;
        pair.wer = wer_table[r][c];
        pair.success = pair.wer <= thresholds.wer_th;
        result.pairs.push_back(std::move(pair));
    }

    std::vector<bool> matched(truth.size(), false);
    for (const auto& p : result.pairs) {
        for (std::size_t c = 0; c < truth.size(); ++c) {
            if (truth[c].source_id == p.source_id) matched[c] = true;
        }
    }
    std::size_t nearest_hits = 0;
    for (std::size_t c = 0; c < truth.size(); ++c) {
        if (!matched[c]) result.unmatched_samples.push_back(truth[c].source_id);
        if (best_per_sample[c] <= thresholds.wer_th) ++nearest_hits;
    }
    result.per_sample_rate =
        truth.empty() ? 0.0 : static_cast<double>(nearest_hits) / static_cast<double>(truth.size());
    finalize_means(result, truth.size());
    return result;
}

void annotate_collisions(RecoveredBatch& batch, const MatchResult& result) {
    for (auto& item : batch.items) {
        if (item.status == BinStatus::empty) continue;
        bool successful = false;
        for (const auto& p : result.pairs) {
            if (p.bin == item.bin && p.success) successful = true;
        }
        if (!successful) item.status = BinStatus::collision_suspect;
    }
}

}  // namespace fedleak
