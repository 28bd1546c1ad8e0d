#include "fedleak/craft.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fedleak/error.hpp"

namespace fedleak {

double BrightnessCdf::at(double x) const {
    const auto it = std::upper_bound(sorted_values.begin(), sorted_values.end(), x);
    return static_cast<double>(it - sorted_values.begin()) / static_cast<double>(sorted_values.size());
}

BrightnessCdf estimate_cdf(const std::vector<ImageSample>& aux) {
    if (aux.empty()) throw ConfigError("estimate_cdf: auxiliary set is empty");
    BrightnessCdf cdf;
    cdf.sorted_values.reserve(aux.size());
    for (const auto& s : aux) cdf.sorted_values.push_back(brightness(s.pixels));
    std::sort(cdf.sorted_values.begin(), cdf.sorted_values.end());
    return cdf;
}

BrightnessCdf estimate_cdf(const std::vector<TextRecord>& aux, const Matrix& embedding,
                           std::size_t max_len) {
    if (aux.empty()) throw ConfigError("estimate_cdf: auxiliary set is empty");
    const std::size_t e = embedding.cols();
    BrightnessCdf cdf;
    cdf.sorted_values.reserve(aux.size());
    std::vector<double> flat(max_len * e);
    for (const auto& rec : aux) {
        for (std::size_t p = 0; p < max_len; ++p) {
            const auto row = embedding.row(rec.tokens[p]);
            std::copy(row.begin(), row.end(), flat.begin() + p * e);
        }
        cdf.sorted_values.push_back(brightness(flat));
    }
    std::sort(cdf.sorted_values.begin(), cdf.sorted_values.end());
    return cdf;
}

void pad_with_upper_bound(BrightnessCdf& cdf, double bound) {
    if (cdf.sorted_values.empty()) throw ConfigError("pad_with_upper_bound: empty CDF");
    const auto it = std::upper_bound(cdf.sorted_values.begin(), cdf.sorted_values.end(), bound);
    cdf.sorted_values.insert(it, bound);
}

double embedding_brightness_bound(const Matrix& embedding) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < embedding.rows(); ++v) {
        double mean = 0.0;
        for (double x : embedding.row(v)) mean += x;
        best = std::max(best, mean / static_cast<double>(embedding.cols()));
    }
    return best;
}

BinVector bin_vector(const BrightnessCdf& cdf, std::size_t k) {
    if (k < 1) throw ConfigError("bin_vector: k must be >= 1");
    const auto& values = cdf.sorted_values;
    if (values.empty()) throw ConfigError("bin_vector: empty CDF");
    const std::size_t n = values.size();
    BinVector bins;
    bins.h.resize(k);
    for (std::size_t j = 1; j <= k; ++j) {
        // Nearest-rank quantile at level j/k.
        const std::size_t rank = static_cast<std::size_t>(
            std::ceil(static_cast<double>(j) * static_cast<double>(n) / static_cast<double>(k)));
        bins.h[j - 1] = values[std::min(rank, n) - 1];
    }
    return bins;
}

namespace {

CraftedModule craft_common(const BinVector& bins, std::size_t input_dim, double w2_row_scale,
                           Insertion insertion) {
    if (input_dim < 1) throw ConfigError("crafted module needs input_dim >= 1");
    const std::size_t k = bins.k();
    CraftedModule m;
    m.w1 = Matrix::constant(k, input_dim, 1.0 / static_cast<double>(input_dim));
    m.b1 = Matrix(1, k);
    m.w2 = Matrix::constant(input_dim, k, w2_row_scale);
    m.b2 = Matrix(1, input_dim);
    m.insertion = insertion;
    return m;
}

}  // namespace

CraftedModule craft_linear_leakage(const BinVector& bins, std::size_t input_dim, double w2_row_scale,
                                   Insertion insertion) {
    CraftedModule m = craft_common(bins, input_dim, w2_row_scale, insertion);
    for (std::size_t j = 0; j < bins.k(); ++j) m.b1(0, j) = -bins.h[j];
    m.kind = ModuleKind::linear_leakage;
    return m;
}

CraftedModule craft_zero_gradient(const BinVector& bins, std::size_t input_dim, double w2_row_scale,
                                  Insertion insertion) {
    CraftedModule m = craft_common(bins, input_dim, w2_row_scale, insertion);
    const double top = bins.h.back();
    for (std::size_t j = 0; j < bins.k(); ++j) m.b1(0, j) = -top;
    m.kind = ModuleKind::zero_gradient;
    return m;
}

double module_output_sum(const CraftedModule& module, const std::vector<double>& input) {
    const double mean = brightness(input);
    double active_sum = 0.0;
    for (std::size_t j = 0; j < module.bins(); ++j) {
        const double pre = mean + module.b1(0, j);
        if (pre > 0.0) active_sum += pre;
    }
    // w2 rows are constant, so every output coordinate equals
    // scale * active_sum + b2_r; summing over coordinates:
    double total = 0.0;
    for (std::size_t r = 0; r < module.input_dim(); ++r) total += module.b2(0, r);
    return total + module.w2(0, 0) * active_sum * static_cast<double>(module.input_dim());
}

std::size_t bin_index(const BinVector& bins, double brightness_value) {
    // Thresholds are ascending; count those strictly below the value.
    const auto it = std::lower_bound(bins.h.begin(), bins.h.end(), brightness_value);
    // lower_bound gives the first h >= value, i.e. the count of h < value.
    return static_cast<std::size_t>(it - bins.h.begin());
}

ActivationStats measure_activation_stats(const CraftedModule& module,
                                         const std::vector<std::vector<double>>& inputs) {
    if (inputs.empty()) throw ConfigError("measure_activation_stats: no inputs");
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (const auto& x : inputs) {
        const double t = module_output_sum(module, x);
        if (first) {
            lo = hi = t;
            first = false;
        } else {
            lo = std::min(lo, t);
            hi = std::max(hi, t);
        }
    }
    return {0.5 * (lo + hi), hi - lo};
}

}  // namespace fedleak
