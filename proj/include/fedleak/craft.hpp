#pragma once

#include <cstddef>
#include <vector>

#include "fedleak/crafted_module.hpp"
#include "fedleak/data.hpp"
#include "fedleak/matrix.hpp"

namespace fedleak {

/// Sorted brightness values of the auxiliary samples; the attacker's
/// empirical stand-in for the victim data's brightness distribution.
struct BrightnessCdf {
    std::vector<double> sorted_values;

    bool degenerate() const {
        return sorted_values.empty() || sorted_values.front() == sorted_values.back();
    }
    /// Empirical CDF: fraction of values <= x.
    double at(double x) const;
};

/// The k ascending brightness quantiles that bound the recovery bins:
/// h[j-1] is the empirical quantile at level j/k (nearest rank), so the last
/// entry equals the auxiliary maximum.
struct BinVector {
    std::vector<double> h;

    std::size_t k() const { return h.size(); }
};

BrightnessCdf estimate_cdf(const std::vector<ImageSample>& aux);

/// Text records first pass through the published embedding; the feature is
/// the brightness of the flattened l*e embedding vector.
BrightnessCdf estimate_cdf(const std::vector<TextRecord>& aux, const Matrix& embedding,
                           std::size_t max_len);

/// Inserts a known upper bound of the brightness feature into the CDF (1.0
/// for normalized images; the largest embedding-row mean for text). With the
/// bound present the top threshold dominates every possible input, so the
/// zero-gradient silencing holds for all clients, not just those whose data
/// stays under the auxiliary maximum.
void pad_with_upper_bound(BrightnessCdf& cdf, double bound);

/// Largest brightness any token sequence can reach under this table.
double embedding_brightness_bound(const Matrix& embedding);

BinVector bin_vector(const BrightnessCdf& cdf, std::size_t k);

/// Victim's module: first-layer neuron j computes mean(x) - h_j, so inputs
/// with brightness in (h_p, h_(p+1)] activate exactly neurons 1..p and the
/// first-layer gradients encode the per-bin inputs.
CraftedModule craft_linear_leakage(const BinVector& bins, std::size_t input_dim, double w2_row_scale,
                                   Insertion insertion = Insertion::image_front);

/// Honest clients' module: every threshold sits at the top of the auxiliary
/// range, so in-range inputs never activate and the first-layer gradients
/// are identically zero.
CraftedModule craft_zero_gradient(const BinVector& bins, std::size_t input_dim, double w2_row_scale,
                                  Insertion insertion = Insertion::image_front);

/// Sum of the crafted block's output coordinates for one input; its location
/// and range over the auxiliary set calibrate the attack-tuned head.
double module_output_sum(const CraftedModule& module, const std::vector<double>& input);

struct ActivationStats {
    double center = 0.0;
    double spread = 0.0;
};

ActivationStats measure_activation_stats(const CraftedModule& module,
                                         const std::vector<std::vector<double>>& inputs);

/// Recovery-bin index of a brightness value: the number of thresholds
/// strictly below it. 0 means below every threshold (no neuron fires, the
/// sample leaves no gradient signature); k means above the top threshold.
std::size_t bin_index(const BinVector& bins, double brightness_value);

}  // namespace fedleak
