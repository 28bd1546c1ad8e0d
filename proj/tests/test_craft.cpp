#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fedleak/craft.hpp"
#include "fedleak/data.hpp"
#include "fedleak/error.hpp"
#include "fedleak/model.hpp"
#include "fedleak/rng.hpp"

using namespace fedleak;

namespace {

// Independent quantile oracle: smallest value v with count(x <= v) >= j*n/k.
double quantile_oracle(std::vector<double> values, std::size_t j, std::size_t k) {
    std::sort(values.begin(), values.end());
    const double need = double(j) * double(values.size()) / double(k);
    std::size_t count = 0;
    for (double v : values) {
        ++count;
        if (double(count) >= need - 1e-12) return v;
    }
    return values.back();
}

}  // namespace

TEST_CASE("estimate_cdf sorts brightness values") {
    std::vector<ImageSample> aux = {
        {{0.2, 0.2}, 0, "a"}, {{0.8, 0.8}, 0, "b"}, {{0.5, 0.5}, 0, "c"}};
    const auto cdf = estimate_cdf(aux);
    CHECK(cdf.sorted_values == std::vector<double>{0.2, 0.5, 0.8});
    CHECK_FALSE(cdf.degenerate());

    std::vector<ImageSample> constant = {{{0.4, 0.4}, 0, "a"}, {{0.4, 0.4}, 0, "b"}};
    CHECK(estimate_cdf(constant).degenerate());

    CHECK_THROWS_AS(estimate_cdf(std::vector<ImageSample>{}), ConfigError);
}

TEST_CASE("estimate_cdf empirical value at the median") {
    const auto samples = synth_images(1000, 8, 2, 51);
    const auto cdf = estimate_cdf(samples);
    const double median = cdf.sorted_values[cdf.sorted_values.size() / 2];
    // direct count oracle
    std::size_t below = 0;
    for (const auto& s : samples) {
        if (brightness(s.pixels) <= median) ++below;
    }
    const double level = double(below) / double(samples.size());
    CHECK(level == doctest::Approx(0.5).epsilon(0.1));
    CHECK(cdf.at(median) == doctest::Approx(level).epsilon(1e-12));
}

TEST_CASE("bin_vector nearest-rank quantiles") {
    BrightnessCdf cdf;
    cdf.sorted_values = {1, 2, 3, 4};
    const auto bins = bin_vector(cdf, 2);
    CHECK(bins.h == std::vector<double>{2, 4});

    const auto one = bin_vector(cdf, 1);
    CHECK(one.h == std::vector<double>{4});

    CHECK_THROWS_AS(bin_vector(cdf, 0), ConfigError);
}

TEST_CASE("bin_vector matches the sort-and-index oracle") {
    Rng rng(3);
    std::vector<double> values;
    for (int i = 0; i < 257; ++i) values.push_back(rng.uniform());
    BrightnessCdf cdf;
    cdf.sorted_values = values;
    std::sort(cdf.sorted_values.begin(), cdf.sorted_values.end());
    for (std::size_t k : {1, 3, 10, 32}) {
        const auto bins = bin_vector(cdf, k);
        for (std::size_t j = 1; j <= k; ++j) {
            CHECK(bins.h[j - 1] == quantile_oracle(values, j, k));
        }
        CHECK(bins.h.back() == cdf.sorted_values.back());
        CHECK(std::is_sorted(bins.h.begin(), bins.h.end()));
    }
}

TEST_CASE("bin_vector approximates uniform quantiles") {
    Rng rng(9);
    BrightnessCdf cdf;
    for (int i = 0; i < 10000; ++i) cdf.sorted_values.push_back(rng.uniform());
    std::sort(cdf.sorted_values.begin(), cdf.sorted_values.end());
    const auto bins = bin_vector(cdf, 10);
    for (std::size_t j = 1; j <= 10; ++j) {
        CHECK(std::abs(bins.h[j - 1] - double(j) / 10.0) < 0.03);
    }
}

TEST_CASE("craft_linear_leakage structure") {
    BinVector bins;
    bins.h = {0.3, 0.7};
    const auto m = craft_linear_leakage(bins, 3, 1.0);
    CHECK(m.kind == ModuleKind::linear_leakage);
    CHECK(m.w1.rows() == 2);
    CHECK(m.w1.cols() == 3);
    for (double v : m.w1.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(m.b1(0, 0) == -0.3);
    CHECK(m.b1(0, 1) == -0.7);
    CHECK(m.w2.rows() == 3);
    CHECK(m.w2.cols() == 2);
    for (double v : m.w2.data()) CHECK(v == 1.0);
    CHECK(max_abs(m.b2) == 0.0);
}

TEST_CASE("linear-leakage pre-activation equals brightness minus threshold") {
    const auto samples = synth_images(40, 6, 2, 13);
    std::vector<ImageSample> aux(samples.begin(), samples.begin() + 30);
    const auto bins = bin_vector(estimate_cdf(aux), 5);
    const auto m = craft_linear_leakage(bins, 36, 1.0);

    for (std::size_t i = 30; i < samples.size(); ++i) {
        const auto& x = samples[i].pixels;
        const double b = brightness(x);
        for (std::size_t j = 0; j < m.bins(); ++j) {
            double pre = m.b1(0, j);
            for (std::size_t c = 0; c < x.size(); ++c) pre += m.w1(j, c) * x[c];
            CHECK(pre == doctest::Approx(b - bins.h[j]).epsilon(1e-9));
        }
    }
}

TEST_CASE("activation pattern selects exactly the bin prefix") {
    const auto samples = synth_images(60, 6, 2, 29);
    std::vector<ImageSample> aux(samples.begin(), samples.begin() + 40);
    const auto bins = bin_vector(estimate_cdf(aux), 6);
    const auto m = craft_linear_leakage(bins, 36, 1.0);

    for (std::size_t i = 40; i < samples.size(); ++i) {
        const double b = brightness(samples[i].pixels);
        const std::size_t expected = bin_index(bins, b);
        for (std::size_t j = 0; j < m.bins(); ++j) {
            const bool active = b - bins.h[j] > 0.0;
            CHECK(active == (j < expected));
        }
    }
}

TEST_CASE("craft_zero_gradient silences the auxiliary set") {
    const auto samples = synth_images(120, 6, 2, 31);
    const auto bins = bin_vector(estimate_cdf(samples), 8);
    const auto m = craft_zero_gradient(bins, 36, 1.0);
    for (double v : m.b1.data()) CHECK(v == -bins.h.back());

    // every in-distribution sample: post-ReLU activations all zero, so the
    // module output is exactly b2
    for (const auto& s : samples) {
        const double b = brightness(s.pixels);
        for (std::size_t j = 0; j < m.bins(); ++j) {
            CHECK(b + m.b1(0, j) <= 0.0);
        }
        CHECK(module_output_sum(m, s.pixels) == 0.0);  // b2 == 0
    }

    // adversarially bright input above the auxiliary maximum leaks through
    if (bins.h.back() < 1.0) {
        const std::vector<double> ones(36, 1.0);
        CHECK(module_output_sum(m, ones) > 0.0);
    }
}

TEST_CASE("bin coverage fraction reflects out-of-range tail only") {
    const auto all = synth_images(2000, 6, 2, 37);
    std::vector<ImageSample> aux(all.begin(), all.begin() + 1000);
    std::vector<ImageSample> rest(all.begin() + 1000, all.end());
    const auto bins = bin_vector(estimate_cdf(aux), 16);
    std::size_t outside = 0;
    for (const auto& s : rest) {
        if (brightness(s.pixels) > bins.h.back()) ++outside;
    }
    // same distribution: the out-of-range tail shrinks with aux size
    CHECK(double(outside) / double(rest.size()) < 0.02);
}

TEST_CASE("equal-mass bins at desk scale (chi-square sanity)") {
    const auto all = synth_images(4000, 6, 2, 41);
    std::vector<ImageSample> aux(all.begin(), all.begin() + 2000);
    std::vector<ImageSample> rest(all.begin() + 2000, all.end());
    const std::size_t k = 10;
    const auto bins = bin_vector(estimate_cdf(aux), k);

    std::vector<std::size_t> counts(k + 1, 0);
    for (const auto& s : rest) ++counts[bin_index(bins, brightness(s.pixels))];
    // The k equal-mass intervals are (-inf,h1], (h1,h2], ..., (h[k-1],hk];
    // index k is the above-maximum tail, nearly empty for matched
    // distributions.
    const double expected = double(rest.size()) / double(k);
    double chi2 = 0.0;
    for (std::size_t b = 0; b < k; ++b) {
        const double diff = double(counts[b]) - expected;
        chi2 += diff * diff / expected;
    }
    // 9 degrees of freedom; 99.9th percentile is ~27.9
    CHECK(chi2 < 27.9);
    CHECK(counts[k] < rest.size() / 100);
}

TEST_CASE("bin_index convention: ties fall to the lower bin") {
    BinVector bins;
    bins.h = {0.2, 0.5, 0.9};
    CHECK(bin_index(bins, 0.1) == 0);   // below every threshold
    CHECK(bin_index(bins, 0.2) == 0);   // tie: inactive
    CHECK(bin_index(bins, 0.3) == 1);
    CHECK(bin_index(bins, 0.5) == 1);   // tie
    CHECK(bin_index(bins, 0.6) == 2);
    CHECK(bin_index(bins, 0.95) == 3);  // above the top threshold
}
