#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>

#include "fedleak/error.hpp"
#include "fedleak/rng.hpp"
#include "fedleak/secagg.hpp"

using namespace fedleak;

namespace {

std::vector<std::vector<double>> random_updates(std::size_t n, std::size_t len, Rng& rng,
                                                double range = 4.0) {
    std::vector<std::vector<double>> updates(n, std::vector<double>(len));
    for (auto& u : updates) {
        for (double& v : u) v = rng.uniform(-range, range);
    }
    return updates;
}

std::vector<double> plain_sum(const std::vector<std::vector<double>>& updates) {
    std::vector<double> sum(updates[0].size(), 0.0);
    for (const auto& u : updates) {
        for (std::size_t i = 0; i < u.size(); ++i) sum[i] += u[i];
    }
    return sum;
}

std::vector<double> uniform(std::size_t n) { return std::vector<double>(n, 1.0 / double(n)); }

}  // namespace

TEST_CASE("codec round trip bound") {
    FixedPointCodec codec;
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        const double x = rng.uniform(-codec.clip, codec.clip);
        const double y = codec.decode(codec.encode(x));
        CHECK(std::abs(x - y) <= 0.5 / codec.scale + 1e-15);
    }
    // clipping kicks in outside the range
    CHECK(codec.decode(codec.encode(codec.clip * 10)) == doctest::Approx(codec.clip));
    CHECK(codec.decode(codec.encode(-codec.clip * 10)) == doctest::Approx(-codec.clip));
}

TEST_CASE("single client: masked equals encoded plain update") {
    FixedPointCodec codec;
    Rng rng(7);
    const auto updates = random_updates(1, 64, rng);
    const auto bundle = mask_updates(updates, 99, codec);
    REQUIRE(bundle.updates.size() == 1);
    CHECK(bundle.updates[0].words == codec.encode_vector(updates[0]));
}

TEST_CASE("three clients: decoded sum matches plain sum") {
    FixedPointCodec codec;
    Rng rng(11);
    const auto updates = random_updates(3, 256, rng);
    const auto bundle = mask_updates(updates, 1234, codec);
    const auto agg = aggregate(bundle, uniform(3), codec);
    const auto expected = plain_sum(updates);
    const double tol = 3.0 / (2.0 * codec.scale);
    for (std::size_t i = 0; i < agg.size(); ++i) {
        CHECK(std::abs(agg[i] - expected[i]) <= tol);
    }
}

TEST_CASE("sum property fuzz: random n, lengths and seeds") {
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        FixedPointCodec codec;
        const std::size_t n = 1 + rng.below(8);
        const std::size_t len = 1 + rng.below(200);
        const auto updates = random_updates(n, len, rng);
        const auto bundle = mask_updates(updates, rng.next_u64(), codec);
        const auto agg = aggregate(bundle, uniform(n), codec);
        const auto expected = plain_sum(updates);
        const double tol = double(n) / (2.0 * codec.scale);
        for (std::size_t i = 0; i < len; ++i) {
            CHECK(std::abs(agg[i] - expected[i]) <= tol);
        }
    }
}

TEST_CASE("masked words look unrelated to plain words") {
    FixedPointCodec codec;
    Rng rng(17);
    const std::size_t len = 10000;
    const auto updates = random_updates(2, len, rng);
    const auto bundle = mask_updates(updates, 4242, codec);
    const auto plain = codec.encode_vector(updates[0]);

    // Pearson correlation between signed word values.
    double mx = 0, my = 0;
    std::vector<double> xs(len), ys(len);
    for (std::size_t i = 0; i < len; ++i) {
        xs[i] = double(static_cast<std::int64_t>(plain[i]));
        ys[i] = double(static_cast<std::int64_t>(bundle.updates[0].words[i]));
        mx += xs[i];
        my += ys[i];
    }
    mx /= len;
    my /= len;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < len; ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    CHECK(std::abs(sxy / std::sqrt(sxx * syy)) < 0.05);
}

TEST_CASE("pairwise masks cancel bitwise in the word sum") {
    FixedPointCodec codec;
    Rng rng(23);
    const auto updates = random_updates(5, 128, rng);
    const auto bundle = mask_updates(updates, 777, codec);

    std::vector<std::uint64_t> masked_sum(128, 0), plain_sum_words(128, 0);
    for (const auto& u : bundle.updates) {
        for (std::size_t i = 0; i < 128; ++i) masked_sum[i] += u.words[i];
    }
    for (const auto& u : updates) {
        const auto words = codec.encode_vector(u);
        for (std::size_t i = 0; i < 128; ++i) plain_sum_words[i] += words[i];
    }
    CHECK(masked_sum == plain_sum_words);
}

TEST_CASE("all-zero updates aggregate to zero") {
    FixedPointCodec codec;
    const std::vector<std::vector<double>> updates(4, std::vector<double>(32, 0.0));
    const auto bundle = mask_updates(updates, 31, codec);
    const auto agg = aggregate(bundle, uniform(4), codec);
    for (double v : agg) CHECK(v == 0.0);
}

TEST_CASE("dropped client is caught by the checksum") {
    FixedPointCodec codec;
    Rng rng(29);
    const auto updates = random_updates(4, 64, rng);
    auto bundle = mask_updates(updates, 55, codec);
    bundle.updates.pop_back();
    std::vector<double> w = uniform(3);
    CHECK_THROWS_AS(aggregate(bundle, w, codec), ProtocolError);
}

TEST_CASE("protocol validation errors") {
    FixedPointCodec codec;
    CHECK_THROWS_AS(mask_updates({}, 1, codec), ConfigError);
    CHECK_THROWS_AS(mask_updates({{1.0, 2.0}, {1.0}}, 1, codec), ProtocolError);

    Rng rng(31);
    const auto updates = random_updates(2, 8, rng);
    auto bundle = mask_updates(updates, 9, codec);
    std::vector<double> wrong_count{1.0};
    CHECK_THROWS_AS(aggregate(bundle, wrong_count, codec), ProtocolError);
    std::vector<double> nonuniform{0.7, 0.3};
    CHECK_THROWS_AS(aggregate(bundle, nonuniform, codec), ConfigError);
    bundle.updates[1].words.pop_back();
    std::vector<double> ok = uniform(2);
    CHECK_THROWS_AS(aggregate(bundle, ok, codec), ProtocolError);
}
