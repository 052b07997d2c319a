#include <doctest.h>

#include <cmath>
#include <random>

#include "cbfe/dist.hpp"

using namespace cbfe;

namespace {

Categorical random_categorical(std::mt19937_64& rng, std::size_t n) {
    std::vector<double> v(n);
    double sum = 0.0;
    for (double& x : v) {
        x = 1e-6 + static_cast<double>(rng() >> 11) * 0x1.0p-53;
        sum += x;
    }
    for (double& x : v) x /= sum;
    return Categorical(v);
}

}  // namespace

TEST_CASE("entropy of basic distributions") {
    CHECK(entropy(Categorical({0.5, 0.5})) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(entropy(Categorical({1.0, 0.0})) == doctest::Approx(0.0));
    CHECK(entropy(Categorical({0.25, 0.25, 0.25, 0.25})) ==
          doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("entropy is bounded by log2(n) with equality only at uniform") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 2 + rng() % 15;
        Categorical p = random_categorical(rng, n);
        double h = entropy(p);
        double cap = std::log2(static_cast<double>(n));
        CHECK(h <= cap + 1e-9);
        bool uniform = true;
        for (std::size_t i = 0; i < n; ++i) {
            if (std::abs(p[i] - 1.0 / n) > 1e-9) uniform = false;
        }
        if (!uniform) CHECK(h < cap);
    }
    CHECK(entropy(Categorical::uniform(8)) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("kl divergence basics") {
    Categorical p({0.3, 0.7});
    CHECK(kl_divergence(p, p) == doctest::Approx(0.0));
    CHECK(kl_divergence(Categorical({1.0, 0.0}), Categorical({0.5, 0.5})) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::isinf(
        kl_divergence(Categorical({0.5, 0.5}), Categorical({1.0, 0.0}))));
    CHECK_THROWS_AS(kl_divergence(p, Categorical({1.0, 0.0, 0.0})), DimensionError);
}

TEST_CASE("kl divergence is non-negative and zero only at equality") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 2 + rng() % 7;
        Categorical p = random_categorical(rng, n);
        Categorical q = random_categorical(rng, n);
        double kl = kl_divergence(p, q);
        CHECK(kl >= 0.0);
        CHECK(kl_divergence(p, p) <= 1e-12);
    }
}

TEST_CASE("softmax") {
    Categorical s = softmax({0.0, 0.0});
    CHECK(s[0] == doctest::Approx(0.5));

    Categorical t = softmax({0.0, 0.0, 2.0, -2.0});
    double z = 1 + 1 + std::exp(2.0) + std::exp(-2.0);
    CHECK(t[0] == doctest::Approx(1.0 / z).epsilon(1e-12));
    CHECK(t[2] == doctest::Approx(std::exp(2.0) / z).epsilon(1e-12));
    CHECK(t[3] == doctest::Approx(std::exp(-2.0) / z).epsilon(1e-12));

    Categorical big = softmax({1000.0, 1000.0});
    CHECK(big[0] == doctest::Approx(0.5));

    CHECK_THROWS_AS(softmax({}), DimensionError);
}

TEST_CASE("softmax is shift invariant") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> s(3 + rng() % 5);
        for (double& x : s) x = static_cast<double>(rng() >> 11) * 0x1.0p-50 - 4.0;
        Categorical a = softmax(s);
        for (double& x : s) x += 123.456;
        Categorical b = softmax(s);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(std::abs(a[i] - b[i]) <= 1e-12);
        }
    }
}

TEST_CASE("kronecker product of vectors") {
    auto d0 = kronecker({1, 0, 0, 0}, {0.5, 0.5});
    CHECK(d0 == std::vector<double>{0.5, 0.5, 0, 0, 0, 0, 0, 0});

    CHECK(kronecker({1.0}, {0.2, 0.8}) == std::vector<double>{0.2, 0.8});

    auto c1 = kronecker(std::vector<double>(4, 0.25), std::vector<double>(4, 0.25));
    CHECK(c1.size() == 16);
    for (double v : c1) CHECK(v == doctest::Approx(1.0 / 16));
}

TEST_CASE("kronecker of two categoricals is a categorical") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        Categorical a = random_categorical(rng, 2 + rng() % 5);
        Categorical b = random_categorical(rng, 2 + rng() % 5);
        auto k = kronecker(a.probs(), b.probs());
        double sum = 0;
        for (double v : k) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("direct sum") {
    StochasticMatrix block({{0.5, 1.0}, {0.5, 0.0}, {0.0, 0.0}, {0.0, 0.0}});
    auto a = direct_sum({block, block, block, block});
    CHECK(a.rows() == 16);
    CHECK(a.cols() == 8);
    CHECK(a(0, 0) == 0.5);
    CHECK(a(4, 2) == 0.5);
    CHECK(a(4, 0) == 0.0);

    auto single = direct_sum({block});
    CHECK(single == block);

    auto eye4 =
        direct_sum({StochasticMatrix::identity(2), StochasticMatrix::identity(2)});
    CHECK(eye4 == StochasticMatrix::identity(4));
}

TEST_CASE("direct sum of column-stochastic blocks stays column-stochastic") {
    std::mt19937_64 rng(23);
    std::vector<StochasticMatrix> blocks;
    for (int b = 0; b < 3; ++b) {
        std::size_t rows = 2 + rng() % 3, cols = 1 + rng() % 3;
        std::vector<double> data(rows * cols);
        for (std::size_t c = 0; c < cols; ++c) {
            double sum = 0;
            for (std::size_t r = 0; r < rows; ++r) {
                data[r * cols + c] = 0.01 + static_cast<double>(rng() % 1000);
                sum += data[r * cols + c];
            }
            for (std::size_t r = 0; r < rows; ++r) data[r * cols + c] /= sum;
        }
        blocks.emplace_back(rows, cols, data);
    }
    auto m = direct_sum(blocks);
    for (std::size_t c = 0; c < m.cols(); ++c) {
        double sum = 0;
        for (std::size_t r = 0; r < m.rows(); ++r) sum += m(r, c);
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("categorical construction rules") {
    // Small drift renormalizes.
    Categorical ok({0.5 + 3e-10, 0.5});
    double sum = 0;
    for (double v : ok.probs()) sum += v;
    CHECK(std::abs(sum - 1.0) <= 1e-12);

    CHECK_THROWS_AS(Categorical({0.5, 0.6}), ModelError);   // too far off
    CHECK_THROWS_AS(Categorical({-0.1, 1.1}), ModelError);  // negative entry
    CHECK_THROWS_AS(Categorical({}), DimensionError);
    CHECK(Categorical({0.2, 0.5, 0.3}).argmax() == 1);
    CHECK(Categorical({0.4, 0.4, 0.2}).argmax() == 0);  // lowest index wins
}

TEST_CASE("point mass") {
    PointMass pm(2, 4);
    Categorical c = pm.to_categorical();
    CHECK(c[2] == 1.0);
    CHECK(c[0] == 0.0);
    CHECK_THROWS_AS(PointMass(4, 4), DimensionError);
}

TEST_CASE("stochastic matrix validates columns") {
    CHECK_THROWS_AS(StochasticMatrix({{0.5, 0.5}, {0.4, 0.5}}), ModelError);
    StochasticMatrix m({{0.9, 0.2}, {0.1, 0.8}});
    CHECK(m.apply({1.0, 0.0}) == std::vector<double>{0.9, 0.1});
    CHECK(m.apply_transposed({1.0, 0.0}) == std::vector<double>{0.9, 0.2});
    CHECK(m.column(1) == std::vector<double>{0.2, 0.8});
    CHECK(m.row(0) == std::vector<double>{0.9, 0.2});
}
