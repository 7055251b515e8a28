// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rbmcf/model.hpp"
#include "rbmcf/rng.hpp"

using namespace rbmcf;

namespace {

RbmParams random_params(int m, int F, int K, uint64_t seed, double scale = 0.5) {
    RbmParams p(m, F, K);
    RngStream rng(seed, 0x504152);
    for (auto& x : p.W) x = scale * rng.next_normal();
    for (auto& x : p.b) x = scale * rng.next_normal();
    for (auto& x : p.c) x = scale * rng.next_normal();
    return p;
}

VisibleState random_full_state(int m, int K, uint64_t seed) {
    VisibleState v;
    RngStream rng(seed, 0x565354);
    for (int i = 0; i < m; ++i) {
        v.items.push_back(i);
        v.levels.push_back(1 + static_cast<int>(rng.next_u64() % static_cast<uint64_t>(K)));
    }
    return v;
}

}  // namespace

TEST_CASE("energy is zero when all parameters are zero") {
    RbmParams p(3, 2, 5);
    VisibleState v{{0, 2}, {1, 5}};
    HiddenState h{{1.0, 0.0}, true};
    CHECK(energy(v, h, p) == 0.0);
}

TEST_CASE("energy sums the three terms on a one-item model") {
    RbmParams p(1, 1, 1);
    p.w(0, 0, 1) = 2.0;
    p.bias_v(0, 1) = 3.0;
    p.c[0] = 5.0;
    VisibleState v{{0}, {1}};
    HiddenState h{{1.0}, true};
    CHECK(energy(v, h, p) == doctest::Approx(-10.0).epsilon(1e-15));
}

TEST_CASE("unmasked items are excluded regardless of their parameters") {
    RbmParams p(2, 1, 2);
    p.w(0, 0, 2) = 1.0;
    p.bias_v(0, 2) = 1.0;
    p.c[0] = 1.0;
    for (int k = 1; k <= 2; ++k) {
        p.w(1, 0, k) = 7.0;
        p.bias_v(1, k) = 7.0;
    }
    VisibleState v{{0}, {2}};
    HiddenState h{{1.0}, true};
    CHECK(energy(v, h, p) == doctest::Approx(-3.0).epsilon(1e-15));
}

TEST_CASE("energy with an empty mask and zero hidden vector is zero") {
    RbmParams p = random_params(3, 2, 4, 17);
    VisibleState v;
    HiddenState h{{0.0, 0.0}, true};
    CHECK(energy(v, h, p) == 0.0);
}

TEST_CASE("energy requires a binary hidden state") {
    RbmParams p(1, 1, 1);
    VisibleState v{{0}, {1}};
    HiddenState h{{0.5}, false};
    CHECK_THROWS_AS(energy(v, h, p), ArgumentError);
}

TEST_CASE("visible conditional is uniform for zero parameters") {
    RbmParams p(2, 3, 5);
    HiddenState h{{0.0, 0.0, 0.0}, true};
    auto probs = visible_conditional(h, p, 0);
    REQUIRE(probs.size() == 5);
    for (double q : probs) CHECK(q == doctest::Approx(0.2).epsilon(1e-14));
}

TEST_CASE("visible conditional softmax of (ln 2, 0) is (2/3, 1/3)") {
    RbmParams p(1, 1, 2);
    p.bias_v(0, 1) = std::log(2.0);
    HiddenState h{{0.0}, true};
    auto probs = visible_conditional(h, p, 0);
    CHECK(probs[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(probs[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("visible conditional is invariant to a constant shift") {
    RbmParams p(1, 1, 3);
    for (int k = 1; k <= 3; ++k) p.w(0, 0, k) = 1.0;
    HiddenState h{{1.0}, true};
    auto probs = visible_conditional(h, p, 0);
    for (double q : probs) CHECK(q == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("visible conditional sums to one and stays nonnegative") {
    for (uint64_t seed = 1; seed <= 20; ++seed) {
        RbmParams p = random_params(3, 4, 5, seed, 2.0);
        RngStream rng(seed, 0x48);
        HiddenState h;
        for (int j = 0; j < p.F; ++j) h.values.push_back(rng.next_double());
        h.binary = false;
        for (int i = 0; i < p.m; ++i) {
            auto probs = visible_conditional(h, p, i);
            double total = 0.0;
            for (double q : probs) {
                CHECK(q >= 0.0);
                total += q;
            }
            CHECK(std::abs(total - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("visible conditional rejects an out-of-range item") {
    RbmParams p(2, 1, 2);
    HiddenState h{{0.0}, true};
    CHECK_THROWS_AS(visible_conditional(h, p, 2), IndexError);
    CHECK_THROWS_AS(visible_conditional(h, p, -1), IndexError);
}

TEST_CASE("hidden conditional is one half for zero parameters") {
    RbmParams p(2, 3, 5);
    VisibleState v{{0, 1}, {2, 4}};
    auto probs = hidden_conditional(v, p);
    REQUIRE(probs.size() == 3);
    for (double q : probs) CHECK(q == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("hidden conditional evaluates the sigmoid directly") {
    RbmParams p(1, 2, 3);
    p.w(0, 0, 2) = 0.5;
    p.w(0, 1, 2) = 0.5;
    VisibleState v{{0}, {2}};
    auto probs = hidden_conditional(v, p);
    for (double q : probs) CHECK(q == doctest::Approx(0.622459).epsilon(1e-5));
}

TEST_CASE("hidden conditional cancels the bias exactly") {
    RbmParams p(1, 1, 2);
    p.w(0, 0, 1) = 1.25;
    p.c[0] = -1.25;
    VisibleState v{{0}, {1}};
    CHECK(hidden_conditional(v, p)[0] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("hidden conditional stays strictly inside (0,1) for finite params") {
    RbmParams p = random_params(3, 5, 4, 9, 3.0);
    VisibleState v = random_full_state(3, 4, 9);
    for (double q : hidden_conditional(v, p)) {
        CHECK(q > 0.0);
        CHECK(q < 1.0);
    }
}

TEST_CASE("log f of the zero model counts hidden units") {
    RbmParams p1(2, 1, 3);
    VisibleState v{{0}, {1}};
    CHECK(log_f_exact(v, p1) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    RbmParams p3(2, 3, 3);
    CHECK(log_f_exact(v, p3) == doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("log f enumeration agrees with the factorized form") {
    for (uint64_t seed = 1; seed <= 25; ++seed) {
        int F = 1 + static_cast<int>(seed % 12);
        RbmParams p = random_params(2, F, 2, seed, 1.0);
        VisibleState v = random_full_state(2, 2, seed * 31 + 1);
        CHECK(std::abs(log_f_exact(v, p) - log_f_factorized(v, p)) <= 1e-10);
    }
}

TEST_CASE("log f enumeration is guarded against huge hidden layers") {
    RbmParams p(1, 21, 2);
    VisibleState v{{0}, {1}};
    CHECK_THROWS_AS(log_f_exact(v, p), CapacityError);
}

TEST_CASE("log f gradient at zero parameters") {
    RbmParams p(2, 3, 2);
    VisibleState v{{0}, {2}};
    Gradients g = log_f_gradient_exact(v, p);
    for (int j = 0; j < p.F; ++j) CHECK(g.dc[j] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(g.dbv(0, 2) == 1.0);
    CHECK(g.dbv(0, 1) == 0.0);
    CHECK(g.dbv(1, 1) == 0.0);
    CHECK(g.dbv(1, 2) == 0.0);
}

TEST_CASE("log f gradient matches central finite differences") {
    for (uint64_t seed = 1; seed <= 5; ++seed) {
        RbmParams p = random_params(2, 3, 2, seed, 0.7);
        VisibleState v = random_full_state(2, 2, seed + 100);
        Gradients g = log_f_gradient_exact(v, p);

        const double h = 1e-6;
        auto check_fd = [&](double* param, double analytic) {
            double save = *param;
            *param = save + h;
            double up = log_f_exact(v, p);
            *param = save - h;
            double dn = log_f_exact(v, p);
            *param = save;
            double fd = (up - dn) / (2.0 * h);
            if (std::abs(analytic) < 1e-3) {
                CHECK(std::abs(fd - analytic) <= 1e-8);
            } else {
                CHECK(std::abs(fd - analytic) <= 1e-5 * std::abs(analytic));
            }
        };
        for (size_t t = 0; t < p.W.size(); ++t) check_fd(&p.W[t], g.dW[t]);
        for (size_t t = 0; t < p.b.size(); ++t) check_fd(&p.b[t], g.db[t]);
        for (size_t t = 0; t < p.c.size(); ++t) check_fd(&p.c[t], g.dc[t]);
    }
}

TEST_CASE("exact NLL of the uniform model is m log K") {
    RbmParams p1(1, 2, 2);
    std::vector<VisibleState> data1 = {VisibleState{{0}, {1}}, VisibleState{{0}, {2}}};
    CHECK(exact_nll(data1, p1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    RbmParams p2(2, 2, 2);
    std::vector<VisibleState> data2 = {VisibleState{{0, 1}, {1, 2}}};
    CHECK(exact_nll(data2, p2) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("exact NLL agrees with brute-force enumeration of Z") {
    RbmParams p = random_params(2, 2, 2, 42, 0.8);
    std::vector<VisibleState> data;
    for (uint64_t s = 0; s < 4; ++s) data.push_back(random_full_state(2, 2, 500 + s));

    // Independent oracle: direct sums over all K^m visible states.
    double z = 0.0;
    for (const auto& v : enumerate_full_states(2, 2)) z += std::exp(log_f_exact(v, p));
    double mean_lf = 0.0;
    for (const auto& v : data) mean_lf += log_f_exact(v, p);
    mean_lf /= static_cast<double>(data.size());
    double expected = std::log(z) - mean_lf;

    CHECK(exact_nll(data, p) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("exact NLL is invariant under a per-item bias shift") {
    RbmParams p = random_params(2, 2, 2, 7, 0.6);
    std::vector<VisibleState> data;
    for (uint64_t s = 0; s < 3; ++s) data.push_back(random_full_state(2, 2, 900 + s));
    double before = exact_nll(data, p);
    for (int k = 1; k <= p.K; ++k) p.bias_v(0, k) += 0.8125;
    double after = exact_nll(data, p);
    CHECK(std::abs(before - after) <= 1e-9);
}

TEST_CASE("exact NLL enforces the enumeration capacity guard") {
    RbmParams p(7, 2, 5);  // 5^7 visible configurations
    std::vector<VisibleState> data = {random_full_state(7, 5, 1)};
    CHECK_THROWS_AS(exact_nll(data, p), CapacityError);
}

TEST_CASE("visible state validation rejects malformed masks") {
    RbmParams p(3, 1, 2);
    VisibleState unsorted{{2, 0}, {1, 1}};
    CHECK_THROWS_AS(unsorted.validate(p), ShapeError);
    VisibleState bad_level{{0}, {3}};
    CHECK_THROWS_AS(bad_level.validate(p), ShapeError);
    VisibleState bad_item{{3}, {1}};
    CHECK_THROWS_AS(bad_item.validate(p), IndexError);
}
