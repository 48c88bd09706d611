#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "qrf/prob_strategy.hpp"

using Catch::Approx;
using namespace qrf;

TEST_CASE("trade_win_probability examples", "[prob]") {
    CHECK(trade_win_probability({0.2, 0.2}, 1.0 / 255.0) == 0.5);

    double z = (0.09 - 0.04) * std::sqrt(1.0 / 255.0) / (2.0 * std::sqrt(0.13));
    double expect = oracle::normal_cdf_c(z);
    CHECK(expect == Approx(0.49827).margin(1e-5));
    CHECK(trade_win_probability({0.2, 0.3}, 1.0 / 255.0) == Approx(expect).margin(1e-12));

    CHECK_THROWS_AS(trade_win_probability({0.0, 0.2}, 1.0 / 255.0), std::domain_error);
    CHECK_THROWS_AS(trade_win_probability({0.2, 0.2}, 0.0), std::domain_error);
}

TEST_CASE("trade_win_probability sign convention", "[prob]") {
    // larger stock volatility than the market's opinion favours the buyer
    CHECK(trade_win_probability({0.3, 0.2}, 1.0 / 255.0) > 0.5);
    CHECK(trade_win_probability({0.1, 0.2}, 1.0 / 255.0) < 0.5);
}

TEST_CASE("trade_win_probability complements under vol swap", "[prob]") {
    for (double a : {0.05, 0.2, 0.45})
        for (double b : {0.1, 0.3}) {
            double p = trade_win_probability({a, b}, 1.0 / 255.0);
            double q = trade_win_probability({b, a}, 1.0 / 255.0);
            CHECK(std::fabs(p + q - 1.0) <= 5e-16);
        }
}

TEST_CASE("zeta_dispersion", "[prob]") {
    CHECK(zeta_dispersion(0.5, 2000) == Approx(0.000125).epsilon(1e-14));
    CHECK(std::sqrt(zeta_dispersion(0.5, 2000)) == Approx(0.011180).margin(1e-6));
    CHECK(zeta_dispersion(0.0, 10) == 0.0);
    CHECK(zeta_dispersion(1.0, 10) == 0.0);
    CHECK(zeta_dispersion(0.515, 2000) == 0.515 * 0.485 / 2000.0);
    CHECK(zeta_dispersion(0.515, 2000) == Approx(0.00012489).margin(5e-9));
    CHECK_THROWS_AS(zeta_dispersion(0.5, 0), std::domain_error);
    CHECK_THROWS_AS(zeta_dispersion(1.5, 10), std::domain_error);
}

TEST_CASE("majority_profit_probability examples", "[prob]") {
    CHECK(majority_profit_probability(0.5, 9) == 0.5);
    CHECK(majority_profit_probability(0.5, 2001) == 0.5);
    CHECK(majority_profit_probability(0.6, 10) == Approx(0.6331).margin(1e-4));
    CHECK(majority_profit_probability(0.6, 10) ==
          Approx(oracle::binomial_tail(10, 6, 0.6)).margin(1e-13));
}

TEST_CASE("majority_profit_probability matches brute force for small n", "[prob]") {
    for (long n = 4; n <= 30; ++n)
        for (double p = 0.1; p < 0.95; p += 0.1)
            CHECK(majority_profit_probability(p, n) ==
                  Approx(oracle::binomial_tail(n, n / 2 + 1, p)).margin(1e-12));
}

TEST_CASE("majority probability tends to one and the approximation error dies out", "[prob]") {
    // the approximation error is not monotone in n, but it vanishes in the
    // limit while the exact tail approaches one
    double err_small = std::fabs(majority_profit_probability(0.55, 101) -
                                 majority_profit_normal_approx(0.55, 101));
    double err_large = std::fabs(majority_profit_probability(0.55, 6401) -
                                 majority_profit_normal_approx(0.55, 6401));
    CHECK(err_large < 1e-6);
    CHECK(err_large < err_small);
    CHECK(majority_profit_probability(0.55, 6401) > 0.9999);
    // spot-check the exact tail at a large n against high-precision values
    CHECK(majority_profit_probability(0.55, 401) == Approx(0.977720030237).margin(1e-9));
}

TEST_CASE("required_probability example and limits", "[prob]") {
    double z = oracle::normal_inv(0.05);  // complementary inverse of 0.95
    double expect = 0.5 * (1.0 + std::sqrt(z * z / (2000.0 + z * z)));
    CHECK(expect == Approx(0.51836).margin(1e-4));
    CHECK(required_probability(0.95, 2000) == Approx(expect).margin(1e-10));

    CHECK(required_probability(0.95, 100000000) == Approx(0.5).margin(1e-3));
    CHECK(required_probability(0.5000001, 2000) == Approx(0.5).margin(1e-5));
    CHECK_THROWS_AS(required_probability(0.5, 2000), std::domain_error);
    CHECK_THROWS_AS(required_probability(0.3, 2000), std::domain_error);
}

TEST_CASE("required_probability is decreasing in n and self-consistent", "[prob]") {
    double prev = 1.0;
    for (long n : {10L, 100L, 1000L, 10000L}) {
        double p = required_probability(0.95, n);
        CHECK(p > 0.5);
        CHECK(p < prev);
        prev = p;
        // plugging the bound back through the normal approximation returns
        // at least the requested confidence
        CHECK(majority_profit_normal_approx(p, n) >= 0.95 - 1e-9);
    }
}

TEST_CASE("required_vol_gap example and limits", "[prob]") {
    double gap = required_vol_gap(0.2, 0.2, 1.0 / 255.0, 0.95, 2000);
    CHECK(gap == Approx(1.0398).margin(1e-2));
    CHECK(gap == Approx(1.04068).margin(1e-3));  // quadrature-oracle value

    // confidence at one half demands no gap at all
    CHECK(required_vol_gap(0.2, 0.2, 1.0 / 255.0, 0.5 + 1e-12, 2000) == Approx(0.0).margin(1e-5));

    double prev = 1e9;
    for (long n : {100L, 1000L, 10000L}) {
        double g = required_vol_gap(0.2, 0.2, 1.0 / 255.0, 0.95, n);
        CHECK(g >= 0.0);
        CHECK(g < prev);
        prev = g;
    }
}

TEST_CASE("ideal_signal thresholds", "[strategy]") {
    StrategyParams params{0.03, -0.02, 0.0};
    CHECK(ideal_signal({0.23, 0.2}, params).action == Action::Buy);       // gap == beta1
    CHECK(ideal_signal({0.30, 0.2}, params).action == Action::Buy);
    CHECK(ideal_signal({0.18, 0.2}, params).action == Action::Short);     // gap == beta2
    CHECK(ideal_signal({0.10, 0.2}, params).action == Action::Short);
    CHECK(ideal_signal({0.2, 0.2}, params).action == Action::Abstain);
    CHECK(ideal_signal({0.21, 0.2}, params).action == Action::Abstain);
    CHECK_THROWS_AS(ideal_signal({0.2, 0.2}, StrategyParams{-1.0, -0.02, 0.0}),
                    std::invalid_argument);
}

TEST_CASE("ideal_signal depends only on the vol difference", "[strategy]") {
    StrategyParams params{0.03, -0.02, 0.0};
    for (double shift : {0.0, 0.05, 0.3}) {
        CHECK(ideal_signal({0.23 + shift, 0.2 + shift}, params).action == Action::Buy);
        CHECK(ideal_signal({0.18 + shift, 0.2 + shift}, params).action == Action::Short);
        CHECK(ideal_signal({0.21 + shift, 0.2 + shift}, params).action == Action::Abstain);
    }
}

TEST_CASE("nonideal_signal thresholds partition the line", "[strategy]") {
    const double now = 5.0, eta = 0.25;
    CHECK(nonideal_signal(now + eta, now, eta).action == Action::Buy);
    CHECK(nonideal_signal(now + eta + 0.1, now, eta).action == Action::Buy);
    CHECK(nonideal_signal(now - eta, now, eta).action == Action::Abstain);  // left edge inclusive
    CHECK(nonideal_signal(now - eta - 1e-12, now, eta).action == Action::Short);
    CHECK(nonideal_signal(now, now, eta).action == Action::Abstain);
    CHECK(nonideal_signal(now + eta - 1e-12, now, eta).action == Action::Abstain);

    // eta = 0: a tie is a buy
    CHECK(nonideal_signal(now, now, 0.0).action == Action::Buy);
    CHECK(nonideal_signal(now - 1e-12, now, 0.0).action == Action::Short);

    // exactly three contiguous intervals
    int changes = 0;
    Action last = nonideal_signal(now - 1.0, now, eta).action;
    for (double v = now - 1.0; v <= now + 1.0; v += 1e-3) {
        Action a = nonideal_signal(v, now, eta).action;
        if (a != last) {
            ++changes;
            last = a;
        }
    }
    CHECK(changes == 2);
}

TEST_CASE("indicator_xi_bar truth table", "[strategy]") {
    CHECK(indicator_xi_bar(5.1, 5.0, 5.2) == 1);  // predicted up, went up
    CHECK(indicator_xi_bar(5.1, 5.0, 4.9) == 0);  // predicted up, went down
    CHECK(indicator_xi_bar(4.9, 5.0, 4.8) == 0);  // correct short call still scores 0
    CHECK(indicator_xi_bar(4.9, 5.0, 5.2) == 0);
    CHECK(indicator_xi_bar(5.0, 5.0, 5.0) == 1);  // ties are inclusive
}

TEST_CASE("zeta_bar", "[strategy]") {
    CHECK(zeta_bar(std::vector<int>(10, 1)) == 1.0);
    CHECK(zeta_bar(std::vector<int>(10, 0)) == 0.0);
    std::vector<int> mixed(2000, 0);
    for (int i = 0; i < 1030; ++i) mixed[i] = 1;
    CHECK(zeta_bar(mixed) == 0.515);
    CHECK_THROWS_AS(zeta_bar({}), std::invalid_argument);
    CHECK_THROWS_AS(zeta_bar({0, 2}), std::invalid_argument);
}

TEST_CASE("compute_metrics examples", "[strategy]") {
    auto buy = [](double pred, double now) { return nonideal_signal(pred, now, 0.0); };

    // perfect forecasts
    std::vector<StrategySignal> sig{buy(5.2, 5.0), buy(4.8, 5.0), buy(6.0, 5.5)};
    std::vector<double> truth{5.2, 4.8, 6.0};
    Metrics m = compute_metrics(sig, truth);
    CHECK(m.accuracy.value() == 1.0);
    CHECK(m.precision.value() == 1.0);
    CHECK(m.recall.value() == 1.0);
    CHECK(m.error_pct.value() == Approx(0.0).margin(1e-12));

    // all abstain: ratios undefined, nothing poisoned
    std::vector<StrategySignal> abst{nonideal_signal(5.0, 5.0, 1.0), nonideal_signal(5.1, 5.0, 1.0)};
    Metrics ma = compute_metrics(abst, {5.0, 5.0});
    CHECK(ma.abstained == 2);
    CHECK(!ma.accuracy.has_value());
    CHECK(!ma.precision.has_value());
    CHECK(!ma.recall.has_value());

    // TP=2, FP=1, FN=1, TN=1
    std::vector<StrategySignal> sig2{buy(6.0, 5.0), buy(6.0, 5.0), buy(6.0, 5.0),
                                     buy(4.0, 5.0), buy(4.0, 5.0)};
    std::vector<double> truth2{5.5, 5.5, 4.5, 5.5, 4.5};
    Metrics m2 = compute_metrics(sig2, truth2);
    CHECK(m2.tp == 2);
    CHECK(m2.fp == 1);
    CHECK(m2.fn == 1);
    CHECK(m2.tn == 1);
    CHECK(m2.precision.value() == Approx(2.0 / 3.0));
    CHECK(m2.recall.value() == Approx(2.0 / 3.0));
    CHECK(m2.accuracy.value() == Approx(3.0 / 5.0));
}
