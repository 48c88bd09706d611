#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qrf/interp.hpp"
#include "qrf/market_sim.hpp"

using Catch::Approx;
using namespace qrf;

namespace {
const double kY = 1.0 / 255.0;
}

TEST_CASE("fit_quadratic reproduces the worked example", "[interp]") {
    Quadratic q = fit_quadratic(1.0, 2.0, 4.0, kY);
    CHECK(q.c == 4.0);
    CHECK(q.a == Approx(1.0 / (2.0 * kY * kY)).epsilon(1e-14));
    CHECK(q.b == Approx(5.0 / (2.0 * kY)).epsilon(1e-14));
    CHECK(extrapolate(q, kY, kY) == Approx(7.0).epsilon(1e-12));
    CHECK(extrapolate(q, 2.0 * kY, kY) == Approx(11.0).epsilon(1e-12));
}

TEST_CASE("fit_quadratic constant and pure-quadratic inputs", "[interp]") {
    Quadratic c = fit_quadratic(5.0, 5.0, 5.0, kY);
    CHECK(c.a == 0.0);
    CHECK(c.b == 0.0);
    CHECK(c.c == 5.0);
    CHECK(extrapolate(c, 1.7 * kY, kY) == 5.0);

    Quadratic t2 = fit_quadratic(4.0 * kY * kY, kY * kY, 0.0, kY);
    CHECK(t2.a == Approx(1.0).epsilon(1e-12));
    CHECK(t2.b == Approx(0.0).margin(1e-12 / kY));
    CHECK(t2.c == 0.0);
}

TEST_CASE("fit_quadratic reproduces its nodes", "[interp]") {
    // nodes must be matched to a few ulps of the data scale
    for (double d0 : {0.3, 11.0, -2.5})
        for (double d1 : {0.1, 7.0})
            for (double d2 : {0.9, -4.0}) {
                Quadratic q = fit_quadratic(d0, d1, d2, kY);
                double scale = std::max({std::fabs(d0), std::fabs(d1), std::fabs(d2), 1.0});
                double tol = 8 * std::numeric_limits<double>::epsilon() * scale;
                CHECK(std::fabs(q.eval(-2.0 * kY) - d0) <= tol);
                CHECK(std::fabs(q.eval(-kY) - d1) <= tol);
                CHECK(q.eval(0.0) == d2);
            }
}

TEST_CASE("extrapolate rejects points outside the two-day horizon", "[interp]") {
    Quadratic q = fit_quadratic(1.0, 2.0, 4.0, kY);
    CHECK_THROWS_AS(extrapolate(q, -0.5 * kY, kY), std::out_of_range);
    CHECK_THROWS_AS(extrapolate(q, 2.5 * kY, kY), std::out_of_range);
    CHECK_NOTHROW(extrapolate(q, 0.0, kY));
    CHECK_NOTHROW(extrapolate(q, 2.0 * kY, kY));
}

namespace {
MarketSeries synthetic_series(int n, double sigma_hat) {
    SimConfig cfg;
    cfg.n_days = n;
    cfg.seed = 3;
    auto path = simulate_gbm_path(cfg);
    return build_market_series(path, sigma_hat, cfg);
}
}  // namespace

TEST_CASE("extrapolate_window on exactly quadratic inputs", "[interp]") {
    MarketSeries s = synthetic_series(12, 0.2);
    // overwrite the option book with an exact quadratic of day index
    for (std::size_t k = 0; k < s.size(); ++k) {
        double t = (static_cast<double>(k) - 4.0) * kY;  // day 4 becomes t = 0
        double mid = 5.0 + 3.0 * t / kY + 0.25 * (t / kY) * (t / kY);
        s.option_bid[k] = 0.99 * mid;
        s.option_ask[k] = 1.01 * mid;
    }
    WindowExtrapolation w = extrapolate_window(s, 4);
    REQUIRE(!w.degenerate);
    double truth_next = 5.0 + 3.0 + 0.25;  // day 5
    double mid_next = 0.5 * (w.vb.eval(kY) + w.va.eval(kY));
    CHECK(mid_next == Approx(truth_next).epsilon(1e-10));
}

TEST_CASE("extrapolate_window keeps a constant sigma-hat constant", "[interp]") {
    MarketSeries s = synthetic_series(12, 0.2);
    WindowExtrapolation w = extrapolate_window(s, 4);
    CHECK(w.sigma.a == 0.0);
    CHECK(w.sigma.b == 0.0);
    CHECK(w.sigma.c == 0.2);
    for (double t = 0.0; t <= 2.0 * kY; t += 0.2 * kY)
        CHECK(w.sigma.eval(t) == 0.2);
}

TEST_CASE("extrapolate_window flags crossing bid/ask as degenerate", "[interp]") {
    MarketSeries s = synthetic_series(12, 0.2);
    // concave falling mids: the extrapolated mid crosses zero within two
    // days, at which point the scaled bid meets the scaled ask
    double mids[3] = {10.0, 9.0, 5.0};
    for (int k = 2; k <= 4; ++k) {
        s.option_bid[k] = 0.99 * mids[k - 2];
        s.option_ask[k] = 1.01 * mids[k - 2];
    }
    WindowExtrapolation w = extrapolate_window(s, 4);
    CHECK(w.degenerate);
}

TEST_CASE("extrapolate_window preserves the book under small moves", "[interp]") {
    // if mids over the three fit days vary by less than spread/2, the
    // extrapolated bid stays below the extrapolated ask on [0, 2y]
    MarketSeries s = synthetic_series(12, 0.2);
    std::mt19937_64 eng(11);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        double base = 5.0;
        for (int k = 2; k <= 4; ++k) {
            double mid = base * (1.0 + 0.5 * 0.01 * 0.5 * U(eng));  // < spread/2 wiggle
            s.option_bid[k] = 0.99 * mid;
            s.option_ask[k] = 1.01 * mid;
        }
        WindowExtrapolation w = extrapolate_window(s, 4);
        CHECK(!w.degenerate);
    }
}

TEST_CASE("extrapolate_window index preconditions", "[interp]") {
    MarketSeries s = synthetic_series(12, 0.2);
    CHECK_THROWS_AS(extrapolate_window(s, 1), std::out_of_range);
    CHECK_THROWS_AS(extrapolate_window(s, 10), std::out_of_range);
    CHECK_NOTHROW(extrapolate_window(s, 9));
}
