#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "qrf/market_series.hpp"
#include "qrf/normal.hpp"
#include "qrf/pricing.hpp"

namespace qrf {

/// Identifier of the random stream recorded in run metadata: raw
/// mt19937_64 output mapped to 53-bit uniforms in (0,1), normals by
/// inverse CDF. Keeps runs reproducible from (id, seed) alone.
inline constexpr const char* kRngId = "mt19937_64/u53/inv-cdf-normal";

/// Seedable normal/uniform source with a pinned mapping from raw engine
/// output, so the stream does not depend on library internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in (0,1) from the top 53 bits of one engine draw.
    double uniform() {
        const std::uint64_t x = engine_();
        return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() { return std_normal_inv(uniform()); }

private:
    std::mt19937_64 engine_;
};

/// Synthetic-market configuration mirroring the simulated data setup:
/// GBM stock from s0 = 100 with sigma = 0.2, 90-day calls struck at 100,
/// 1% multiplicative bid/ask spreads.
struct SimConfig {
    double s0 = 100.0;
    double sigma = 0.2;
    int n_days = 2100;
    int maturity_days = 90;
    double strike = 100.0;
    double spread = 0.01;
    std::uint64_t seed = 10;
};

inline void validate_sim_config(const SimConfig& cfg, bool allow_zero_sigma = false) {
    if (!(cfg.s0 > 0.0)) throw std::invalid_argument("SimConfig: s0 must be > 0");
    if (allow_zero_sigma ? !(cfg.sigma >= 0.0) : !(cfg.sigma > 0.0))
        throw std::invalid_argument("SimConfig: sigma must be > 0");
    if (cfg.n_days < 5) throw std::invalid_argument("SimConfig: n_days must be >= 5");
    if (!(cfg.spread >= 0.0 && cfg.spread < 1.0))
        throw std::invalid_argument("SimConfig: spread must lie in [0, 1)");
    if (cfg.maturity_days <= 2) throw std::invalid_argument("SimConfig: maturity_days must be > 2");
}

/// Remaining time to maturity (years) on day k under the rollover rule:
/// each option expires after maturity_days and is reissued the same day,
/// so tau resets to the full maturity exactly at expiry.
inline double tau_for_day(int k, int maturity_days) {
    int into = k % maturity_days;
    return (maturity_days - into) * kTradingDay;
}

/// Daily GBM stock path ds = sigma s dW sampled exactly:
/// s_{k+1} = s_k exp(-sigma^2 dt/2 + sigma sqrt(dt) z), dt = 1/255.
/// Exact log-normal stepping has no discretization bias, so the
/// probability-law tests are exact. sigma = 0 is accepted here (constant
/// path) for testing only.
inline std::vector<double> simulate_gbm_path(const SimConfig& cfg) {
    validate_sim_config(cfg, /*allow_zero_sigma=*/true);
    Rng rng(cfg.seed);
    const double dt = kTradingDay;
    const double drift = -0.5 * cfg.sigma * cfg.sigma * dt;
    const double vol = cfg.sigma * std::sqrt(dt);
    std::vector<double> s(cfg.n_days);
    s[0] = cfg.s0;
    for (int k = 1; k < cfg.n_days; ++k) s[k] = s[k - 1] * std::exp(drift + vol * rng.normal());
    return s;
}

/// Floor for synthetic option mids. Deep out-of-the-money prices can
/// underflow double precision to exactly zero, which would collapse the
/// bid/ask ordering; such days are unusable for trading and later get
/// skipped at the window level.
inline constexpr double kOptionMidFloor = 1e-12;

/// Derive the synthetic option market from a stock path: option mids from
/// the call formula with sigma_hat and the rollover tau schedule, bids and
/// asks at (1 -/+ spread) times mid on both books.
inline MarketSeries build_market_series(const std::vector<double>& path, double sigma_hat,
                                        const SimConfig& cfg) {
    validate_sim_config(cfg);
    if (path.empty()) throw std::invalid_argument("build_market_series: empty path");
    if (!(sigma_hat > 0.0)) throw std::invalid_argument("build_market_series: sigma_hat must be > 0");

    OptionSpec spec;
    spec.strike = cfg.strike;
    spec.maturity = cfg.maturity_days * kTradingDay;

    MarketSeries s;
    const std::size_t n = path.size();
    s.t.resize(n);
    s.stock_bid.resize(n);
    s.stock_ask.resize(n);
    s.option_bid.resize(n);
    s.option_ask.resize(n);
    s.sigma_hat.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        double tau = tau_for_day(static_cast<int>(k), cfg.maturity_days);
        double mid = bs_call_price(path[k], tau, spec, sigma_hat);
        if (!(mid > kOptionMidFloor)) mid = kOptionMidFloor;
        s.t[k] = static_cast<double>(k) * kTradingDay;
        s.stock_bid[k] = (1.0 - cfg.spread) * path[k];
        s.stock_ask[k] = (1.0 + cfg.spread) * path[k];
        s.option_bid[k] = (1.0 - cfg.spread) * mid;
        s.option_ask[k] = (1.0 + cfg.spread) * mid;
        s.sigma_hat[k] = sigma_hat;
    }
    validate_series(s);
    return s;
}

}  // namespace qrf
