#pragma once

#include <cmath>
#include <stdexcept>

#include "qrf/normal.hpp"

namespace qrf {

/// One year counts 255 trading days; model time is measured in these
/// dimensionless years, so one trading day is 1/255.
inline constexpr double kTradingDay = 1.0 / 255.0;

/// European call contract terms. The risk-free rate is zero throughout the
/// model; the field exists so the discount factor stays visible in the
/// pricing formula.
struct OptionSpec {
    double strike = 100.0;
    double maturity = 90.0 / 255.0;  // years
    double rate = 0.0;
};

/// Stock volatility sigma vs. the option market's opinion sigma_hat,
/// both per sqrt(year).
struct VolPair {
    double sigma = 0.2;
    double sigma_hat = 0.2;
};

namespace detail {
inline void require_pricing_domain(double s, double tau, double sigma_hat) {
    if (!(s > 0.0)) throw std::domain_error("pricing: stock price must be > 0");
    if (!(tau > 0.0)) throw std::domain_error("pricing: time to maturity must be > 0");
    if (!(sigma_hat > 0.0)) throw std::domain_error("pricing: volatility must be > 0");
}

inline double theta_plus(double s, double tau, double strike, double sigma_hat) {
    double sst = sigma_hat * std::sqrt(tau);
    return (std::log(s / strike) + 0.5 * sigma_hat * sigma_hat * tau) / sst;
}
}  // namespace detail

/// Call price s*N(T+) - e^{-r tau} K*N(T-) with
/// T+- = [ln(s/K) +- sigma_hat^2 tau/2] / (sigma_hat sqrt(tau)).
inline double bs_call_price(double s, double tau, const OptionSpec& spec, double sigma_hat) {
    detail::require_pricing_domain(s, tau, sigma_hat);
    double sst = sigma_hat * std::sqrt(tau);
    double tp = detail::theta_plus(s, tau, spec.strike, sigma_hat);
    double tm = tp - sst;
    return s * std_normal_cdf(tp) - std::exp(-spec.rate * tau) * spec.strike * std_normal_cdf(tm);
}

/// Greek gamma, d2(price)/ds2 = exp(-T+^2/2) / (sigma_hat s sqrt(2 pi tau)).
inline double greek_gamma(double s, double tau, const OptionSpec& spec, double sigma_hat) {
    detail::require_pricing_domain(s, tau, sigma_hat);
    double tp = detail::theta_plus(s, tau, spec.strike, sigma_hat);
    return std::exp(-0.5 * tp * tp) / (sigma_hat * s * std::sqrt(2.0 * M_PI * tau));
}

/// Greek delta, d(price)/ds = N(T+).
inline double greek_delta(double s, double tau, const OptionSpec& spec, double sigma_hat) {
    detail::require_pricing_domain(s, tau, sigma_hat);
    return std_normal_cdf(detail::theta_plus(s, tau, spec.strike, sigma_hat));
}

/// Expected option-price increment over a short interval dt when the stock
/// diffuses with vols.sigma while the market prices with vols.sigma_hat:
/// ((sigma^2 - sigma_hat^2)/2) * s^2 * gamma * dt.
inline double expected_increment(double s, double tau, const OptionSpec& spec,
                                 const VolPair& vols, double dt) {
    if (!(vols.sigma > 0.0)) throw std::domain_error("pricing: sigma must be > 0");
    if (!(dt > 0.0)) throw std::domain_error("pricing: dt must be > 0");
    double gap = 0.5 * (vols.sigma * vols.sigma - vols.sigma_hat * vols.sigma_hat);
    return gap * s * s * greek_gamma(s, tau, spec, vols.sigma_hat) * dt;
}

}  // namespace qrf
