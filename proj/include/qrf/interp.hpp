#pragma once

#include <cmath>
#include <stdexcept>

#include "qrf/market_series.hpp"
#include "qrf/pricing.hpp"

namespace qrf {

/// d(t) = a t^2 + b t + c, t in dimensionless years.
struct Quadratic {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;

    double eval(double t) const { return (a * t + b) * t + c; }
};

/// Fit the unique quadratic through (-2y, d_m2y), (-y, d_my), (0, d_0).
inline Quadratic fit_quadratic(double d_m2y, double d_my, double d_0, double y) {
    if (!(y > 0.0)) throw std::domain_error("fit_quadratic: y must be > 0");
    if (!std::isfinite(d_m2y) || !std::isfinite(d_my) || !std::isfinite(d_0))
        throw std::domain_error("fit_quadratic: inputs must be finite");
    Quadratic q;
    q.c = d_0;
    q.a = (d_m2y - 2.0 * d_my + d_0) / (2.0 * y * y);
    q.b = q.a * y + (d_0 - d_my) / y;
    return q;
}

/// Evaluate the fitted quadratic on the forecast interval t in [0, 2y].
/// The model never extrapolates past two days, so anything outside is a
/// range error.
inline double extrapolate(const Quadratic& q, double t, double y) {
    if (!(y > 0.0)) throw std::domain_error("extrapolate: y must be > 0");
    double hi = 2.0 * y;
    double slack = 1e-12 * hi;
    if (t < -slack || t > hi + slack)
        throw std::out_of_range("extrapolate: t outside [0, 2y]");
    return q.eval(t);
}

/// Quadratics for v_b, v_a, sigma fitted at days j-2, j-1, j and shifted so
/// t = 0 is day j. `degenerate` flags windows whose extrapolation crosses
/// bid over ask or drives sigma nonpositive; such windows are skipped, not
/// errors.
struct WindowExtrapolation {
    Quadratic vb;
    Quadratic va;
    Quadratic sigma;
    bool degenerate = false;
};

inline WindowExtrapolation extrapolate_window(const MarketSeries& series, int j,
                                              int n_check_samples = 101) {
    if (j < 2) throw std::out_of_range("extrapolate_window: need two days of history (j >= 2)");
    if (static_cast<std::size_t>(j) + 2 >= series.size())
        throw std::out_of_range("extrapolate_window: j + 2 must lie within the series");
    if (n_check_samples < 2) throw std::invalid_argument("extrapolate_window: need >= 2 samples");

    const double y = kTradingDay;
    WindowExtrapolation w;
    w.vb = fit_quadratic(series.option_bid[j - 2], series.option_bid[j - 1], series.option_bid[j], y);
    w.va = fit_quadratic(series.option_ask[j - 2], series.option_ask[j - 1], series.option_ask[j], y);
    w.sigma = fit_quadratic(series.sigma_hat[j - 2], series.sigma_hat[j - 1], series.sigma_hat[j], y);

    for (int k = 0; k < n_check_samples; ++k) {
        double t = 2.0 * y * static_cast<double>(k) / (n_check_samples - 1);
        if (w.vb.eval(t) >= w.va.eval(t) || w.sigma.eval(t) <= 0.0) {
            w.degenerate = true;
            break;
        }
    }
    return w;
}

}  // namespace qrf
