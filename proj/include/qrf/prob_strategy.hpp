#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qrf/normal.hpp"
#include "qrf/pricing.hpp"

namespace qrf {

// ---------------------------------------------------------------------------
// Closed-form law for one trade
// ---------------------------------------------------------------------------

/// Probability that the true option price after a short interval eps
/// exceeds the price expected by the market:
///   p = N_c( (sigma_hat^2 - sigma^2) sqrt(eps) / (2 sqrt(sigma_hat^2 + sigma^2)) ).
/// The complementary CDF is the convention that makes p > 1/2 exactly when
/// sigma > sigma_hat.
inline double trade_win_probability(const VolPair& vols, double eps) {
    if (!(vols.sigma > 0.0) || !(vols.sigma_hat > 0.0))
        throw std::domain_error("trade_win_probability: volatilities must be > 0");
    if (!(eps > 0.0)) throw std::domain_error("trade_win_probability: eps must be > 0");
    double s2 = vols.sigma * vols.sigma;
    double h2 = vols.sigma_hat * vols.sigma_hat;
    double z = (h2 - s2) * std::sqrt(eps) / (2.0 * std::sqrt(h2 + s2));
    return std_normal_cdf_c(z);
}

/// Dispersion of the success frequency over n independent trades,
/// D = p(1-p)/n.
inline double zeta_dispersion(double p, long n) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("zeta_dispersion: p must lie in [0,1]");
    if (n < 1) throw std::domain_error("zeta_dispersion: n must be >= 1");
    return p * (1.0 - p) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Majority-of-trades machinery
// ---------------------------------------------------------------------------

/// Exact binomial tail P(X > n/2) = sum_{k=floor(n/2)+1}^{n} C(n,k) p^k q^{n-k},
/// evaluated in log space to stay finite for large n.
inline double majority_profit_probability(double p, long n) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("majority_profit_probability: p in (0,1)");
    if (n < 4) throw std::domain_error("majority_profit_probability: n must be >= 4");
    // Symmetry gives the odd-n fair-coin tail exactly; the summation below
    // would only reproduce it to round-off.
    if (p == 0.5 && n % 2 == 1) return 0.5;
    const double lp = std::log(p), lq = std::log1p(-p);
    const long k0 = n / 2 + 1;
    // log-sum-exp over k = k0..n
    double max_term = -INFINITY;
    std::vector<double> terms;
    terms.reserve(n - k0 + 1);
    for (long k = k0; k <= n; ++k) {
        double lt = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                    k * lp + (n - k) * lq;
        terms.push_back(lt);
        if (lt > max_term) max_term = lt;
    }
    double acc = 0.0;
    for (double lt : terms) acc += std::exp(lt - max_term);
    return std::exp(max_term) * acc;
}

/// De Moivre-Laplace approximation of the same tail,
/// N_c( (1-2p) sqrt(n) / (2 sqrt(p(1-p))) ), exposed for comparison.
inline double majority_profit_normal_approx(double p, long n) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("majority_profit_normal_approx: p in (0,1)");
    if (n < 1) throw std::domain_error("majority_profit_normal_approx: n must be >= 1");
    double z = (1.0 - 2.0 * p) * std::sqrt(static_cast<double>(n)) / (2.0 * std::sqrt(p * (1.0 - p)));
    return std_normal_cdf_c(z);
}

/// Smallest single-trade probability p for which the majority of n trades
/// is profitable with confidence alpha_conf:
///   p >= (1/2)(1 + sqrt(z^2 / (n + z^2))), z = Phi^{-1}(alpha_conf - delta_n),
/// with Phi the complementary CDF and delta_n the (vanishing) normal
/// approximation error, 0 unless the caller supplies a value.
inline double required_probability(double alpha_conf, long n, double delta_n = 0.0) {
    if (!(alpha_conf > 0.5 && alpha_conf < 1.0))
        throw std::domain_error("required_probability: alpha_conf must lie in (1/2, 1)");
    if (n < 1) throw std::domain_error("required_probability: n must be >= 1");
    double q = alpha_conf - delta_n;
    if (!(q > 0.0 && q < 1.0))
        throw std::domain_error("required_probability: alpha_conf - delta_n must lie in (0,1)");
    // Complementary-CDF inverse: Phi_c(z) = q  <=>  z = -N^{-1}(q).
    double z = -std_normal_inv(q);
    double z2 = z * z;
    return 0.5 * (1.0 + std::sqrt(z2 / (static_cast<double>(n) + z2)));
}

/// Volatility gap needed to clear required_probability:
///   sigma - sigma_hat >= (2 sqrt(sigma^2 + sigma_hat^2) / (sqrt(eps)(sigma + sigma_hat)))
///                        * |Phi^{-1}(required_probability)|.
inline double required_vol_gap(double sigma, double sigma_hat, double eps, double alpha_conf,
                               long n, double delta_n = 0.0) {
    if (!(sigma > 0.0) || !(sigma_hat > 0.0))
        throw std::domain_error("required_vol_gap: volatilities must be > 0");
    if (!(eps > 0.0)) throw std::domain_error("required_vol_gap: eps must be > 0");
    double p_req = required_probability(alpha_conf, n, delta_n);
    double z = -std_normal_inv(p_req);  // complementary inverse again
    double s2 = sigma * sigma, h2 = sigma_hat * sigma_hat;
    return 2.0 * std::sqrt(s2 + h2) / (std::sqrt(eps) * (sigma + sigma_hat)) * std::fabs(z);
}

// ---------------------------------------------------------------------------
// Trading signals
// ---------------------------------------------------------------------------

enum class Action { Buy, Short, Abstain };

inline const char* to_string(Action a) {
    switch (a) {
        case Action::Buy: return "buy";
        case Action::Short: return "short";
        default: return "abstain";
    }
}

/// Ideal-case thresholds beta1 > 0 > beta2 on the vol gap, and the
/// non-ideal price threshold eta >= 0.
struct StrategyParams {
    double beta1 = 0.01;
    double beta2 = -0.01;
    double eta = 0.0;
};

inline void validate_strategy_params(const StrategyParams& p) {
    if (!(p.beta1 > 0.0) || !(p.beta2 < 0.0))
        throw std::invalid_argument("StrategyParams: need beta1 > 0 > beta2");
    if (!(p.eta >= 0.0)) throw std::invalid_argument("StrategyParams: eta must be >= 0");
}

/// A decision together with the inputs that produced it. For the ideal
/// strategy the decision statistic sigma - sigma_hat is stored in v_pred
/// with v_now = 0, so the rule can be re-evaluated from the record alone.
struct StrategySignal {
    Action action = Action::Abstain;
    double v_pred = 0.0;
    double v_now = 0.0;
    double threshold_used = 0.0;
};

/// Ideal case (both vols known): buy when sigma - sigma_hat >= beta1,
/// short when <= beta2, abstain strictly between.
inline StrategySignal ideal_signal(const VolPair& vols, const StrategyParams& params) {
    validate_strategy_params(params);
    double gap = vols.sigma - vols.sigma_hat;
    StrategySignal s;
    s.v_pred = gap;
    s.v_now = 0.0;
    if (gap >= params.beta1) {
        s.action = Action::Buy;
        s.threshold_used = params.beta1;
    } else if (gap <= params.beta2) {
        s.action = Action::Short;
        s.threshold_used = params.beta2;
    } else {
        s.action = Action::Abstain;
        s.threshold_used = 0.0;
    }
    return s;
}

/// Non-ideal case (only the forecast known): buy when
/// v_pred >= v_now + eta, short when v_pred < v_now - eta, abstain on
/// v_now - eta <= v_pred < v_now + eta.
inline StrategySignal nonideal_signal(double v_pred, double v_now, double eta) {
    if (!(eta >= 0.0)) throw std::domain_error("nonideal_signal: eta must be >= 0");
    StrategySignal s;
    s.v_pred = v_pred;
    s.v_now = v_now;
    s.threshold_used = eta;
    if (v_pred >= v_now + eta)
        s.action = Action::Buy;
    else if (v_pred < v_now - eta)
        s.action = Action::Short;
    else
        s.action = Action::Abstain;
    return s;
}

// ---------------------------------------------------------------------------
// Backtest scoring
// ---------------------------------------------------------------------------

/// Success indicator of one forecast window: 1 exactly when the forecast
/// called a rise (v_pred >= v_now) and the price did rise
/// (v_true_next >= v_now), 0 otherwise. Mid prices play the role of true
/// prices.
inline int indicator_xi_bar(double v_pred_next, double v_now, double v_true_next) {
    return (v_pred_next >= v_now && v_true_next >= v_now) ? 1 : 0;
}

/// Frequency of successes: mean of the 0/1 outcomes.
inline double zeta_bar(const std::vector<int>& outcomes) {
    if (outcomes.empty()) throw std::invalid_argument("zeta_bar: empty outcome sequence");
    long acc = 0;
    for (int x : outcomes) {
        if (x != 0 && x != 1) throw std::invalid_argument("zeta_bar: outcomes must be 0/1");
        acc += x;
    }
    return static_cast<double>(acc) / static_cast<double>(outcomes.size());
}

/// Confusion-matrix metrics over non-abstained signals. Ratios that would
/// divide by zero are left unset rather than turned into NaNs; abstentions
/// are counted separately.
struct Metrics {
    long tp = 0, fp = 0, tn = 0, fn = 0;
    long abstained = 0;
    std::optional<double> accuracy;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> error_pct;
};

/// Positive class is "price will rise" (Buy); the realized class is
/// v_true_next >= v_now. error_pct averages |corr - fc| / corr over all
/// non-abstained forecasts with nonzero correct price.
inline Metrics compute_metrics(const std::vector<StrategySignal>& signals,
                               const std::vector<double>& v_true_next) {
    if (signals.size() != v_true_next.size())
        throw std::invalid_argument("compute_metrics: sequences must align");
    Metrics m;
    double err_acc = 0.0;
    long err_n = 0;
    for (std::size_t i = 0; i < signals.size(); ++i) {
        const StrategySignal& s = signals[i];
        if (s.action == Action::Abstain) {
            ++m.abstained;
            continue;
        }
        bool actual_up = v_true_next[i] >= s.v_now;
        if (s.action == Action::Buy)
            actual_up ? ++m.tp : ++m.fp;
        else
            actual_up ? ++m.fn : ++m.tn;
        if (v_true_next[i] != 0.0) {
            err_acc += std::fabs((v_true_next[i] - s.v_pred) / v_true_next[i]) * 100.0;
            ++err_n;
        }
    }
    long n = m.tp + m.fp + m.tn + m.fn;
    if (n > 0) m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(n);
    if (m.tp + m.fp > 0) m.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
    if (m.tp + m.fn > 0) m.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
    if (err_n > 0) m.error_pct = err_acc / static_cast<double>(err_n);
    return m;
}

}  // namespace qrf
