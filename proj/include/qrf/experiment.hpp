#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qrf/interp.hpp"
#include "qrf/market_sim.hpp"
#include "qrf/parallel.hpp"
#include "qrf/prob_strategy.hpp"
#include "qrf/qrm_solver.hpp"
#include "qrf/svg.hpp"

namespace qrf {

// ---------------------------------------------------------------------------
// Windowed backtest
// ---------------------------------------------------------------------------

enum class SkipReason { None, Rollover, Degenerate, FlooredMid, SolverFail };

inline const char* to_string(SkipReason r) {
    switch (r) {
        case SkipReason::None: return "used";
        case SkipReason::Rollover: return "rollover";
        case SkipReason::Degenerate: return "degenerate";
        case SkipReason::FlooredMid: return "floored_mid";
        default: return "solver_fail";
    }
}

/// How the window functions v_b(t), v_a(t), sigma(t) on [0, 2y] are built
/// from the series. ConstantToday freezes them at their day-j values, as
/// the reference experiment does for the volatility; in that mode the
/// sweep's success frequency tracks the trade-probability corridor.
/// Extrapolated applies the quadratic fit through days j-2, j-1, j.
enum class WindowDataMode { ConstantToday, Extrapolated };

inline const char* to_string(WindowDataMode m) {
    return m == WindowDataMode::ConstantToday ? "constant_today" : "extrapolated";
}

struct BacktestOptions {
    int n_windows = 2000;
    int first_day = 2;       // earliest day with two days of history
    double eta = 0.0;        // non-ideal strategy threshold
    int maturity_days = 90;  // 0 disables rollover skipping
    Grid grid = Grid{};
    SolverConfig solver;
    WindowDataMode window_mode = WindowDataMode::ConstantToday;
    /// Forecast-vs-today ties below this relative size are solver round-off,
    /// not signal; the forecast is snapped to today's price before scoring.
    double tie_eps = 1e-7;
};

struct WindowRecord {
    int day = 0;
    SkipReason skip = SkipReason::None;
    double v_now = 0.0;
    double v_pred = 0.0;
    double v_true_next = 0.0;
    bool pred_up = false;
    bool true_up = false;
    int xi_bar = 0;
    StrategySignal signal;
};

struct BacktestResult {
    std::vector<int> outcomes;  // xi-bar over used windows, day order
    Metrics metrics;
    std::vector<WindowRecord> records;  // one per attempted window
    int used = 0;
    int skipped = 0;
};

namespace detail {
inline bool touches_rollover(int j, int maturity_days) {
    if (maturity_days <= 0) return false;
    for (int k = j - 1; k <= j + 2; ++k)
        if (k > 0 && k % maturity_days == 0) return true;
    return false;
}

inline WindowExtrapolation make_window(const MarketSeries& series, int j, WindowDataMode mode,
                                       int n_check_samples) {
    if (mode == WindowDataMode::Extrapolated)
        return extrapolate_window(series, j, n_check_samples);
    WindowExtrapolation w;
    w.vb = Quadratic{0.0, 0.0, series.option_bid[j]};
    w.va = Quadratic{0.0, 0.0, series.option_ask[j]};
    w.sigma = Quadratic{0.0, 0.0, series.sigma_hat[j]};
    w.degenerate = !(series.option_bid[j] < series.option_ask[j]) || !(series.sigma_hat[j] > 0.0);
    return w;
}
}  // namespace detail

/// Run the one-day-ahead forecast over consecutive windows: fit and
/// extrapolate the window data, solve the regularized problem on
/// [t_j, t_j + 2y], read the prediction at t_j + y, and score it against
/// the realized mid price. Windows that touch an option rollover, have
/// degenerate extrapolations, sit at the worthless-option floor, or whose
/// solve fails are skipped and counted, never fatal.
inline BacktestResult run_backtest(const MarketSeries& series, const BacktestOptions& opt) {
    validate_series(series);
    if (opt.n_windows < 1) throw std::invalid_argument("run_backtest: n_windows must be >= 1");
    if (opt.first_day < 2) throw std::invalid_argument("run_backtest: first_day must be >= 2");
    const int last_day = opt.first_day + opt.n_windows - 1;
    if (static_cast<std::size_t>(last_day) + 2 >= series.size())
        throw std::invalid_argument("run_backtest: series too short for requested windows");

    BacktestResult res;
    res.records.resize(opt.n_windows);

    for (int w = 0; w < opt.n_windows; ++w) {
        const int j = opt.first_day + w;
        WindowRecord& rec = res.records[w];
        rec.day = j;
        rec.v_now = series.option_mid(j);
        rec.v_true_next = series.option_mid(j + 1);

        if (detail::touches_rollover(j, opt.maturity_days)) {
            rec.skip = SkipReason::Rollover;
            continue;
        }
        bool floored = false;
        for (int k = j - 2; k <= j + 1; ++k)
            if (series.option_mid(k) <= kOptionMidFloor * (1.0 + 1e-9)) floored = true;
        if (floored) {
            rec.skip = SkipReason::FlooredMid;
            continue;
        }
        WindowExtrapolation ext = detail::make_window(series, j, opt.window_mode, opt.grid.nt + 1);
        if (ext.degenerate) {
            rec.skip = SkipReason::Degenerate;
            continue;
        }
        try {
            DimensionlessProblem prob =
                to_dimensionless(ext, series.stock_bid[j], series.stock_ask[j], opt.grid);
            QrmSolution sol = qrm_solve(prob, opt.solver);
            if (!sol.converged) {
                rec.skip = SkipReason::SolverFail;
                continue;
            }
            rec.v_pred = predict_next_day(sol, series.stock_bid[j], series.stock_ask[j]);
        } catch (const std::exception&) {
            rec.skip = SkipReason::SolverFail;
            continue;
        }
        if (std::fabs(rec.v_pred - rec.v_now) <= opt.tie_eps * std::max(1.0, std::fabs(rec.v_now)))
            rec.v_pred = rec.v_now;

        rec.pred_up = rec.v_pred >= rec.v_now;
        rec.true_up = rec.v_true_next >= rec.v_now;
        rec.xi_bar = indicator_xi_bar(rec.v_pred, rec.v_now, rec.v_true_next);
        rec.signal = nonideal_signal(rec.v_pred, rec.v_now, opt.eta);
    }

    std::vector<StrategySignal> signals;
    std::vector<double> truths;
    for (const WindowRecord& rec : res.records) {
        if (rec.skip != SkipReason::None) {
            ++res.skipped;
            continue;
        }
        ++res.used;
        res.outcomes.push_back(rec.xi_bar);
        signals.push_back(rec.signal);
        truths.push_back(rec.v_true_next);
    }
    res.metrics = compute_metrics(signals, truths);
    return res;
}

// ---------------------------------------------------------------------------
// Sigma-hat sweep
// ---------------------------------------------------------------------------

inline SolverConfig sweep_solver_defaults() {
    SolverConfig s;
    // The forecast is insensitive to the last gradient digits (measured
    // drift < 1e-8 against grad_tol = 1e-10); this keeps batch runs
    // affordable and is recorded in run_meta.
    s.grad_tol = 1e-5;
    return s;
}

struct SweepConfig {
    double sigma = 0.2;
    // 33 sigma-hat values; the nominal upper end 0.38 would make 34
    double sh_lo = 0.05;
    double sh_hi = 0.37;
    double sh_step = 0.01;
    int n_windows = 2000;
    std::uint64_t seed = 10;
    double eta = 0.0;
    Grid grid = Grid{};
    SolverConfig solver = sweep_solver_defaults();
    SimConfig sim;
    WindowDataMode window_mode = WindowDataMode::ConstantToday;
    unsigned threads = 0;  // 0 = hardware concurrency

    std::vector<double> sigma_hat_grid() const {
        if (!(sh_step > 0.0)) throw std::invalid_argument("SweepConfig: step must be > 0");
        if (sh_hi < sh_lo) throw std::invalid_argument("SweepConfig: empty sigma-hat grid");
        std::vector<double> g;
        for (int k = 0;; ++k) {
            double v = sh_lo + k * sh_step;
            if (v > sh_hi + 1e-12) break;
            g.push_back(v);
        }
        return g;
    }
};

struct SweepRow {
    double sigma_hat = 0.0;
    double zeta = 0.0;            // mean xi-bar over used windows
    double p = 0.0;               // closed-form single-trade probability
    double lo = 0.0, hi = 0.0;    // p -/+ sqrt(D), D = p(1-p)/n_windows
    int windows_used = 0;
    int windows_skipped = 0;
    Metrics metrics;
    double agreement = 0.0;  // diagnostic: share of windows where forecast and truth agree in direction
    bool failed = false;
    std::string error;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<double> stock_path;
    std::vector<double> rep_option_mid;  // option mids for one representative sigma-hat
    double rep_sigma_hat = 0.0;
    double sigma = 0.2;
    int n_windows = 0;
    std::vector<std::pair<std::string, std::string>> meta;
};

/// One stock path per sweep; the option series is re-derived for each
/// sigma-hat on that same path, isolating the sigma-hat effect. Rows run
/// in parallel and are gathered by index.
inline SweepResult run_sweep(const SweepConfig& cfg) {
    SimConfig sim = cfg.sim;
    sim.sigma = cfg.sigma;
    sim.seed = cfg.seed;
    if (sim.n_days < cfg.n_windows + 5) sim.n_days = cfg.n_windows + 5;
    validate_sim_config(sim);

    const std::vector<double> grid_sh = cfg.sigma_hat_grid();
    if (grid_sh.empty()) throw std::invalid_argument("run_sweep: empty sigma-hat grid");

    SweepResult out;
    out.sigma = cfg.sigma;
    out.n_windows = cfg.n_windows;
    out.stock_path = simulate_gbm_path(sim);
    out.rows.resize(grid_sh.size());

    BacktestOptions opt;
    opt.n_windows = cfg.n_windows;
    opt.eta = cfg.eta;
    opt.maturity_days = sim.maturity_days;
    opt.grid = cfg.grid;
    opt.solver = cfg.solver;
    opt.window_mode = cfg.window_mode;

    parallel_for(
        grid_sh.size(),
        [&](std::size_t k) {
            SweepRow& row = out.rows[k];
            row.sigma_hat = grid_sh[k];
            try {
                MarketSeries series = build_market_series(out.stock_path, row.sigma_hat, sim);
                BacktestResult bt = run_backtest(series, opt);
                row.windows_used = bt.used;
                row.windows_skipped = bt.skipped;
                row.metrics = bt.metrics;
                if (bt.used > 0) row.zeta = zeta_bar(bt.outcomes);
                long agree = 0;
                for (const WindowRecord& rec : bt.records)
                    if (rec.skip == SkipReason::None && rec.pred_up == rec.true_up) ++agree;
                row.agreement = bt.used > 0 ? static_cast<double>(agree) / bt.used : 0.0;
                VolPair vols{cfg.sigma, row.sigma_hat};
                row.p = trade_win_probability(vols, kTradingDay);
                double sd = std::sqrt(zeta_dispersion(row.p, cfg.n_windows));
                row.lo = row.p - sd;
                row.hi = row.p + sd;
            } catch (const std::exception& e) {
                row.failed = true;
                row.error = e.what();
            }
        },
        cfg.threads);

    double rep = grid_sh.front();
    for (double sh : grid_sh)
        if (std::fabs(sh - 0.1) < std::fabs(rep - 0.1)) rep = sh;
    out.rep_sigma_hat = rep;
    MarketSeries rep_series = build_market_series(out.stock_path, rep, sim);
    out.rep_option_mid.resize(rep_series.size());
    for (std::size_t k = 0; k < rep_series.size(); ++k)
        out.rep_option_mid[k] = rep_series.option_mid(k);

    char buf[64];
    auto add = [&](const std::string& k, const std::string& v) { out.meta.emplace_back(k, v); };
    std::snprintf(buf, sizeof(buf), "%llu", static_cast<unsigned long long>(cfg.seed));
    add("seed", buf);
    add("rng", kRngId);
    std::snprintf(buf, sizeof(buf), "%d:%d", cfg.grid.nx, cfg.grid.nt);
    add("grid", buf);
    std::snprintf(buf, sizeof(buf), "%.12g", cfg.solver.alpha);
    add("alpha", buf);
    std::snprintf(buf, sizeof(buf), "%.12g", cfg.sigma);
    add("sigma", buf);
    std::snprintf(buf, sizeof(buf), "%.12g:%.12g:%.12g", cfg.sh_lo, cfg.sh_hi, cfg.sh_step);
    add("sigma_hat_grid", buf);
    std::snprintf(buf, sizeof(buf), "%d", cfg.n_windows);
    add("windows", buf);
    std::snprintf(buf, sizeof(buf), "%.12g", cfg.eta);
    add("eta", buf);
    add("window_mode", to_string(cfg.window_mode));
    std::snprintf(buf, sizeof(buf), "%.12g", cfg.solver.grad_tol);
    add("grad_tol", buf);
    std::snprintf(buf, sizeof(buf), "%.12g", sim.spread);
    add("spread", buf);
    std::snprintf(buf, sizeof(buf), "%d", sim.maturity_days);
    add("maturity_days", buf);
    std::snprintf(buf, sizeof(buf), "%.12g", sim.s0);
    add("s0", buf);
    std::snprintf(buf, sizeof(buf), "%d", sim.n_days);
    add("n_days", buf);
    return out;
}

// ---------------------------------------------------------------------------
// Convergence study
// ---------------------------------------------------------------------------

struct StudyConfig {
    std::vector<double> delta_grid{1e-1, 1e-2, 1e-3, 1e-4};
    double rho = 0.05;
    double t1 = 0.1;
    double a = 1.0;  // constant coefficient of the manufactured operator
    int nx = 100;
    int nt = 100;
    double baseline_alpha = 1e-6;  // used for the delta = 0 row (alpha = delta^2 degenerates)
    std::uint64_t noise_seed = 424242;
    SolverConfig solver;
    unsigned threads = 0;

    double mu() const { return std::log(t1 + 1.0 - rho) / std::log(t1 + 1.0); }
};

struct StudyRow {
    double delta = 0.0;
    double alpha = 0.0;
    double error = 0.0;        // L2 + L2-of-x-derivative over t <= t1 - rho
    double rate_factor = 0.0;  // exp(-(ln delta^{-1/2})^mu); 0 for delta = 0
    double ratio = 0.0;        // error / rate_factor; 0 for delta = 0
    long iterations = 0;
    bool converged = false;
};

struct StudyResult {
    std::vector<StudyRow> rows;
    double mu = 0.0;
    double rho = 0.0;
    double t1 = 0.0;
    std::vector<std::pair<std::string, std::string>> meta;
};

namespace detail {

/// Manufactured exact solution w* = e^{a pi^2 t} sin(pi x) of
/// w_t + a w_xx = 0 with zero boundaries.
inline std::vector<double> manufactured_exact(const Grid& gr, double a) {
    std::vector<double> w(gr.n_nodes());
    for (int j = 0; j <= gr.nt; ++j) {
        double amp = std::exp(a * M_PI * M_PI * gr.t(j));
        for (int i = 0; i <= gr.nx; ++i)
            w[gr.idx(i, j)] = (i == gr.nx) ? 0.0 : amp * std::sin(M_PI * gr.x(i));
    }
    return w;
}

inline DimensionlessProblem manufactured_problem(const Grid& gr, double a) {
    DimensionlessProblem p;
    p.grid = gr;
    p.coeff_a.assign(gr.nodes_x(), a);
    p.sigma_sq.assign(gr.nodes_t(), 1.0);
    p.vb.assign(gr.nodes_t(), 0.0);
    p.va.assign(gr.nodes_t(), 0.0);
    p.g.resize(gr.nodes_x());
    for (int i = 0; i <= gr.nx; ++i)
        p.g[i] = (i == 0 || i == gr.nx) ? 0.0 : std::sin(M_PI * gr.x(i));
    return p;
}

/// Noise profile on the t-nodes with zero value at t = 0 (keeps the corner
/// data compatible) scaled so its discrete H^1(0,T1) norm is exactly one.
inline std::vector<double> unit_h1_noise(const Grid& gr, Rng& rng) {
    std::vector<double> e(gr.nodes_t());
    e[0] = 0.0;
    for (int j = 1; j <= gr.nt; ++j) e[j] = 2.0 * rng.uniform() - 1.0;
    Stencil1D d1 = make_d1(gr.nt, gr.ht);
    double norm_sq = 0.0;
    for (int j = 0; j <= gr.nt; ++j) {
        double de = 0.0;
        for (int k = 0; k < d1.len[j]; ++k) de += d1.coef[j][k] * e[d1.off[j][k]];
        double w = gr.ht * ((j == 0 || j == gr.nt) ? 0.5 : 1.0);
        norm_sq += w * (e[j] * e[j] + de * de);
    }
    double scale = 1.0 / std::sqrt(norm_sq);
    for (double& v : e) v *= scale;
    return e;
}

/// ||e||_L2 + ||D_x e||_L2 over the nodes with t <= t_cut.
inline double l2_plus_dx_error(const std::vector<double>& w, const std::vector<double>& w_exact,
                               const Grid& gr, double t_cut) {
    int jmax = 0;
    while (jmax + 1 <= gr.nt && gr.t(jmax + 1) <= t_cut + 1e-12) ++jmax;
    Stencil1D d1x = make_d1(gr.nx, gr.hx);
    double l2 = 0.0, l2dx = 0.0;
    for (int j = 0; j <= jmax; ++j) {
        double ct = (j == 0 || j == jmax) ? 0.5 : 1.0;
        for (int i = 0; i <= gr.nx; ++i) {
            double cx = (i == 0 || i == gr.nx) ? 0.5 : 1.0;
            double w_err = w[gr.idx(i, j)] - w_exact[gr.idx(i, j)];
            double dx_err = 0.0;
            for (int k = 0; k < d1x.len[i]; ++k) {
                std::size_t q = gr.idx(d1x.off[i][k], j);
                dx_err += d1x.coef[i][k] * (w[q] - w_exact[q]);
            }
            double wgt = gr.hx * gr.ht * cx * ct;
            l2 += wgt * w_err * w_err;
            l2dx += wgt * dx_err * dx_err;
        }
    }
    return std::sqrt(l2) + std::sqrt(l2dx);
}

}  // namespace detail

/// Empirical convergence-rate check on the manufactured problem: boundary
/// data perturbed by noise of exact H^1 size delta, regularization tied to
/// the noise by alpha = delta^2, error measured away from the final time
/// (t <= t1 - rho) and compared against exp(-(ln delta^{-1/2})^mu).
inline StudyResult convergence_study(const StudyConfig& cfg) {
    if (!(cfg.rho > 0.0 && cfg.rho < cfg.t1))
        throw std::invalid_argument("convergence_study: need 0 < rho < t1");
    if (!(cfg.a > 0.0)) throw std::invalid_argument("convergence_study: a must be > 0");

    Grid gr = Grid::make(cfg.nx, cfg.nt, cfg.t1);
    const std::vector<double> w_exact = detail::manufactured_exact(gr, cfg.a);
    const double mu = cfg.mu();

    Rng rng(cfg.noise_seed);
    const std::vector<double> noise_b = detail::unit_h1_noise(gr, rng);
    const std::vector<double> noise_a = detail::unit_h1_noise(gr, rng);

    StudyResult out;
    out.mu = mu;
    out.rho = cfg.rho;
    out.t1 = cfg.t1;
    out.rows.resize(cfg.delta_grid.size());

    parallel_for(
        cfg.delta_grid.size(),
        [&](std::size_t k) {
            const double delta = cfg.delta_grid[k];
            if (!(delta >= 0.0)) throw std::invalid_argument("convergence_study: delta must be >= 0");
            StudyRow& row = out.rows[k];
            row.delta = delta;
            row.alpha = delta > 0.0 ? delta * delta : cfg.baseline_alpha;

            DimensionlessProblem prob = detail::manufactured_problem(gr, cfg.a);
            for (int j = 0; j <= gr.nt; ++j) {
                prob.vb[j] += delta * noise_b[j];
                prob.va[j] += delta * noise_a[j];
            }
            SolverConfig scfg = cfg.solver;
            scfg.alpha = row.alpha;
            QrmSolution sol = qrm_solve(prob, scfg);
            row.iterations = sol.iterations;
            row.converged = sol.converged;
            row.error = detail::l2_plus_dx_error(sol.v, w_exact, gr, cfg.t1 - cfg.rho);
            if (delta > 0.0) {
                row.rate_factor = std::exp(-std::pow(std::log(1.0 / std::sqrt(delta)), mu));
                row.ratio = row.error / row.rate_factor;
            }
        },
        cfg.threads);

    char buf[64];
    auto add = [&](const std::string& k, const std::string& v) { out.meta.emplace_back(k, v); };
    std::snprintf(buf, sizeof(buf), "%.12g", cfg.rho);
    add("rho", buf);
    std::snprintf(buf, sizeof(buf), "%.12g", cfg.t1);
    add("t1", buf);
    std::snprintf(buf, sizeof(buf), "%.12g", mu);
    add("mu", buf);
    std::snprintf(buf, sizeof(buf), "%d:%d", cfg.nx, cfg.nt);
    add("grid", buf);
    std::snprintf(buf, sizeof(buf), "%llu", static_cast<unsigned long long>(cfg.noise_seed));
    add("noise_seed", buf);
    add("rng", kRngId);
    return out;
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

namespace detail {
inline std::string opt_field(const std::optional<double>& v) {
    if (!v) return "";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", *v);
    return buf;
}

inline void write_meta(const std::vector<std::pair<std::string, std::string>>& meta,
                       const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("emit_report: cannot open " + path.string());
    out << "version = qrf 0.1.0\n";
    for (const auto& [k, v] : meta) out << k << " = " << v << "\n";
}

inline void write_day_series_csv(const std::vector<double>& vals, const std::string& col,
                                 const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("emit_report: cannot open " + path.string());
    out << "day_index,t," << col << "\n";
    for (std::size_t k = 0; k < vals.size(); ++k)
        out << k << ',' << fmt12(k * kTradingDay) << ',' << fmt12(vals[k]) << '\n';
}

inline void write_day_series_svg(const std::vector<double>& vals, const std::string& title,
                                 const std::string& ylab, const std::filesystem::path& path) {
    std::vector<double> days(vals.size());
    for (std::size_t k = 0; k < vals.size(); ++k) days[k] = static_cast<double>(k);
    SvgPlot plot(title, "trading day", ylab);
    plot.add_curve(days, vals, "steelblue", 1.5);
    plot.write(path.string());
}
}  // namespace detail

/// Write sweep.csv/svg, the stock-path and option-trajectory analogs, and
/// run_meta into out_dir.
inline void emit_report(const SweepResult& result, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::path dir(out_dir);
    fs::create_directories(dir);

    {
        std::ofstream out(dir / "sweep.csv");
        if (!out) throw std::runtime_error("emit_report: cannot open " + (dir / "sweep.csv").string());
        out << "sigma_hat,zeta_bar,p,lo,hi,n_used,n_skipped,accuracy,precision,recall,error_pct\n";
        for (const SweepRow& r : result.rows) {
            if (r.failed) {
                out << detail::fmt12(r.sigma_hat) << ",,,,,0,0,,,,\n";
                continue;
            }
            out << detail::fmt12(r.sigma_hat) << ',' << detail::fmt12(r.zeta) << ','
                << detail::fmt12(r.p) << ',' << detail::fmt12(r.lo) << ',' << detail::fmt12(r.hi)
                << ',' << r.windows_used << ',' << r.windows_skipped << ','
                << detail::opt_field(r.metrics.accuracy) << ','
                << detail::opt_field(r.metrics.precision) << ','
                << detail::opt_field(r.metrics.recall) << ','
                << detail::opt_field(r.metrics.error_pct) << '\n';
        }
    }
    {
        SvgPlot plot("Forecast success frequency vs sigma-hat", "sigma_hat", "frequency");
        std::vector<double> sh, zeta, p, lo, hi;
        for (const SweepRow& r : result.rows) {
            if (r.failed || r.windows_used == 0) continue;
            sh.push_back(r.sigma_hat);
            zeta.push_back(r.zeta);
            p.push_back(r.p);
            lo.push_back(r.lo);
            hi.push_back(r.hi);
        }
        plot.add_curve(sh, lo, "gray", 1.0);
        plot.add_curve(sh, hi, "gray", 1.0);
        plot.add_curve(sh, p, "black", 1.5);
        plot.add_curve(sh, zeta, "crimson", 3.0);
        plot.add_vline(result.sigma, "black");
        plot.write((dir / "sweep.svg").string());
    }
    detail::write_day_series_csv(result.stock_path, "s", dir / "path.csv");
    detail::write_day_series_svg(result.stock_path, "Simulated stock price", "price",
                                 dir / "path.svg");
    detail::write_day_series_csv(result.rep_option_mid, "v", dir / "option.csv");
    {
        char buf[80];
        std::snprintf(buf, sizeof(buf), "Option mid price, sigma_hat = %.4g", result.rep_sigma_hat);
        detail::write_day_series_svg(result.rep_option_mid, buf, "price", dir / "option.svg");
    }
    detail::write_meta(result.meta, dir / "run_meta");
}

/// Write convergence.csv and run_meta into out_dir.
inline void emit_report(const StudyResult& result, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::path dir(out_dir);
    fs::create_directories(dir);
    std::ofstream out(dir / "convergence.csv");
    if (!out)
        throw std::runtime_error("emit_report: cannot open " + (dir / "convergence.csv").string());
    out << "delta,alpha,error,rate_factor,ratio,iterations,converged\n";
    for (const StudyRow& r : result.rows) {
        out << detail::fmt12(r.delta) << ',' << detail::fmt12(r.alpha) << ','
            << detail::fmt12(r.error) << ',';
        if (r.delta > 0.0)
            out << detail::fmt12(r.rate_factor) << ',' << detail::fmt12(r.ratio);
        else
            out << ',';
        out << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << '\n';
    }
    detail::write_meta(result.meta, dir / "run_meta");
}

}  // namespace qrf
