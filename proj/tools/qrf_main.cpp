// Command-line front end: synthetic market generation, pricing, single-window
// solves, backtests, the sigma-hat sweep and the convergence study.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qrf/experiment.hpp"
#include "qrf/interp.hpp"
#include "qrf/market_series.hpp"
#include "qrf/market_sim.hpp"
#include "qrf/pricing.hpp"
#include "qrf/prob_strategy.hpp"
#include "qrf/qrm_solver.hpp"

namespace {

struct CommonOpts {
    std::string out_dir = "qrf_out";
    int verbosity = 0;
};

qrf::Grid parse_grid(const std::string& s) {
    int nx = 0, nt = 0;
    if (std::sscanf(s.c_str(), "%d:%d", &nx, &nt) != 2)
        throw CLI::ValidationError("--grid expects nx:nt");
    return qrf::Grid::make(nx, nt, 2.0 * qrf::kTradingDay);
}

void parse_sh_grid(const std::string& s, qrf::SweepConfig& cfg) {
    double lo = 0, hi = 0, step = 0;
    if (std::sscanf(s.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3)
        throw CLI::ValidationError("--sigma-hat-grid expects lo:hi:step");
    cfg.sh_lo = lo;
    cfg.sh_hi = hi;
    cfg.sh_step = step;
}

std::vector<double> parse_delta_grid(const std::string& s) {
    std::vector<double> g;
    std::string item;
    std::istringstream ss(s);
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        g.push_back(std::stod(item));
    }
    if (g.empty()) throw CLI::ValidationError("--delta-grid expects a comma-separated list");
    return g;
}

qrf::WindowDataMode parse_window_mode(const std::string& s) {
    if (s == "constant") return qrf::WindowDataMode::ConstantToday;
    if (s == "extrapolated") return qrf::WindowDataMode::Extrapolated;
    throw CLI::ValidationError("--window-mode must be 'constant' or 'extrapolated'");
}

void write_meta(const std::vector<std::pair<std::string, std::string>>& meta,
                const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    qrf::detail::write_meta(meta, dir / "run_meta");
}

int run_simulate(const CommonOpts& common, const qrf::SimConfig& sim, double sigma_hat) {
    auto path = qrf::simulate_gbm_path(sim);
    qrf::MarketSeries series = qrf::build_market_series(path, sigma_hat, sim);
    std::filesystem::path dir(common.out_dir);
    std::filesystem::create_directories(dir);
    qrf::save_series(series, (dir / "series.csv").string());
    qrf::detail::write_day_series_csv(path, "s", dir / "path.csv");
    qrf::detail::write_day_series_svg(path, "Simulated stock price", "price", dir / "path.svg");
    std::vector<double> mids(series.size());
    for (std::size_t k = 0; k < series.size(); ++k) mids[k] = series.option_mid(k);
    qrf::detail::write_day_series_csv(mids, "v", dir / "option.csv");
    qrf::detail::write_day_series_svg(mids, "Option mid price", "price", dir / "option.svg");
    std::vector<std::pair<std::string, std::string>> meta;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%llu", static_cast<unsigned long long>(sim.seed));
    meta.emplace_back("seed", buf);
    meta.emplace_back("rng", qrf::kRngId);
    std::snprintf(buf, sizeof(buf), "%.12g", sim.sigma);
    meta.emplace_back("sigma", buf);
    std::snprintf(buf, sizeof(buf), "%.12g", sigma_hat);
    meta.emplace_back("sigma_hat", buf);
    std::snprintf(buf, sizeof(buf), "%d", sim.n_days);
    meta.emplace_back("n_days", buf);
    std::snprintf(buf, sizeof(buf), "%.12g", sim.s0);
    meta.emplace_back("s0", buf);
    std::snprintf(buf, sizeof(buf), "%.12g", sim.spread);
    meta.emplace_back("spread", buf);
    std::snprintf(buf, sizeof(buf), "%d", sim.maturity_days);
    meta.emplace_back("maturity_days", buf);
    write_meta(meta, dir);
    std::printf("wrote series.csv, path.csv/svg, option.csv/svg, run_meta to %s\n",
                common.out_dir.c_str());
    return 0;
}

int run_price(double s, double tau_days, double strike, double sigma_hat, double sigma,
              double dt_days) {
    qrf::OptionSpec spec;
    spec.strike = strike;
    spec.maturity = tau_days * qrf::kTradingDay;
    double tau = tau_days * qrf::kTradingDay;
    double price = qrf::bs_call_price(s, tau, spec, sigma_hat);
    double delta = qrf::greek_delta(s, tau, spec, sigma_hat);
    double gamma = qrf::greek_gamma(s, tau, spec, sigma_hat);
    std::printf("call price = %.10g\n", price);
    std::printf("delta      = %.10g\n", delta);
    std::printf("gamma      = %.10g\n", gamma);
    if (sigma > 0.0) {
        qrf::VolPair vols{sigma, sigma_hat};
        std::printf("expected one-day increment (sigma=%.4g) = %.10g\n", sigma,
                    qrf::expected_increment(s, tau, spec, vols, dt_days * qrf::kTradingDay));
        std::printf("trade win probability                  = %.10g\n",
                    qrf::trade_win_probability(vols, dt_days * qrf::kTradingDay));
    }
    return 0;
}

int run_solve_window(const CommonOpts& common, const std::string& series_path, int day,
                     const qrf::Grid& grid, const qrf::SolverConfig& solver,
                     qrf::WindowDataMode mode) {
    if (!std::filesystem::exists(series_path))
        throw std::invalid_argument("series file does not exist: " + series_path);
    qrf::MarketSeries series = qrf::load_series(series_path);
    qrf::WindowExtrapolation w = qrf::detail::make_window(series, day, mode, grid.nt + 1);
    if (w.degenerate) {
        std::fprintf(stderr, "window %d is degenerate (bid/ask crossing or sigma <= 0)\n", day);
        return 2;
    }
    qrf::DimensionlessProblem prob =
        qrf::to_dimensionless(w, series.stock_bid[day], series.stock_ask[day], grid);
    qrf::QrmSolution sol = qrf::qrm_solve(prob, solver);
    double pred = qrf::predict_next_day(sol, series.stock_bid[day], series.stock_ask[day]);
    std::filesystem::path dir(common.out_dir);
    std::filesystem::create_directories(dir);
    qrf::solution_to_csv(sol, (dir / "solution.csv").string());
    std::printf("day %d: v_now=%.8g  v_pred(next day)=%.8g  iters=%ld converged=%d J=%.6g\n", day,
                series.option_mid(day), pred, sol.iterations, sol.converged ? 1 : 0,
                sol.functional_value);
    std::printf("wrote %s\n", (dir / "solution.csv").string().c_str());
    return sol.converged ? 0 : 2;
}

int run_backtest_cmd(const CommonOpts& common, const std::string& series_path,
                     const qrf::SimConfig& sim, double sigma_hat, qrf::BacktestOptions opt) {
    qrf::MarketSeries series;
    if (!series_path.empty()) {
        if (!std::filesystem::exists(series_path))
            throw std::invalid_argument("series file does not exist: " + series_path);
        series = qrf::load_series(series_path);
        opt.maturity_days = 0;  // unknown rollover schedule for external data
    } else {
        auto path = qrf::simulate_gbm_path(sim);
        series = qrf::build_market_series(path, sigma_hat, sim);
        opt.maturity_days = sim.maturity_days;
    }
    qrf::BacktestResult res = qrf::run_backtest(series, opt);
    std::filesystem::path dir(common.out_dir);
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "backtest.csv");
        out << "day,status,v_now,v_pred,v_true_next,xi_bar,action\n";
        for (const auto& r : res.records) {
            out << r.day << ',' << qrf::to_string(r.skip) << ','
                << qrf::detail::fmt12(r.v_now) << ',' << qrf::detail::fmt12(r.v_pred) << ','
                << qrf::detail::fmt12(r.v_true_next) << ',' << r.xi_bar << ','
                << qrf::to_string(r.signal.action) << '\n';
        }
    }
    double zeta = res.used > 0 ? qrf::zeta_bar(res.outcomes) : 0.0;
    std::printf("windows used=%d skipped=%d  zeta_bar=%.6f\n", res.used, res.skipped, zeta);
    auto pr = [](const char* name, const std::optional<double>& v) {
        if (v)
            std::printf("%s = %.6f\n", name, *v);
        else
            std::printf("%s = undefined\n", name);
    };
    pr("accuracy ", res.metrics.accuracy);
    pr("precision", res.metrics.precision);
    pr("recall   ", res.metrics.recall);
    pr("error_pct", res.metrics.error_pct);
    std::printf("wrote %s\n", (dir / "backtest.csv").string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Next-day option price forecasting via regularized backward-parabolic solves"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Configuration file (key = value, [subcommand] sections)");

    CommonOpts common;
    app.add_option("--out", common.out_dir, "Output directory")->capture_default_str();
    app.add_flag("-v,--verbose", common.verbosity, "Increase verbosity");

    qrf::SweepConfig sweep_cfg;
    qrf::SimConfig sim_cfg;
    qrf::StudyConfig study_cfg;

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic market series");
    double sim_sigma_hat = 0.2;
    sim_cmd->add_option("--seed", sim_cfg.seed, "RNG seed")->capture_default_str();
    sim_cmd->add_option("--days", sim_cfg.n_days, "Number of trading days")->capture_default_str();
    sim_cmd->add_option("--sigma", sim_cfg.sigma, "Stock volatility")->capture_default_str();
    sim_cmd->add_option("--s0", sim_cfg.s0, "Initial stock price")->capture_default_str();
    sim_cmd->add_option("--strike", sim_cfg.strike, "Option strike")->capture_default_str();
    sim_cmd->add_option("--spread", sim_cfg.spread, "Relative bid/ask half-spread")
        ->capture_default_str();
    sim_cmd->add_option("--maturity-days", sim_cfg.maturity_days, "Option maturity in days")
        ->capture_default_str();
    sim_cmd->add_option("--sigma-hat", sim_sigma_hat, "Market option volatility")
        ->capture_default_str();

    // price
    auto* price_cmd = app.add_subcommand("price", "Closed-form call price and Greeks");
    double p_s = 100.0, p_tau_days = 90.0, p_strike = 100.0, p_sh = 0.2, p_sigma = 0.0,
           p_dt_days = 1.0;
    price_cmd->add_option("--s", p_s, "Stock price")->capture_default_str();
    price_cmd->add_option("--tau-days", p_tau_days, "Time to maturity in trading days")
        ->capture_default_str();
    price_cmd->add_option("--strike", p_strike, "Strike")->capture_default_str();
    price_cmd->add_option("--sigma-hat", p_sh, "Option volatility")->capture_default_str();
    price_cmd->add_option("--sigma", p_sigma,
                          "Stock volatility (enables expected-increment output)");
    price_cmd->add_option("--dt-days", p_dt_days, "Increment horizon in days")
        ->capture_default_str();

    // solve-window
    auto* solve_cmd = app.add_subcommand("solve-window", "Solve one forecast window");
    std::string sw_series;
    int sw_day = 2;
    std::string sw_grid = "100:100";
    std::string sw_mode = "constant";
    qrf::SolverConfig sw_solver;
    solve_cmd->add_option("--series", sw_series, "Input series CSV")->required();
    solve_cmd->add_option("--day", sw_day, "Day index of the window")->capture_default_str();
    solve_cmd->add_option("--grid", sw_grid, "Grid nx:nt")->capture_default_str();
    solve_cmd->add_option("--alpha", sw_solver.alpha, "Regularization parameter")
        ->capture_default_str();
    solve_cmd->add_option("--grad-tol", sw_solver.grad_tol, "Relative gradient tolerance")
        ->capture_default_str();
    solve_cmd->add_option("--window-mode", sw_mode, "constant | extrapolated")
        ->capture_default_str();

    // backtest
    auto* bt_cmd = app.add_subcommand("backtest", "Windowed forecast backtest");
    std::string bt_series;
    double bt_sigma_hat = 0.1;
    qrf::BacktestOptions bt_opt;
    bt_opt.solver = qrf::sweep_solver_defaults();
    std::string bt_grid = "100:100", bt_mode = "constant";
    bt_cmd->add_option("--series", bt_series, "Input series CSV (otherwise synthetic)");
    bt_cmd->add_option("--seed", sim_cfg.seed, "RNG seed for synthetic data")
        ->capture_default_str();
    bt_cmd->add_option("--sigma", sim_cfg.sigma, "Stock volatility (synthetic)")
        ->capture_default_str();
    bt_cmd->add_option("--sigma-hat", bt_sigma_hat, "Option volatility (synthetic)")
        ->capture_default_str();
    bt_cmd->add_option("--windows", bt_opt.n_windows, "Number of forecast windows")
        ->capture_default_str();
    bt_cmd->add_option("--eta", bt_opt.eta, "Trading threshold")->capture_default_str();
    bt_cmd->add_option("--alpha", bt_opt.solver.alpha, "Regularization parameter")
        ->capture_default_str();
    bt_cmd->add_option("--grad-tol", bt_opt.solver.grad_tol, "Relative gradient tolerance")
        ->capture_default_str();
    bt_cmd->add_option("--grid", bt_grid, "Grid nx:nt")->capture_default_str();
    bt_cmd->add_option("--window-mode", bt_mode, "constant | extrapolated")
        ->capture_default_str();

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "Sigma-hat sweep experiment");
    std::string sweep_grid = "100:100", sweep_sh_grid = "0.05:0.37:0.01", sweep_mode = "constant";
    sweep_cmd->add_option("--seed", sweep_cfg.seed, "RNG seed")->capture_default_str();
    sweep_cmd->add_option("--sigma", sweep_cfg.sigma, "Stock volatility")->capture_default_str();
    sweep_cmd->add_option("--sigma-hat-grid", sweep_sh_grid, "lo:hi:step")->capture_default_str();
    sweep_cmd->add_option("--windows", sweep_cfg.n_windows, "Windows per sigma-hat")
        ->capture_default_str();
    sweep_cmd->add_option("--eta", sweep_cfg.eta, "Trading threshold")->capture_default_str();
    sweep_cmd->add_option("--alpha", sweep_cfg.solver.alpha, "Regularization parameter")
        ->capture_default_str();
    sweep_cmd->add_option("--grad-tol", sweep_cfg.solver.grad_tol, "Relative gradient tolerance")
        ->capture_default_str();
    sweep_cmd->add_option("--grid", sweep_grid, "Grid nx:nt")->capture_default_str();
    sweep_cmd->add_option("--threads", sweep_cfg.threads, "Worker threads (0 = all)")
        ->capture_default_str();
    sweep_cmd->add_option("--window-mode", sweep_mode, "constant | extrapolated")
        ->capture_default_str();

    // study
    auto* study_cmd = app.add_subcommand("study", "Convergence-rate study");
    std::string study_deltas = "1e-1,1e-2,1e-3,1e-4";
    std::string study_grid = "100:100";
    study_cmd->add_option("--delta-grid", study_deltas, "Comma-separated noise levels")
        ->capture_default_str();
    study_cmd->add_option("--rho", study_cfg.rho, "Cut distance from the final time")
        ->capture_default_str();
    study_cmd->add_option("--t1", study_cfg.t1, "Time extent of the study domain")
        ->capture_default_str();
    study_cmd->add_option("--grid", study_grid, "Grid nx:nt")->capture_default_str();
    study_cmd->add_option("--noise-seed", study_cfg.noise_seed, "Noise RNG seed")
        ->capture_default_str();
    study_cmd->add_option("--grad-tol", study_cfg.solver.grad_tol, "Relative gradient tolerance")
        ->capture_default_str();
    study_cmd->add_option("--threads", study_cfg.threads, "Worker threads (0 = all)")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);        // prints help or usage text
        return rc == 0 ? 0 : 1;      // 0 for --help, 1 for usage errors
    }

    try {
        if (sim_cmd->parsed()) return run_simulate(common, sim_cfg, sim_sigma_hat);
        if (price_cmd->parsed())
            return run_price(p_s, p_tau_days, p_strike, p_sh, p_sigma, p_dt_days);
        if (solve_cmd->parsed())
            return run_solve_window(common, sw_series, sw_day, parse_grid(sw_grid), sw_solver,
                                    parse_window_mode(sw_mode));
        if (bt_cmd->parsed()) {
            bt_opt.grid = parse_grid(bt_grid);
            bt_opt.window_mode = parse_window_mode(bt_mode);
            return run_backtest_cmd(common, bt_series, sim_cfg, bt_sigma_hat, bt_opt);
        }
        if (sweep_cmd->parsed()) {
            sweep_cfg.grid = parse_grid(sweep_grid);
            parse_sh_grid(sweep_sh_grid, sweep_cfg);
            sweep_cfg.window_mode = parse_window_mode(sweep_mode);
            sweep_cfg.sim = sim_cfg;
            qrf::SweepResult res = qrf::run_sweep(sweep_cfg);
            qrf::emit_report(res, common.out_dir);
            int failed = 0;
            for (const auto& r : res.rows) failed += r.failed ? 1 : 0;
            std::printf("sweep: %zu rows (%d failed), report in %s\n", res.rows.size(), failed,
                        common.out_dir.c_str());
            return failed == 0 ? 0 : 2;
        }
        if (study_cmd->parsed()) {
            study_cfg.delta_grid = parse_delta_grid(study_deltas);
            qrf::Grid g = parse_grid(study_grid);
            study_cfg.nx = g.nx;
            study_cfg.nt = g.nt;
            qrf::StudyResult res = qrf::convergence_study(study_cfg);
            qrf::emit_report(res, common.out_dir);
            std::printf("study: %zu rows, report in %s\n", res.rows.size(), common.out_dir.c_str());
            for (const auto& r : res.rows)
                std::printf("  delta=%-8.3g alpha=%-8.3g error=%-12.6g rate=%-10.4g ratio=%-10.4g iters=%ld conv=%d\n",
                            r.delta, r.alpha, r.error, r.rate_factor, r.ratio, r.iterations,
                            r.converged ? 1 : 0);
            return 0;
        }
    } catch (const CLI::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return 2;
    }
    return 1;
}
