#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qrf {

/// CSV parse failure; carries the 1-based line number.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, long line)
        : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    long line() const { return line_; }

private:
    long line_;
};

/// Series invariant violation; carries the offending day index.
class SeriesValidationError : public std::runtime_error {
public:
    SeriesValidationError(const std::string& what, long row)
        : std::runtime_error(what + " (row " + std::to_string(row) + ")"), row_(row) {}
    long row() const { return row_; }

private:
    long row_;
};

/// Day-indexed bid/ask stock and option prices with the market's option
/// volatility. One row per trading day, times in dimensionless years with
/// uniform step 1/255.
struct MarketSeries {
    std::vector<double> t;
    std::vector<double> stock_bid;
    std::vector<double> stock_ask;
    std::vector<double> option_bid;
    std::vector<double> option_ask;
    std::vector<double> sigma_hat;

    std::size_t size() const { return t.size(); }
    bool empty() const { return t.empty(); }

    double stock_mid(std::size_t k) const { return 0.5 * (stock_bid[k] + stock_ask[k]); }
    double option_mid(std::size_t k) const { return 0.5 * (option_bid[k] + option_ask[k]); }
};

/// Enforce bid < ask on both books, positive prices and vols, and uniform
/// strictly increasing times.
inline void validate_series(const MarketSeries& s) {
    if (s.empty()) throw SeriesValidationError("empty series", 0);
    const std::size_t n = s.size();
    if (s.stock_bid.size() != n || s.stock_ask.size() != n || s.option_bid.size() != n ||
        s.option_ask.size() != n || s.sigma_hat.size() != n)
        throw SeriesValidationError("column lengths differ", 0);
    for (std::size_t k = 0; k < n; ++k) {
        if (!(s.stock_bid[k] > 0.0) || !(s.stock_bid[k] < s.stock_ask[k]))
            throw SeriesValidationError("stock bid/ask must satisfy 0 < bid < ask",
                                        static_cast<long>(k));
        if (!(s.option_bid[k] >= 0.0) || !(s.option_bid[k] < s.option_ask[k]))
            throw SeriesValidationError("option bid/ask must satisfy 0 <= bid < ask",
                                        static_cast<long>(k));
        if (!(s.sigma_hat[k] > 0.0))
            throw SeriesValidationError("sigma_hat must be > 0", static_cast<long>(k));
        if (k > 0) {
            double dt = s.t[k] - s.t[k - 1];
            if (!(dt > 0.0) || std::fabs(dt - 1.0 / 255.0) > 1e-9)
                throw SeriesValidationError("times must increase by one trading day (1/255)",
                                            static_cast<long>(k));
        }
    }
}

namespace detail {
inline std::string fmt12(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}
}  // namespace detail

/// Write the CSV schema: day_index,t,s_bid,s_ask,v_bid,v_ask,sigma_hat.
/// Values carry 12 significant digits, so save-then-load is exact in
/// decimal form and canonical files round-trip byte-identically.
inline void save_series(const MarketSeries& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_series: cannot open " + path);
    out << "day_index,t,s_bid,s_ask,v_bid,v_ask,sigma_hat\n";
    for (std::size_t k = 0; k < s.size(); ++k) {
        out << k << ',' << detail::fmt12(s.t[k]) << ',' << detail::fmt12(s.stock_bid[k]) << ','
            << detail::fmt12(s.stock_ask[k]) << ',' << detail::fmt12(s.option_bid[k]) << ','
            << detail::fmt12(s.option_ask[k]) << ',' << detail::fmt12(s.sigma_hat[k]) << '\n';
    }
    if (!out) throw std::runtime_error("save_series: write failed for " + path);
}

inline MarketSeries load_series(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_series: cannot open " + path);
    MarketSeries s;
    std::string line;
    long lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;  // first non-comment line is the header
            continue;
        }
        std::istringstream ss(line);
        std::string field;
        double vals[7];
        for (int c = 0; c < 7; ++c) {
            if (!std::getline(ss, field, ','))
                throw ParseError("expected 7 comma-separated fields", lineno);
            try {
                std::size_t pos = 0;
                vals[c] = std::stod(field, &pos);
                while (pos < field.size() && std::isspace(static_cast<unsigned char>(field[pos])))
                    ++pos;
                if (pos != field.size()) throw std::invalid_argument(field);
            } catch (const std::exception&) {
                throw ParseError("cannot parse numeric field '" + field + "'", lineno);
            }
        }
        if (std::getline(ss, field, ',')) throw ParseError("too many fields", lineno);
        s.t.push_back(vals[1]);
        s.stock_bid.push_back(vals[2]);
        s.stock_ask.push_back(vals[3]);
        s.option_bid.push_back(vals[4]);
        s.option_ask.push_back(vals[5]);
        s.sigma_hat.push_back(vals[6]);
    }
    if (s.empty()) throw SeriesValidationError("no data rows in " + path, 0);
    validate_series(s);
    return s;
}

}  // namespace qrf
