#pragma once

#include <cmath>
#include <stdexcept>

namespace qrf {

/// Standard normal density phi(z) = exp(-z^2/2) / sqrt(2*pi).
inline double norm_pdf(double z) {
    static constexpr double kInvSqrt2Pi = 0.39894228040143267794;
    return kInvSqrt2Pi * std::exp(-0.5 * z * z);
}

/// Standard normal CDF N(z), evaluated through erfc so the absolute error
/// stays below ~1e-15 across the whole real line.
inline double std_normal_cdf(double z) {
    if (!std::isfinite(z)) throw std::domain_error("std_normal_cdf: z must be finite");
    return 0.5 * std::erfc(-z * M_SQRT1_2);
}

/// Complementary CDF, N_c(z) = 1 - N(z) = N(-z).
inline double std_normal_cdf_c(double z) {
    return std_normal_cdf(-z);
}

/// Inverse of the standard normal CDF. Rational initial guess (Acklam)
/// followed by one Halley step against the erfc-based CDF; accurate to a
/// few ulps over (0,1).
inline double std_normal_inv(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("std_normal_inv: p must lie in (0,1)");

    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    static constexpr double p_low = 0.02425;

    double x;
    if (p < p_low) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        double q = p - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // Halley refinement of N(x) - p = 0.
    double e = std_normal_cdf(x) - p;
    double u = e / norm_pdf(x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

}  // namespace qrf
