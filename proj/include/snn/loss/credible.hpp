#pragma once

// Equal-tailed credible intervals for a binomial error rate. With k errors in
// n trials and a Beta(a0, b0) prior the posterior is Beta(k + a0, n - k + b0);
// its quantiles come from bisection on the regularized incomplete beta.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace snn {

enum class Prior { Uniform, Jeffreys };

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction,
/// using the symmetry I_x(a,b) = 1 - I_{1-x}(b,a) where it converges faster.
inline double incomplete_beta(double x, double a, double b) {
    if (!(a > 0.0 && b > 0.0)) throw std::domain_error("incomplete_beta: shape parameters must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    if (x > (a + 1.0) / (a + b + 2.0)) return 1.0 - incomplete_beta(1.0 - x, b, a);

    const double log_front = a * std::log(x) + b * std::log1p(-x) - (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
    const double front = std::exp(log_front) / a;

    constexpr double tiny = 1e-300;
    constexpr double tol = 1e-15;
    double f = 1.0, c = 1.0, d = 0.0;
    for (int i = 0; i <= 20000; ++i) {
        const int m = i / 2;
        double numerator;
        if (i == 0) {
            numerator = 1.0;
        } else if (i % 2 == 0) {
            numerator = (m * (b - m) * x) / ((a + 2.0 * m - 1.0) * (a + 2.0 * m));
        } else {
            numerator = -((a + m) * (a + b + m) * x) / ((a + 2.0 * m) * (a + 2.0 * m + 1.0));
        }
        d = 1.0 + numerator * d;
        if (std::abs(d) < tiny) d = tiny;
        d = 1.0 / d;
        c = 1.0 + numerator / c;
        if (std::abs(c) < tiny) c = tiny;
        const double cd = c * d;
        f *= cd;
        if (std::abs(1.0 - cd) < tol) return front * (f - 1.0);
    }
    throw std::runtime_error("incomplete_beta: continued fraction did not converge");
}

/// Smallest x with I_x(a, b) >= p, located by bisection to `tol`.
inline double beta_quantile(double p, double a, double b, double tol = 1e-10) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("beta_quantile: probability outside [0, 1]");
    double lo = 0.0, hi = 1.0;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (incomplete_beta(mid, a, b) < p) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

struct CredibleInterval {
    double low = 0.0;
    double high = 1.0;
    double half_width() const { return 0.5 * (high - low); }
};

/// Equal-tailed interval holding `mass` of the posterior for k errors out of n.
inline CredibleInterval credible_interval(std::size_t k, std::size_t n, double mass = 0.95, Prior prior = Prior::Uniform) {
    if (n < 1) throw std::invalid_argument("credible_interval: need n >= 1");
    if (k > n) throw std::invalid_argument("credible_interval: k = " + std::to_string(k) + " exceeds n = " + std::to_string(n));
    if (!(mass > 0.0 && mass < 1.0)) throw std::invalid_argument("credible_interval: mass must lie in (0, 1)");
    const double a0 = prior == Prior::Uniform ? 1.0 : 0.5;
    const double a = static_cast<double>(k) + a0;
    const double b = static_cast<double>(n - k) + a0;
    const double tail = 0.5 * (1.0 - mass);
    return {beta_quantile(tail, a, b), beta_quantile(1.0 - tail, a, b)};
}

}  // namespace snn
