#pragma once

// Reference calculations written independently of the library: closed forms,
// textbook stencils and hand-rolled quadrature. Tests compare the library
// against these rather than against itself.

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

inline std::vector<double> nodes(double lo, double hi, std::size_t m) {
    std::vector<double> w(m);
    for (std::size_t i = 0; i < m; ++i) w[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(m - 1);
    return w;
}

inline double fd(double a, double b, double w) { return 1.0 / (std::exp(a * w + b) + 1.0); }

/// n, n', n'' of a Fermi-Dirac occupation in closed form.
struct Derivs {
    double n, d1, d2;
};

inline Derivs fd_derivs(double a, double b, double w) {
    const double n = fd(a, b, w);
    const double d1 = -a * n * (1.0 - n);
    const double d2 = -a * d1 * (1.0 - 2.0 * n);
    return {n, d1, d2};
}

/// Bracket of K in the literal form n⁴(1/n)'' + n²(ln n)'', expanded by hand.
inline double literal_bracket(const Derivs& d) {
    const double n = d.n;
    const double inv2 = 2.0 * d.d1 * d.d1 / (n * n * n) - d.d2 / (n * n);
    const double log2 = d.d2 / n - d.d1 * d.d1 / (n * n);
    return n * n * n * n * inv2 + n * n * log2;
}

/// K from the expanded form with plain centered differences inside and
/// second-order one-sided differences at the edges.
inline std::vector<double> expanded_K(const std::vector<double>& n, double lo, double hi, double I, double s) {
    const std::size_t m = n.size();
    const double h = (hi - lo) / static_cast<double>(m - 1);
    std::vector<double> K(m);
    for (std::size_t i = 0; i < m; ++i) {
        double d1, d2;
        if (i == 0) {
            d1 = (-3.0 * n[0] + 4.0 * n[1] - n[2]) / (2.0 * h);
            d2 = (2.0 * n[0] - 5.0 * n[1] + 4.0 * n[2] - n[3]) / (h * h);
        } else if (i == m - 1) {
            d1 = (3.0 * n[m - 1] - 4.0 * n[m - 2] + n[m - 3]) / (2.0 * h);
            d2 = (2.0 * n[m - 1] - 5.0 * n[m - 2] + 4.0 * n[m - 3] - n[m - 4]) / (h * h);
        } else {
            d1 = (n[i + 1] - n[i - 1]) / (2.0 * h);
            d2 = (n[i + 1] - 2.0 * n[i] + n[i - 1]) / (h * h);
        }
        const double w = lo + static_cast<double>(i) * h;
        K[i] = -I * std::pow(w, s) * (n[i] * (1.0 - n[i]) * d2 + (2.0 * n[i] - 1.0) * d1 * d1);
    }
    return K;
}

inline double trapezoid(const std::vector<double>& f, double lo, double hi) {
    const std::size_t m = f.size();
    const double h = (hi - lo) / static_cast<double>(m - 1);
    double acc = 0.5 * (f.front() + f.back());
    for (std::size_t i = 1; i + 1 < m; ++i) acc += f[i];
    return acc * h;
}

/// J(ω) = 2π k / β with k = sqrt((ω-α)/β).
inline double jacobian(double w, double alpha, double beta) {
    return 2.0 * std::numbers::pi / beta * std::sqrt((w - alpha) / beta);
}

/// ∫ J dω over [lo, hi] in closed form.
inline double jacobian_integral(double lo, double hi, double alpha, double beta) {
    auto prim = [&](double w) { return 2.0 * std::numbers::pi / beta * (2.0 / 3.0) * std::pow(w - alpha, 1.5) / std::sqrt(beta); };
    return prim(hi) - prim(lo);
}

inline double max_abs(const std::vector<double>& v, std::size_t skip = 0) {
    double best = 0.0;
    for (std::size_t i = skip; i + skip < v.size(); ++i) best = std::max(best, std::abs(v[i]));
    return best;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double best = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) best = std::max(best, std::abs(a[i] - b[i]));
    return best;
}

/// Ordinary least squares y = c1 x + c0.
struct Line {
    double slope, intercept;
};

inline Line fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return {slope, (sy - slope * sx) / n};
}

}  // namespace oracle
