#pragma once

// Differential approximation of the four-wave collision integral:
//
//   dN/dt = d²K/dω²,   K = -I ω^s [ n(1-n) n'' + (2n-1) n'^2 ]
//                        = -I ω^s n²(1-n)² (ln(n/(1-n)))''
//
// with carrier flux Q = K' and energy flux P = K - ωK'. The production stencil
// discretizes the last form: the logit of a Fermi-Dirac state is linear in ω,
// so the discrete operator annihilates it to rounding.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fluxlase/banded.hpp"
#include "fluxlase/core_model.hpp"
#include "fluxlase/error.hpp"

namespace fluxlase {

inline constexpr double kOccupationFloor = 1e-12;

/// Carrier flux Q and energy flux P imposed at each window edge. Q > 0 means
/// carriers flow towards lower ω; P > 0 means energy flows towards higher ω.
struct BoundaryFluxes {
    double q_left = 0.0;
    double p_left = 0.0;
    double q_right = 0.0;
    double p_right = 0.0;

    static BoundaryFluxes zero() { return {}; }
    static BoundaryFluxes uniform(double q, double p) { return {q, p, q, p}; }

    bool finite() const noexcept {
        return std::isfinite(q_left) && std::isfinite(p_left) && std::isfinite(q_right) &&
               std::isfinite(p_right);
    }
    bool zero_flux() const noexcept {
        return q_left == 0.0 && p_left == 0.0 && q_right == 0.0 && p_right == 0.0;
    }
    friend bool operator==(const BoundaryFluxes&, const BoundaryFluxes&) = default;
};

struct FluxField {
    std::vector<double> K;
    std::vector<double> Q;
    std::vector<double> P;
};

/// Algebraically equivalent forms of the bracket in K (without the -Iω^s factor).
enum class KForm {
    logit,     // n²(1-n)² (logit n)''
    expanded,  // n(1-n) n'' + (2n-1) n'^2
    literal,   // n⁴ (1/n)'' + n² (ln n)''
};

/// Pointwise bracket given n and its first two ω-derivatives.
inline double k_bracket(KForm form, double n, double dn, double d2n) {
    switch (form) {
    case KForm::expanded:
        return n * (1.0 - n) * d2n + (2.0 * n - 1.0) * dn * dn;
    case KForm::literal: {
        const double inv2 = -d2n / (n * n) + 2.0 * dn * dn / (n * n * n);
        const double log2 = d2n / n - dn * dn / (n * n);
        return n * n * n * n * inv2 + n * n * log2;
    }
    case KForm::logit: {
        const double g = n * (1.0 - n);
        const double logit2 = d2n / g - dn * dn * (1.0 - 2.0 * n) / (g * g);
        return g * g * logit2;
    }
    }
    return 0.0;
}

inline double clamp_occupation(double n) noexcept {
    return std::clamp(n, kOccupationFloor, 1.0 - kOccupationFloor);
}

inline std::vector<double> clamp_occupation(std::span<const double> n) {
    std::vector<double> out(n.size());
    for (std::size_t i = 0; i < n.size(); ++i) {
        if (!(n[i] >= 0.0 && n[i] <= 1.0))
            throw InvariantError("occupation outside [0,1] at node " + std::to_string(i));
        out[i] = clamp_occupation(n[i]);
    }
    return out;
}

inline double logit(double n) noexcept { return std::log(n) - std::log1p(-n); }

inline double logistic(double x) noexcept {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

namespace detail {

/// Second-order second derivative at node i; one-sided at the ends.
inline double second_difference(std::span<const double> f, std::size_t i, double h) {
    const std::size_t m = f.size();
    if (i == 0) return (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (h * h);
    if (i == m - 1)
        return (2.0 * f[m - 1] - 5.0 * f[m - 2] + 4.0 * f[m - 3] - f[m - 4]) / (h * h);
    return (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (h * h);
}

/// Second-order first derivative at node i; one-sided at the ends.
inline double first_difference(std::span<const double> f, std::size_t i, double h) {
    const std::size_t m = f.size();
    if (i == 0) return (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    if (i == m - 1) return (3.0 * f[m - 1] - 4.0 * f[m - 2] + f[m - 3]) / (2.0 * h);
    return (f[i + 1] - f[i - 1]) / (2.0 * h);
}

}  // namespace detail

/// Discrete collision operator on a fixed grid. Caches I ω^s and J(ω) so the
/// per-step cost is a handful of logs.
class CollisionOperator {
public:
    CollisionOperator(const SpectralGrid& grid, const MaterialParams& params)
        : grid_(grid), h_(grid.spacing()), omega_(grid.nodes()), weight_(grid.size()),
          jac_(grid.size()) {
        params.validate();
        grid.require_above_band_edge(params);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            weight_[i] = params.I * std::pow(omega_[i], params.s);
            jac_[i] = density_jacobian(omega_[i], params);
        }
    }

    const SpectralGrid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return omega_.size(); }
    std::span<const double> omega() const noexcept { return omega_; }
    std::span<const double> jacobian() const noexcept { return jac_; }
    std::span<const double> strength() const noexcept { return weight_; }

    /// K on every node from clamped occupations. Interior nodes use the
    /// centered stencil of the chosen form, edge nodes one-sided stencils.
    std::vector<double> flux_K(std::span<const double> n, KForm form = KForm::logit) const {
        const std::size_t m = size();
        require_length(n);
        std::vector<double> K(m);
        if (form == KForm::logit) {
            const auto ell = logits(n);
            for (std::size_t i = 0; i < m; ++i) {
                const double g = n[i] * (1.0 - n[i]);
                K[i] = -weight_[i] * g * g * detail::second_difference(ell, i, h_);
            }
        } else if (form == KForm::expanded) {
            for (std::size_t i = 0; i < m; ++i) {
                const double dn = detail::first_difference(n, i, h_);
                const double d2n = detail::second_difference(n, i, h_);
                K[i] = -weight_[i] * k_bracket(KForm::expanded, n[i], dn, d2n);
            }
        } else {
            std::vector<double> inv(m), lg(m);
            for (std::size_t i = 0; i < m; ++i) {
                inv[i] = 1.0 / n[i];
                lg[i] = std::log(n[i]);
            }
            for (std::size_t i = 0; i < m; ++i) {
                const double nn = n[i] * n[i];
                K[i] = -weight_[i] * (nn * nn * detail::second_difference(inv, i, h_) +
                                      nn * detail::second_difference(lg, i, h_));
            }
        }
        return K;
    }

    /// Largest magnitude of the two competing terms I ω^s |n(1-n)n''| + I ω^s |(2n-1)n'^2|;
    /// the natural yardstick for cancellation residuals in K.
    double term_scale(std::span<const double> n) const {
        require_length(n);
        double best = 0.0;
        for (std::size_t i = 0; i < size(); ++i) {
            const double dn = detail::first_difference(n, i, h_);
            const double d2n = detail::second_difference(n, i, h_);
            const double t = weight_[i] * (std::abs(n[i] * (1.0 - n[i]) * d2n) +
                                           std::abs((2.0 * n[i] - 1.0) * dn * dn));
            best = std::max(best, t);
        }
        return best;
    }

    /// dN/dt = d²K/dω² with the boundary closure: K at each edge node is set to
    /// Q_bc ω_edge + P_bc and a ghost value outside makes the centered K' equal Q_bc.
    /// The trapezoid sum of the result is exactly Q_right - Q_left and its first
    /// ω-moment exactly P_left - P_right.
    std::vector<double> rhs(std::span<const double> n, const BoundaryFluxes& bc) const {
        auto K = flux_K(n);
        return rhs_from_interior_K(K, bc);
    }

    /// Same closure applied to a precomputed K array (edge entries are overwritten).
    std::vector<double> rhs_from_interior_K(std::vector<double>& K, const BoundaryFluxes& bc) const {
        const std::size_t m = size();
        const double h2 = h_ * h_;
        K[0] = bc.q_left * omega_[0] + bc.p_left;
        K[m - 1] = bc.q_right * omega_[m - 1] + bc.p_right;
        std::vector<double> r(m);
        r[0] = 2.0 * (K[1] - K[0]) / h2 - 2.0 * bc.q_left / h_;
        r[m - 1] = 2.0 * (K[m - 2] - K[m - 1]) / h2 + 2.0 * bc.q_right / h_;
        for (std::size_t i = 1; i + 1 < m; ++i) r[i] = (K[i + 1] - 2.0 * K[i] + K[i - 1]) / h2;
        return r;
    }

    /// Tridiagonal derivative dK_i/dn_j of the production stencil at interior
    /// rows (edge rows are zero: edge K is imposed).
    struct KJacobian {
        std::vector<double> lower, diag, upper;
    };

    KJacobian k_jacobian(std::span<const double> n) const {
        const std::size_t m = size();
        require_length(n);
        KJacobian jk{std::vector<double>(m, 0.0), std::vector<double>(m, 0.0),
                     std::vector<double>(m, 0.0)};
        const auto ell = logits(n);
        const double h2 = h_ * h_;
        for (std::size_t i = 1; i + 1 < m; ++i) {
            const double g = n[i] * (1.0 - n[i]);
            const double gg = g * g;
            const double dgg = 2.0 * g * (1.0 - 2.0 * n[i]);
            const double d2 = (ell[i + 1] - 2.0 * ell[i] + ell[i - 1]) / h2;
            const double c = -weight_[i];
            jk.lower[i] = c * gg / (h2 * n[i - 1] * (1.0 - n[i - 1]));
            jk.upper[i] = c * gg / (h2 * n[i + 1] * (1.0 - n[i + 1]));
            jk.diag[i] = c * (dgg * d2 - 2.0 * gg / (h2 * g));
        }
        return jk;
    }

    /// Pentadiagonal d(dN/dt)/dn.
    BandMatrix rhs_jacobian(std::span<const double> n) const {
        const std::size_t m = size();
        const auto jk = k_jacobian(n);
        const double h2 = h_ * h_;
        BandMatrix a(m, 2, 2);
        auto add_row = [&](std::size_t r, std::size_t j, double d) {
            if (j == 0 || j + 1 == m) return;  // imposed edge K
            a(r, j - 1) += d * jk.lower[j];
            a(r, j) += d * jk.diag[j];
            a(r, j + 1) += d * jk.upper[j];
        };
        add_row(0, 1, 2.0 / h2);
        add_row(m - 1, m - 2, 2.0 / h2);
        for (std::size_t r = 1; r + 1 < m; ++r) {
            add_row(r, r - 1, 1.0 / h2);
            add_row(r, r, -2.0 / h2);
            add_row(r, r + 1, 1.0 / h2);
        }
        return a;
    }

private:
    void require_length(std::span<const double> n) const {
        if (n.size() != size())
            throw InvariantError("occupation length " + std::to_string(n.size()) +
                                 " does not match grid size " + std::to_string(size()));
    }

    static std::vector<double> logits(std::span<const double> n) {
        std::vector<double> ell(n.size());
        for (std::size_t i = 0; i < n.size(); ++i) ell[i] = logit(n[i]);
        return ell;
    }

    SpectralGrid grid_;
    double h_;
    std::vector<double> omega_;
    std::vector<double> weight_;
    std::vector<double> jac_;
};

/// Q = dK/dω: centered inside, second-order one-sided at the edges.
inline std::vector<double> flux_Q(std::span<const double> K, const SpectralGrid& grid) {
    if (K.size() != grid.size()) throw InvariantError("flux_Q: length does not match grid");
    std::vector<double> q(K.size());
    for (std::size_t i = 0; i < K.size(); ++i) q[i] = detail::first_difference(K, i, grid.spacing());
    return q;
}

/// P = K - ω Q.
inline std::vector<double> flux_P(std::span<const double> K, const SpectralGrid& grid) {
    const auto q = flux_Q(K, grid);
    std::vector<double> p(K.size());
    for (std::size_t i = 0; i < K.size(); ++i) p[i] = K[i] - grid.node(i) * q[i];
    return p;
}

inline std::vector<double> flux_K(const CarrierDistribution& n, const SpectralGrid& grid,
                                  const MaterialParams& params, KForm form = KForm::logit) {
    n.require_size(grid.size());
    const auto clamped = clamp_occupation(n.values());
    return CollisionOperator(grid, params).flux_K(clamped, form);
}

inline FluxField flux_field(const CarrierDistribution& n, const SpectralGrid& grid,
                            const MaterialParams& params) {
    FluxField f;
    f.K = flux_K(n, grid, params);
    f.Q = flux_Q(f.K, grid);
    f.P = flux_P(f.K, grid);
    return f;
}

inline std::vector<double> collision_rhs(const CarrierDistribution& n, const SpectralGrid& grid,
                                         const MaterialParams& params, const BoundaryFluxes& bc) {
    if (!bc.finite()) throw InvariantError("collision_rhs: boundary fluxes must be finite");
    n.require_size(grid.size());
    const auto clamped = clamp_occupation(n.values());
    return CollisionOperator(grid, params).rhs(clamped, bc);
}

}  // namespace fluxlase
