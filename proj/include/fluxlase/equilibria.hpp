#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "fluxlase/banded.hpp"
#include "fluxlase/collision.hpp"
#include "fluxlase/core_model.hpp"
#include "fluxlase/error.hpp"

namespace fluxlase {

/// n = 1/(exp(aω + b) + 1). With ℏ = k_B = 1, a plays the role of 1/T and b of -μ/T.
struct FermiDiracParams {
    double a = 0.0;
    double b = 0.0;
    double residual = 0.0;  // RMS misfit of the logit line
};

/// Overflow-safe Fermi-Dirac occupation, saturated to the clamp bounds.
inline double fermi_dirac_occupation(double a, double b, double omega) noexcept {
    return clamp_occupation(logistic(-(a * omega + b)));
}

inline CarrierDistribution fermi_dirac(double a, double b, const SpectralGrid& grid) {
    std::vector<double> n(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) n[i] = fermi_dirac_occupation(a, b, grid.node(i));
    return CarrierDistribution(std::move(n));
}

/// Least-squares line through logit(n) = -(aω + b).
inline FermiDiracParams fit_fermi_dirac(std::span<const double> n, const SpectralGrid& grid) {
    if (n.size() != grid.size()) throw InvariantError("fit_fermi_dirac: length does not match grid");
    const auto clamped = clamp_occupation(n);

    bool all_at_bound = true;
    for (double v : clamped)
        if (v != kOccupationFloor && v != 1.0 - kOccupationFloor) all_at_bound = false;
    bool constant = true;
    for (double v : clamped)
        if (v != clamped.front()) constant = false;
    if (all_at_bound && constant)
        throw NumericalError("fit_fermi_dirac: occupation pinned at a clamp bound across the window");

    const std::size_t m = n.size();
    double wbar = 0.0, lbar = 0.0;
    std::vector<double> ell(m);
    for (std::size_t i = 0; i < m; ++i) {
        ell[i] = logit(clamped[i]);
        wbar += grid.node(i);
        lbar += ell[i];
    }
    wbar /= static_cast<double>(m);
    lbar /= static_cast<double>(m);
    double sww = 0.0, swl = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double dw = grid.node(i) - wbar;
        sww += dw * dw;
        swl += dw * (ell[i] - lbar);
    }
    const double slope = swl / sww;
    const double intercept = lbar - slope * wbar;

    double ss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double r = ell[i] - (slope * grid.node(i) + intercept);
        ss += r * r;
    }
    return {-slope, -intercept, std::sqrt(ss / static_cast<double>(m))};
}

inline FermiDiracParams fit_fermi_dirac(const CarrierDistribution& n, const SpectralGrid& grid) {
    return fit_fermi_dirac(n.values(), grid);
}

struct StationaryOptions {
    int max_iterations = 200;
    int max_halvings = 30;
    double relative_tolerance = 1e-10;
    /// Warm start (e.g. the previous member of a continuation). Must carry the
    /// requested boundary occupations.
    std::optional<CarrierDistribution> initial_guess;
};

struct StationaryState {
    CarrierDistribution n;
    int iterations = 0;
    std::vector<double> residual_history;  // max nodal |K - (qω + p)| per iterate
};

namespace detail {

inline double stationary_residual(const CollisionOperator& op, std::span<const double> ell,
                                  double q, double p, std::vector<double>& f,
                                  std::vector<double>& occ) {
    const std::size_t m = ell.size();
    for (std::size_t i = 0; i < m; ++i) occ[i] = logistic(ell[i]);
    const double h2 = op.grid().spacing() * op.grid().spacing();
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < m; ++i) {
        const double g = occ[i] * (1.0 - occ[i]);
        const double K = -op.strength()[i] * g * g * (ell[i + 1] - 2.0 * ell[i] + ell[i - 1]) / h2;
        f[i] = K - (q * op.omega()[i] + p);
        worst = std::max(worst, std::abs(f[i]));
    }
    return worst;
}

}  // namespace detail

/// Solves the discrete stationary problem K[n](ω_i) = qω_i + p at interior nodes
/// with Dirichlet occupations at both edges. Damped Newton on logit(n), which
/// keeps iterates inside (0,1) unless they run into the clamp bounds.
inline StationaryState stationary_state(double q, double p, double n_left, double n_right,
                                        const SpectralGrid& grid, const MaterialParams& params,
                                        const StationaryOptions& options = {}) {
    if (!(n_left > 0.0 && n_left < 1.0 && n_right > 0.0 && n_right < 1.0))
        throw DomainError("stationary_state: boundary occupations must lie in (0,1)");
    if (!(std::isfinite(q) && std::isfinite(p)))
        throw DomainError("stationary_state: fluxes must be finite");

    const CollisionOperator op(grid, params);
    const std::size_t m = grid.size();
    const double h2 = grid.spacing() * grid.spacing();
    const double ell_bound = logit(1.0 - kOccupationFloor);

    std::vector<double> ell(m);
    if (options.initial_guess) {
        options.initial_guess->require_size(m);
        for (std::size_t i = 0; i < m; ++i) ell[i] = logit(clamp_occupation((*options.initial_guess)[i]));
    } else {
        const double l0 = logit(n_left), l1 = logit(n_right);
        for (std::size_t i = 0; i < m; ++i) {
            const double x = static_cast<double>(i) / static_cast<double>(m - 1);
            ell[i] = l0 + (l1 - l0) * x;
        }
    }
    ell.front() = logit(n_left);
    ell.back() = logit(n_right);

    double target_scale = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        target_scale = std::max(target_scale, std::abs(q * grid.node(i) + p));

    std::vector<double> f(m, 0.0), occ(m), trial(m), f_trial(m, 0.0), occ_trial(m);
    double res = detail::stationary_residual(op, ell, q, p, f, occ);

    StationaryState out;
    out.residual_history.push_back(res);
    const std::size_t interior = m - 2;

    for (int it = 0; it <= options.max_iterations; ++it) {
        const double scale = std::max(target_scale, op.term_scale(occ));
        const double tol = options.relative_tolerance * (scale > 0.0 ? scale : 1.0);
        if (res < tol) {
            out.n = CarrierDistribution(occ);
            out.iterations = it;
            return out;
        }
        if (it == options.max_iterations) break;

        BandMatrix jac(interior, 1, 1);
        std::vector<double> rhs(interior);
        for (std::size_t i = 1; i + 1 < m; ++i) {
            const std::size_t r = i - 1;
            const double g = occ[i] * (1.0 - occ[i]);
            const double gg = g * g;
            const double d2 = (ell[i + 1] - 2.0 * ell[i] + ell[i - 1]) / h2;
            const double c = -op.strength()[i];
            // d(g²)/dℓ = 2g(1-2n) · n(1-n)
            jac(r, r) = c * (2.0 * g * (1.0 - 2.0 * occ[i]) * g * d2 - 2.0 * gg / h2);
            if (r > 0) jac(r, r - 1) = c * gg / h2;
            if (r + 1 < interior) jac(r, r + 1) = c * gg / h2;
            rhs[r] = -f[i];
        }
        const auto delta = solve_banded(std::move(jac), rhs);

        double step = 1.0;
        double res_trial = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int k = 0; k <= options.max_halvings; ++k, step *= 0.5) {
            trial = ell;
            bool finite = true;
            for (std::size_t i = 1; i + 1 < m; ++i) {
                trial[i] = ell[i] + step * delta[i - 1];
                if (!std::isfinite(trial[i])) finite = false;
            }
            if (!finite) continue;
            res_trial = detail::stationary_residual(op, trial, q, p, f_trial, occ_trial);
            if (res_trial < res) {
                accepted = true;
                break;
            }
        }
        if (!accepted)
            throw NoConvergenceError("stationary_state: damping failed to reduce the residual", res);

        for (std::size_t i = 1; i + 1 < m; ++i)
            if (std::abs(trial[i]) > ell_bound)
                throw BracketError("stationary_state: iterate left (0,1) at node " + std::to_string(i));

        ell.swap(trial);
        f.swap(f_trial);
        occ.swap(occ_trial);
        res = res_trial;
        out.residual_history.push_back(res);
    }
    throw NoConvergenceError("stationary_state: Newton did not converge", res);
}

/// Fluxes around an injection point ω0 between a laser sink at ω_L and a heat
/// sink at ω_R, fixed by carrier and energy conservation.
struct FluxBudget {
    double omega_L = 0.0;
    double omega_0 = 0.0;
    double omega_R = 0.0;
    double q0 = 0.0;
    double q_l = 0.0;
    double q_r = 0.0;
    double p_l = 0.0;
    double p_r = 0.0;
};

inline FluxBudget flux_budget(double omega_L, double omega_0, double omega_R, double q0) {
    if (!(omega_L < omega_0 && omega_0 < omega_R))
        throw DomainError("flux_budget: requires omega_L < omega_0 < omega_R");
    if (!(q0 >= 0.0)) throw DomainError("flux_budget: q0 must be >= 0");
    const double span = omega_R - omega_L;
    FluxBudget fb{omega_L, omega_0, omega_R, q0};
    fb.q_l = q0 * (omega_R - omega_0) / span;
    fb.q_r = q0 * (omega_L - omega_0) / span;
    fb.p_r = q0 * omega_R * (omega_0 - omega_L) / span;
    fb.p_l = omega_L * q0 * (omega_0 - omega_R) / span;
    return fb;
}

}  // namespace fluxlase
