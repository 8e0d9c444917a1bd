#pragma once

// Time integration of dN/dt = d²K/dω² under flux boundary conditions.
//
// The default integrator is linearly implicit Euler: the collision right-hand
// side is linearized about the current state,
//
//   J (n⁺ - n) = dt [ R(n) + (dR/dn)(n⁺ - n) ],
//
// giving one pentadiagonal solve per step. The update stays in conservation
// form, so with zero-flux closure the trapezoidal carrier and energy totals
// change only by rounding (and by the occupation clamp, if it ever engages).

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fluxlase/banded.hpp"
#include "fluxlase/collision.hpp"
#include "fluxlase/core_model.hpp"
#include "fluxlase/equilibria.hpp"
#include "fluxlase/error.hpp"

namespace fluxlase {

enum class TimeScheme { linearly_implicit, explicit_rk4 };

struct StepControl {
    /// Initial (adaptive) or fixed step in fs. Non-positive: pick the first step
    /// from the initial rate so that it changes n by about max_change / 2.
    double dt = 0.0;
    bool adaptive = true;
    double dt_max = std::numeric_limits<double>::infinity();
    double max_change = 5e-3;  // largest nodal |Δn| accepted per step
    double dt_min = 0.0;       // below this a step is accepted regardless
};

struct EvolveOptions {
    StepControl control;
    TimeScheme scheme = TimeScheme::linearly_implicit;
    double snapshot_every = 0.0;  // fs; 0 records only the first and last states
    bool stop_when_steady = false;
    double steady_rate = 1e-8;    // max nodal |∂²K| h² relative to the K scale
    int steady_snapshots = 10;
};

struct Snapshot {
    double t = 0.0;
    CarrierDistribution n;
};

struct TotalsSample {
    double t = 0.0;
    double carriers = 0.0;
    double energy = 0.0;
};

struct KineticsRun {
    std::vector<Snapshot> snapshots;
    std::vector<TotalsSample> totals_series;
    bool steady = false;
    double time_to_steady = std::numeric_limits<double>::quiet_NaN();
    std::size_t steps = 0;
    std::size_t rejected = 0;
};

namespace detail {

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

/// Divergence residual |∂²K| h² over the K scale: a grid- and unit-free
/// measure of how far n is from a steady state.
inline double relative_rate(const CollisionOperator& op, std::span<const double> n,
                            const BoundaryFluxes& bc) {
    const auto r = op.rhs(n, bc);
    double worst = 0.0;
    for (double v : r) worst = std::max(worst, std::abs(v));
    const double h = op.grid().spacing();
    const double scale = op.term_scale(n);
    return scale > 0.0 ? worst * h * h / scale : worst * h * h;
}

inline bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

/// Step acceptance: finite, no nodal change above max_change, and no node
/// loses more than half of its occupation or of its vacancy. Changes below
/// kStepSlack are exempt from the relative rule so nodes at the floor do not
/// stall the step.
inline constexpr double kStepSlack = 1e-6;

inline bool step_acceptable(std::span<const double> before, std::span<const double> after,
                            double max_change) {
    for (std::size_t i = 0; i < before.size(); ++i) {
        const double a = after[i], b = before[i];
        if (!std::isfinite(a)) return false;
        if (std::abs(a - b) > max_change) return false;
        if (a < 0.5 * b - kStepSlack || 1.0 - a < 0.5 * (1.0 - b) - kStepSlack) return false;
    }
    return true;
}

inline std::vector<double> clamped(std::vector<double> n) {
    for (double& v : n) v = clamp_occupation(v);
    return n;
}

/// Max nodal |dn/dt| = |R/J|.
inline double max_rate(const CollisionOperator& op, std::span<const double> n,
                       const BoundaryFluxes& bc) {
    const auto r = op.rhs(n, bc);
    double worst = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) worst = std::max(worst, std::abs(r[i] / op.jacobian()[i]));
    return worst;
}

}  // namespace detail

/// Unclamped increment of one linearly implicit step.
inline std::vector<double> implicit_increment(const CollisionOperator& op, std::span<const double> n,
                                              double dt, const BoundaryFluxes& bc) {
    const auto r = op.rhs(n, bc);
    BandMatrix a = op.rhs_jacobian(n);
    const std::size_t m = n.size();
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j0 = i >= 2 ? i - 2 : 0;
        const std::size_t j1 = std::min(m - 1, i + 2);
        for (std::size_t j = j0; j <= j1; ++j) a(i, j) *= -dt;
        a(i, i) += op.jacobian()[i];
    }
    // Column scaling by n(1-n) (an increment in logit) plus row equilibration
    // keeps the system well conditioned when nodes sit near the occupation bounds.
    std::vector<double> g(m);
    for (std::size_t j = 0; j < m; ++j) g[j] = n[j] * (1.0 - n[j]);
    std::vector<double> rs(m);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j0 = i >= 2 ? i - 2 : 0;
        const std::size_t j1 = std::min(m - 1, i + 2);
        double row = 0.0;
        for (std::size_t j = j0; j <= j1; ++j) {
            a(i, j) *= g[j];
            row = std::max(row, std::abs(a(i, j)));
        }
        rs[i] = row > 0.0 ? 1.0 / row : 1.0;
        for (std::size_t j = j0; j <= j1; ++j) a(i, j) *= rs[i];
    }
    std::vector<double> b(m);
    for (std::size_t i = 0; i < m; ++i) b[i] = dt * r[i] * rs[i];
    auto y = solve_banded(std::move(a), b);
    for (std::size_t j = 0; j < m; ++j) y[j] *= g[j];
    return y;
}

/// Unclamped result of one linearly implicit step; step acceptance is judged
/// on this before clamping hides an overshoot.
inline std::vector<double> implicit_trial(const CollisionOperator& op, std::span<const double> n,
                                          double dt, const BoundaryFluxes& bc) {
    auto out = implicit_increment(op, n, dt, bc);
    for (std::size_t i = 0; i < n.size(); ++i) out[i] += n[i];
    return out;
}

/// One linearly implicit step on clamped occupations. The result is clamped
/// (possibly non-finite, which callers check).
inline std::vector<double> implicit_step(const CollisionOperator& op, std::span<const double> n,
                                         double dt, const BoundaryFluxes& bc) {
    return detail::clamped(implicit_trial(op, n, dt, bc));
}

/// Classical RK4 on dn/dt = R/J. Only stable for dt below explicit_stable_dt().
inline std::vector<double> explicit_rk4_trial(const CollisionOperator& op, std::span<const double> n,
                                              double dt, const BoundaryFluxes& bc) {
    const std::size_t m = n.size();
    auto rate = [&](std::span<const double> x) {
        auto r = op.rhs(detail::clamped(std::vector<double>(x.begin(), x.end())), bc);
        for (std::size_t i = 0; i < m; ++i) r[i] /= op.jacobian()[i];
        return r;
    };
    std::vector<double> tmp(m);
    const auto k1 = rate(n);
    for (std::size_t i = 0; i < m; ++i) tmp[i] = n[i] + 0.5 * dt * k1[i];
    const auto k2 = rate(tmp);
    for (std::size_t i = 0; i < m; ++i) tmp[i] = n[i] + 0.5 * dt * k2[i];
    const auto k3 = rate(tmp);
    for (std::size_t i = 0; i < m; ++i) tmp[i] = n[i] + dt * k3[i];
    const auto k4 = rate(tmp);
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i)
        out[i] = n[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

inline std::vector<double> explicit_rk4_step(const CollisionOperator& op, std::span<const double> n,
                                             double dt, const BoundaryFluxes& bc) {
    return detail::clamped(explicit_rk4_trial(op, n, dt, bc));
}

/// Gershgorin bound on the spectral radius of J⁻¹ dR/dn turned into an RK4
/// step limit (real-axis stability interval ≈ 2.78).
inline double explicit_stable_dt(const CollisionOperator& op, std::span<const double> n) {
    const BandMatrix a = op.rhs_jacobian(n);
    double radius = 0.0;
    const std::size_t m = n.size();
    for (std::size_t i = 0; i < m; ++i) {
        double row = 0.0;
        const std::size_t j0 = i >= 2 ? i - 2 : 0;
        const std::size_t j1 = std::min(m - 1, i + 2);
        for (std::size_t j = j0; j <= j1; ++j) row += std::abs(a(i, j));
        radius = std::max(radius, row / op.jacobian()[i]);
    }
    return 2.78 / radius;
}

inline CarrierDistribution step(const CarrierDistribution& n, double dt, const SpectralGrid& grid,
                                const MaterialParams& params, const BoundaryFluxes& bc) {
    if (!(dt > 0.0)) throw DomainError("step: dt must be > 0");
    if (!bc.finite()) throw InvariantError("step: boundary fluxes must be finite");
    n.require_size(grid.size());
    const CollisionOperator op(grid, params);
    auto out = implicit_step(op, clamp_occupation(n.values()), dt, bc);
    if (!detail::all_finite(out)) throw NonFiniteError("step produced non-finite occupations", dt, n.vector());
    return CarrierDistribution(std::move(out));
}

inline CarrierDistribution step_explicit(const CarrierDistribution& n, double dt,
                                         const SpectralGrid& grid, const MaterialParams& params,
                                         const BoundaryFluxes& bc) {
    if (!(dt > 0.0)) throw DomainError("step_explicit: dt must be > 0");
    n.require_size(grid.size());
    const CollisionOperator op(grid, params);
    auto out = explicit_rk4_step(op, clamp_occupation(n.values()), dt, bc);
    if (!detail::all_finite(out)) throw NonFiniteError("explicit step produced non-finite occupations", dt, n.vector());
    return CarrierDistribution(std::move(out));
}

inline KineticsRun evolve(const CarrierDistribution& n0, double t_end, const SpectralGrid& grid,
                          const MaterialParams& params, const BoundaryFluxes& bc,
                          const EvolveOptions& options = {}) {
    if (!(t_end > 0.0)) throw DomainError("evolve: t_end must be > 0");
    if (!bc.finite()) throw InvariantError("evolve: boundary fluxes must be finite");
    n0.require_size(grid.size());

    const CollisionOperator op(grid, params);
    std::vector<double> n = clamp_occupation(n0.values());
    KineticsRun run;
    int steady_streak = 0;
    double streak_start = 0.0;

    auto advance = [&](std::span<const double> x, double dt) {
        return options.scheme == TimeScheme::linearly_implicit ? implicit_trial(op, x, dt, bc)
                                                               : explicit_rk4_trial(op, x, dt, bc);
    };
    // Returns true when the run should stop.
    auto record = [&](double t) {
        CarrierDistribution dist(n);
        const auto tot = spectral_totals(dist, grid, params);
        run.snapshots.push_back({t, std::move(dist)});
        run.totals_series.push_back({t, tot.carriers, tot.energy});
        if (detail::relative_rate(op, n, bc) < options.steady_rate) {
            if (steady_streak++ == 0) streak_start = t;
            if (steady_streak >= options.steady_snapshots && !run.steady) {
                run.steady = true;
                run.time_to_steady = streak_start;
            }
        } else {
            steady_streak = 0;
        }
        return options.stop_when_steady && run.steady;
    };

    if (record(0.0)) return run;

    const StepControl& ctl = options.control;
    const bool periodic = options.snapshot_every > 0.0;

    if (!ctl.adaptive) {
        if (!(ctl.dt > 0.0)) throw DomainError("evolve: fixed stepping needs dt > 0");
        const auto steps = static_cast<std::size_t>(std::llround(t_end / ctl.dt));
        const std::size_t every =
            periodic ? std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(options.snapshot_every / ctl.dt)))
                     : steps;
        for (std::size_t k = 1; k <= steps; ++k) {
            auto next = advance(n, ctl.dt);
            if (!detail::all_finite(next))
                throw NonFiniteError("evolve: non-finite occupations", static_cast<double>(k) * ctl.dt, n);
            n = detail::clamped(std::move(next));
            ++run.steps;
            if (k % every == 0 || k == steps)
                if (record(static_cast<double>(k) * ctl.dt)) return run;
        }
        return run;
    }

    double dt = ctl.dt;
    if (!(dt > 0.0)) {
        const double rate = detail::max_rate(op, n, bc);
        dt = rate > 0.0 ? 0.5 * ctl.max_change / rate : t_end;
    }
    dt = std::min(dt, ctl.dt_max);

    double t = 0.0;
    double next_snapshot = periodic ? options.snapshot_every : t_end;
    while (t < t_end) {
        const double target = std::min(next_snapshot, t_end);
        const double dt_try = std::min(dt, target - t);
        auto next = advance(n, dt_try);
        if (!detail::step_acceptable(n, next, ctl.max_change)) {
            if (dt_try > ctl.dt_min) {
                dt = 0.5 * dt_try;
                ++run.rejected;
                continue;
            }
            if (!detail::all_finite(next)) throw NonFiniteError("evolve: non-finite occupations", t, n);
        }
        next = detail::clamped(std::move(next));
        const double change = detail::max_abs_diff(next, n);
        n.swap(next);
        ++run.steps;
        const bool landed = dt_try == target - t;
        t = landed ? target : t + dt_try;
        if (change < 0.25 * ctl.max_change && dt_try == dt) dt = std::min(2.0 * dt, ctl.dt_max);
        if (landed) {
            if (record(t)) return run;
            if (periodic) next_snapshot += options.snapshot_every;
        }
    }
    return run;
}

/// Exploits dN/dt = c F[n] under I -> cI: evolving with cI for time t must match
/// evolving with I for time ct when the step is rescaled by 1/c. Returns the
/// max nodal deviation of the two end states.
inline double time_rescale_check(const CarrierDistribution& n0, double i_factor, double t,
                                 const SpectralGrid& grid, const MaterialParams& params,
                                 const BoundaryFluxes& bc, double dt) {
    if (!(i_factor > 0.0)) throw DomainError("time_rescale_check: factor must be > 0");
    EvolveOptions fixed;
    fixed.control.adaptive = false;

    MaterialParams scaled = params;
    scaled.I = params.I * i_factor;
    fixed.control.dt = dt / i_factor;
    const auto fast = evolve(n0, t, grid, scaled, bc, fixed);

    fixed.control.dt = dt;
    const auto slow = evolve(n0, i_factor * t, grid, params, bc, fixed);

    return detail::max_abs_diff(fast.snapshots.back().n.values(), slow.snapshots.back().n.values());
}

/// Time at which the Fermi-Dirac fit residual of a zero-flux relaxation first
/// drops below `threshold`, interpolated log-linearly between steps.
inline double relaxation_time(const CarrierDistribution& n0, const SpectralGrid& grid,
                              const MaterialParams& params, double threshold,
                              const StepControl& control, std::size_t max_steps = 2'000'000) {
    const CollisionOperator op(grid, params);
    const BoundaryFluxes bc = BoundaryFluxes::zero();
    std::vector<double> n = clamp_occupation(n0.values());
    double r_prev = fit_fermi_dirac(n, grid).residual;
    if (r_prev < threshold) return 0.0;

    double dt = control.dt;
    if (!(dt > 0.0)) dt = 0.5 * control.max_change / detail::max_rate(op, n, bc);
    double t = 0.0;
    for (std::size_t k = 0; k < max_steps; ++k) {
        auto next = implicit_trial(op, n, dt, bc);
        if (!detail::all_finite(next)) throw NonFiniteError("relaxation_time: non-finite state", t, n);
        if (control.adaptive && !detail::step_acceptable(n, next, control.max_change)) {
            dt *= 0.5;
            continue;
        }
        next = detail::clamped(std::move(next));
        const double change = detail::max_abs_diff(next, n);
        const double r = fit_fermi_dirac(next, grid).residual;
        if (r < threshold) {
            const double frac = (std::log(r_prev) - std::log(threshold)) / (std::log(r_prev) - std::log(r));
            return t + frac * dt;
        }
        n.swap(next);
        t += dt;
        r_prev = r;
        if (control.adaptive && change < 0.25 * control.max_change) dt = std::min(2.0 * dt, control.dt_max);
    }
    throw CalibrationError("relaxation_time: no relaxation within the step budget");
}

/// Advances the collision term over `dt`, subdividing internally until every
/// substep passes the acceptance rule. The substep halves on rejection and
/// doubles again after each accepted substep; max_depth bounds consecutive
/// halvings. Used as the stiff half of operator splitting, where the outer step
/// is fixed.
inline std::vector<double> advance_collision(const CollisionOperator& op, std::vector<double> n,
                                             double dt, const BoundaryFluxes& bc,
                                             double max_change = 5e-2, int max_depth = 40) {
    double remaining = dt;
    double sub = dt;
    int depth = 0;
    while (remaining > 0.0) {
        sub = std::min(sub, remaining);
        std::vector<double> next;
        try {
            next = implicit_trial(op, n, sub, bc);
        } catch (const SingularSystemError&) {
            if (++depth > max_depth) throw;
            sub *= 0.5;
            continue;
        }
        if (!detail::step_acceptable(n, next, max_change)) {
            if (++depth > max_depth) throw NonFiniteError("advance_collision: step control failed", 0.0, n);
            sub *= 0.5;
            continue;
        }
        n = detail::clamped(std::move(next));
        remaining -= sub;
        if (remaining < 1e-12 * dt) remaining = 0.0;
        sub *= 2.0;
        depth = 0;
    }
    return n;
}

/// Boundary fluxes with the same carrier rates but no energy extraction: each
/// edge K vanishes, so carriers enter carrying the edge energy.
inline BoundaryFluxes without_extraction(const BoundaryFluxes& bc, const SpectralGrid& grid) {
    return {bc.q_left, -bc.q_left * grid.omega_min(), bc.q_right, -bc.q_right * grid.omega_max()};
}

/// Scales the energy-extraction part of bc by theta in [0,1].
inline BoundaryFluxes partial_extraction(const BoundaryFluxes& bc, const SpectralGrid& grid,
                                         double theta) {
    const auto hot = without_extraction(bc, grid);
    return {bc.q_left, hot.p_left + theta * (bc.p_left - hot.p_left), bc.q_right,
            hot.p_right + theta * (bc.p_right - hot.p_right)};
}

struct CollisionAdvance {
    std::vector<double> n;
    double extraction = 1.0;  // time average of the applied extraction share
};

/// Like advance_collision, but an imposed edge flux may not pull energy out of
/// an edge that has nothing to give. Carrier rates are kept exactly; when the
/// full step is unacceptable the energy-extraction share theta is lowered
/// (largest acceptable value by bisection) before the substep is shrunk.
/// Conservation holds exactly against the applied fluxes.
inline CollisionAdvance advance_collision_limited(const CollisionOperator& op, std::vector<double> n,
                                                  double dt, const BoundaryFluxes& bc,
                                                  double max_change = 5e-2, int max_depth = 40) {
    const auto& grid = op.grid();
    const auto hot = without_extraction(bc, grid);
    const std::size_t m = n.size();
    CollisionAdvance out;
    double theta_time = 0.0;
    double remaining = dt;
    double sub = dt;
    int depth = 0;
    std::vector<double> trial(m);
    while (remaining > 0.0) {
        sub = std::min(sub, remaining);
        std::vector<double> d_full, d_hot;
        try {
            d_full = implicit_increment(op, n, sub, bc);
            d_hot = implicit_increment(op, n, sub, hot);
        } catch (const SingularSystemError&) {
            if (++depth > max_depth) throw;
            sub *= 0.5;
            continue;
        }
        auto candidate = [&](double theta) {
            for (std::size_t i = 0; i < m; ++i)
                trial[i] = n[i] + d_hot[i] + theta * (d_full[i] - d_hot[i]);
            return detail::step_acceptable(n, trial, max_change);
        };
        double theta = 1.0;
        if (!candidate(1.0)) {
            if (!candidate(0.0)) {
                if (++depth > max_depth)
                    throw NonFiniteError("advance_collision_limited: step control failed", 0.0, n);
                sub *= 0.5;
                continue;
            }
            double lo = 0.0, hi = 1.0;
            for (int k = 0; k < 40; ++k) {
                const double mid = 0.5 * (lo + hi);
                (candidate(mid) ? lo : hi) = mid;
            }
            theta = lo;
            candidate(theta);
        }
        for (std::size_t i = 0; i < m; ++i) n[i] = clamp_occupation(trial[i]);
        theta_time += theta * sub;
        remaining -= sub;
        if (remaining < 1e-12 * dt) remaining = 0.0;
        sub *= 2.0;
        depth = 0;
    }
    out.n = std::move(n);
    out.extraction = theta_time / dt;
    return out;
}

struct CalibrationOptions {
    double threshold = 1e-3;                 // Fermi-Dirac fit residual defining "relaxed"
    StepControl reference{0.0, true, std::numeric_limits<double>::infinity(), 1e-5, 0.0};
    double verification_steps_per_target = 2000.0;
};

struct CalibrationResult {
    double I = 0.0;
    double tau_reference = 0.0;  // relaxation time at I = 1
    double tau_verified = 0.0;   // relaxation time with the calibrated I
};

/// I such that the reference state relaxes in `target_fs`. Relies on the exact
/// time rescaling under I -> cI; the verification run uses independent fixed
/// steps.
inline CalibrationResult calibrate_I(double target_fs, const CarrierDistribution& reference_ic,
                                     const SpectralGrid& grid, const MaterialParams& params,
                                     const CalibrationOptions& options = {}) {
    if (!(target_fs > 0.0)) throw DomainError("calibrate_I: target must be > 0");
    MaterialParams unit = params;
    unit.I = 1.0;
    CalibrationResult res;
    res.tau_reference = relaxation_time(reference_ic, grid, unit, options.threshold, options.reference);
    if (!(res.tau_reference > 0.0))
        throw CalibrationError("calibrate_I: reference state is already relaxed");
    res.I = res.tau_reference / target_fs;

    MaterialParams calibrated = params;
    calibrated.I = res.I;
    StepControl fixed{target_fs / options.verification_steps_per_target, false};
    res.tau_verified = relaxation_time(reference_ic, grid, calibrated, options.threshold, fixed);
    return res;
}

}  // namespace fluxlase
