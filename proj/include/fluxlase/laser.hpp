#pragma once

// Single-mode semiconductor Maxwell-Bloch equations with the collision term in
// the carrier equation replaced by the differential approximation:
//
//   de/dt = i (Ω/ℏ)/(2ε₀) ∫ μ p J dω - γ_E e
//   dp/dt = (i(Ω - ω)/ℏ - γ_P) p - i μ/(2ℏ) (2n - 1) e
//   dn/dt = Λ(1 - n) - γ_k n + J⁻¹ d²K/dω² + (μ/ℏ) Im(p e*)
//
// ω is the carrier-pair energy in meV; dividing by ℏ gives 1/fs.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fluxlase/collision.hpp"
#include "fluxlase/core_model.hpp"
#include "fluxlase/error.hpp"
#include "fluxlase/kinetics.hpp"

namespace fluxlase {

using complex = std::complex<double>;

enum class PumpMode { broad, flux };

struct PumpSpec {
    PumpMode mode = PumpMode::broad;
    double lambda = 0.0;    // broad pump rate, 1/fs
    double q_inject = 0.0;  // carrier flux injected at the upper window edge
    double omega_L = 0.0;   // lasing energy; each injected carrier brings this much energy
    /// Spectral shape of the broad pump, flat when empty.
    std::function<double(double)> profile;

    static PumpSpec broad(double lambda) { return {PumpMode::broad, lambda, 0.0, 0.0, {}}; }
    static PumpSpec flux(double q_inject, double omega_L) {
        return {PumpMode::flux, 0.0, q_inject, omega_L, {}};
    }
    static PumpSpec off() { return broad(0.0); }

    double p_inject() const noexcept { return -omega_L * q_inject; }

    void validate() const {
        if (mode == PumpMode::broad) {
            if (!(lambda >= 0.0)) throw ConfigError("pump.lambda must be >= 0", "pump.lambda");
            if (q_inject != 0.0) throw ConfigError("broad pump cannot inject a boundary flux", "pump.q_inject");
        } else {
            if (!std::isfinite(q_inject)) throw ConfigError("pump.q_inject must be finite", "pump.q_inject");
            if (lambda != 0.0) throw ConfigError("flux pump cannot also pump broadly", "pump.lambda");
        }
    }

    /// Zero flux for broad pumping; (q, -ω_L q) at the upper edge and zero flux
    /// at the lasing edge for flux pumping.
    BoundaryFluxes boundary_fluxes() const {
        if (mode == PumpMode::broad) return BoundaryFluxes::zero();
        return {0.0, 0.0, q_inject, p_inject()};
    }
};

/// μ(ω) = μ₀ / (1 + ε_k/ε_gap) with ε_k = ω - α the kinetic energy of the pair.
inline double dipole_weight(double omega, const MaterialParams& params) {
    if (!(params.eps_gap > 0.0)) throw ConfigError("params.eps_gap must be > 0", "params.eps_gap");
    if (!(omega >= params.alpha)) throw DomainError("dipole_weight: omega below the band edge");
    return params.mu0 / (1.0 + (omega - params.alpha) / params.eps_gap);
}

inline double output_power(complex e, const MaterialParams& params) {
    return 2.0 * params.gamma_E * std::norm(e);
}

struct LaserState {
    complex e{};
    std::vector<complex> p;
    CarrierDistribution n;
    double t = 0.0;

    void validate(std::size_t m) const {
        n.require_size(m);
        if (p.size() != m) throw InvariantError("LaserState: polarization length does not match grid");
        if (!std::isfinite(e.real()) || !std::isfinite(e.imag()))
            throw InvariantError("LaserState: non-finite field");
    }
};

struct LaserDerivative {
    complex de{};
    std::vector<complex> dp;
    std::vector<double> dn;
};

/// Precomputed nodal coefficients of the Maxwell-Bloch system on one grid.
class MaxwellBloch {
public:
    MaxwellBloch(const SpectralGrid& grid, const MaterialParams& params, const PumpSpec& pump)
        : params_(params), pump_(pump), collision_(grid, params), weights_(grid.trapezoid_weights()),
          mu_(grid.size()), detuning_(grid.size()), pump_rate_(grid.size(), 0.0) {
        pump.validate();
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double w = grid.node(i);
            mu_[i] = dipole_weight(w, params);
            detuning_[i] = (params.Omega - w) / params.hbar;
            if (pump.mode == PumpMode::broad)
                pump_rate_[i] = pump.lambda * (pump.profile ? pump.profile(w) : 1.0);
        }
        field_coupling_ = complex(0.0, params.Omega / params.hbar / (2.0 * params.eps0));
    }

    std::size_t size() const noexcept { return mu_.size(); }
    const CollisionOperator& collision() const noexcept { return collision_; }
    const PumpSpec& pump() const noexcept { return pump_; }
    std::span<const double> dipole() const noexcept { return mu_; }

    /// ∫ μ p J dω by the trapezoid rule.
    complex polarization_integral(std::span<const complex> p) const {
        complex acc{};
        const auto jac = collision_.jacobian();
        for (std::size_t i = 0; i < p.size(); ++i) acc += weights_[i] * mu_[i] * jac[i] * p[i];
        return acc;
    }

    /// Right-hand side without the collision term.
    void coherent_rhs(complex e, std::span<const complex> p, std::span<const double> n,
                      complex& de, std::span<complex> dp, std::span<double> dn) const {
        de = field_coupling_ * polarization_integral(p) - params_.gamma_E * e;
        const complex ec = std::conj(e);
        for (std::size_t i = 0; i < size(); ++i) {
            dp[i] = complex(-params_.gamma_P, detuning_[i]) * p[i] -
                    complex(0.0, mu_[i] / (2.0 * params_.hbar) * (2.0 * n[i] - 1.0)) * e;
            const double stimulated = mu_[i] / params_.hbar * std::imag(p[i] * ec);
            dn[i] = pump_rate_[i] * (1.0 - n[i]) - params_.gamma_k * n[i] + stimulated;
        }
    }

    /// Per-node carrier rate through the field coupling, (μ/ℏ) Im(p e*).
    std::vector<double> stimulated_rate(complex e, std::span<const complex> p) const {
        std::vector<double> r(size());
        for (std::size_t i = 0; i < size(); ++i) r[i] = mu_[i] / params_.hbar * std::imag(p[i] * std::conj(e));
        return r;
    }

    /// Full right-hand side including J⁻¹ d²K/dω².
    LaserDerivative rhs(const LaserState& s) const {
        s.validate(size());
        LaserDerivative d{complex{}, std::vector<complex>(size()), std::vector<double>(size())};
        const auto n = clamp_occupation(s.n.values());
        coherent_rhs(s.e, s.p, n, d.de, d.dp, d.dn);
        const auto r = collision_.rhs(n, pump_.boundary_fluxes());
        for (std::size_t i = 0; i < size(); ++i) d.dn[i] += r[i] / collision_.jacobian()[i];
        if (!std::isfinite(std::abs(d.de)))
            throw NumericalError("mb_rhs: non-finite field derivative");
        for (std::size_t i = 0; i < size(); ++i)
            if (!std::isfinite(d.dn[i]) || !std::isfinite(std::abs(d.dp[i])))
                throw NumericalError("mb_rhs: non-finite derivative at node " + std::to_string(i));
        return d;
    }

    /// Net small-signal gain rate of the field for a frozen distribution, with
    /// the polarization adiabatically eliminated at field frequency offset `shift` (1/fs).
    double small_signal_gain(std::span<const double> n, double shift = 0.0) const {
        complex acc{};
        const auto jac = collision_.jacobian();
        for (std::size_t i = 0; i < size(); ++i) {
            const complex resp = complex(0.0, -mu_[i] / (2.0 * params_.hbar) * (2.0 * n[i] - 1.0)) /
                                 complex(params_.gamma_P, -(detuning_[i] + shift));
            acc += weights_[i] * mu_[i] * jac[i] * resp;
        }
        return std::real(field_coupling_ * acc);
    }

private:
    MaterialParams params_;
    PumpSpec pump_;
    CollisionOperator collision_;
    std::vector<double> weights_;
    std::vector<double> mu_;
    std::vector<double> detuning_;
    std::vector<double> pump_rate_;
    complex field_coupling_;
};

inline complex polarization_integral(std::span<const complex> p, const SpectralGrid& grid,
                                     const MaterialParams& params) {
    if (p.size() != grid.size()) throw InvariantError("polarization_integral: length does not match grid");
    return MaxwellBloch(grid, params, PumpSpec::off()).polarization_integral(p);
}

inline LaserDerivative mb_rhs(const LaserState& state, const SpectralGrid& grid,
                              const MaterialParams& params, const PumpSpec& pump) {
    return MaxwellBloch(grid, params, pump).rhs(state);
}

/// Carrier injection rate ∫ Λ(ω)(1 - n_ref) J dω delivered by a broad pump
/// acting on n_ref; the flux-pump rate that matches it.
inline double matched_injection(double lambda, const CarrierDistribution& n_ref,
                                const SpectralGrid& grid, const MaterialParams& params,
                                const std::function<double(double)>& profile = {}) {
    n_ref.require_size(grid.size());
    const auto wt = grid.trapezoid_weights();
    double q = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double w = grid.node(i);
        q += wt[i] * lambda * (profile ? profile(w) : 1.0) * (1.0 - n_ref[i]) * density_jacobian(w, params);
    }
    return q;
}

/// Inverse of matched_injection: the broad rate delivering `q_inject` on n_ref.
inline double matched_lambda(double q_inject, const CarrierDistribution& n_ref,
                             const SpectralGrid& grid, const MaterialParams& params,
                             const std::function<double(double)>& profile = {}) {
    const double unit = matched_injection(1.0, n_ref, grid, params, profile);
    if (!(unit > 0.0)) throw DomainError("matched_lambda: reference state is fully Pauli blocked");
    return q_inject / unit;
}

struct LasingOptions {
    double dt = 0.05;                 // fs
    double sample_every = 10.0;       // fs, field series
    double spectra_every = 0.0;       // fs, 0 = first and last only
    double steady_window = 0.0;       // fs, trailing window; 0 = last 10% of the run
    double steady_tolerance = 0.01;   // relative spread of |e|² in the window
    double collision_max_change = 5e-2;
    bool collisions = true;
    complex e0{1e-4, 0.0};
    std::vector<complex> p0;          // empty = zero polarization
    double blowup_field_sq = 1e30;
};

struct FieldSample {
    double t = 0.0;
    complex e{};
    double abs_e_sq = 0.0;
    double power = 0.0;
};

struct LasingRun {
    std::vector<FieldSample> series;
    std::vector<Snapshot> spectra;
    bool lased = false;               // field rose above its seed after the minimum
    bool steady = false;
    double steady_power = 0.0;        // mean power over the trailing window
    double switch_on_time = std::numeric_limits<double>::quiet_NaN();  // time of minimum |e|²
    CarrierDistribution threshold_state;  // n at the minimum of |e|²
    LaserState final_state;
    // Applied share of the imposed edge energy extraction (1 when never limited),
    // averaged over the whole run and over the trailing window.
    double extraction_mean = 1.0;
    double extraction_steady = 1.0;
};

/// Strang splitting: half a collision step (implicit, internally substepped),
/// one RK4 step of the coherent terms, another half collision step.
inline LasingRun run_lasing(const PumpSpec& pump, double t_end, const SpectralGrid& grid,
                            const MaterialParams& params, const CarrierDistribution& n0,
                            const LasingOptions& options = {}) {
    if (!(t_end > 0.0)) throw DomainError("run_lasing: t_end must be > 0");
    if (!(options.dt > 0.0)) throw DomainError("run_lasing: dt must be > 0");
    n0.require_size(grid.size());
    const MaxwellBloch mb(grid, params, pump);
    const BoundaryFluxes bc = pump.boundary_fluxes();
    const std::size_t m = grid.size();

    complex e = options.e0;
    std::vector<complex> p = options.p0.empty() ? std::vector<complex>(m) : options.p0;
    if (p.size() != m) throw InvariantError("run_lasing: initial polarization length mismatch");
    std::vector<double> n = clamp_occupation(n0.values());

    const double dt = options.dt;
    const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
    auto every = [&](double interval) {
        return interval > 0.0 ? std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(interval / dt))) : steps;
    };
    const std::size_t sample_stride = every(options.sample_every);
    const std::size_t spectra_stride = every(options.spectra_every);

    LasingRun run;
    double min_field = std::numeric_limits<double>::infinity();
    auto sample = [&](std::size_t k) {
        const double t = static_cast<double>(k) * dt;
        const double e2 = std::norm(e);
        run.series.push_back({t, e, e2, output_power(e, params)});
        if (e2 < min_field) {
            min_field = e2;
            run.switch_on_time = t;
            run.threshold_state = CarrierDistribution(n);
        }
    };
    sample(0);
    run.spectra.push_back({0.0, CarrierDistribution(n)});

    std::vector<complex> k_p[4], p_tmp(m);
    std::vector<double> k_n[4], n_tmp(m);
    complex k_e[4];
    for (int s = 0; s < 4; ++s) {
        k_p[s].resize(m);
        k_n[s].resize(m);
    }

    const double window = options.steady_window > 0.0 ? options.steady_window : 0.1 * t_end;
    const bool limited = !bc.zero_flux();
    double extraction_all = 0.0, extraction_tail = 0.0, tail_time = 0.0;
    double t_now = 0.0;
    auto collide = [&] {
        if (!options.collisions) return;
        if (!limited) {
            n = advance_collision(mb.collision(), std::move(n), 0.5 * dt, bc, options.collision_max_change);
            return;
        }
        auto adv = advance_collision_limited(mb.collision(), std::move(n), 0.5 * dt, bc, options.collision_max_change);
        n = std::move(adv.n);
        extraction_all += adv.extraction * 0.5 * dt;
        if (t_now > t_end - window) {
            extraction_tail += adv.extraction * 0.5 * dt;
            tail_time += 0.5 * dt;
        }
    };

    for (std::size_t k = 1; k <= steps; ++k) {
        t_now = static_cast<double>(k) * dt;
        collide();

        mb.coherent_rhs(e, p, n, k_e[0], k_p[0], k_n[0]);
        for (int s = 1; s < 4; ++s) {
            const double c = s == 3 ? dt : 0.5 * dt;
            const complex e_tmp = e + c * k_e[s - 1];
            for (std::size_t i = 0; i < m; ++i) {
                p_tmp[i] = p[i] + c * k_p[s - 1][i];
                n_tmp[i] = n[i] + c * k_n[s - 1][i];
            }
            mb.coherent_rhs(e_tmp, p_tmp, n_tmp, k_e[s], k_p[s], k_n[s]);
        }
        e += dt / 6.0 * (k_e[0] + 2.0 * k_e[1] + 2.0 * k_e[2] + k_e[3]);
        for (std::size_t i = 0; i < m; ++i) {
            p[i] += dt / 6.0 * (k_p[0][i] + 2.0 * k_p[1][i] + 2.0 * k_p[2][i] + k_p[3][i]);
            n[i] = clamp_occupation(n[i] + dt / 6.0 * (k_n[0][i] + 2.0 * k_n[1][i] + 2.0 * k_n[2][i] + k_n[3][i]));
        }

        collide();

        const double e2 = std::norm(e);
        if (!std::isfinite(e2) || !detail::all_finite(n))
            throw NonFiniteError("run_lasing: non-finite state", static_cast<double>(k) * dt, n);
        if (e2 > options.blowup_field_sq)
            throw NumericalError("run_lasing: field growth without saturation at t=" +
                                 std::to_string(static_cast<double>(k) * dt) + " fs");

        if (k % sample_stride == 0 || k == steps) sample(k);
        if (k % spectra_stride == 0 || k == steps)
            run.spectra.push_back({static_cast<double>(k) * dt, CarrierDistribution(n)});
    }

    run.final_state = {e, p, CarrierDistribution(n), static_cast<double>(steps) * dt};

    const double seed = std::norm(options.e0);
    run.lased = std::norm(e) > 100.0 * std::max(seed, min_field) && std::norm(e) > seed;

    if (limited && options.collisions) {
        run.extraction_mean = extraction_all / (static_cast<double>(steps) * dt);
        if (tail_time > 0.0) run.extraction_steady = extraction_tail / tail_time;
    }
    const double t_last = run.series.back().t;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0, sum = 0.0;
    std::size_t count = 0;
    for (const auto& s : run.series) {
        if (s.t < t_last - window) continue;
        lo = std::min(lo, s.abs_e_sq);
        hi = std::max(hi, s.abs_e_sq);
        sum += s.power;
        ++count;
    }
    const double mean_e2 = count ? 0.5 * (lo + hi) : 0.0;
    run.steady_power = count ? sum / static_cast<double>(count) : 0.0;
    run.steady = count > 1 && mean_e2 > 0.0 && (hi - lo) <= options.steady_tolerance * mean_e2;
    return run;
}

}  // namespace fluxlase
