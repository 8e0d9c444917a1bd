#pragma once

// Material parameters, the parabolic dispersion and the occupation <-> spectral
// density conversion. Energies in meV, times in fs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "fluxlase/error.hpp"

namespace fluxlase {

inline constexpr double kHbarMeVfs = 658.2119569;

struct MaterialParams {
    double alpha = 0.0;        // band-edge offset of the dispersion, meV
    double beta = 1.0;         // dispersion curvature, meV nm^2
    double s = 7.0;            // collision-kernel exponent
    double I = 1.0;            // collision strength
    double mu0 = 1.0;          // dipole weight at k = 0
    double eps_gap = 1424.0;   // gap energy, meV
    double Omega = 1.0;        // cavity frequency, stored as meV
    double gamma_E = 1e-3;     // 1/fs
    double gamma_P = 1e-2;     // 1/fs
    double gamma_k = 1e-5;     // 1/fs
    double Lambda = 0.0;       // broad pump rate, 1/fs
    double hbar = kHbarMeVfs;  // meV fs
    double eps0 = 1.0;

    /// Throws ConfigError naming the first offending field.
    void validate() const {
        auto require = [](bool ok, const char* key, const char* what) {
            if (!ok) throw ConfigError(std::string("params.") + key + ": " + what,
                                       std::string("params.") + key);
        };
        require(std::isfinite(alpha), "alpha", "must be finite");
        require(beta > 0.0 && std::isfinite(beta), "beta", "must be > 0");
        require(s > 0.0 && std::isfinite(s), "s", "must be > 0");
        require(I > 0.0 && std::isfinite(I), "I", "must be > 0");
        require(std::isfinite(mu0), "mu0", "must be finite");
        require(eps_gap > 0.0, "eps_gap", "must be > 0");
        require(std::isfinite(Omega), "Omega", "must be finite");
        require(gamma_E >= 0.0, "gamma_E", "must be >= 0");
        require(gamma_P >= 0.0, "gamma_P", "must be >= 0");
        require(gamma_k >= 0.0, "gamma_k", "must be >= 0");
        require(Lambda >= 0.0, "Lambda", "must be >= 0");
        require(hbar > 0.0, "hbar", "must be > 0");
        require(eps0 > 0.0, "eps0", "must be > 0");
    }
};

/// Uniform grid of m nodes on [omega_min, omega_max].
class SpectralGrid {
public:
    SpectralGrid(double omega_min, double omega_max, std::size_t m)
        : omega_min_(omega_min), omega_max_(omega_max), m_(m) {
        if (!(std::isfinite(omega_min) && std::isfinite(omega_max)))
            throw ConfigError("grid bounds must be finite", "grid.omega_min");
        if (!(omega_max > omega_min))
            throw ConfigError("grid.omega_min must be < grid.omega_max", "grid.omega_min");
        if (m < 8) throw ConfigError("grid.m must be >= 8", "grid.m");
        h_ = (omega_max - omega_min) / static_cast<double>(m - 1);
    }

    double omega_min() const noexcept { return omega_min_; }
    double omega_max() const noexcept { return omega_max_; }
    std::size_t size() const noexcept { return m_; }
    double spacing() const noexcept { return h_; }

    double node(std::size_t i) const noexcept {
        return omega_min_ + static_cast<double>(i) * h_;
    }

    std::vector<double> nodes() const {
        std::vector<double> w(m_);
        for (std::size_t i = 0; i < m_; ++i) w[i] = node(i);
        return w;
    }

    /// Composite-trapezoid weights (h/2 at the ends, h inside).
    std::vector<double> trapezoid_weights() const {
        std::vector<double> wt(m_, h_);
        wt.front() = wt.back() = 0.5 * h_;
        return wt;
    }

    /// Same window at a different resolution.
    SpectralGrid resampled(std::size_t m) const { return {omega_min_, omega_max_, m}; }

    /// Rejects grids touching or below the band edge, where J(ω) = 0.
    void require_above_band_edge(const MaterialParams& params) const {
        if (!(omega_min_ > params.alpha))
            throw ConfigError("grid.omega_min must lie strictly above params.alpha",
                              "grid.omega_min");
    }

private:
    double omega_min_;
    double omega_max_;
    std::size_t m_;
    double h_;
};

/// Occupations n_ω in [0,1] on a grid.
class CarrierDistribution {
public:
    CarrierDistribution() = default;

    explicit CarrierDistribution(std::vector<double> values) : values_(std::move(values)) {
        for (std::size_t i = 0; i < values_.size(); ++i) {
            const double v = values_[i];
            if (!(v >= 0.0 && v <= 1.0))
                throw InvariantError("occupation outside [0,1] at node " + std::to_string(i) +
                                     ": " + std::to_string(v));
        }
    }

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    std::span<const double> values() const noexcept { return values_; }
    const std::vector<double>& vector() const noexcept { return values_; }

    void require_size(std::size_t m) const {
        if (values_.size() != m)
            throw InvariantError("distribution length " + std::to_string(values_.size()) +
                                 " does not match grid size " + std::to_string(m));
    }

    friend bool operator==(const CarrierDistribution&, const CarrierDistribution&) = default;

private:
    std::vector<double> values_;
};

inline double omega_of_k(double k, const MaterialParams& params) {
    if (!(k >= 0.0)) throw DomainError("omega_of_k: k must be >= 0");
    return params.alpha + params.beta * k * k;
}

inline double k_of_omega(double omega, const MaterialParams& params) {
    if (!(omega >= params.alpha)) throw DomainError("k_of_omega: omega below the band edge");
    return std::sqrt((omega - params.alpha) / params.beta);
}

/// J(ω) = 4πk² dk/dω = (2π/β) k(ω); maps n to the spectral density N = J n.
inline double density_jacobian(double omega, const MaterialParams& params) {
    if (!(omega >= params.alpha))
        throw DomainError("density_jacobian: omega below the band edge");
    return 2.0 * std::numbers::pi / params.beta * k_of_omega(omega, params);
}

inline std::vector<double> density_jacobian(const SpectralGrid& grid, const MaterialParams& params) {
    std::vector<double> jac(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) jac[i] = density_jacobian(grid.node(i), params);
    return jac;
}

enum class DensityDirection { occupation_to_density, density_to_occupation };

/// Nodewise N = J n (or the inverse). Input is a plain array since N is not
/// bounded by one.
inline std::vector<double> convert_density(std::span<const double> values, const SpectralGrid& grid,
                                           const MaterialParams& params, DensityDirection direction) {
    if (values.size() != grid.size())
        throw InvariantError("convert_density: length does not match grid");
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double jac = density_jacobian(grid.node(i), params);
        if (direction == DensityDirection::occupation_to_density) {
            out[i] = jac * values[i];
        } else {
            if (!(jac > 0.0))
                throw DomainError("convert_density: degenerate node " + std::to_string(i) +
                                  " with J(omega) = 0");
            out[i] = values[i] / jac;
        }
    }
    return out;
}

struct SpectralTotals {
    double carriers = 0.0;  // ∫ N dω
    double energy = 0.0;    // ∫ ω N dω
};

/// Trapezoidal moments of a spectral density N_ω.
inline SpectralTotals density_totals(std::span<const double> density, const SpectralGrid& grid) {
    if (density.size() != grid.size())
        throw InvariantError("density_totals: length does not match grid");
    SpectralTotals t;
    const auto wt = grid.trapezoid_weights();
    for (std::size_t i = 0; i < density.size(); ++i) {
        t.carriers += wt[i] * density[i];
        t.energy += wt[i] * grid.node(i) * density[i];
    }
    return t;
}

inline SpectralTotals spectral_totals(const CarrierDistribution& dist, const SpectralGrid& grid,
                                      const MaterialParams& params) {
    dist.require_size(grid.size());
    return density_totals(
        convert_density(dist.values(), grid, params, DensityDirection::occupation_to_density), grid);
}

}  // namespace fluxlase
