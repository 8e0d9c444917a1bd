#pragma once

// Shipped parameter sets. The relaxation window works in reduced units; the
// laser window is in meV and fs. Rates and couplings are modelling choices,
// not measured values.

#include <cmath>

#include "fluxlase/core_model.hpp"
#include "fluxlase/equilibria.hpp"

namespace fluxlase::presets {

/// Fermi-Dirac background plus a Gaussian bump, clamped to [0,1]:
///   n = FD(a,b) + A exp(-((ω - c)/w)^2)
struct InitialShape {
    double a = 0.0;
    double b = 0.0;
    double bump_amplitude = 0.0;
    double bump_center = 0.0;
    double bump_width = 1.0;

    CarrierDistribution sample(const SpectralGrid& grid) const {
        std::vector<double> n(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double w = grid.node(i);
            const double x = (w - bump_center) / bump_width;
            n[i] = clamp_occupation(fermi_dirac_occupation(a, b, w) + bump_amplitude * std::exp(-x * x));
        }
        return CarrierDistribution(std::move(n));
    }
};

// Relaxation window [1,2] in reduced units: unit dispersion and I = 1, so
// times are in units where the reference state relaxes in about 0.02.
inline constexpr double kRelaxOmegaMin = 1.0;
inline constexpr double kRelaxOmegaMax = 2.0;
inline constexpr std::size_t kRelaxNodes = 257;

inline MaterialParams relax_params() {
    MaterialParams p;
    p.alpha = 0.0;
    p.beta = 1.0;
    p.s = 7.0;
    p.I = 1.0;
    return p;
}

inline InitialShape relax_initial() { return {3.0, -4.0, 0.2, 1.5, 0.1}; }

// Laser window: pair energies from the lasing line ω_L = 100 meV up to the
// injection edge ω_0 = 200 meV.
inline constexpr double kLaserOmegaL = 100.0;
inline constexpr double kLaserOmega0 = 200.0;
inline constexpr std::size_t kLaserNodes = 65;
inline constexpr double kLaserDt = 0.5;         // fs
inline constexpr double kLaserTEnd = 80000.0;   // fs
inline constexpr double kLaserSeedField = 1e-4;
inline constexpr double kRoomTemperatureMeV = 25.85;

/// calibrate_I(100 fs) on laser_calibration_initial() at kLaserNodes, frozen
/// so runs do not depend on a calibration pass.
inline constexpr double kLaserI = 1.3201420981805028e-13;
/// Dipole weight giving a fully inverted window a small-signal gain of
/// kLaserPeakGain.
inline constexpr double kLaserPeakGain = 5e-3;  // 1/fs
inline constexpr double kLaserMu0 = 5.02167;
inline constexpr double kLaserLambda = 1e-4;    // 1/fs

inline MaterialParams laser_params() {
    MaterialParams p;
    p.alpha = 0.0;
    p.beta = 646.0;
    p.s = 7.0;
    p.I = kLaserI;
    p.mu0 = kLaserMu0;
    p.eps_gap = 1424.0;
    p.Omega = kLaserOmegaL;
    p.gamma_E = 1e-3;
    p.gamma_P = 1e-2;
    p.gamma_k = 1e-5;
    p.Lambda = 0.0;
    p.eps0 = 1.0;
    return p;
}

/// Weakly occupied room-temperature Fermi-Dirac start for the laser runs.
inline InitialShape laser_initial() {
    return {1.0 / kRoomTemperatureMeV, 3.0 - kLaserOmegaL / kRoomTemperatureMeV, 0.0, 150.0, 10.0};
}

/// The relaxation reference state mapped onto the laser window.
inline InitialShape laser_calibration_initial() {
    return {3.0 / kLaserOmegaL, -4.0, 0.2, 1.5 * kLaserOmegaL, 0.1 * kLaserOmegaL};
}

}  // namespace fluxlase::presets
