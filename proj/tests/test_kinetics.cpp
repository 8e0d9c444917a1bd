#include <gtest/gtest.h>

#include "fluxlase/equilibria.hpp"
#include "fluxlase/kinetics.hpp"
#include "fluxlase/presets.hpp"
#include "oracle.hpp"

using namespace fluxlase;

namespace {

MaterialParams reduced() { return presets::relax_params(); }

CarrierDistribution bumped(const SpectralGrid& g) { return presets::relax_initial().sample(g); }

// Smooth perturbation of a Fermi-Dirac state, gentle enough for explicit steps.
CarrierDistribution gentle(const SpectralGrid& g) {
    std::vector<double> n(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double w = g.node(i);
        n[i] = oracle::fd(3.0, -4.0, w) + 0.02 * std::sin(std::numbers::pi * (w - 1.0));
    }
    return CarrierDistribution(n);
}

SpectralTotals totals(const CarrierDistribution& n, const SpectralGrid& g) { return spectral_totals(n, g, reduced()); }

}  // namespace

TEST(Step, FermiDiracIsFixedPoint) {
    SpectralGrid g(1.0, 2.0, 257);
    const auto fd = fermi_dirac(3.0, -4.0, g);
    const auto next = step(fd, 1e-3, g, reduced(), BoundaryFluxes::zero());
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(next[i], fd[i], 1e-10);
}

TEST(Step, ConservesTotalsUnderZeroFlux) {
    SpectralGrid g(1.0, 2.0, 257);
    const auto n0 = gentle(g);
    const auto n1 = step(n0, 1e-4, g, reduced(), BoundaryFluxes::zero());
    const auto t0 = totals(n0, g), t1 = totals(n1, g);
    EXPECT_NEAR(t1.carriers, t0.carriers, 1e-10 * t0.carriers);
    EXPECT_NEAR(t1.energy, t0.energy, 1e-10 * t0.energy);
}

TEST(Step, CarrierChangeEqualsBoundaryFlux) {
    SpectralGrid g(1.0, 2.0, 129);
    const BoundaryFluxes bc{0.1, 0.0, 0.3, 0.0};
    const auto n0 = gentle(g);
    const double dt = 1e-5;
    const auto n1 = step(n0, dt, g, reduced(), bc);
    EXPECT_NEAR((totals(n1, g).carriers - totals(n0, g).carriers) / dt, 0.2, 1e-6);
}

TEST(Step, ImplicitMatchesExplicitToSecondOrder) {
    SpectralGrid g(1.0, 2.0, 33);
    const auto n0 = gentle(g);
    const CollisionOperator op(g, reduced());
    const double dt0 = 0.02 * explicit_stable_dt(op, n0.values());
    auto gap = [&](double dt) {
        const auto a = step(n0, dt, g, reduced(), BoundaryFluxes::zero());
        const auto b = step_explicit(n0, dt, g, reduced(), BoundaryFluxes::zero());
        return oracle::max_abs_diff(a.vector(), b.vector());
    };
    const double ratio = gap(dt0) / gap(0.5 * dt0);
    EXPECT_GT(ratio, 3.5);
    EXPECT_LT(ratio, 4.5);
}

TEST(Step, RejectsBadInput) {
    SpectralGrid g(1.0, 2.0, 16);
    const CarrierDistribution n(std::vector<double>(16, 0.5));
    EXPECT_THROW(step(n, 0.0, g, reduced(), BoundaryFluxes::zero()), DomainError);
    EXPECT_THROW(step(CarrierDistribution(std::vector<double>(15, 0.5)), 1.0, g, reduced(), BoundaryFluxes::zero()),
                 InvariantError);
}

TEST(Evolve, RelaxationToFermiDirac) {
    SpectralGrid g(1.0, 2.0, 257);
    EvolveOptions o;
    o.snapshot_every = 0.02;
    const auto run = evolve(bumped(g), 1.0, g, reduced(), BoundaryFluxes::zero(), o);
    const auto& first = run.totals_series.front();
    const auto& last = run.totals_series.back();
    EXPECT_LT(std::abs(last.carriers - first.carriers) / first.carriers, 1e-6);
    EXPECT_LT(std::abs(last.energy - first.energy) / first.energy, 1e-6);
    EXPECT_LT(fit_fermi_dirac(run.snapshots.back().n, g).residual, 1e-4);

    double prev_t = -1.0;
    for (const auto& s : run.snapshots) {
        EXPECT_GT(s.t, prev_t);
        prev_t = s.t;
        for (double v : s.n.values()) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
    // Monotone after the first few snapshots, up to round-off at the floor.
    for (std::size_t k = 3; k < run.snapshots.size(); ++k) {
        const double r0 = fit_fermi_dirac(run.snapshots[k - 1].n, g).residual;
        const double r1 = fit_fermi_dirac(run.snapshots[k].n, g).residual;
        EXPECT_LE(r1, r0 * (1 + 1e-6) + 1e-12) << k;
    }
}

TEST(Evolve, FiniteFluxSteadyStateMatchesBoundaryValueSolve) {
    SpectralGrid g(1.0, 2.0, 129);
    const double q0 = 1.0;
    EvolveOptions o;
    o.snapshot_every = 0.1;
    const auto relaxed = evolve(bumped(g), 2.0, g, reduced(), BoundaryFluxes::zero(), o).snapshots.back().n;
    const auto run = evolve(relaxed, 5.0, g, reduced(), BoundaryFluxes::uniform(q0, 0.0), o);
    const auto& n = run.snapshots.back().n;
    const auto st = stationary_state(q0, 0.0, n[0], n[128], g, reduced());
    EXPECT_LT(oracle::max_abs_diff(n.vector(), st.n.vector()), 1e-3);
    EXPECT_TRUE(run.steady);
}

TEST(Evolve, StationaryStartStaysPut) {
    SpectralGrid g(1.0, 2.0, 129);
    const auto fd = fermi_dirac(3.0, -4.0, g);
    const auto st = stationary_state(0.5, 0.0, fd[0], fd[128], g, reduced());
    const auto run = evolve(st.n, 1.0, g, reduced(), BoundaryFluxes::uniform(0.5, 0.0));
    EXPECT_LT(oracle::max_abs_diff(run.snapshots.back().n.vector(), st.n.vector()), 1e-8);
}

TEST(Evolve, CarrierRateTracksBoundaryImbalance) {
    SpectralGrid g(1.0, 2.0, 129);
    const BoundaryFluxes bc{0.1, 0.0, 0.3, 0.0};
    EvolveOptions o;
    o.snapshot_every = 0.01;
    const auto run = evolve(gentle(g), 0.1, g, reduced(), bc, o);
    const auto& s = run.totals_series;
    const auto& a = s[s.size() / 2];
    const auto& b = s.back();
    EXPECT_NEAR((b.carriers - a.carriers) / (b.t - a.t), 0.2, 0.02 * 0.2);
}

TEST(Evolve, ImplicitAndExplicitTrajectoriesAgree) {
    SpectralGrid g(1.0, 2.0, 33);
    const auto n0 = gentle(g);
    const CollisionOperator op(g, reduced());
    const double dt = 0.5 * explicit_stable_dt(op, n0.values());
    EvolveOptions imp;
    imp.control.adaptive = false;
    imp.control.dt = dt;
    EvolveOptions exp = imp;
    exp.scheme = TimeScheme::explicit_rk4;
    const double t = 50 * dt;
    auto gap = [&](double step_dt) {
        imp.control.dt = exp.control.dt = step_dt;
        const auto a = evolve(n0, t, g, reduced(), BoundaryFluxes::zero(), imp);
        const auto b = evolve(n0, t, g, reduced(), BoundaryFluxes::zero(), exp);
        return oracle::max_abs_diff(a.snapshots.back().n.vector(), b.snapshots.back().n.vector());
    };
    const double coarse = gap(dt), fine = gap(0.5 * dt);
    EXPECT_LT(coarse, 1e-3);
    EXPECT_GT(coarse / fine, 1.7);
    EXPECT_LT(coarse / fine, 2.3);
}

TEST(Evolve, RejectsBadHorizon) {
    SpectralGrid g(1.0, 2.0, 16);
    EXPECT_THROW(evolve(CarrierDistribution(std::vector<double>(16, 0.5)), 0.0, g, reduced(), BoundaryFluxes::zero()),
                 DomainError);
}

TEST(TimeRescale, IdentityFactor) {
    SpectralGrid g(1.0, 2.0, 65);
    EXPECT_EQ(time_rescale_check(gentle(g), 1.0, 0.01, g, reduced(), BoundaryFluxes::zero(), 1e-3), 0.0);
}

TEST(TimeRescale, ExactSymmetry) {
    SpectralGrid g(1.0, 2.0, 65);
    EXPECT_LT(time_rescale_check(gentle(g), 2.0, 0.01, g, reduced(), BoundaryFluxes::zero(), 1e-3), 1e-10);
    EXPECT_LT(time_rescale_check(gentle(g), 10.0, 0.01, g, reduced(), BoundaryFluxes::zero(), 1e-3), 1e-9);
}

TEST(Calibration, RescalingArithmeticAndVerification) {
    SpectralGrid g(1.0, 2.0, 129);
    const auto res = calibrate_I(100.0, bumped(g), g, reduced());
    EXPECT_EQ(res.I, res.tau_reference / 100.0);
    EXPECT_NEAR(res.tau_verified, 100.0, 5.0);
    const auto twice = calibrate_I(200.0, bumped(g), g, reduced());
    EXPECT_DOUBLE_EQ(twice.I, 0.5 * res.I);
}

TEST(Calibration, RejectsRelaxedReference) {
    SpectralGrid g(1.0, 2.0, 33);
    EXPECT_THROW(calibrate_I(100.0, fermi_dirac(3.0, -4.0, g), g, reduced()), CalibrationError);
    EXPECT_THROW(calibrate_I(0.0, bumped(g), g, reduced()), DomainError);
}

TEST(LimitedAdvance, AppliedFluxesAreConserved) {
    SpectralGrid g(1.0, 2.0, 65);
    const CollisionOperator op(g, reduced());
    const double q = 2.0;
    const BoundaryFluxes bc{0.0, 0.0, q, -1.0 * q};
    const auto n0 = gentle(g).vector();
    const double dt = 1e-3;
    const auto adv = advance_collision_limited(op, n0, dt, bc);
    const auto t0 = totals(CarrierDistribution(n0), g), t1 = totals(CarrierDistribution(adv.n), g);
    const double x = adv.extraction;
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
    EXPECT_NEAR(t1.carriers - t0.carriers, q * dt, 1e-9 * t0.carriers);
    EXPECT_NEAR(t1.energy - t0.energy, q * dt * (x * 1.0 + (1.0 - x) * 2.0), 1e-9 * t0.energy);
}

TEST(LimitedAdvance, FullExtractionWhenHarmless) {
    SpectralGrid g(1.0, 2.0, 65);
    const CollisionOperator op(g, reduced());
    const BoundaryFluxes bc{0.0, 0.0, 1e-3, -1e-3};
    const auto adv = advance_collision_limited(op, gentle(g).vector(), 1e-4, bc);
    EXPECT_EQ(adv.extraction, 1.0);
    const auto plain = advance_collision(op, gentle(g).vector(), 1e-4, bc);
    EXPECT_LT(oracle::max_abs_diff(adv.n, plain), 1e-12);
}
