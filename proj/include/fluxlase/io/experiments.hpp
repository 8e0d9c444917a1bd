#pragma once

// Named experiments: run one config end to end and write its artifacts.
//
//   config.json   effective config (loadable)
//   spectra.csv   t_fs,omega_meV,n,N,K,Q,P   one row per (snapshot, node)
//   series.csv    time series (kinetics totals, laser field, or budget row)
//   meta.json     effective config plus summary scalars
//
// Output is a pure function of the config: no timestamps, no randomness.

#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "fluxlase/collision.hpp"
#include "fluxlase/core_model.hpp"
#include "fluxlase/equilibria.hpp"
#include "fluxlase/io/config.hpp"
#include "fluxlase/io/format.hpp"
#include "fluxlase/kinetics.hpp"
#include "fluxlase/laser.hpp"

namespace fluxlase::io {

inline const std::vector<std::string>& spectra_header() {
    static const std::vector<std::string> h{"t_fs", "omega_meV", "n", "N", "K", "Q", "P"};
    return h;
}

inline const std::vector<std::string>& field_header() {
    static const std::vector<std::string> h{"t_fs", "t_relax_units", "re_e", "im_e", "abs_e_sq", "power"};
    return h;
}

/// One fs-to-relaxation-time conversion for plots: the collision strength is
/// calibrated so that relaxation takes 100 fs.
inline constexpr double kRelaxationTimeFs = 100.0;

/// K as the solver sees it: the state's K inside, the imposed values at the edges.
inline FluxField solver_flux_field(const CarrierDistribution& n, const SpectralGrid& grid,
                                   const MaterialParams& params, const BoundaryFluxes& bc) {
    FluxField f;
    f.K = flux_K(n, grid, params);
    f.K.front() = bc.q_left * grid.omega_min() + bc.p_left;
    f.K.back() = bc.q_right * grid.omega_max() + bc.p_right;
    f.Q = flux_Q(f.K, grid);
    f.P = flux_P(f.K, grid);
    return f;
}

inline void write_spectra_csv(const std::vector<Snapshot>& snapshots, const SpectralGrid& grid,
                              const MaterialParams& params, const BoundaryFluxes& bc,
                              const std::string& path) {
    if (snapshots.empty()) throw InvariantError("write_spectra_csv: no snapshots");
    CsvWriter csv(path, spectra_header());
    const auto jac = density_jacobian(grid, params);
    for (const auto& s : snapshots) {
        s.n.require_size(grid.size());
        const auto f = solver_flux_field(s.n, grid, params, bc);
        for (std::size_t i = 0; i < grid.size(); ++i)
            csv.row({s.t, grid.node(i), s.n[i], jac[i] * s.n[i], f.K[i], f.Q[i], f.P[i]});
    }
    csv.close();
}

inline void write_field_csv(const std::vector<FieldSample>& series, const std::string& path) {
    CsvWriter csv(path, field_header());
    for (const auto& s : series)
        csv.row({s.t, s.t / kRelaxationTimeFs, s.e.real(), s.e.imag(), s.abs_e_sq, s.power});
    csv.close();
}

inline void write_json(const json& j, const std::string& path) {
    auto out = open_output(path);
    out << j.dump(2) << '\n';
    finish_output(out, path);
}

struct ExperimentResult {
    json meta;
    std::string output_dir;
};

namespace detail {

inline json fd_fit_json(const FermiDiracParams& fd) {
    return {{"a", fd.a}, {"b", fd.b}, {"residual", fd.residual}};
}

inline double relative_drift(double now, double start) {
    return start != 0.0 ? std::abs(now - start) / std::abs(start) : std::abs(now);
}

/// Least-squares line through interior K.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

inline LineFit fit_interior_line(std::span<const double> K, const SpectralGrid& grid) {
    const std::size_t m = grid.size();
    double sw = 0.0, sk = 0.0, count = 0.0;
    for (std::size_t i = 1; i + 1 < m; ++i) {
        sw += grid.node(i);
        sk += K[i];
        count += 1.0;
    }
    const double wbar = sw / count, kbar = sk / count;
    double sww = 0.0, swk = 0.0;
    for (std::size_t i = 1; i + 1 < m; ++i) {
        const double dw = grid.node(i) - wbar;
        sww += dw * dw;
        swk += dw * (K[i] - kbar);
    }
    const double slope = swk / sww;
    return {slope, kbar - slope * wbar};
}

/// Earliest sample time after which |e|² stays within `tol` of its final value.
inline double field_settle_time(const std::vector<FieldSample>& series, double tol) {
    if (series.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double last = series.back().abs_e_sq;
    double t = series.back().t;
    for (auto it = series.rbegin(); it != series.rend(); ++it) {
        if (std::abs(it->abs_e_sq - last) > tol * std::abs(last)) break;
        t = it->t;
    }
    return t;
}

inline EvolveOptions evolve_options(const RunBlock& run) {
    EvolveOptions o;
    o.control.dt = run.dt;
    o.control.adaptive = run.adaptive;
    o.control.max_change = run.max_change;
    o.control.dt_max = run.dt_max;
    o.snapshot_every = run.snapshot_every;
    return o;
}

inline json kinetics_summary(const KineticsRun& run, const SpectralGrid& grid, const MaterialParams& params) {
    const auto& first = run.totals_series.front();
    const auto& last = run.totals_series.back();
    const auto fd = fit_fermi_dirac(run.snapshots.back().n, grid);
    (void)params;
    return {{"t_final_fs", run.snapshots.back().t},
            {"steps", run.steps},
            {"rejected_steps", run.rejected},
            {"steady", run.steady},
            {"time_to_steady_fs", run.steady ? json(run.time_to_steady) : json(nullptr)},
            {"carriers_initial", first.carriers},
            {"carriers_final", last.carriers},
            {"energy_initial", first.energy},
            {"energy_final", last.energy},
            {"carriers_relative_drift", relative_drift(last.carriers, first.carriers)},
            {"energy_relative_drift", relative_drift(last.energy, first.energy)},
            {"fd_fit", fd_fit_json(fd)}};
}

inline void write_kinetics_series(const KineticsRun& run, const SpectralGrid& grid, const std::string& path) {
    CsvWriter csv(path, {"t_fs", "carriers", "energy", "fd_residual"});
    for (std::size_t k = 0; k < run.snapshots.size(); ++k) {
        const auto& tot = run.totals_series[k];
        csv.row({tot.t, tot.carriers, tot.energy, fit_fermi_dirac(run.snapshots[k].n, grid).residual});
    }
    csv.close();
}

inline json run_relax(const ExperimentConfig& c, const std::filesystem::path& dir) {
    const auto grid = c.grid.grid();
    const auto n0 = c.initial.sample(grid);
    const auto run = evolve(n0, c.run.t_end, grid, c.params, c.bc, evolve_options(c.run));
    write_spectra_csv(run.snapshots, grid, c.params, c.bc, (dir / "spectra.csv").string());
    write_kinetics_series(run, grid, (dir / "series.csv").string());

    json summary = kinetics_summary(run, grid, c.params);
    const auto f = solver_flux_field(run.snapshots.back().n, grid, c.params, c.bc);
    double kmax = 0.0;
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) kmax = std::max(kmax, std::abs(f.K[i]));
    summary["max_interior_abs_K"] = kmax;
    summary["K_scale"] = CollisionOperator(grid, c.params).term_scale(clamp_occupation(run.snapshots.back().n.values()));
    return summary;
}

inline json run_steady(const ExperimentConfig& c, const std::filesystem::path& dir) {
    const auto grid = c.grid.grid();
    const CollisionOperator op(grid, c.params);
    auto options = evolve_options(c.run);

    // Stage 0: zero-flux relaxation gives the Fermi-Dirac starting state.
    auto stage = evolve(c.initial.sample(grid), c.run.t_end, grid, c.params, BoundaryFluxes::zero(), options);
    std::vector<Snapshot> finals{{0.0, stage.snapshots.back().n}};
    json stages = json::array();
    stages.push_back({{"q", 0.0}, {"p", 0.0}, {"fd_fit", fd_fit_json(fit_fermi_dirac(stage.snapshots.back().n, grid))}});

    CsvWriter series((dir / "series.csv").string(),
                     {"stage", "q", "p", "K_slope", "K_intercept", "max_dev_from_bvp", "time_to_steady_fs"});
    series.row({0.0, 0.0, 0.0, 0.0, 0.0, 0.0, stage.steady ? stage.time_to_steady : std::nan("")});

    CarrierDistribution current = stage.snapshots.back().n;
    int index = 1;
    for (double q : c.steady.q_values) {
        const BoundaryFluxes bc = BoundaryFluxes::uniform(q, c.steady.p);
        stage = evolve(current, c.run.t_end, grid, c.params, bc, options);
        current = stage.snapshots.back().n;
        const auto f = solver_flux_field(current, grid, c.params, bc);
        const auto line = fit_interior_line(f.K, grid);
        const double scale = op.term_scale(clamp_occupation(current.values()));

        // Solved cold, from its own default guess, so the comparison is independent.
        const auto bvp = stationary_state(q, c.steady.p, current[0], current[grid.size() - 1], grid, c.params);
        double dev = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) dev = std::max(dev, std::abs(bvp.n[i] - current[i]));

        finals.push_back({static_cast<double>(index), current});
        series.row({static_cast<double>(index), q, c.steady.p, line.slope, line.intercept, dev,
                    stage.steady ? stage.time_to_steady : std::nan("")});
        stages.push_back({{"q", q},
                          {"p", c.steady.p},
                          {"K_slope", line.slope},
                          {"K_intercept", line.intercept},
                          {"K_scale", scale},
                          {"max_dev_from_bvp", dev},
                          {"bvp_iterations", bvp.iterations},
                          {"steady", stage.steady},
                          {"time_to_steady_fs", stage.steady ? json(stage.time_to_steady) : json(nullptr)}});
        ++index;
    }
    series.close();
    // Spectra rows carry the stage index in t_fs; K, Q, P use each stage's closure.
    {
        CsvWriter csv((dir / "spectra.csv").string(), spectra_header());
        const auto jac = density_jacobian(grid, c.params);
        for (std::size_t k = 0; k < finals.size(); ++k) {
            const BoundaryFluxes bc =
                k == 0 ? BoundaryFluxes::zero() : BoundaryFluxes::uniform(c.steady.q_values[k - 1], c.steady.p);
            const auto f = solver_flux_field(finals[k].n, grid, c.params, bc);
            for (std::size_t i = 0; i < grid.size(); ++i)
                csv.row({finals[k].t, grid.node(i), finals[k].n[i], jac[i] * finals[k].n[i], f.K[i], f.Q[i], f.P[i]});
        }
        csv.close();
    }
    return {{"stages", stages}};
}

inline LasingOptions lasing_options(const ExperimentConfig& c) {
    LasingOptions o;
    o.dt = c.run.dt;
    o.sample_every = c.run.sample_every;
    o.spectra_every = c.run.snapshot_every;
    o.steady_window = c.run.steady_window;
    o.collision_max_change = c.laser.collision_max_change;
    o.e0 = complex(c.laser.e0, 0.0);
    return o;
}

inline json lasing_summary(const LasingRun& run, const SpectralGrid& grid, const MaterialParams& params) {
    const auto tot = spectral_totals(run.final_state.n, grid, params);
    return {{"lased", run.lased},
            {"steady", run.steady},
            {"steady_power", run.steady_power},
            {"final_abs_e_sq", std::norm(run.final_state.e)},
            {"switch_on_time_fs", run.switch_on_time},
            {"time_to_steady_fs", run.steady ? json(field_settle_time(run.series, 0.01)) : json(nullptr)},
            {"final_carriers", tot.carriers},
            {"final_energy", tot.energy},
            {"extraction_mean", run.extraction_mean},
            {"extraction_steady", run.extraction_steady}};
}

inline json run_lase(const ExperimentConfig& c, const std::filesystem::path& dir) {
    const auto grid = c.grid.grid();
    const auto n0 = c.initial.sample(grid);
    const auto options = lasing_options(c);

    json summary;
    PumpSpec pump;
    if (c.experiment == Experiment::lase_broad) {
        pump = PumpSpec::broad(c.pump.lambda);
    } else {
        double q = 0.0;
        if (c.pump.q_inject) {
            q = *c.pump.q_inject;
        } else {
            // Matched injection: the broad run with the same lambda sets q from
            // its state at switch-on.
            const auto ref = run_lasing(PumpSpec::broad(c.pump.lambda), c.run.t_end, grid, c.params, n0, options);
            write_field_csv(ref.series, (dir / "broad_series.csv").string());
            write_spectra_csv(ref.spectra, grid, c.params, BoundaryFluxes::zero(), (dir / "broad_spectra.csv").string());
            q = matched_injection(c.pump.lambda, ref.threshold_state, grid, c.params);
            summary["broad_reference"] = lasing_summary(ref, grid, c.params);
            summary["matched_q_inject"] = q;
        }
        pump = PumpSpec::flux(q, c.pump.omega_L);
        summary["q_inject"] = q;
        summary["p_inject"] = pump.p_inject();
    }
    const auto run = run_lasing(pump, c.run.t_end, grid, c.params, n0, options);
    write_field_csv(run.series, (dir / "series.csv").string());
    write_spectra_csv(run.spectra, grid, c.params, pump.boundary_fluxes(), (dir / "spectra.csv").string());
    summary["run"] = lasing_summary(run, grid, c.params);
    if (summary.contains("broad_reference")) {
        const double pb = summary["broad_reference"]["steady_power"].get<double>();
        summary["power_ratio_flux_over_broad"] = pb > 0.0 ? json(run.steady_power / pb) : json(nullptr);
    }
    return summary;
}

inline json run_budget(const ExperimentConfig& c, const std::filesystem::path& dir) {
    const auto& b = c.budget;
    const auto fb = flux_budget(b.omega_L, b.omega_0, b.omega_R, b.q0);
    CsvWriter csv((dir / "series.csv").string(),
                  {"omega_L", "omega_0", "omega_R", "q0", "q_l", "q_r", "p_l", "p_r"});
    csv.row({fb.omega_L, fb.omega_0, fb.omega_R, fb.q0, fb.q_l, fb.q_r, fb.p_l, fb.p_r});
    csv.close();
    return {{"q_l", fb.q_l},
            {"q_r", fb.q_r},
            {"p_l", fb.p_l},
            {"p_r", fb.p_r},
            {"carrier_balance", fb.q_l - fb.q_r - fb.q0},
            {"energy_balance", fb.p_r - fb.p_l - fb.omega_0 * fb.q0}};
}

inline json run_calibrate(const ExperimentConfig& c, const std::filesystem::path& dir) {
    const auto grid = c.grid.grid();
    CalibrationOptions o;
    o.threshold = c.calibrate.threshold;
    const auto res = calibrate_I(c.calibrate.target_fs, c.initial.sample(grid), grid, c.params, o);
    CsvWriter csv((dir / "series.csv").string(), {"target_fs", "I", "tau_reference", "tau_verified_fs"});
    csv.row({c.calibrate.target_fs, res.I, res.tau_reference, res.tau_verified});
    csv.close();
    return {{"I", res.I},
            {"tau_reference", res.tau_reference},
            {"tau_verified_fs", res.tau_verified},
            {"verification_relative_error", std::abs(res.tau_verified - c.calibrate.target_fs) / c.calibrate.target_fs}};
}

}  // namespace detail

/// Runs the experiment and writes its artifacts into `output_dir` (the config's
/// run.output_dir when empty). The echoed config records the directory used.
inline ExperimentResult run_experiment(ExperimentConfig c, const std::string& output_dir = {}) {
    if (!output_dir.empty()) c.run.output_dir = output_dir;
    c.validate();
    const std::filesystem::path dir(c.run.output_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());

    write_json(to_json(c), (dir / "config.json").string());
    json summary;
    switch (c.experiment) {
        case Experiment::relax: summary = detail::run_relax(c, dir); break;
        case Experiment::steady: summary = detail::run_steady(c, dir); break;
        case Experiment::lase_broad:
        case Experiment::lase_flux: summary = detail::run_lase(c, dir); break;
        case Experiment::budget: summary = detail::run_budget(c, dir); break;
        case Experiment::calibrate: summary = detail::run_calibrate(c, dir); break;
    }
    json meta;
    meta["config"] = to_json(c);
    meta["summary"] = summary;
    write_json(meta, (dir / "meta.json").string());
    return {meta, dir.string()};
}

}  // namespace fluxlase::io
