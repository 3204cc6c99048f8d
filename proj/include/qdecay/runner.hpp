#pragma once

// Experiment runner: materializes a resolved config, propagates, fits and
// writes report.txt plus one CSV per trajectory or overlay.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qdecay/analytics.hpp"
#include "qdecay/bath.hpp"
#include "qdecay/config.hpp"
#include "qdecay/dynamics.hpp"
#include "qdecay/hybrid.hpp"
#include "qdecay/parallel.hpp"

namespace qdecay {

struct RunOptions {
    std::size_t threads = 1;
};

struct Verdict {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct RunReport {
    std::string parameters;                                 // describe(config)
    std::vector<std::pair<std::string, double>> derived;   // Gamma0, Lambda0, nu0, t0, ...
    std::vector<std::string> results;                      // fits and diagnostics, one line each
    std::vector<Verdict> verdicts;
    double max_norm_drift = 0.0;
    double norm_tolerance = 1e-6;
    double wall_seconds = 0.0;
    std::vector<std::string> files;

    bool norm_ok() const { return max_norm_drift <= norm_tolerance; }
    bool ok() const { return norm_ok(); }
};

inline std::string to_text(const RunReport& r) {
    std::ostringstream os;
    os << "# parameters\n" << r.parameters << "\n# derived\n";
    for (const auto& [k, v] : r.derived) os << k << " = " << format_double(v) << "\n";
    os << "\n# results\n";
    for (const auto& line : r.results) os << line << "\n";
    if (!r.verdicts.empty()) {
        os << "\n# verdicts\n";
        for (const auto& v : r.verdicts) os << (v.passed ? "PASS " : "FAIL ") << v.name << ": " << v.detail << "\n";
    }
    os << "\n# diagnostics\n"
       << "max_norm_drift = " << format_double(r.max_norm_drift) << "\n"
       << "norm_tolerance = " << format_double(r.norm_tolerance) << "\n"
       << "norm_check = " << (r.norm_ok() ? "pass" : "fail") << "\n"
       << "wall_seconds = " << format_double(r.wall_seconds) << "\n";
    return os.str();
}

namespace detail {

inline std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fixed(double v, int digits = 6) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

// CSV files written by one run; removed again if the run aborts.
class OutputSet {
public:
    explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}
    OutputSet(const OutputSet&) = delete;
    OutputSet& operator=(const OutputSet&) = delete;
    ~OutputSet() {
        if (committed_) return;
        std::error_code ec;
        for (const auto& p : written_) std::filesystem::remove(p, ec);
    }

    std::ofstream open(const std::string& name) {
        std::filesystem::create_directories(dir_);
        const auto path = dir_ / name;
        std::ofstream os(path);
        if (!os) throw Error("cannot open output file " + path.string());
        written_.push_back(path);
        return os;
    }
    void commit() { committed_ = true; }
    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& p : written_) out.push_back(p.filename().string());
        return out;
    }

private:
    std::filesystem::path dir_;
    std::vector<std::filesystem::path> written_;
    bool committed_ = false;
};

// Element-wise running mean of ensemble trajectories.
inline void accumulate(Trajectory& sum, const Trajectory& t, std::size_t count) {
    if (count == 0) {
        sum = t;
        return;
    }
    auto add = [](std::vector<double>& a, const std::vector<double>& b) {
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    };
    add(sum.p_qubit, t.p_qubit);
    add(sum.norm, t.norm);
    add(sum.interaction_energy, t.interaction_energy);
    for (std::size_t k = 0; k < sum.bath_energy.size(); ++k) add(sum.bath_energy[k], t.bath_energy[k]);
}

inline void scale(Trajectory& t, double f) {
    auto mul = [f](std::vector<double>& a) {
        for (double& x : a) x *= f;
    };
    mul(t.p_qubit);
    mul(t.norm);
    mul(t.interaction_energy);
    for (auto& e : t.bath_energy) mul(e);
}

inline double max_drift(const std::vector<double>& norm) {
    double d = 0.0;
    for (double n : norm) d = std::max(d, std::abs(n - 1.0));
    return d;
}

struct QubitRun {
    Trajectory mean;
    BathRealization first;  // ensemble member 0
    double dt = 0.0;
    double max_drift = 0.0;
};

inline QubitRun run_qubit_ensemble(const ExperimentConfig& c, const BathSpec& spec, WorkerPool& pool) {
    QubitRun out;
    EvolveOptions options;
    options.norm_tolerance = c.norm_tolerance;
    options.renormalize_every = c.renormalize_every;
    options.pool = &pool;
    for (std::size_t m = 0; m < c.ensemble; ++m) {
        BathRealization real = ensemble_member(spec, m);
        TimeGrid grid = c.grid;
        if (grid.dt == 0.0) grid.dt = default_time_step(qubit_bath_matrix(real), c.step_fraction);
        options.checkpoint_times = m == 0 ? c.emit_checkpoints : std::vector<double>{};
        auto traj = evolve(real, grid, AmplitudeState::excited_qubit(real.size()), options);
        out.max_drift = std::max(out.max_drift, max_drift(traj.norm));
        out.dt = grid.dt;
        accumulate(out.mean, traj, m);
        if (m == 0) {
            out.mean.checkpoints = std::move(traj.checkpoints);
            out.first = std::move(real);
        }
    }
    scale(out.mean, 1.0 / static_cast<double>(c.ensemble));
    return out;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& t) {
    os << "t,p_qubit,norm";
    for (std::size_t k = 0; k < t.bath_energy.size(); ++k) os << ",E_bath_" << (k + 1);
    os << "\n";
    for (std::size_t i = 0; i < t.samples(); ++i) {
        os << g17(t.times[i]) << "," << g17(t.p_qubit[i]) << "," << g17(t.norm[i]);
        for (const auto& e : t.bath_energy) os << "," << g17(e[i]);
        os << "\n";
    }
}

inline void write_checkpoints(OutputSet& out, const Trajectory& t, const std::string& stem) {
    for (std::size_t k = 0; k < t.checkpoints.size(); ++k) {
        auto os = out.open(stem + "_checkpoint_" + std::to_string(k) + ".csv");
        const auto& cp = t.checkpoints[k];
        os << "# t = " << g17(cp.t) << "\nindex,re,im\n";
        const auto flat = cp.state.flat();
        for (std::size_t i = 0; i < flat.size(); ++i)
            os << i << "," << g17(flat[i].real()) << "," << g17(flat[i].imag()) << "\n";
    }
}

struct Column {
    std::string name;
    std::vector<double> values;
};

inline void write_overlay_csv(std::ostream& os, const std::vector<double>& times, const std::vector<Column>& cols) {
    os << "t";
    for (const auto& c : cols) os << ",law_" << c.name;
    os << "\n";
    for (std::size_t i = 0; i < times.size(); ++i) {
        os << g17(times[i]);
        for (const auto& c : cols) os << "," << (std::isnan(c.values[i]) ? std::string("nan") : g17(c.values[i]));
        os << "\n";
    }
}

inline double law_or_nan(LawValue v) { return v.valid ? v.value : NAN; }

inline bool has_band(const BathSpec& s) { return s.frequency_dist != FrequencyDist::degenerate && s.width > 0.0; }

// Derived quantities of a qubit-bath realization.
inline void add_derived(RunReport& rep, const BathRealization& real) {
    const double lambda0 = lambda0_of(real);
    rep.derived.emplace_back("Lambda0", lambda0);
    if (has_band(real.spec) && real.size() > 0) {
        const double g0 = gamma0_of(real);
        rep.derived.emplace_back("Gamma0", g0);
        rep.derived.emplace_back("nu0", real.spec.mode_density());
        if (g0 > 0.0 && real.spec.width > g0) rep.derived.emplace_back("t0", crossover_time(g0, real.spec.width));
        for (std::size_t k = 0; k < real.bath_count(); ++k)
            rep.derived.emplace_back("Gamma0_bath_" + std::to_string(k + 1), gamma0_of_bath(real, k));
    }
}

inline std::vector<double> sqrt_of(const std::vector<double>& v) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::sqrt(std::max(0.0, v[i]));
    return out;
}

/// Envelope of |C0| as (time, local maximum) pairs in blocks of `block`.
inline std::pair<std::vector<double>, std::vector<double>> amplitude_envelope(const Trajectory& t, double lo, double hi,
                                                                              double block) {
    const auto amp = sqrt_of(t.p_qubit);
    const auto env = envelope_maxima(t.times, amp, lo, hi, block);
    std::pair<std::vector<double>, std::vector<double>> out;
    for (const auto& [tt, a] : env) {
        out.first.push_back(tt);
        out.second.push_back(a);
    }
    return out;
}

}  // namespace detail

/// Crossover of the numerical amplitude envelope: the time at which the
/// exponential e^{-Gamma0 t / 2} meets the power law A t^s fitted to the
/// envelope over the tail window.
struct TailAnalysis {
    double slope = NAN;
    double prefactor = NAN;  // A
    double crossover = NAN;
};

inline TailAnalysis analyze_tail(const Trajectory& traj, double gamma0, FitWindow tail, double block = 10.0) {
    TailAnalysis out;
    const auto [et, ea] = detail::amplitude_envelope(traj, tail.lo, tail.hi, block);
    if (et.size() < 10) return out;
    out.slope = loglog_slope(et, ea, tail);
    // intercept from the mean of ln a - s ln t over the window
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < et.size(); ++i) {
        if (et[i] < tail.lo || et[i] > tail.hi) continue;
        acc += std::log(ea[i]) - out.slope * std::log(et[i]);
        ++n;
    }
    out.prefactor = std::exp(acc / static_cast<double>(n));
    // root of -Gamma0 t / 2 = ln A + s ln t by bisection
    auto f = [&](double t) { return -0.5 * gamma0 * t - std::log(out.prefactor) - out.slope * std::log(t); };
    double lo = 1.0, hi = tail.hi;
    if (f(lo) < 0.0 || f(hi) > 0.0) return out;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) > 0.0 ? lo : hi) = mid;
    }
    out.crossover = 0.5 * (lo + hi);
    return out;
}

/// Zeno check: max relative error of 1 - p versus Lambda0^2 t^2 for 0 < t <= t_max.
inline double zeno_max_relative_error(const Trajectory& traj, double lambda0, double t_max = 0.3) {
    double worst = 0.0;
    for (std::size_t i = 0; i < traj.samples(); ++i) {
        const double t = traj.times[i];
        if (t <= 0.0 || t > t_max) continue;
        const double expected = lambda0 * lambda0 * t * t;
        worst = std::max(worst, std::abs((1.0 - traj.p_qubit[i]) - expected) / expected);
    }
    return worst;
}

struct EnergyBalance {
    double max_error = 0.0;            // max |E0 + sum E_k - 1|
    double max_error_with_v = 0.0;     // including the interaction energy
    std::vector<double> late_fractions;  // E_k / sum E at the last sample
};

inline EnergyBalance energy_balance(const Trajectory& traj) {
    EnergyBalance b;
    for (std::size_t i = 0; i < traj.samples(); ++i) {
        double e = kQubitFrequency * traj.p_qubit[i];
        for (const auto& ek : traj.bath_energy) e += ek[i];
        b.max_error = std::max(b.max_error, std::abs(e - 1.0));
        b.max_error_with_v = std::max(b.max_error_with_v, std::abs(e + traj.interaction_energy[i] - 1.0));
    }
    if (traj.samples() > 0) {
        double total = 0.0;
        for (const auto& ek : traj.bath_energy) total += ek.back();
        for (const auto& ek : traj.bath_energy) b.late_fractions.push_back(total > 0.0 ? ek.back() / total : NAN);
    }
    return b;
}

struct KappaSweepPoint {
    double kappa_mean = 0.0;
    RateFit fit;
    double moment4_empirical = 0.0;
};

struct KappaSweepSummary {
    bool monotone = true;
    double coefficient = NAN;  // fitted c in Gamma(0) - Gamma = c <kappa>^2
    double coefficient_independent_means = NAN;
    double coefficient_empirical = NAN;
    std::size_t points_used = 0;
};

/// Quadratic coefficient from the points with pi nu0 <kappa> <= small_limit, fitted
/// through the origin, and the two convention predictions.
inline KappaSweepSummary summarize_kappa_sweep(const std::vector<KappaSweepPoint>& pts, double nu0, double mean_gamma,
                                               double small_limit = 0.5) {
    KappaSweepSummary s;
    if (pts.empty()) return s;
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (pts[i].fit.rate > pts[i - 1].fit.rate) s.monotone = false;
    const double base = pts.front().kappa_mean == 0.0 ? pts.front().fit.rate : NAN;
    double num = 0.0, den = 0.0, emp_num = 0.0;
    for (const auto& p : pts) {
        if (p.kappa_mean == 0.0 || std::numbers::pi * nu0 * p.kappa_mean > small_limit) continue;
        const double k2 = p.kappa_mean * p.kappa_mean;
        num += (base - p.fit.rate) * k2;
        den += k2 * k2;
        emp_num += 2.0 * std::pow(std::numbers::pi, 3) * nu0 * nu0 * nu0 * p.moment4_empirical * k2;
        ++s.points_used;
    }
    if (den > 0.0) {
        s.coefficient = num / den;
        s.coefficient_empirical = emp_num / den;
    }
    s.coefficient_independent_means = internal_coupling_coefficient(nu0, mean_gamma);
    return s;
}

/// Bath spec of one sweep point: uniform draws on [0, 2 <kappa>] or fixed <kappa>.
inline BathSpec sweep_spec(const BathSpec& base, double kappa_mean) {
    BathSpec s = base;
    if (kappa_mean == 0.0) {
        s.internal_coupling_dist = InternalCouplingDist::none;
        s.kappa_max = 0.0;
        return s;
    }
    if (s.internal_coupling_dist == InternalCouplingDist::none) s.internal_coupling_dist = InternalCouplingDist::uniform;
    s.kappa_max = s.internal_coupling_dist == InternalCouplingDist::uniform ? 2.0 * kappa_mean : kappa_mean;
    return s;
}

inline constexpr double kQuotedKappaCoefficient = 1.25e5;

namespace detail {

inline void run_sweep(const ExperimentConfig& c, WorkerPool& pool, OutputSet& out, RunReport& rep) {
    std::vector<KappaSweepPoint> pts;
    double nu0 = c.bath.mode_density();
    double mean_gamma = 0.0;
    rep.results.push_back("kappa_sweep: <kappa>, fitted Gamma, Gamma0 - Gamma, dt, max drift");
    for (std::size_t i = 0; i < c.kappa_sweep.size(); ++i) {
        const double k = c.kappa_sweep[i];
        auto run = run_qubit_ensemble(c, sweep_spec(c.bath, k), pool);
        rep.max_norm_drift = std::max(rep.max_norm_drift, run.max_drift);
        if (i == 0) {
            add_derived(rep, run.first);
            mean_gamma = distribution_mean(c.bath.gamma_max, c.bath.qubit_coupling_dist == CouplingDist::uniform);
        }
        KappaSweepPoint p;
        p.kappa_mean = k;
        p.fit = fit_decay_rate(run.mean, c.fit);
        p.moment4_empirical = empirical_moment4(run.first).value;
        pts.push_back(p);
        auto os = out.open("trajectory_kappa_" + std::to_string(i) + ".csv");
        write_trajectory_csv(os, run.mean);
        write_checkpoints(out, run.mean, "kappa_" + std::to_string(i));
        rep.results.push_back("  " + fixed(k) + ", " + fixed(p.fit.rate) + ", " + fixed(pts.front().fit.rate - p.fit.rate) +
                              ", " + fixed(run.dt) + ", " + fixed(run.max_drift, 3));
        if (c.emit_overlays) {
            std::vector<Column> cols(2);
            cols[0].name = "exponential";
            cols[1].name = "internal_coupling";
            const double g0 = gamma0_of(run.first);
            const auto gk = internal_coupling_rate(g0, nu0, Moment4{p.moment4_empirical, MomentConvention::empirical});
            for (double t : run.mean.times) {
                cols[0].values.push_back(std::exp(-g0 * t));
                cols[1].values.push_back(gk.valid ? std::exp(-gk.value * t) : NAN);
            }
            auto ov = out.open("overlay_kappa_" + std::to_string(i) + ".csv");
            write_overlay_csv(ov, run.mean.times, cols);
        }
    }
    const auto s = summarize_kappa_sweep(pts, nu0, mean_gamma);
    rep.results.push_back("kappa_coefficient_fit = " + fixed(s.coefficient) + " (points with pi nu0 <kappa> <= 0.5: " +
                          std::to_string(s.points_used) + ")");
    rep.results.push_back("kappa_coefficient_independent_means = " + fixed(s.coefficient_independent_means));
    rep.results.push_back("kappa_coefficient_empirical_moment = " + fixed(s.coefficient_empirical));
    rep.results.push_back("kappa_coefficient_quoted = " + fixed(kQuotedKappaCoefficient));
    rep.verdicts.push_back({"rate non-increasing in <kappa>", s.monotone, s.monotone ? "monotone" : "not monotone"});
    const bool emp = std::abs(s.coefficient / s.coefficient_empirical - 1.0) <= 0.25;
    const double ratio = s.coefficient / kQuotedKappaCoefficient;
    const bool quoted = ratio >= 0.5 && ratio <= 2.0;
    rep.verdicts.push_back({"coefficient vs empirical moment (25%)", emp,
                            fixed(s.coefficient) + " vs " + fixed(s.coefficient_empirical)});
    rep.verdicts.push_back({"coefficient vs quoted 1.25e5 (factor 2)", quoted, "ratio " + fixed(ratio)});
}

inline void run_qubit(const ExperimentConfig& c, WorkerPool& pool, OutputSet& out, RunReport& rep) {
    auto run = run_qubit_ensemble(c, c.bath, pool);
    rep.max_norm_drift = run.max_drift;
    const auto& real = run.first;
    const auto& traj = run.mean;
    add_derived(rep, real);
    rep.results.push_back("dt = " + fixed(run.dt));
    {
        auto os = out.open("trajectory.csv");
        write_trajectory_csv(os, traj);
    }
    write_checkpoints(out, traj, "trajectory");

    const double lambda0 = lambda0_of(real);
    const bool band = has_band(real.spec) && real.size() > 0;
    const double g0 = band ? gamma0_of(real) : NAN;

    std::optional<Expectation> expectation;
    if (c.revival) expectation = revival_preset(*c.revival, c.revival_parameter).expectation;
    const bool fit_rate = c.fit.hi > c.fit.lo && band &&
                          (!expectation || *expectation == Expectation::decays);
    if (fit_rate) {
        const auto f = fit_decay_rate(traj, c.fit);
        rep.results.push_back("fit_window = [" + fixed(c.fit.lo) + ", " + fixed(c.fit.hi) + "]");
        rep.results.push_back("fitted_rate = " + fixed(f.rate) + " (Gamma0 = " + fixed(g0) + ", rel. dev. " +
                              fixed(f.rate / g0 - 1.0, 3) + ")");
    } else if (expectation) {
        rep.results.push_back("fitted_rate = none (expectation " + std::string(to_string(*expectation)) + ")");
    }
    if (expectation) {
        const auto chk = check_expectation(traj, real, *expectation);
        rep.verdicts.push_back({std::string("expectation ") + to_string(*expectation), chk.satisfied, chk.detail});
    }
    if (lambda0 > 0.0 && !traj.times.empty() && traj.times.size() > 1 && traj.times[1] <= 0.3)
        rep.results.push_back("zeno_max_rel_error(t<=0.3) = " + fixed(zeno_max_relative_error(traj, lambda0), 3));
    if (real.bath_count() > 1) {
        const auto eb = energy_balance(traj);
        std::string fr;
        for (double f : eb.late_fractions) fr += (fr.empty() ? "" : ", ") + fixed(f, 4);
        rep.results.push_back("late_energy_fractions = " + fr);
        rep.results.push_back("max |E0 + sum E_k - 1| = " + fixed(eb.max_error, 3));
        rep.results.push_back("max |E0 + sum E_k + <V> - 1| = " + fixed(eb.max_error_with_v, 3));
    }
    if (band && c.grid.t_end >= 3000.0 && !real.spec.has_internal_couplings() && g0 > 0.0) {
        const auto tail = analyze_tail(traj, g0, {300.0, 3000.0});
        rep.results.push_back("tail_amplitude_slope[300,3000] = " + fixed(tail.slope, 4));
        rep.results.push_back("envelope_crossover = " + fixed(tail.crossover, 4) +
                              " (t0 = " + fixed(crossover_time(g0, real.spec.width), 4) + ")");
    }
    if (c.emit_overlays) {
        std::vector<Column> cols;
        if (band) {
            cols.push_back({"exponential", {}});
            cols.push_back({"linear", {}});
            cols.push_back({"longtime", {}});
        }
        cols.push_back({"zeno", {}});
        if (real.spec.frequency_dist == FrequencyDist::degenerate) cols.push_back({"collective_mode", {}});
        for (double t : traj.times) {
            std::size_t k = 0;
            if (band) {
                cols[k++].values.push_back(std::exp(-g0 * t));
                cols[k++].values.push_back(law_or_nan(linear_population(g0, t, real.spec.width)));
                const auto lt = longtime_amplitude(g0, real.spec.width, t);
                cols[k++].values.push_back(lt.valid ? lt.value * lt.value : NAN);
            }
            cols[k++].values.push_back(law_or_nan(zeno_population(lambda0, t)));
            if (real.spec.frequency_dist == FrequencyDist::degenerate)
                cols[k++].values.push_back(degenerate_population(lambda0, real.spec.omega_fix - kQubitFrequency, t));
        }
        auto os = out.open("overlay.csv");
        write_overlay_csv(os, traj.times, cols);
    }
}

inline void run_hybrid(const ExperimentConfig& c, WorkerPool& pool, OutputSet& out, RunReport& rep) {
    HybridSpec spec{c.r, c.g_bar, c.bath};
    const double g0 = c.gamma0_target;
    const auto eig = hybrid_eigensystem(c.g_bar, spec.detuning());
    EvolveOptions options;
    options.norm_tolerance = c.norm_tolerance;
    options.renormalize_every = c.renormalize_every;
    options.pool = &pool;

    HybridTrajectory mean;
    double realized_g0 = 0.0;
    for (std::size_t m = 0; m < c.ensemble; ++m) {
        const auto real = ensemble_member(spec.bath, m);
        if (m == 0) {
            realized_g0 = real.size() > 0 && has_band(real.spec) ? gamma0_of(real) : 0.0;
            rep.derived.emplace_back("Gamma0", realized_g0);
            rep.derived.emplace_back("Lambda0", lambda0_of(real));
            if (real.size() > 0 && has_band(real.spec)) rep.derived.emplace_back("nu0", real.spec.mode_density());
        }
        TimeGrid grid = c.grid;
        if (grid.dt == 0.0) grid.dt = default_time_step(hybrid_matrix(spec, real), c.step_fraction);
        auto traj = evolve_hybrid(spec, real, grid, options);
        rep.max_norm_drift = std::max(rep.max_norm_drift, max_drift(traj.norm));
        if (m == 0) {
            mean = std::move(traj);
            continue;
        }
        for (std::size_t i = 0; i < mean.samples(); ++i) {
            mean.p_qubit[i] += traj.p_qubit[i];
            mean.p_cavity[i] += traj.p_cavity[i];
            mean.rho11_tilde[i] += traj.rho11_tilde[i];
            mean.rho22_tilde[i] += traj.rho22_tilde[i];
            mean.norm[i] += traj.norm[i];
        }
    }
    if (c.ensemble > 1) {
        const double f = 1.0 / static_cast<double>(c.ensemble);
        for (std::size_t i = 0; i < mean.samples(); ++i) {
            mean.p_qubit[i] *= f;
            mean.p_cavity[i] *= f;
            mean.rho11_tilde[i] *= f;
            mean.rho22_tilde[i] *= f;
            mean.norm[i] *= f;
        }
    }
    const double rate_ref = std::isnan(g0) ? realized_g0 : g0;
    rep.derived.emplace_back("theta", eig.theta);
    rep.derived.emplace_back("eps1", eig.eps1);
    rep.derived.emplace_back("eps2", eig.eps2);
    rep.derived.emplace_back("alpha2", eig.alpha * eig.alpha);
    rep.derived.emplace_back("beta2", eig.beta * eig.beta);
    const auto rates = global_rates(eig, rate_ref);
    rep.derived.emplace_back("Gamma_1to0", rates.from1);
    rep.derived.emplace_back("Gamma_2to0", rates.from2);
    if (spec.detuning() != 0.0) {
        const auto lr = local_rate(c.g_bar, spec.detuning(), rate_ref);
        rep.derived.emplace_back("Gamma_L", lr.value);
        rep.results.push_back(std::string("local_rate_valid(|D| >= 5 Gamma0) = ") + (lr.valid ? "true" : "false"));
    }
    if (c.g_bar > 0.0) {
        const double expected = ground_rate_initial(c.g_bar, spec.detuning(), rate_ref);
        rep.derived.emplace_back("ground_rate_initial", expected);
        if (rate_ref > 0.0) {
            // strobed at one and two Rabi periods, same ensemble
            const auto est = estimate_initial_ground_rate(spec, c.ensemble, &pool);
            rep.results.push_back("ground_rate_estimate = " + fixed(est.rate) + " (prediction " + fixed(expected) +
                                  ", rel. dev. " + fixed(est.rate / expected - 1.0, 3) + ")");
        }
    }

    {
        auto os = out.open("hybrid.csv");
        os << "t,p_qubit,p_cavity,rho11_tilde,rho22_tilde,rho11_master,rho22_master,norm\n";
        for (std::size_t i = 0; i < mean.samples(); ++i) {
            const auto gp = global_populations(eig, rate_ref, mean.times[i]);
            os << g17(mean.times[i]) << "," << g17(mean.p_qubit[i]) << "," << g17(mean.p_cavity[i]) << ","
               << g17(mean.rho11_tilde[i]) << "," << g17(mean.rho22_tilde[i]) << "," << g17(gp.rho11) << ","
               << g17(gp.rho22) << "," << g17(mean.norm[i]) << "\n";
        }
    }

    if (rate_ref == 0.0) {
        double dev_p = 0.0, dev_r = 0.0;
        for (std::size_t i = 0; i < mean.samples(); ++i) {
            dev_p = std::max(dev_p, std::abs(mean.p_qubit[i] - isolated_populations(c.g_bar, spec.detuning(), mean.times[i])));
            dev_r = std::max(dev_r, std::abs(mean.rho11_tilde[i] - mean.rho11_tilde[0]));
            dev_r = std::max(dev_r, std::abs(mean.rho22_tilde[i] - mean.rho22_tilde[0]));
        }
        rep.verdicts.push_back({"isolated p_qubit (1e-8)", dev_p <= 1e-8, "max dev " + fixed(dev_p, 3)});
        rep.verdicts.push_back({"rho_tilde constant (1e-8)", dev_r <= 1e-8, "max dev " + fixed(dev_r, 3)});
    } else {
        const bool global = rate_ref <= c.g_bar;
        FitWindow win = c.fit;
        if (!(win.hi > win.lo)) {
            // global picture: Gamma0 t in [0.5, 3]; local picture: Gamma_L t in [0.5, 3]
            const double ref = global || spec.detuning() == 0.0
                                   ? rate_ref
                                   : local_rate(c.g_bar, spec.detuning(), rate_ref).value;
            win = {0.5 / ref, std::min(3.0 / ref, mean.times.back())};
        }
        rep.results.push_back("fit_window = [" + fixed(win.lo) + ", " + fixed(win.hi) + "]");
        auto try_fit = [&](const std::vector<double>& v, const char* name, double expected) {
            try {
                const auto f = fit_decay_rate(mean.times, v, win);
                rep.results.push_back(std::string("fitted_rate_") + name + " = " + fixed(f.rate) + " (prediction " +
                                      fixed(expected) + ", rel. dev. " + fixed(f.rate / expected - 1.0, 3) + ")");
            } catch (const DomainError& e) {
                rep.results.push_back(std::string("fitted_rate_") + name + " = none (" + e.what() + ")");
            }
        };
        try_fit(mean.rho11_tilde, "rho11_tilde", rates.from1);
        try_fit(mean.rho22_tilde, "rho22_tilde", rates.from2);
        if (spec.detuning() != 0.0) try_fit(mean.p_qubit, "p_qubit", local_rate(c.g_bar, spec.detuning(), rate_ref).value);
        const double pc = *std::max_element(mean.p_cavity.begin(), mean.p_cavity.end());
        rep.results.push_back("max_p_cavity = " + fixed(pc, 4));
    }

    if (c.emit_overlays) {
        std::vector<Column> cols(2);
        cols[0].name = "isolated";
        cols[1].name = "local";
        const double gl = spec.detuning() != 0.0 ? local_rate(c.g_bar, spec.detuning(), rate_ref).value : NAN;
        for (double t : mean.times) {
            cols[0].values.push_back(isolated_populations(c.g_bar, spec.detuning(), t));
            cols[1].values.push_back(std::isnan(gl) ? NAN : std::exp(-gl * t));
        }
        auto os = out.open("overlay.csv");
        write_overlay_csv(os, mean.times, cols);
    }
}

}  // namespace detail

/// Runs a resolved config, writing outputs under config.output_dir. Files of
/// a run that throws are removed before the exception propagates.
inline RunReport run(const ExperimentConfig& c, const RunOptions& opts = {}) {
    validate(c);
    const auto start = std::chrono::steady_clock::now();
    RunReport rep;
    rep.parameters = describe(c);
    rep.norm_tolerance = c.norm_tolerance;
    WorkerPool pool(std::max<std::size_t>(1, opts.threads));
    detail::OutputSet out(c.output_dir);
    if (c.mode == RunMode::hybrid) {
        detail::run_hybrid(c, pool, out, rep);
    } else if (!c.kappa_sweep.empty()) {
        detail::run_sweep(c, pool, out, rep);
    } else {
        detail::run_qubit(c, pool, out, rep);
    }
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    {
        auto os = out.open("report.txt");
        rep.files = out.names();
        os << to_text(rep);
    }
    out.commit();
    return rep;
}

}  // namespace qdecay
