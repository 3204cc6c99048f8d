#pragma once

// Exact propagation of a qubit coupled to an oscillator bath in the
// single-excitation sector.
//
// Amplitudes are carried in the frame rotating at the qubit frequency
// Omega = 1: the propagation matrix has 0 on the qubit diagonal, omega_i - 1
// on the oscillator diagonal, gamma_i in the qubit row/column and kappa_ij in
// the oscillator block. All |C|^2 coincide with those of the interaction
// picture.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qdecay/bath.hpp"
#include "qdecay/error.hpp"
#include "qdecay/parallel.hpp"
#include "qdecay/propagator.hpp"

namespace qdecay {

inline constexpr double kQubitFrequency = 1.0;

struct AmplitudeState {
    cplx c_qubit{1.0, 0.0};
    std::vector<cplx> c_osc;
    double t = 0.0;

    /// Qubit excited, bath empty.
    static AmplitudeState excited_qubit(std::size_t n_oscillators) {
        AmplitudeState s;
        s.c_osc.assign(n_oscillators, cplx{0.0, 0.0});
        return s;
    }

    std::size_t size() const noexcept { return c_osc.size() + 1; }

    double norm_squared() const {
        double s = std::norm(c_qubit);
        for (const cplx& c : c_osc) s += std::norm(c);
        return s;
    }

    /// Flattened vector [C_0, C_1, ..., C_N].
    std::vector<cplx> flat() const {
        std::vector<cplx> v;
        v.reserve(size());
        v.push_back(c_qubit);
        v.insert(v.end(), c_osc.begin(), c_osc.end());
        return v;
    }

    static AmplitudeState from_flat(std::span<const cplx> v, double t) {
        AmplitudeState s;
        if (v.empty()) throw DomainError("amplitude vector must contain the qubit entry");
        s.c_qubit = v[0];
        s.c_osc.assign(v.begin() + 1, v.end());
        s.t = t;
        return s;
    }
};

struct TimeGrid {
    double t_end = 0.0;
    double dt = 0.0;
    std::size_t sample_stride = 1;

    std::size_t steps() const {
        if (!(dt > 0.0)) throw DomainError("time grid: dt must be positive");
        if (!(t_end >= 0.0)) throw DomainError("time grid: t_end must be >= 0");
        return static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
    }
};

struct Checkpoint {
    double t = 0.0;
    AmplitudeState state;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<double> p_qubit;
    std::vector<double> norm;  // sum |C|^2
    std::vector<std::vector<double>> bath_energy;  // [bath][sample]
    std::vector<double> interaction_energy;        // <V>, completes the energy balance
    std::vector<Checkpoint> checkpoints;
    double dt = 0.0;

    std::size_t samples() const noexcept { return times.size(); }
};

struct EvolveOptions {
    double norm_tolerance = 1e-6;
    std::size_t renormalize_every = 0;  // 0 = never
    std::vector<double> checkpoint_times;
    WorkerPool* pool = nullptr;  // null: run on the calling thread
};

/// Propagation matrix of the qubit-bath problem in the qubit rotating frame.
inline PropagationMatrix qubit_bath_matrix(const BathRealization& real) {
    const std::size_t n = real.size();
    std::vector<double> diag(n + 1), coup(n + 1);
    diag[0] = 0.0;
    coup[0] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        diag[i + 1] = real.omegas[i] - kQubitFrequency;
        coup[i + 1] = real.gammas[i];
    }
    return PropagationMatrix(0, std::move(diag), std::move(coup), real.kappas, 1);
}

/// dC/dt = -i A C.
inline AmplitudeState rhs(const AmplitudeState& state, const BathRealization& real) {
    if (state.size() != real.size() + 1) throw DomainError("rhs: state length must be N + 1");
    const auto a = qubit_bath_matrix(real);
    const auto in = state.flat();
    std::vector<cplx> out(in.size());
    WorkerPool serial(1);
    a.apply(in, out, serial);
    for (cplx& v : out) v *= cplx(0.0, -1.0);
    return AmplitudeState::from_flat(out, state.t);
}

/// Step fraction / lambda_max, lambda_max the spectral bound of the matrix.
inline double default_time_step(const PropagationMatrix& a, double fraction = 0.25) {
    const double lam = a.spectral_bound();
    return lam > 0.0 ? fraction / lam : 0.1;
}

/// Per-bath energies E_k = sum_{i in k} omega_i |C_i|^2 (frame-restored omega_i).
inline std::vector<double> bath_energies(const AmplitudeState& state, const BathRealization& real) {
    if (state.c_osc.size() != real.size()) throw DomainError("bath_energies: state/bath size mismatch");
    std::vector<double> e(real.bath_count(), 0.0);
    for (std::size_t i = 0; i < real.size(); ++i) e[real.labels[i]] += real.omegas[i] * std::norm(state.c_osc[i]);
    return e;
}

inline double qubit_energy(const AmplitudeState& state) { return kQubitFrequency * std::norm(state.c_qubit); }

/// <V> = 2 Re(C_0^* sum gamma_i C_i) + sum_{i != j} kappa_ij C_i^* C_j.
inline double interaction_energy(std::span<const cplx> c, const BathRealization& real) {
    cplx s = 0.0;
    for (std::size_t i = 0; i < real.size(); ++i) s += real.gammas[i] * c[i + 1];
    double e = 2.0 * (std::conj(c[0]) * s).real();
    if (real.kappas) {
        const auto& k = *real.kappas;
        for (std::size_t i = 0; i + 1 < k.size(); ++i) {
            const auto row = k.upper_row(i);
            cplx acc = 0.0;
            for (std::size_t j = 0; j < row.size(); ++j) acc += row[j] * c[i + 2 + j];
            e += 2.0 * (std::conj(c[i + 1]) * acc).real();
        }
    }
    return e;
}

/// max |sum |C|^2 - 1| over the samples.
inline double norm_error(const Trajectory& traj) {
    double e = 0.0;
    for (double n : traj.norm) e = std::max(e, std::abs(n - 1.0));
    return e;
}

namespace detail {

inline void record_sample(Trajectory& traj, std::span<const cplx> c, const BathRealization& real, double t) {
    traj.times.push_back(t);
    traj.p_qubit.push_back(std::norm(c[0]));
    double nrm = 0.0;
    std::vector<double> e(real.bath_count(), 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) nrm += std::norm(c[i]);
    for (std::size_t i = 0; i < real.size(); ++i) e[real.labels[i]] += real.omegas[i] * std::norm(c[i + 1]);
    traj.norm.push_back(nrm);
    for (std::size_t k = 0; k < e.size(); ++k) traj.bath_energy[k].push_back(e[k]);
    traj.interaction_energy.push_back(interaction_energy(c, real));
}

inline void renormalize(std::span<cplx> c) {
    double nrm = 0.0;
    for (const cplx& v : c) nrm += std::norm(v);
    const double s = 1.0 / std::sqrt(nrm);
    for (cplx& v : c) v *= s;
}

}  // namespace detail

/// Integrates the amplitude equations on the grid and samples the observables
/// every sample_stride steps (t = 0 included).
///
/// An empty bath gives the constant trajectory. A step above 2.8/lambda_max
/// throws StabilityError; a norm drift beyond 100x norm_tolerance at a sample
/// throws NormDriftError.
inline Trajectory evolve(const BathRealization& real, const TimeGrid& grid, const AmplitudeState& init,
                         const EvolveOptions& options = {}) {
    if (init.size() != real.size() + 1) throw DomainError("evolve: initial state length must be N + 1");
    if (grid.sample_stride == 0) throw DomainError("time grid: sample_stride must be >= 1");
    const auto a = qubit_bath_matrix(real);
    const double limit = Rk4Stepper::stability_limit(a);
    if (grid.dt > limit) throw StabilityError(grid.dt, limit);
    const std::size_t steps = grid.steps();

    WorkerPool local(1);
    WorkerPool& pool = options.pool ? *options.pool : local;
    Rk4Stepper stepper(a, grid.dt, pool);

    Trajectory traj;
    traj.dt = grid.dt;
    traj.bath_energy.assign(real.bath_count(), {});
    std::vector<cplx> c = init.flat();

    std::vector<double> pending = options.checkpoint_times;
    std::sort(pending.begin(), pending.end());
    std::size_t next_checkpoint = 0;
    auto take_checkpoints = [&](std::size_t step) {
        const double t = init.t + static_cast<double>(step) * grid.dt;
        while (next_checkpoint < pending.size() && pending[next_checkpoint] <= t + 0.5 * grid.dt) {
            traj.checkpoints.push_back({t, AmplitudeState::from_flat(c, t)});
            ++next_checkpoint;
        }
    };

    const double abort_threshold = 100.0 * options.norm_tolerance;
    detail::record_sample(traj, c, real, init.t);
    take_checkpoints(0);
    for (std::size_t s = 1; s <= steps; ++s) {
        if (real.size() > 0) stepper.step(c);
        if (options.renormalize_every > 0 && s % options.renormalize_every == 0) detail::renormalize(c);
        take_checkpoints(s);
        if (s % grid.sample_stride == 0 || s == steps) {
            const double t = init.t + static_cast<double>(s) * grid.dt;
            detail::record_sample(traj, c, real, t);
            const double drift = std::abs(traj.norm.back() - 1.0);
            if (drift > abort_threshold) throw NormDriftError(t, drift, abort_threshold);
        }
    }
    return traj;
}

/// Final amplitudes after propagating init over the grid (no sampling).
inline AmplitudeState propagate(const BathRealization& real, const TimeGrid& grid, const AmplitudeState& init,
                                WorkerPool* pool = nullptr) {
    const auto a = qubit_bath_matrix(real);
    const double limit = Rk4Stepper::stability_limit(a);
    if (grid.dt > limit) throw StabilityError(grid.dt, limit);
    WorkerPool local(1);
    Rk4Stepper stepper(a, grid.dt, pool ? *pool : local);
    std::vector<cplx> c = init.flat();
    const std::size_t steps = grid.steps();
    if (real.size() > 0)
        for (std::size_t s = 0; s < steps; ++s) stepper.step(c);
    return AmplitudeState::from_flat(c, init.t + static_cast<double>(steps) * grid.dt);
}

// Revival presets: baths without enough randomness to act as a heat bath.

enum class RevivalKind { full_random, degenerate_resonant, degenerate_detuned, equal_couplings, narrow };

enum class Expectation { decays, oscillates_cos2, partial_revivals, bounded_below };

inline const char* to_string(Expectation e) {
    switch (e) {
        case Expectation::decays: return "decays";
        case Expectation::oscillates_cos2: return "oscillates-cos2";
        case Expectation::partial_revivals: return "partial-revivals";
        case Expectation::bounded_below: return "bounded-below";
    }
    return "?";
}

struct RevivalPreset {
    BathSpec spec;
    Expectation expectation;
    std::string description;
};

/// Bath specs of the randomness study. Without internal couplings: N = 1e5,
/// gamma uniform on [0, 0.001] (Gamma0 = 0.1 at Delta-omega = 2). The equal
/// coupling case uses N = 1e3, gamma fixed at 0.004 and kappa fixed at 0.01.
inline RevivalPreset revival_preset(RevivalKind kind, double parameter = 0.0) {
    RevivalPreset p;
    BathSpec& s = p.spec;
    s.n_oscillators = 100000;
    s.center = 1.0;
    s.width = 2.0;
    s.gamma_max = 0.001;
    s.qubit_coupling_dist = CouplingDist::uniform;
    s.seed = 2021;
    switch (kind) {
        case RevivalKind::full_random:
            p.expectation = Expectation::decays;
            p.description = "uniform frequencies (width 2) and uniform couplings";
            break;
        case RevivalKind::degenerate_resonant:
            s.frequency_dist = FrequencyDist::degenerate;
            s.omega_fix = 1.0;
            s.width = 0.0;
            p.expectation = Expectation::oscillates_cos2;
            p.description = "all oscillators resonant with the qubit";
            break;
        case RevivalKind::degenerate_detuned:
            s.frequency_dist = FrequencyDist::degenerate;
            s.omega_fix = parameter > 0.0 ? parameter : 0.4;
            s.width = 0.0;
            p.expectation = Expectation::bounded_below;
            p.description = "all oscillators at one detuned frequency";
            break;
        case RevivalKind::narrow:
            s.width = parameter > 0.0 ? parameter : 0.3;
            p.expectation = Expectation::partial_revivals;
            p.description = "narrow uniform frequency band";
            break;
        case RevivalKind::equal_couplings:
            s.n_oscillators = 1000;
            s.gamma_max = 0.004;
            s.qubit_coupling_dist = CouplingDist::fixed;
            s.internal_coupling_dist = InternalCouplingDist::fixed;
            s.kappa_max = 0.01;
            p.expectation = Expectation::bounded_below;
            p.description = "couplings gamma and kappa all equal, uniform frequencies";
            break;
    }
    return p;
}

/// Collective-mode lower bound delta^2 / (delta^2 + 4 Lambda0^2) of a
/// degenerate bath detuned by delta from the qubit.
inline double degenerate_population_floor(double lambda0, double detuning) {
    const double d2 = detuning * detuning;
    if (d2 == 0.0 && lambda0 == 0.0) return 1.0;
    return d2 / (d2 + 4.0 * lambda0 * lambda0);
}

/// Exact qubit population of a degenerate bath: the qubit exchanges its
/// excitation with one collective oscillator, coupling Lambda0, detuning delta.
inline double degenerate_population(double lambda0, double detuning, double t) {
    const double theta = std::sqrt(detuning * detuning + 4.0 * lambda0 * lambda0);
    if (theta == 0.0) return 1.0;
    const double s = std::sin(0.5 * theta * t);
    return 1.0 - 4.0 * lambda0 * lambda0 / (theta * theta) * s * s;
}

struct ExpectationCheck {
    bool satisfied = false;
    double metric = 0.0;
    std::string detail;
};

/// Machine check of a revival expectation on a trajectory.
///   decays: p(t) <= 2 exp(-Gamma0 t) for all samples with t <= t_check (default 100).
///   oscillates-cos2: max |p - cos^2(Lambda0 t)| <= 1e-6.
///   bounded-below: min p >= collective-mode floor - 1e-3 for a degenerate bath. With
///     equal couplings the uniform mode sits (N-1) kappa above the band but the
///     frequency spread still leaks a little weight into the band, so the check
///     is min p >= 1/2.
///   partial-revivals: after the first minimum p rises again by more than 0.05.
inline ExpectationCheck check_expectation(const Trajectory& traj, const BathRealization& real,
                                          Expectation e, double t_check = 100.0) {
    ExpectationCheck r;
    const double lambda0 = lambda0_of(real);
    switch (e) {
        case Expectation::decays: {
            const double g0 = gamma0_of(real);
            double worst = 0.0;
            for (std::size_t i = 0; i < traj.samples(); ++i) {
                if (traj.times[i] > t_check) break;
                worst = std::max(worst, traj.p_qubit[i] / std::exp(-g0 * traj.times[i]));
            }
            r.metric = worst;
            r.satisfied = worst <= 2.0;
            r.detail = "max p/exp(-Gamma0 t) = " + std::to_string(worst);
            break;
        }
        case Expectation::oscillates_cos2: {
            double worst = 0.0;
            for (std::size_t i = 0; i < traj.samples(); ++i) {
                const double c = std::cos(lambda0 * traj.times[i]);
                worst = std::max(worst, std::abs(traj.p_qubit[i] - c * c));
            }
            r.metric = worst;
            r.satisfied = worst <= 1e-6;
            r.detail = "max |p - cos^2(Lambda0 t)| = " + std::to_string(worst);
            break;
        }
        case Expectation::bounded_below: {
            double floor_value = 0.5;
            if (real.spec.frequency_dist == FrequencyDist::degenerate)
                floor_value = degenerate_population_floor(lambda0, real.spec.omega_fix - kQubitFrequency) - 1e-3;
            const double pmin = *std::min_element(traj.p_qubit.begin(), traj.p_qubit.end());
            r.metric = pmin;
            r.satisfied = pmin >= floor_value;
            r.detail = "min p = " + std::to_string(pmin) + ", floor = " + std::to_string(floor_value);
            break;
        }
        case Expectation::partial_revivals: {
            std::size_t first_min = 0;
            for (std::size_t i = 1; i + 1 < traj.samples(); ++i) {
                if (traj.p_qubit[i] <= traj.p_qubit[i - 1] && traj.p_qubit[i] < traj.p_qubit[i + 1]) {
                    first_min = i;
                    break;
                }
            }
            double rise = 0.0;
            if (first_min > 0) {
                const double later_max =
                    *std::max_element(traj.p_qubit.begin() + static_cast<std::ptrdiff_t>(first_min), traj.p_qubit.end());
                rise = later_max - traj.p_qubit[first_min];
            }
            r.metric = rise;
            r.satisfied = rise > 0.05;
            r.detail = "revival height after first minimum = " + std::to_string(rise);
            break;
        }
    }
    return r;
}

}  // namespace qdecay
