#pragma once

// Qubit - cavity - bath hybrid. The bath couples to the cavity only.
//
// Dimensionless units of the cavity: Omega0 = 1, r = Omega / Omega0,
// g_bar = g / Omega0, detuning D = r - 1. Propagation runs in the frame
// rotating at Omega0: diagonal D for the qubit, 0 for the cavity, omega_i - 1
// for the bath, with all couplings static.

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "qdecay/analytics.hpp"
#include "qdecay/bath.hpp"
#include "qdecay/dynamics.hpp"
#include "qdecay/error.hpp"
#include "qdecay/propagator.hpp"

namespace qdecay {

struct HybridSpec {
    double r = 1.0;
    double g_bar = 0.0;
    BathSpec bath;

    double detuning() const noexcept { return r - 1.0; }

    void validate() const {
        if (!(g_bar >= 0.0)) throw DomainError("hybrid: g_bar must be >= 0");
        if (!(r > 0.0)) throw DomainError("hybrid: frequency ratio r must be positive");
        if (bath.center != 1.0) throw DomainError("hybrid: bath centre must equal the cavity frequency 1");
        bath.validate();
    }
};

/// Dressed states of the isolated qubit-cavity pair in the basis
/// {|qubit excited>, |cavity excited>}: |1~> = (alpha, beta), |2~> = (gamma_c, delta).
struct HybridEigensystem {
    double eps0 = 0.0;
    double eps1 = 0.0;
    double eps2 = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double gamma_c = 0.0;
    double delta = 0.0;
    double theta = 0.0;
    double detuning = 0.0;
};

/// eps_{1,2} = 1 + (D -/+ theta)/2, theta = sqrt(D^2 + 4 g^2);
/// alpha = (D - theta)/n1, beta = 2g/n1, gamma_c = (D + theta)/n2, delta = 2g/n2.
/// D -/+ theta are evaluated in cancellation-free form; at g = 0 the components
/// take their decoupled limits.
inline HybridEigensystem hybrid_eigensystem(double g_bar, double detuning) {
    if (g_bar == 0.0 && detuning == 0.0)
        throw DomainError("hybrid_eigensystem: g_bar = 0 and D = 0 is exactly degenerate");
    if (!(g_bar >= 0.0)) throw DomainError("hybrid_eigensystem: g_bar must be >= 0");
    HybridEigensystem e;
    const double d = detuning;
    const double two_g = 2.0 * g_bar;
    e.detuning = d;
    e.theta = std::hypot(d, two_g);
    const double minus = d > 0.0 ? -two_g * two_g / (d + e.theta) : d - e.theta;  // D - theta
    const double plus = d < 0.0 ? two_g * two_g / (e.theta - d) : d + e.theta;    // D + theta
    e.eps1 = 1.0 + 0.5 * minus;
    e.eps2 = 1.0 + 0.5 * plus;
    const double n1 = std::hypot(two_g, minus);
    const double n2 = std::hypot(two_g, plus);
    if (n1 > 0.0) {
        e.alpha = minus / n1;
        e.beta = two_g / n1;
    } else {
        e.alpha = 0.0;
        e.beta = 1.0;
    }
    if (n2 > 0.0) {
        e.gamma_c = plus / n2;
        e.delta = two_g / n2;
    } else {
        e.gamma_c = 0.0;
        e.delta = 1.0;
    }
    return e;
}

/// Qubit population of the isolated pair started with the qubit excited:
/// 1/2 [1 + D^2/theta^2 + (4 g^2/theta^2) cos(theta t)].
inline double isolated_populations(double g_bar, double detuning, double t) {
    const double theta2 = detuning * detuning + 4.0 * g_bar * g_bar;
    if (theta2 == 0.0) return 1.0;
    return 0.5 * (1.0 + detuning * detuning / theta2 + 4.0 * g_bar * g_bar / theta2 * std::cos(std::sqrt(theta2) * t));
}

struct GlobalRates {
    double from1 = 0.0;  // Gamma_{1->0} = Gamma0 beta^2
    double from2 = 0.0;  // Gamma_{2->0} = Gamma0 delta^2
};

inline GlobalRates global_rates(const HybridEigensystem& eig, double gamma0) {
    if (!(gamma0 >= 0.0)) throw DomainError("global_rates: Gamma0 must be >= 0");
    return {gamma0 * eig.beta * eig.beta, gamma0 * eig.delta * eig.delta};
}

struct GlobalPopulations {
    double rho11 = 0.0;
    double rho22 = 0.0;
    double rho00 = 0.0;
};

/// Zero-temperature master-equation populations of the dressed states:
/// rho11 = alpha^2 e^{-Gamma_1 t}, rho22 = beta^2 e^{-Gamma_2 t}, rho00 = rest.
inline GlobalPopulations global_populations(const HybridEigensystem& eig, double gamma0, double t) {
    if (!(t >= 0.0)) throw DomainError("global_populations: t must be >= 0");
    const auto rates = global_rates(eig, gamma0);
    GlobalPopulations p;
    p.rho11 = eig.alpha * eig.alpha * std::exp(-rates.from1 * t);
    p.rho22 = eig.beta * eig.beta * std::exp(-rates.from2 * t);
    p.rho00 = 1.0 - p.rho11 - p.rho22;
    return p;
}

/// Initial ground-state feeding rate (Gamma0/2) / (1 + (D / (2 g))^2).
inline double ground_rate_initial(double g_bar, double detuning, double gamma0) {
    if (!(g_bar > 0.0)) throw DomainError("ground_rate_initial: g_bar must be positive");
    const double x = detuning / (2.0 * g_bar);
    return 0.5 * gamma0 / (1.0 + x * x);
}

/// Same quantity from the rate picture: 2 Gamma0 alpha^2 beta^2.
inline double ground_rate_from_rates(const HybridEigensystem& eig, double gamma0) {
    return 2.0 * gamma0 * eig.alpha * eig.alpha * eig.beta * eig.beta;
}

/// Local-picture qubit decay rate g^2 Gamma0 / D^2. Flagged valid when |D| >= 5 Gamma0.
inline LawValue local_rate(double g_bar, double detuning, double gamma0) {
    if (detuning == 0.0) throw DomainError("local_rate: requires nonzero detuning");
    return {g_bar * g_bar * gamma0 / (detuning * detuning), std::abs(detuning) >= 5.0 * gamma0};
}

struct HybridTrajectory {
    std::vector<double> times;
    std::vector<double> p_qubit;
    std::vector<double> p_cavity;
    std::vector<double> rho11_tilde;
    std::vector<double> rho22_tilde;
    std::vector<double> norm;
    double dt = 0.0;

    std::size_t samples() const noexcept { return times.size(); }
    /// 1 - p_qubit - p_cavity: population handed to the bath.
    double ground(std::size_t i) const { return 1.0 - p_qubit[i] - p_cavity[i]; }
};

/// Index layout [qubit, cavity, bath...]; the cavity is the hub.
inline PropagationMatrix hybrid_matrix(const HybridSpec& spec, const BathRealization& real) {
    const std::size_t n = real.size();
    std::vector<double> diag(n + 2), coup(n + 2);
    diag[0] = spec.detuning();
    coup[0] = spec.g_bar;
    diag[1] = 0.0;
    coup[1] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        diag[i + 2] = real.omegas[i] - 1.0;
        coup[i + 2] = real.gammas[i];
    }
    return PropagationMatrix(1, std::move(diag), std::move(coup), real.kappas, 2);
}

/// Projection of the state on the dressed states with the laboratory phases
/// e^{-i Omega t}, e^{-i Omega0 t} restored. In the Omega0 frame both phases
/// reduce to one global factor, so the projection is onto (alpha, beta) and
/// (gamma_c, delta) of the frame amplitudes.
inline std::pair<double, double> dressed_projections(const HybridEigensystem& eig, cplx c_qubit, cplx c_cavity) {
    return {std::norm(eig.alpha * c_qubit + eig.beta * c_cavity), std::norm(eig.gamma_c * c_qubit + eig.delta * c_cavity)};
}

/// Propagates the qubit-cavity-bath system from |qubit excited>.
inline HybridTrajectory evolve_hybrid(const HybridSpec& spec, const BathRealization& real, const TimeGrid& grid,
                                      const EvolveOptions& options = {}) {
    spec.validate();
    if (grid.sample_stride == 0) throw DomainError("time grid: sample_stride must be >= 1");
    const auto a = hybrid_matrix(spec, real);
    const double limit = Rk4Stepper::stability_limit(a);
    if (grid.dt > limit) throw StabilityError(grid.dt, limit);
    const auto eig = hybrid_eigensystem(spec.g_bar, spec.detuning());

    WorkerPool local(1);
    Rk4Stepper stepper(a, grid.dt, options.pool ? *options.pool : local);
    std::vector<cplx> c(a.dim(), cplx{0.0, 0.0});
    c[0] = 1.0;

    HybridTrajectory traj;
    traj.dt = grid.dt;
    auto record = [&](double t) {
        traj.times.push_back(t);
        traj.p_qubit.push_back(std::norm(c[0]));
        traj.p_cavity.push_back(std::norm(c[1]));
        const auto [r11, r22] = dressed_projections(eig, c[0], c[1]);
        traj.rho11_tilde.push_back(r11);
        traj.rho22_tilde.push_back(r22);
        double nrm = 0.0;
        for (const cplx& v : c) nrm += std::norm(v);
        traj.norm.push_back(nrm);
    };
    const double abort_threshold = 100.0 * options.norm_tolerance;
    const std::size_t steps = grid.steps();
    record(0.0);
    for (std::size_t s = 1; s <= steps; ++s) {
        stepper.step(c);
        if (options.renormalize_every > 0 && s % options.renormalize_every == 0) detail::renormalize(c);
        if (s % grid.sample_stride == 0 || s == steps) {
            const double t = static_cast<double>(s) * grid.dt;
            record(t);
            const double drift = std::abs(traj.norm.back() - 1.0);
            if (drift > abort_threshold) throw NormDriftError(t, drift, abort_threshold);
        }
    }
    return traj;
}

inline HybridTrajectory evolve_hybrid(const HybridSpec& spec, const TimeGrid& grid, const EvolveOptions& options = {}) {
    return evolve_hybrid(spec, sample_bath(spec.bath), grid, options);
}

/// Ensemble of bath realizations: member m uses realization_seed(seed, m).
inline BathRealization ensemble_member(const BathSpec& spec, std::size_t member) {
    BathSpec s = spec;
    s.seed = realization_seed(spec.seed, member);
    return sample_bath(s);
}

struct GroundRateEstimate {
    double rate = 0.0;
    double period = 0.0;  // Rabi period 2 pi / theta
    double rho00_p = 0.0;
    double rho00_2p = 0.0;
};

/// Initial slope of rho00 = 1 - p_qubit - p_cavity.
///
/// rho00 starts as t^3 under the unresolved Rabi exchange, so a first-interval
/// forward difference measures the transient, not the rate. Sampling at one
/// and two full Rabi periods removes the oscillation; the one-sided
/// second-order difference (4 rho(P) - rho(2P)) / (2P) removes the curvature
/// of the decay. Populations are averaged over `ensemble` realizations.
inline GroundRateEstimate estimate_initial_ground_rate(const HybridSpec& spec, std::size_t ensemble = 1,
                                                       WorkerPool* pool = nullptr, double max_dt = 0.1) {
    if (ensemble == 0) throw DomainError("estimate_initial_ground_rate: ensemble must be >= 1");
    const auto eig = hybrid_eigensystem(spec.g_bar, spec.detuning());
    GroundRateEstimate est;
    est.period = 2.0 * std::numbers::pi / eig.theta;
    double r1 = 0.0, r2 = 0.0;
    for (std::size_t m = 0; m < ensemble; ++m) {
        const auto real = ensemble_member(spec.bath, m);
        const auto a = hybrid_matrix(spec, real);
        const double dt_max = std::min(max_dt, default_time_step(a));
        const auto k = static_cast<std::size_t>(std::ceil(est.period / dt_max));
        const TimeGrid grid{2.0 * est.period, est.period / static_cast<double>(k), k};
        EvolveOptions options;
        options.pool = pool;
        const auto traj = evolve_hybrid(spec, real, grid, options);
        r1 += traj.ground(1);
        r2 += traj.ground(2);
    }
    est.rho00_p = r1 / static_cast<double>(ensemble);
    est.rho00_2p = r2 / static_cast<double>(ensemble);
    est.rate = (4.0 * est.rho00_p - est.rho00_2p) / (2.0 * est.period);
    return est;
}

/// Element-wise mean of hybrid trajectories sampled on the same grid.
inline HybridTrajectory average(std::span<const HybridTrajectory> runs) {
    if (runs.empty()) throw DomainError("average: no trajectories");
    HybridTrajectory out = runs.front();
    const double inv = 1.0 / static_cast<double>(runs.size());
    auto mean = [&](std::vector<double> HybridTrajectory::*field) {
        auto& dst = out.*field;
        for (std::size_t i = 0; i < dst.size(); ++i) {
            double s = 0.0;
            for (const auto& r : runs) s += (r.*field)[i];
            dst[i] = s * inv;
        }
    };
    mean(&HybridTrajectory::p_qubit);
    mean(&HybridTrajectory::p_cavity);
    mean(&HybridTrajectory::rho11_tilde);
    mean(&HybridTrajectory::rho22_tilde);
    mean(&HybridTrajectory::norm);
    return out;
}

}  // namespace qdecay
