#pragma once

// Closed-form decay laws of a qubit in a flat-band oscillator bath, plus rate
// extraction from sampled trajectories.
//
// Asymptotic laws return a LawValue carrying a validity flag rather than
// refusing out-of-regime arguments, so they can be overlaid on full curves.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "qdecay/bath.hpp"
#include "qdecay/dynamics.hpp"
#include "qdecay/error.hpp"
#include "qdecay/rng.hpp"

namespace qdecay {

struct LawValue {
    double value = 0.0;
    bool valid = true;
};

namespace detail {

// (1 - cos w) / w^2 with the removable singularity patched by its series.
inline double chi_integrand(double w) {
    const double w2 = w * w;
    if (std::abs(w) < 1e-3) return 0.5 - w2 / 24.0 + w2 * w2 / 720.0;
    const double s = std::sin(0.5 * w);
    return 2.0 * s * s / w2;  // 1 - cos w = 2 sin^2(w/2), no cancellation
}

// 7-point Gauss / 15-point Kronrod nodes and weights on [-1, 1].
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class F>
double kronrod15(F&& f, double a, double b, double& error) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    const double fc = f(c);
    double k = kKronrodWeights[7] * fc;
    double g = kGaussWeights[3] * fc;
    for (std::size_t j = 0; j < 7; ++j) {
        const double x = h * kKronrodNodes[j];
        const double s = f(c - x) + f(c + x);
        k += kKronrodWeights[j] * s;
        if (j % 2 == 1) g += kGaussWeights[j / 2] * s;
    }
    error = std::abs((k - g) * h);
    return k * h;
}

template <class F>
double adaptive_kronrod(F&& f, double a, double b, double tol, int depth = 0) {
    double err = 0.0;
    const double v = kronrod15(f, a, b, err);
    if (err <= tol || depth >= 40) return v;
    const double m = 0.5 * (a + b);
    return adaptive_kronrod(f, a, m, 0.5 * tol, depth + 1) + adaptive_kronrod(f, m, b, 0.5 * tol, depth + 1);
}

// int_a^inf cos(w) / w^2 dw for large a, asymptotic series truncated at a^-7.
inline double cos_over_w2_tail(double a) {
    // repeated integration by parts:
    // -sin/a^2 + 2 cos/a^3 + 6 sin/a^4 - 24 cos/a^5 - 120 sin/a^6 + 720 cos/a^7
    const double s = std::sin(a), c = std::cos(a);
    const double a2 = a * a, a3 = a2 * a, a4 = a2 * a2;
    const double sin_part = -1.0 / a2 + 6.0 / a4 - 120.0 / (a4 * a2);
    const double cos_part = 2.0 / a3 - 24.0 / (a4 * a) + 720.0 / (a4 * a3);
    return sin_part * s + cos_part * c;
}

}  // namespace detail

/// chi(t) = int_{-Dw t/2}^{Dw t/2} (1 - cos w) / w^2 dw.
///
/// Adaptive Gauss-Kronrod on panels of width pi up to w = 2000 pi, analytic
/// tail beyond (the integrand is 1/w^2 minus an oscillating piece whose
/// integral is expanded asymptotically). chi(0) = 0, chi(infinity) = pi.
inline double chi(double t, double width) {
    if (!(t >= 0.0)) throw DomainError("chi: t must be >= 0");
    const double a = 0.5 * width * t;
    if (std::isinf(a)) return std::numbers::pi;
    if (a == 0.0) return 0.0;
    constexpr double kPanel = std::numbers::pi;
    constexpr double kSwitch = 2000.0 * std::numbers::pi;
    const double head_end = std::min(a, kSwitch);
    const std::size_t panels = static_cast<std::size_t>(std::ceil(head_end / kPanel));
    const double tol = 1e-11 / static_cast<double>(std::max<std::size_t>(panels, 1));
    double half = 0.0;
    for (std::size_t p = 0; p < panels; ++p) {
        const double lo = static_cast<double>(p) * kPanel;
        const double hi = std::min(head_end, lo + kPanel);
        half += detail::adaptive_kronrod(detail::chi_integrand, lo, hi, tol);
    }
    if (a > kSwitch) {
        // int_A^a (1 - cos w)/w^2 = (1/A - 1/a) - [T(A) - T(a)], T(x) = int_x^inf cos w / w^2
        half += (1.0 / kSwitch - 1.0 / a) - (detail::cos_over_w2_tail(kSwitch) - detail::cos_over_w2_tail(a));
    }
    return 2.0 * half;
}

/// Short-time quadratic law 1 - Lambda0^2 t^2, valid while Lambda0 t <= 1.
inline LawValue zeno_population(double lambda0, double t) {
    return {1.0 - lambda0 * lambda0 * t * t, lambda0 * t <= 1.0};
}

/// Intermediate linear law 1 - Gamma0 t. Validity needs Dw t >> 1 and
/// Gamma0 t << 1, read here as Dw t >= 10 and Gamma0 t <= 0.1.
inline LawValue linear_population(double gamma0, double t, double width = INFINITY) {
    return {1.0 - gamma0 * t, width * t >= 10.0 && gamma0 * t <= 0.1};
}

inline LawValue exponential_population(double gamma0, double t) { return {std::exp(-gamma0 * t), true}; }

/// Long-time persistence amplitude
/// C0(t) ~ exp(-Gamma0 t / 2) + (4 Gamma0 / (pi Dw)) sin(Dw t / 2) / (Dw t),
/// valid for Dw t >> 1 (flag: Dw t >= 10).
inline LawValue longtime_amplitude(double gamma0, double width, double t) {
    const double x = width * t;
    const double oscillatory = x == 0.0 ? 0.5 : std::sin(0.5 * x) / x;
    return {std::exp(-0.5 * gamma0 * t) + 4.0 * gamma0 / (std::numbers::pi * width) * oscillatory, x >= 10.0};
}

/// Amplitude of the power-law term of longtime_amplitude at time t.
inline double longtime_tail_envelope(double gamma0, double width, double t) {
    return 4.0 * gamma0 / (std::numbers::pi * width) / (width * t);
}

/// t0 = (4 / Gamma0) ln(Dw / Gamma0).
inline double crossover_time(double gamma0, double width) {
    if (!(gamma0 > 0.0)) throw DomainError("crossover_time: Gamma0 must be positive");
    if (!(width > gamma0)) throw DomainError("crossover_time: requires bandwidth > Gamma0");
    return 4.0 / gamma0 * std::log(width / gamma0);
}

enum class MomentConvention { independent_means, empirical };

inline const char* to_string(MomentConvention c) {
    return c == MomentConvention::empirical ? "empirical" : "independent-means";
}

/// Fourth-order mixed moment <gamma_i gamma_j kappa_ik kappa_kj> with its convention.
struct Moment4 {
    double value = 0.0;
    MomentConvention convention = MomentConvention::empirical;
};

struct DecayLawParams {
    double gamma0 = 0.0;
    double lambda0 = 0.0;
    double width = 0.0;
    double nu0 = 0.0;
    Moment4 moment4;

    double crossover() const { return crossover_time(gamma0, width); }
};

/// Mean of the distribution's draws.
inline double distribution_mean(double max_value, bool uniform) { return uniform ? 0.5 * max_value : max_value; }

/// <gamma>^2 <kappa>^2 from the ideal distribution means.
inline Moment4 independent_means_moment4(const BathSpec& spec) {
    const double g = distribution_mean(spec.gamma_max, spec.qubit_coupling_dist == CouplingDist::uniform);
    double k = 0.0;
    if (spec.has_internal_couplings())
        k = distribution_mean(spec.kappa_max, spec.internal_coupling_dist == InternalCouplingDist::uniform);
    return {g * g * k * k, MomentConvention::independent_means};
}

/// Monte-Carlo estimate of <gamma_i gamma_j kappa_ik kappa_kj> over uniformly
/// random index triples (i, j, k) of the realization.
inline Moment4 empirical_moment4(const BathRealization& real, std::size_t triples = 100000,
                                 std::uint64_t seed = 0) {
    Moment4 m{0.0, MomentConvention::empirical};
    const std::size_t n = real.size();
    if (!real.kappas || n == 0 || triples == 0) return m;
    auto rng = make_stream(seed ^ real.spec.seed, Stream::moment_sampling);
    const auto& k = *real.kappas;
    double sum = 0.0;
    for (std::size_t s = 0; s < triples; ++s) {
        const std::size_t i = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
        const std::size_t j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
        const std::size_t c = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
        sum += real.gammas[i] * real.gammas[j] * k(i, c) * k(c, j);
    }
    m.value = sum / static_cast<double>(triples);
    return m;
}

/// Gamma = Gamma0 - 2 pi^3 nu0^3 <gamma_i gamma_j kappa_ik kappa_kj>.
/// Perturbative; a negative result is flagged invalid.
inline LawValue internal_coupling_rate(double gamma0, double nu0, const Moment4& moment4) {
    if (!(moment4.value >= 0.0)) throw DomainError("internal_coupling_rate: moment must be >= 0");
    const double g = gamma0 - 2.0 * std::pow(std::numbers::pi, 3) * nu0 * nu0 * nu0 * moment4.value;
    return {g, g >= 0.0};
}

/// Coefficient c of the quadratic rate reduction Gamma0 - Gamma = c <kappa>^2
/// predicted under a convention where moment4 = <gamma>^2 <kappa>^2.
inline double internal_coupling_coefficient(double nu0, double mean_gamma) {
    return 2.0 * std::pow(std::numbers::pi, 3) * nu0 * nu0 * nu0 * mean_gamma * mean_gamma;
}

struct FitWindow {
    double lo = 0.0;
    double hi = 0.0;
};

struct RateFit {
    double rate = 0.0;
    FitWindow window;
    double residual = 0.0;  // max |ln y - fit line| over the window
    double intercept = 0.0;
    std::size_t samples = 0;
};

/// Least-squares slope of ln(values) against times over the window; rate = -slope.
inline RateFit fit_decay_rate(std::span<const double> times, std::span<const double> values, FitWindow window) {
    if (times.size() != values.size()) throw DomainError("fit_decay_rate: size mismatch");
    if (!(window.lo < window.hi)) throw DomainError("fit_decay_rate: window requires lo < hi");
    std::vector<double> ts, ls;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < window.lo || times[i] > window.hi) continue;
        if (!(values[i] > 0.0))
            throw DomainError("fit_decay_rate: non-positive observable at t = " + std::to_string(times[i]));
        ts.push_back(times[i]);
        ls.push_back(std::log(values[i]));
    }
    if (ts.size() < 10) throw DomainError("fit_decay_rate: fewer than 10 samples in window");
    const double n = static_cast<double>(ts.size());
    double mt = 0.0, ml = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        mt += ts[i];
        ml += ls[i];
    }
    mt /= n;
    ml /= n;
    double stt = 0.0, stl = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        stt += (ts[i] - mt) * (ts[i] - mt);
        stl += (ts[i] - mt) * (ls[i] - ml);
    }
    RateFit fit;
    const double slope = stl / stt;
    fit.rate = -slope;
    fit.intercept = ml - slope * mt;
    fit.window = window;
    fit.samples = ts.size();
    for (std::size_t i = 0; i < ts.size(); ++i)
        fit.residual = std::max(fit.residual, std::abs(ls[i] - (fit.intercept + slope * ts[i])));
    return fit;
}

inline RateFit fit_decay_rate(const Trajectory& traj, FitWindow window) {
    return fit_decay_rate(traj.times, traj.p_qubit, window);
}

/// Least-squares slope of log|y| against log t over the window.
inline double loglog_slope(std::span<const double> times, std::span<const double> values, FitWindow window) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < window.lo || times[i] > window.hi || !(values[i] > 0.0)) continue;
        const double x = std::log(times[i]), y = std::log(values[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n < 2) throw DomainError("loglog_slope: fewer than 2 samples in window");
    const double dn = static_cast<double>(n);
    return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

/// Local maxima of |y| over consecutive windows of the given width; returns
/// (time, value) pairs for the envelope.
inline std::vector<std::pair<double, double>> envelope_maxima(std::span<const double> times,
                                                              std::span<const double> values, double lo,
                                                              double hi, double block) {
    std::vector<std::pair<double, double>> env;
    double start = lo;
    std::size_t i = 0;
    while (i < times.size() && times[i] < lo) ++i;
    while (start < hi) {
        const double end = std::min(hi, start + block);
        double best = -1.0, best_t = start;
        for (; i < times.size() && times[i] < end; ++i) {
            const double v = std::abs(values[i]);
            if (v > best) {
                best = v;
                best_t = times[i];
            }
        }
        if (best > 0.0) env.emplace_back(best_t, best);
        start = end;
    }
    return env;
}

}  // namespace qdecay
