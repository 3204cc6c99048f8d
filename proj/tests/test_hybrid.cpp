#include <catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <vector>

#include "qdecay/hybrid.hpp"

using namespace qdecay;
using Catch::Approx;

namespace {

HybridSpec pair_spec(double g, double d, std::size_t n, double gmax, std::uint64_t seed = 1) {
    HybridSpec h;
    h.g_bar = g;
    h.r = 1.0 + d;
    h.bath.n_oscillators = n;
    h.bath.width = 1.0;
    h.bath.gamma_max = gmax;
    h.bath.seed = seed;
    return h;
}

}  // namespace

TEST_CASE("eigensystem example", "[hybrid]") {
    const auto e = hybrid_eigensystem(0.1, -0.25);
    CHECK(e.theta == Approx(0.320156).margin(1e-6));
    CHECK(e.eps1 == Approx(0.714922).margin(1e-6));
    CHECK(e.eps2 == Approx(1.035078).margin(1e-6));
    CHECK(e.beta * e.beta == Approx(0.10956).margin(1e-5));
    CHECK(e.eps0 == 0.0);
    CHECK_THROWS_AS(hybrid_eigensystem(0.0, 0.0), DomainError);
    CHECK_THROWS_AS(hybrid_eigensystem(-0.1, 0.2), DomainError);
}

TEST_CASE("eigensystem identities over the parameter grid", "[hybrid][property]") {
    for (int ig = 1; ig <= 50; ++ig) {
        const double g = 0.01 * ig;
        for (int id = -100; id <= 100; ++id) {
            const double d = 0.01 * id;
            const auto e = hybrid_eigensystem(g, d);
            INFO("g " << g << " D " << d);
            const double a2 = e.alpha * e.alpha, b2 = e.beta * e.beta;
            const double c2 = e.gamma_c * e.gamma_c, d2 = e.delta * e.delta;
            CHECK(std::abs(a2 + b2 - 1.0) <= 1e-12);
            CHECK(std::abs(c2 + d2 - 1.0) <= 1e-12);
            CHECK(std::abs(a2 - d2) <= 1e-12);
            CHECK(std::abs(b2 - c2) <= 1e-12);
            CHECK(std::abs(b2 + d2 - 1.0) <= 1e-12);
            CHECK(std::abs(e.alpha * e.gamma_c + e.beta * e.delta) <= 1e-12);
            // Eigenvector equations of [[1 + D, g], [g, 1]].
            CHECK(std::abs((1.0 + d) * e.alpha + g * e.beta - e.eps1 * e.alpha) <= 1e-12);
            CHECK(std::abs(g * e.alpha + e.beta - e.eps1 * e.beta) <= 1e-12);
            CHECK(std::abs((1.0 + d) * e.gamma_c + g * e.delta - e.eps2 * e.gamma_c) <= 1e-12);
            CHECK(std::abs(g * e.gamma_c + e.delta - e.eps2 * e.delta) <= 1e-12);
            const auto r = global_rates(e, 0.37);
            CHECK(std::abs(r.from1 + r.from2 - 0.37) <= 1e-12);
            CHECK(ground_rate_from_rates(e, 0.01) == Approx(ground_rate_initial(g, d, 0.01)).epsilon(1e-12));
        }
    }
}

TEST_CASE("global rates and populations", "[hybrid]") {
    const auto e = hybrid_eigensystem(0.1, -0.25);
    const auto r = global_rates(e, 0.01);
    CHECK(r.from1 == Approx(0.0010956).margin(1e-7));
    CHECK(r.from2 == Approx(0.0089044).margin(1e-7));
    const auto p0 = global_populations(e, 0.01, 0.0);
    CHECK(p0.rho11 + p0.rho22 == Approx(1.0));
    CHECK(p0.rho00 == Approx(0.0).margin(1e-15));
    const auto p = global_populations(e, 0.01, 200.0);
    CHECK(p.rho11 == Approx(e.alpha * e.alpha * std::exp(-r.from1 * 200.0)));
    CHECK(p.rho22 == Approx(e.beta * e.beta * std::exp(-r.from2 * 200.0)));
    CHECK_THROWS_AS(global_rates(e, -1.0), DomainError);
    CHECK_THROWS_AS(global_populations(e, 0.01, -1.0), DomainError);
}

TEST_CASE("ground rate examples", "[hybrid]") {
    CHECK(ground_rate_initial(0.1, 0.0, 0.02) == Approx(0.01));
    CHECK(ground_rate_initial(0.1, 0.2, 0.02) == Approx(0.005));
    CHECK_THROWS_AS(ground_rate_initial(0.0, 0.1, 0.02), DomainError);
}

TEST_CASE("local rate examples", "[hybrid]") {
    CHECK(local_rate(0.0, -0.25, 1.0).value == 0.0);
    CHECK(local_rate(0.1, -0.25, 1.0).value == Approx(0.16));
    const auto l = local_rate(0.1, -0.1, 1.0);
    CHECK(l.value == Approx(1.0));
    CHECK_FALSE(l.valid);
    CHECK(local_rate(0.1, -0.25, 0.01).valid);
    CHECK_THROWS_AS(local_rate(0.1, 0.0, 1.0), DomainError);
}

TEST_CASE("isolated pair", "[hybrid]") {
    CHECK(isolated_populations(0.1, -0.25, 0.0) == Approx(1.0));
    // Minimum of the Rabi oscillation: D^2 / theta^2.
    const double th = std::hypot(0.25, 0.2);
    CHECK(isolated_populations(0.1, -0.25, 3.141592653589793 / th) == Approx(0.0625 / (th * th)));
    for (double d : {-0.25, -0.1}) {
        const auto spec = pair_spec(0.1, d, 40, 0.0);
        const auto e = hybrid_eigensystem(0.1, d);
        const double t_end = 50.0 / e.theta;
        const auto traj = evolve_hybrid(spec, {t_end, 0.01, 10});
        double worst = 0.0, drift11 = 0.0, drift22 = 0.0;
        for (std::size_t i = 0; i < traj.samples(); ++i) {
            worst = std::max(worst, std::abs(traj.p_qubit[i] - isolated_populations(0.1, d, traj.times[i])));
            drift11 = std::max(drift11, std::abs(traj.rho11_tilde[i] - traj.rho11_tilde[0]));
            drift22 = std::max(drift22, std::abs(traj.rho22_tilde[i] - traj.rho22_tilde[0]));
        }
        CHECK(worst <= 1e-8);
        CHECK(drift11 <= 1e-8);
        CHECK(drift22 <= 1e-8);
        CHECK(traj.rho11_tilde[0] == Approx(e.alpha * e.alpha));
    }
}

TEST_CASE("hybrid evolution agrees with exact diagonalization", "[hybrid]") {
    for (std::size_t n : {1ul, 3ul, 8ul}) {
        auto spec = pair_spec(0.1, -0.2, n, 0.1, 60 + n);
        if (n == 8) {
            spec.bath.internal_coupling_dist = InternalCouplingDist::uniform;
            spec.bath.kappa_max = 0.02;
        }
        const auto real = sample_bath(spec.bath);
        const auto m = static_cast<Eigen::Index>(n + 2);
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m, m);
        h(0, 0) = 1.0 + spec.detuning();
        h(1, 1) = 1.0;
        h(0, 1) = h(1, 0) = spec.g_bar;
        for (std::size_t i = 0; i < n; ++i) {
            const auto a = static_cast<Eigen::Index>(i + 2);
            h(a, a) = real.omegas[i];
            h(1, a) = h(a, 1) = real.gammas[i];
            for (std::size_t j = 0; j < n; ++j)
                if (real.kappas && i != j) h(a, static_cast<Eigen::Index>(j + 2)) = (*real.kappas)(i, j);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
        const auto& v = es.eigenvectors();
        const auto traj = evolve_hybrid(spec, real, {40.0, 1e-3, 400});
        double worst = 0.0;
        for (std::size_t s = 0; s < traj.samples(); ++s) {
            cplx cq = 0.0, cc = 0.0;
            for (Eigen::Index k = 0; k < m; ++k) {
                const cplx ph = std::polar(1.0, -es.eigenvalues()(k) * traj.times[s]);
                cq += v(0, k) * v(0, k) * ph;
                cc += v(1, k) * v(0, k) * ph;
            }
            worst = std::max(worst, std::abs(traj.p_qubit[s] - std::norm(cq)));
            worst = std::max(worst, std::abs(traj.p_cavity[s] - std::norm(cc)));
        }
        CHECK(worst <= 1e-8);
        for (double nrm : traj.norm) CHECK(nrm == Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("hybrid spec validation", "[hybrid]") {
    auto spec = pair_spec(0.1, -0.2, 10, 0.01);
    spec.bath.center = 1.2;
    CHECK_THROWS_AS(evolve_hybrid(spec, {1.0, 0.1, 1}), DomainError);
    spec = pair_spec(-0.1, -0.2, 10, 0.01);
    CHECK_THROWS_AS(spec.validate(), DomainError);
    spec = pair_spec(0.1, -1.5, 10, 0.01);
    CHECK_THROWS_AS(spec.validate(), DomainError);
}

TEST_CASE("ensemble members and averaging", "[hybrid]") {
    const auto spec = pair_spec(0.1, -0.25, 200, 0.01, 77);
    const auto m0 = ensemble_member(spec.bath, 0);
    CHECK(m0.omegas == sample_bath(spec.bath).omegas);
    const auto m1 = ensemble_member(spec.bath, 1);
    CHECK(m1.omegas != m0.omegas);

    std::vector<HybridTrajectory> runs{evolve_hybrid(spec, m0, {5.0, 0.05, 10}), evolve_hybrid(spec, m1, {5.0, 0.05, 10})};
    const auto avg = average(runs);
    for (std::size_t i = 0; i < avg.samples(); ++i) {
        CHECK(avg.p_qubit[i] == Approx(0.5 * (runs[0].p_qubit[i] + runs[1].p_qubit[i])));
        CHECK(avg.ground(i) == Approx(0.5 * (runs[0].ground(i) + runs[1].ground(i))).margin(1e-15));
    }
    CHECK_THROWS_AS(average(std::span<const HybridTrajectory>{}), DomainError);
}

TEST_CASE("ground rate estimator", "[hybrid]") {
    // No bath: nothing reaches the ground state.
    const auto closed = estimate_initial_ground_rate(pair_spec(0.1, 0.1, 20, 0.0));
    CHECK(std::abs(closed.rate) <= 1e-10);
    CHECK(closed.period == Approx(2 * 3.141592653589793 / std::hypot(0.1, 0.2)));
    CHECK_THROWS_AS(estimate_initial_ground_rate(pair_spec(0.1, 0.1, 20, 0.0), 0), DomainError);
}
