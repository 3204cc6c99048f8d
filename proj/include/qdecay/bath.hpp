#pragma once

// Oscillator bath: statistical description, seeded sampling, and the
// characteristic rates derived from a sampled realization.
//
// Units throughout: hbar = 1 and the reference splitting (qubit Omega, or the
// cavity Omega0 in hybrid runs) = 1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <memory>
#include <numbers>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "qdecay/error.hpp"
#include "qdecay/rng.hpp"

namespace qdecay {

enum class CouplingDist { uniform, fixed };
enum class FrequencyDist { uniform, degenerate, evenly_spaced };
enum class InternalCouplingDist { none, uniform, fixed };

inline constexpr std::size_t kDefaultDenseGuard = 20000;

struct BathSpec {
    std::size_t n_oscillators = 0;
    double center = 1.0;
    double width = 0.0;  // full bandwidth Delta-omega
    CouplingDist qubit_coupling_dist = CouplingDist::uniform;
    double gamma_max = 0.0;
    FrequencyDist frequency_dist = FrequencyDist::uniform;
    double omega_fix = 1.0;  // used by FrequencyDist::degenerate
    InternalCouplingDist internal_coupling_dist = InternalCouplingDist::none;
    double kappa_max = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> partition{1.0};
    std::size_t dense_guard = kDefaultDenseGuard;

    void validate() const {
        if (!(width >= 0.0)) throw DomainError("bath width must be >= 0");
        if (!(gamma_max >= 0.0)) throw DomainError("gamma_max must be >= 0");
        if (!(kappa_max >= 0.0)) throw DomainError("kappa_max must be >= 0");
        if (!std::isfinite(center) || !std::isfinite(omega_fix))
            throw DomainError("bath frequencies must be finite");
        if (partition.empty()) throw DomainError("partition must list at least one bath");
        double sum = 0.0;
        for (double f : partition) {
            if (!(f >= 0.0 && f <= 1.0)) throw DomainError("partition fractions must lie in [0, 1]");
            sum += f;
        }
        if (std::abs(sum - 1.0) > 1e-12) throw DomainError("partition fractions must sum to 1");
    }

    bool has_internal_couplings() const {
        return internal_coupling_dist != InternalCouplingDist::none;
    }

    /// nu0 = N / Delta-omega.
    double mode_density() const {
        if (!(width > 0.0)) throw DomainError("mode density undefined for zero bandwidth");
        return static_cast<double>(n_oscillators) / width;
    }
};

/// Symmetric N x N matrix with zero diagonal, stored as the strict upper
/// triangle in row-major order.
class KappaMatrix {
public:
    KappaMatrix() = default;
    explicit KappaMatrix(std::size_t n) : n_(n), data_(n < 2 ? 0 : n * (n - 1) / 2, 0.0) {}

    std::size_t size() const noexcept { return n_; }

    /// Offset of element (i, i+1) in the packed storage.
    std::size_t row_offset(std::size_t i) const noexcept {
        return i * (2 * n_ - i - 1) / 2;
    }

    /// Row i of the strict upper triangle: elements (i, i+1) ... (i, n-1).
    std::span<const double> upper_row(std::size_t i) const noexcept {
        return {data_.data() + row_offset(i), n_ - i - 1};
    }
    std::span<double> upper_row(std::size_t i) noexcept {
        return {data_.data() + row_offset(i), n_ - i - 1};
    }

    double operator()(std::size_t i, std::size_t j) const noexcept {
        if (i == j) return 0.0;
        if (i > j) std::swap(i, j);
        return data_[row_offset(i) + (j - i - 1)];
    }

    std::span<const double> packed() const noexcept { return data_; }

    /// max_i sum_j |kappa_ij|.
    double max_abs_row_sum() const {
        std::vector<double> rows(n_, 0.0);
        for (std::size_t i = 0; i + 1 < n_; ++i) {
            const auto row = upper_row(i);
            for (std::size_t k = 0; k < row.size(); ++k) {
                const double a = std::abs(row[k]);
                rows[i] += a;
                rows[i + 1 + k] += a;
            }
        }
        return rows.empty() ? 0.0 : *std::max_element(rows.begin(), rows.end());
    }

    double mean_offdiagonal() const {
        if (data_.empty()) return 0.0;
        return std::accumulate(data_.begin(), data_.end(), 0.0) / static_cast<double>(data_.size());
    }

private:
    std::size_t n_ = 0;
    std::vector<double> data_;
};

/// One sampled draw of the bath. Immutable after construction; the internal
/// coupling matrix is shared read-only between copies.
struct BathRealization {
    std::vector<double> omegas;
    std::vector<double> gammas;
    std::shared_ptr<const KappaMatrix> kappas;  // null when no internal couplings
    std::vector<std::size_t> labels;            // bath index per oscillator, 0-based
    BathSpec spec;

    std::size_t size() const noexcept { return omegas.size(); }
    std::size_t bath_count() const noexcept { return spec.partition.size(); }
};

struct CircuitParams {
    double R = 0.0;
    double Z_Q = 0.0;
    double C_g = 0.0;
    double C_Q = 0.0;
    double Z_0 = 0.0;
    double Q_factor = 0.0;

    double C_sigma() const noexcept { return C_g + C_Q; }
};

/// Block sizes from partition fractions, largest remainder so they sum to n.
inline std::vector<std::size_t> partition_sizes(std::size_t n, std::span<const double> fractions) {
    std::vector<std::size_t> sizes(fractions.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < fractions.size(); ++k) {
        const double exact = fractions[k] * static_cast<double>(n);
        sizes[k] = static_cast<std::size_t>(std::floor(exact));
        assigned += sizes[k];
        remainders.emplace_back(exact - std::floor(exact), k);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < n && r < remainders.size(); ++r, ++assigned)
        ++sizes[remainders[r].second];
    return sizes;
}

/// Samples a bath realization from its spec.
///
/// Oscillators are laid out bath by bath (contiguous label blocks sized by the
/// partition); within each block the frequencies are sorted ascending. Each
/// block draws its own frequencies over the full support, so every bath sees
/// the same spectral distribution. Frequencies, qubit couplings and internal
/// couplings come from independent substreams of spec.seed. Internal couplings
/// are drawn row-major over the strict upper triangle and mirrored; pairs in
/// different baths are zeroed after drawing, so the draw sequence does not
/// depend on the partition.
inline BathRealization sample_bath(const BathSpec& spec) {
    spec.validate();
    const std::size_t n = spec.n_oscillators;
    if (spec.has_internal_couplings() && n > spec.dense_guard)
        throw MemoryGuardError(n, spec.dense_guard);

    BathRealization real;
    real.spec = spec;
    real.omegas.resize(n);
    real.gammas.resize(n);
    real.labels.resize(n);

    const auto sizes = partition_sizes(n, spec.partition);
    auto freq_rng = make_stream(spec.seed, Stream::frequencies);
    std::size_t begin = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
        const std::size_t end = begin + sizes[k];
        const double lo = spec.center - 0.5 * spec.width;
        for (std::size_t i = begin; i < end; ++i) {
            real.labels[i] = k;
            switch (spec.frequency_dist) {
                case FrequencyDist::uniform:
                    real.omegas[i] = uniform(freq_rng, lo, lo + spec.width);
                    break;
                case FrequencyDist::degenerate:
                    real.omegas[i] = spec.omega_fix;
                    break;
                case FrequencyDist::evenly_spaced:
                    real.omegas[i] = lo + spec.width * (static_cast<double>(i - begin) + 0.5) /
                                              static_cast<double>(sizes[k]);
                    break;
            }
        }
        std::sort(real.omegas.begin() + static_cast<std::ptrdiff_t>(begin),
                  real.omegas.begin() + static_cast<std::ptrdiff_t>(end));
        begin = end;
    }

    auto gamma_rng = make_stream(spec.seed, Stream::qubit_couplings);
    for (double& g : real.gammas) {
        g = spec.qubit_coupling_dist == CouplingDist::uniform ? spec.gamma_max * uniform01(gamma_rng)
                                                              : spec.gamma_max;
    }

    if (spec.has_internal_couplings()) {
        auto kappas = std::make_shared<KappaMatrix>(n);
        auto kappa_rng = make_stream(spec.seed, Stream::internal_couplings);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            auto row = kappas->upper_row(i);
            for (std::size_t k = 0; k < row.size(); ++k) {
                const double v = spec.internal_coupling_dist == InternalCouplingDist::uniform
                                     ? spec.kappa_max * uniform01(kappa_rng)
                                     : spec.kappa_max;
                row[k] = real.labels[i] == real.labels[i + 1 + k] ? v : 0.0;
            }
        }
        real.kappas = std::move(kappas);
    }
    return real;
}

inline double sum_of_squares(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

/// Gamma0 = 2 pi nu0 <gamma^2> from the empirical second moment of the sampled
/// couplings, with nu0 = N / Delta-omega.
inline double gamma0_of(const BathRealization& real) {
    if (real.spec.frequency_dist == FrequencyDist::degenerate || !(real.spec.width > 0.0))
        throw DomainError(
            "Gamma0 undefined for a degenerate (zero-width) bath; use the collective-mode "
            "frequency lambda0_of and the cos^2(Lambda0 t) law instead");
    return 2.0 * std::numbers::pi * sum_of_squares(real.gammas) / real.spec.width;
}

/// Decay rate into one labelled sub-bath; the rates of all baths sum to gamma0_of.
inline double gamma0_of_bath(const BathRealization& real, std::size_t label) {
    if (!(real.spec.width > 0.0)) throw DomainError("Gamma0 undefined for zero bandwidth");
    double s = 0.0;
    for (std::size_t i = 0; i < real.size(); ++i)
        if (real.labels[i] == label) s += real.gammas[i] * real.gammas[i];
    return 2.0 * std::numbers::pi * s / real.spec.width;
}

/// Lambda0 = sqrt(sum gamma_i^2).
inline double lambda0_of(const BathRealization& real) { return std::sqrt(sum_of_squares(real.gammas)); }

/// Coupling scale that makes the ideal Gamma0 of the distribution equal the target.
inline double gamma_max_for_target_rate(double gamma0_target, std::size_t n, double width,
                                        CouplingDist dist) {
    if (n == 0) throw DomainError("gamma_max_for_target_rate: N must be positive");
    if (!(width > 0.0)) throw DomainError("gamma_max_for_target_rate: bandwidth must be positive");
    if (!(gamma0_target >= 0.0)) throw DomainError("gamma_max_for_target_rate: target rate must be >= 0");
    // <gamma^2> = gamma_max^2 / 3 for the uniform distribution, gamma_max^2 for fixed.
    const double second_moment_factor = dist == CouplingDist::uniform ? 3.0 : 1.0;
    return std::sqrt(second_moment_factor * gamma0_target * width /
                     (2.0 * std::numbers::pi * static_cast<double>(n)));
}

/// Mean-square qubit-oscillator coupling of a resistor bath seen through a
/// capacitive divider: <gamma^2> = (C_g/C_sigma)^2 (R/Z_Q) Omega / (2 pi nu0).
inline double couplings_from_circuit(const CircuitParams& c, double omega, double nu0) {
    if (!(c.R >= 0.0 && c.Z_Q >= 0.0 && c.C_g >= 0.0 && c.C_Q >= 0.0))
        throw DomainError("circuit parameters must be non-negative");
    if (!(c.C_sigma() > 0.0)) throw DomainError("C_g + C_Q must be positive");
    if (!(c.Z_Q > 0.0)) throw DomainError("qubit impedance Z_Q must be positive");
    if (!(nu0 > 0.0)) throw DomainError("mode density nu0 must be positive");
    const double divider = c.C_g / c.C_sigma();
    return divider * divider * (c.R / c.Z_Q) * omega / (2.0 * std::numbers::pi * nu0);
}

// Columnar text format.
//
//   index,omega,gamma,label
//   0,<omega_0>,<gamma_0>,<label_0>
//   ...
//
// Internal couplings go to a separate stream as "i,j,kappa" triplets for i < j,
// nonzero entries only. All doubles are written with 17 significant digits.

inline void write_bath_columns(std::ostream& os, const BathRealization& real) {
    os.precision(17);
    os << "index,omega,gamma,label\n";
    for (std::size_t i = 0; i < real.size(); ++i)
        os << i << ',' << real.omegas[i] << ',' << real.gammas[i] << ',' << real.labels[i] << '\n';
}

inline void write_kappa_triplets(std::ostream& os, const BathRealization& real) {
    os.precision(17);
    os << "i,j,kappa\n";
    if (!real.kappas) return;
    const auto& k = *real.kappas;
    for (std::size_t i = 0; i + 1 < k.size(); ++i) {
        const auto row = k.upper_row(i);
        for (std::size_t c = 0; c < row.size(); ++c)
            if (row[c] != 0.0) os << i << ',' << i + 1 + c << ',' << row[c] << '\n';
    }
}

/// Reads the oscillator table written by write_bath_columns. The returned
/// realization carries only N and the bath count in its spec.
inline BathRealization read_bath_columns(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "index,omega,gamma,label")
        throw DomainError("bath table: missing header 'index,omega,gamma,label'");
    BathRealization real;
    std::size_t max_label = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field[4];
        for (auto& f : field)
            if (!std::getline(row, f, ',')) throw DomainError("bath table: malformed row '" + line + "'");
        if (std::stoull(field[0]) != real.size())
            throw DomainError("bath table: indices must be consecutive from 0");
        real.omegas.push_back(std::stod(field[1]));
        real.gammas.push_back(std::stod(field[2]));
        real.labels.push_back(std::stoull(field[3]));
        max_label = std::max(max_label, real.labels.back());
    }
    real.spec.n_oscillators = real.size();
    real.spec.partition.assign(max_label + 1, 1.0 / static_cast<double>(max_label + 1));
    return real;
}

}  // namespace qdecay
