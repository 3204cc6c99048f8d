#pragma once

// Static real-symmetric propagation matrix of the single-excitation sector and
// its fixed-step RK4 integrator.
//
// The matrix has a star (arrowhead) part, one hub row/column plus a diagonal,
// and an optional dense symmetric block over a contiguous index range. The
// plain qubit-bath problem uses the qubit as hub; the qubit-cavity-bath hybrid
// uses the cavity as hub with the qubit as one more leaf.

#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "qdecay/bath.hpp"
#include "qdecay/error.hpp"
#include "qdecay/parallel.hpp"

namespace qdecay {

using cplx = std::complex<double>;

class PropagationMatrix {
public:
    /// diagonal[i] is A_ii; couplings[i] is A_{i,hub} for i != hub (couplings[hub] is ignored).
    PropagationMatrix(std::size_t hub, std::vector<double> diagonal, std::vector<double> couplings,
                      std::shared_ptr<const KappaMatrix> block = nullptr, std::size_t block_begin = 0)
        : hub_(hub), diagonal_(std::move(diagonal)), couplings_(std::move(couplings)),
          block_(std::move(block)), block_begin_(block_begin),
          band_edges_(make_band_edges(block_ ? block_->size() : 0)) {
        if (diagonal_.size() != couplings_.size())
            throw DomainError("propagation matrix: diagonal and coupling sizes differ");
        if (hub_ >= diagonal_.size()) throw DomainError("propagation matrix: hub index out of range");
        couplings_[hub_] = 0.0;
        if (block_ && block_begin_ + block_->size() > diagonal_.size())
            throw DomainError("propagation matrix: dense block exceeds dimension");
        if (block_ && block_begin_ <= hub_ && hub_ < block_begin_ + block_->size())
            throw DomainError("propagation matrix: hub must lie outside the dense block");
    }

    std::size_t dim() const noexcept { return diagonal_.size(); }
    std::size_t hub() const noexcept { return hub_; }
    std::span<const double> diagonal() const noexcept { return diagonal_; }
    std::span<const double> couplings() const noexcept { return couplings_; }
    bool has_block() const noexcept { return static_cast<bool>(block_); }
    const KappaMatrix* block() const noexcept { return block_.get(); }
    std::size_t block_begin() const noexcept { return block_begin_; }

    double element(std::size_t i, std::size_t j) const {
        if (i == j) return diagonal_[i];
        if (i == hub_) return couplings_[j];
        if (j == hub_) return couplings_[i];
        if (block_ && i >= block_begin_ && j >= block_begin_ && i < block_begin_ + block_->size() &&
            j < block_begin_ + block_->size())
            return (*block_)(i - block_begin_, j - block_begin_);
        return 0.0;
    }

    /// Upper bound on the spectral radius: max|A_ii| + ||star couplings||_2 +
    /// max row sum of the dense block (triangle inequality on the three parts).
    double spectral_bound() const {
        double dmax = 0.0;
        for (double d : diagonal_) dmax = std::max(dmax, std::abs(d));
        const double star = std::sqrt(sum_of_squares(couplings_));
        const double dense = block_ ? block_->max_abs_row_sum() : 0.0;
        return dmax + star + dense;
    }

    /// out = A * in.
    void apply(std::span<const cplx> in, std::span<cplx> out, WorkerPool& pool) const {
        check_dims(in.size(), out.size());
        const std::size_t n = dim();
        const cplx hub_in = in[hub_];
        const std::size_t chunks = chunk_count(n);
        std::vector<cplx> partial(chunks);
        pool.run(chunks, [&](std::size_t c) {
            const std::size_t lo = c * kChunkSize, hi = std::min(n, lo + kChunkSize);
            cplx acc = 0.0;
            for (std::size_t i = lo; i < hi; ++i) {
                out[i] = diagonal_[i] * in[i] + couplings_[i] * hub_in;
                acc += couplings_[i] * in[i];
            }
            partial[c] = acc;
        });
        cplx dot = 0.0;
        for (const cplx& p : partial) dot += p;
        out[hub_] = diagonal_[hub_] * hub_in + dot;
        if (block_) add_block_product(in, out, pool);
    }

private:
    void check_dims(std::size_t a, std::size_t b) const {
        if (a != dim() || b != dim()) throw DomainError("propagation matrix: state dimension mismatch");
    }

    // out[b + i] += sum_j K_ij in[b + j] in one pass over the packed upper
    // triangle: row i gives the dot product for output i and scatters its
    // transpose into outputs j > i. Rows are split into a fixed number of bands
    // of similar size; each band scatters into its own buffer and the buffers
    // are added in band order, so the sums do not depend on the worker count.
    void add_block_product(std::span<const cplx> in, std::span<cplx> out, WorkerPool& pool) const {
        const auto& k = *block_;
        const std::size_t m = k.size();
        if (m < 2) return;
        // split real and imaginary parts so the row loops vectorize
        std::vector<double> xre(m), xim(m);
        for (std::size_t i = 0; i < m; ++i) {
            xre[i] = in[block_begin_ + i].real();
            xim[i] = in[block_begin_ + i].imag();
        }
        const std::size_t bands = band_edges_.size() - 1;
        std::vector<double> scatter(2 * m * bands, 0.0), gather(2 * m, 0.0);
        pool.run(bands, [&](std::size_t b) {
            double* sre = scatter.data() + 2 * m * b;
            double* sim = sre + m;
            for (std::size_t i = band_edges_[b]; i < band_edges_[b + 1]; ++i) {
                double re = 0.0, im = 0.0;
                row_pass(k.upper_row(i).data(), xre.data() + i + 1, xim.data() + i + 1, sre + i + 1, sim + i + 1,
                         m - i - 1, xre[i], xim[i], re, im);
                gather[i] = re;
                gather[m + i] = im;
            }
        });
        cplx* y = out.data() + block_begin_;
        for (std::size_t i = 0; i < m; ++i) {
            double re = gather[i], im = gather[m + i];
            for (std::size_t b = 0; b < bands; ++b) {
                re += scatter[2 * m * b + i];
                im += scatter[2 * m * b + m + i];
            }
            y[i] += cplx(re, im);
        }
    }

    // Dot products of row r with (ar, ai) and t += r * (xr, xi). The simd
    // reduction order is fixed at compile time, not by the worker count.
    static void row_pass(const double* __restrict r, const double* __restrict ar, const double* __restrict ai,
                         double* __restrict tr, double* __restrict ti, std::size_t len, double xr, double xi,
                         double& re, double& im) {
        double sr = 0.0, si = 0.0;
#pragma omp simd reduction(+ : sr, si)
        for (std::size_t j = 0; j < len; ++j) {
            sr += r[j] * ar[j];
            si += r[j] * ai[j];
            tr[j] += r[j] * xr;
            ti[j] += r[j] * xi;
        }
        re = sr;
        im = si;
    }

    // Row ranges with about equal shares of the triangle.
    static std::vector<std::size_t> make_band_edges(std::size_t m) {
        constexpr std::size_t kBands = 16;
        std::vector<std::size_t> edges{0};
        if (m < 2) {
            edges.push_back(m);
            return edges;
        }
        const double total = 0.5 * static_cast<double>(m) * static_cast<double>(m - 1);
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            acc += static_cast<double>(m - i - 1);
            const auto next = static_cast<double>(edges.size());
            if (acc >= total * next / kBands && edges.size() < kBands) edges.push_back(i + 1);
        }
        if (edges.back() != m) edges.push_back(m);
        return edges;
    }

    std::size_t hub_;
    std::vector<double> diagonal_;
    std::vector<double> couplings_;
    std::shared_ptr<const KappaMatrix> block_;
    std::size_t block_begin_;
    std::vector<std::size_t> band_edges_;
};

/// Classical fourth-order Runge-Kutta for dc/dt = -i A c with a fixed step.
///
/// For a linear autonomous right-hand side the four RK4 stages collapse to the
/// degree-4 Taylor polynomial of exp(-i A dt); the step is evaluated in nested
/// form c <- c + h M (c + h/2 M (c + h/3 M (c + h/4 M c))), M = -i A.
/// Without a dense block each nesting level is one fused pass that updates the
/// work vector in place and accumulates the hub dot product for the next level.
class Rk4Stepper {
public:
    Rk4Stepper(const PropagationMatrix& a, double dt, WorkerPool& pool)
        : a_(a), dt_(dt), pool_(pool), work_(a.dim()) {
        if (!(dt > 0.0)) throw DomainError("time step must be positive");
        partial_.resize(chunk_count(a.dim()));
        if (a.has_block()) product_.resize(a.dim());
    }

    /// Largest stable step on the imaginary axis, 2.8 / lambda_max.
    static double stability_limit(const PropagationMatrix& a) {
        const double lam = a.spectral_bound();
        return lam > 0.0 ? 2.8 / lam : INFINITY;
    }

    double dt() const noexcept { return dt_; }

    void step(std::span<cplx> state) {
        if (state.size() != a_.dim()) throw DomainError("RK4 step: state dimension mismatch");
        if (a_.has_block()) {
            step_general(state);
        } else {
            step_star(state);
        }
    }

private:
    static constexpr double kLevels[4] = {1.0 / 4.0, 1.0 / 3.0, 1.0 / 2.0, 1.0};

    void step_general(std::span<cplx> y) {
        std::copy(y.begin(), y.end(), work_.begin());
        for (double level : kLevels) {
            a_.apply(work_, product_, pool_);
            const cplx factor(0.0, -level * dt_);
            for (std::size_t i = 0; i < y.size(); ++i) work_[i] = y[i] + factor * product_[i];
        }
        std::copy(work_.begin(), work_.end(), y.begin());
    }

    void step_star(std::span<cplx> y) {
        const std::size_t n = y.size();
        const std::size_t hub = a_.hub();
        const double* d = a_.diagonal().data();
        const double* u = a_.couplings().data();
        cplx* w = work_.data();
        const cplx* yv = y.data();

        std::copy(y.begin(), y.end(), work_.begin());
        cplx dot = reduce_dot(w);
        for (double level : kLevels) {
            const double h = level * dt_;
            const cplx w_hub = w[hub];
            const cplx new_hub = yv[hub] + cplx(0.0, -h) * (d[hub] * w_hub + dot);
            const std::size_t chunks = chunk_count(n);
            pool_.run(chunks, [&](std::size_t c) {
                const std::size_t lo = c * kChunkSize, hi = std::min(n, lo + kChunkSize);
                double acc_re = 0.0, acc_im = 0.0;
                const double hr = w_hub.real(), hi_ = w_hub.imag();
                for (std::size_t i = lo; i < hi; ++i) {
                    // m = d_i w_i + u_i w_hub; w_i <- y_i - i h m
                    const double mr = d[i] * w[i].real() + u[i] * hr;
                    const double mi = d[i] * w[i].imag() + u[i] * hi_;
                    const double nr = yv[i].real() + h * mi;
                    const double ni = yv[i].imag() - h * mr;
                    w[i] = cplx(nr, ni);
                    acc_re += u[i] * nr;
                    acc_im += u[i] * ni;
                }
                partial_[c] = cplx(acc_re, acc_im);
            });
            w[hub] = new_hub;
            dot = 0.0;
            for (const cplx& p : partial_) dot += p;
        }
        std::copy(work_.begin(), work_.end(), y.begin());
    }

    cplx reduce_dot(const cplx* w) {
        const std::size_t n = a_.dim();
        const double* u = a_.couplings().data();
        pool_.run(chunk_count(n), [&](std::size_t c) {
            const std::size_t lo = c * kChunkSize, hi = std::min(n, lo + kChunkSize);
            double re = 0.0, im = 0.0;
            for (std::size_t i = lo; i < hi; ++i) {
                re += u[i] * w[i].real();
                im += u[i] * w[i].imag();
            }
            partial_[c] = cplx(re, im);
        });
        cplx dot = 0.0;
        for (const cplx& p : partial_) dot += p;
        return dot;
    }

    const PropagationMatrix& a_;
    double dt_;
    WorkerPool& pool_;
    std::vector<cplx> work_;
    std::vector<cplx> product_;
    std::vector<cplx> partial_;
};

}  // namespace qdecay
