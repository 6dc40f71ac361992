// numerics.hpp - complex linear algebra used by the packet combiner
//
// Unitary block DFT (U_T kron I_N), per-bin channel frequency response of a
// circular MIMO channel, Cholesky-based Hermitian inversion and numerical rank.
// Everything here is stateless apart from a thread-local cache of DFT plans.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tpc {

using cplx = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

struct SingularMatrixError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A vector made of `num_blocks` consecutive blocks of `block_size` entries.
/// Holds y^(k), y_f^(k), s, s_f and friends: block i is channel use (or bin) i.
class BlockVector {
public:
    BlockVector() = default;
    BlockVector(std::size_t block_size, std::size_t num_blocks)
        : block_size_(block_size), num_blocks_(num_blocks),
          data_(ComplexVector::Zero(static_cast<Eigen::Index>(block_size * num_blocks))) {
        if (block_size == 0 || num_blocks == 0)
            throw std::invalid_argument("BlockVector: dimensions must be positive");
    }
    BlockVector(std::size_t block_size, std::size_t num_blocks, ComplexVector data)
        : block_size_(block_size), num_blocks_(num_blocks), data_(std::move(data)) {
        if (block_size == 0 || num_blocks == 0)
            throw std::invalid_argument("BlockVector: dimensions must be positive");
        if (static_cast<std::size_t>(data_.size()) != block_size * num_blocks)
            throw std::invalid_argument("BlockVector: length != block_size * num_blocks");
    }

    std::size_t block_size() const { return block_size_; }
    std::size_t num_blocks() const { return num_blocks_; }
    std::size_t size() const { return block_size_ * num_blocks_; }

    auto block(std::size_t i) {
        return data_.segment(static_cast<Eigen::Index>(i * block_size_),
                             static_cast<Eigen::Index>(block_size_));
    }
    auto block(std::size_t i) const {
        return data_.segment(static_cast<Eigen::Index>(i * block_size_),
                             static_cast<Eigen::Index>(block_size_));
    }
    cplx& at(std::size_t row, std::size_t blk) {
        return data_[static_cast<Eigen::Index>(blk * block_size_ + row)];
    }
    cplx at(std::size_t row, std::size_t blk) const {
        return data_[static_cast<Eigen::Index>(blk * block_size_ + row)];
    }

    ComplexVector& data() { return data_; }
    const ComplexVector& data() const { return data_; }

private:
    std::size_t block_size_ = 0;
    std::size_t num_blocks_ = 0;
    ComplexVector data_;
};

namespace detail {

// Twiddle table exp(-j 2 pi m / T); plans are cached per thread.
class DftPlan {
public:
    explicit DftPlan(std::size_t n) : n_(n), twiddle_(n) {
        for (std::size_t m = 0; m < n; ++m)
            twiddle_[m] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(m) /
                                              static_cast<double>(n));
        pow2_ = (n & (n - 1)) == 0;
    }

    // In-place unnormalized forward (sign = -1) or inverse (sign = +1) transform.
    void transform(std::span<cplx> x, bool inverse) const {
        if (pow2_)
            radix2(x, inverse);
        else
            direct(x, inverse);
    }

private:
    cplx w(std::size_t m, bool inverse) const {
        const cplx t = twiddle_[m % n_];
        return inverse ? std::conj(t) : t;
    }

    void direct(std::span<cplx> x, bool inverse) const {
        std::vector<cplx> out(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            cplx acc = 0.0;
            std::size_t idx = 0;
            for (std::size_t m = 0; m < n_; ++m) {
                acc += w(idx, inverse) * x[m];
                idx += i;
                if (idx >= n_) idx -= n_;
            }
            out[i] = acc;
        }
        std::copy(out.begin(), out.end(), x.begin());
    }

    void radix2(std::span<cplx> x, bool inverse) const {
        const std::size_t n = n_;
        for (std::size_t i = 1, j = 0; i < n; ++i) {
            std::size_t bit = n >> 1;
            for (; j & bit; bit >>= 1) j ^= bit;
            j ^= bit;
            if (i < j) std::swap(x[i], x[j]);
        }
        for (std::size_t len = 2; len <= n; len <<= 1) {
            const std::size_t stride = n / len;
            for (std::size_t start = 0; start < n; start += len) {
                for (std::size_t k = 0; k < len / 2; ++k) {
                    const cplx t = w(k * stride, inverse) * x[start + k + len / 2];
                    const cplx u = x[start + k];
                    x[start + k] = u + t;
                    x[start + k + len / 2] = u - t;
                }
            }
        }
    }

    std::size_t n_;
    std::vector<cplx> twiddle_;
    bool pow2_ = false;
};

inline const DftPlan& plan_for(std::size_t n) {
    thread_local std::map<std::size_t, std::unique_ptr<DftPlan>> cache;
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<DftPlan>(n);
    return *slot;
}

inline BlockVector block_transform(const BlockVector& v, std::size_t T, std::size_t N,
                                   bool inverse) {
    if (T == 0 || N == 0 || v.num_blocks() != T || v.block_size() != N)
        throw std::invalid_argument("dft_block: vector is not T blocks of size N");
    const auto& plan = plan_for(T);
    const double scale = 1.0 / std::sqrt(static_cast<double>(T));
    BlockVector out(N, T);
    std::vector<cplx> lane(T);
    for (std::size_t r = 0; r < N; ++r) {
        for (std::size_t i = 0; i < T; ++i) lane[i] = v.at(r, i);
        plan.transform(lane, inverse);
        for (std::size_t i = 0; i < T; ++i) out.at(r, i) = lane[i] * scale;
    }
    return out;
}

}  // namespace detail

/// Applies U_{T,N} = U_T kron I_N: a unitary DFT across the T blocks,
/// independently for each of the N lanes.
inline BlockVector dft_block(const BlockVector& v, std::size_t T, std::size_t N) {
    return detail::block_transform(v, T, N, false);
}

/// Applies U_{T,N}^H, the inverse of dft_block.
inline BlockVector idft_block(const BlockVector& v, std::size_t T, std::size_t N) {
    return detail::block_transform(v, T, N, true);
}

/// Per-bin frequency response Lambda_i = sum_l H_l exp(-j 2 pi i l / T).
inline std::vector<ComplexMatrix> channel_frequency_response(std::span<const ComplexMatrix> taps,
                                                             std::size_t T) {
    if (taps.empty()) throw std::invalid_argument("channel_frequency_response: no taps");
    if (taps.size() > T)
        throw std::invalid_argument("channel_frequency_response: L > T (cyclic prefix too short)");
    const auto rows = taps.front().rows();
    const auto cols = taps.front().cols();
    for (const auto& h : taps)
        if (h.rows() != rows || h.cols() != cols)
            throw std::invalid_argument("channel_frequency_response: tap dimensions differ");

    std::vector<ComplexMatrix> lambda(T, ComplexMatrix::Zero(rows, cols));
    for (std::size_t i = 0; i < T; ++i) {
        for (std::size_t l = 0; l < taps.size(); ++l) {
            const double phase = -2.0 * std::numbers::pi *
                                 static_cast<double>((i * l) % T) / static_cast<double>(T);
            lambda[i] += taps[l] * std::polar(1.0, phase);
        }
    }
    return lambda;
}

/// Inverse of a Hermitian positive-definite matrix through an LL^H
/// factorization. A pivot below 1e-14 * trace(A) is treated as singular.
inline ComplexMatrix hermitian_inverse(const ComplexMatrix& a) {
    if (a.rows() != a.cols() || a.rows() == 0)
        throw std::invalid_argument("hermitian_inverse: matrix must be square and non-empty");
    const Eigen::Index n = a.rows();
    const double trace = a.diagonal().real().sum();
    const double threshold = 1e-14 * std::abs(trace);
    if (!(trace > 0.0) || !std::isfinite(trace))
        throw SingularMatrixError("hermitian_inverse: non-positive trace");

    ComplexMatrix l = ComplexMatrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double pivot = a(j, j).real();
        for (Eigen::Index k = 0; k < j; ++k) pivot -= std::norm(l(j, k));
        if (!(pivot > threshold))
            throw SingularMatrixError("hermitian_inverse: matrix is not positive definite");
        const double ljj = std::sqrt(pivot);
        l(j, j) = ljj;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            cplx acc = a(i, j);
            for (Eigen::Index k = 0; k < j; ++k) acc -= l(i, k) * std::conj(l(j, k));
            l(i, j) = acc / ljj;
        }
    }

    // inv(A) = inv(L)^H inv(L); invert the lower-triangular factor column by column.
    ComplexMatrix linv = ComplexMatrix::Zero(n, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        linv(c, c) = 1.0 / l(c, c);
        for (Eigen::Index i = c + 1; i < n; ++i) {
            cplx acc = 0.0;
            for (Eigen::Index k = c; k < i; ++k) acc -= l(i, k) * linv(k, c);
            linv(i, c) = acc / l(i, i);
        }
    }
    ComplexMatrix inv = linv.adjoint() * linv;
    // Symmetrize away rounding so downstream Hermitian checks hold exactly.
    return (0.5 * (inv + inv.adjoint())).eval();
}

/// Numerical rank of a Hermitian PSD matrix: eigenvalues above rel_tol * lambda_max.
inline int numerical_rank(const ComplexMatrix& a, double rel_tol = 1e-10) {
    if (a.size() == 0) return 0;
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(a, Eigen::EigenvaluesOnly);
    const RealVector& ev = es.eigenvalues();
    const double lmax = ev.cwiseAbs().maxCoeff();
    if (!(lmax > 0.0)) return 0;
    int rank = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev[i] > rel_tol * lmax) ++rank;
    return rank;
}

/// Hermitian PSD square root via eigendecomposition.
inline ComplexMatrix hermitian_sqrt(const ComplexMatrix& a) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(a);
    RealVector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

inline bool all_finite(const ComplexMatrix& m) {
    return m.real().allFinite() && m.imag().allFinite();
}

}  // namespace tpc
