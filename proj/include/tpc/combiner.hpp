// combiner.hpp - frequency-domain soft-MMSE turbo packet combining
//
// Signal-level combining of all ARQ rounds received so far, with the unknown
// interference-plus-noise covariance re-estimated every turbo iteration.
// The multi-round filter is never formed explicitly: per bin, the round
// history is folded into the N_T x N_T accumulator
//
//     D_i = sum_u Lambda_i^(u)H Theta_u^-1 Lambda_i^(u)
//
// and the N_T-vector ytilde_{f,i} = sum_u Lambda_i^(u)H Theta_u^-1 y_{f,i}^(u).
// With M_i = (Sigma^-1 + D_i)^-1 the matrix inversion lemma gives
//
//     C_i        = D_i - D_i M_i D_i
//     Gamma_i y  = (I - D_i M_i) ytilde_{f,i}
//
// M_i is evaluated as S (I + S D_i S)^-1 S with S = Sigma^{1/2}, which stays
// well defined when some averaged symbol variance is exactly zero. Note the
// inverse is (Sigma^-1 + D_i)^-1, not (Sigma + D_i)^-1.

#pragma once

#include "llr.hpp"
#include "numerics.hpp"
#include "tx.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace tpc {

struct DegenerateEstimateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Soft symbols and their variances given a priori LLRs on the interleaved
/// code bits. var[i * N_T + t] is sigma^2_{t,i}; var_avg is diag(Sigma~).
struct SoftStats {
    BlockVector mean;    // s_bar, time domain, N_T x T
    BlockVector mean_f;  // DFT of s_bar
    std::vector<double> var;
    RealVector var_avg;
};

inline SoftStats soft_symbol_stats(std::span<const double> apriori, std::size_t n_tx,
                                   std::size_t T) {
    if (apriori.size() != 2 * n_tx * T)
        throw std::invalid_argument("soft_symbol_stats: LLR count != 2 * n_tx * T");
    SoftStats st{BlockVector(n_tx, T), {}, std::vector<double>(n_tx * T),
                 RealVector::Zero(static_cast<Eigen::Index>(n_tx))};
    for (std::size_t i = 0; i < T; ++i)
        for (std::size_t t = 0; t < n_tx; ++t) {
            const std::size_t b = 2 * (i * n_tx + t);
            const double ti = std::tanh(0.5 * clamp_llr(apriori[b]));
            const double tq = std::tanh(0.5 * clamp_llr(apriori[b + 1]));
            st.mean.at(t, i) = cplx(ti * kInvSqrt2, tq * kInvSqrt2);
            const double v = std::max(0.0, 1.0 - 0.5 * (ti * ti + tq * tq));
            st.var[i * n_tx + t] = v;
            st.var_avg[static_cast<Eigen::Index>(t)] += v;
        }
    st.var_avg /= static_cast<double>(T);
    st.mean_f = dft_block(st.mean, T, n_tx);
    return st;
}

/// Genie statistics: s_bar = s and all variances zero.
inline SoftStats perfect_soft_stats(const SymbolFrame& s) {
    const std::size_t n = s.n_tx(), T = s.length();
    return SoftStats{s.symbols, dft_block(s.symbols, T, n), std::vector<double>(n * T, 0.0),
                     RealVector::Zero(static_cast<Eigen::Index>(n))};
}

/// Theta_k = (1/T) sum_i (y_{f,i} - Lambda_i s_bar_{f,i})(.)^H
inline ComplexMatrix estimate_cci_noise_cov(const BlockVector& y_f,
                                            const std::vector<ComplexMatrix>& lambda,
                                            const BlockVector& s_bar_f) {
    const std::size_t T = y_f.num_blocks();
    const auto n_rx = static_cast<Eigen::Index>(y_f.block_size());
    if (lambda.size() != T || s_bar_f.num_blocks() != T)
        throw std::invalid_argument("estimate_cci_noise_cov: bin count mismatch");
    if (T < y_f.block_size())
        throw std::invalid_argument("estimate_cci_noise_cov: T < N_R, estimate would be singular");
    ComplexMatrix theta = ComplexMatrix::Zero(n_rx, n_rx);
    for (std::size_t i = 0; i < T; ++i) {
        const ComplexVector r = y_f.block(i) - lambda[i] * s_bar_f.block(i);
        theta.noalias() += r * r.adjoint();
    }
    theta /= static_cast<double>(T);
    return (0.5 * (theta + theta.adjoint())).eval();
}

struct CovarianceEstimate {
    ComplexMatrix theta;    // regularized estimate actually used
    ComplexMatrix inverse;
};

inline constexpr double kCovRegularization = 1e-9;

/// Adds eps * tr(Theta)/N_R * I and inverts.
inline CovarianceEstimate regularize_covariance(const ComplexMatrix& theta,
                                                double eps = kCovRegularization) {
    const double tr = theta.diagonal().real().sum();
    if (!(tr > 0.0) || !std::isfinite(tr))
        throw DegenerateEstimateError("covariance estimate has zero trace");
    CovarianceEstimate est;
    est.theta = theta;
    est.theta.diagonal().array() += eps * tr / static_cast<double>(theta.rows());
    try {
        est.inverse = hermitian_inverse(est.theta);
    } catch (const SingularMatrixError& e) {
        throw DegenerateEstimateError(e.what());
    }
    return est;
}

/// Persistent cross-round receiver memory of the proposed scheme.
///
/// The committed prefix (rounds < k) is kept apart from the live round-k
/// contribution, so refreshing Theta_k inside a round replaces the round-k
/// term instead of adding it twice.
class CombinerState {
public:
    CombinerState(std::size_t n_tx, std::size_t T)
        : n_tx_(n_tx), T_(T),
          d_prefix_(T, ComplexMatrix::Zero(static_cast<Eigen::Index>(n_tx), static_cast<Eigen::Index>(n_tx))),
          y_prefix_(n_tx, T), d_(d_prefix_), y_(y_prefix_) {}

    std::size_t n_tx() const { return n_tx_; }
    std::size_t length() const { return T_; }
    /// Number of rounds frozen into the prefix.
    int committed_rounds() const { return static_cast<int>(thetas_.size()); }

    /// D_i <- D_i^(k-1) + Lambda_i^H Theta_k^-1 Lambda_i and
    /// ytilde <- ytilde^(k-1) + Lambda^H (I kron Theta_k^-1) y_f.
    void update(const std::vector<ComplexMatrix>& lambda, const ComplexMatrix& theta_inv,
                const BlockVector& y_f) {
        if (lambda.size() != T_ || y_f.num_blocks() != T_ ||
            static_cast<std::size_t>(lambda.front().cols()) != n_tx_)
            throw std::invalid_argument("CombinerState::update: dimension mismatch");
        const bool has_prefix = committed_rounds() > 0;
        for (std::size_t i = 0; i < T_; ++i) {
            const ComplexMatrix w = theta_inv * lambda[i];
            ComplexMatrix contrib = lambda[i].adjoint() * w;
            contrib = (0.5 * (contrib + contrib.adjoint())).eval();
            const ComplexVector yc = w.adjoint() * y_f.block(i);
            if (has_prefix) {
                d_[i] = d_prefix_[i] + contrib;
                y_.block(i) = y_prefix_.block(i) + yc;
            } else {
                d_[i] = std::move(contrib);
                y_.block(i) = yc;
            }
        }
        if (has_prefix) additions_ += 2 * T_ * n_tx_ * n_tx_ + 2 * T_ * n_tx_;
        live_ = true;
    }

    /// Freezes the live round into the prefix and files Theta_k in the side table.
    void commit_round(const ComplexMatrix& theta) {
        if (!live_) throw std::logic_error("CombinerState::commit_round: no round update");
        d_prefix_ = d_;
        y_prefix_ = y_;
        thetas_.push_back(theta);
        live_ = false;
    }

    const std::vector<ComplexMatrix>& d() const { return d_; }
    const BlockVector& y_tilde() const { return y_; }
    const std::vector<ComplexMatrix>& covariance_history() const { return thetas_; }

    /// Real additions spent in the cross-round recursions.
    std::uint64_t additions() const { return additions_; }

    /// {D_i} as T N_T^2 complex plus ytilde as T N_T complex values.
    std::size_t persisted_real_values() const {
        return 2 * T_ * n_tx_ * n_tx_ + 2 * T_ * n_tx_;
    }
    /// Covariance side table: N_R^2 real values per committed round.
    std::size_t covariance_real_values() const {
        std::size_t n = 0;
        for (const auto& th : thetas_) n += static_cast<std::size_t>(th.rows() * th.rows());
        return n;
    }

private:
    std::size_t n_tx_;
    std::size_t T_;
    std::vector<ComplexMatrix> d_prefix_;
    BlockVector y_prefix_;
    std::vector<ComplexMatrix> d_;
    BlockVector y_;
    std::vector<ComplexMatrix> thetas_;
    std::uint64_t additions_ = 0;
    bool live_ = false;
};

struct CombinerOutput {
    BlockVector z;    // time-domain decision statistics, N_T x T
    BlockVector z_f;  // their DFT
    RealVector gain;          // mu_t = (C~)_{t,t}
    RealVector residual_var;  // nu_t = mu_t (1 - sigma~_t^2 mu_t)
};

/// Forward/backward soft-MMSE filtering z_f = Gamma ytilde-part - Omega s_bar_f.
inline CombinerOutput mmse_combine(const CombinerState& state, const SoftStats& soft) {
    const std::size_t n = state.n_tx(), T = state.length();
    const auto nt = static_cast<Eigen::Index>(n);
    if (soft.mean_f.num_blocks() != T || soft.mean_f.block_size() != n ||
        soft.var_avg.size() != nt)
        throw std::invalid_argument("mmse_combine: soft statistics dimension mismatch");

    const RealVector root = soft.var_avg.cwiseMax(0.0).cwiseSqrt();
    const ComplexMatrix eye = ComplexMatrix::Identity(nt, nt);

    std::vector<ComplexMatrix> c(T);
    BlockVector z_f(n, T);
    ComplexMatrix c_avg = ComplexMatrix::Zero(nt, nt);
    for (std::size_t i = 0; i < T; ++i) {
        const ComplexMatrix& d = state.d()[i];
        const ComplexMatrix q = eye + root.asDiagonal() * d * root.asDiagonal();
        ComplexMatrix m;
        try {
            m = root.asDiagonal() * hermitian_inverse(q) * root.asDiagonal();
        } catch (const SingularMatrixError&) {
            throw std::runtime_error("mmse_combine: I + S D S factorization failed");
        }
        const ComplexMatrix dm = d * m;
        c[i] = d - dm * d;
        z_f.block(i) = state.y_tilde().block(i) - dm * state.y_tilde().block(i);
        c_avg += c[i];
    }
    c_avg /= static_cast<double>(T);

    const ComplexVector c_diag = c_avg.diagonal();
    for (std::size_t i = 0; i < T; ++i) {
        const auto sb = soft.mean_f.block(i);
        ComplexVector back = c[i] * sb;
        back -= c_diag.cwiseProduct(sb);
        z_f.block(i) -= back;
    }

    CombinerOutput out{idft_block(z_f, T, n), std::move(z_f), RealVector(nt), RealVector(nt)};
    for (Eigen::Index t = 0; t < nt; ++t) {
        const double mu = c_avg(t, t).real();
        out.gain[t] = mu;
        out.residual_var[t] = mu * (1.0 - soft.var_avg[t] * mu);
    }
    return out;
}

inline constexpr double kResidualVarFloor = 1e-12;

struct DemapResult {
    LlrFrame llr;
    bool floored = false;  // some nu_t was clamped to the floor
};

/// Equivalent-AWGN Gray QPSK demapping of z = mu s + eta, eta ~ CN(0, nu):
/// L_I = 2 sqrt(2) mu Re(z) / nu, L_Q = 2 sqrt(2) mu Im(z) / nu.
inline DemapResult demap_extrinsic(const BlockVector& z, const RealVector& mu,
                                   const RealVector& nu) {
    const std::size_t n = z.block_size(), T = z.num_blocks();
    if (static_cast<std::size_t>(mu.size()) != n || static_cast<std::size_t>(nu.size()) != n)
        throw std::invalid_argument("demap_extrinsic: gain/variance size mismatch");
    DemapResult res{LlrFrame(2 * n * T, 0.0), false};
    constexpr double k2Sqrt2 = 2.8284271247461900976;
    for (std::size_t t = 0; t < n; ++t) {
        const auto ti = static_cast<Eigen::Index>(t);
        const double g = mu[ti];
        if (!(g > 0.0)) continue;  // no information on this stream
        double v = nu[ti];
        if (!(v > kResidualVarFloor)) {
            v = kResidualVarFloor;
            res.floored = true;
        }
        const double scale = k2Sqrt2 * g / v;
        for (std::size_t i = 0; i < T; ++i) {
            const cplx zi = z.at(t, i);
            const std::size_t b = 2 * (i * n + t);
            res.llr[b] = clamp_llr(scale * zi.real());
            res.llr[b + 1] = clamp_llr(scale * zi.imag());
        }
    }
    return res;
}

/// Single-round soft-MMSE equalization used by LLR-level combining: the
/// round is equalized on its own and demapped to extrinsic LLRs.
inline DemapResult llr_level_equalize(const BlockVector& y_f,
                                      const std::vector<ComplexMatrix>& lambda,
                                      const ComplexMatrix& theta_inv, const SoftStats& soft) {
    CombinerState single(soft.mean.block_size(), y_f.num_blocks());
    single.update(lambda, theta_inv, y_f);
    const auto out = mmse_combine(single, soft);
    return demap_extrinsic(out.z, out.gain, out.residual_var);
}

}  // namespace tpc
