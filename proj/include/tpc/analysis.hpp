// analysis.hpp - instruments for the covariance structure, the sum-rank
// interference-suppression condition and the complexity/memory accounting.

#pragma once

#include "channel.hpp"
#include "combiner.hpp"
#include "numerics.hpp"
#include "rng.hpp"
#include "tx.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace tpc {

struct InsufficientDataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Theta^CCI = sum_l' H'_l' H'_l'^H (interferer symbols unit power, independent).
inline ComplexMatrix cci_covariance(const ChannelRealization& cci_chan) {
    const auto n = static_cast<Eigen::Index>(cci_chan.n_rx());
    ComplexMatrix theta = ComplexMatrix::Zero(n, n);
    for (const auto& h : cci_chan.taps) theta.noalias() += h * h.adjoint();
    return theta;
}

/// Numerical rank of Theta^CCI, eigenvalue threshold 1e-10 * lambda_max.
inline int cci_cov_rank(const ChannelRealization& cci_chan) {
    return numerical_rank(cci_covariance(cci_chan), 1e-10);
}

/// Sum-rank condition sum_u rho_u < k N_R - N_T (strict).
inline bool rank_condition(std::span<const int> ranks, int k, int n_rx, int n_tx) {
    long sum = 0;
    for (int u = 0; u < k && u < static_cast<int>(ranks.size()); ++u) sum += ranks[static_cast<std::size_t>(u)];
    return sum < static_cast<long>(k) * n_rx - n_tx;
}

/// Instantaneous matched-filter SNR over rounds 1..k:
/// (1/sigma^2) sum_l sum_u tr{H_l^(u)H H_l^(u)}.
inline double mf_snr(std::span<const ChannelRealization> rounds, double noise_var) {
    if (!(noise_var > 0.0)) throw std::invalid_argument("mf_snr: noise variance must be positive");
    double acc = 0.0;
    for (const auto& ch : rounds)
        for (const auto& h : ch.taps) acc += h.squaredNorm();
    return acc / noise_var;
}

struct SinrReport {
    RealVector gain;          // |g_t|
    RealVector residual_var;  // E|z - g s|^2 per stream
    double sinr = 0.0;        // sum |g_t|^2 / sum var_t
    double noise_var = 0.0;
};

inline constexpr double kSinrCap = 1e12;

/// Empirical output SINR of a genie-fed combiner: g_t = E[z s*],
/// var_t = E|z - g_t s|^2, SINR = sum |g_t|^2 / sum var_t.
inline SinrReport measure_sinr(const BlockVector& z, const BlockVector& s, double noise_var = 0.0) {
    if (z.block_size() != s.block_size() || z.num_blocks() != s.num_blocks())
        throw std::invalid_argument("measure_sinr: dimension mismatch");
    if (z.num_blocks() < 100) throw InsufficientDataError("measure_sinr: fewer than 100 samples");
    const std::size_t n = z.block_size(), T = z.num_blocks();
    SinrReport rep{RealVector(static_cast<Eigen::Index>(n)), RealVector(static_cast<Eigen::Index>(n)), 0.0, noise_var};
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        cplx g = 0.0;
        double energy = 0.0;
        for (std::size_t i = 0; i < T; ++i) {
            g += z.at(t, i) * std::conj(s.at(t, i));
            energy += std::norm(s.at(t, i));
        }
        g /= energy;
        double v = 0.0;
        for (std::size_t i = 0; i < T; ++i) v += std::norm(z.at(t, i) - g * s.at(t, i));
        v /= static_cast<double>(T);
        rep.gain[static_cast<Eigen::Index>(t)] = std::abs(g);
        rep.residual_var[static_cast<Eigen::Index>(t)] = v;
        num += std::norm(g);
        den += v;
    }
    rep.sinr = den > 0.0 ? std::min(num / den, kSinrCap) : kSinrCap;
    return rep;
}

/// Memory and combining-addition counts of both schemes.
struct ComplexityModel {
    std::uint64_t adds_proposed = 0;  // 2 T N_T N_it (K-1)(N_T+1)
    std::uint64_t adds_llr = 0;       // T N_T N_it (K-1) log2|S|
    std::uint64_t mem_proposed = 0;   // 2 T N_T (N_T+1) real values
    std::uint64_t mem_llr = 0;        // T N_T log2|S| real values
    double relative_cost = 0.0;       // 2 (N_T+1) / log2|S|
    double table_relative_cost = 0.0; // value listed in the reference cost table
    bool table_matches_formula = false;
};

/// The reference cost column lists N_T (QPSK), 2/3 N_T - 1/3 (8-PSK) and
/// N_T - 1/2 (16-QAM). This does not equal 2 (N_T+1) / log2|S|; both are reported.
inline ComplexityModel complexity_model(std::uint64_t T, std::uint64_t n_tx, std::uint64_t n_it,
                                        std::uint64_t K, std::uint64_t bits_per_symbol) {
    if (T == 0 || n_tx == 0 || n_it == 0 || K == 0 || bits_per_symbol == 0)
        throw std::invalid_argument("complexity_model: counts must be positive");
    ComplexityModel m;
    m.adds_proposed = 2 * T * n_tx * n_it * (K - 1) * (n_tx + 1);
    m.adds_llr = T * n_tx * n_it * (K - 1) * bits_per_symbol;
    m.mem_proposed = 2 * T * n_tx * (n_tx + 1);
    m.mem_llr = T * n_tx * bits_per_symbol;
    m.relative_cost = 2.0 * static_cast<double>(n_tx + 1) / static_cast<double>(bits_per_symbol);
    const double nt = static_cast<double>(n_tx);
    switch (bits_per_symbol) {
        case 2: m.table_relative_cost = nt; break;
        case 3: m.table_relative_cost = 2.0 / 3.0 * nt - 1.0 / 3.0; break;
        case 4: m.table_relative_cost = nt - 0.5; break;
        default: m.table_relative_cost = m.relative_cost; break;
    }
    m.table_matches_formula = std::abs(m.table_relative_cost - m.relative_cost) < 1e-12;
    return m;
}

// ---------------------------------------------------------------------------
// Monte Carlo instruments

/// Interference-plus-noise block of one round: circular CCI + AWGN, time domain.
inline BlockVector draw_cci_plus_noise(const CciProfile& cci, std::size_t n_rx, std::size_t T,
                                       double noise_var, Rng& rng) {
    const ChannelRealization h = draw_cci_channel(cci, n_rx, rng);
    const SymbolFrame sym = random_qpsk_frame(cci.n_tx, T, rng);
    BlockVector w = circular_convolve(h.taps, sym.symbols);
    if (noise_var > 0.0)
        for (auto& v : w.data()) v += complex_gaussian(rng, noise_var);
    return w;
}

struct CovarianceStructure {
    ComplexMatrix covariance;       // T k N_R square, bin-major, then round, then antenna
    double off_block_relative_rms;  // RMS |C_ab| outside the structure / mean diagonal
    double off_block_frobenius_ratio;  // ||off||_F / ||C||_F
    double max_pairwise_bin_deviation; // max_{i,j} ||C_ii - C_jj||_F / mean_i ||C_ii||_F
    double max_bin_deviation;          // max_i ||C_ii - mean_j C_jj||_F / ||mean_j C_jj||_F
    std::size_t trials = 0;
};

/// Empirical covariance of the multi-round frequency-domain CCI-plus-noise
/// vector over independent draws, and how far it is from the
/// I_T kron diag(Theta_1..Theta_k) structure.
inline CovarianceStructure covariance_structure(const CciProfile& cci, std::size_t n_rx,
                                                std::size_t T, int k, double noise_var,
                                                std::size_t trials, std::uint64_t seed) {
    if (trials == 0 || k < 1) throw std::invalid_argument("covariance_structure: bad arguments");
    const std::size_t blk = static_cast<std::size_t>(k) * n_rx;
    const auto dim = static_cast<Eigen::Index>(T * blk);
    ComplexMatrix acc = ComplexMatrix::Zero(dim, dim);
    ComplexVector v(dim);
    for (std::size_t n = 0; n < trials; ++n) {
        for (int u = 0; u < k; ++u) {
            Rng rng = make_stream(seed, n, static_cast<std::uint64_t>(u), StreamPurpose::test);
            const BlockVector w_f = dft_block(draw_cci_plus_noise(cci, n_rx, T, noise_var, rng), T, n_rx);
            for (std::size_t i = 0; i < T; ++i)
                v.segment(static_cast<Eigen::Index>(i * blk + static_cast<std::size_t>(u) * n_rx),
                          static_cast<Eigen::Index>(n_rx)) = w_f.block(i);
        }
        acc.selfadjointView<Eigen::Lower>().rankUpdate(v);
    }
    ComplexMatrix cov = acc.selfadjointView<Eigen::Lower>();
    cov /= static_cast<double>(trials);

    CovarianceStructure out;
    out.trials = trials;
    double off_sq = 0.0, total_sq = 0.0, diag_sum = 0.0;
    std::size_t off_count = 0;
    for (Eigen::Index a = 0; a < dim; ++a) {
        diag_sum += cov(a, a).real();
        for (Eigen::Index b = 0; b < dim; ++b) {
            const double e = std::norm(cov(a, b));
            total_sq += e;
            const bool same = a / static_cast<Eigen::Index>(n_rx) == b / static_cast<Eigen::Index>(n_rx);
            if (!same) {
                off_sq += e;
                ++off_count;
            }
        }
    }
    const double mean_diag = diag_sum / static_cast<double>(dim);
    out.off_block_relative_rms = std::sqrt(off_sq / static_cast<double>(off_count)) / mean_diag;
    out.off_block_frobenius_ratio = std::sqrt(off_sq / total_sq);

    // Bin-independence: every per-bin block should be the same matrix.
    const auto b = static_cast<Eigen::Index>(blk);
    double mean_norm = 0.0;
    for (std::size_t i = 0; i < T; ++i)
        mean_norm += cov.block(static_cast<Eigen::Index>(i) * b, static_cast<Eigen::Index>(i) * b, b, b).norm();
    mean_norm /= static_cast<double>(T);
    double worst = 0.0;
    for (std::size_t i = 0; i < T; ++i)
        for (std::size_t j = i + 1; j < T; ++j) {
            const auto bi = static_cast<Eigen::Index>(i) * b, bj = static_cast<Eigen::Index>(j) * b;
            const double d = (cov.block(bi, bi, b, b) - cov.block(bj, bj, b, b)).norm() / mean_norm;
            worst = std::max(worst, d);
        }
    out.max_pairwise_bin_deviation = worst;
    ComplexMatrix pooled = ComplexMatrix::Zero(b, b);
    for (std::size_t i = 0; i < T; ++i)
        pooled += cov.block(static_cast<Eigen::Index>(i) * b, static_cast<Eigen::Index>(i) * b, b, b);
    pooled /= static_cast<double>(T);
    double worst_pooled = 0.0;
    for (std::size_t i = 0; i < T; ++i) {
        const auto bi = static_cast<Eigen::Index>(i) * b;
        worst_pooled = std::max(worst_pooled, (cov.block(bi, bi, b, b) - pooled).norm() / pooled.norm());
    }
    out.max_bin_deviation = worst_pooled;
    out.covariance = std::move(cov);
    return out;
}

/// Genie-fed combining of `rounds` known channels and interferers with the
/// true Theta_u = Theta^CCI_u + sigma^2 I; returns the measured output SINR.
/// `noise_seed` fixes the symbol, interferer-symbol and noise draws so that
/// sweeps over sigma^2 reuse the same underlying randomness.
inline SinrReport genie_sinr(std::span<const ChannelRealization> channels,
                             std::span<const ChannelRealization> cci_channels, std::size_t T,
                             double noise_var, std::uint64_t noise_seed) {
    if (channels.empty() || cci_channels.size() < channels.size())
        throw std::invalid_argument("genie_sinr: need one interferer link per round");
    const std::size_t n_tx = channels.front().n_tx();
    Rng sym_rng = make_stream(noise_seed, 0, 0, StreamPurpose::info_bits);
    const SymbolFrame s = random_qpsk_frame(n_tx, T, sym_rng);
    const SoftStats genie = perfect_soft_stats(s);

    CombinerState state(n_tx, T);
    for (std::size_t u = 0; u < channels.size(); ++u) {
        const auto& ch = channels[u];
        const auto& cc = cci_channels[u];
        const std::size_t n_rx = ch.n_rx();
        Rng cs_rng = make_stream(noise_seed, 0, u + 1, StreamPurpose::cci_symbols);
        Rng n_rng = make_stream(noise_seed, 0, u + 1, StreamPurpose::noise);
        std::optional<SymbolFrame> cci_sym;
        const bool has_cci = !cc.taps.empty() && cc.taps.front().size() > 0;
        if (has_cci) cci_sym = random_qpsk_frame(cc.n_tx(), T, cs_rng);
        const ReceivedBlock rb = transmit_round(s, ch, has_cci ? &cc : nullptr,
                                                cci_sym ? &*cci_sym : nullptr, noise_var, n_rng);
        ComplexMatrix theta = has_cci ? cci_covariance(cc)
                                      : ComplexMatrix::Zero(static_cast<Eigen::Index>(n_rx), static_cast<Eigen::Index>(n_rx));
        theta.diagonal().array() += noise_var;
        const auto lambda = channel_frequency_response(ch.taps, T);
        state.update(lambda, hermitian_inverse(theta), dft_block(rb.samples, T, n_rx));
        if (u + 1 < channels.size()) state.commit_round(theta);
    }
    const CombinerOutput out = mmse_combine(state, genie);
    return measure_sinr(out.z, s.symbols, noise_var);
}

struct SinrSweep {
    std::vector<double> noise_vars;
    std::vector<double> mean_sinr_db;  // averaged over channel draws, in dB
    std::vector<double> decade_slopes; // d(log10 SINR) / d(log10 1/sigma^2) per consecutive pair
};

struct SinrScenario {
    std::size_t n_tx = 2;
    std::size_t n_rx = 4;
    int rounds = 2;
    ChannelProfile profile = ChannelProfile::equal_taps(2);
    CciProfile cci;
    std::size_t T = 256;
    std::size_t draws = 20;
    std::uint64_t seed = 1;
    bool with_cci = true;
};

/// Sweeps sigma^2 with channels, interferers and normalized noise held fixed
/// per draw; slopes close to 1 mean the SINR grows like 1/sigma^2.
inline SinrSweep sinr_sweep(const SinrScenario& sc, const std::vector<double>& noise_vars) {
    SinrSweep out;
    out.noise_vars = noise_vars;
    out.mean_sinr_db.assign(noise_vars.size(), 0.0);
    for (std::size_t d = 0; d < sc.draws; ++d) {
        std::vector<ChannelRealization> ch, cc;
        for (int u = 0; u < sc.rounds; ++u) {
            Rng r1 = make_stream(sc.seed, d, static_cast<std::uint64_t>(u), StreamPurpose::channel);
            Rng r2 = make_stream(sc.seed, d, static_cast<std::uint64_t>(u), StreamPurpose::cci_channel);
            ch.push_back(draw_channel(sc.profile, sc.n_tx, sc.n_rx, r1, u + 1));
            if (sc.with_cci)
                cc.push_back(draw_cci_channel(sc.cci, sc.n_rx, r2, u + 1));
            else
                cc.push_back(ChannelRealization{});
        }
        for (std::size_t j = 0; j < noise_vars.size(); ++j) {
            const SinrReport rep = genie_sinr(ch, cc, sc.T, noise_vars[j], splitmix64(sc.seed ^ (d + 1)));
            out.mean_sinr_db[j] += 10.0 * std::log10(rep.sinr);
        }
    }
    for (auto& v : out.mean_sinr_db) v /= static_cast<double>(sc.draws);
    for (std::size_t j = 1; j < noise_vars.size(); ++j) {
        const double dx = std::log10(noise_vars[j - 1] / noise_vars[j]);
        out.decade_slopes.push_back((out.mean_sinr_db[j] - out.mean_sinr_db[j - 1]) / (10.0 * dx));
    }
    return out;
}

}  // namespace tpc
