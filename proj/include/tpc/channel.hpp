// channel.hpp - frequency-selective MIMO channel with co-channel interference
//
// Short-term static fading: every ARQ round draws fresh desired and
// interferer taps. The cyclic prefix is modeled by circular convolution over
// the T channel uses of a frame.

#pragma once

#include "numerics.hpp"
#include "rng.hpp"
#include "tx.hpp"

#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

namespace tpc {

struct ChannelProfile {
    std::vector<double> tap_powers{0.5, 0.5};

    std::size_t taps() const { return tap_powers.size(); }

    void validate() const {
        if (tap_powers.empty()) throw std::invalid_argument("ChannelProfile: no taps");
        double sum = 0.0;
        for (double p : tap_powers) {
            if (!(p >= 0.0)) throw std::invalid_argument("ChannelProfile: negative tap power");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("ChannelProfile: tap powers must sum to one");
    }

    static ChannelProfile equal_taps(std::size_t L) {
        return {std::vector<double>(L, 1.0 / static_cast<double>(L))};
    }
};

/// Interferer link. tap_powers carry the path loss and are not normalized.
struct CciProfile {
    std::size_t n_tx = 2;
    std::vector<double> tap_powers{0.5, 0.5};
    double delta_tx = 0.0;
    double delta_rx = 0.0;
    std::size_t scatter_rank = 0;  // 0 = full rank min(N'_T, N_R)

    std::size_t taps() const { return tap_powers.size(); }
    double total_power() const {
        return std::accumulate(tap_powers.begin(), tap_powers.end(), 0.0);
    }
};

struct ChannelRealization {
    std::vector<ComplexMatrix> taps;  // L matrices, N_R x N_T
    int round_index = 0;

    std::size_t n_rx() const { return static_cast<std::size_t>(taps.front().rows()); }
    std::size_t n_tx() const { return static_cast<std::size_t>(taps.front().cols()); }
};

struct ReceivedBlock {
    BlockVector samples;  // N_R x T, time domain
    double noise_var = 0.0;
};

inline ChannelRealization draw_channel(const ChannelProfile& profile, std::size_t n_tx,
                                       std::size_t n_rx, Rng& rng, int round_index = 0) {
    profile.validate();
    ChannelRealization ch;
    ch.round_index = round_index;
    const auto nr = static_cast<Eigen::Index>(n_rx);
    const auto nt = static_cast<Eigen::Index>(n_tx);
    for (double p : profile.tap_powers) {
        ComplexMatrix h(nr, nt);
        for (Eigen::Index c = 0; c < nt; ++c)
            for (Eigen::Index r = 0; r < nr; ++r) h(r, c) = complex_gaussian(rng, p);
        if (p == 0.0) h.setZero();
        ch.taps.push_back(std::move(h));
    }
    return ch;
}

/// Single-coefficient correlation matrix: ones on the diagonal, delta elsewhere.
inline ComplexMatrix correlation_matrix(std::size_t n, double delta) {
    if (!(delta >= 0.0 && delta < 1.0))
        throw std::invalid_argument("correlation coefficient must lie in [0, 1)");
    const auto m = static_cast<Eigen::Index>(n);
    ComplexMatrix r = ComplexMatrix::Constant(m, m, cplx(delta, 0.0));
    r.diagonal().setOnes();
    return r;
}

/// H_l' = R_rx^{1/2} A_l' R_tx^{1/2}, with A_l' the product of N_R x r and
/// r x N'_T Gaussian factors (exact rank r), scaled so E|A_ij|^2 = 1 and
/// E||H_l'||_F^2 = N_R N'_T sigma_u,l'^2.
inline ChannelRealization draw_cci_channel(const CciProfile& cci, std::size_t n_rx, Rng& rng,
                                           int round_index = 0) {
    const std::size_t full = std::min(cci.n_tx, n_rx);
    const std::size_t rank = cci.scatter_rank == 0 ? full : cci.scatter_rank;
    if (cci.n_tx == 0 || rank > full)
        throw std::invalid_argument("draw_cci_channel: scatter rank out of range");
    if (cci.tap_powers.empty()) throw std::invalid_argument("draw_cci_channel: no taps");

    const ComplexMatrix rx_half = hermitian_sqrt(correlation_matrix(n_rx, cci.delta_rx));
    const ComplexMatrix tx_half = hermitian_sqrt(correlation_matrix(cci.n_tx, cci.delta_tx));
    const auto nr = static_cast<Eigen::Index>(n_rx);
    const auto nt = static_cast<Eigen::Index>(cci.n_tx);
    const auto r = static_cast<Eigen::Index>(rank);

    ChannelRealization ch;
    ch.round_index = round_index;
    for (double p : cci.tap_powers) {
        if (p < 0.0) throw std::invalid_argument("draw_cci_channel: negative tap power");
        ComplexMatrix left(nr, r), right(r, nt);
        for (Eigen::Index c = 0; c < r; ++c)
            for (Eigen::Index i = 0; i < nr; ++i) left(i, c) = complex_gaussian(rng, 1.0);
        for (Eigen::Index c = 0; c < nt; ++c)
            for (Eigen::Index i = 0; i < r; ++i) right(i, c) = complex_gaussian(rng, 1.0);
        const ComplexMatrix a = (left * right) / std::sqrt(static_cast<double>(rank));
        ch.taps.push_back(std::sqrt(p) * rx_half * a * tx_half);
    }
    return ch;
}

/// Scale factor c such that c * sum(tap_powers) satisfies SIR = N_T / (N'_T sum sigma_u^2).
inline double sir_to_cci_scale(double sir_db, std::size_t n_tx, std::size_t n_tx_cci,
                               const std::vector<double>& tap_powers) {
    const double sum = std::accumulate(tap_powers.begin(), tap_powers.end(), 0.0);
    if (!(sum > 0.0)) throw std::invalid_argument("sir_to_cci_scale: tap powers are all zero");
    const double sir = std::pow(10.0, sir_db / 10.0);
    const double target = static_cast<double>(n_tx) / (static_cast<double>(n_tx_cci) * sir);
    return target / sum;
}

/// SIR measured from a profile: N_T / (N'_T sum sigma_u^2).
inline double cci_sir(std::size_t n_tx, const CciProfile& cci) {
    return static_cast<double>(n_tx) / (static_cast<double>(cci.n_tx) * cci.total_power());
}

/// Noise variance per complex sample for a given Eb/N0 per useful bit per
/// receive antenna: sigma^2 = n_code / (2 n_info Eb/N0). Received signal
/// energy per antenna and channel use is N_T, useful bits per channel use
/// are 2 N_T n_info / n_code, and the N_T cancels.
inline double noise_variance(double ebn0_db, std::size_t n_info, std::size_t n_code) {
    const double ebn0 = std::pow(10.0, ebn0_db / 10.0);
    return static_cast<double>(n_code) / (2.0 * static_cast<double>(n_info) * ebn0);
}

/// Circular MIMO convolution: out_i = sum_l H_l x_{(i - l) mod T}.
inline BlockVector circular_convolve(const std::vector<ComplexMatrix>& taps, const BlockVector& x) {
    const std::size_t T = x.num_blocks();
    const auto n_out = static_cast<std::size_t>(taps.front().rows());
    if (static_cast<std::size_t>(taps.front().cols()) != x.block_size())
        throw std::invalid_argument("circular_convolve: dimension mismatch");
    BlockVector y(n_out, T);
    for (std::size_t i = 0; i < T; ++i)
        for (std::size_t l = 0; l < taps.size(); ++l)
            y.block(i) += taps[l] * x.block((i + T - (l % T)) % T);
    return y;
}

/// One ARQ round over the air: y_i = sum_l H_l s_{i-l} + sum_l' H'_l' s'_{i-l'} + n_i.
inline ReceivedBlock transmit_round(const SymbolFrame& s, const ChannelRealization& chan,
                                    const ChannelRealization* cci_chan,
                                    const SymbolFrame* cci_symbols, double noise_var, Rng& rng) {
    if (chan.n_tx() != s.n_tx()) throw std::invalid_argument("transmit_round: N_T mismatch");
    ReceivedBlock rx{circular_convolve(chan.taps, s.symbols), noise_var};
    if (cci_chan && cci_symbols) {
        if (cci_chan->n_rx() != chan.n_rx() || cci_symbols->length() != s.length())
            throw std::invalid_argument("transmit_round: interferer dimension mismatch");
        rx.samples.data() += circular_convolve(cci_chan->taps, cci_symbols->symbols).data();
    }
    if (noise_var > 0.0)
        for (auto& v : rx.samples.data()) v += complex_gaussian(rng, noise_var);
    return rx;
}

}  // namespace tpc
