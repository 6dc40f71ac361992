// arq.hpp - Chase-type hybrid-ARQ engine with turbo packet combining
//
// One TurboReceiver decodes one packet. Each round runs a fixed number of
// turbo iterations between the soft combiner and the SISO decoder; on NACK
// only the combining memory survives into the next round (D_i, ytilde and
// Theta_k for the proposed scheme, accumulated LLRs for LLR-level
// combining). Received samples and CFRs of a round never outlive it.

#pragma once

#include "channel.hpp"
#include "combiner.hpp"
#include "decoder.hpp"
#include "tx.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tpc {

enum class Scheme { proposed, llr_level };

inline std::string to_string(Scheme s) { return s == Scheme::proposed ? "proposed" : "llr_level"; }

inline Scheme scheme_from_string(const std::string& s) {
    if (s == "proposed") return Scheme::proposed;
    if (s == "llr_level") return Scheme::llr_level;
    throw std::invalid_argument("unknown scheme '" + s + "'");
}

struct ArqConfig {
    int max_rounds = 3;
    int turbo_iters = 5;
    Scheme scheme = Scheme::proposed;
    bool early_exit = false;  // stop iterating as soon as the genie reports success

    void validate() const {
        if (max_rounds < 1) throw std::invalid_argument("ArqConfig: K must be >= 1");
        if (turbo_iters < 1) throw std::invalid_argument("ArqConfig: turbo_iters must be >= 1");
    }
};

enum class Ack { ack, nack };

/// Perfect error detection: ACK iff the decoded bits match exactly.
inline Ack genie_error_check(std::span<const std::uint8_t> decoded,
                             std::span<const std::uint8_t> truth) {
    if (decoded.size() != truth.size())
        throw std::invalid_argument("genie_error_check: length mismatch");
    return std::equal(decoded.begin(), decoded.end(), truth.begin()) ? Ack::ack : Ack::nack;
}

/// What the receiver gets at one round: perfect CSI of the desired link and
/// the received block. The interferer stays unknown.
struct RoundObservation {
    ChannelRealization channel;
    ReceivedBlock received;
};

struct RoundOutcome {
    Bits decoded;
    Ack ack = Ack::nack;
    int iterations_run = 0;
};

class TurboReceiver {
public:
    TurboReceiver(const CodeConfig& code, const Interleaver& pi, std::size_t n_tx,
                  ArqConfig cfg)
        : trellis_(code), pi_(pi), n_tx_(n_tx), cfg_(cfg) {
        cfg_.validate();
        if (pi_.size() == 0 || pi_.size() % (2 * n_tx) != 0)
            throw std::invalid_argument("TurboReceiver: interleaver length incompatible with N_T");
        T_ = pi_.size() / (2 * n_tx);
        priors_.assign(pi_.size(), 0.0);
        if (cfg_.scheme == Scheme::proposed)
            combiner_.emplace(n_tx_, T_);
        else
            accumulated_.assign(pi_.size(), 0.0);
    }

    std::size_t frame_length() const { return T_; }
    int rounds_seen() const { return round_; }

    /// Runs the turbo loop of one ARQ round. `truth` feeds the genie check.
    RoundOutcome receive_round(const RoundObservation& obs, std::span<const std::uint8_t> truth) {
        ++round_;
        const auto& taps = obs.channel.taps;
        if (obs.received.samples.num_blocks() != T_ || obs.channel.n_tx() != n_tx_)
            throw std::invalid_argument("receive_round: observation dimensions mismatch");
        const std::size_t n_rx = obs.received.samples.block_size();

        // CFR and DFT of the received block; both are dropped at return.
        const std::vector<ComplexMatrix> lambda = channel_frequency_response(taps, T_);
        const BlockVector y_f = dft_block(obs.received.samples, T_, n_rx);

        RoundOutcome outcome;
        std::optional<CovarianceEstimate> theta;
        LlrFrame last_combined;

        for (int it = 0; it < cfg_.turbo_iters; ++it) {
            const SoftStats soft = soft_symbol_stats(priors_, n_tx_, T_);
            theta = estimate_covariance(y_f, lambda, soft, theta);

            LlrFrame channel_llr;
            if (cfg_.scheme == Scheme::proposed) {
                combiner_->update(lambda, theta->inverse, y_f);
                const CombinerOutput out = mmse_combine(*combiner_, soft);
                const DemapResult dem = demap_extrinsic(out.z, out.gain, out.residual_var);
                floored_ = floored_ || dem.floored;
                channel_llr = pi_.deinterleave<double>(dem.llr);
            } else {
                const DemapResult dem = llr_level_equalize(y_f, lambda, theta->inverse, soft);
                floored_ = floored_ || dem.floored;
                channel_llr = pi_.deinterleave<double>(dem.llr);
                if (round_ > 1) {
                    for (std::size_t b = 0; b < channel_llr.size(); ++b)
                        channel_llr[b] += accumulated_[b];
                    llr_additions_ += channel_llr.size();
                }
                last_combined = channel_llr;
            }

            const SisoOutput dec = siso_decode(channel_llr, trellis_);
            priors_ = pi_.interleave<double>(dec.extrinsic);
            outcome.decoded = dec.info_bits;
            outcome.iterations_run = it + 1;
            if (cfg_.early_exit && genie_error_check(outcome.decoded, truth) == Ack::ack) break;
        }

        outcome.ack = genie_error_check(outcome.decoded, truth);
        if (outcome.ack == Ack::nack) {
            if (cfg_.scheme == Scheme::proposed) {
                combiner_->commit_round(theta->theta);
            } else {
                // The last iteration's sum already holds rounds 1..k.
                accumulated_ = std::move(last_combined);
            }
        }
        return outcome;
    }

    /// Real additions spent combining across rounds.
    std::uint64_t combining_additions() const {
        return cfg_.scheme == Scheme::proposed ? combiner_->additions() : llr_additions_;
    }

    /// Real values persisted between rounds for combining.
    std::size_t persisted_real_values() const {
        return cfg_.scheme == Scheme::proposed ? combiner_->persisted_real_values()
                                               : accumulated_.size();
    }

    /// Covariance side table (proposed scheme only).
    std::size_t covariance_real_values() const {
        return cfg_.scheme == Scheme::proposed ? combiner_->covariance_real_values() : 0;
    }

    bool residual_floor_hit() const { return floored_; }
    const CombinerState* combiner_state() const { return combiner_ ? &*combiner_ : nullptr; }
    const LlrFrame& accumulated_llrs() const { return accumulated_; }

private:
    // Degenerate estimates (zero residual) keep the previous estimate of the
    // same round, or fall back to a tiny absolute floor.
    static CovarianceEstimate estimate_covariance(const BlockVector& y_f,
                                                  const std::vector<ComplexMatrix>& lambda,
                                                  const SoftStats& soft,
                                                  const std::optional<CovarianceEstimate>& prev) {
        const ComplexMatrix raw = estimate_cci_noise_cov(y_f, lambda, soft.mean_f);
        try {
            return regularize_covariance(raw);
        } catch (const DegenerateEstimateError&) {
            if (prev) return *prev;
            ComplexMatrix floor = raw;
            floor.diagonal().array() += 1e-30;
            return CovarianceEstimate{floor, hermitian_inverse(floor)};
        }
    }

    Trellis trellis_;
    Interleaver pi_;
    std::size_t n_tx_;
    std::size_t T_ = 0;
    ArqConfig cfg_;
    int round_ = 0;
    LlrFrame priors_;  // a priori LLRs for the combiner, interleaved order
    std::optional<CombinerState> combiner_;
    LlrFrame accumulated_;  // LLR-level memory, code-bit order
    std::uint64_t llr_additions_ = 0;
    bool floored_ = false;
};

struct PacketResult {
    int rounds_used = 0;
    std::vector<bool> per_round_success;
    std::vector<Bits> per_round_decoded_bits;
    std::uint64_t combining_additions = 0;
    std::size_t persisted_real_values = 0;
    std::size_t covariance_real_values = 0;

    bool success() const { return !per_round_success.empty() && per_round_success.back(); }
};

using RoundSource = std::function<RoundObservation(int round)>;

/// Runs up to K rounds for one packet; `source(k)` delivers round k (1-based).
inline PacketResult run_packet(const TxPacket& tx, const RoundSource& source,
                               const CodeConfig& code, const Interleaver& pi,
                               const ArqConfig& cfg) {
    TurboReceiver rx(code, pi, tx.frame.n_tx(), cfg);
    PacketResult res;
    for (int k = 1; k <= cfg.max_rounds; ++k) {
        const RoundOutcome o = rx.receive_round(source(k), tx.info);
        res.rounds_used = k;
        res.per_round_success.push_back(o.ack == Ack::ack);
        res.per_round_decoded_bits.push_back(o.decoded);
        if (o.ack == Ack::ack) break;
    }
    res.combining_additions = rx.combining_additions();
    res.persisted_real_values = rx.persisted_real_values();
    res.covariance_real_values = rx.covariance_real_values();
    return res;
}

/// Convenience form: channels and interferer links given per round, the
/// interferer symbols and noise drawn from `rng`.
inline PacketResult run_packet(const TxPacket& tx, const std::vector<ChannelRealization>& channels,
                               const std::vector<std::optional<ChannelRealization>>& cci,
                               double noise_var, const CodeConfig& code, const Interleaver& pi,
                               const ArqConfig& cfg, Rng& rng) {
    if (channels.size() < static_cast<std::size_t>(cfg.max_rounds) || cci.size() < channels.size())
        throw std::invalid_argument("run_packet: need one channel and CCI entry per round");
    auto source = [&](int k) {
        const auto idx = static_cast<std::size_t>(k - 1);
        const ChannelRealization* cc = cci[idx] ? &*cci[idx] : nullptr;
        std::optional<SymbolFrame> cs;
        if (cc) cs = random_qpsk_frame(cc->n_tx(), tx.frame.length(), rng);
        ReceivedBlock rb = transmit_round(tx.frame, channels[idx], cc, cs ? &*cs : nullptr,
                                          noise_var, rng);
        return RoundObservation{channels[idx], std::move(rb)};
    };
    return run_packet(tx, source, code, pi, cfg);
}

}  // namespace tpc
