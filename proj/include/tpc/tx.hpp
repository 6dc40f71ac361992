// tx.hpp - ST-BICM transmitter
//
// Rate-1/2 feed-forward convolutional encoder with zero-tail termination,
// S-random interleaver and Gray QPSK mapping onto an N_T x T symbol frame.
// Bit order inside a frame: antennas fastest, channel uses slowest, and the
// two bits of a symbol are (I, Q).

#pragma once

#include "numerics.hpp"
#include "rng.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace tpc {

using Bits = std::vector<std::uint8_t>;

struct CodeConfig {
    unsigned g0 = 035;
    unsigned g1 = 023;
    int constraint_length = 5;

    int memory() const { return constraint_length - 1; }
    int num_states() const { return 1 << memory(); }

    void validate() const {
        if (constraint_length < 2 || constraint_length > 16)
            throw std::invalid_argument("CodeConfig: constraint length out of range");
        const unsigned top = 1u << (constraint_length - 1);
        if ((g0 >> constraint_length) != 0 || (g1 >> constraint_length) != 0 ||
            ((g0 | g1) & top) == 0)
            throw std::invalid_argument("CodeConfig: generator width must equal constraint length");
    }

    /// Output pair for shift register contents `reg` (current input at the MSB).
    std::pair<std::uint8_t, std::uint8_t> outputs(unsigned reg) const {
        return {static_cast<std::uint8_t>(std::popcount(reg & g0) & 1),
                static_cast<std::uint8_t>(std::popcount(reg & g1) & 1)};
    }

    std::size_t coded_length(std::size_t n_info) const {
        return 2 * (n_info + static_cast<std::size_t>(memory()));
    }
};

/// Encodes and appends memory() zero tail bits; output length 2*(n + K - 1).
inline Bits conv_encode(std::span<const std::uint8_t> info, const CodeConfig& cfg = {}) {
    cfg.validate();
    const int m = cfg.memory();
    Bits out;
    out.reserve(cfg.coded_length(info.size()));
    unsigned state = 0;
    auto push = [&](unsigned bit) {
        const unsigned reg = (bit << m) | state;
        const auto [c0, c1] = cfg.outputs(reg);
        out.push_back(c0);
        out.push_back(c1);
        state = reg >> 1;
    };
    for (auto b : info) push(b & 1u);
    for (int t = 0; t < m; ++t) push(0);
    return out;
}

/// Semi-random (S-random) permutation. Output position i takes input pi[i].
class Interleaver {
public:
    Interleaver() = default;

    static Interleaver identity(std::size_t length) {
        Interleaver il;
        il.perm_.resize(length);
        std::iota(il.perm_.begin(), il.perm_.end(), std::size_t{0});
        il.spread_ = 1;
        return il;
    }

    /// Greedy S-random construction; up to `retry_cap` attempts per spread
    /// value, then the spread is decremented.
    static Interleaver s_random(std::size_t length, std::uint64_t seed, std::size_t spread = 16,
                                int retry_cap = 1000) {
        if (length == 0) throw std::invalid_argument("Interleaver: empty length");
        Rng rng(stream_id(seed, length, 0, StreamPurpose::interleaver));
        for (std::size_t s = std::min(spread, length); s >= 1; --s) {
            for (int attempt = 0; attempt < retry_cap; ++attempt) {
                std::vector<std::size_t> perm;
                if (try_build(length, s, rng, perm)) {
                    Interleaver il;
                    il.perm_ = std::move(perm);
                    il.spread_ = s;
                    il.seed_ = seed;
                    return il;
                }
            }
        }
        return identity(length);
    }

    std::size_t size() const { return perm_.size(); }
    std::size_t spread() const { return spread_; }
    std::uint64_t seed() const { return seed_; }
    const std::vector<std::size_t>& permutation() const { return perm_; }

    template <typename T>
    std::vector<T> interleave(std::span<const T> in) const {
        check(in.size());
        std::vector<T> out(in.size());
        for (std::size_t i = 0; i < perm_.size(); ++i) out[i] = in[perm_[i]];
        return out;
    }

    template <typename T>
    std::vector<T> deinterleave(std::span<const T> in) const {
        check(in.size());
        std::vector<T> out(in.size());
        for (std::size_t i = 0; i < perm_.size(); ++i) out[perm_[i]] = in[i];
        return out;
    }

    /// |pi(i) - pi(j)| >= s whenever 0 < |i - j| < s.
    bool has_spread(std::size_t s) const {
        for (std::size_t i = 0; i < perm_.size(); ++i)
            for (std::size_t j = i + 1; j < perm_.size() && j - i < s; ++j) {
                const auto d = perm_[i] > perm_[j] ? perm_[i] - perm_[j] : perm_[j] - perm_[i];
                if (d < s) return false;
            }
        return true;
    }

private:
    void check(std::size_t n) const {
        if (n != perm_.size())
            throw std::invalid_argument("Interleaver: length mismatch");
    }

    static bool try_build(std::size_t n, std::size_t s, Rng& rng, std::vector<std::size_t>& perm) {
        std::vector<std::size_t> pool(n);
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        std::shuffle(pool.begin(), pool.end(), rng);
        perm.clear();
        perm.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            bool placed = false;
            for (std::size_t c = 0; c < pool.size(); ++c) {
                const std::size_t cand = pool[c];
                bool ok = true;
                const std::size_t lo = perm.size() >= s - 1 ? perm.size() - (s - 1) : 0;
                for (std::size_t j = lo; j < perm.size(); ++j) {
                    const auto d = cand > perm[j] ? cand - perm[j] : perm[j] - cand;
                    if (d < s) {
                        ok = false;
                        break;
                    }
                }
                if (ok) {
                    perm.push_back(cand);
                    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(c));
                    placed = true;
                    break;
                }
            }
            if (!placed) return false;
        }
        return true;
    }

    std::vector<std::size_t> perm_;
    std::size_t spread_ = 0;
    std::uint64_t seed_ = 0;
};

inline constexpr double kInvSqrt2 = 0.70710678118654752440;

/// Gray QPSK: (b_I, b_Q) -> ((1 - 2 b_I) + j (1 - 2 b_Q)) / sqrt(2).
inline cplx qpsk_map(std::uint8_t b_i, std::uint8_t b_q) {
    return {(1.0 - 2.0 * (b_i & 1)) * kInvSqrt2, (1.0 - 2.0 * (b_q & 1)) * kInvSqrt2};
}

/// N_T x T symbol matrix, stored as the serialized vector s = [s_0^T ... s_{T-1}^T]^T.
struct SymbolFrame {
    BlockVector symbols;

    std::size_t n_tx() const { return symbols.block_size(); }
    std::size_t length() const { return symbols.num_blocks(); }
};

inline SymbolFrame map_frame(std::span<const std::uint8_t> code_bits, std::size_t n_tx) {
    if (n_tx == 0 || code_bits.empty() || code_bits.size() % (2 * n_tx) != 0)
        throw std::invalid_argument("map_frame: bit count must be a positive multiple of 2*n_tx");
    const std::size_t T = code_bits.size() / (2 * n_tx);
    SymbolFrame f{BlockVector(n_tx, T)};
    for (std::size_t i = 0; i < T; ++i)
        for (std::size_t t = 0; t < n_tx; ++t) {
            const std::size_t b = 2 * (i * n_tx + t);
            f.symbols.at(t, i) = qpsk_map(code_bits[b], code_bits[b + 1]);
        }
    return f;
}

/// Uniform i.i.d. QPSK frame; used for interferer symbols.
inline SymbolFrame random_qpsk_frame(std::size_t n_tx, std::size_t T, Rng& rng) {
    std::uniform_int_distribution<int> bit(0, 1);
    SymbolFrame f{BlockVector(n_tx, T)};
    for (std::size_t i = 0; i < T; ++i)
        for (std::size_t t = 0; t < n_tx; ++t)
            f.symbols.at(t, i) = qpsk_map(static_cast<std::uint8_t>(bit(rng)),
                                          static_cast<std::uint8_t>(bit(rng)));
    return f;
}

inline Bits random_bits(std::size_t n, Rng& rng) {
    std::uniform_int_distribution<int> bit(0, 1);
    Bits b(n);
    for (auto& x : b) x = static_cast<std::uint8_t>(bit(rng));
    return b;
}

/// Everything the transmitter produced for one packet.
struct TxPacket {
    Bits info;
    Bits code;         // encoder output, before interleaving
    Bits interleaved;  // what is mapped
    SymbolFrame frame;
};

inline TxPacket build_packet(Bits info, const CodeConfig& cfg, const Interleaver& pi,
                             std::size_t n_tx) {
    TxPacket p;
    p.info = std::move(info);
    p.code = conv_encode(p.info, cfg);
    p.interleaved = pi.interleave<std::uint8_t>(p.code);
    p.frame = map_frame(p.interleaved, n_tx);
    return p;
}

}  // namespace tpc
