// decoder.hpp - Max-Log-MAP SISO decoder for the terminated rate-1/2 code

#pragma once

#include "llr.hpp"
#include "tx.hpp"

#include <array>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace tpc {

/// State-transition table of a feed-forward rate-1/2 code. The state holds
/// the last K-1 inputs, most recent at the top bit.
class Trellis {
public:
    struct Edge {
        int next;
        std::uint8_t c0;
        std::uint8_t c1;
    };

    explicit Trellis(const CodeConfig& cfg = {}) : cfg_(cfg) {
        cfg.validate();
        const int m = cfg.memory();
        num_states_ = cfg.num_states();
        edges_.resize(static_cast<std::size_t>(num_states_) * 2);
        for (int s = 0; s < num_states_; ++s)
            for (int u = 0; u < 2; ++u) {
                const unsigned reg = (static_cast<unsigned>(u) << m) | static_cast<unsigned>(s);
                const auto [c0, c1] = cfg.outputs(reg);
                edges_[idx(s, u)] = Edge{static_cast<int>(reg >> 1), c0, c1};
            }
    }

    int num_states() const { return num_states_; }
    int memory() const { return cfg_.memory(); }
    const Edge& edge(int state, int input) const { return edges_[idx(state, input)]; }

private:
    static std::size_t idx(int s, int u) { return static_cast<std::size_t>(s) * 2 + static_cast<std::size_t>(u); }

    CodeConfig cfg_;
    int num_states_ = 0;
    std::vector<Edge> edges_;
};

struct SisoOutput {
    LlrFrame extrinsic;  // per code bit, clamped
    LlrFrame app;        // extrinsic + a priori, per code bit
    LlrFrame info_app;   // per info bit (tail excluded)
    Bits info_bits;
};

/// Forward/backward max-log recursions over a trellis that starts and ends
/// in state 0. Code-bit extrinsics are computed with the bit's own a priori
/// term removed from the branch metric, so extrinsic + a priori == APP holds
/// bit for bit.
inline SisoOutput siso_decode(std::span<const double> apriori, const Trellis& trellis) {
    const int m = trellis.memory();
    if (apriori.size() % 2 != 0 || apriori.size() < static_cast<std::size_t>(2 * m))
        throw std::invalid_argument("siso_decode: LLR length must be 2*(n_info + K - 1)");
    const std::size_t steps = apriori.size() / 2;
    const std::size_t n_info = steps - static_cast<std::size_t>(m);
    const int S = trellis.num_states();
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();

    auto inputs_at = [&](std::size_t k) { return k < n_info ? 2 : 1; };
    auto half = [](std::uint8_t c, double l) { return c ? -0.5 * l : 0.5 * l; };

    std::vector<double> alpha((steps + 1) * static_cast<std::size_t>(S), kNegInf);
    std::vector<double> beta((steps + 1) * static_cast<std::size_t>(S), kNegInf);
    auto A = [&](std::size_t k, int s) -> double& { return alpha[k * static_cast<std::size_t>(S) + static_cast<std::size_t>(s)]; };
    auto B = [&](std::size_t k, int s) -> double& { return beta[k * static_cast<std::size_t>(S) + static_cast<std::size_t>(s)]; };

    A(0, 0) = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
        const double l0 = apriori[2 * k], l1 = apriori[2 * k + 1];
        double best = kNegInf;
        for (int s = 0; s < S; ++s) {
            const double a = A(k, s);
            if (a == kNegInf) continue;
            for (int u = 0; u < inputs_at(k); ++u) {
                const auto& e = trellis.edge(s, u);
                const double v = a + half(e.c0, l0) + half(e.c1, l1);
                double& dst = A(k + 1, e.next);
                if (v > dst) dst = v;
                if (v > best) best = v;
            }
        }
        for (int s = 0; s < S; ++s)
            if (A(k + 1, s) != kNegInf) A(k + 1, s) -= best;
    }

    B(steps, 0) = 0.0;
    for (std::size_t k = steps; k-- > 0;) {
        const double l0 = apriori[2 * k], l1 = apriori[2 * k + 1];
        double best = kNegInf;
        for (int s = 0; s < S; ++s) {
            double acc = kNegInf;
            for (int u = 0; u < inputs_at(k); ++u) {
                const auto& e = trellis.edge(s, u);
                const double b = B(k + 1, e.next);
                if (b == kNegInf) continue;
                const double v = b + half(e.c0, l0) + half(e.c1, l1);
                if (v > acc) acc = v;
            }
            B(k, s) = acc;
            if (acc > best) best = acc;
        }
        for (int s = 0; s < S; ++s)
            if (B(k, s) != kNegInf) B(k, s) -= best;
    }

    SisoOutput out;
    out.extrinsic.resize(apriori.size());
    out.app.resize(apriori.size());
    out.info_app.resize(n_info);
    out.info_bits.resize(n_info);

    auto diff = [](double zero_best, double one_best) {
        if (zero_best == kNegInf && one_best == kNegInf) return 0.0;
        if (one_best == kNegInf) return kLlrClamp;
        if (zero_best == kNegInf) return -kLlrClamp;
        return zero_best - one_best;
    };

    for (std::size_t k = 0; k < steps; ++k) {
        const double l0 = apriori[2 * k], l1 = apriori[2 * k + 1];
        // [bit][value] best metric with that bit's own term removed; [input]
        std::array<std::array<double, 2>, 2> bit_best{{{kNegInf, kNegInf}, {kNegInf, kNegInf}}};
        std::array<double, 2> in_best{kNegInf, kNegInf};
        for (int s = 0; s < S; ++s) {
            const double a = A(k, s);
            if (a == kNegInf) continue;
            for (int u = 0; u < inputs_at(k); ++u) {
                const auto& e = trellis.edge(s, u);
                const double b = B(k + 1, e.next);
                if (b == kNegInf) continue;
                const double g0 = half(e.c0, l0), g1 = half(e.c1, l1);
                const double base = a + b;
                const double without0 = base + g1;
                const double without1 = base + g0;
                const double full = base + g0 + g1;
                auto& b0 = bit_best[0][e.c0];
                if (without0 > b0) b0 = without0;
                auto& b1 = bit_best[1][e.c1];
                if (without1 > b1) b1 = without1;
                if (full > in_best[static_cast<std::size_t>(u)]) in_best[static_cast<std::size_t>(u)] = full;
            }
        }
        for (int j = 0; j < 2; ++j) {
            const std::size_t pos = 2 * k + static_cast<std::size_t>(j);
            const double ext = clamp_llr(diff(bit_best[static_cast<std::size_t>(j)][0], bit_best[static_cast<std::size_t>(j)][1]));
            out.extrinsic[pos] = ext;
            out.app[pos] = ext + apriori[pos];
        }
        if (k < n_info) {
            const double l = diff(in_best[0], in_best[1]);
            out.info_app[k] = l;
            out.info_bits[k] = l < 0.0 ? 1 : 0;
        }
    }
    return out;
}

inline SisoOutput siso_decode(std::span<const double> apriori, const CodeConfig& cfg = {}) {
    return siso_decode(apriori, Trellis(cfg));
}

}  // namespace tpc
