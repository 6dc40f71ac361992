// selfcheck.hpp - quick property suite behind `sim verify`

#pragma once

#include "analysis.hpp"
#include "arq.hpp"

#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace tpc {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace detail {

inline CheckResult check(std::string name, const std::function<std::string(bool&)>& body) {
    CheckResult r{std::move(name), false, {}};
    try {
        r.detail = body(r.passed);
    } catch (const std::exception& e) {
        r.passed = false;
        r.detail = std::string("threw: ") + e.what();
    }
    return r;
}

inline std::string fmt(const char* f, double a, double b = 0.0) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

}  // namespace detail

inline std::vector<CheckResult> run_self_checks() {
    using detail::check;
    using detail::fmt;
    std::vector<CheckResult> out;

    out.push_back(check("cci rank of rank-limited interferers", [](bool& ok) {
        Rng rng = make_stream(11, 0, 0, StreamPurpose::test);
        CciProfile one{1, {1.0}, 0.0, 0.0, 0};
        CciProfile two{2, {1.0}, 0.0, 0.0, 2};
        CciProfile off{2, {0.0}, 0.0, 0.0, 0};
        const int r1 = cci_cov_rank(draw_cci_channel(one, 4, rng));
        const int r2 = cci_cov_rank(draw_cci_channel(two, 4, rng));
        const int r0 = cci_cov_rank(draw_cci_channel(off, 4, rng));
        ok = r1 == 1 && r2 == 2 && r0 == 0;
        return "ranks " + std::to_string(r1) + "," + std::to_string(r2) + "," + std::to_string(r0);
    }));

    out.push_back(check("sum-rank predicate", [](bool& ok) {
        const std::vector<int> two{2, 2}, three{2, 2, 2}, none{0, 0};
        ok = !rank_condition(two, 2, 3, 2) && rank_condition(three, 3, 3, 2) &&
             rank_condition(none, 2, 2, 2) && !rank_condition(none, 1, 2, 2);
        return std::string();
    }));

    out.push_back(check("MF SNR equals its frequency-domain form", [](bool& ok) {
        Rng rng = make_stream(12, 0, 0, StreamPurpose::test);
        const auto ch = draw_channel(ChannelProfile::equal_taps(3), 2, 3, rng);
        const std::size_t T = 16;
        const auto lambda = channel_frequency_response(ch.taps, T);
        double f = 0.0;
        for (const auto& l : lambda) f += l.squaredNorm();
        f /= static_cast<double>(T) * 0.5;
        const std::vector<ChannelRealization> r{ch};
        const double t = mf_snr(r, 0.5);
        ok = std::abs(t - f) <= 1e-10 * t;
        return fmt("time %.12g freq %.12g", t, f);
    }));

    out.push_back(check("complexity closed forms", [](bool& ok) {
        const auto m = complexity_model(258, 2, 5, 3, 2);
        const auto k1 = complexity_model(258, 2, 5, 1, 2);
        ok = m.mem_proposed == 3096 && k1.adds_proposed == 0 && k1.adds_llr == 0 &&
             std::abs(m.relative_cost - 3.0) < 1e-12;
        return std::string();
    }));

    out.push_back(check("instrumented combining additions", [](bool& ok) {
        // Noise far above the signal: every round fails and all K rounds run.
        const std::size_t n_tx = 2, n_info = 60;
        const CodeConfig code;
        const Interleaver pi = Interleaver::s_random(code.coded_length(n_info), 5, 4);
        const std::size_t T = pi.size() / (2 * n_tx);
        Rng rng = make_stream(13, 0, 0, StreamPurpose::test);
        const TxPacket tx = build_packet(random_bits(n_info, rng), code, pi, n_tx);
        std::vector<ChannelRealization> ch;
        std::vector<std::optional<ChannelRealization>> cc;
        for (int k = 1; k <= 3; ++k) {
            ch.push_back(draw_channel(ChannelProfile::equal_taps(2), n_tx, 2, rng, k));
            cc.emplace_back(std::nullopt);
        }
        bool all = true;
        for (Scheme s : {Scheme::proposed, Scheme::llr_level}) {
            const ArqConfig cfg{3, 4, s, false};
            const PacketResult res = run_packet(tx, ch, cc, 1e4, code, pi, cfg, rng);
            const auto m = complexity_model(T, n_tx, 4, 3, 2);
            const bool ran_all = res.rounds_used == 3 && !res.success();
            const std::uint64_t want = s == Scheme::proposed ? m.adds_proposed : m.adds_llr;
            const std::uint64_t mem = s == Scheme::proposed ? m.mem_proposed : m.mem_llr;
            all = all && ran_all && res.combining_additions == want && res.persisted_real_values == mem;
        }
        ok = all;
        return std::string();
    }));

    out.push_back(check("per-bin covariance blocks agree", [](bool& ok) {
        CciProfile cci{2, {0.5, 0.5}, 0.0, 0.0, 0};
        const std::size_t trials = 8000;
        const auto cs = covariance_structure(cci, 2, 8, 1, 1.0, trials, 14);
        const double tol = 5.0 / std::sqrt(static_cast<double>(trials));
        ok = cs.max_bin_deviation < tol && cs.off_block_relative_rms < tol;
        return fmt("bin deviation %.4f, off-block rms %.4f", cs.max_bin_deviation,
                   cs.off_block_relative_rms);
    }));

    out.push_back(check("SINR slope with and without the sum-rank condition", [](bool& ok) {
        const std::vector<double> nv{1e-2, 1e-3, 1e-4, 1e-5};
        SinrScenario good;
        good.cci = CciProfile{1, {0.5}, 0.0, 0.0, 0};
        good.T = 128;
        good.draws = 6;
        SinrScenario bad = good;
        bad.rounds = 1;
        bad.cci = CciProfile{4, {0.25, 0.25}, 0.0, 0.0, 0};
        const auto g = sinr_sweep(good, nv);
        const auto b = sinr_sweep(bad, nv);
        double gmin = 1e9;
        for (double s : g.decade_slopes) gmin = std::min(gmin, s);
        ok = gmin >= 0.95 && b.decade_slopes.back() <= 0.2;
        return fmt("min slope %.3f, saturated slope %.3f", gmin, b.decade_slopes.back());
    }));

    return out;
}

inline bool report_self_checks(std::ostream& os) {
    bool all = true;
    for (const auto& r : run_self_checks()) {
        os << (r.passed ? "PASS " : "FAIL ") << r.name;
        if (!r.detail.empty()) os << " (" << r.detail << ")";
        os << '\n';
        all = all && r.passed;
    }
    return all;
}

}  // namespace tpc
