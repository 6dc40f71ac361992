// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset.
#include "oracle.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

using namespace tpc;

namespace {

struct Verdict {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

// 1: recursive combiner against the explicit per-bin inverse.
Verdict oracle_equivalence() {
    Rng rng = make_stream(9001, 0, 0, StreamPurpose::test);
    const std::size_t dims[] = {1, 2, 4};
    double worst = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t nt = dims[rep % 3], nr = dims[(rep / 3) % 3];
        const std::size_t T = (rep / 9) % 2 ? 8 : 4, L = 1 + (rep / 18) % 2;
        const int k = 1 + (rep / 36) % 3;
        std::vector<std::vector<ComplexMatrix>> lambda;
        std::vector<ComplexMatrix> theta;
        std::vector<BlockVector> y_f;
        for (int u = 0; u < k; ++u) {
            std::vector<ComplexMatrix> taps;
            for (std::size_t l = 0; l < L; ++l)
                taps.push_back(oracle::random_matrix(static_cast<Eigen::Index>(nr), static_cast<Eigen::Index>(nt), rng));
            lambda.push_back(channel_frequency_response(taps, T));
            theta.push_back(oracle::random_hpd(static_cast<Eigen::Index>(nr), rng));
            y_f.push_back(oracle::random_block_vector(nr, T, rng));
        }
        std::vector<double> llr(2 * nt * T);
        std::normal_distribution<double> n(0.0, 2.0);
        for (double& v : llr) v = n(rng);
        const SoftStats soft = soft_symbol_stats(llr, nt, T);

        CombinerState st(nt, T);
        for (int u = 0; u < k; ++u) {
            const auto ui = static_cast<std::size_t>(u);
            st.update(lambda[ui], hermitian_inverse(theta[ui]), y_f[ui]);
            if (u + 1 < k) st.commit_round(theta[ui]);
        }
        const BlockVector got = mmse_combine(st, soft).z_f;
        const BlockVector want = oracle::direct_combine(lambda, theta, y_f, soft.var_avg, soft.mean_f);
        worst = std::max(worst, (got.data() - want.data()).norm() / want.data().norm());
    }
    return {worst < 1e-8, fmt("200 instances, worst relative deviation %.3g (limit 1e-8)", worst)};
}

// 2: block-circulant channel matrix against per-bin responses.
Verdict diagonalization() {
    Rng rng = make_stream(9002, 0, 0, StreamPurpose::test);
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t T = 4 + static_cast<std::size_t>(rep % 5), nr = 1 + rep % 4, nt = 1 + (rep / 4) % 4;
        const std::size_t L = std::min<std::size_t>(T, 1 + static_cast<std::size_t>(rep % 3));
        std::vector<ComplexMatrix> taps;
        for (std::size_t l = 0; l < L; ++l)
            taps.push_back(oracle::random_matrix(static_cast<Eigen::Index>(nr), static_cast<Eigen::Index>(nt), rng));
        const ComplexMatrix h = oracle::block_circulant(taps, T);
        const ComplexMatrix f = oracle::dft_matrix(T);
        const ComplexMatrix d = oracle::kron_identity(f, static_cast<Eigen::Index>(nr)) * h *
                                oracle::kron_identity(f, static_cast<Eigen::Index>(nt)).adjoint();
        const auto lambda = channel_frequency_response(taps, T);
        ComplexMatrix want = ComplexMatrix::Zero(d.rows(), d.cols());
        for (std::size_t i = 0; i < T; ++i)
            want.block(static_cast<Eigen::Index>(i * nr), static_cast<Eigen::Index>(i * nt),
                       static_cast<Eigen::Index>(nr), static_cast<Eigen::Index>(nt)) = lambda[i];
        worst = std::max(worst, (d - want).norm() / h.norm());
    }
    return {worst < 1e-10, fmt("50 instances, worst residual %.3g (limit 1e-10)", worst)};
}

// 3: structure of the multi-round CCI-plus-noise covariance.
Verdict covariance_structure_check() {
    const std::size_t trials = 10000;
    const CciProfile cci{2, {0.5, 0.5}, 0.0, 0.0, 0};
    const auto cs = covariance_structure(cci, 2, 16, 2, 0.5, trials, 9003);
    const double limit = 5.0 / std::sqrt(static_cast<double>(trials));
    return {cs.off_block_frobenius_ratio < limit,
            fmt("off-block Frobenius ratio %.4f (limit %.4f); per-entry off-block rms %.4f, "
                "max bin deviation %.4f",
                cs.off_block_frobenius_ratio, limit, cs.off_block_relative_rms, cs.max_bin_deviation)};
}

// 4: genie-feedback SINR growth against the sum-rank condition.
Verdict sinr_slopes() {
    const std::vector<double> nv{1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
    SinrScenario good;
    good.n_tx = 2;
    good.n_rx = 4;
    good.rounds = 2;
    good.cci = CciProfile{1, {0.5}, 0.0, 0.0, 0};
    good.T = 128;
    good.draws = 10;
    const std::vector<int> r_good{1, 1};
    SinrScenario bad = good;
    bad.rounds = 1;
    bad.cci = CciProfile{4, {0.25, 0.25}, 0.0, 0.0, 0};
    const std::vector<int> r_bad{4};
    if (!rank_condition(r_good, 2, 4, 2) || rank_condition(r_bad, 1, 4, 2))
        return {false, "rank predicate disagrees with the chosen cases"};
    const auto g = sinr_sweep(good, nv), b = sinr_sweep(bad, nv);
    const double gmin = *std::min_element(g.decade_slopes.begin(), g.decade_slopes.end());
    const double blast = b.decade_slopes.back();
    return {gmin >= 0.95 && blast <= 0.2,
            fmt("condition holds: min slope %.3f (>= 0.95); fails: last-decade slope %.3f (<= 0.2)", gmin, blast)};
}

// 5: Max-Log-MAP against exhaustive ML, plus the extrinsic identity.
Verdict decoder_ml() {
    const oracle::Codebook cb = oracle::enumerate_codebook(12);
    Rng rng = make_stream(9005, 0, 0, StreamPurpose::test);
    std::normal_distribution<double> n(0.0, 1.0);
    int mismatches = 0, identity_breaks = 0;
    for (int f = 0; f < 100; ++f) {
        const Bits code = conv_encode(random_bits(12, rng));
        std::vector<double> llr(code.size());
        for (std::size_t j = 0; j < code.size(); ++j) llr[j] = 2.0 * ((code[j] ? -1.0 : 1.0) + n(rng));
        const SisoOutput out = siso_decode(llr);
        if (out.info_bits != oracle::ml_decode(cb, llr)) ++mismatches;
        for (std::size_t j = 0; j < llr.size(); ++j)
            if (out.extrinsic[j] + llr[j] != out.app[j]) ++identity_breaks;
    }
    return {mismatches == 0 && identity_breaks == 0,
            "100 frames over 4096 codewords: " + std::to_string(mismatches) + " ML mismatches, " +
                std::to_string(identity_breaks) + " identity breaks"};
}

// 6: noiseless, interference-free preset.
Verdict clean_preset() {
    Scenario sc = parse_config(*preset_text("clean"));
    sc.frames = 100;
    std::string detail;
    bool ok = true;
    for (const auto& r : run_sweep(sc)) {
        if (r.round != 1) continue;
        ok = ok && r.trials == 100 && r.frame_errors == 0;
        detail += to_string(r.scheme) + " round 1 errors " + std::to_string(r.frame_errors) + "/" +
                  std::to_string(r.trials) + "; ";
    }
    return {ok, detail};
}

const BlerRecord& find(const std::vector<BlerRecord>& rec, Scheme s, int round) {
    for (const auto& r : rec)
        if (r.scheme == s && r.round == round) return r;
    throw std::logic_error("missing record");
}

std::string describe(const BlerRecord& r) {
    const auto w = wilson_interval(r.frame_errors, r.trials);
    return to_string(r.scheme) + " r" + std::to_string(r.round) + " " + std::to_string(r.frame_errors) + "/" +
           std::to_string(r.trials) + fmt(" [%.4f, %.4f]", w.lo, w.hi);
}

// 7: proposed beats LLR-level combining with significance.
Verdict scheme_ordering(std::size_t workers) {
    Scenario sc = parse_config(*preset_text("fig3"));
    sc.ebn0_db = {8.0};
    sc.frames = 2000;
    sc.schemes = {Scheme::proposed, Scheme::llr_level};
    const auto rec = run_sweep(sc, {workers, nullptr, {}});
    const auto& p = find(rec, Scheme::proposed, 3);
    const auto& l = find(rec, Scheme::llr_level, 3);
    const bool ok = wilson_interval(p.frame_errors, p.trials).hi < wilson_interval(l.frame_errors, l.trials).lo;
    return {ok, describe(p) + " vs " + describe(l) + "; round 2: " + describe(find(rec, Scheme::proposed, 2)) +
                    " vs " + describe(find(rec, Scheme::llr_level, 2))};
}

// 8: BLER falls across rounds at each figure preset's middle point.
Verdict round_monotonicity(std::size_t workers) {
    bool ok = true;
    std::string detail;
    for (const char* name : {"fig3", "fig4", "fig5", "fig5_rank", "fig6_s1", "fig6_s2"}) {
        Scenario sc = parse_config(*preset_text(name));
        sc.ebn0_db = {sc.ebn0_db[sc.ebn0_db.size() / 2]};
        sc.frames = 2000;
        const auto rec = run_sweep(sc, {workers, nullptr, {}});
        for (Scheme s : sc.schemes) {
            const double b1 = find(rec, s, 1).bler(), b2 = find(rec, s, 2).bler(), b3 = find(rec, s, 3).bler();
            const bool strict = b1 > b2 && b2 > b3;
            const bool gain = b1 >= 2.0 * b3 && b1 > 0.0;
            ok = ok && strict && gain;
            detail += std::string(name) + fmt(" @%g dB ", sc.ebn0_db[0]) + to_string(s) +
                      fmt(" %.4f > %.4f > %.4f", b1, b2, b3) + (strict && gain ? "" : " (violated)") + "; ";
        }
    }
    return {ok, detail};
}

// 9: instrumented counters against the closed forms.
Verdict counters() {
    int checked = 0, bad = 0;
    const CodeConfig code;
    for (std::size_t n_tx : {1, 2, 4})
        for (std::size_t n_rx : {1, 2})
            for (int K : {1, 2, 3})
                for (int iters : {1, 5})
                    for (Scheme sch : {Scheme::proposed, Scheme::llr_level}) {
                        const std::size_t n_info = 60;
                        const Interleaver pi = Interleaver::s_random(code.coded_length(n_info), 7, 4);
                        Rng rng = make_stream(9009, n_tx, static_cast<std::uint64_t>(K), StreamPurpose::test);
                        const TxPacket tx = build_packet(random_bits(n_info, rng), code, pi, n_tx);
                        std::vector<ChannelRealization> ch;
                        std::vector<std::optional<ChannelRealization>> cc;
                        for (int k = 1; k <= K; ++k) {
                            ch.push_back(draw_channel(ChannelProfile::equal_taps(2), n_tx, n_rx, rng, k));
                            cc.emplace_back(std::nullopt);
                        }
                        const PacketResult r = run_packet(tx, ch, cc, 1e4, code, pi, {K, iters, sch, false}, rng);
                        const std::size_t T = pi.size() / (2 * n_tx);
                        const auto m = complexity_model(T, n_tx, static_cast<std::uint64_t>(iters),
                                                        static_cast<std::uint64_t>(K), 2);
                        ++checked;
                        bool ok = r.rounds_used == K;
                        if (sch == Scheme::proposed)
                            ok = ok && r.combining_additions == m.adds_proposed &&
                                 r.persisted_real_values == m.mem_proposed &&
                                 r.covariance_real_values == static_cast<std::size_t>(K) * n_rx * n_rx;
                        else
                            ok = ok && r.combining_additions == m.adds_llr && r.persisted_real_values == m.mem_llr &&
                                 r.covariance_real_values == 0;
                        if (!ok) ++bad;
                    }
    return {bad == 0, std::to_string(checked) + " configurations, " + std::to_string(bad) + " mismatches"};
}

// 10: output bytes independent of the worker count.
Verdict determinism() {
    Scenario sc = parse_config(*preset_text("fig3"));
    sc.frames = 50;
    const auto dir = std::filesystem::temp_directory_path();
    const std::string a = (dir / "tpc_accept_w1.csv").string(), b = (dir / "tpc_accept_w8.csv").string();
    emit_records(run_sweep(sc, {1, nullptr, {}}), a);
    emit_records(run_sweep(sc, {8, nullptr, {}}), b);
    auto slurp = [](const std::string& p) {
        std::ifstream f(p, std::ios::binary);
        std::stringstream ss;
        ss << f.rdbuf();
        return ss.str();
    };
    const std::string x = slurp(a), y = slurp(b);
    return {!x.empty() && x == y, std::to_string(x.size()) + " bytes, " + (x == y ? "identical" : "different")};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());

    const std::vector<std::pair<int, std::function<Verdict()>>> criteria{
        {1, oracle_equivalence},
        {2, diagonalization},
        {3, covariance_structure_check},
        {4, sinr_slopes},
        {5, decoder_ml},
        {6, clean_preset},
        {7, [&] { return scheme_ordering(workers); }},
        {8, [&] { return round_monotonicity(workers); }},
        {9, counters},
        {10, determinism},
    };

    int failed = 0;
    for (const auto& [n, fn] : criteria) {
        if (!only.empty() && !only.count(n)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!v.pass) ++failed;
        std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << v.detail
                  << fmt(" (%.1f s)", secs) << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
