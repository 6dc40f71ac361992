// harness.hpp - scenario configs, seeded Monte Carlo BLER sweeps, CSV records
//
// Config format: one `key = value` per line, `#` starts a comment, lists are
// comma separated with optional brackets. Unknown keys are rejected.
//
//   n_tx, n_rx          antennas of the desired link (required)
//   ebn0                Eb/N0 points in dB, `inf` allowed (required)
//   tap_powers          desired-link power profile, sums to 1   [0.5, 0.5]
//   sir_db              signal-to-interference ratio or `none`   none
//   cci_n_tx            interferer transmit antennas             n_tx
//   cci_tap_powers      interferer profile shape (rescaled to sir_db) [0.5, 0.5]
//   cci_rank            rank of the scattering factor, 0 = full  0
//   cci_delta_tx/rx     antenna correlation coefficients         0
//   K                   ARQ delay                                3
//   turbo_iters         turbo iterations per round               5
//   schemes             proposed, llr_level                      both
//   frames              packets per (scheme, Eb/N0)              2000
//   seed                master seed                              0
//   info_bits           information bits per packet              512
//   spread              interleaver S parameter                  16
//   early_exit          stop iterating on success                false
//   out                 output CSV path                          results.csv

#pragma once

#include "arq.hpp"
#include "channel.hpp"
#include "tx.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace tpc {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Scenario {
    std::size_t n_tx = 0;
    std::size_t n_rx = 0;
    ChannelProfile profile;
    CciProfile cci;
    std::optional<double> sir_db;  // nullopt: interference-free
    std::vector<double> ebn0_db;
    int K = 3;
    int turbo_iters = 5;
    std::vector<Scheme> schemes{Scheme::proposed, Scheme::llr_level};
    std::size_t frames = 2000;
    std::uint64_t seed = 0;
    std::size_t info_bits = 512;
    std::size_t spread = 16;
    bool early_exit = false;
    std::string out = "results.csv";

    CodeConfig code() const { return {}; }
    std::size_t code_bits() const { return code().coded_length(info_bits); }
    std::size_t frame_length() const { return code_bits() / (2 * n_tx); }

    /// Interferer profile with tap powers scaled to the configured SIR.
    std::optional<CciProfile> scaled_cci() const {
        if (!sir_db) return std::nullopt;
        CciProfile c = cci;
        const double f = sir_to_cci_scale(*sir_db, n_tx, c.n_tx, c.tap_powers);
        for (auto& p : c.tap_powers) p *= f;
        return c;
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::string body = trim(v);
    if (!body.empty() && body.front() == '[') {
        if (body.back() != ']') throw std::invalid_argument("unterminated list");
        body = body.substr(1, body.size() - 2);
    }
    std::vector<std::string> items;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw std::invalid_argument("empty list item");
        items.push_back(item);
    }
    if (items.empty()) throw std::invalid_argument("empty list");
    return items;
}

inline double parse_double(const std::string& s) {
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw std::invalid_argument("not a number");
    return v;
}

inline long long parse_int(const std::string& s) {
    long long v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw std::invalid_argument("not an integer");
    return v;
}

inline std::size_t parse_count(const std::string& s, bool allow_zero = false) {
    const long long v = parse_int(s);
    if (v < 0 || (!allow_zero && v == 0)) throw std::invalid_argument("must be positive");
    return static_cast<std::size_t>(v);
}

inline bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw std::invalid_argument("not a boolean");
}

inline std::string format_double(double v) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ec == std::errc() ? p : buf);
}

}  // namespace detail

inline Scenario parse_config(const std::string& text) {
    Scenario sc;
    std::map<std::string, int> seen;
    std::optional<std::size_t> cci_n_tx;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string body = detail::trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected `key = value`");
        const std::string key = detail::trim(std::string_view(body).substr(0, eq));
        const std::string val = detail::trim(std::string_view(body).substr(eq + 1));
        auto fail = [&](const std::string& why) {
            return ConfigError("line " + std::to_string(lineno) + ": key '" + key + "': " + why);
        };
        if (val.empty()) throw fail("missing value");
        if (seen.count(key)) throw fail("duplicate key");
        seen[key] = lineno;

        try {
            if (key == "n_tx") sc.n_tx = detail::parse_count(val);
            else if (key == "n_rx") sc.n_rx = detail::parse_count(val);
            else if (key == "ebn0") {
                sc.ebn0_db.clear();
                for (const auto& s : detail::split_list(val)) sc.ebn0_db.push_back(detail::parse_double(s));
            } else if (key == "tap_powers") {
                sc.profile.tap_powers.clear();
                for (const auto& s : detail::split_list(val)) sc.profile.tap_powers.push_back(detail::parse_double(s));
                sc.profile.validate();
            } else if (key == "sir_db") {
                if (val == "none") sc.sir_db.reset();
                else sc.sir_db = detail::parse_double(val);
            } else if (key == "cci_n_tx") cci_n_tx = detail::parse_count(val);
            else if (key == "cci_tap_powers") {
                sc.cci.tap_powers.clear();
                for (const auto& s : detail::split_list(val)) {
                    const double p = detail::parse_double(s);
                    if (!(p >= 0.0)) throw std::invalid_argument("negative power");
                    sc.cci.tap_powers.push_back(p);
                }
            } else if (key == "cci_rank") sc.cci.scatter_rank = detail::parse_count(val, true);
            else if (key == "cci_delta_tx" || key == "cci_delta_rx") {
                const double d = detail::parse_double(val);
                if (!(d >= 0.0 && d < 1.0)) throw std::invalid_argument("must lie in [0, 1)");
                (key == "cci_delta_tx" ? sc.cci.delta_tx : sc.cci.delta_rx) = d;
            } else if (key == "K") sc.K = static_cast<int>(detail::parse_count(val));
            else if (key == "turbo_iters") sc.turbo_iters = static_cast<int>(detail::parse_count(val));
            else if (key == "schemes") {
                sc.schemes.clear();
                for (const auto& s : detail::split_list(val)) sc.schemes.push_back(scheme_from_string(s));
            } else if (key == "frames") sc.frames = detail::parse_count(val);
            else if (key == "seed") sc.seed = static_cast<std::uint64_t>(detail::parse_count(val, true));
            else if (key == "info_bits") sc.info_bits = detail::parse_count(val);
            else if (key == "spread") sc.spread = detail::parse_count(val);
            else if (key == "early_exit") sc.early_exit = detail::parse_bool(val);
            else if (key == "out") sc.out = val;
            else throw fail("unknown key");
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw fail(std::string("malformed value '") + val + "' (" + e.what() + ")");
        }
    }

    for (const char* req : {"n_tx", "n_rx", "ebn0"})
        if (!seen.count(req)) throw ConfigError(std::string("missing required key '") + req + "'");
    sc.cci.n_tx = cci_n_tx.value_or(sc.n_tx);
    if (sc.cci.scatter_rank > std::min(sc.cci.n_tx, sc.n_rx))
        throw ConfigError("key 'cci_rank': exceeds min(cci_n_tx, n_rx)");
    if (sc.sir_db && sc.cci.total_power() <= 0.0)
        throw ConfigError("key 'cci_tap_powers': all zero while sir_db is set");
    if ((sc.info_bits + static_cast<std::size_t>(sc.code().memory())) % sc.n_tx != 0)
        throw ConfigError("key 'n_tx': code frame does not split into whole channel uses");
    if (sc.frame_length() < sc.n_rx)
        throw ConfigError("key 'n_rx': frame shorter than the number of receive antennas");
    return sc;
}

inline Scenario load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read config '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

// ---------------------------------------------------------------------------
// Built-in scenarios.

struct Preset {
    const char* name;
    const char* description;
    const char* text;
};

inline const std::vector<Preset>& presets() {
    static const std::vector<Preset> list = {
        {"fig3", "N_T=N_R=2, L=L'=2 equal taps, SIR=3 dB",
         "n_tx = 2\nn_rx = 2\ntap_powers = [0.5, 0.5]\ncci_n_tx = 2\ncci_tap_powers = [0.5, 0.5]\n"
         "sir_db = 3\nebn0 = [0, 2, 4, 6, 8]\nK = 3\nturbo_iters = 5\nframes = 2000\nseed = 0\n"
         "out = fig3.csv\n"},
        {"fig4", "N_T=N_R=2, L=L'=2 equal taps, SIR=5 dB",
         "n_tx = 2\nn_rx = 2\ntap_powers = [0.5, 0.5]\ncci_n_tx = 2\ncci_tap_powers = [0.5, 0.5]\n"
         "sir_db = 5\nebn0 = [0, 2, 4, 6, 8]\nK = 3\nturbo_iters = 5\nframes = 2000\nseed = 0\n"
         "out = fig4.csv\n"},
        {"fig5", "N_T=4, N_R=2, L=L'=2 equal taps, SIR=5 dB",
         "n_tx = 4\nn_rx = 2\ntap_powers = [0.5, 0.5]\ncci_n_tx = 4\ncci_tap_powers = [0.5, 0.5]\n"
         "sir_db = 5\nebn0 = [2, 4, 6, 8, 10]\nK = 3\nturbo_iters = 5\nframes = 2000\nseed = 0\n"
         "out = fig5.csv\n"},
        {"fig5_rank", "N_T=N_R=2, L=2, rank-one interferer N'_T=1, L'=1, SIR=3 dB",
         "n_tx = 2\nn_rx = 2\ntap_powers = [0.5, 0.5]\ncci_n_tx = 1\ncci_tap_powers = [1]\n"
         "sir_db = 3\nebn0 = [-2, 0, 2, 4, 6]\nK = 3\nturbo_iters = 5\nframes = 2000\nseed = 0\n"
         "out = fig5_rank.csv\n"},
        {"fig6_s1", "N_T=N_R=4, SIR=1 dB, interferer N'_T=4, L'=2 i.i.d.",
         "n_tx = 4\nn_rx = 4\ntap_powers = [0.5, 0.5]\ncci_n_tx = 4\ncci_tap_powers = [0.5, 0.5]\n"
         "sir_db = 1\nebn0 = [-4, -2, 0, 2, 4]\nK = 3\nturbo_iters = 5\nframes = 2000\nseed = 0\n"
         "schemes = proposed\nout = fig6_s1.csv\n"},
        {"fig6_s2", "N_T=N_R=4, SIR=1 dB, interferer N'_T=2, L'=1, rank 2",
         "n_tx = 4\nn_rx = 4\ntap_powers = [0.5, 0.5]\ncci_n_tx = 2\ncci_tap_powers = [1]\n"
         "cci_rank = 2\nsir_db = 1\nebn0 = [-4, -2, 0, 2, 4]\nK = 3\nturbo_iters = 5\nframes = 2000\n"
         "seed = 0\nschemes = proposed\nout = fig6_s2.csv\n"},
        {"clean", "N_T=N_R=2, L=2, no interference, noiseless",
         "n_tx = 2\nn_rx = 2\ntap_powers = [0.5, 0.5]\nsir_db = none\nebn0 = [inf]\nK = 3\n"
         "turbo_iters = 5\nframes = 100\nseed = 0\nout = clean.csv\n"},
    };
    return list;
}

inline std::optional<std::string> preset_text(const std::string& name) {
    for (const auto& p : presets())
        if (name == p.name) return std::string(p.text);
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Sweep

struct BlerRecord {
    Scheme scheme = Scheme::proposed;
    double ebn0_db = 0.0;
    int round = 1;
    std::uint64_t trials = 0;
    std::uint64_t frame_errors = 0;

    double bler() const {
        return trials == 0 ? 0.0 : static_cast<double>(frame_errors) / static_cast<double>(trials);
    }
    bool operator==(const BlerRecord&) const = default;
};

struct WilsonInterval {
    double lo = 0.0;
    double hi = 1.0;
};

/// 95% Wilson score interval for `errors` out of `trials`.
inline WilsonInterval wilson_interval(std::uint64_t errors, std::uint64_t trials, double z = 1.959963984540054) {
    if (trials == 0) return {};
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(errors) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double centre = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

/// Everything one frame needs is derived from (seed, frame index); the
/// scheme and Eb/N0 do not change any draw, so both schemes see the same
/// channels, interferers and normalized noise.
class FrameSimulator {
public:
    explicit FrameSimulator(const Scenario& sc)
        : sc_(sc), code_(sc.code()),
          pi_(Interleaver::s_random(sc.code_bits(), sc.seed, sc.spread)), cci_(sc.scaled_cci()) {}

    const Interleaver& interleaver() const { return pi_; }

    TxPacket packet(std::uint64_t frame) const {
        Rng rng = make_stream(sc_.seed, frame, 0, StreamPurpose::info_bits);
        return build_packet(random_bits(sc_.info_bits, rng), code_, pi_, sc_.n_tx);
    }

    RoundObservation observe(const TxPacket& tx, std::uint64_t frame, int round, double noise_var) const {
        const auto k = static_cast<std::uint64_t>(round);
        Rng ch_rng = make_stream(sc_.seed, frame, k, StreamPurpose::channel);
        ChannelRealization ch = draw_channel(sc_.profile, sc_.n_tx, sc_.n_rx, ch_rng, round);
        std::optional<ChannelRealization> cc;
        std::optional<SymbolFrame> cs;
        if (cci_) {
            Rng cc_rng = make_stream(sc_.seed, frame, k, StreamPurpose::cci_channel);
            Rng cs_rng = make_stream(sc_.seed, frame, k, StreamPurpose::cci_symbols);
            cc = draw_cci_channel(*cci_, sc_.n_rx, cc_rng, round);
            cs = random_qpsk_frame(cci_->n_tx, tx.frame.length(), cs_rng);
        }
        Rng n_rng = make_stream(sc_.seed, frame, k, StreamPurpose::noise);
        ReceivedBlock rb = transmit_round(tx.frame, ch, cc ? &*cc : nullptr, cs ? &*cs : nullptr,
                                          noise_var, n_rng);
        return RoundObservation{std::move(ch), std::move(rb)};
    }

    /// First successful round (1..K) or K+1 on failure.
    int first_success(std::uint64_t frame, Scheme scheme, double ebn0_db) const {
        const TxPacket tx = packet(frame);
        const double nv = noise_variance(ebn0_db, sc_.info_bits, sc_.code_bits());
        ArqConfig cfg{sc_.K, sc_.turbo_iters, scheme, sc_.early_exit};
        const PacketResult res = run_packet(
            tx, [&](int k) { return observe(tx, frame, k, nv); }, code_, pi_, cfg);
        return res.success() ? res.rounds_used : sc_.K + 1;
    }

private:
    Scenario sc_;
    CodeConfig code_;
    Interleaver pi_;
    std::optional<CciProfile> cci_;
};

struct SweepControl {
    std::size_t workers = 1;
    const std::atomic<bool>* stop = nullptr;                 // set to request an early stop
    std::function<void(std::size_t, std::size_t)> progress;  // (frames done, total)
};

/// Frame error at round k iff decoding failed at every round <= k. Records
/// come out sorted by (scheme, Eb/N0 in config order, round).
inline std::vector<BlerRecord> run_sweep(const Scenario& sc, const SweepControl& ctl = {}) {
    if (sc.n_tx == 0 || sc.n_rx == 0 || sc.ebn0_db.empty() || sc.schemes.empty())
        throw std::invalid_argument("run_sweep: incomplete scenario");
    const FrameSimulator sim(sc);
    const std::size_t cells = sc.schemes.size() * sc.ebn0_db.size();
    // outcome[frame * cells + cell] = first success round, 0 = not simulated
    std::vector<int> outcome(sc.frames * cells, 0);
    std::atomic<std::size_t> next{0}, done{0};

    auto worker = [&] {
        for (;;) {
            if (ctl.stop && ctl.stop->load()) return;
            const std::size_t f = next.fetch_add(1);
            if (f >= sc.frames) return;
            for (std::size_t s = 0; s < sc.schemes.size(); ++s)
                for (std::size_t e = 0; e < sc.ebn0_db.size(); ++e)
                    outcome[f * cells + s * sc.ebn0_db.size() + e] =
                        sim.first_success(f, sc.schemes[s], sc.ebn0_db[e]);
            const std::size_t d = done.fetch_add(1) + 1;
            if (ctl.progress) ctl.progress(d, sc.frames);
        }
    };

    const std::size_t nw = std::max<std::size_t>(1, ctl.workers);
    if (nw == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < nw; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::vector<BlerRecord> records;
    for (std::size_t s = 0; s < sc.schemes.size(); ++s)
        for (std::size_t e = 0; e < sc.ebn0_db.size(); ++e)
            for (int k = 1; k <= sc.K; ++k) {
                BlerRecord r{sc.schemes[s], sc.ebn0_db[e], k, 0, 0};
                const std::size_t cell = s * sc.ebn0_db.size() + e;
                for (std::size_t f = 0; f < sc.frames; ++f) {
                    const int first = outcome[f * cells + cell];
                    if (first == 0) continue;  // interrupted before this frame ran
                    ++r.trials;
                    if (first > k) ++r.frame_errors;
                }
                records.push_back(r);
            }
    return records;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* kCsvHeader = "scheme,ebn0_db,round,trials,frame_errors,bler";

inline std::string format_records(const std::vector<BlerRecord>& records, bool with_ci = false) {
    std::string out = kCsvHeader;
    if (with_ci) out += ",ci_lo,ci_hi";
    out += '\n';
    char buf[64];
    for (const auto& r : records) {
        out += to_string(r.scheme);
        out += ',';
        out += detail::format_double(r.ebn0_db);
        out += ',' + std::to_string(r.round) + ',' + std::to_string(r.trials) + ',' +
               std::to_string(r.frame_errors) + ',';
        std::snprintf(buf, sizeof buf, "%.6g", r.bler());
        out += buf;
        if (with_ci) {
            const auto ci = wilson_interval(r.frame_errors, r.trials);
            std::snprintf(buf, sizeof buf, ",%.6g,%.6g", ci.lo, ci.hi);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

inline void emit_records(const std::vector<BlerRecord>& records, const std::string& path,
                         bool with_ci = false) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << format_records(records, with_ci);
    f.flush();
    if (!f) throw IoError("write to '" + path + "' failed");
}

inline std::vector<BlerRecord> parse_records(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || line.rfind(kCsvHeader, 0) != 0)
        throw std::invalid_argument("parse_records: missing header");
    std::vector<BlerRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() < 6) throw std::invalid_argument("parse_records: short row");
        BlerRecord r;
        r.scheme = scheme_from_string(f[0]);
        r.ebn0_db = detail::parse_double(f[1]);
        r.round = static_cast<int>(detail::parse_int(f[2]));
        r.trials = static_cast<std::uint64_t>(detail::parse_int(f[3]));
        r.frame_errors = static_cast<std::uint64_t>(detail::parse_int(f[4]));
        out.push_back(r);
    }
    return out;
}

}  // namespace tpc
