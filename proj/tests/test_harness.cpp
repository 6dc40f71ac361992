#include <tpc/tpc.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace tpc;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("tpc_test_" + name)).string();
}

}  // namespace

TEST(ParseConfig, MinimalWithDefaults) {
    const Scenario sc = parse_config("n_tx = 2\nn_rx = 2\nebn0 = [4]\nframes = 10\n");
    EXPECT_EQ(sc.n_tx, 2u);
    EXPECT_EQ(sc.ebn0_db, std::vector<double>{4.0});
    EXPECT_EQ(sc.frames, 10u);
    EXPECT_EQ(sc.K, 3);
    EXPECT_EQ(sc.turbo_iters, 5);
    EXPECT_EQ(sc.seed, 0u);
    EXPECT_FALSE(sc.sir_db.has_value());
    EXPECT_EQ(sc.schemes.size(), 2u);
    EXPECT_EQ(sc.frame_length(), 258u);
}

TEST(ParseConfig, SirNoneDisablesInterference) {
    const Scenario sc = parse_config("n_tx = 2\nn_rx = 2\nebn0 = 4\nsir_db = none\n");
    EXPECT_FALSE(sc.scaled_cci().has_value());
    const Scenario with = parse_config("n_tx = 2\nn_rx = 2\nebn0 = 4\nsir_db = 3\n");
    ASSERT_TRUE(with.scaled_cci().has_value());
    EXPECT_NEAR(with.scaled_cci()->total_power(), std::pow(10.0, -0.3), 1e-12);
}

TEST(ParseConfig, CommentsListsAndInf) {
    const Scenario sc = parse_config(
        "# header\n n_tx = 4 # four\nn_rx=2\nebn0 = 0, 2.5, inf\nschemes = [proposed]\n"
        "cci_n_tx = 1\ncci_tap_powers = [1]\ncci_rank = 1\nearly_exit = true\n");
    EXPECT_EQ(sc.ebn0_db.size(), 3u);
    EXPECT_EQ(sc.ebn0_db[1], 2.5);
    EXPECT_TRUE(std::isinf(sc.ebn0_db[2]));
    EXPECT_EQ(sc.schemes, std::vector<Scheme>{Scheme::proposed});
    EXPECT_EQ(sc.cci.n_tx, 1u);
    EXPECT_TRUE(sc.early_exit);
    EXPECT_EQ(sc.frame_length(), 129u);
}

TEST(ParseConfig, NegativeCountNamesKey) {
    try {
        parse_config("n_rx = 2\nn_tx = -1\nebn0 = 4\n");
        FAIL() << "no error";
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("n_tx"), std::string::npos);
        EXPECT_NE(msg.find("line 2"), std::string::npos);
    }
}

TEST(ParseConfig, Errors) {
    EXPECT_THROW(parse_config("n_tx = 2\nn_rx = 2\n"), ConfigError);                   // missing ebn0
    EXPECT_THROW(parse_config("n_tx = 2\nn_rx = 2\nebn0 = 4\nfoo = 1\n"), ConfigError);  // unknown
    EXPECT_THROW(parse_config("n_tx = 2\nn_rx = 2\nebn0 = four\n"), ConfigError);
    EXPECT_THROW(parse_config("n_tx = 2\nn_rx = 2\nebn0 = 4\ntap_powers = [0.9, 0.9]\n"), ConfigError);
    EXPECT_THROW(parse_config("n_tx = 2\nn_rx = 2\nebn0 = 4\ncci_rank = 3\n"), ConfigError);
    EXPECT_THROW(parse_config("n_tx = 2\nn_rx = 2\nebn0 = 4\nn_tx = 2\n"), ConfigError);
    EXPECT_THROW(parse_config("n_tx = 2\nn_rx = 2\nebn0 = 4\nschemes = chase\n"), ConfigError);
    EXPECT_THROW(parse_config("n_tx 2\n"), ConfigError);
    EXPECT_THROW(parse_config("n_tx = 5\nn_rx = 2\nebn0 = 4\n"), ConfigError);  // 1032 not divisible by 10
}

TEST(Presets, AllParse) {
    for (const auto& p : presets()) EXPECT_NO_THROW(parse_config(p.text)) << p.name;
    EXPECT_TRUE(preset_text("fig3").has_value());
    EXPECT_FALSE(preset_text("fig99").has_value());
}

TEST(Presets, CaptionParameters) {
    const Scenario f3 = parse_config(*preset_text("fig3"));
    EXPECT_EQ(f3.n_tx, 2u);
    EXPECT_EQ(*f3.sir_db, 3.0);
    const Scenario f5 = parse_config(*preset_text("fig5"));
    EXPECT_EQ(f5.n_tx, 4u);
    EXPECT_EQ(f5.n_rx, 2u);
    const Scenario r = parse_config(*preset_text("fig6_s2"));
    EXPECT_EQ(r.cci.scatter_rank, 2u);
    EXPECT_EQ(r.cci.n_tx, 2u);
}

TEST(RunSweep, HighSnrCleanIsErrorFree) {
    Scenario sc = parse_config("n_tx = 2\nn_rx = 2\nebn0 = 60\nframes = 50\ninfo_bits = 64\n");
    for (const auto& r : run_sweep(sc)) {
        EXPECT_EQ(r.trials, 50u);
        EXPECT_EQ(r.frame_errors, 0u);
    }
}

TEST(RunSweep, VeryLowSnrFails) {
    Scenario sc = parse_config("n_tx = 2\nn_rx = 2\nebn0 = -20\nframes = 10\ninfo_bits = 64\n");
    for (const auto& r : run_sweep(sc)) {
        if (r.round == 1) EXPECT_EQ(r.bler(), 1.0);
        EXPECT_LE(r.bler(), 1.0);
    }
}

TEST(RunSweep, MonotoneAndSorted) {
    Scenario sc = parse_config(
        "n_tx = 2\nn_rx = 2\nebn0 = [0, 3]\nsir_db = 3\nframes = 12\ninfo_bits = 64\nseed = 4\n");
    const auto rec = run_sweep(sc);
    ASSERT_EQ(rec.size(), 2u * 2u * 3u);
    for (std::size_t i = 0; i < rec.size(); ++i) {
        if (i > 0 && rec[i].round > 1) {
            EXPECT_LE(rec[i].frame_errors, rec[i - 1].frame_errors);
        }
        EXPECT_EQ(rec[i].round, static_cast<int>(i % 3) + 1);
    }
    EXPECT_EQ(rec.front().scheme, Scheme::proposed);
    EXPECT_EQ(rec.back().scheme, Scheme::llr_level);
}

TEST(RunSweep, WorkerCountDoesNotChangeOutput) {
    Scenario sc = parse_config(
        "n_tx = 2\nn_rx = 2\nebn0 = [2]\nsir_db = 3\nframes = 16\ninfo_bits = 64\nseed = 9\n");
    const std::string a = format_records(run_sweep(sc, {1, nullptr, {}}));
    const std::string b = format_records(run_sweep(sc, {4, nullptr, {}}));
    EXPECT_EQ(a, b);
}

TEST(RunSweep, StopFlagYieldsPartialCounts) {
    Scenario sc = parse_config("n_tx = 2\nn_rx = 2\nebn0 = 4\nframes = 20\ninfo_bits = 64\n");
    std::atomic<bool> stop{true};
    for (const auto& r : run_sweep(sc, {1, &stop, {}})) EXPECT_EQ(r.trials, 0u);
}

TEST(Csv, EmptyIsHeaderOnly) {
    const std::string path = temp_path("empty.csv");
    emit_records({}, path);
    EXPECT_EQ(slurp(path), "scheme,ebn0_db,round,trials,frame_errors,bler\n");
}

TEST(Csv, OneRecordTwoLines) {
    const std::string path = temp_path("one.csv");
    emit_records({{Scheme::proposed, 8.0, 3, 2000, 7, }}, path);
    EXPECT_EQ(slurp(path), "scheme,ebn0_db,round,trials,frame_errors,bler\nproposed,8,3,2000,7,0.0035\n");
}

TEST(Csv, SixSignificantDigits) {
    const std::string s = format_records({{Scheme::llr_level, 2.5, 1, 3, 1}});
    EXPECT_NE(s.find(",0.333333\n"), std::string::npos);
    EXPECT_EQ(s.find('\r'), std::string::npos);
}

TEST(Csv, RoundTrip) {
    const std::vector<BlerRecord> rec{{Scheme::proposed, -2.25, 1, 100, 40},
                                      {Scheme::proposed, 0.1, 2, 100, 3},
                                      {Scheme::llr_level, 8.0, 3, 2000, 0}};
    EXPECT_EQ(parse_records(format_records(rec)), rec);
    EXPECT_EQ(parse_records(format_records(rec, true)), rec);
}

TEST(Csv, WilsonColumns) {
    const std::string s = format_records({{Scheme::proposed, 0.0, 1, 100, 0}}, true);
    EXPECT_EQ(s.substr(0, s.find('\n')), "scheme,ebn0_db,round,trials,frame_errors,bler,ci_lo,ci_hi");
    const auto w = wilson_interval(0, 100);
    EXPECT_NEAR(w.lo, 0.0, 1e-12);
    EXPECT_NEAR(w.hi, 0.0370, 1e-4);
    const auto h = wilson_interval(50, 100);
    EXPECT_NEAR(h.lo, 0.4038, 1e-4);
    EXPECT_NEAR(h.hi, 0.5962, 1e-4);
}

TEST(Csv, UnwritablePathThrows) {
    EXPECT_THROW(emit_records({}, "/nonexistent-dir/x.csv"), IoError);
}
