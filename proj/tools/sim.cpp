// sim - BLER sweeps for turbo packet combining over MIMO ISI channels with CCI

#include <tpc/tpc.hpp>
#include <tpc/selfcheck.hpp>

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

enum Exit { kOk = 0, kConfig = 1, kIo = 2, kVerify = 3 };

std::atomic<bool> g_stop{false};

extern "C" void on_sigint(int) { g_stop.store(true); }

int cmd_run(const std::string& path, std::optional<std::size_t> frames,
            std::optional<std::uint64_t> seed, std::optional<std::string> out,
            std::size_t workers, bool with_ci, bool quiet) {
    tpc::Scenario sc;
    try {
        if (auto text = tpc::preset_text(path); text && !std::filesystem::exists(path))
            sc = tpc::parse_config(*text);
        else
            sc = tpc::load_config(path);
    } catch (const tpc::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    }
    if (frames) sc.frames = *frames;
    if (seed) sc.seed = *seed;
    if (out) sc.out = *out;

    std::signal(SIGINT, on_sigint);
    tpc::SweepControl ctl;
    ctl.workers = workers;
    ctl.stop = &g_stop;
    if (!quiet)
        ctl.progress = [](std::size_t done, std::size_t total) {
            if (done % 50 == 0 || done == total)
                std::fprintf(stderr, "\r%zu/%zu frames", done, total);
            if (done == total) std::fputc('\n', stderr);
        };

    std::vector<tpc::BlerRecord> records;
    try {
        records = tpc::run_sweep(sc, ctl);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    }
    if (g_stop.load()) std::cerr << "\ninterrupted, writing partial results\n";
    try {
        tpc::emit_records(records, sc.out, with_ci);
    } catch (const tpc::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    }
    if (!quiet) std::cerr << "wrote " << sc.out << '\n';
    return kOk;
}

int cmd_presets(const std::string& dir) {
    for (const auto& p : tpc::presets()) std::cout << p.name << "\t" << p.description << '\n';
    if (dir.empty()) return kOk;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    for (const auto& p : tpc::presets()) {
        const auto file = std::filesystem::path(dir) / (std::string(p.name) + ".cfg");
        std::ofstream f(file, std::ios::binary);
        f << "# " << p.description << '\n' << p.text;
        if (!f) {
            std::cerr << "error: cannot write " << file << '\n';
            return kIo;
        }
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Turbo packet combining ARQ simulator"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run a BLER sweep from a config file or preset name");
    std::string config;
    std::optional<std::size_t> frames;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::size_t workers = 1;
    bool with_ci = false, quiet = false;
    run->add_option("config", config, "Config path or preset name")->required();
    run->add_option("--frames", frames, "Packets per (scheme, Eb/N0)");
    run->add_option("--seed", seed, "Master seed");
    run->add_option("--out", out, "Output CSV path");
    run->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
    run->add_flag("--ci", with_ci, "Append 95% Wilson interval columns");
    run->add_flag("-q,--quiet", quiet, "No progress output");

    auto* verify = app.add_subcommand("verify", "Run the analysis property suite");

    auto* list = app.add_subcommand("presets", "List shipped figure configs");
    std::string write_dir;
    list->add_option("--write", write_dir, "Also write each preset to DIR/<name>.cfg");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    if (*run) return cmd_run(config, frames, seed, out, workers, with_ci, quiet);
    if (*verify) return tpc::report_self_checks(std::cout) ? kOk : kVerify;
    if (*list) return cmd_presets(write_dir);
    return kConfig;
}
