#include "kronrec/errors.hpp"
#include "kronrec/experiment.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <iostream>

namespace {

struct Flags {
    std::string config;
    std::string out = "out";
    std::string cache;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string format = "json";
};

void add_run_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "Experiment config file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", f.out, "Output directory")->capture_default_str();
    cmd->add_option("--seed", f.seed, "Random seed (overrides the config)");
    cmd->add_option("--threads", f.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--format", f.format, "Report format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
    cmd->add_option("--cache", f.cache, "Return-set cache directory (default $KRONREC_CACHE or .kronrec-cache)");
}

std::string default_cache(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("KRONREC_CACHE")) return env;
    return ".kronrec-cache";
}

int run(kronrec::ExperimentKind kind, const Flags& f, bool seed_given) {
    const auto cfg = kronrec::load_config(f.config, kind);
    kronrec::RunOptions opts;
    opts.out = f.out;
    opts.cache_dir = default_cache(f.cache);
    if (seed_given) opts.seed = f.seed;
    opts.threads = f.threads;
    opts.format = f.format;
    opts.log = &std::cerr;
    const auto result = kronrec::run_experiment(cfg, opts);
    std::cout << kronrec::to_string(kind) << ": " << result.summary << '\n';
    for (const auto& a : result.artifacts) std::cout << "  " << (std::filesystem::path(f.out) / a).string() << '\n';
    return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Return-time sets of group rotations and their spectral reconstruction"};
    app.set_version_flag("--version", kronrec::library_version());
    app.require_subcommand(1);

    Flags flags;
    struct Sub {
        CLI::App* cmd;
        kronrec::ExperimentKind kind;
    };
    std::vector<Sub> subs;
    auto add = [&](CLI::App* parent, const char* name, const char* help, kronrec::ExperimentKind kind) {
        auto* cmd = parent->add_subcommand(name, help);
        add_run_flags(cmd, flags);
        subs.push_back({cmd, kind});
    };
    add(&app, "simulate", "Generate a return-time set", kronrec::ExperimentKind::Simulate);
    add(&app, "spectrum", "Estimate the spectrum of a return-time set", kronrec::ExperimentKind::Spectrum);
    add(&app, "reconstruct", "Rebuild the group and rotation from the spectrum", kronrec::ExperimentKind::Reconstruct);
    add(&app, "compare", "Compare two systems through their return-time sets", kronrec::ExperimentKind::Compare);

    auto* gset = app.add_subcommand("gset", "Finite group actions");
    gset->require_subcommand(1);
    add(gset, "search", "Search catalog actions for non-simple subsets with trivial stabilizer",
        kronrec::ExperimentKind::GsetSearch);
    add(gset, "reconstruct", "Rebuild a transitive action from a return subset",
        kronrec::ExperimentKind::GsetReconstruct);

    auto* cache = app.add_subcommand("cache", "Return-set cache maintenance");
    cache->require_subcommand(1);
    auto* gc = cache->add_subcommand("gc", "Delete corrupt and orphaned cache files");
    std::string cache_dir;
    gc->add_option("--cache", cache_dir, "Cache directory (default $KRONREC_CACHE or .kronrec-cache)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kronrec::kExitConfig;
    }

    try {
        if (gc->parsed()) {
            const auto report = kronrec::ReturnSetCache(default_cache(cache_dir)).gc();
            std::cout << "cache gc: kept " << report.kept << " files, removed " << report.removed << '\n';
            return kronrec::kExitOk;
        }
        for (const auto& s : subs) {
            if (s.cmd->parsed()) return run(s.kind, flags, s.cmd->count("--seed") > 0);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kronrec::exit_code_for(e);
    }
    return kronrec::kExitFailure;
}
