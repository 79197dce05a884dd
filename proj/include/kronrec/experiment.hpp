#pragma once

// Experiment configs, the content-addressed return-set cache and the runner
// used by the kronrec command line tool.

#include "kronrec/group.hpp"
#include "kronrec/gset.hpp"
#include "kronrec/open_set.hpp"
#include "kronrec/orbit.hpp"
#include "kronrec/spectral.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kronrec {

const char* library_version();

enum class ExperimentKind { Simulate, Spectrum, Reconstruct, Compare, GsetSearch, GsetReconstruct };
const char* to_string(ExperimentKind k);
std::optional<ExperimentKind> parse_experiment_kind(std::string_view text);

enum class SystemKind { Linear, Polynomial, Skew };

struct SystemSpec {
    SystemKind kind = SystemKind::Linear;
    GroupDescriptor K;
    GroupPoint alpha;
    std::optional<OpenSet> U;
    IntegerPolynomial polynomial = IntegerPolynomial::identity();
    /// Start point; the identity when absent.
    std::optional<GroupPoint> x0;

    /// Canonical description of the system and window; the cache key hashes it.
    std::string canonical(const Window& w) const;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Simulate;
    SystemSpec system;
    /// Second system of a comparison.
    std::optional<SystemSpec> second;
    Window window;
    SpectralPipelineOptions spectral;
    double compare_tol = 1e-2;
    std::optional<GroupDescriptor> expect_group;

    std::string catalog;
    gset::SearchLimits search;
    std::string gset_group;
    std::string generators;
    /// Index into the transitive actions (up to conjugacy); natural action when absent.
    std::optional<std::size_t> action_index;
    std::uint32_t base_point = 0;
    std::vector<std::uint32_t> subset;

    std::uint64_t seed = 0;
    /// "key = value" lines in file order without comments; hashed into the manifest.
    std::string canonical_text;
};

/// Flat "key = value" text, '#' starts a comment. Unknown keys, duplicate keys
/// and keys that the experiment does not use are rejected with the line number.
/// `expected` supplies the experiment kind when the file has no `experiment` key.
ExperimentConfig parse_config(std::string_view text, std::optional<ExperimentKind> expected = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& path,
                             std::optional<ExperimentKind> expected = std::nullopt);

std::string sha256_hex(std::string_view data);

class ReturnSetCache {
public:
    explicit ReturnSetCache(std::filesystem::path dir);

    static std::string key(const SystemSpec& system, const Window& window);

    /// Entry whose content still matches its checksum. A corrupt entry is a
    /// miss and `warning` explains why.
    std::optional<ReturnSet> lookup(const std::string& key, std::string* warning = nullptr) const;
    void store(const std::string& key, const ReturnSet& R) const;

    struct GcReport {
        std::size_t kept = 0;
        std::size_t removed = 0;
    };
    /// Deletes corrupt entries, orphaned checksums and temporary files.
    GcReport gc() const;

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
};

struct GenerationOutcome {
    ReturnSet set;
    bool cache_hit = false;
    GenerationStats stats;
};

GenerationOutcome generate_return_set(const SystemSpec& system, const Window& window, unsigned threads,
                                      const ReturnSetCache* cache = nullptr, std::ostream* log = nullptr);

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitConfig = 2,
    kExitVerification = 3,
    kExitCap = 4,
};

struct RunOptions {
    std::filesystem::path out = "out";
    std::optional<std::filesystem::path> cache_dir;
    /// Overrides the config seed.
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    /// "json" or "csv"; csv adds plot data.
    std::string format = "json";
    std::ostream* log = nullptr;
};

struct RunResult {
    int exit_code = kExitOk;
    /// Paths relative to the output directory, manifest last.
    std::vector<std::string> artifacts;
    std::string summary;
};

/// Runs one experiment and writes its artifacts plus manifest.json.
RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options);

/// Exit code for an exception escaping run_experiment or parse_config.
int exit_code_for(const std::exception& e);

}  // namespace kronrec
