#include "kronrec/experiment.hpp"

#include "kronrec/errors.hpp"
#include "kronrec/rts.hpp"

#include "json.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#ifndef KRONREC_VERSION
#define KRONREC_VERSION "0.0.0"
#endif

namespace kronrec {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

const char* library_version() { return KRONREC_VERSION; }

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 failed");
    }
    std::ostringstream out;
    out << std::hex << std::setfill('0');
    for (unsigned int i = 0; i < len; ++i) out << std::setw(2) << static_cast<int>(digest[i]);
    return out.str();
}

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file_atomic(const fs::path& p, const std::string& content) {
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << content;
        if (!out) throw Error("write failed for " + tmp.string());
    }
    fs::rename(tmp, p);
}

const char* system_name(SystemKind k) {
    switch (k) {
        case SystemKind::Linear:
            return "linear";
        case SystemKind::Polynomial:
            return "polynomial";
        case SystemKind::Skew:
            return "skew";
    }
    return "?";
}

GroupPoint origin(const GroupDescriptor& K) {
    GroupPoint p;
    p.torus.assign(static_cast<std::size_t>(K.torus_rank), TorusCoord::exact(QuadraticNumber{}));
    p.torsion.assign(K.torsion_orders.size(), 0);
    return p;
}

json complex_json(std::complex<double> z) { return json{{"re", z.real()}, {"im", z.imag()}}; }

/// Writes artifacts into the output directory and remembers their hashes.
class ArtifactWriter {
public:
    explicit ArtifactWriter(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

    void write(const std::string& name, const std::string& content) {
        write_file_atomic(dir_ / name, content);
        entries_.push_back({{"path", name}, {"bytes", content.size()}, {"sha256", sha256_hex(content)}});
        names_.push_back(name);
    }

    json manifest_entries() const { return entries_; }
    std::vector<std::string> names() const { return names_; }

private:
    fs::path dir_;
    json entries_ = json::array();
    std::vector<std::string> names_;
};

std::string density_csv(const ReturnSet& R) {
    std::ostringstream out;
    out << "n,density\n";
    const auto& w = R.window();
    const std::size_t size = w.size();
    const std::size_t stride = std::max<std::size_t>(1, size / 1024);
    std::size_t count = 0;
    for (std::size_t i = 0; i < size; ++i) {
        count += R.bits()[i];
        if ((i + 1) % stride == 0 || i + 1 == size) {
            out << w.lo + static_cast<std::int64_t>(i) << ','
                << format_double(static_cast<double>(count) / static_cast<double>(i + 1)) << '\n';
        }
    }
    return out.str();
}

std::string spectrum_jsonl(const std::vector<SpectrumPeak>& peaks) {
    std::ostringstream out;
    write_spectrum_jsonl(out, peaks);
    return out.str();
}

std::string grid_csv(const ReturnSet& R, const SpectralPipelineOptions& opts) {
    const std::int64_t N = R.window().hi;
    std::size_t G = opts.scan.grid_size;
    if (G == 0) {
        G = 1;
        while (G < 8 * static_cast<std::size_t>(N)) G <<= 1;
    }
    const SpectrumGrid grid(R, G, N);
    std::ostringstream out;
    write_grid_csv(out, grid, std::max<std::size_t>(1, G / 65536));
    return out.str();
}

std::vector<std::string> stabilizer_warnings(const SystemSpec& s, const std::string& label) {
    std::vector<std::string> out;
    if (!s.U || s.U->empty()) return out;
    const auto report = closure_stabilizer(*s.U);
    if (!report.is_trivial) {
        out.push_back("closure of " + label + " has a nontrivial stabilizer " + report.to_string() +
                      "; equal return sets do not imply isomorphic systems");
    }
    return out;
}

void log_line(std::ostream* log, const std::string& s) {
    if (log) *log << s << '\n';
}

}  // namespace

// ---------------------------------------------------------------------------
// Cache

std::string SystemSpec::canonical(const Window& w) const {
    std::ostringstream s;
    s << "kronrec-return-set v1\n";
    s << "system=" << system_name(kind) << '\n';
    s << "K=" << K.to_string() << '\n';
    s << "alpha=" << point_to_string(alpha) << '\n';
    s << "U=" << (U ? U->to_string() : std::string("none")) << '\n';
    if (kind == SystemKind::Polynomial) s << "P=" << polynomial.to_string() << '\n';
    if (x0) s << "x0=" << point_to_string(*x0) << '\n';
    s << "window=" << w.lo << ',' << w.hi << '\n';
    s << "guard=" << format_double(kMembershipGuard) << '\n';
    return s.str();
}

ReturnSetCache::ReturnSetCache(fs::path dir) : dir_(std::move(dir)) {}

std::string ReturnSetCache::key(const SystemSpec& system, const Window& window) {
    return sha256_hex(system.canonical(window));
}

std::optional<ReturnSet> ReturnSetCache::lookup(const std::string& key, std::string* warning) const {
    const fs::path data = dir_ / (key + ".rts");
    const fs::path sum = dir_ / (key + ".sha256");
    if (!fs::exists(data)) return std::nullopt;
    try {
        const std::string content = read_file(data);
        const std::string expected = fs::exists(sum) ? read_file(sum) : std::string();
        if (sha256_hex(content) != expected) {
            if (warning) *warning = "cache entry " + key + " failed its checksum; recomputing";
            return std::nullopt;
        }
        return parse_rts(content);
    } catch (const std::exception& e) {
        if (warning) *warning = "cache entry " + key + " is unreadable (" + e.what() + "); recomputing";
        return std::nullopt;
    }
}

void ReturnSetCache::store(const std::string& key, const ReturnSet& R) const {
    fs::create_directories(dir_);
    const std::string content = to_rts(R);
    write_file_atomic(dir_ / (key + ".rts"), content);
    write_file_atomic(dir_ / (key + ".sha256"), sha256_hex(content));
}

ReturnSetCache::GcReport ReturnSetCache::gc() const {
    GcReport report;
    if (!fs::exists(dir_)) return report;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir_)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
        const auto ext = p.extension().string();
        bool keep = false;
        if (ext == ".rts") {
            keep = lookup(p.stem().string()).has_value();
        } else if (ext == ".sha256") {
            fs::path data = p;
            data.replace_extension(".rts");
            keep = fs::exists(data) && lookup(p.stem().string()).has_value();
        }
        if (keep) {
            ++report.kept;
        } else {
            fs::remove(p);
            ++report.removed;
        }
    }
    return report;
}

GenerationOutcome generate_return_set(const SystemSpec& system, const Window& window, unsigned threads,
                                      const ReturnSetCache* cache, std::ostream* log) {
    if (!system.U) throw ShapeError("system has no open set");
    const std::string key = ReturnSetCache::key(system, window);
    if (cache) {
        std::string warning;
        if (auto hit = cache->lookup(key, &warning)) {
            log_line(log, "cache hit " + key);
            return {std::move(*hit), true, {}};
        }
        if (!warning.empty()) log_line(log, "warning: " + warning);
        log_line(log, "cache miss " + key);
    }
    OrbitOptions opts;
    opts.threads = std::max(1u, threads);
    GeneratedReturnSet g;
    switch (system.kind) {
        case SystemKind::Linear:
            g = return_set_linear(system.K, system.alpha, *system.U, window, opts, system.x0);
            break;
        case SystemKind::Polynomial:
            g = return_set_polynomial(system.K, system.alpha, system.polynomial, *system.U, window, opts);
            break;
        case SystemKind::Skew: {
            const SkewSystem S{system.alpha.torus.at(0)};
            g = return_set_skew(S, system.x0.value_or(origin(system.K)), *system.U, window, opts);
            break;
        }
    }
    if (g.stats.boundary_ambiguous > 0) {
        log_line(log, "warning: " + std::to_string(g.stats.boundary_ambiguous) +
                          " orbit points were within the guard of the boundary and left out");
    }
    if (cache) cache->store(key, g.set);
    return {std::move(g.set), false, g.stats};
}

// ---------------------------------------------------------------------------
// Runner

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ShapeError*>(&e)) return kExitConfig;
    if (dynamic_cast<const CapExceeded*>(&e)) return kExitCap;
    if (dynamic_cast<const VerificationFailure*>(&e) || dynamic_cast<const ToleranceConflict*>(&e)) {
        return kExitVerification;
    }
    return kExitFailure;
}

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    if (options.format != "json" && options.format != "csv") {
        throw ConfigError(0, "--format must be json or csv");
    }
    RunResult result;
    ArtifactWriter out(options.out);
    std::optional<ReturnSetCache> cache;
    if (options.cache_dir) cache.emplace(*options.cache_dir);
    const ReturnSetCache* cache_ptr = cache ? &*cache : nullptr;
    const bool csv = options.format == "csv";
    const std::uint64_t seed = options.seed.value_or(config.seed);
    const unsigned threads = std::max(1u, options.threads);
    json summary;

    auto generate = [&](const SystemSpec& s) {
        return generate_return_set(s, config.window, threads, cache_ptr, options.log).set;
    };

    switch (config.kind) {
        case ExperimentKind::Simulate: {
            const auto R = generate(config.system);
            out.write("return_set.rts", to_rts(R));
            if (csv) out.write("density.csv", density_csv(R));
            result.summary = std::to_string(R.count()) + " return times in [" + std::to_string(config.window.lo) +
                             ", " + std::to_string(config.window.hi) + "]";
            break;
        }
        case ExperimentKind::Spectrum: {
            const auto R = generate(config.system);
            const auto peaks = refined_spectrum(R, config.spectral);
            out.write("spectrum.jsonl", spectrum_jsonl(peaks));
            if (csv) out.write("spectrum_grid.csv", grid_csv(R, config.spectral));
            result.summary = std::to_string(peaks.size()) + " spectral peaks";
            break;
        }
        case ExperimentKind::Reconstruct: {
            const auto R = generate(config.system);
            const auto peaks = refined_spectrum(R, config.spectral);
            out.write("spectrum.jsonl", spectrum_jsonl(peaks));
            if (csv) out.write("spectrum_grid.csv", grid_csv(R, config.spectral));
            ReconstructOptions ro;
            ro.top_m = config.spectral.top_m;
            const auto rec = reconstruct_group(peaks, config.spectral.height, ro);
            out.write("reconstruction.json", reconstruction_json(rec) + "\n");
            result.summary = "reconstructed " + rec.group.to_string();
            if (config.expect_group && !rec.group.isomorphic_to(*config.expect_group)) {
                result.exit_code = kExitVerification;
                result.summary += ", expected " + config.expect_group->to_string();
            }
            break;
        }
        case ExperimentKind::Compare: {
            const auto R1 = generate(config.system);
            const auto R2 = generate(*config.second);
            const auto verdict = compare_systems(R1, R2, config.compare_tol, config.spectral);
            json j;
            j["verdict"] = to_string(verdict.kind);
            j["return_sets_equal"] = R1 == R2;
            if (verdict.kind == CompareKind::Distinguished) {
                j["theta"] = verdict.theta;
                j["amplitude1"] = complex_json(verdict.amplitude1);
                j["amplitude2"] = complex_json(verdict.amplitude2);
            }
            j["tolerance"] = config.compare_tol;
            json warnings = json::array();
            for (const auto& w : stabilizer_warnings(config.system, "U")) warnings.push_back(w);
            for (const auto& w : stabilizer_warnings(*config.second, "U2")) warnings.push_back(w);
            j["warnings"] = warnings;
            out.write("compare.json", j.dump(2) + "\n");
            result.summary = verdict.to_string();
            if (!warnings.empty()) result.summary += " (" + std::to_string(warnings.size()) + " stabilizer warning(s))";
            break;
        }
        case ExperimentKind::GsetSearch: {
            auto limits = config.search;
            limits.seed = seed;
            limits.threads = threads;
            const auto report = gset::search_counterexamples(gset::parse_catalog(config.catalog), limits);
            std::ostringstream s;
            gset::write_search_jsonl(s, report);
            out.write("search.jsonl", s.str());
            std::size_t bad = 0;
            for (const auto& c : report.counterexamples) bad += !gset::verify_certificate(c).ok;
            result.summary = std::to_string(report.actions.size()) + " actions, " +
                             std::to_string(report.counterexamples.size()) + " certificates";
            if (bad > 0) {
                result.exit_code = kExitVerification;
                result.summary += ", " + std::to_string(bad) + " failed verification";
            }
            break;
        }
        case ExperimentKind::GsetReconstruct: {
            const auto G = config.gset_group.empty() ? gset::group_from_generators(config.generators)
                                                     : gset::catalog_group(config.gset_group);
            const auto A = config.action_index
                               ? gset::transitive_actions(G, true, config.search.subgroup_cap)[*config.action_index].action
                               : gset::PermAction::natural(G);
            const auto U = gset::point_set(A.degree(), config.subset);
            const auto S = gset::return_subset(A, config.base_point, U);
            const auto rec = gset::reconstruct_from_return_subset(G, S);
            const bool simple = gset::is_simple(A, U);
            const auto phi = gset::actions_isomorphic(A, config.base_point, rec.action, rec.base_point);
            json j;
            j["group"] = G->name().empty() ? config.generators : G->name();
            j["group_order"] = G->order();
            j["degree"] = A.degree();
            j["base_point"] = config.base_point;
            j["subset"] = config.subset;
            j["simple"] = simple;
            j["setwise_stabilizer_order"] = gset::setwise_stabilizer(A, U).size();
            j["return_subset_size"] = S.count();
            j["reconstructed_degree"] = rec.action.degree();
            json base = json::array();
            const auto blocks = rec.blocks.blocks();
            for (auto g : blocks[rec.base_point]) base.push_back(gset::to_cycles(G->element(g)));
            j["base_block"] = base;
            j["isomorphic"] = phi.has_value();
            if (phi) j["bijection"] = *phi;
            out.write("gset_reconstruct.json", j.dump(2) + "\n");
            result.summary = std::string(phi ? "isomorphic" : "not isomorphic") + " (degree " +
                             std::to_string(A.degree()) + " -> " + std::to_string(rec.action.degree()) + ")";
            if (simple && !phi) {
                result.exit_code = kExitVerification;
                result.summary += "; a simple subset must reconstruct its action";
            }
            break;
        }
    }

    json manifest;
    manifest["tool"] = "kronrec";
    manifest["version"] = library_version();
    manifest["experiment"] = to_string(config.kind);
    manifest["config_sha256"] = sha256_hex(config.canonical_text);
    manifest["seed"] = seed;
    manifest["format"] = options.format;
    manifest["artifacts"] = out.manifest_entries();
    manifest["exit_code"] = result.exit_code;
    out.write("manifest.json", manifest.dump(2) + "\n");
    result.artifacts = out.names();
    return result;
}

}  // namespace kronrec
