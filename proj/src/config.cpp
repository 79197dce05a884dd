#include "kronrec/errors.hpp"
#include "kronrec/experiment.hpp"
#include "text_util.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace kronrec {

namespace {

using Kinds = unsigned;

constexpr Kinds bit(ExperimentKind k) { return 1u << static_cast<unsigned>(k); }

constexpr Kinds kAll = 0x3f;
constexpr Kinds kSystems = bit(ExperimentKind::Simulate) | bit(ExperimentKind::Spectrum) |
                           bit(ExperimentKind::Reconstruct) | bit(ExperimentKind::Compare);
constexpr Kinds kSpectral = bit(ExperimentKind::Spectrum) | bit(ExperimentKind::Reconstruct) |
                            bit(ExperimentKind::Compare);

const std::map<std::string, Kinds, std::less<>>& known_keys() {
    static const std::map<std::string, Kinds, std::less<>> keys = {
        {"experiment", kAll},
        {"seed", kAll},
        {"system", kSystems},
        {"K", kSystems},
        {"alpha", kSystems},
        {"U", kSystems},
        {"polynomial", kSystems},
        {"x0", kSystems},
        {"window", kSystems},
        {"N", kSystems},
        {"system2", bit(ExperimentKind::Compare)},
        {"K2", bit(ExperimentKind::Compare)},
        {"alpha2", bit(ExperimentKind::Compare)},
        {"U2", bit(ExperimentKind::Compare)},
        {"polynomial2", bit(ExperimentKind::Compare)},
        {"x02", bit(ExperimentKind::Compare)},
        {"grid_size", kSpectral},
        {"threshold", kSpectral},
        {"refine_tol", kSpectral},
        {"height", bit(ExperimentKind::Reconstruct)},
        {"top_m", bit(ExperimentKind::Reconstruct)},
        {"expect_group", bit(ExperimentKind::Reconstruct)},
        {"compare_tol", bit(ExperimentKind::Compare)},
        {"catalog", bit(ExperimentKind::GsetSearch)},
        {"exhaustive_degree", bit(ExperimentKind::GsetSearch)},
        {"sample_size", bit(ExperimentKind::GsetSearch)},
        {"subgroup_cap", bit(ExperimentKind::GsetSearch) | bit(ExperimentKind::GsetReconstruct)},
        {"gset_group", bit(ExperimentKind::GsetReconstruct)},
        {"generators", bit(ExperimentKind::GsetReconstruct)},
        {"action", bit(ExperimentKind::GsetReconstruct)},
        {"base_point", bit(ExperimentKind::GsetReconstruct)},
        {"subset", bit(ExperimentKind::GsetReconstruct)},
    };
    return keys;
}

struct Entry {
    std::string value;
    int line = 0;
};

class Reader {
public:
    explicit Reader(std::map<std::string, Entry> entries) : entries_(std::move(entries)) {}

    const Entry* find(const std::string& key) const {
        const auto it = entries_.find(key);
        return it == entries_.end() ? nullptr : &it->second;
    }

    /// Runs f on the value, reporting any failure against the key's line.
    template <class F>
    auto parse(const std::string& key, const Entry& e, F f) const {
        try {
            return f(e.value);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& ex) {
            throw ConfigError(e.line, key + ": " + ex.what());
        }
    }

    template <class F>
    auto parse(const std::string& key, F f) const {
        const Entry* e = find(key);
        if (!e) throw ConfigError(0, "missing key '" + key + "'");
        return parse(key, *e, f);
    }

private:
    std::map<std::string, Entry> entries_;
};

template <class T>
T parse_number(const std::string& s) {
    T v{};
    const auto* end = s.data() + s.size();
    const auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end) throw Error("expected a number, got '" + s + "'");
    return v;
}

std::uint64_t parse_count(const std::string& s) { return parse_number<std::uint64_t>(s); }

double parse_positive(const std::string& s) {
    const double v = parse_number<double>(s);
    if (!(v > 0)) throw Error("expected a positive number, got '" + s + "'");
    return v;
}

Window parse_window(const std::string& s) {
    std::string body = detail::trim(s);
    if (body.size() < 2 || body.front() != '[' || body.back() != ']') throw Error("expected [lo, hi]");
    const auto parts = detail::split(body.substr(1, body.size() - 2), ',');
    if (parts.size() != 2) throw Error("expected [lo, hi]");
    return Window::make(parse_number<std::int64_t>(detail::trim(parts[0])),
                        parse_number<std::int64_t>(detail::trim(parts[1])));
}

std::vector<std::uint32_t> parse_points(const std::string& s) {
    std::string body = detail::trim(s);
    if (!body.empty() && body.front() == '{') {
        if (body.back() != '}') throw Error("unclosed '{'");
        body = body.substr(1, body.size() - 2);
    }
    std::vector<std::uint32_t> out;
    if (detail::trim(body).empty()) return out;
    for (const auto& p : detail::split(body, ',')) out.push_back(parse_number<std::uint32_t>(detail::trim(p)));
    return out;
}

SystemKind parse_system_kind(const std::string& s) {
    if (s == "linear") return SystemKind::Linear;
    if (s == "polynomial") return SystemKind::Polynomial;
    if (s == "skew") return SystemKind::Skew;
    throw Error("unknown system '" + s + "' (linear, polynomial, skew)");
}

/// Keys of the second system fall back to those of the first.
SystemSpec read_system(const Reader& r, const std::string& suffix) {
    auto pick = [&](const std::string& key) -> std::pair<std::string, const Entry*> {
        if (const Entry* e = r.find(key + suffix)) return {key + suffix, e};
        if (!suffix.empty()) {
            if (const Entry* e = r.find(key)) return {key, e};
        }
        return {key + suffix, nullptr};
    };
    auto required = [&](const std::string& key) {
        auto found = pick(key);
        if (!found.second) throw ConfigError(0, "missing key '" + key + suffix + "'");
        return found;
    };

    SystemSpec s;
    if (auto [key, e] = pick("system"); e) s.kind = r.parse(key, *e, parse_system_kind);

    const GroupDescriptor T2 = GroupDescriptor::make(2, {});
    if (s.kind == SystemKind::Skew) {
        s.K = T2;
        if (auto [key, e] = pick("K"); e) {
            const auto K = r.parse(key, *e, [](const std::string& v) { return parse_group(v); });
            if (!(K == T2)) throw ConfigError(e->line, key + ": skew products live on T^2");
        }
        auto [akey, a] = required("alpha");
        s.alpha = r.parse(akey, *a, [](const std::string& v) {
            return parse_point(GroupDescriptor::make(1, {}), v);
        });
    } else {
        auto [kkey, k] = required("K");
        s.K = r.parse(kkey, *k, [](const std::string& v) { return parse_group(v); });
        auto [akey, a] = required("alpha");
        s.alpha = r.parse(akey, *a, [&](const std::string& v) { return parse_point(s.K, v); });
    }
    auto [ukey, u] = required("U");
    s.U = r.parse(ukey, *u, [&](const std::string& v) { return parse_open_set(s.K, v); });

    auto [pkey, p] = pick("polynomial");
    if (s.kind == SystemKind::Polynomial) {
        if (!p) throw ConfigError(0, "missing key '" + pkey + "' for system = polynomial");
        s.polynomial = r.parse(pkey, *p, [](const std::string& v) { return IntegerPolynomial::parse(v); });
    } else if (p && pkey == "polynomial" + suffix) {
        throw ConfigError(p->line, pkey + ": needs system = polynomial");
    }

    if (auto [key, e] = pick("x0"); e) {
        if (s.kind == SystemKind::Polynomial) throw ConfigError(e->line, key + ": polynomial orbits start at 0");
        s.x0 = r.parse(key, *e, [&](const std::string& v) { return parse_point(s.K, v); });
    }
    return s;
}

}  // namespace

const char* to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::Simulate:
            return "simulate";
        case ExperimentKind::Spectrum:
            return "spectrum";
        case ExperimentKind::Reconstruct:
            return "reconstruct";
        case ExperimentKind::Compare:
            return "compare";
        case ExperimentKind::GsetSearch:
            return "gset-search";
        case ExperimentKind::GsetReconstruct:
            return "gset-reconstruct";
    }
    return "?";
}

std::optional<ExperimentKind> parse_experiment_kind(std::string_view text) {
    for (auto k : {ExperimentKind::Simulate, ExperimentKind::Spectrum, ExperimentKind::Reconstruct,
                   ExperimentKind::Compare, ExperimentKind::GsetSearch, ExperimentKind::GsetReconstruct}) {
        if (text == to_string(k)) return k;
    }
    return std::nullopt;
}

ExperimentConfig parse_config(std::string_view text, std::optional<ExperimentKind> expected) {
    std::map<std::string, Entry> entries;
    ExperimentConfig cfg;
    const auto lines = detail::split(text, '\n');
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const int line = static_cast<int>(i) + 1;
        std::string s = lines[i];
        if (const auto hash = s.find('#'); hash != std::string::npos) s.resize(hash);
        s = detail::trim(s);
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError(line, "expected 'key = value'");
        const std::string key = detail::trim(std::string_view(s).substr(0, eq));
        const std::string value = detail::trim(std::string_view(s).substr(eq + 1));
        if (!known_keys().count(key)) throw ConfigError(line, "unknown key '" + key + "'");
        if (value.empty()) throw ConfigError(line, "empty value for '" + key + "'");
        if (const auto it = entries.find(key); it != entries.end()) {
            throw ConfigError(line, "duplicate key '" + key + "' (first set on line " +
                                        std::to_string(it->second.line) + ")");
        }
        entries.emplace(key, Entry{value, line});
        cfg.canonical_text += key + " = " + value + "\n";
    }

    if (const auto it = entries.find("experiment"); it != entries.end()) {
        const auto kind = parse_experiment_kind(it->second.value);
        if (!kind) throw ConfigError(it->second.line, "unknown experiment '" + it->second.value + "'");
        if (expected && *expected != *kind) {
            throw ConfigError(it->second.line, std::string("config is for experiment '") + to_string(*kind) +
                                                   "', not '" + to_string(*expected) + "'");
        }
        cfg.kind = *kind;
    } else if (expected) {
        cfg.kind = *expected;
    } else {
        throw ConfigError(0, "missing key 'experiment'");
    }

    for (const auto& [key, e] : entries) {
        if (!(known_keys().find(key)->second & bit(cfg.kind))) {
            throw ConfigError(e.line, "key '" + key + "' is not used by experiment '" + to_string(cfg.kind) + "'");
        }
    }

    const Reader r(entries);
    if (r.find("seed")) cfg.seed = r.parse("seed", parse_count);

    if (bit(cfg.kind) & kSystems) {
        cfg.system = read_system(r, "");
        const Entry* w = r.find("window");
        const Entry* n = r.find("N");
        if (w && n) throw ConfigError(n->line, "give either 'window' or 'N', not both");
        if (w) {
            cfg.window = r.parse("window", *w, parse_window);
        } else if (n) {
            cfg.window = r.parse("N", *n, [](const std::string& v) {
                return Window::first(static_cast<std::int64_t>(parse_count(v)));
            });
        } else {
            throw ConfigError(0, "missing key 'window' (or 'N')");
        }
        if (cfg.kind == ExperimentKind::Compare) cfg.second = read_system(r, "2");
        if (cfg.kind != ExperimentKind::Simulate && cfg.window.lo != 1) {
            const int line = w ? w->line : 0;
            throw ConfigError(line, "spectral experiments need a window starting at 1");
        }
    }

    if (bit(cfg.kind) & kSpectral) {
        if (r.find("grid_size")) cfg.spectral.scan.grid_size = r.parse("grid_size", parse_count);
        if (r.find("threshold")) cfg.spectral.scan.threshold = r.parse("threshold", parse_positive);
        if (r.find("refine_tol")) cfg.spectral.refine_tol = r.parse("refine_tol", parse_positive);
    }
    if (cfg.kind == ExperimentKind::Reconstruct) {
        if (r.find("height")) {
            cfg.spectral.height = static_cast<std::int64_t>(r.parse("height", parse_count));
            if (cfg.spectral.height < 1) throw ConfigError(r.find("height")->line, "height must be >= 1");
        }
        if (r.find("top_m")) cfg.spectral.top_m = r.parse("top_m", parse_count);
        if (r.find("expect_group")) {
            cfg.expect_group = r.parse("expect_group", [](const std::string& v) { return parse_group(v); });
        }
    }
    if (cfg.kind == ExperimentKind::Compare && r.find("compare_tol")) {
        cfg.compare_tol = r.parse("compare_tol", parse_positive);
    }

    if (cfg.kind == ExperimentKind::GsetSearch) {
        cfg.catalog = r.parse("catalog", [](const std::string& v) {
            gset::parse_catalog(v);
            return v;
        });
        if (r.find("exhaustive_degree")) cfg.search.exhaustive_degree = r.parse("exhaustive_degree", parse_count);
        if (r.find("sample_size")) cfg.search.sample_size = r.parse("sample_size", parse_count);
        if (r.find("subgroup_cap")) cfg.search.subgroup_cap = r.parse("subgroup_cap", parse_count);
        if (cfg.search.exhaustive_degree > 24) {
            throw ConfigError(r.find("exhaustive_degree")->line, "exhaustive_degree is limited to 24");
        }
    }

    if (cfg.kind == ExperimentKind::GsetReconstruct) {
        const Entry* name = r.find("gset_group");
        const Entry* gens = r.find("generators");
        if ((name != nullptr) == (gens != nullptr)) {
            throw ConfigError(name ? name->line : 0, "give exactly one of 'gset_group' and 'generators'");
        }
        gset::GroupPtr G;
        if (name) {
            cfg.gset_group = name->value;
            G = r.parse("gset_group", *name, [](const std::string& v) { return gset::catalog_group(v); });
        } else {
            cfg.generators = gens->value;
            G = r.parse("generators", *gens, [](const std::string& v) { return gset::group_from_generators(v); });
        }
        if (r.find("subgroup_cap")) cfg.search.subgroup_cap = r.parse("subgroup_cap", parse_count);
        std::size_t degree = G->degree();
        if (const Entry* a = r.find("action"); a && a->value != "natural") {
            cfg.action_index = r.parse("action", *a, parse_count);
            const auto actions = r.parse("action", *a, [&](const std::string&) {
                return gset::transitive_actions(G, true, cfg.search.subgroup_cap);
            });
            if (*cfg.action_index >= actions.size()) {
                throw ConfigError(a->line, "action: index " + std::to_string(*cfg.action_index) + " but the group has " +
                                               std::to_string(actions.size()) + " transitive actions");
            }
            degree = actions[*cfg.action_index].action.degree();
        }
        if (r.find("base_point")) {
            cfg.base_point = static_cast<std::uint32_t>(r.parse("base_point", parse_count));
            if (cfg.base_point >= degree) throw ConfigError(r.find("base_point")->line, "base_point outside the action");
        }
        cfg.subset = r.parse("subset", parse_points);
        for (auto x : cfg.subset) {
            if (x >= degree) {
                throw ConfigError(r.find("subset")->line, "subset: point " + std::to_string(x) + " outside degree " +
                                                              std::to_string(degree));
            }
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, std::optional<ExperimentKind> expected) {
    std::ifstream in(path);
    if (!in) throw ConfigError(0, "cannot read config '" + path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    try {
        return parse_config(text.str(), expected);
    } catch (const ConfigError& e) {
        throw ConfigError(e.line(), e.detail(), path.string());
    }
}

}  // namespace kronrec
