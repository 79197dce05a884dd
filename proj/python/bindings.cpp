#include "kronrec/errors.hpp"
#include "kronrec/experiment.hpp"
#include "kronrec/gset.hpp"
#include "kronrec/rts.hpp"
#include "kronrec/spectral.hpp"

#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace pybind11::literals;
using namespace kronrec;

namespace {

SystemSpec make_system(const std::string& K, const std::string& alpha, const std::string& U,
                       const std::optional<std::string>& polynomial) {
    SystemSpec s;
    s.K = parse_group(K);
    s.alpha = parse_point(s.K, alpha);
    s.U = parse_open_set(s.K, U);
    if (polynomial) {
        s.kind = SystemKind::Polynomial;
        s.polynomial = IntegerPolynomial::parse(*polynomial);
    }
    return s;
}

SystemSpec make_skew(const std::string& alpha, const std::string& U) {
    SystemSpec s;
    s.kind = SystemKind::Skew;
    s.K = GroupDescriptor::make(2, {});
    s.alpha = parse_point(GroupDescriptor::make(1, {}), alpha);
    s.U = parse_open_set(s.K, U);
    return s;
}

ReturnSet generate(const SystemSpec& s, std::pair<std::int64_t, std::int64_t> window, unsigned threads) {
    py::gil_scoped_release release;
    return generate_return_set(s, Window::make(window.first, window.second), threads).set;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Return-time sets of group rotations, their spectra and finite G-set reconstruction.";
    m.attr("__version__") = library_version();

    static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
    static py::exception<ConfigError> config_error(m, "ConfigError", error.ptr());
    static py::exception<ShapeError> shape_error(m, "ShapeError", error.ptr());
    static py::exception<CapExceeded> cap_exceeded(m, "CapExceeded", error.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ConfigError& e) {
            config_error(e.what());
        } catch (const ShapeError& e) {
            shape_error(e.what());
        } catch (const CapExceeded& e) {
            cap_exceeded(e.what());
        } catch (const Error& e) {
            error(e.what());
        }
    });

    py::class_<ReturnSet>(m, "ReturnSet")
        .def_property_readonly("window", [](const ReturnSet& R) { return std::pair(R.window().lo, R.window().hi); })
        .def_property_readonly("provenance", &ReturnSet::provenance)
        .def("members", &ReturnSet::members)
        .def("__contains__", &ReturnSet::contains)
        .def("__len__", &ReturnSet::count)
        .def("__eq__", [](const ReturnSet& a, const ReturnSet& b) { return a == b; })
        .def("to_rts", [](const ReturnSet& R) { return to_rts(R); })
        .def_static("from_rts", [](const std::string& text) { return parse_rts(text); }, "text"_a);

    py::class_<SpectrumPeak>(m, "SpectrumPeak")
        .def_readonly("theta", &SpectrumPeak::theta)
        .def_readonly("amplitude", &SpectrumPeak::amplitude)
        .def_readonly("convergence_gap", &SpectrumPeak::convergence_gap)
        .def_readonly("N", &SpectrumPeak::N_used)
        .def_readonly("flagged", &SpectrumPeak::flagged)
        .def("__repr__", [](const SpectrumPeak& p) {
            return "SpectrumPeak(theta=" + format_double(p.theta) + ", |A|=" + format_double(std::abs(p.amplitude)) + ")";
        });

    m.def("simulate",
          [](const std::string& K, const std::string& alpha, const std::string& U,
             std::pair<std::int64_t, std::int64_t> window, std::optional<std::string> polynomial, unsigned threads) {
              return generate(make_system(K, alpha, U, polynomial), window, threads);
          },
          "K"_a, "alpha"_a, "U"_a, "window"_a, "polynomial"_a = py::none(), "threads"_a = 1,
          "Return-time set of n -> P(n) alpha (P the identity by default) over an inclusive window.");
    m.def("simulate_skew",
          [](const std::string& alpha, const std::string& U, std::pair<std::int64_t, std::int64_t> window,
             unsigned threads) { return generate(make_skew(alpha, U), window, threads); },
          "alpha"_a, "U"_a, "window"_a, "threads"_a = 1);

    m.def("cesaro_average", &cesaro_average, "R"_a, "theta"_a, "N"_a);
    m.def("spectrum",
          [](const ReturnSet& R, std::size_t grid_size, double threshold) {
              SpectralPipelineOptions o;
              o.scan.grid_size = grid_size;
              o.scan.threshold = threshold;
              py::gil_scoped_release release;
              return refined_spectrum(R, o);
          },
          "R"_a, "grid_size"_a = 0, "threshold"_a = 0.0);
    m.def("reconstruct_json",
          [](const std::vector<SpectrumPeak>& peaks, std::int64_t height, std::size_t top_m) {
              ReconstructOptions o;
              o.top_m = top_m;
              return reconstruction_json(reconstruct_group(peaks, height, o));
          },
          "peaks"_a, "height"_a = 16, "top_m"_a = 25);
    m.def("closure_stabilizer",
          [](const std::string& K, const std::string& U) {
              const auto r = closure_stabilizer(parse_open_set(parse_group(K), U));
              return py::dict("description"_a = r.to_string(), "trivial"_a = r.is_trivial,
                              "full_torus_directions"_a = r.full_torus_directions);
          },
          "K"_a, "U"_a);

    m.def("gset_order", [](const std::string& name) { return gset::catalog_group(name)->order(); }, "name"_a);
    m.def("gset_is_simple",
          [](const std::string& name, const std::vector<std::uint32_t>& subset) {
              const auto A = gset::PermAction::natural(gset::catalog_group(name));
              return gset::is_simple(A, gset::point_set(A.degree(), subset));
          },
          "group"_a, "subset"_a);
    m.def("gset_roundtrip",
          [](const std::string& name, const std::vector<std::uint32_t>& subset, std::uint32_t base_point) {
              const auto G = gset::catalog_group(name);
              const auto A = gset::PermAction::natural(G);
              const auto U = gset::point_set(A.degree(), subset);
              const auto rec = gset::reconstruct_from_return_subset(G, gset::return_subset(A, base_point, U));
              return gset::actions_isomorphic(A, base_point, rec.action, rec.base_point).has_value();
          },
          "group"_a, "subset"_a, "base_point"_a = 0,
          "Whether the action rebuilt from the return subset matches the natural action.");

    m.def("run_config",
          [](const std::filesystem::path& config, const std::filesystem::path& out,
             std::optional<std::filesystem::path> cache, std::optional<std::uint64_t> seed, unsigned threads,
             const std::string& format) {
              const auto cfg = load_config(config);
              RunOptions o;
              o.out = out;
              o.cache_dir = cache;
              o.seed = seed;
              o.threads = threads;
              o.format = format;
              RunResult r;
              {
                  py::gil_scoped_release release;
                  r = run_experiment(cfg, o);
              }
              return py::make_tuple(r.exit_code, r.artifacts, r.summary);
          },
          "config"_a, "out"_a, "cache"_a = py::none(), "seed"_a = py::none(), "threads"_a = 1, "format"_a = "json");
}
