#include "doctest.h"

#include "kronrec/errors.hpp"
#include "kronrec/spectral.hpp"
#include "lattice.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace kronrec;

namespace {

const GroupDescriptor T1 = GroupDescriptor::make(1, {});

ReturnSet evens(std::int64_t N) {
    std::vector<std::int64_t> m;
    for (std::int64_t n = 2; n <= N; n += 2) m.push_back(n);
    return ReturnSet::from_members(Window::first(N), m);
}

ReturnSet rotation(const char* alpha, const char* U, std::int64_t N) {
    return return_set_linear(T1, parse_point(T1, alpha), parse_open_set(T1, U), Window::first(N)).set;
}

/// Plain long-double oracle for the Cesaro average.
std::complex<long double> direct_average(const ReturnSet& R, long double theta, std::int64_t N) {
    long double re = 0, im = 0;
    for (std::int64_t n = 1; n <= N; ++n) {
        if (!R.contains(n)) continue;
        long double ph = theta * n;
        ph -= std::floor(ph);
        re += std::cos(2 * std::numbers::pi_v<long double> * ph);
        im += std::sin(2 * std::numbers::pi_v<long double> * ph);
    }
    return {re / N, im / N};
}

const SpectrumPeak* find_peak(const std::vector<SpectrumPeak>& peaks, double theta, double tol) {
    for (const auto& p : peaks) {
        if (circle_distance(p.theta, theta) < tol) return &p;
    }
    return nullptr;
}

bool in_lattice(const std::vector<std::vector<std::int64_t>>& basis, const std::vector<std::int64_t>& v) {
    detail::IntMatrix a, b;
    for (const auto& row : basis) {
        detail::IntVector r(row.begin(), row.end());
        a.push_back(r);
        b.push_back(r);
    }
    b.emplace_back(v.begin(), v.end());
    return detail::hnf_rows(a) == detail::hnf_rows(b);
}

}  // namespace

TEST_CASE("cesaro_average") {
    const std::int64_t N = 4096;
    const auto all = ReturnSet::from_members(Window::first(N), [&] {
        std::vector<std::int64_t> v;
        for (std::int64_t n = 1; n <= N; ++n) v.push_back(n);
        return v;
    }());
    CHECK(std::abs(cesaro_average(all, 0.0, N) - 1.0) < 1e-15);
    const auto E = evens(N);
    const auto half = cesaro_average(E, 0.5, N);
    CHECK(half.real() == 0.5);
    CHECK(half.imag() == 0.0);
    const double theta = std::sqrt(2.0) - 1.0;
    const double bound = 2.0 / (N * std::abs(1.0 - std::exp(std::complex<double>(0, 4 * std::numbers::pi * theta))));
    CHECK(std::abs(cesaro_average(E, theta, N)) <= bound);

    const auto R = rotation("sqrt3-1", "(0.2,0.7)", 20000);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        const double t = u(rng);
        const auto oracle = direct_average(R, t, 20000);
        CHECK(std::abs(cesaro_average(R, t, 20000) - std::complex<double>(oracle)) < 1e-12);
    }
    CHECK_THROWS_AS(cesaro_average(E, 0.1, N + 1), ShapeError);
}

TEST_CASE("scan_spectrum: even numbers") {
    const std::int64_t N = std::int64_t{1} << 20;
    const auto E = evens(N);
    const auto peaks = scan_spectrum(E);
    REQUIRE(peaks.size() == 2);
    CHECK(peaks[0].theta == 0.0);
    CHECK(peaks[1].theta == 0.5);
    CHECK(std::abs(peaks[0].amplitude) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(std::abs(peaks[1].amplitude) == doctest::Approx(0.5).epsilon(1e-9));

    // Away from the two main lobes the transform stays below 0.01.
    const SpectrumGrid grid(E, 8 * static_cast<std::size_t>(N), N);
    double worst = 0.0;
    for (std::size_t j = 0; j < grid.grid_size(); j += 7) {
        const double t = grid.theta(j);
        if (circle_distance(t, 0.0) < 50.0 / N || circle_distance(t, 0.5) < 50.0 / N) continue;
        worst = std::max(worst, std::abs(grid.at(j)));
    }
    CHECK(worst < 0.01);
}

TEST_CASE("scan_spectrum: half-interval rotation") {
    const std::int64_t N = std::int64_t{1} << 16;
    const auto R = rotation("sqrt2-1", "(0,1/2)", N);
    const auto peaks = scan_spectrum(R);
    const double alpha = std::sqrt(2.0) - 1.0;
    const double step = 1.0 / (8.0 * N);
    for (int k : {1, 3}) {
        for (int sign : {-1, 1}) {
            const auto* p = find_peak(peaks, wrap01(-sign * k * alpha), 2 * step);
            REQUIRE(p != nullptr);
            CHECK(std::abs(p->amplitude) == doctest::Approx(1.0 / (std::numbers::pi * k)).epsilon(0.02));
        }
    }
    for (int k : {2, 4, 6, 8}) CHECK(find_peak(peaks, wrap01(-k * alpha), 1e-3) == nullptr);
    const auto* zero = find_peak(peaks, 0.0, step / 2);
    REQUIRE(zero != nullptr);
    CHECK(std::abs(zero->amplitude) == doctest::Approx(0.5).epsilon(1e-3));

    // Every peak obeys the acceptance rule.
    const double thr = default_threshold(N);
    for (const auto& p : peaks) {
        CHECK(std::abs(p.amplitude) >= thr);
        CHECK(p.convergence_gap <= thr / 2);
        CHECK(std::abs(p.amplitude) <= 1.0);
    }
}

TEST_CASE("scan_spectrum: degenerate inputs") {
    const auto empty = ReturnSet::from_members(Window::first(1024), {});
    CHECK(scan_spectrum(empty).empty());
    CHECK_THROWS_AS(scan_spectrum(empty, 2048, 0.0), ShapeError);
}

TEST_CASE("grid values agree with direct summation") {
    const std::int64_t N = 30000;
    const auto R = rotation("sqrt2/3", "(0.1,0.45)", N);
    const SpectrumGrid grid(R, 131072, N);
    std::mt19937_64 rng(9);
    for (int i = 0; i < 100; ++i) {
        const std::size_t j = rng() % grid.grid_size();
        CHECK(std::abs(grid.at(j) - cesaro_average(R, grid.theta(j), N)) < 1e-9);
    }
}

TEST_CASE("refine_peak") {
    const auto E = evens(1000);
    const auto p = refine_peak(E, 0.4999, 1e-13);
    CHECK(std::abs(p.theta - 0.5) < 1e-9);
    CHECK_FALSE(p.flagged);

    const std::int64_t N = std::int64_t{1} << 16;
    const auto R = rotation("sqrt2-1", "(0,1/2)", N);
    const double target = wrap01(-(std::sqrt(2.0) - 1.0));
    const auto q = refine_peak(R, target + 0.6 / (8.0 * N), 1e-13);
    CHECK(circle_distance(q.theta, target) < 1e-5);
    CHECK(std::abs(q.amplitude) == doctest::Approx(1.0 / std::numbers::pi).epsilon(1e-3));

    const auto wide = refine_peak(E, 0.4999, 1.0);
    CHECK(wide.theta == 0.4999);
    CHECK(wide.flagged);

    // A bracket that misses the peak ends on its edge.
    RefineOptions narrow;
    narrow.half_width = 1e-5;
    CHECK(refine_peak(E, 0.4999, 1e-12, narrow).flagged);
}

TEST_CASE("estimate_coefficient") {
    const std::int64_t N = std::int64_t{1} << 20;
    const auto R = rotation("sqrt2-1", "(0,0.37)", N);
    const auto est = estimate_coefficient(R, 0.0, dyadic_schedule(N));
    CHECK(std::abs(est.value - 0.37) < 0.005);
    CHECK(est.verdict == Verdict::Converged);

    const auto E = evens(N);
    const auto half = estimate_coefficient(E, 0.5, dyadic_schedule(N));
    CHECK(half.value == std::complex<double>(0.5, 0.0));
    for (double d : half.differences) CHECK(d == 0.0);
    CHECK(half.verdict == Verdict::Converged);

    const auto off = estimate_coefficient(R, 0.123456, dyadic_schedule(N));
    CHECK(off.verdict == Verdict::ConvergingToZero);
    CHECK_THROWS_AS(estimate_coefficient(R, 0.0, {100, 50}), ShapeError);
}

TEST_CASE("detect_relations: exhaustive") {
    const double a = std::sqrt(2.0) - 1.0;
    const auto two = detect_relations({a, std::fmod(2 * a, 1.0)}, 20);
    REQUIRE(two.basis.size() == 1);
    // (2, -1; k0) up to sign
    const auto& r = two.basis[0];
    CHECK(((r[0] == 2 && r[1] == -1) || (r[0] == -2 && r[1] == 1)));

    const auto half = detect_relations({0.5}, 10);
    REQUIRE(half.basis.size() == 1);
    CHECK(half.basis[0] == std::vector<std::int64_t>{2, 1});

    const double b = std::sqrt(3.0) - 1.0;
    const auto none = detect_relations({a, b}, 50);
    CHECK(none.basis.empty());
    // Independent brute force at height 50.
    for (int i = -50; i <= 50; ++i) {
        for (int j = -50; j <= 50; ++j) {
            if (i == 0 && j == 0) continue;
            const long double s = i * static_cast<long double>(a) + j * static_cast<long double>(b);
            CHECK(std::abs(s - std::round(s)) > 1e-7L);
        }
    }
    CHECK_THROWS_AS(detect_relations({0.1, 0.2, 0.3, 0.4, 0.5}, 5), CapExceeded);
    CHECK_THROWS_AS(detect_relations({0.1}, 101), CapExceeded);
}

TEST_CASE("detect_relations: lattice reduction") {
    const long double a = std::sqrt(2.0L) - 1, b = std::sqrt(3.0L) - 1, c = std::sqrt(5.0L) / 7;
    auto f = [](long double x) { return static_cast<double>(x - std::floor(x)); };
    const std::vector<double> thetas{f(a), f(2 * a), f(b), f(a + b), f(1.0L / 3), f(c)};
    RelationOptions opt;
    opt.lattice_reduction = true;
    const auto rel = detect_relations(thetas, 10, opt);
    CHECK(rel.lattice_reduction);
    CHECK(rel.basis.size() == 3);
    for (const auto& row : rel.basis) {
        long double s = -row.back();
        for (std::size_t i = 0; i < thetas.size(); ++i) s += row[i] * static_cast<long double>(thetas[i]);
        CHECK(std::abs(s) < 1e-7L);
    }
    auto member = [&](std::vector<std::int64_t> k) {
        long double s = 0;
        for (std::size_t i = 0; i < k.size(); ++i) s += k[i] * static_cast<long double>(thetas[i]);
        k.push_back(std::llround(s));
        return in_lattice(rel.basis, k);
    };
    CHECK(member({2, -1, 0, 0, 0, 0}));
    CHECK(member({1, 0, 1, -1, 0, 0}));
    CHECK(member({0, 0, 0, 0, 3, 0}));
}

TEST_CASE("integer lattice helpers") {
    using detail::IntMatrix;
    const IntMatrix A{{BigInt(2), BigInt(4), BigInt(4)}, {BigInt(-6), BigInt(6), BigInt(12)}, {BigInt(10), BigInt(-4), BigInt(-16)}};
    const auto snf = detail::smith_form(A, 3);
    CHECK(snf.diag == std::vector<BigInt>{2, 6, 12});
    // Q * Qinv = I
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            BigInt s = 0;
            for (std::size_t k = 0; k < 3; ++k) s += snf.Q[i][k] * snf.Qinv[k][j];
            CHECK(s == (i == j ? 1 : 0));
        }
    }
    const IntMatrix M{{BigInt(1), BigInt(2), BigInt(3)}};
    const auto ker = detail::integer_kernel(M, 3);
    CHECK(ker.size() == 2);
    for (const auto& v : ker) CHECK(v[0] + 2 * v[1] + 3 * v[2] == 0);
}

TEST_CASE("reconstruct_group: fixtures") {
    SpectrumPeak z;
    z.theta = 0.0;
    z.amplitude = 0.5;
    z.N_used = 1 << 20;
    SpectrumPeak h = z;
    h.theta = 0.5;
    auto rec = reconstruct_group({z, h}, 16);
    CHECK(rec.group == GroupDescriptor::make(0, {2}));
    CHECK(rec.alpha_image.torsion == std::vector<std::int64_t>{1});
    CHECK(rec.warnings.empty());

    const auto only = reconstruct_group({z}, 16);
    CHECK(only.group.is_trivial());
    REQUIRE(only.warnings.size() == 1);
    CHECK(only.warnings[0].find("stabilizer hypothesis likely violated") != std::string::npos);

    // Thirds: 1/3 and 2/3 generate Z/3.
    SpectrumPeak t1 = z, t2 = z;
    t1.theta = 1.0 / 3;
    t2.theta = 2.0 / 3;
    t1.amplitude = t2.amplitude = 0.2;
    rec = reconstruct_group({z, t1, t2}, 16);
    CHECK(rec.group == GroupDescriptor::make(0, {3}));
    for (const auto& a : rec.assignments) {
        CHECK(std::abs(char_eval(rec.group, a.character, rec.alpha_image) - unit_phasor(a.peak.theta)) < 1e-9);
    }
}

TEST_CASE("reconstruct_group: rotation spectrum") {
    const std::int64_t N = std::int64_t{1} << 16;
    const auto R = rotation("sqrt2-1", "(0,1/2)", N);
    const auto peaks = refined_spectrum(R);
    const auto rec = reconstruct_group(peaks, 16);
    CHECK(rec.group == GroupDescriptor::make(1, {}));
    for (const auto& a : rec.assignments) {
        CHECK(std::abs(char_eval(rec.group, a.character, rec.alpha_image) - unit_phasor(a.peak.theta)) < 10.0 / N);
    }
    const double alpha = std::sqrt(2.0) - 1.0;
    const double beta = rec.alpha_image.torus[0].value();
    CHECK(std::min(circle_distance(beta, alpha), circle_distance(beta, -alpha)) < 1e-4);
    for (const auto& row : rec.relation_basis) {
        long double s = -row.back();
        std::size_t i = 0;
        for (const auto& a : rec.assignments) {
            if (i + 1 >= row.size()) break;
            s += row[i++] * static_cast<long double>(a.peak.theta);
        }
        CHECK(std::abs(s) < 1e-5L);
    }
}

TEST_CASE("reconstruct_group: round trips") {
    struct Case {
        const char* group;
        const char* alpha;
        const char* U;
        std::int64_t N;
    };
    const Case cases[] = {
        {"T^1 x Z/2", "(sqrt2-1, 1)", "(0,0.4) x {0}", 1 << 16},
        {"T^2", "(sqrt2-1, sqrt3-1)", "(0,0.3) x (0.1,0.6)", 1 << 18},
        {"Z/5", "2", "{0,1}", 1 << 12},
        {"T^1 x Z/3", "(sqrt5/4, 1)", "(0.2,0.5) x {0}", 1 << 16},
    };
    for (const auto& c : cases) {
        CAPTURE(c.group);
        const auto K = parse_group(c.group);
        const auto alpha = parse_point(K, c.alpha);
        const auto U = parse_open_set(K, c.U);
        REQUIRE(closure_stabilizer(U).is_trivial);
        REQUIRE(is_generator(K, alpha, 20).generator);
        const auto R = return_set_linear(K, alpha, U, Window::first(c.N)).set;
        const auto peaks = refined_spectrum(R);
        const auto rec = reconstruct_group(peaks, 16);
        CHECK(rec.group.isomorphic_to(K));
        for (const auto& a : rec.assignments) {
            CHECK(std::abs(char_eval(rec.group, a.character, rec.alpha_image) - unit_phasor(a.peak.theta)) <
                  10.0 / static_cast<double>(c.N));
        }
    }
}

TEST_CASE("spectrum invariants: Parseval and conjugate symmetry") {
    const std::int64_t N = std::int64_t{1} << 16;
    const auto R = rotation("sqrt3-1", "(0.1,0.35) | (0.5,0.62)", N);
    const auto peaks = refined_spectrum(R);
    double energy = 0.0;
    for (const auto& p : peaks) {
        energy += std::norm(p.amplitude);
        const auto* m = find_peak(peaks, 1.0 - p.theta, 1e-9);
        REQUIRE(m != nullptr);
        CHECK(std::abs(m->amplitude - std::conj(p.amplitude)) < 1e-9);
    }
    const double density = static_cast<double>(R.count()) / static_cast<double>(N);
    CHECK(energy <= density + 1e-3);
}

TEST_CASE("compare_systems") {
    const std::int64_t N = std::int64_t{1} << 16;
    const auto R1 = rotation("sqrt2-1", "(0,1/2)", N);
    CHECK(compare_systems(R1, R1, 1e-2).kind == CompareKind::ConsistentIsomorphic);

    const auto R2 = rotation("sqrt3-1", "(0,1/2)", N);
    const auto v = compare_systems(R1, R2, 1e-2);
    CHECK(v.kind == CompareKind::Distinguished);
    const double a = std::sqrt(2.0) - 1.0, b = std::sqrt(3.0) - 1.0;
    const double d = std::min({circle_distance(v.theta, a), circle_distance(v.theta, -a), circle_distance(v.theta, b),
                               circle_distance(v.theta, -b)});
    CHECK(d < 1e-5);

    const char* two_arc = "(-0.1,0.1) | (0.4,0.6)";
    const auto E1 = rotation("sqrt2-1", two_arc, N);
    const auto E2 = rotation("sqrt2-1/2", two_arc, N);
    CHECK(E1 == E2);
    CHECK(compare_systems(E1, E2, 1e-2).kind == CompareKind::ConsistentIsomorphic);
    CHECK_FALSE(closure_stabilizer(parse_open_set(T1, two_arc)).is_trivial);
}

TEST_CASE("report formats") {
    SpectrumPeak p;
    p.theta = 0.25;
    p.amplitude = {0.5, -0.125};
    p.convergence_gap = 1e-6;
    p.N_used = 1024;
    std::ostringstream out;
    write_spectrum_jsonl(out, {p});
    CHECK(out.str() == "{\"theta\":0.25,\"re\":0.5,\"im\":-0.125,\"gap\":1e-06,\"N\":1024}\n");
    CHECK(format_double(0.1) == "0.1");
}
