#include "doctest.h"

#include "kronrec/errors.hpp"
#include "kronrec/orbit.hpp"
#include "kronrec/rts.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <random>
#include <sstream>

using namespace kronrec;
using Float100 = boost::multiprecision::cpp_bin_float_100;

namespace {

const GroupDescriptor T1 = GroupDescriptor::make(1, {});
const GroupDescriptor T2 = GroupDescriptor::make(2, {});

GroupPoint pt(const GroupDescriptor& K, const char* text) { return parse_point(K, text); }

std::vector<std::int64_t> members(const GeneratedReturnSet& g) { return g.set.members(); }

/// Inclusion-exclusion measure of a union of arcs that do not wrap around 0.
double union_measure(std::vector<std::pair<double, double>> arcs) {
    double total = 0.0;
    const std::size_t k = arcs.size();
    for (std::size_t mask = 1; mask < (std::size_t{1} << k); ++mask) {
        double lo = 0.0, hi = 1.0;
        int bits = 0;
        for (std::size_t i = 0; i < k; ++i) {
            if (mask >> i & 1) {
                lo = std::max(lo, arcs[i].first);
                hi = std::min(hi, arcs[i].second);
                ++bits;
            }
        }
        total += (bits % 2 ? 1.0 : -1.0) * std::max(0.0, hi - lo);
    }
    return total;
}

}  // namespace

TEST_CASE("membership") {
    const auto U = parse_open_set(T1, "(0.25,0.55)");
    CHECK(membership(U, pt(T1, "0.3")) == Membership::In);
    CHECK(membership(U, pt(T1, "0.55")) == Membership::Out);
    CHECK(membership(U, pt(T1, "~0.55")) == Membership::BoundaryAmbiguous);
    CHECK(membership(U, pt(T1, "~0.5500000001")) == Membership::BoundaryAmbiguous);
    CHECK(membership(U, pt(T1, "~0.56")) == Membership::Out);

    const auto V = parse_open_set(T1, "(-0.1,0.1) | (0.4,0.6)");
    CHECK(membership(V, pt(T1, "0.45")) == Membership::In);
    CHECK(membership(V, pt(T1, "0.95")) == Membership::In);
    CHECK(membership(V, pt(T1, "0.25")) == Membership::Out);

    const auto Z4 = GroupDescriptor::make(0, {4});
    CHECK_THROWS_AS(membership(U, pt(Z4, "1")), ShapeError);
}

TEST_CASE("open set parsing round-trips") {
    const auto K = parse_group("T^1 x Z/2");
    const auto U = parse_open_set(K, "(0,0.4) x {0} | T x *");
    CHECK(parse_open_set(K, U.to_string()).to_string() == U.to_string());
    CHECK_THROWS_AS(parse_open_set(K, "(0,0.4)"), ShapeError);
    CHECK_THROWS_AS(parse_open_set(T1, "(0.5,0.2)"), ShapeError);
    CHECK(parse_open_set(T1, "empty").empty());
}

TEST_CASE("closure_stabilizer") {
    const auto two_arc = closure_stabilizer(parse_open_set(T1, "(-0.1,0.1) | (0.4,0.6)"));
    REQUIRE(two_arc.shifts.size() == 2);
    CHECK(two_arc.shifts[0].torus[0].exact_value()->is_zero());
    CHECK(*two_arc.shifts[1].torus[0].exact_value() == QuadraticNumber::from_rational(Rational(1, 2)));
    CHECK_FALSE(two_arc.is_trivial);

    const auto cyl = closure_stabilizer(parse_open_set(T2, "(0,0.37) x T"));
    CHECK(cyl.full_torus_directions == std::vector<bool>{false, true});
    CHECK(cyl.shifts.size() == 1);
    CHECK_FALSE(cyl.is_trivial);

    const auto plain = closure_stabilizer(parse_open_set(T1, "(0,0.37)"));
    CHECK(plain.shifts.size() == 1);
    CHECK(plain.is_trivial);

    CHECK_THROWS_AS(closure_stabilizer(parse_open_set(T1, "empty")), Error);

    // Torsion: {0,2} in Z/4 is stable under +2.
    const auto Z4 = GroupDescriptor::make(0, {4});
    CHECK(closure_stabilizer(parse_open_set(Z4, "{0,2}")).shifts.size() == 2);
    // Touching arcs: the closure of (0,1/2) | (1/2,1) is the whole circle.
    CHECK(closure_stabilizer(parse_open_set(T1, "(0,1/2) | (1/2,1)")).full_torus_directions[0]);
}

TEST_CASE("stabilizer is a subgroup and preserves the closure") {
    const char* sets[] = {"(0,1/6) | (1/3,1/2) | (2/3,5/6)", "(0,0.1) | (0.25,0.35) | (0.5,0.6) | (0.75,0.85)",
                          "(0,0.2) | (0.5,0.6)", "(0.1,0.3) | (0.3,0.35) | (0.6,0.8) | (0.8,0.85)"};
    for (const char* s : sets) {
        const auto U = parse_open_set(T1, s);
        const auto rep = closure_stabilizer(U);
        auto has = [&](const QuadraticNumber& q) {
            return std::any_of(rep.shifts.begin(), rep.shifts.end(),
                               [&](const GroupPoint& p) { return *p.torus[0].exact_value() == q.frac(); });
        };
        for (const auto& a : rep.shifts) {
            const auto qa = *a.torus[0].exact_value();
            CHECK(has(-qa));
            for (const auto& b : rep.shifts) CHECK(has(qa + *b.torus[0].exact_value()));
            // Measure of the symmetric difference of U and U + a, sampled on a fine rational grid.
            const auto V = U.translated(a);
            for (int i = 0; i < 1000; ++i) {
                const auto x = GroupPoint{{TorusCoord::exact(QuadraticNumber::from_rational(Rational(2 * i + 1, 2000)))}, {}};
                CHECK(membership(U, x) == membership(V, x));
            }
        }
    }
    CHECK(closure_stabilizer(parse_open_set(T1, sets[0])).shifts.size() == 3);
    CHECK(closure_stabilizer(parse_open_set(T1, sets[1])).shifts.size() == 4);
    CHECK(closure_stabilizer(parse_open_set(T1, sets[2])).shifts.size() == 1);
    CHECK(closure_stabilizer(parse_open_set(T1, sets[3])).shifts.size() == 2);
}

TEST_CASE("jordan_measure") {
    CHECK(jordan_measure(OpenSet::whole(parse_group("T^2 x Z/3"))) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(jordan_measure(parse_open_set(T1, "(0,0.37)")) == doctest::Approx(0.37).epsilon(1e-15));
    CHECK(jordan_measure(parse_open_set(T1, "(0,0.3) | (0.2,0.5)")) ==
          doctest::Approx(union_measure({{0.0, 0.3}, {0.2, 0.5}})).epsilon(1e-14));
    CHECK(jordan_measure(parse_open_set(parse_group("T^1 x Z/2"), "(0,0.4) x {0}")) == doctest::Approx(0.2).epsilon(1e-15));

    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> d(0, 100);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::pair<double, double>> arcs;
        std::string text;
        for (int k = 0; k < 4; ++k) {
            int a = d(rng), b = d(rng);
            if (a == b) continue;
            if (a > b) std::swap(a, b);
            arcs.emplace_back(a / 100.0, b / 100.0);
            text += (text.empty() ? "" : " | ") + std::string("(") + std::to_string(a) + "/100," + std::to_string(b) + "/100)";
        }
        if (arcs.empty()) continue;
        CHECK(jordan_measure(parse_open_set(T1, text)) == doctest::Approx(union_measure(arcs)).epsilon(1e-12));
    }
}

TEST_CASE("return_set_linear") {
    const auto U = parse_open_set(T1, "(0.25,0.55)");
    const auto R = return_set_linear(T1, pt(T1, "3/10"), U, Window::make(0, 19));
    CHECK(members(R) == std::vector<std::int64_t>{1, 5, 8, 11, 15, 18});
    CHECK(R.stats.boundary_ambiguous == 0);
    // Oracle: 3n mod 10 in (2.5, 5.5)
    const auto big = return_set_linear(T1, pt(T1, "3/10"), U, Window::make(-500, 500));
    for (std::int64_t n = -500; n <= 500; ++n) {
        const std::int64_t r = ((3 * n) % 10 + 10) % 10;
        CHECK(big.set.contains(n) == (r >= 3 && r <= 5));
    }

    const auto all = return_set_linear(T1, pt(T1, "sqrt2-1"), OpenSet::whole(T1), Window::make(0, 99));
    CHECK(all.set.count() == 100);

    const auto Z2 = GroupDescriptor::make(0, {2});
    const auto even = return_set_linear(Z2, pt(Z2, "1"), parse_open_set(Z2, "{0}"), Window::make(-6, 6));
    CHECK(members(even) == std::vector<std::int64_t>{-6, -4, -2, 0, 2, 4, 6});
}

TEST_CASE("return_set_linear: exact path against a high-precision oracle") {
    const auto alpha = pt(T1, "sqrt2-1");
    const auto U = parse_open_set(T1, "(0,0.37)");
    const auto R = return_set_linear(T1, alpha, U, Window::make(-20000, 20000));
    CHECK(R.stats.boundary_ambiguous == 0);
    const Float100 a = boost::multiprecision::sqrt(Float100(2)) - 1;
    for (std::int64_t n = -20000; n <= 20000; n += 7) {
        Float100 v = a * n;
        v -= boost::multiprecision::floor(v);
        CHECK(R.set.contains(n) == (v > 0 && v < Float100("0.37")));
    }
}

TEST_CASE("translation covariance: R(0, U) = R(beta, U + beta)") {
    const auto K = parse_group("T^1 x Z/3");
    const auto alpha = pt(K, "(sqrt2-1, 1)");
    const auto U = parse_open_set(K, "(0.1,0.45) x {0,2} | (0.7,0.8) x {1}");
    const auto beta = pt(K, "(1/7+sqrt2, 2)");
    const auto a = return_set_linear(K, alpha, U, Window::make(-3000, 3000));
    const auto b = return_set_linear(K, alpha, U.translated(beta), Window::make(-3000, 3000), {}, beta);
    CHECK(a.set == b.set);
}

TEST_CASE("threads do not change the result") {
    const auto alpha = pt(T2, "(sqrt2-1, sqrt2/3)");
    const auto U = parse_open_set(T2, "(0.2,0.6) x (0.1,0.5)");
    OrbitOptions four;
    four.threads = 4;
    CHECK(return_set_linear(T2, alpha, U, Window::make(1, 10007)).set ==
          return_set_linear(T2, alpha, U, Window::make(1, 10007), four).set);
}

TEST_CASE("density tends to the measure") {
    const auto U = parse_open_set(T1, "(0.1,0.47)");
    const std::int64_t N = 100000;
    const auto R = return_set_linear(T1, pt(T1, "sqrt3-1"), U, Window::first(N));
    const double density = static_cast<double>(R.set.count()) / static_cast<double>(N);
    CHECK(std::abs(density - jordan_measure(U)) < 3.0 / std::sqrt(static_cast<double>(N)) * std::log(static_cast<double>(N)));
}

TEST_CASE("integer polynomials") {
    const auto P = IntegerPolynomial::parse("n^5 - n");
    CHECK(P.degree() == 5);
    CHECK(P(3) == 240);
    CHECK(P(BigInt(10000)) == BigInt("100000000000000000000") - 10000);
    CHECK(P.to_string() == "n^5 - n");
    CHECK(IntegerPolynomial::parse("[0, 1]") == IntegerPolynomial::parse("n^2"));
    CHECK(IntegerPolynomial::parse("3*n^2 + 2n") == IntegerPolynomial::parse("[2,3]"));
    CHECK_THROWS_AS(IntegerPolynomial::parse("n + 1"), ShapeError);
    CHECK(IntegerPolynomial::parse("n + 1", false)(BigInt(4)) == 5);
}

TEST_CASE("return_set_polynomial") {
    const auto P = IntegerPolynomial::parse("n^5 - n");
    const auto U = parse_open_set(T1, "(0.1,0.4)");
    const Window w = Window::make(-1000, 1000);
    const auto r1 = return_set_polynomial(T1, pt(T1, "sqrt2"), P, U, w);
    const auto r2 = return_set_polynomial(T1, pt(T1, "sqrt2+1/5"), P, U, w);
    CHECK(r1.set == r2.set);
    CHECK(r1.stats.boundary_ambiguous == 0);

    // Oracle: 100-digit floating evaluation of frac(P(n) sqrt2).
    const Float100 s2 = boost::multiprecision::sqrt(Float100(2));
    for (std::int64_t n = -1000; n <= 1000; n += 13) {
        Float100 v = Float100(P(n)) * s2;
        v -= boost::multiprecision::floor(v);
        CHECK(r1.set.contains(n) == (v > Float100("0.1") && v < Float100("0.4")));
    }

    // Near |n| = 1e4 the values P(n) exceed 2^64.
    const Window wide = Window::make(-10000, 10000);
    const auto w1 = return_set_polynomial(T1, pt(T1, "sqrt2"), P, U, wide);
    const auto w2 = return_set_polynomial(T1, pt(T1, "sqrt2+1/5"), P, U, wide);
    CHECK(w1.set == w2.set);
    for (std::int64_t n = -10000; n <= 10000; n += 7) {
        Float100 v = Float100(P(n)) * s2;
        v -= boost::multiprecision::floor(v);
        CHECK(w1.set.contains(n) == (v > Float100("0.1") && v < Float100("0.4")));
    }

    const auto Z4 = GroupDescriptor::make(0, {4});
    const auto odd = return_set_polynomial(Z4, pt(Z4, "1"), IntegerPolynomial::parse("2n"), parse_open_set(Z4, "{2}"),
                                           Window::make(0, 7));
    CHECK(members(odd) == std::vector<std::int64_t>{1, 3, 5, 7});

    // P(n) = n agrees with the linear generator.
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> num(1, 999);
    for (int trial = 0; trial < 100; ++trial) {
        const int a = num(rng), b = num(rng), c = num(rng);
        const auto K = parse_group("T^1 x Z/5");
        const GroupPoint alpha{{TorusCoord::exact(QuadraticNumber(Rational(a, 1000), Rational(1, b + 1), 2))}, {c % 5}};
        const int lo = std::min(a, c), hi = std::max(a, c) + 1;
        const auto V = parse_open_set(K, "(" + std::to_string(lo) + "/1000," + std::to_string(hi) + "/1000) x {0,1,3}");
        const Window ww = Window::make(-200, 200);
        CHECK(return_set_polynomial(K, alpha, IntegerPolynomial::identity(), V, ww).set ==
              return_set_linear(K, alpha, V, ww).set);
    }
}

TEST_CASE("skew product") {
    SkewSystem S{TorusCoord::exact(parse_quadratic("sqrt2-1"))};
    const auto x0 = pt(T2, "(0,0)");
    const Window w = Window::make(0, 5000);
    const auto skew = return_set_skew(S, x0, parse_open_set(T2, "(0,0.37) x T"), w);
    const auto lin = return_set_linear(T1, pt(T1, "sqrt2-1"), parse_open_set(T1, "(0,0.37)"), w);
    CHECK(skew.set == lin.set);

    const auto V = parse_open_set(T2, "T x (0,0.5)");
    const auto dense = return_set_skew(S, x0, V, Window::make(0, 100000));
    CHECK(std::abs(static_cast<double>(dense.set.count()) / 100001.0 - 0.5) < 0.01);
    CHECK(dense.stats.boundary_ambiguous == 0);

    const auto y0 = pt(T2, "(1/3, sqrt2/5)");
    const auto W = parse_open_set(T2, "(0.2,0.7) x (0.1,0.4)");
    const auto from_y0 = return_set_skew(S, y0, W, Window::make(-50, 50));
    CHECK(from_y0.set.contains(0) == (membership(W, y0) == Membership::In));

    // Iteration agrees with the closed form, and stepping back undoes it.
    GroupPoint p = y0;
    for (int n = 1; n <= 200; ++n) {
        p = S.step(p);
        CHECK(p == S.point_at(y0, n));
        CHECK(from_y0.set.contains(n % 51) == from_y0.set.contains(n % 51));
    }
    for (int n = 0; n < 200; ++n) p = S.step_back(p);
    CHECK(p == y0);
    CHECK(S.point_at(y0, -17) == [&] {
        GroupPoint q = y0;
        for (int i = 0; i < 17; ++i) q = S.step_back(q);
        return q;
    }());
    for (std::int64_t n = -50; n <= 50; ++n) {
        CHECK(from_y0.set.contains(n) == (membership(W, S.point_at(y0, n)) == Membership::In));
    }

    SkewSystem F{TorusCoord::approx(std::sqrt(2.0) - 1.0)};
    GroupPoint q = pt(T2, "(~0.1, ~0.2)");
    const GroupPoint q0 = q;
    for (int i = 0; i < 1000; ++i) q = F.step(q);
    for (int i = 0; i < 1000; ++i) q = F.step_back(q);
    CHECK(invariant_metric(T2, q, q0) < 1e-9);
}

TEST_CASE("weyl_discrepancy") {
    const auto sq = IntegerPolynomial::parse("n^2");
    CHECK(weyl_discrepancy(T1, pt(T1, "sqrt2-1"), sq, parse_character(T1, "0"), 1000) == 1.0);
    const double big = weyl_discrepancy(T1, pt(T1, "sqrt2-1"), sq, parse_character(T1, "1"), 100000);
    const double small = weyl_discrepancy(T1, pt(T1, "sqrt2-1"), sq, parse_character(T1, "1"), 10000);
    CHECK(big < 0.05);
    // Direct summation oracle at N = 10^4 in extended precision.
    {
        const Float100 a = boost::multiprecision::sqrt(Float100(2)) - 1;
        long double re = 0, im = 0;
        for (int n = 1; n <= 10000; ++n) {
            Float100 v = a * n * n;
            v -= boost::multiprecision::floor(v);
            const long double ph = 2.0L * 3.14159265358979323846264338327950288L * v.convert_to<long double>();
            re += std::cos(ph);
            im += std::sin(ph);
        }
        CHECK(small == doctest::Approx(static_cast<double>(std::hypot(re, im) / 10000.0L)).epsilon(1e-9));
    }
    const auto Z2 = GroupDescriptor::make(0, {2});
    CHECK(weyl_discrepancy(Z2, pt(Z2, "1"), sq, parse_character(Z2, "1"), 1000) == 0.0);
    CHECK(weyl_discrepancy(Z2, pt(Z2, "1"), sq, parse_character(Z2, "1"), 1001) == doctest::Approx(1.0 / 1001));
}

TEST_CASE("RTS round trip") {
    const auto R = return_set_linear(T1, pt(T1, "3/10"), parse_open_set(T1, "(0.25,0.55)"), Window::make(0, 19)).set;
    const std::string text = to_rts(R);
    CHECK(text.rfind("RTS v1 0 19 6\n", 0) == 0);
    const auto back = parse_rts(text);
    CHECK(back == R);
    CHECK(back.provenance() == R.provenance());
    CHECK(to_rts(back) == text);

    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const std::int64_t lo = static_cast<std::int64_t>(rng() % 200) - 100;
        const Window w = Window::make(lo, lo + static_cast<std::int64_t>(rng() % 300));
        boost::dynamic_bitset<> bits(w.size());
        for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = (rng() % 3) == 0;
        const ReturnSet S(w, bits);
        CHECK(parse_rts(to_rts(S)) == S);
    }
    CHECK_THROWS_AS(parse_rts("RTS v1 0 3 3\n1 2 1\n"), Error);
    CHECK_THROWS_AS(parse_rts("RTS v2 0 3 2\n1 2 1\n"), Error);

    std::istringstream list("# evens\n2\n4\n\n6\n");
    const auto L = read_integer_list(list, Window::make(1, 6));
    CHECK(L.members() == std::vector<std::int64_t>{2, 4, 6});
}
