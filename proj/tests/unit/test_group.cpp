#include "doctest.h"

#include "kronrec/errors.hpp"
#include "kronrec/group.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace kronrec;

namespace {

GroupPoint pt(const GroupDescriptor& K, const char* text) { return parse_point(K, text); }

}  // namespace

TEST_CASE("quadratic numbers: exact arithmetic and floor") {
    const auto s2 = QuadraticNumber::sqrt_of(2);
    CHECK(s2.floor() == 1);
    CHECK((-s2).floor() == -2);
    CHECK((s2 - QuadraticNumber::from_integer(1)).sign() > 0);
    CHECK(QuadraticNumber::sqrt_of(8) == s2 * BigInt(2));
    CHECK(QuadraticNumber::sqrt_of(9) == QuadraticNumber::from_integer(3));
    CHECK(parse_quadratic("0.3") == QuadraticNumber::from_rational(Rational(3, 10)));
    CHECK(parse_quadratic("sqrt2-1") == s2 - QuadraticNumber::from_integer(1));
    CHECK(parse_quadratic("sqrt(2)/2") == s2 * Rational(1, 2));
    CHECK(parse_quadratic(parse_quadratic("-2*sqrt(3)+1/5").to_string()) == parse_quadratic("-2*sqrt(3)+1/5"));
    // (sqrt2 - 1)(sqrt2 + 1) = 1
    CHECK((s2 - QuadraticNumber::from_integer(1)) * (s2 + QuadraticNumber::from_integer(1)) ==
          QuadraticNumber::from_integer(1));
    CHECK_THROWS_AS(s2 + QuadraticNumber::sqrt_of(3), std::domain_error);
    CHECK_THROWS_AS(parse_quadratic("sqrt2 +"), std::invalid_argument);

    // floor(n * sqrt2) against an integer square-root oracle for large n.
    for (std::int64_t n : {1LL, 7LL, 1000003LL, 99999999977LL}) {
        const BigInt nb(n);
        const BigInt sq = boost::multiprecision::sqrt(BigInt(2) * nb * nb);
        CHECK((s2 * nb).floor() == sq);
        CHECK((-(s2 * nb)).floor() == -sq - 1);
    }
}

TEST_CASE("quadratic numbers: to_double keeps relative accuracy under cancellation") {
    using Float100 = boost::multiprecision::cpp_bin_float_100;
    const auto s2 = QuadraticNumber::sqrt_of(2);
    const Float100 root2 = boost::multiprecision::sqrt(Float100(2));
    // hi + lo split of sqrt2 - 1 leaves a residual near 1e-17.
    const auto q = s2 - QuadraticNumber::from_integer(1);
    const double hi = q.to_double();
    const auto residual = q - QuadraticNumber::from_rational(Rational(hi));
    const Float100 oracle = root2 - 1 - Float100(hi);
    CHECK(static_cast<double>(abs((Float100(residual.to_double()) - oracle) / oracle)) < 1e-15);

    // Pell convergents: 665857 - 470832 sqrt2 is about 7.5e-7.
    const auto pell = QuadraticNumber::from_integer(665857) - s2 * BigInt(470832);
    const Float100 pell_oracle = Float100(665857) - Float100(470832) * root2;
    CHECK(static_cast<double>(abs((Float100(pell.to_double()) - pell_oracle) / pell_oracle)) < 1e-15);
    CHECK((-pell).to_double() == -pell.to_double());
}

TEST_CASE("group descriptors") {
    const auto K = parse_group("Z/6 x T^1 x Z/2");
    CHECK(K.torus_rank == 1);
    CHECK(K.torsion_orders == std::vector<std::int64_t>{2, 6});
    CHECK(K.to_string() == "T^1 x Z/2 x Z/6");
    CHECK(parse_group("1").is_trivial());
    CHECK(parse_group("Z/2 x Z/3").isomorphic_to(parse_group("Z/6")));
    CHECK_FALSE(parse_group("Z/2 x Z/3") == parse_group("Z/6"));
    CHECK_FALSE(parse_group("Z/2 x Z/2").isomorphic_to(parse_group("Z/4")));
    CHECK_THROWS_AS(parse_group("Z/1"), ShapeError);
}

TEST_CASE("add") {
    const auto T1 = parse_group("T");
    CHECK(add(T1, pt(T1, "~0.7"), pt(T1, "~0.6")).torus[0].value() == doctest::Approx(0.3).epsilon(1e-15));
    const auto Z4 = parse_group("Z/4");
    CHECK(add(Z4, pt(Z4, "3"), pt(Z4, "2")).torsion[0] == 1);
    const auto sum = add(T1, pt(T1, "sqrt2-1"), pt(T1, "2-sqrt2"));
    REQUIRE(sum.torus[0].is_exact());
    CHECK(sum.torus[0].exact_value()->is_zero());
    CHECK_THROWS_AS(add(T1, pt(T1, "0.1"), pt(Z4, "1")), ShapeError);
}

TEST_CASE("scalar_mul") {
    const auto T1 = parse_group("T");
    CHECK(circle_distance(scalar_mul(T1, 10, pt(T1, "~0.3")).torus[0].value(), 0.0) < 1e-12);
    CHECK(scalar_mul(T1, 0, pt(T1, "sqrt2-1")) == identity(T1));
    const auto r = scalar_mul(T1, 7, pt(T1, "3/10"));
    CHECK(*r.torus[0].exact_value() == QuadraticNumber::from_rational(Rational(1, 10)));
}

TEST_CASE("char_eval") {
    const auto T1 = parse_group("T");
    const auto Z2 = parse_group("Z/2");
    CHECK(std::abs(char_eval(T1, parse_character(T1, "0"), pt(T1, "~0.123")) - 1.0) < 1e-15);
    CHECK(std::abs(char_eval(Z2, parse_character(Z2, "1"), pt(Z2, "1")) + 1.0) < 1e-15);
    // e^{2 pi i * 2 * 0.25} = -1
    CHECK(std::abs(char_eval(T1, parse_character(T1, "2"), pt(T1, "0.25")) + 1.0) < 1e-15);
    CHECK_THROWS_AS(char_eval(T1, parse_character(Z2, "1"), pt(T1, "0.25")), ShapeError);
}

TEST_CASE("invariant_metric") {
    const auto T1 = parse_group("T");
    const auto T2 = parse_group("T^2");
    CHECK(invariant_metric(T1, pt(T1, "0.3"), pt(T1, "0.3")) == 0.0);
    CHECK(invariant_metric(T1, pt(T1, "0.1"), pt(T1, "0.9")) == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(invariant_metric(T2, pt(T2, "(0,0)"), pt(T2, "(0.5,0.5)")) == doctest::Approx(0.375).epsilon(1e-14));
}

TEST_CASE("is_generator") {
    const auto T1 = parse_group("T");
    auto c = is_generator(T1, pt(T1, "1/3"), 10);
    CHECK_FALSE(c.generator);
    REQUIRE(c.witness);
    CHECK(c.witness->torus_freqs == std::vector<std::int64_t>{3});

    const auto Z4 = parse_group("Z/4");
    CHECK(is_generator(Z4, pt(Z4, "1"), 5).generator);
    CHECK_FALSE(is_generator(Z4, pt(Z4, "2"), 5).generator);

    const auto K = parse_group("T^1 x Z/2");
    c = is_generator(K, pt(K, "(sqrt2-1, 1)"), 50);
    CHECK(c.generator);
    CHECK(c.exact);
    // Brute force: k(sqrt2 - 1) + a/2 is never an integer for 0 < |k| <= 50.
    for (int k = -50; k <= 50; ++k) {
        for (int a = 0; a < 2; ++a) {
            if (k == 0 && a == 0) continue;
            const double v = k * (std::sqrt(2.0) - 1.0) + a / 2.0;
            CHECK(std::abs(v - std::round(v)) > 1e-6);
        }
    }
}

TEST_CASE("is_generator matches orbit enumeration on finite groups") {
    for (const char* g : {"Z/6", "Z/2 x Z/4", "Z/3 x Z/3", "Z/2 x Z/3"}) {
        const auto K = parse_group(g);
        const auto& m = K.torsion_orders;
        std::vector<std::int64_t> idx(m.size(), 0);
        for (;;) {
            GroupPoint a{{}, idx};
            // orbit size
            std::size_t orbit = 0;
            GroupPoint x = identity(K);
            do {
                x = add(K, x, a);
                ++orbit;
            } while (!(x == identity(K)));
            const bool gen = static_cast<std::int64_t>(orbit) == K.torsion_size();
            CHECK(is_generator(K, a, 1).generator == gen);
            std::size_t p = 0;
            while (p < idx.size() && ++idx[p] == m[p]) idx[p++] = 0;
            if (p == idx.size()) break;
        }
    }
}

TEST_CASE("group-law properties on random points") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<std::int64_t> ni(-10000, 10000);
    const auto K = parse_group("T^2 x Z/3");
    auto random_point = [&] {
        return GroupPoint{{TorusCoord::approx(u(rng)), TorusCoord::approx(u(rng))}, {static_cast<std::int64_t>(u(rng) * 3)}};
    };
    for (int trial = 0; trial < 1000; ++trial) {
        const auto a = random_point();
        const auto b = random_point();
        const auto c = random_point();
        const Character chi{{ni(rng) % 7, ni(rng) % 7}, {ni(rng) % 3}};
        CHECK(std::abs(char_eval(K, chi, add(K, a, b)) - char_eval(K, chi, a) * char_eval(K, chi, b)) < 1e-12);
        CHECK(invariant_metric(K, a, c) <= invariant_metric(K, a, b) + invariant_metric(K, b, c) + 1e-15);
        CHECK(std::abs(invariant_metric(K, add(K, a, c), add(K, b, c)) - invariant_metric(K, a, b)) < 1e-12);

        const std::int64_t n = ni(rng);
        const std::int64_t m = ni(rng);
        CHECK(invariant_metric(K, scalar_mul(K, n + m, a), add(K, scalar_mul(K, n, a), scalar_mul(K, m, a))) < 1e-10);
        const auto lhs = char_eval(K, chi, scalar_mul(K, n, a));
        const auto rhs = std::pow(char_eval(K, chi, a), static_cast<double>(n));
        CHECK(std::abs(lhs - rhs) < 1e-10);
    }
    CHECK(parse_character(K, "(0,0;0)").is_trivial());
}
