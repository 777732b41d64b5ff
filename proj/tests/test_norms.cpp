#include <catch2/catch_amalgamated.hpp>

#include "bblab/space_norm.hpp"

using namespace bblab;

TEST_CASE("Hs norm of a constant is its modulus") {
    TorusField f(2, 4, true);
    f.at({0, 0}) = cdouble(-2.5, 0.0);
    for (double s : {-1.0, 0.0, 1.0, 3.5})
        REQUIRE(norm(f, SpaceNorm::hs(s)) == Catch::Approx(2.5).margin(1e-14));
}

TEST_CASE("Hs norm of a single exponential is the Sobolev weight") {
    TorusField f(2, 8, false);
    f.at({3, -4}) = 1.0; // |n|^2 = 25
    double d_half = 1.0; // d/2 for d = 2
    REQUIRE(norm(f, SpaceNorm::hs(d_half)) ==
            Catch::Approx(std::pow(26.0, 0.5)).epsilon(1e-13));
}

TEST_CASE("Parseval: H0 equals the grid L2 quadrature norm") {
    std::mt19937_64 rng(23);
    TorusField f = random_field(rng, 2, 6, true);
    double h0 = norm(f, SpaceNorm::hs(0.0));
    double l2 = norm(f, SpaceNorm::lp(2.0), 4);
    REQUIRE(l2 == Catch::Approx(h0).epsilon(1e-10));
}

TEST_CASE("Sobolev norms are monotone in s") {
    std::mt19937_64 rng(29);
    TorusField f = random_field(rng, 2, 8, true);
    double prev = 0.0;
    for (double s : {-2.0, -1.0, 0.0, 0.5, 1.0, 2.0}) {
        double cur = norm(f, SpaceNorm::hs(s));
        REQUIRE(cur >= prev - 1e-12);
        prev = cur;
    }
}

TEST_CASE("single LP block: S1Linf equals Linf") {
    std::mt19937_64 rng(31);
    TorusField f = lp_block(random_field(rng, 2, 8, true), 2);
    // keep only the modes where psi_2 == 1 so f is exactly one block
    for (std::size_t idx = 0; idx < f.size(); ++idx) {
        auto n = f.mode_of(idx);
        double r = std::hypot(double(n[0]), double(n[1]));
        if (lp_psi(2, r) != 1.0) f.coeffs[idx] = 0.0;
    }
    double li = norm(f, SpaceNorm::linf());
    double s1 = norm(f, SpaceNorm::s1linf());
    REQUIRE(s1 == Catch::Approx(li).epsilon(1e-12));
}

TEST_CASE("S1Linf dominates Linf") {
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 5; ++trial) {
        TorusField f = random_field(rng, 2, 8, true);
        REQUIRE(norm(f, SpaceNorm::linf()) <= norm(f, SpaceNorm::s1linf()) + 1e-12);
    }
}

TEST_CASE("MaxOf takes the max of member norms") {
    std::mt19937_64 rng(41);
    TorusField f = random_field(rng, 2, 5, true);
    SpaceNorm mx = SpaceNorm::max_of({SpaceNorm::linf(), SpaceNorm::hs(1.0)});
    double m = norm(f, mx);
    REQUIRE(m == Catch::Approx(std::max(norm(f, SpaceNorm::linf()),
                                        norm(f, SpaceNorm::hs(1.0)))));
}

TEST_CASE("vector-field norm is the max over components") {
    std::mt19937_64 rng(43);
    VectorField u = random_vector_field(rng, 2, 4, true);
    double m = norm(u, SpaceNorm::hs(0.5));
    REQUIRE(m == Catch::Approx(std::max(norm(u.comps[0], SpaceNorm::hs(0.5)),
                                        norm(u.comps[1], SpaceNorm::hs(0.5)))));
}

TEST_CASE("Besov block norms agree with a direct sum") {
    std::mt19937_64 rng(47);
    TorusField f = random_field(rng, 2, 8, true);
    double sigma = 0.7, q = 2.0;
    double acc = 0.0;
    for (int k = 0; k < lp_block_count(2, 8); ++k) {
        double t = std::pow(2.0, sigma * k) * norm(lp_block(f, k), SpaceNorm::lp(q));
        acc += std::pow(t, q);
    }
    REQUIRE(norm(f, SpaceNorm::besov(sigma, q)) ==
            Catch::Approx(std::pow(acc, 1.0 / q)).epsilon(1e-12));
}

TEST_CASE("InterpKq is rejected by the static evaluator") {
    TorusField f(2, 3, true);
    SpaceNorm kq = SpaceNorm::interp_kq(SpaceNorm::linf(), SpaceNorm::hs(1.0), 0.5, 2.0);
    REQUIRE_THROWS_AS(norm(f, kq), std::invalid_argument);
}
