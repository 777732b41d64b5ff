#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "bblab/torus_field.hpp"

using namespace bblab;

TEST_CASE("grid_values of a single mode is unimodular") {
    TorusField f(2, 4, false);
    f.at({2, -1}) = cdouble(1.0, 0.0);
    for (int os : {1, 3}) {
        cvec vals = grid_values(f, os);
        for (const auto& v : vals) REQUIRE(std::abs(std::abs(v) - 1.0) < 1e-12);
    }
}

TEST_CASE("grid_values of zero field is zero") {
    TorusField f(2, 3, true);
    cvec vals = grid_values(f, 2);
    for (const auto& v : vals) REQUIRE(std::abs(v) == 0.0);
}

TEST_CASE("grid round-trip recovers coefficients") {
    std::mt19937_64 rng(42);
    for (bool realflag : {true, false}) {
        TorusField f = random_field(rng, 2, 5, realflag);
        for (int os : {1, 2, 4}) {
            cvec vals = grid_values(f, os);
            TorusField g = field_from_grid(vals, 2, 5, os, realflag);
            double err = 0.0;
            for (std::size_t i = 0; i < f.coeffs.size(); ++i)
                err = std::max(err, std::abs(f.coeffs[i] - g.coeffs[i]));
            REQUIRE(err <= 1e-12 * std::max(1.0, coeff_max_abs(f)));
        }
    }
}

TEST_CASE("divergence of a gradient is the spectral Laplacian") {
    std::mt19937_64 rng(7);
    TorusField f = random_field(rng, 2, 6, true);
    TorusField lap = divergence(gradient(f));
    for (std::size_t idx = 0; idx < f.size(); ++idx) {
        auto n = f.mode_of(idx);
        double n2 = double(n[0]) * n[0] + double(n[1]) * n[1];
        REQUIRE(std::abs(lap.coeffs[idx] + n2 * f.coeffs[idx]) <= 1e-12 * (1.0 + n2));
    }
}

TEST_CASE("divergence-free fields have zero divergence") {
    // u = (-d2 psi, d1 psi) is divergence-free
    std::mt19937_64 rng(9);
    TorusField psi = random_field(rng, 2, 5, true);
    VectorField u(2, 5, true);
    for (std::size_t idx = 0; idx < psi.size(); ++idx) {
        auto n = psi.mode_of(idx);
        u.comps[0].coeffs[idx] = cdouble(0.0, -double(n[1])) * psi.coeffs[idx];
        u.comps[1].coeffs[idx] = cdouble(0.0, double(n[0])) * psi.coeffs[idx];
    }
    TorusField dv = divergence(u);
    REQUIRE(coeff_max_abs(dv) <= 1e-12 * std::max(1.0, coeff_max_abs(psi)));
}

TEST_CASE("divergence always has zero mean coefficient") {
    std::mt19937_64 rng(11);
    VectorField u = random_vector_field(rng, 2, 4, true);
    TorusField dv = divergence(u);
    REQUIRE(std::abs(dv.at({0, 0})) == 0.0);
}

TEST_CASE("zero_mean_project behavior") {
    TorusField c(2, 3, true);
    c.at({0, 0}) = 5.0;
    TorusField z = zero_mean_project(c);
    REQUIRE(coeff_max_abs(z) == 0.0);

    std::mt19937_64 rng(3);
    TorusField f = zero_mean_project(random_field(rng, 2, 3, true));
    TorusField g = zero_mean_project(f);
    for (std::size_t i = 0; i < f.size(); ++i) REQUIRE(f.coeffs[i] == g.coeffs[i]);
}

TEST_CASE("random real fields satisfy the Hermitian invariant") {
    std::mt19937_64 rng(1);
    TorusField f = random_field(rng, 3, 2, true);
    REQUIRE_NOTHROW(f.validate());
    f.coeffs[0] += cdouble(0.5, 0.5); // break symmetry
    REQUIRE_THROWS(f.validate());
}

TEST_CASE("TFD1 round-trip is exact") {
    std::mt19937_64 rng(5);
    TorusField f = random_field(rng, 2, 4, false);
    std::stringstream ss;
    save_tfd1(ss, f);
    TorusField g = load_tfd1(ss);
    REQUIRE(g.dim == f.dim);
    REQUIRE(g.bandlimit == f.bandlimit);
    REQUIRE(g.realflag == f.realflag);
    for (std::size_t i = 0; i < f.size(); ++i) REQUIRE(f.coeffs[i] == g.coeffs[i]);
}

TEST_CASE("TFD1 rejects malformed input") {
    std::stringstream bad1("WRONG 2 4 1\n");
    REQUIRE_THROWS(load_tfd1(bad1));
    std::stringstream bad2("TFD1 2 4 1\nshort");
    REQUIRE_THROWS(load_tfd1(bad2));
}
