#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "bblab/fft.hpp"

using namespace bblab;

namespace {

cvec naive_dft(const cvec& a, bool inverse) {
    const std::size_t n = a.size();
    cvec out(n, cdouble(0.0, 0.0));
    const double sgn = inverse ? 1.0 : -1.0;
    for (std::size_t m = 0; m < n; ++m) {
        cdouble acc(0.0, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            double ang = sgn * 2.0 * M_PI * double((k * m) % n) / double(n);
            acc += a[k] * cdouble(std::cos(ang), std::sin(ang));
        }
        out[m] = acc;
    }
    return out;
}

cvec random_vec(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    cvec v(n);
    for (auto& c : v) c = cdouble(g(rng), g(rng));
    return v;
}

} // namespace

TEST_CASE("dft matches naive DFT on assorted sizes") {
    for (std::size_t n : {1u, 2u, 3u, 8u, 17u, 34u, 64u, 68u, 105u, 1025u}) {
        cvec a = random_vec(n, unsigned(1000 + n));
        cvec want = naive_dft(a, false);
        cvec got = a;
        dft(got, false);
        double scale = 0.0, err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            scale = std::max(scale, std::abs(want[i]));
            err = std::max(err, std::abs(want[i] - got[i]));
        }
        INFO("n=" << n);
        REQUIRE(err <= 1e-10 * std::max(scale, 1.0));
    }
}

TEST_CASE("forward then inverse recovers input") {
    for (std::size_t n : {4u, 9u, 68u, 513u, 1025u}) {
        cvec a = random_vec(n, unsigned(2000 + n));
        cvec b = a;
        dft(b, false);
        dft(b, true);
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            err = std::max(err, std::abs(b[i] / double(n) - a[i]));
        REQUIRE(err <= 1e-11);
    }
}

TEST_CASE("dft_nd round-trips a 2-D array") {
    std::vector<std::size_t> dims{17, 34};
    cvec a = random_vec(17 * 34, 7);
    cvec b = a;
    dft_nd(b, dims, false);
    dft_nd(b, dims, true);
    double err = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        err = std::max(err, std::abs(b[i] / double(17 * 34) - a[i]));
    REQUIRE(err <= 1e-11);
}
