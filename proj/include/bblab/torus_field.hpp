#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bblab/fft.hpp"

namespace bblab {

/**
 * Band-limited function on the d-torus, stored as Fourier coefficients on
 * the cube Z^d cap [-N,N]^d with the convention
 *
 *     f(x) = sum_n coeff(n) e^{i n.x},   x in [0,2*pi)^d.
 *
 * Storage is row-major with n_1 slowest and index offset +N per axis.
 * realflag marks fields with Hermitian coefficients, coeff(-n) = conj(coeff(n)).
 */
struct TorusField {
    int dim = 1;
    int bandlimit = 1;
    bool realflag = true;
    cvec coeffs;

    TorusField() = default;
    TorusField(int d, int N, bool real_) : dim(d), bandlimit(N), realflag(real_) {
        if (d < 1) throw std::invalid_argument("TorusField: dim must be >= 1");
        if (N < 1) throw std::invalid_argument("TorusField: bandlimit must be >= 1");
        coeffs.assign(size(), cdouble(0.0, 0.0));
    }

    int side() const { return 2 * bandlimit + 1; }
    std::size_t size() const {
        std::size_t s = 1;
        for (int j = 0; j < dim; ++j) s *= std::size_t(side());
        return s;
    }

    /// Linear index of the mode n (each |n_j| <= N), n_1 slowest.
    std::size_t index(const std::vector<int>& n) const {
        std::size_t idx = 0;
        for (int j = 0; j < dim; ++j) {
            int v = n[std::size_t(j)];
            if (v < -bandlimit || v > bandlimit)
                throw std::out_of_range("TorusField::index: mode outside band");
            idx = idx * std::size_t(side()) + std::size_t(v + bandlimit);
        }
        return idx;
    }

    cdouble& at(const std::vector<int>& n) { return coeffs[index(n)]; }
    const cdouble& at(const std::vector<int>& n) const { return coeffs[index(n)]; }

    /// Decodes a linear index back into the mode vector.
    std::vector<int> mode_of(std::size_t idx) const {
        std::vector<int> n(static_cast<std::size_t>(dim));
        for (int j = dim - 1; j >= 0; --j) {
            n[std::size_t(j)] = int(idx % std::size_t(side())) - bandlimit;
            idx /= std::size_t(side());
        }
        return n;
    }

    bool compatible(const TorusField& o) const {
        return dim == o.dim && bandlimit == o.bandlimit;
    }

    /// Checks finiteness and (for realflag) Hermitian symmetry to 1e-12
    /// relative.  Throws on violation.
    void validate() const {
        double scale = 0.0;
        for (const auto& c : coeffs) {
            if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
                throw std::runtime_error("TorusField: non-finite coefficient");
            scale = std::max(scale, std::abs(c));
        }
        if (!realflag) return;
        double tol = 1e-12 * std::max(scale, 1e-300);
        const std::size_t total = size();
        for (std::size_t idx = 0; idx < total; ++idx) {
            std::size_t ridx = total - 1 - idx; // index of -n
            cdouble diff = coeffs[idx] - std::conj(coeffs[ridx]);
            if (std::abs(diff) > tol)
                throw std::runtime_error("TorusField: realflag symmetry violated");
        }
    }

    TorusField& operator+=(const TorusField& o) {
        require_same(o);
        for (std::size_t i = 0; i < coeffs.size(); ++i) coeffs[i] += o.coeffs[i];
        return *this;
    }
    TorusField& operator-=(const TorusField& o) {
        require_same(o);
        for (std::size_t i = 0; i < coeffs.size(); ++i) coeffs[i] -= o.coeffs[i];
        return *this;
    }
    TorusField& operator*=(double a) {
        for (auto& c : coeffs) c *= a;
        return *this;
    }
    TorusField& operator*=(cdouble a) {
        for (auto& c : coeffs) c *= a;
        if (a.imag() != 0.0) realflag = false;
        return *this;
    }

    friend TorusField operator+(TorusField a, const TorusField& b) { return a += b; }
    friend TorusField operator-(TorusField a, const TorusField& b) { return a -= b; }
    friend TorusField operator*(double a, TorusField f) { return f *= a; }
    friend TorusField operator*(cdouble a, TorusField f) { return f *= a; }

private:
    void require_same(const TorusField& o) const {
        if (!compatible(o)) throw std::invalid_argument("TorusField: incompatible shapes");
    }
};

/// d-tuple of scalar fields sharing (dim, bandlimit); the arguments of div
/// and the solutions u, v.
struct VectorField {
    std::vector<TorusField> comps;

    VectorField() = default;
    explicit VectorField(std::vector<TorusField> c) : comps(std::move(c)) { check(); }
    VectorField(int d, int N, bool real_) {
        comps.assign(std::size_t(d), TorusField(d, N, real_));
    }

    int dim() const { return comps.empty() ? 0 : comps[0].dim; }
    int bandlimit() const { return comps.empty() ? 0 : comps[0].bandlimit; }
    bool realflag() const { return comps.empty() ? true : comps[0].realflag; }

    void check() const {
        if (comps.empty()) throw std::invalid_argument("VectorField: empty");
        if (int(comps.size()) != comps[0].dim)
            throw std::invalid_argument("VectorField: needs dim components");
        for (const auto& c : comps)
            if (!c.compatible(comps[0]) || c.realflag != comps[0].realflag)
                throw std::invalid_argument("VectorField: incompatible components");
    }

    VectorField& operator+=(const VectorField& o) {
        for (std::size_t j = 0; j < comps.size(); ++j) comps[j] += o.comps[j];
        return *this;
    }
    VectorField& operator-=(const VectorField& o) {
        for (std::size_t j = 0; j < comps.size(); ++j) comps[j] -= o.comps[j];
        return *this;
    }
    VectorField& operator*=(double a) {
        for (auto& c : comps) c *= a;
        return *this;
    }
    VectorField& operator*=(cdouble a) {
        for (auto& c : comps) c *= a;
        return *this;
    }
    friend VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
    friend VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
    friend VectorField operator*(double a, VectorField f) { return f *= a; }
};

// ---------------------------------------------------------------------------
// Grid evaluation and coefficient extraction
// ---------------------------------------------------------------------------

/// Values of f on the uniform grid with (2N+1)*oversample points per axis,
/// x_m = 2*pi*m / M.  Exact trigonometric evaluation via zero-padded DFT.
inline cvec grid_values(const TorusField& f, int oversample = 1) {
    if (oversample < 1) throw std::invalid_argument("grid_values: oversample >= 1");
    const int M = f.side() * oversample;
    const int d = f.dim;
    std::vector<std::size_t> dims(static_cast<std::size_t>(d), static_cast<std::size_t>(M));
    std::size_t total = 1;
    for (int j = 0; j < d; ++j) total *= std::size_t(M);
    cvec buf(total, cdouble(0.0, 0.0));
    // place coeff(n) in bin (n mod M) along each axis
    const std::size_t ncoef = f.size();
    for (std::size_t idx = 0; idx < ncoef; ++idx) {
        std::size_t rem = idx, bin = 0;
        for (int j = 0; j < d; ++j) {
            std::size_t p = 1;
            for (int l = j + 1; l < d; ++l) p *= std::size_t(f.side());
            int nj = int(rem / p) - f.bandlimit;
            rem %= p;
            int b = nj >= 0 ? nj : nj + M;
            bin = bin * std::size_t(M) + std::size_t(b);
        }
        buf[bin] = f.coeffs[idx];
    }
    dft_nd(buf, dims, /*inverse=*/true);
    return buf;
}

/// Inverse of grid_values on the same grid: recovers the coefficient cube of
/// a band-limited field from its grid samples.
inline TorusField field_from_grid(const cvec& values, int d, int N, int oversample,
                                  bool realflag) {
    const int M = (2 * N + 1) * oversample;
    std::vector<std::size_t> dims(static_cast<std::size_t>(d), static_cast<std::size_t>(M));
    std::size_t total = 1;
    for (int j = 0; j < d; ++j) total *= std::size_t(M);
    if (values.size() != total)
        throw std::invalid_argument("field_from_grid: wrong grid size");
    cvec buf = values;
    dft_nd(buf, dims, /*inverse=*/false);
    const double inv = 1.0 / double(total);
    TorusField f(d, N, realflag);
    const std::size_t ncoef = f.size();
    for (std::size_t idx = 0; idx < ncoef; ++idx) {
        std::size_t rem = idx, bin = 0;
        for (int j = 0; j < d; ++j) {
            std::size_t p = 1;
            for (int l = j + 1; l < d; ++l) p *= std::size_t(f.side());
            int nj = int(rem / p) - N;
            rem %= p;
            int b = nj >= 0 ? nj : nj + M;
            bin = bin * std::size_t(M) + std::size_t(b);
        }
        f.coeffs[idx] = buf[bin] * inv;
    }
    return f;
}

// ---------------------------------------------------------------------------
// Differential operators in Fourier representation
// ---------------------------------------------------------------------------

/// (div u)^(n) = i sum_j n_j u_j^(n); the n=0 coefficient always vanishes.
inline TorusField divergence(const VectorField& u) {
    u.check();
    TorusField out(u.dim(), u.bandlimit(), u.realflag());
    const std::size_t total = out.size();
    for (std::size_t idx = 0; idx < total; ++idx) {
        auto n = out.mode_of(idx);
        cdouble acc(0.0, 0.0);
        for (int j = 0; j < u.dim(); ++j)
            acc += cdouble(0.0, double(n[std::size_t(j)])) * u.comps[std::size_t(j)].coeffs[idx];
        out.coeffs[idx] = acc;
    }
    return out;
}

/// (grad f)_j^(n) = i n_j f^(n).
inline VectorField gradient(const TorusField& f) {
    VectorField out(f.dim, f.bandlimit, f.realflag);
    const std::size_t total = f.size();
    for (std::size_t idx = 0; idx < total; ++idx) {
        auto n = f.mode_of(idx);
        for (int j = 0; j < f.dim; ++j)
            out.comps[std::size_t(j)].coeffs[idx] =
                cdouble(0.0, double(n[std::size_t(j)])) * f.coeffs[idx];
    }
    return out;
}

/// Kills the n=0 coefficient; idempotent.
inline TorusField zero_mean_project(TorusField f) {
    std::vector<int> zero(std::size_t(f.dim), 0);
    f.at(zero) = cdouble(0.0, 0.0);
    return f;
}

inline VectorField zero_mean_project(VectorField u) {
    for (auto& c : u.comps) c = zero_mean_project(std::move(c));
    return u;
}

// ---------------------------------------------------------------------------
// Random fields and inner products
// ---------------------------------------------------------------------------

/// iid complex Gaussian coefficients, Hermitian-symmetrized when realflag.
inline TorusField random_field(std::mt19937_64& rng, int d, int N, bool realflag) {
    TorusField f(d, N, false);
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto& c : f.coeffs) c = cdouble(g(rng), g(rng));
    if (realflag) {
        const std::size_t total = f.size();
        TorusField h(d, N, true);
        for (std::size_t idx = 0; idx < total; ++idx)
            h.coeffs[idx] = 0.5 * (f.coeffs[idx] + std::conj(f.coeffs[total - 1 - idx]));
        return h;
    }
    return f;
}

inline VectorField random_vector_field(std::mt19937_64& rng, int d, int N, bool realflag) {
    std::vector<TorusField> comps;
    comps.reserve(std::size_t(d));
    for (int j = 0; j < d; ++j) comps.push_back(random_field(rng, d, N, realflag));
    return VectorField(std::move(comps));
}

/// Parseval pairing sum_n conj(a^(n)) b^(n).
inline cdouble dotc(const TorusField& a, const TorusField& b) {
    cdouble acc(0.0, 0.0);
    for (std::size_t i = 0; i < a.coeffs.size(); ++i)
        acc += std::conj(a.coeffs[i]) * b.coeffs[i];
    return acc;
}

inline double coeff_max_abs(const TorusField& f) {
    double m = 0.0;
    for (const auto& c : f.coeffs) m = std::max(m, std::abs(c));
    return m;
}

inline double coeff_max_abs(const VectorField& u) {
    double m = 0.0;
    for (const auto& c : u.comps) m = std::max(m, coeff_max_abs(c));
    return m;
}

// ---------------------------------------------------------------------------
// TFD1 file format
// ---------------------------------------------------------------------------
// ASCII header line "TFD1 d N realflag\n", then (2N+1)^d little-endian
// (re, im) pairs of 8-byte floats, row-major with n_1 slowest, offset +N.

inline void save_tfd1(std::ostream& os, const TorusField& f) {
    os << "TFD1 " << f.dim << ' ' << f.bandlimit << ' ' << (f.realflag ? 1 : 0) << '\n';
    static_assert(sizeof(double) == 8, "TFD1 needs 8-byte doubles");
    for (const auto& c : f.coeffs) {
        double re = c.real(), im = c.imag();
        os.write(reinterpret_cast<const char*>(&re), 8);
        os.write(reinterpret_cast<const char*>(&im), 8);
    }
    if (!os) throw std::runtime_error("TFD1: write failure");
}

inline TorusField load_tfd1(std::istream& is) {
    std::string header;
    if (!std::getline(is, header))
        throw std::runtime_error("TFD1: missing header line");
    std::istringstream hs(header);
    std::string magic;
    int d = 0, N = 0, rf = 0;
    if (!(hs >> magic >> d >> N >> rf) || magic != "TFD1")
        throw std::runtime_error("TFD1: bad header '" + header + "'");
    if (d < 1 || N < 1 || (rf != 0 && rf != 1))
        throw std::runtime_error("TFD1: invalid header values '" + header + "'");
    TorusField f(d, N, rf == 1);
    const std::size_t total = f.size();
    for (std::size_t i = 0; i < total; ++i) {
        double re = 0.0, im = 0.0;
        is.read(reinterpret_cast<char*>(&re), 8);
        is.read(reinterpret_cast<char*>(&im), 8);
        if (!is)
            throw std::runtime_error("TFD1: truncated payload at coefficient " +
                                     std::to_string(i) + " of " + std::to_string(total));
        f.coeffs[i] = cdouble(re, im);
    }
    return f;
}

} // namespace bblab
