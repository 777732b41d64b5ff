#pragma once

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

// Self-contained complex FFT: iterative radix-2 for powers of two plus a
// Bluestein chirp-z fallback for arbitrary lengths.  All transforms are
// unnormalized: forward computes sum_k a_k e^{-2*pi*i*km/n}, inverse computes
// sum_k a_k e^{+2*pi*i km/n}.  Deterministic and thread-safe (twiddle tables
// behind a mutex), which is what the reproducibility contract needs.

namespace bblab {

using cdouble = std::complex<double>;
using cvec = std::vector<cdouble>;

namespace fft_detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

struct Tables {
    // twiddles[j] = exp(-2*pi*i j / n) for j < n/2
    cvec twiddle;
    std::vector<std::size_t> bitrev;
};

inline const Tables& tables_for(std::size_t n) {
    static std::mutex mu;
    static std::map<std::size_t, std::unique_ptr<Tables>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return *it->second;
    auto t = std::make_unique<Tables>();
    t->twiddle.resize(n / 2);
    constexpr double two_pi = 6.283185307179586476925286766559;
    for (std::size_t j = 0; j < n / 2; ++j) {
        double ang = -two_pi * double(j) / double(n);
        t->twiddle[j] = cdouble(std::cos(ang), std::sin(ang));
    }
    t->bitrev.resize(n);
    std::size_t log2n = 0;
    while ((std::size_t(1) << log2n) < n) ++log2n;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t r = 0;
        for (std::size_t b = 0; b < log2n; ++b)
            if (i & (std::size_t(1) << b)) r |= std::size_t(1) << (log2n - 1 - b);
        t->bitrev[i] = r;
    }
    cache.emplace(n, std::move(t));
    return *cache.at(n);
}

inline void fft_pow2(cdouble* a, std::size_t n, bool inverse) {
    if (n <= 1) return;
    const Tables& tb = tables_for(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t j = tb.bitrev[i];
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        std::size_t half = len >> 1;
        std::size_t step = n / len;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t j = 0; j < half; ++j) {
                cdouble w = tb.twiddle[j * step];
                if (inverse) w = std::conj(w);
                cdouble u = a[i + j];
                cdouble v = a[i + j + half] * w;
                a[i + j] = u + v;
                a[i + j + half] = u - v;
            }
        }
    }
}

struct Chirp {
    std::size_t n, m;
    cvec w;      // w[k] = exp(-pi*i k^2 / n)
    cvec fb;     // FFT of the chirp filter, length m
};

inline const Chirp& chirp_for(std::size_t n) {
    static std::mutex mu;
    static std::map<std::size_t, std::unique_ptr<Chirp>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return *it->second;
    auto c = std::make_unique<Chirp>();
    c->n = n;
    c->m = next_pow2(2 * n - 1);
    c->w.resize(n);
    constexpr double pi = 3.1415926535897932384626433832795;
    for (std::size_t k = 0; k < n; ++k) {
        // k^2 mod 2n keeps the angle small and accurate for large n
        std::size_t k2 = (k * k) % (2 * n);
        double ang = -pi * double(k2) / double(n);
        c->w[k] = cdouble(std::cos(ang), std::sin(ang));
    }
    c->fb.assign(c->m, cdouble(0.0, 0.0));
    for (std::size_t k = 0; k < n; ++k) {
        cdouble v = std::conj(c->w[k]);
        c->fb[k] = v;
        if (k != 0) c->fb[c->m - k] = v;
    }
    fft_pow2(c->fb.data(), c->m, false);
    cache.emplace(n, std::move(c));
    return *cache.at(n);
}

inline void fft_bluestein(cdouble* a, std::size_t n, bool inverse) {
    const Chirp& c = chirp_for(n);
    cvec fa(c.m, cdouble(0.0, 0.0));
    for (std::size_t k = 0; k < n; ++k) {
        cdouble w = inverse ? std::conj(c.w[k]) : c.w[k];
        fa[k] = a[k] * w;
    }
    fft_pow2(fa.data(), c.m, false);
    if (!inverse) {
        for (std::size_t k = 0; k < c.m; ++k) fa[k] *= c.fb[k];
    } else {
        // conjugate chirp filter for the inverse transform
        for (std::size_t k = 0; k < c.m; ++k) {
            std::size_t kc = (c.m - k) % c.m;
            fa[k] *= std::conj(c.fb[kc]);
        }
    }
    // unnormalized inverse FFT of length m
    fft_pow2(fa.data(), c.m, true);
    double scale = 1.0 / double(c.m);
    for (std::size_t k = 0; k < n; ++k) {
        cdouble w = inverse ? std::conj(c.w[k]) : c.w[k];
        a[k] = fa[k] * w * scale;
    }
}

} // namespace fft_detail

/// In-place DFT of length n.  inverse=false: sum a_k e^{-2*pi*i*km/n};
/// inverse=true: sum a_k e^{+2*pi*i km/n}.  No normalization either way.
inline void dft(cdouble* a, std::size_t n, bool inverse) {
    if (n <= 1) return;
    if (fft_detail::is_pow2(n))
        fft_detail::fft_pow2(a, n, inverse);
    else
        fft_detail::fft_bluestein(a, n, inverse);
}

inline void dft(cvec& a, bool inverse) { dft(a.data(), a.size(), inverse); }

/// Separable n-dimensional DFT over a row-major array with extents dims
/// (dims[0] slowest).  Same normalization conventions as dft().
inline void dft_nd(cvec& a, const std::vector<std::size_t>& dims, bool inverse) {
    std::size_t total = 1;
    for (auto d : dims) total *= d;
    if (a.size() != total) throw std::invalid_argument("dft_nd: size mismatch");
    std::size_t stride_after = 1; // product of extents after the current axis
    for (std::size_t ax = dims.size(); ax-- > 0;) {
        std::size_t n = dims[ax];
        std::size_t block = n * stride_after;
        cvec line(n);
        for (std::size_t base = 0; base < total; base += block) {
            for (std::size_t off = 0; off < stride_after; ++off) {
                cdouble* p = a.data() + base + off;
                for (std::size_t k = 0; k < n; ++k) line[k] = p[k * stride_after];
                dft(line.data(), n, inverse);
                for (std::size_t k = 0; k < n; ++k) p[k * stride_after] = line[k];
            }
        }
        stride_after *= n;
    }
}

} // namespace bblab
