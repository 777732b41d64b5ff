#pragma once

#include <cmath>
#include <vector>

#include "bblab/torus_field.hpp"

namespace bblab {

// Smooth dyadic partition of unity on frequency space.  The profile is a
// raised cosine: chi(r) = 1 for r <= 1, 0 for r >= 2, cos-interpolated
// between.  psi_0 = chi(|n|), psi_k = chi(2^-k |n|) - chi(2^-k+1 |n|), so
// psi_k lives on 2^{k-1} <= |n| <= 2^{k+1} and the blocks sum to one on any
// finite cube once enough of them are taken.

inline double lp_chi(double r) {
    if (r <= 1.0) return 1.0;
    if (r >= 2.0) return 0.0;
    return 0.5 * (1.0 + std::cos(M_PI * (r - 1.0)));
}

inline double lp_psi(int k, double r) {
    if (k == 0) return lp_chi(r);
    double s = std::ldexp(r, -k); // r / 2^k
    return lp_chi(s) - lp_chi(2.0 * s);
}

/// Number of blocks needed so that sum_k psi_k == 1 on the whole coefficient
/// cube (Euclidean radius N sqrt(d)).
inline int lp_block_count(int d, int N) {
    double rmax = double(N) * std::sqrt(double(d));
    int K = 0;
    while (std::ldexp(1.0, K) < rmax) ++K;
    return K + 1; // blocks 0..K
}

/// P_k f: multiply coefficients by psi_k(|n|).
inline TorusField lp_block(const TorusField& f, int k) {
    if (k < 0) throw std::invalid_argument("lp_block: k >= 0");
    TorusField out = f;
    const std::size_t total = f.size();
    for (std::size_t idx = 0; idx < total; ++idx) {
        auto n = f.mode_of(idx);
        double r2 = 0.0;
        for (int j = 0; j < f.dim; ++j) r2 += double(n[std::size_t(j)]) * double(n[std::size_t(j)]);
        out.coeffs[idx] *= lp_psi(k, std::sqrt(r2));
    }
    return out;
}

/// psi_k sampled on the coefficient cube, cached per (d, N).
inline const std::vector<std::vector<double>>& lp_weights(int d, int N) {
    struct Key {
        int d, N;
        bool operator<(const Key& o) const { return d < o.d || (d == o.d && N < o.N); }
    };
    static std::mutex mu;
    static std::map<Key, std::unique_ptr<std::vector<std::vector<double>>>> cache;
    std::lock_guard<std::mutex> lock(mu);
    Key key{d, N};
    auto it = cache.find(key);
    if (it != cache.end()) return *it->second;
    TorusField probe(d, N, false);
    const int K = lp_block_count(d, N);
    auto w = std::make_unique<std::vector<std::vector<double>>>(std::size_t(K));
    const std::size_t total = probe.size();
    for (int k = 0; k < K; ++k) {
        (*w)[std::size_t(k)].resize(total);
        for (std::size_t idx = 0; idx < total; ++idx) {
            auto n = probe.mode_of(idx);
            double r2 = 0.0;
            for (int j = 0; j < d; ++j) r2 += double(n[std::size_t(j)]) * double(n[std::size_t(j)]);
            (*w)[std::size_t(k)][idx] = lp_psi(k, std::sqrt(r2));
        }
    }
    cache.emplace(key, std::move(w));
    return *cache.at(key);
}

} // namespace bblab
