#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "bblab/field_traits.hpp"
#include "bblab/space_norm.hpp"
#include "bblab/torus_field.hpp"
#include "bblab/util.hpp"

// First-order primal-dual solver (proximal splitting) for problems of the
// form
//
//     minimize over x   sum_t  w_t * max_j N_{t,j}( Op_{t,j}( s_t * U(x) + b_t ) )
//
// where U is an optional linear change of variables (plus offset), each
// N_{t,j} is an l1 / l2 / linf norm of a linear image, s_t = +-1 and b_t are
// per-group affine data.  Every norm constraint is handled through the
// projection onto its epigraph, so the only proximal maps needed are
// closed-form cone projections.  Step sizes are sigma = tau = 0.9 / L with L
// the operator norm of the stacked constraint map estimated by power
// iteration.  Lower bounds come from caller-assembled dual certificates, so
// the reported duality gap is a rigorous bound on suboptimality.

namespace bblab {

// ---------------------------------------------------------------------------
// Linear operators on flat complex vectors
// ---------------------------------------------------------------------------

struct LinOp {
    virtual ~LinOp() = default;
    virtual std::size_t in_size() const = 0;
    virtual std::size_t out_size() const = 0;
    virtual void apply(const cvec& in, cvec& out) const = 0;
    virtual void adjoint(const cvec& in, cvec& out) const = 0;
    /// Solve adjoint(eta) == r exactly; returns false when unsupported.
    virtual bool lift(const cvec& r, cvec& eta) const {
        (void)r;
        (void)eta;
        return false;
    }
    /// Upper bound on the operator norm, used to balance epigraph rows.
    virtual double norm_bound() const = 0;
};

using LinOpPtr = std::shared_ptr<const LinOp>;

struct IdOp final : LinOp {
    std::size_t n;
    explicit IdOp(std::size_t n_) : n(n_) {}
    std::size_t in_size() const override { return n; }
    std::size_t out_size() const override { return n; }
    void apply(const cvec& in, cvec& out) const override { out = in; }
    void adjoint(const cvec& in, cvec& out) const override { out = in; }
    bool lift(const cvec& r, cvec& eta) const override {
        eta = r;
        return true;
    }
    double norm_bound() const override { return 1.0; }
};

/// Real diagonal scaling (Sobolev and Besov weights).
struct DiagOp final : LinOp {
    std::vector<double> w;
    explicit DiagOp(std::vector<double> w_) : w(std::move(w_)) {}
    std::size_t in_size() const override { return w.size(); }
    std::size_t out_size() const override { return w.size(); }
    void apply(const cvec& in, cvec& out) const override {
        out.resize(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) out[i] = in[i] * w[i];
    }
    void adjoint(const cvec& in, cvec& out) const override { apply(in, out); }
    bool lift(const cvec& r, cvec& eta) const override {
        eta.resize(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (w[i] == 0.0) {
                if (std::abs(r[i]) > 1e-13) return false;
                eta[i] = 0.0;
            } else {
                eta[i] = r[i] / w[i];
            }
        }
        return true;
    }
    double norm_bound() const override {
        double m = 0.0;
        for (double v : w) m = std::max(m, std::abs(v));
        return m > 0.0 ? m : 1.0;
    }
};

/// Coefficient cube -> scaled values on the oversampled grid.  Small 1-D and
/// 2-D grids use precomputed dense axis matrices (the solver hot path);
/// larger shapes fall back to padded FFTs.
struct GridEvalOp final : LinOp {
    int d, N, os;
    double scale;
    std::size_t ncoef, ngrid;
    std::size_t side, M;
    std::vector<std::size_t> bins; // coeff index -> grid bin (FFT path)
    std::vector<std::size_t> dims;
    bool dense;
    cvec E; // M x side, E[m*side + j] = exp(+i m (j - N) 2 pi / M)

    GridEvalOp(int d_, int N_, int os_, double scale_)
        : d(d_), N(N_), os(os_), scale(scale_) {
        side = std::size_t(2 * N + 1);
        M = side * std::size_t(os);
        ncoef = 1;
        ngrid = 1;
        for (int j = 0; j < d; ++j) {
            ncoef *= side;
            ngrid *= M;
        }
        dims.assign(std::size_t(d), M);
        dense = (d <= 2 && M <= 256);
        if (dense) {
            E.resize(M * side);
            constexpr double two_pi = 6.283185307179586476925286766559;
            for (std::size_t m = 0; m < M; ++m)
                for (std::size_t j = 0; j < side; ++j) {
                    double ang = two_pi * double(m) * double(int(j) - N) / double(M);
                    E[m * side + j] = cdouble(std::cos(ang), std::sin(ang));
                }
        } else {
            bins.resize(ncoef);
            for (std::size_t idx = 0; idx < ncoef; ++idx) {
                std::size_t rem = idx, bin = 0;
                for (int j = 0; j < d; ++j) {
                    std::size_t p = 1;
                    for (int l = j + 1; l < d; ++l) p *= side;
                    int nj = int(rem / p) - N;
                    rem %= p;
                    std::size_t b = std::size_t(nj >= 0 ? nj : nj + int(M));
                    bin = bin * M + b;
                }
                bins[idx] = bin;
            }
        }
    }
    std::size_t in_size() const override { return ncoef; }
    std::size_t out_size() const override { return ngrid; }

    void apply(const cvec& in, cvec& out) const override {
        if (!dense) {
            out.assign(ngrid, cdouble(0.0, 0.0));
            for (std::size_t i = 0; i < ncoef; ++i) out[bins[i]] = in[i];
            dft_nd(out, dims, /*inverse=*/true);
            for (auto& v : out) v *= scale;
            return;
        }
        out.resize(ngrid);
        if (d == 1) {
            for (std::size_t m = 0; m < M; ++m) {
                cdouble acc(0.0, 0.0);
                const cdouble* e = &E[m * side];
                for (std::size_t j = 0; j < side; ++j) acc += e[j] * in[j];
                out[m] = acc * scale;
            }
            return;
        }
        // d == 2: tmp[a][m2] = sum_j in[a][j] E[m2][j]; out = E tmp
        cvec tmp(side * M);
        for (std::size_t a = 0; a < side; ++a) {
            const cdouble* row = &in[a * side];
            for (std::size_t m = 0; m < M; ++m) {
                cdouble acc(0.0, 0.0);
                const cdouble* e = &E[m * side];
                for (std::size_t j = 0; j < side; ++j) acc += e[j] * row[j];
                tmp[a * M + m] = acc;
            }
        }
        for (std::size_t m1 = 0; m1 < M; ++m1) {
            const cdouble* e = &E[m1 * side];
            for (std::size_t m2 = 0; m2 < M; ++m2) {
                cdouble acc(0.0, 0.0);
                for (std::size_t a = 0; a < side; ++a) acc += e[a] * tmp[a * M + m2];
                out[m1 * M + m2] = acc * scale;
            }
        }
    }

    void adjoint(const cvec& in, cvec& out) const override {
        if (!dense) {
            cvec buf = in;
            dft_nd(buf, dims, /*inverse=*/false);
            out.resize(ncoef);
            for (std::size_t i = 0; i < ncoef; ++i) out[i] = buf[bins[i]] * scale;
            return;
        }
        out.resize(ncoef);
        if (d == 1) {
            for (std::size_t j = 0; j < side; ++j) {
                cdouble acc(0.0, 0.0);
                for (std::size_t m = 0; m < M; ++m) acc += std::conj(E[m * side + j]) * in[m];
                out[j] = acc * scale;
            }
            return;
        }
        // tmp[a][m2] = sum_{m1} conj(E[m1][a]) in[m1][m2]
        cvec tmp(side * M, cdouble(0.0, 0.0));
        for (std::size_t m1 = 0; m1 < M; ++m1) {
            const cdouble* e = &E[m1 * side];
            const cdouble* row = &in[m1 * M];
            for (std::size_t a = 0; a < side; ++a) {
                cdouble c = std::conj(e[a]);
                cdouble* trow = &tmp[a * M];
                for (std::size_t m2 = 0; m2 < M; ++m2) trow[m2] += c * row[m2];
            }
        }
        for (std::size_t a = 0; a < side; ++a) {
            const cdouble* trow = &tmp[a * M];
            for (std::size_t j = 0; j < side; ++j) {
                cdouble acc(0.0, 0.0);
                for (std::size_t m = 0; m < M; ++m) acc += std::conj(E[m * side + j]) * trow[m];
                out[a * side + j] = acc * scale;
            }
        }
    }

    bool lift(const cvec& r, cvec& eta) const override {
        apply(r, eta);
        const double c = 1.0 / (scale * scale * double(ngrid));
        for (auto& v : eta) v *= c;
        return true;
    }
    // columns are orthogonal exponentials of squared length ngrid
    double norm_bound() const override { return std::abs(scale) * std::sqrt(double(ngrid)); }
};

/// Picks one component block out of a stacked vector-field variable.
struct SelectOp final : LinOp {
    std::size_t ncomp, comp, block;
    SelectOp(std::size_t ncomp_, std::size_t comp_, std::size_t block_)
        : ncomp(ncomp_), comp(comp_), block(block_) {}
    std::size_t in_size() const override { return ncomp * block; }
    std::size_t out_size() const override { return block; }
    void apply(const cvec& in, cvec& out) const override {
        out.assign(in.begin() + comp * block, in.begin() + (comp + 1) * block);
    }
    void adjoint(const cvec& in, cvec& out) const override {
        out.assign(ncomp * block, cdouble(0.0, 0.0));
        std::copy(in.begin(), in.end(), out.begin() + comp * block);
    }
    double norm_bound() const override { return 1.0; }
};

struct CompOp final : LinOp {
    LinOpPtr outer, inner; // apply = outer(inner(x))
    CompOp(LinOpPtr outer_, LinOpPtr inner_) : outer(std::move(outer_)), inner(std::move(inner_)) {
        if (this->outer->in_size() != this->inner->out_size())
            throw std::invalid_argument("CompOp: size mismatch");
    }
    std::size_t in_size() const override { return inner->in_size(); }
    std::size_t out_size() const override { return outer->out_size(); }
    void apply(const cvec& in, cvec& out) const override {
        cvec mid;
        inner->apply(in, mid);
        outer->apply(mid, out);
    }
    void adjoint(const cvec& in, cvec& out) const override {
        cvec mid;
        outer->adjoint(in, mid);
        inner->adjoint(mid, out);
    }
    bool lift(const cvec& r, cvec& eta) const override {
        cvec z;
        if (!inner->lift(r, z)) return false;
        return outer->lift(z, eta);
    }
    double norm_bound() const override { return outer->norm_bound() * inner->norm_bound(); }
};

/// Mode-indexed helper shared by the spectral operators below.
struct ModeTable {
    int d, N;
    std::size_t ncoef;
    std::vector<std::vector<int>> modes; // idx -> n

    ModeTable(int d_, int N_) : d(d_), N(N_) {
        const int side = 2 * N + 1;
        ncoef = 1;
        for (int j = 0; j < d; ++j) ncoef *= std::size_t(side);
        modes.resize(ncoef);
        for (std::size_t idx = 0; idx < ncoef; ++idx) {
            std::vector<int> n(std::size_t(d), 0);
            std::size_t rem = idx;
            for (int j = d - 1; j >= 0; --j) {
                n[std::size_t(j)] = int(rem % std::size_t(side)) - N;
                rem /= std::size_t(side);
            }
            modes[idx] = std::move(n);
        }
    }
    double mode_sq(std::size_t idx) const {
        double r = 0.0;
        for (int v : modes[idx]) r += double(v) * double(v);
        return r;
    }
};

inline std::shared_ptr<const ModeTable> mode_table(int d, int N) {
    struct Key {
        int d, N;
        bool operator<(const Key& o) const { return d < o.d || (d == o.d && N < o.N); }
    };
    static std::mutex mu;
    static std::map<Key, std::shared_ptr<const ModeTable>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(Key{d, N});
    if (it != cache.end()) return it->second;
    auto t = std::make_shared<const ModeTable>(d, N);
    cache.emplace(Key{d, N}, t);
    return t;
}

/// Scalar (mean-zero) potential -> gradient vector field.
struct GradOp final : LinOp {
    std::shared_ptr<const ModeTable> mt;
    GradOp(int d, int N) : mt(mode_table(d, N)) {}
    std::size_t in_size() const override { return mt->ncoef; }
    std::size_t out_size() const override { return std::size_t(mt->d) * mt->ncoef; }
    void apply(const cvec& in, cvec& out) const override {
        out.resize(out_size());
        for (int j = 0; j < mt->d; ++j)
            for (std::size_t i = 0; i < mt->ncoef; ++i)
                out[std::size_t(j) * mt->ncoef + i] =
                    cdouble(0.0, double(mt->modes[i][std::size_t(j)])) * in[i];
    }
    void adjoint(const cvec& in, cvec& out) const override {
        out.assign(mt->ncoef, cdouble(0.0, 0.0));
        for (int j = 0; j < mt->d; ++j)
            for (std::size_t i = 0; i < mt->ncoef; ++i)
                out[i] += cdouble(0.0, -double(mt->modes[i][std::size_t(j)])) *
                          in[std::size_t(j) * mt->ncoef + i];
    }
    bool lift(const cvec& r, cvec& eta) const override {
        // eta = grad(lap^{-1} r); needs the zero mode of r to vanish
        cvec phi(mt->ncoef, cdouble(0.0, 0.0));
        for (std::size_t i = 0; i < mt->ncoef; ++i) {
            double n2 = mt->mode_sq(i);
            if (n2 == 0.0) {
                if (std::abs(r[i]) > 1e-12) return false;
            } else {
                phi[i] = r[i] / n2;
            }
        }
        apply(phi, eta);
        return true;
    }
    double norm_bound() const override { return std::sqrt(double(mt->d)) * double(mt->N); }
};

/// Leray projection onto divergence-free fields (identity on the zero mode).
struct LerayOp final : LinOp {
    std::shared_ptr<const ModeTable> mt;
    LerayOp(int d, int N) : mt(mode_table(d, N)) {}
    std::size_t in_size() const override { return std::size_t(mt->d) * mt->ncoef; }
    std::size_t out_size() const override { return in_size(); }
    void apply(const cvec& in, cvec& out) const override {
        const int d = mt->d;
        out = in;
        for (std::size_t i = 0; i < mt->ncoef; ++i) {
            double n2 = mt->mode_sq(i);
            if (n2 == 0.0) continue;
            cdouble ndot(0.0, 0.0);
            for (int j = 0; j < d; ++j)
                ndot += double(mt->modes[i][std::size_t(j)]) * in[std::size_t(j) * mt->ncoef + i];
            for (int j = 0; j < d; ++j)
                out[std::size_t(j) * mt->ncoef + i] -=
                    double(mt->modes[i][std::size_t(j)]) * ndot / n2;
        }
    }
    void adjoint(const cvec& in, cvec& out) const override { apply(in, out); }
    double norm_bound() const override { return 1.0; }
};

// ---------------------------------------------------------------------------
// Norm atoms and epigraph projections
// ---------------------------------------------------------------------------

enum class AtomKind { L1, L2, Linf };

inline double atom_eval(AtomKind k, const cvec& v) {
    switch (k) {
        case AtomKind::L1: {
            double a = 0.0;
            for (const auto& c : v) a += std::abs(c);
            return a;
        }
        case AtomKind::L2: {
            double a = 0.0;
            for (const auto& c : v) a += std::norm(c);
            return std::sqrt(a);
        }
        case AtomKind::Linf: {
            double a = 0.0;
            for (const auto& c : v) a = std::max(a, std::abs(c));
            return a;
        }
    }
    return 0.0;
}

inline double atom_dual(AtomKind k, const cvec& v) {
    switch (k) {
        case AtomKind::L1: return atom_eval(AtomKind::Linf, v);
        case AtomKind::L2: return atom_eval(AtomKind::L2, v);
        case AtomKind::Linf: return atom_eval(AtomKind::L1, v);
    }
    return 0.0;
}

/// Projection onto {(v, s) : ||v||_2 <= s}.
inline void project_epi_l2(cvec& v, double& s) {
    double r = atom_eval(AtomKind::L2, v);
    if (r <= s) return;
    if (r <= -s) {
        std::fill(v.begin(), v.end(), cdouble(0.0, 0.0));
        s = 0.0;
        return;
    }
    double a = 0.5 * (1.0 + s / r);
    for (auto& c : v) c *= a;
    s = a * r;
}

/// Projection onto {(v, s) : max_i |v_i| <= s}.
inline void project_epi_linf(cvec& v, double& s) {
    double mx = atom_eval(AtomKind::Linf, v);
    if (mx <= s) return;
    std::vector<double> a(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) a[i] = std::abs(v[i]);
    std::sort(a.begin(), a.end(), std::greater<double>());
    // minimize  sum_{a_i > sig} (a_i - sig)^2 + (sig - s)^2  over sig
    double P = 0.0, sig = s;
    bool found = false;
    for (std::size_t k = 1; k <= a.size(); ++k) {
        P += a[k - 1];
        double cand = (P + s) / double(k + 1);
        double lo = (k < a.size()) ? a[k] : -std::numeric_limits<double>::infinity();
        if (cand >= lo && cand <= a[k - 1]) {
            sig = cand;
            found = true;
            break;
        }
    }
    if (!found) sig = (P + s) / double(a.size() + 1);
    if (sig <= 0.0) {
        std::fill(v.begin(), v.end(), cdouble(0.0, 0.0));
        s = 0.0;
        return;
    }
    for (auto& c : v) {
        double m = std::abs(c);
        if (m > sig) c *= sig / m;
    }
    s = sig;
}

/// Projection onto {(v, s) : sum_i |v_i| <= s}.
inline void project_epi_l1(cvec& v, double& s) {
    double tot = atom_eval(AtomKind::L1, v);
    if (tot <= s) return;
    std::vector<double> a(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) a[i] = std::abs(v[i]);
    std::sort(a.begin(), a.end(), std::greater<double>());
    // soft-threshold level lam with  sum max(a_i - lam, 0) = s + lam
    double P = 0.0, lam = -1.0;
    for (std::size_t k = 1; k <= a.size(); ++k) {
        P += a[k - 1];
        double cand = (P - s) / double(k + 1);
        double lo = (k < a.size()) ? a[k] : 0.0;
        if (cand >= lo && cand <= a[k - 1]) {
            lam = cand;
            break;
        }
    }
    if (lam < 0.0) {
        // everything thresholded
        std::fill(v.begin(), v.end(), cdouble(0.0, 0.0));
        s = std::max(s, 0.0);
        return;
    }
    for (auto& c : v) {
        double m = std::abs(c);
        c = (m > lam) ? c * ((m - lam) / m) : cdouble(0.0, 0.0);
    }
    s += lam;
}

inline void project_epi(AtomKind k, cvec& v, double& s) {
    switch (k) {
        case AtomKind::L1: project_epi_l1(v, s); return;
        case AtomKind::L2: project_epi_l2(v, s); return;
        case AtomKind::Linf: project_epi_linf(v, s); return;
    }
}

/// Projection onto the dual-norm ball of the atom, radius r.  Used by the
/// single-norm fast path (no epigraph scalar needed there).
inline void project_dual_ball(AtomKind k, cvec& v, double r) {
    switch (k) {
        case AtomKind::L1: // dual ball: max_i |v_i| <= r
            for (auto& c : v) {
                double m = std::abs(c);
                if (m > r) c *= r / m;
            }
            return;
        case AtomKind::L2: {
            double n = atom_eval(AtomKind::L2, v);
            if (n > r) {
                double f = r / n;
                for (auto& c : v) c *= f;
            }
            return;
        }
        case AtomKind::Linf: { // dual ball: sum_i |v_i| <= r
            double tot = atom_eval(AtomKind::L1, v);
            if (tot <= r) return;
            std::vector<double> a(v.size());
            for (std::size_t i = 0; i < v.size(); ++i) a[i] = std::abs(v[i]);
            std::sort(a.begin(), a.end(), std::greater<double>());
            double P = 0.0, lam = 0.0;
            for (std::size_t kk = 1; kk <= a.size(); ++kk) {
                P += a[kk - 1];
                double cand = (P - r) / double(kk);
                double lo = (kk < a.size()) ? a[kk] : 0.0;
                if (cand >= lo && cand <= a[kk - 1]) {
                    lam = cand;
                    break;
                }
            }
            for (auto& c : v) {
                double m = std::abs(c);
                c = (m > lam) ? c * ((m - lam) / m) : cdouble(0.0, 0.0);
            }
            return;
        }
    }
}

// ---------------------------------------------------------------------------
// Problem description
// ---------------------------------------------------------------------------

struct Member {
    LinOpPtr op;
    AtomKind kind;
    // Epigraph rows are cones, so each row (op(g), s_t) can be rescaled by
    // 1/||op|| without changing the constraint; this balances the stacked
    // operator and keeps the step sizes usable.
    double row_scale = 1.0;
};

/// Tight operator-norm estimate by power iteration (deterministic seed).
inline double member_op_norm(const LinOp& op, int iters = 25) {
    std::mt19937_64 rng(987654321ULL + op.in_size());
    std::normal_distribution<double> g;
    cvec z(op.in_size()), w, back;
    for (auto& c : z) c = cdouble(g(rng), g(rng));
    double lam = 1.0;
    for (int it = 0; it < iters; ++it) {
        op.apply(z, w);
        op.adjoint(w, back);
        double n = 0.0;
        for (const auto& c : back) n += std::norm(c);
        n = std::sqrt(n);
        if (n == 0.0) return 0.0;
        lam = n;
        double inv = 1.0 / n;
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = back[i] * inv;
    }
    return std::sqrt(lam);
}

inline void set_row_scales(std::vector<Member>& members) {
    for (auto& m : members) {
        double b = member_op_norm(*m.op);
        if (!(b > 0.0) || !std::isfinite(b)) b = m.op->norm_bound();
        m.row_scale = (b > 0.0 && std::isfinite(b)) ? 1.0 / b : 1.0;
    }
}

struct MaxGroup {
    double weight = 1.0;
    double sign = 1.0;  // group field = sign * u + offset
    cvec offset;        // empty = zero
    std::vector<Member> members;
};

struct Problem {
    std::size_t xsize = 0;
    LinOpPtr varmap;   // x -> field u; null = identity
    cvec u_offset;     // empty = zero
    std::vector<MaxGroup> groups;

    std::size_t field_size() const {
        return varmap ? varmap->out_size() : xsize;
    }
    void field_of(const cvec& x, cvec& u) const {
        if (varmap)
            varmap->apply(x, u);
        else
            u = x;
        if (!u_offset.empty())
            for (std::size_t i = 0; i < u.size(); ++i) u[i] += u_offset[i];
    }
};

inline void group_field(const Problem& pb, std::size_t t, const cvec& u, cvec& g) {
    const MaxGroup& gr = pb.groups[t];
    g.resize(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) g[i] = gr.sign * u[i];
    if (!gr.offset.empty())
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gr.offset[i];
}

/// Objective at x, evaluated exactly from the definition.
inline double primal_value(const Problem& pb, const cvec& x) {
    cvec u, g, w;
    pb.field_of(x, u);
    double total = 0.0;
    for (std::size_t t = 0; t < pb.groups.size(); ++t) {
        group_field(pb, t, u, g);
        double mx = 0.0;
        for (const auto& m : pb.groups[t].members) {
            m.op->apply(g, w);
            mx = std::max(mx, atom_eval(m.kind, w));
        }
        total += pb.groups[t].weight * mx;
    }
    return total;
}

// ---------------------------------------------------------------------------
// PDHG engine
// ---------------------------------------------------------------------------

struct PdhgOptions {
    double tol = 1e-6;         // relative duality-gap target
    int max_iters = 50000;
    int check_every = 50;
    double step_safety = 0.9;  // sigma = tau = step_safety / L
    double op_norm = 0.0;      // reuse a cached operator-norm estimate if > 0
};

struct EngineState {
    cvec x;
    std::vector<double> s;                   // one epigraph scalar per group
    std::vector<std::vector<cvec>> y;        // duals per group/member
    std::vector<std::vector<double>> ys;
    cvec u;                                  // field of current x (refreshed at checks)
};

namespace engine_detail {
inline void zero_like(const EngineState& st, std::vector<std::vector<cvec>>& acc,
                      std::vector<std::vector<double>>& accs) {
    acc.resize(st.y.size());
    accs.resize(st.ys.size());
    for (std::size_t t = 0; t < st.y.size(); ++t) {
        acc[t].resize(st.y[t].size());
        accs[t].assign(st.ys[t].size(), 0.0);
        for (std::size_t j = 0; j < st.y[t].size(); ++j)
            acc[t][j].assign(st.y[t][j].size(), cdouble(0.0, 0.0));
    }
}
} // namespace engine_detail

/// Dual variable of the unscaled epigraph constraint for member (t, j); the
/// certificates consume these.
inline cvec scaled_member_dual(const Problem& pb, const EngineState& st, std::size_t t,
                               std::size_t j) {
    cvec eta = st.y[t][j];
    const double c = pb.groups[t].members[j].row_scale;
    for (auto& v : eta) v *= c;
    return eta;
}

struct EngineResult {
    cvec x_best;
    double primal = 0.0;
    double dual = 0.0;
    double gap_rel = 1.0;
    int iters = 0;
    bool converged = false;
    double op_norm = 0.0;
};

/// Caller-provided certificate: maps the current state to a valid lower
/// bound on the optimum (or -inf when no certificate is available).
using DualFn = std::function<double(const Problem&, const EngineState&)>;

inline double estimate_op_norm(const Problem& pb, std::uint64_t seed = 12345) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    cvec x(pb.xsize);
    std::vector<double> s(pb.groups.size());
    for (auto& c : x) c = cdouble(gauss(rng), gauss(rng));
    for (auto& v : s) v = gauss(rng);
    cvec u, g, w, uacc, xacc, gacc;
    double lam = 1.0;
    for (int it = 0; it < 40; ++it) {
        // z <- K^T K z
        if (pb.varmap)
            pb.varmap->apply(x, u);
        else
            u = x;
        uacc.assign(pb.field_size(), cdouble(0.0, 0.0));
        std::vector<double> snew(s.size(), 0.0);
        for (std::size_t t = 0; t < pb.groups.size(); ++t) {
            const auto& gr = pb.groups[t];
            gacc.assign(u.size(), cdouble(0.0, 0.0));
            cvec gin(u.size());
            for (std::size_t i = 0; i < u.size(); ++i) gin[i] = gr.sign * u[i];
            const bool ball_mode = gr.members.size() == 1;
            for (const auto& m : gr.members) {
                const double c2 = m.row_scale * m.row_scale;
                m.op->apply(gin, w);
                cvec back;
                m.op->adjoint(w, back);
                for (std::size_t i = 0; i < back.size(); ++i) gacc[i] += c2 * back[i];
                if (!ball_mode) snew[t] += c2 * s[t];
            }
            for (std::size_t i = 0; i < uacc.size(); ++i) uacc[i] += gr.sign * gacc[i];
        }
        if (pb.varmap)
            pb.varmap->adjoint(uacc, xacc);
        else
            xacc = uacc;
        double nrm = 0.0;
        for (const auto& c : xacc) nrm += std::norm(c);
        for (double v : snew) nrm += v * v;
        nrm = std::sqrt(nrm);
        if (nrm == 0.0) return 1.0;
        lam = nrm;
        double inv = 1.0 / nrm;
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = xacc[i] * inv;
        for (std::size_t i = 0; i < s.size(); ++i) s[i] = snew[i] * inv;
    }
    return std::sqrt(lam);
}

inline EngineResult run_pdhg(const Problem& pb, cvec x0, const PdhgOptions& opts,
                             const DualFn& dual_fn) {
    const std::size_t ng = pb.groups.size();
    EngineState st;
    st.x = std::move(x0);
    if (st.x.empty()) st.x.assign(pb.xsize, cdouble(0.0, 0.0));
    st.s.assign(ng, 0.0);
    st.y.resize(ng);
    st.ys.resize(ng);
    for (std::size_t t = 0; t < ng; ++t) {
        st.y[t].resize(pb.groups[t].members.size());
        st.ys[t].assign(pb.groups[t].members.size(), 0.0);
        for (std::size_t j = 0; j < pb.groups[t].members.size(); ++j)
            st.y[t][j].assign(pb.groups[t].members[j].op->out_size(), cdouble(0.0, 0.0));
    }
    // initialize epigraph scalars at the actual member maxima
    {
        cvec u, g, w;
        pb.field_of(st.x, u);
        for (std::size_t t = 0; t < ng; ++t) {
            group_field(pb, t, u, g);
            double mx = 0.0;
            for (const auto& m : pb.groups[t].members) {
                m.op->apply(g, w);
                mx = std::max(mx, atom_eval(m.kind, w));
            }
            st.s[t] = mx;
        }
    }

    EngineResult res;
    res.op_norm = opts.op_norm > 0.0 ? opts.op_norm : estimate_op_norm(pb);
    const double step = opts.step_safety / res.op_norm;
    const double sigma = step, tau = step;

    res.x_best = st.x;
    res.primal = primal_value(pb, st.x);
    res.dual = -std::numeric_limits<double>::infinity();

    cvec xbar = st.x;
    std::vector<double> sbar = st.s;
    cvec u, g, w, zv, uacc, gacc, xgrad, back;
    std::vector<double> sgrad(ng, 0.0);
    std::vector<std::vector<cvec>> yacc;
    std::vector<std::vector<double>> ysacc;
    engine_detail::zero_like(st, yacc, ysacc);
    long acc_count = 0;

    for (int it = 1; it <= opts.max_iters; ++it) {
        // dual ascent on every epigraph block
        if (pb.varmap)
            pb.varmap->apply(xbar, u);
        else
            u = xbar;
        if (!pb.u_offset.empty())
            for (std::size_t i = 0; i < u.size(); ++i) u[i] += pb.u_offset[i];
        uacc.assign(u.size(), cdouble(0.0, 0.0));
        std::fill(sgrad.begin(), sgrad.end(), 0.0);
        for (std::size_t t = 0; t < ng; ++t) {
            const auto& gr = pb.groups[t];
            group_field(pb, t, u, g);
            gacc.assign(u.size(), cdouble(0.0, 0.0));
            const bool ball_mode = gr.members.size() == 1;
            for (std::size_t j = 0; j < gr.members.size(); ++j) {
                const auto& m = gr.members[j];
                const double c = m.row_scale;
                m.op->apply(g, w);
                cvec& yv = st.y[t][j];
                double& ysv = st.ys[t][j];
                if (ball_mode) {
                    // y <- Pi_{(weight/c) dual-ball}(y + sigma c op(gbar))
                    yv.resize(w.size());
                    for (std::size_t i = 0; i < w.size(); ++i) yv[i] += sigma * c * w[i];
                    project_dual_ball(m.kind, yv, gr.weight / c);
                } else {
                    // z = y + sigma * K zbar ; y = z - sigma * proj_epi(z / sigma)
                    zv.resize(w.size());
                    for (std::size_t i = 0; i < w.size(); ++i)
                        zv[i] = (yv[i] + sigma * c * w[i]) / sigma;
                    double zs = (ysv + sigma * c * sbar[t]) / sigma;
                    cvec pv = zv;
                    double ps = zs;
                    project_epi(m.kind, pv, ps);
                    yv.resize(w.size());
                    for (std::size_t i = 0; i < w.size(); ++i)
                        yv[i] = sigma * (zv[i] - pv[i]);
                    ysv = sigma * (zs - ps);
                    sgrad[t] += c * ysv;
                }
                m.op->adjoint(yv, back);
                for (std::size_t i = 0; i < back.size(); ++i) gacc[i] += c * back[i];
            }
            for (std::size_t i = 0; i < uacc.size(); ++i) uacc[i] += gr.sign * gacc[i];
        }
        if (pb.varmap)
            pb.varmap->adjoint(uacc, xgrad);
        else
            xgrad = uacc;

        // primal descent with extrapolation
        for (std::size_t i = 0; i < st.x.size(); ++i) {
            cdouble xn = st.x[i] - tau * xgrad[i];
            xbar[i] = 2.0 * xn - st.x[i];
            st.x[i] = xn;
        }
        for (std::size_t t = 0; t < ng; ++t) {
            if (pb.groups[t].members.size() == 1) continue; // no epigraph scalar
            double sn = std::max(0.0, st.s[t] - tau * (pb.groups[t].weight + sgrad[t]));
            sbar[t] = 2.0 * sn - st.s[t];
            st.s[t] = sn;
        }

        // ergodic dual averages close the gap along O(1/k) even when the
        // last iterates wander around the saddle
        for (std::size_t t = 0; t < ng; ++t)
            for (std::size_t j = 0; j < st.y[t].size(); ++j) {
                const cvec& yv = st.y[t][j];
                cvec& av = yacc[t][j];
                for (std::size_t i = 0; i < yv.size(); ++i) av[i] += yv[i];
                ysacc[t][j] += st.ys[t][j];
            }
        ++acc_count;

        if (it % opts.check_every == 0 || it == opts.max_iters) {
            double p = primal_value(pb, st.x);
            if (p < res.primal) {
                res.primal = p;
                res.x_best = st.x;
            }
            pb.field_of(st.x, st.u);
            double dv = dual_fn ? dual_fn(pb, st) : -std::numeric_limits<double>::infinity();
            if (dual_fn && acc_count > 0) {
                EngineState avg;
                avg.x = st.x;
                avg.s = st.s;
                avg.u = st.u;
                avg.y = yacc;
                avg.ys = ysacc;
                const double inv = 1.0 / double(acc_count);
                for (auto& grp : avg.y)
                    for (auto& yv : grp)
                        for (auto& c : yv) c *= inv;
                for (auto& grp : avg.ys)
                    for (auto& v : grp) v *= inv;
                dv = std::max(dv, dual_fn(pb, avg));
            }
            if (dv > res.dual) res.dual = dv;
            res.iters = it;
            double denom = std::max({1e-300, std::abs(res.primal), std::abs(res.dual)});
            res.gap_rel = (res.primal - res.dual) / std::max(denom, 1e-30);
            if (std::isfinite(res.dual) && res.gap_rel < opts.tol) {
                res.converged = true;
                break;
            }
        }
    }
    if (!std::isfinite(res.dual)) res.dual = 0.0;
    return res;
}

// ---------------------------------------------------------------------------
// SpaceNorm compilation
// ---------------------------------------------------------------------------

/**
 * A SpaceNorm lowered to epigraph members plus the machinery the duality
 * certificates need: given a target w and candidate member duals, produce an
 * exact decomposition w = sum_j op_j^*(eta_j) and the bound
 * sum_j dual(eta_j) on the dual norm.
 */
struct CompiledNorm {
    std::vector<Member> members;
    // distributes a field-space residual onto designated members
    std::function<bool(const cvec& r, std::vector<cvec>& add)> lift;

    double dual_upper(const cvec& w, const std::vector<cvec>& member_duals) const {
        cvec acc(w.size(), cdouble(0.0, 0.0));
        cvec back;
        for (std::size_t j = 0; j < members.size(); ++j) {
            members[j].op->adjoint(member_duals[j], back);
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += back[i];
        }
        cvec r(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) r[i] = w[i] - acc[i];
        std::vector<cvec> add(members.size());
        if (!lift || !lift(r, add)) return std::numeric_limits<double>::infinity();
        double rho = 0.0;
        cvec eta;
        for (std::size_t j = 0; j < members.size(); ++j) {
            eta = member_duals[j];
            if (!add[j].empty())
                for (std::size_t i = 0; i < eta.size(); ++i) eta[i] += add[j][i];
            rho += atom_dual(members[j].kind, eta);
        }
        return rho;
    }
};

namespace compile_detail {

inline std::vector<double> sobolev_weights(int d, int N, double s) {
    auto mt = mode_table(d, N);
    std::vector<double> w(mt->ncoef);
    for (std::size_t i = 0; i < mt->ncoef; ++i)
        w[i] = std::pow(1.0 + mt->mode_sq(i), 0.5 * s);
    return w;
}

inline std::vector<double> besov2_weights(int d, int N, double sigma) {
    const auto& psi = lp_weights(d, N);
    auto mt = mode_table(d, N);
    std::vector<double> w(mt->ncoef, 0.0);
    for (std::size_t k = 0; k < psi.size(); ++k) {
        double f = std::pow(4.0, sigma * double(k));
        for (std::size_t i = 0; i < w.size(); ++i)
            w[i] += f * psi[k][i] * psi[k][i];
    }
    for (auto& v : w) v = std::sqrt(v);
    return w;
}

/// Scalar-field member for one supported tag; throws on unsupported tags.
inline void scalar_members(const SpaceNorm& sn, int d, int N, int oversample,
                           std::vector<Member>& out) {
    using Tag = SpaceNorm::Tag;
    switch (sn.tag) {
        case Tag::Lp: {
            double p = sn.p;
            const std::size_t M = std::size_t((2 * N + 1) * oversample);
            std::size_t ngrid = 1;
            for (int j = 0; j < d; ++j) ngrid *= M;
            if (std::isinf(p)) {
                out.push_back({std::make_shared<GridEvalOp>(d, N, oversample, 1.0),
                               AtomKind::Linf});
            } else if (p == 1.0) {
                out.push_back({std::make_shared<GridEvalOp>(d, N, oversample,
                                                            1.0 / double(ngrid)),
                               AtomKind::L1});
            } else if (p == 2.0) {
                out.push_back({std::make_shared<GridEvalOp>(
                                   d, N, oversample, 1.0 / std::sqrt(double(ngrid))),
                               AtomKind::L2});
            } else {
                throw std::invalid_argument(
                    "solver: L^p norms support p in {1, 2, inf} only (no closed-form prox "
                    "otherwise); requested p = " +
                    std::to_string(p));
            }
            return;
        }
        case Tag::Hs:
            out.push_back({std::make_shared<DiagOp>(sobolev_weights(d, N, sn.s)),
                           AtomKind::L2});
            return;
        case Tag::BesovLP:
            if (sn.q == 2.0) {
                out.push_back({std::make_shared<DiagOp>(besov2_weights(d, N, sn.s)),
                               AtomKind::L2});
                return;
            }
            throw std::invalid_argument(
                "solver: Besov norms support q = 2 only (diagonal representation)");
        case Tag::MaxOf:
            for (const auto& c : sn.children) scalar_members(c, d, N, oversample, out);
            return;
        case Tag::S1Linf:
            throw std::invalid_argument(
                "solver: S1Linf has no closed-form prox; use it in static norms only");
        case Tag::InterpKq:
            throw std::invalid_argument("solver: InterpKq cannot appear inside a couple");
    }
}

} // namespace compile_detail

/**
 * Lowers a SpaceNorm over the given field shape into epigraph members.
 * Vector fields expand into per-component members (the max-over-components
 * convention).  When grad_potential is set the variable is a scalar
 * potential and every member is pre-composed with the gradient map.
 */
inline CompiledNorm compile_norm(const SpaceNorm& sn, const FieldShape& shape,
                                 int oversample, bool grad_potential = false) {
    CompiledNorm cn;
    std::vector<Member> scalar;
    compile_detail::scalar_members(sn, shape.d, shape.N, oversample, scalar);

    const std::size_t block = shape.coef_count();
    const int ncomp = grad_potential ? shape.d : shape.ncomp;
    std::vector<std::vector<std::size_t>> comp_members(static_cast<std::size_t>(ncomp));

    LinOpPtr grad = grad_potential ? std::make_shared<GradOp>(shape.d, shape.N) : nullptr;

    if (ncomp == 1 && !grad_potential) {
        cn.members = scalar;
        comp_members[0].resize(scalar.size());
        std::iota(comp_members[0].begin(), comp_members[0].end(), 0);
    } else {
        for (int c = 0; c < ncomp; ++c) {
            for (const auto& m : scalar) {
                LinOpPtr chain = std::make_shared<SelectOp>(std::size_t(ncomp),
                                                            std::size_t(c), block);
                if (grad) chain = std::make_shared<CompOp>(chain, grad);
                chain = std::make_shared<CompOp>(m.op, chain);
                comp_members[std::size_t(c)].push_back(cn.members.size());
                cn.members.push_back({chain, m.kind});
            }
        }
    }

    // Residual absorption: push the component residual through the first
    // member of each component (its op chain supports exact lifting).
    auto members_copy = cn.members;
    auto scalar_ops = scalar;
    cn.lift = [shape, ncomp, block, grad, members_copy, comp_members, scalar_ops](
                  const cvec& r, std::vector<cvec>& add) -> bool {
        add.assign(members_copy.size(), cvec());
        cvec rfield = r;
        if (grad) {
            // map potential-space residual to a vector-field target
            auto mt = mode_table(shape.d, shape.N);
            cvec phi(block, cdouble(0.0, 0.0));
            for (std::size_t i = 0; i < block; ++i) {
                double n2 = mt->mode_sq(i);
                if (n2 == 0.0) {
                    if (std::abs(r[i]) > 1e-11) return false;
                } else {
                    phi[i] = r[i] / n2;
                }
            }
            GradOp g(shape.d, shape.N);
            g.apply(phi, rfield);
        }
        if (ncomp == 1 && !grad) {
            std::size_t j = comp_members[0][0];
            cvec eta;
            if (!members_copy[j].op->lift(rfield, eta)) return false;
            add[j] = std::move(eta);
            return true;
        }
        for (int c = 0; c < ncomp; ++c) {
            cvec rc(rfield.begin() + std::size_t(c) * block,
                    rfield.begin() + std::size_t(c + 1) * block);
            // lift through the component's first scalar member op
            cvec eta;
            if (!scalar_ops[0].op->lift(rc, eta)) return false;
            add[comp_members[std::size_t(c)][0]] = std::move(eta);
        }
        return true;
    };
    set_row_scales(cn.members);
    return cn;
}

} // namespace bblab
