#pragma once

#include <map>
#include <optional>

#include "bblab/convex.hpp"

// K- and J-functionals as convex programs, discrete (theta,q) real
// interpolation norms, near-optimal J-decompositions, and the
// gradient-subcouple K-closedness ratio.

namespace bblab {

struct Couple {
    SpaceNorm a0, a1;
};

template <class FieldT>
struct SplitResult {
    FieldT f0, f1;
    double value = 0.0;
    double gap = 1.0;   // relative duality gap certified at return
    int iters = 0;
    bool converged = false;
    double op_norm = 0.0; // reusable stacked-operator norm estimate
};

/// J(t, a) = max(||a||_{a0}, t ||a||_{a1}).
template <class FieldT>
double j_functional(const FieldT& a, const Couple& c, double t, int oversample = 4) {
    if (!(t > 0.0)) throw std::invalid_argument("j_functional: t > 0 required");
    return std::max(norm(a, c.a0, oversample), t * norm(a, c.a1, oversample));
}

struct KOptions {
    double tol = 1e-6;
    int max_iters = 50000;
    int oversample = 4;
    double op_norm = 0.0; // reuse across t-values (same couple and shape)
    const cvec* warm = nullptr;
};

namespace interp_detail {

struct KProblem {
    Problem pb;
    CompiledNorm A0, A1;
    cvec fflat;
    double t;
};

inline KProblem build_k_problem(const cvec& fflat, const FieldShape& shape, const Couple& c,
                                double t, int oversample, bool grad_potential) {
    KProblem kp;
    kp.fflat = fflat;
    kp.t = t;
    kp.A0 = compile_norm(c.a0, shape, oversample, grad_potential);
    kp.A1 = compile_norm(c.a1, shape, oversample, grad_potential);
    kp.pb.xsize = fflat.size();
    MaxGroup g0;
    g0.weight = 1.0;
    g0.sign = 1.0;
    g0.members = kp.A0.members;
    MaxGroup g1;
    g1.weight = t;
    g1.sign = -1.0;
    g1.offset = fflat;
    g1.members = kp.A1.members;
    kp.pb.groups = {std::move(g0), std::move(g1)};
    return kp;
}

inline double k_dual_value(const KProblem& kp, const Problem& pb, const EngineState& st) {
    // candidate for sup { <y, f> : ||y||_{a0*} <= 1, ||y||_{a1*} <= t }
    std::vector<cvec> eta0(pb.groups[0].members.size());
    std::vector<cvec> eta1(pb.groups[1].members.size());
    for (std::size_t j = 0; j < eta0.size(); ++j) eta0[j] = scaled_member_dual(pb, st, 0, j);
    for (std::size_t j = 0; j < eta1.size(); ++j) eta1[j] = scaled_member_dual(pb, st, 1, j);
    cvec y_cand(kp.fflat.size(), cdouble(0.0, 0.0));
    cvec back;
    for (std::size_t j = 0; j < eta0.size(); ++j) {
        pb.groups[0].members[j].op->adjoint(eta0[j], back);
        for (std::size_t i = 0; i < y_cand.size(); ++i) y_cand[i] += back[i];
    }
    double rho0 = kp.A0.dual_upper(y_cand, eta0);
    double rho1 = kp.A1.dual_upper(y_cand, eta1);
    double denom = std::max(rho0, rho1 / kp.t);
    if (!(denom > 0.0) || !std::isfinite(denom))
        return -std::numeric_limits<double>::infinity();
    double pairing = 0.0;
    for (std::size_t i = 0; i < y_cand.size(); ++i)
        pairing += std::real(std::conj(y_cand[i]) * kp.fflat[i]);
    return pairing / denom;
}

/// Shared solve path on flat data; used by the field-level wrappers and the
/// potential-parametrized (gradient-constrained) variant.
inline EngineResult k_solve_flat(const cvec& fflat, const FieldShape& shape, const Couple& c,
                                 double t, const KOptions& opts, bool grad_potential,
                                 double* op_norm_out) {
    KProblem kp = build_k_problem(fflat, shape, c, t, opts.oversample, grad_potential);
    // warm start at the better endpoint split unless the caller supplies one
    cvec x0;
    if (opts.warm && opts.warm->size() == fflat.size()) {
        x0 = *opts.warm;
    } else {
        double e0 = primal_value(kp.pb, fflat);           // f0 = f
        double e1 = primal_value(kp.pb, cvec(fflat.size())); // f0 = 0
        x0 = (e0 <= e1) ? fflat : cvec(fflat.size(), cdouble(0.0, 0.0));
    }
    PdhgOptions popts;
    popts.tol = opts.tol;
    popts.max_iters = opts.max_iters;
    popts.op_norm = opts.op_norm;
    EngineResult res = run_pdhg(kp.pb, std::move(x0), popts,
                                [&kp](const Problem& pb, const EngineState& st) {
                                    return k_dual_value(kp, pb, st);
                                });
    if (op_norm_out) *op_norm_out = res.op_norm;
    return res;
}

} // namespace interp_detail

/**
 * Peetre K-functional K_t(f) = inf_{f = f0 + f1} ||f0||_{a0} + t ||f1||_{a1},
 * solved as a convex program with a certified duality gap.  The value is the
 * contract; the returned split is one minimizer among possibly many.
 */
template <class FieldT>
SplitResult<FieldT> k_functional(const FieldT& f, const Couple& c, double t,
                                 const KOptions& opts = {}) {
    if (!(t > 0.0)) throw std::invalid_argument("k_functional: t > 0 required");
    using Tr = FieldTraits<FieldT>;
    cvec fflat = Tr::flatten(f);
    double op_norm = 0.0;
    EngineResult res = interp_detail::k_solve_flat(fflat, Tr::shape(f), c, t, opts,
                                                   /*grad_potential=*/false, &op_norm);
    SplitResult<FieldT> out;
    out.f0 = Tr::unflatten(res.x_best, f);
    cvec rest(fflat.size());
    for (std::size_t i = 0; i < fflat.size(); ++i) rest[i] = fflat[i] - res.x_best[i];
    out.f1 = Tr::unflatten(rest, f);
    out.value = res.primal;
    out.gap = res.gap_rel;
    out.iters = res.iters;
    out.converged = res.converged;
    out.op_norm = op_norm;
    return out;
}

/// Discrete (theta, q) interpolation norm over the dyadic grid |nu| <= M.
template <class FieldT>
double interp_norm(const FieldT& a, const Couple& c, double theta, double q, int M,
                   KOptions opts = {}) {
    if (!(theta > 0.0 && theta < 1.0))
        throw std::invalid_argument("interp_norm: theta in (0,1)");
    if (!(q >= 1.0) || std::isinf(q))
        throw std::invalid_argument("interp_norm: q in [1, inf)");
    if (M < 1) throw std::invalid_argument("interp_norm: M >= 1");
    using Tr = FieldTraits<FieldT>;
    cvec fflat = Tr::flatten(a);
    double acc = 0.0;
    cvec warm;
    for (int nu = -M; nu <= M; ++nu) {
        double t = std::ldexp(1.0, nu);
        KOptions ko = opts;
        if (!warm.empty()) ko.warm = &warm;
        double op_norm = 0.0;
        EngineResult res = interp_detail::k_solve_flat(fflat, Tr::shape(a), c, t, ko,
                                                       false, &op_norm);
        opts.op_norm = op_norm;
        warm = res.x_best;
        double term = std::pow(2.0, -double(nu) * theta) * res.primal;
        acc += std::pow(term, q);
    }
    return std::pow(acc, 1.0 / q);
}

template <class FieldT>
struct JDecomposition {
    std::map<int, FieldT> blocks;
    double j_sum = 0.0;        // (sum_nu (2^{-nu theta} J(2^nu, a^nu))^q)^{1/q}
    double interp_value = 0.0; // interpolation norm from the same K solves
    double c_j = 0.0;          // j_sum / interp_value
    double residual = 0.0;     // reconstruction residual, coefficient sup norm
};

/**
 * Near-optimal J-method decomposition a = sum_nu a^nu built from K-functional
 * splits: a^nu = f1(2^nu) - f1(2^{nu+1}) with the endpoint parts absorbed
 * into the extreme blocks.  Reconstruction is exact by construction up to
 * solver arithmetic.
 */
template <class FieldT>
JDecomposition<FieldT> j_decomposition(const FieldT& a, const Couple& c, double theta,
                                       double q, int M, KOptions opts = {}) {
    if (!(theta > 0.0 && theta < 1.0))
        throw std::invalid_argument("j_decomposition: theta in (0,1)");
    using Tr = FieldTraits<FieldT>;
    cvec fflat = Tr::flatten(a);
    const FieldShape shape = Tr::shape(a);

    std::map<int, cvec> f1_at; // nu -> optimal f1(2^nu) flat
    double acc = 0.0;
    cvec warm;
    for (int nu = -M; nu <= M + 1; ++nu) {
        double t = std::ldexp(1.0, nu);
        KOptions ko = opts;
        if (!warm.empty()) ko.warm = &warm;
        double op_norm = 0.0;
        EngineResult res =
            interp_detail::k_solve_flat(fflat, shape, c, t, ko, false, &op_norm);
        opts.op_norm = op_norm;
        warm = res.x_best;
        cvec f1(fflat.size());
        for (std::size_t i = 0; i < fflat.size(); ++i) f1[i] = fflat[i] - res.x_best[i];
        f1_at[nu] = std::move(f1);
        if (nu <= M) {
            double term = std::pow(2.0, -double(nu) * theta) * res.primal;
            acc += std::pow(term, q);
        }
    }

    JDecomposition<FieldT> out;
    out.interp_value = std::pow(acc, 1.0 / q);

    std::map<int, cvec> blocks_flat;
    for (int nu = -M; nu <= M; ++nu) {
        cvec blk(fflat.size());
        const cvec& cur = f1_at[nu];
        const cvec& nxt = f1_at[nu + 1];
        for (std::size_t i = 0; i < fflat.size(); ++i) blk[i] = cur[i] - nxt[i];
        blocks_flat[nu] = std::move(blk);
    }
    // absorb the endpoints: f0(2^{-M}) into the lowest block, f1(2^{M+1})
    // into the highest
    for (std::size_t i = 0; i < fflat.size(); ++i) {
        blocks_flat[-M][i] += fflat[i] - f1_at[-M][i];
        blocks_flat[M][i] += f1_at[M + 1][i];
    }

    cvec recon(fflat.size(), cdouble(0.0, 0.0));
    double jq = 0.0;
    for (auto& [nu, blk] : blocks_flat) {
        for (std::size_t i = 0; i < fflat.size(); ++i) recon[i] += blk[i];
        FieldT bf = Tr::unflatten(blk, a);
        double jv = j_functional(bf, c, std::ldexp(1.0, nu), opts.oversample);
        jq += std::pow(std::pow(2.0, -double(nu) * theta) * jv, q);
        out.blocks.emplace(nu, std::move(bf));
    }
    out.j_sum = std::pow(jq, 1.0 / q);
    out.c_j = out.interp_value > 0.0 ? out.j_sum / out.interp_value : 0.0;
    double resid = 0.0;
    for (std::size_t i = 0; i < fflat.size(); ++i)
        resid = std::max(resid, std::abs(recon[i] - fflat[i]));
    out.residual = resid;
    return out;
}

// ---------------------------------------------------------------------------
// Gradient-subcouple K-closedness
// ---------------------------------------------------------------------------

/// Potential of a gradient field; throws when f is not a gradient.
inline TorusField potential_of(const VectorField& f, double tol = 1e-8) {
    auto mt = mode_table(f.dim(), f.bandlimit());
    TorusField p(f.dim(), f.bandlimit(), f.realflag());
    for (std::size_t i = 0; i < mt->ncoef; ++i) {
        double n2 = mt->mode_sq(i);
        if (n2 == 0.0) continue;
        cdouble acc(0.0, 0.0);
        for (int j = 0; j < f.dim(); ++j)
            acc += cdouble(0.0, -double(mt->modes[i][std::size_t(j)])) *
                   f.comps[std::size_t(j)].coeffs[i];
        p.coeffs[i] = acc / n2;
    }
    VectorField g = gradient(p);
    double err = 0.0, scale = std::max(coeff_max_abs(f), 1e-300);
    for (int j = 0; j < f.dim(); ++j)
        for (std::size_t i = 0; i < mt->ncoef; ++i)
            err = std::max(err,
                           std::abs(g.comps[std::size_t(j)].coeffs[i] -
                                    f.comps[std::size_t(j)].coeffs[i]));
    for (int j = 0; j < f.dim(); ++j) {
        std::vector<int> zero(std::size_t(f.dim()), 0);
        err = std::max(err, std::abs(f.comps[std::size_t(j)].at(zero)));
    }
    if (err > tol * scale)
        throw std::invalid_argument("potential_of: field is not a mean-zero gradient");
    return p;
}

struct KRatioResult {
    double t = 1.0;
    double k_plain = 0.0;
    double k_grad = 0.0;
    double ratio = 1.0;
    double gap_plain = 0.0, gap_grad = 0.0;
    int iters_plain = 0, iters_grad = 0;
};

/**
 * Ratio K_t(f; G(Y0), G(Y1)) / K_t(f; Y0, Y1) for a gradient field f.  The
 * constrained K restricts both split parts to gradients, parametrized by
 * potentials (which fixes the gauge).
 */
inline KRatioResult k_closedness_ratio(const VectorField& f, double t,
                                       const Couple& c = {SpaceNorm::lp(1.0),
                                                          SpaceNorm::hs(-1.0)},
                                       const KOptions& opts = {}) {
    KRatioResult out;
    out.t = t;
    auto plain = k_functional(f, c, t, opts);
    out.k_plain = plain.value;
    out.gap_plain = plain.gap;
    out.iters_plain = plain.iters;

    TorusField p = potential_of(f);
    cvec pflat = FieldTraits<TorusField>::flatten(p);
    FieldShape shape{f.dim(), f.bandlimit(), 1};
    double op_norm = 0.0;
    EngineResult res = interp_detail::k_solve_flat(pflat, shape, c, t, opts,
                                                   /*grad_potential=*/true, &op_norm);
    out.k_grad = res.primal;
    out.gap_grad = res.gap_rel;
    out.iters_grad = res.iters;
    out.ratio = out.k_plain > 0.0 ? out.k_grad / out.k_plain : 1.0;
    return out;
}

/// Norm dispatch that also understands InterpKq descriptors.
template <class FieldT>
double eval_norm(const FieldT& f, const SpaceNorm& sn, int oversample = 4,
                 const KOptions& opts = {}) {
    if (sn.tag == SpaceNorm::Tag::InterpKq) {
        Couple c{sn.children[0], sn.children[1]};
        KOptions ko = opts;
        ko.oversample = oversample;
        return interp_norm(f, c, sn.theta, sn.q, sn.dyadic_range, ko);
    }
    return norm(f, sn, oversample);
}

} // namespace bblab
