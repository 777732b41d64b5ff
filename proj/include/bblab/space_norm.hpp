#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "bblab/littlewood_paley.hpp"
#include "bblab/torus_field.hpp"

namespace bblab {

/**
 * Tagged norm descriptor.  Selects which function-space norm an operation
 * evaluates:
 *
 *   Lp(p)        quadrature norm on the oversampled grid, normalized measure
 *   Hs(s)        (sum <n>^{2s} |f^(n)|^2)^{1/2},  <n> = (1+|n|^2)^{1/2}
 *   BesovLP(s,q) (sum_k (2^{ks} ||P_k f||_{L^q})^q)^{1/q}
 *   S1Linf       || sum_k |P_k f| ||_{L^inf}
 *   MaxOf(...)   max of member norms (intersection spaces)
 *   InterpKq     discrete (theta,q) real-interpolation norm; evaluated by the
 *                interpolation module, rejected by the static evaluator here.
 *
 * Vector fields take the max over components in every norm.
 */
struct SpaceNorm {
    enum class Tag { Lp, Hs, BesovLP, S1Linf, MaxOf, InterpKq };

    Tag tag = Tag::Lp;
    double p = 2.0;       // Lp exponent (may be infinity)
    double s = 0.0;       // Hs smoothness / Besov sigma
    double q = 2.0;       // Besov or interpolation fine index
    double theta = 0.5;   // interpolation parameter
    int dyadic_range = 20;
    std::vector<SpaceNorm> children; // MaxOf members, or {a0, a1} for InterpKq

    static SpaceNorm lp(double p_) {
        if (!(p_ >= 1.0)) throw std::invalid_argument("SpaceNorm: Lp needs p >= 1");
        SpaceNorm n;
        n.tag = Tag::Lp;
        n.p = p_;
        return n;
    }
    static SpaceNorm linf() { return lp(std::numeric_limits<double>::infinity()); }
    static SpaceNorm hs(double s_) {
        SpaceNorm n;
        n.tag = Tag::Hs;
        n.s = s_;
        return n;
    }
    static SpaceNorm besov(double sigma, double q_) {
        if (!(q_ >= 1.0)) throw std::invalid_argument("SpaceNorm: Besov needs q >= 1");
        SpaceNorm n;
        n.tag = Tag::BesovLP;
        n.s = sigma;
        n.q = q_;
        return n;
    }
    static SpaceNorm s1linf() {
        SpaceNorm n;
        n.tag = Tag::S1Linf;
        return n;
    }
    static SpaceNorm max_of(std::vector<SpaceNorm> members) {
        if (members.empty()) throw std::invalid_argument("SpaceNorm: MaxOf needs members");
        SpaceNorm n;
        n.tag = Tag::MaxOf;
        n.children = std::move(members);
        return n;
    }
    static SpaceNorm interp_kq(SpaceNorm a0, SpaceNorm a1, double theta_, double q_,
                               int dyadic_range_ = 20) {
        if (!(theta_ > 0.0 && theta_ < 1.0))
            throw std::invalid_argument("SpaceNorm: theta in (0,1)");
        if (!(q_ >= 1.0)) throw std::invalid_argument("SpaceNorm: q >= 1");
        SpaceNorm n;
        n.tag = Tag::InterpKq;
        n.theta = theta_;
        n.q = q_;
        n.dyadic_range = dyadic_range_;
        n.children = {std::move(a0), std::move(a1)};
        return n;
    }

    bool is_inf_p() const { return std::isinf(p); }

    std::string describe() const {
        switch (tag) {
            case Tag::Lp:
                return is_inf_p() ? "Linf" : ("L" + std::to_string(p));
            case Tag::Hs: return "H" + std::to_string(s);
            case Tag::BesovLP:
                return "B(" + std::to_string(s) + "," + std::to_string(q) + ")";
            case Tag::S1Linf: return "S1Linf";
            case Tag::MaxOf: {
                std::string out = "MaxOf(";
                for (std::size_t i = 0; i < children.size(); ++i) {
                    if (i) out += ",";
                    out += children[i].describe();
                }
                return out + ")";
            }
            case Tag::InterpKq:
                return "InterpKq(theta=" + std::to_string(theta) + ",q=" + std::to_string(q) + ")";
        }
        return "?";
    }
};

inline double sobolev_weight(const std::vector<int>& n, double s) {
    double r2 = 1.0;
    for (int v : n) r2 += double(v) * double(v);
    return std::pow(r2, 0.5 * s);
}

namespace norm_detail {

inline double grid_lp(const cvec& values, double p) {
    if (std::isinf(p)) {
        double m = 0.0;
        for (const auto& v : values) m = std::max(m, std::abs(v));
        return m;
    }
    double acc = 0.0;
    for (const auto& v : values) acc += std::pow(std::abs(v), p);
    return std::pow(acc / double(values.size()), 1.0 / p);
}

} // namespace norm_detail

/// Static function-space norm of a scalar field.  InterpKq is rejected here;
/// the interpolation module owns it.
inline double norm(const TorusField& f, const SpaceNorm& sn, int oversample = 4) {
    using Tag = SpaceNorm::Tag;
    switch (sn.tag) {
        case Tag::Lp:
            return norm_detail::grid_lp(grid_values(f, oversample), sn.p);
        case Tag::Hs: {
            double acc = 0.0;
            const std::size_t total = f.size();
            for (std::size_t idx = 0; idx < total; ++idx) {
                auto n = f.mode_of(idx);
                double w = sobolev_weight(n, sn.s);
                acc += w * w * std::norm(f.coeffs[idx]);
            }
            return std::sqrt(acc);
        }
        case Tag::BesovLP: {
            const int K = lp_block_count(f.dim, f.bandlimit);
            double acc = 0.0, sup = 0.0;
            for (int k = 0; k < K; ++k) {
                double w = std::pow(2.0, sn.s * double(k));
                double term =
                    w * norm(lp_block(f, k), SpaceNorm::lp(sn.q), oversample);
                if (std::isinf(sn.q)) {
                    sup = std::max(sup, term);
                } else {
                    acc += std::pow(term, sn.q);
                }
            }
            return std::isinf(sn.q) ? sup : std::pow(acc, 1.0 / sn.q);
        }
        case Tag::S1Linf: {
            const int K = lp_block_count(f.dim, f.bandlimit);
            std::vector<double> stack;
            for (int k = 0; k < K; ++k) {
                cvec vals = grid_values(lp_block(f, k), oversample);
                if (stack.empty()) stack.assign(vals.size(), 0.0);
                for (std::size_t i = 0; i < vals.size(); ++i) stack[i] += std::abs(vals[i]);
            }
            double m = 0.0;
            for (double v : stack) m = std::max(m, v);
            return m;
        }
        case Tag::MaxOf: {
            double m = 0.0;
            for (const auto& c : sn.children) m = std::max(m, norm(f, c, oversample));
            return m;
        }
        case Tag::InterpKq:
            throw std::invalid_argument(
                "norm: InterpKq norms are evaluated by the interpolation module");
    }
    throw std::logic_error("norm: unreachable");
}

/// Vector-field norm: max over components.
inline double norm(const VectorField& u, const SpaceNorm& sn, int oversample = 4) {
    double m = 0.0;
    for (const auto& c : u.comps) m = std::max(m, norm(c, sn, oversample));
    return m;
}

} // namespace bblab
