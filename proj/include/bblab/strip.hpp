#pragma once

#include <map>

#include "bblab/line_function.hpp"

// Analytic-strip representation of the real interpolation method: Hilbert
// transform, boundary-trace operators, Cauchy evaluation, F^q boundary
// norms, witness construction and the boundary identity check.
//
// Conventions.  The line Fourier transform is hat g(xi) = integral g(t)
// e^{-i xi t} dt, so the Hilbert transform has multiplier -i sgn(xi).  For a
// bounded analytic function u on the strip {0 < Re z < 1} with decaying
// boundary traces u_j(t) = u(j + it), Plemelj's formula applied to the
// Cauchy integral over both edges gives
//
//     hat u_j = chi_j hat u_j + rho_j hat u_{1-j},
//     chi_j(xi) = (1 - (-1)^j sgn xi)/2,
//     rho_j(xi) = e^{-|xi|} (1 + (-1)^j sgn xi)/2,
//
// i.e. the trace on side j keeps its own frequencies of sign (-1)^{j+1} and
// imports the opposite ones from the other side, damped by e^{-|xi|}.  The
// corresponding convolution kernels are rho_kernel below; their transforms
// match the e^{-|xi|} closed form of the symbols.

namespace bblab {

/// Hilbert transform via the -i sgn(xi) multiplier on the dual grid.
template <class V>
LineFunction<V> hilbert_transform(const LineFunction<V>& g) {
    return line_multiplier(g, [](double xi) {
        if (xi > 0.0) return cdouble(0.0, -1.0);
        if (xi < 0.0) return cdouble(0.0, 1.0);
        return cdouble(0.0, 0.0);
    });
}

/// Symbol of the self-trace part of the boundary operators.
inline cdouble chi(int j, double xi) {
    if (j != 0 && j != 1) throw std::invalid_argument("chi: j must be 0 or 1");
    double sj = (j == 0) ? 1.0 : -1.0;
    double sg = (xi > 0.0) ? 1.0 : (xi < 0.0 ? -1.0 : 0.0);
    return cdouble(0.5 * (1.0 - sj * sg), 0.0);
}

/// Symbol of the cross-trace part; bounded with the e^{-|xi|} profile.
inline cdouble rho_hat(int j, double xi) {
    if (j != 0 && j != 1) throw std::invalid_argument("rho_hat: j must be 0 or 1");
    double sj = (j == 0) ? 1.0 : -1.0;
    double sg = (xi > 0.0) ? 1.0 : (xi < 0.0 ? -1.0 : 0.0);
    return cdouble(0.5 * std::exp(-std::abs(xi)) * (1.0 + sj * sg), 0.0);
}

/// Convolution kernel whose transform is rho_hat(j, .): the Cauchy kernel of
/// the opposite edge evaluated on side j.
inline cdouble rho_kernel(int j, double t) {
    if (j != 0 && j != 1) throw std::invalid_argument("rho_kernel: j must be 0 or 1");
    double sj = (j == 0) ? 1.0 : -1.0;
    return 1.0 / (2.0 * M_PI * cdouble(1.0, -sj * t));
}

template <class V>
LineFunction<V> boundary_H(int j, const LineFunction<V>& g) {
    return line_multiplier(g, [j](double xi) { return chi(j, xi); });
}

template <class V>
LineFunction<V> boundary_R(int j, const LineFunction<V>& g) {
    return line_multiplier(g, [j](double xi) { return rho_hat(j, xi); });
}

/**
 * Trapezoid quadrature of the Cauchy integral
 *
 *   u(z) = (1/2 pi) [ integral u_1(t)/(1+it-z) dt - integral u_0(t)/(it-z) dt ]
 *
 * for z in the open strip.  The kernel is smooth there and the boundary data
 * decay like Gaussians, so plain trapezoid converges spectrally.
 */
template <class V>
V cauchy_eval(const LineFunction<V>& u0, const LineFunction<V>& u1, cdouble z) {
    if (!(z.real() > 0.0 && z.real() < 1.0))
        throw std::invalid_argument("cauchy_eval: z must lie in the open strip 0<Re z<1");
    if (u0.count() == 0 || u1.count() == 0)
        throw std::invalid_argument("cauchy_eval: empty boundary data");
    using Tr = FieldTraits<V>;
    V acc = Tr::zero_like(u0.samples[0]);
    auto add_edge = [&acc, &z](const LineFunction<V>& uj, int j, double sign) {
        for (std::size_t k = 0; k < uj.count(); ++k) {
            double t = uj.t_at(k);
            double w = (k == 0 || k + 1 == uj.count()) ? 0.5 * uj.h : uj.h;
            cdouble denom = cdouble(double(j), t) - z;
            V term = uj.samples[k];
            term *= sign * w / (2.0 * M_PI * denom);
            acc += term;
        }
    };
    add_edge(u1, 1, +1.0);
    add_edge(u0, 0, -1.0);
    return acc;
}

/**
 * Structured analytic function on the strip: two boundary traces plus the
 * construction metadata (theta, the Gaussian strength delta, the J-blocks
 * the witness was built from, and the boundary exponent q).
 */
template <class V>
struct StripWitness {
    LineFunction<V> boundary0, boundary1;
    double theta = 0.5;
    double delta = 1.0;
    double q = 2.0;
    std::map<int, V> blocks;
};

/// max_j ( h_xi sum_k || hat w_j(xi_k) ||_{A_j}^q )^{1/q} on the dual grid.
template <class V>
double fq_norm_lines(const LineFunction<V>& b0, const LineFunction<V>& b1, double q,
                     const SpaceNorm& a0, const SpaceNorm& a1, int oversample = 4) {
    double out = 0.0;
    for (int j = 0; j < 2; ++j) {
        const LineFunction<V>& b = (j == 0) ? b0 : b1;
        const SpaceNorm& a = (j == 0) ? a0 : a1;
        LineFunction<V> bh = line_fourier(b);
        double hxi = bh.h;
        if (std::isinf(q)) {
            double sup = 0.0;
            for (const auto& s : bh.samples) sup = std::max(sup, norm(s, a, oversample));
            out = std::max(out, sup);
        } else {
            double acc = 0.0;
            for (const auto& s : bh.samples) acc += std::pow(norm(s, a, oversample), q);
            out = std::max(out, std::pow(hxi * acc, 1.0 / q));
        }
    }
    return out;
}

template <class V>
double fq_norm(const StripWitness<V>& w, double q, const SpaceNorm& a0, const SpaceNorm& a1,
               int oversample = 4) {
    return fq_norm_lines(w.boundary0, w.boundary1, q, a0, a1, oversample);
}

struct WitnessGrid {
    double T = 8.0;
    double h = 1.0 / 64.0;
    double edge_tol = 1e-12; // relative decay target at |t| = T
};

/**
 * Analytic realization of a J-decomposition:
 *
 *   v(z) = e^{delta (z^2 - theta^2)} sum_nu 2^{(z - theta) nu} a^nu,
 *
 * normalized so v(theta) equals sum_nu a^nu exactly.  Boundary samples decay
 * like e^{-delta t^2}; if that envelope cannot reach edge_tol at |t| = T the
 * construction is rejected with the required half-width.
 */
template <class V>
StripWitness<V> build_witness(const std::map<int, V>& blocks, double theta, double q,
                              double delta, const WitnessGrid& grid,
                              const SpaceNorm& space0, const SpaceNorm& space1) {
    if (!(theta > 0.0 && theta < 1.0))
        throw std::invalid_argument("build_witness: theta in (0,1)");
    if (!(delta > 0.0)) throw std::invalid_argument("build_witness: delta > 0");
    StripWitness<V> w;
    w.theta = theta;
    w.delta = delta;
    w.q = q;
    w.blocks = blocks;

    const std::size_t count = LineFunction<V>::expected_count(grid.T, grid.h);
    const double ln2 = std::log(2.0);

    // block magnitudes for the edge-decay estimate
    double scale = 0.0;
    std::map<int, double> mag;
    for (const auto& [nu, a] : blocks) {
        mag[nu] = coeff_max_abs(a);
        scale = std::max(scale, mag[nu]);
    }

    for (int j = 0; j < 2; ++j) {
        LineFunction<V>& b = (j == 0) ? w.boundary0 : w.boundary1;
        b.T = grid.T;
        b.h = grid.h;
        b.space = (j == 0) ? space0 : space1;
        if (blocks.empty()) {
            b.samples.clear();
            b.decay_bound = 0.0;
            continue;
        }
        double amp = 0.0; // envelope sum e^{delta(j^2-theta^2)} 2^{(j-theta)nu} |a^nu|
        for (const auto& [nu, m] : mag)
            amp += std::exp(delta * (double(j * j) - theta * theta)) *
                   std::pow(2.0, (double(j) - theta) * double(nu)) * m;
        if (scale > 0.0) {
            double edge = amp * std::exp(-delta * grid.T * grid.T);
            if (edge > grid.edge_tol * scale) {
                double Treq = std::sqrt(std::log(amp / (grid.edge_tol * scale)) / delta);
                std::ostringstream msg;
                msg << "build_witness: boundary decay " << edge / scale << " at |t| = "
                    << grid.T << " exceeds edge tolerance " << grid.edge_tol
                    << "; increase T to at least " << std::ceil(Treq);
                throw std::invalid_argument(msg.str());
            }
        }

        b.samples.clear();
        b.samples.reserve(count);
        const V& first = blocks.begin()->second;
        for (std::size_t k = 0; k < count; ++k) {
            double t = -grid.T + double(k) * grid.h;
            V s = FieldTraits<V>::zero_like(first);
            for (const auto& [nu, a] : blocks) {
                // exp(delta((j+it)^2 - theta^2)) * 2^{(j - theta + it) nu}
                cdouble zj(double(j), t);
                cdouble expo = delta * (zj * zj - theta * theta) +
                               cdouble(double(j) - theta, t) * (double(nu) * ln2);
                cdouble coef = std::exp(expo);
                V term = a;
                term *= coef;
                s += term;
            }
            b.samples.push_back(std::move(s));
        }
        b.decay_bound = amp * std::max(1.0, std::exp((1.0 - delta) * grid.T * grid.T));
        b.validate();
    }
    return w;
}

/**
 * Residual of the analytic boundary identity hat w_j = chi_j hat w_j +
 * rho_j hat w_{1-j}: the largest defect-sample norm on the dual grid,
 * relative to the witness boundary norm.  Small for traces of analytic
 * functions, O(1) for incompatible pairs.
 */
template <class V>
double verify_boundary_identity(const StripWitness<V>& w, int oversample = 4) {
    if (w.boundary0.count() == 0 || w.boundary1.count() == 0) return 0.0;
    LineFunction<V> h0 = line_fourier(w.boundary0);
    LineFunction<V> h1 = line_fourier(w.boundary1);
    double denom = fq_norm(w, w.q, w.boundary0.space, w.boundary1.space, oversample);
    if (denom <= 0.0) return 0.0;
    double worst = 0.0;
    for (int j = 0; j < 2; ++j) {
        const LineFunction<V>& self = (j == 0) ? h0 : h1;
        const LineFunction<V>& other = (j == 0) ? h1 : h0;
        const SpaceNorm& sp = (j == 0) ? w.boundary0.space : w.boundary1.space;
        for (std::size_t k = 0; k < self.count(); ++k) {
            double xi = self.t_at(k);
            V defect = self.samples[k];
            V a = self.samples[k];
            a *= chi(j, xi);
            V b = other.samples[k];
            b *= rho_hat(j, xi);
            defect -= a;
            defect -= b;
            worst = std::max(worst, norm(defect, sp, oversample));
        }
    }
    return worst / denom;
}

/// Smooth compactly supported bump of integral one and its transform.
inline double mollifier_bump(double t) {
    if (std::abs(t) >= 1.0) return 0.0;
    static const double c = [] {
        // normalize integral of exp(-1/(1-t^2)) over (-1,1) by Simpson
        const int n = 4000;
        double acc = 0.0;
        for (int i = 0; i <= n; ++i) {
            double x = -1.0 + 2.0 * double(i) / n;
            double f = (std::abs(x) < 1.0) ? std::exp(-1.0 / (1.0 - x * x)) : 0.0;
            double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
            acc += w * f;
        }
        return 1.0 / (acc * (2.0 / n) / 3.0);
    }();
    return c * std::exp(-1.0 / (1.0 - t * t));
}

inline double mollifier_hat(double u) {
    // even real transform of the bump; Simpson on the smooth integrand
    const int n = 2000;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        double x = -1.0 + 2.0 * double(i) / n;
        double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += w * mollifier_bump(x) * std::cos(u * x);
    }
    return acc * (2.0 / n) / 3.0;
}

/// Spectral mollification g * phi_eps: multiplication by phi_hat(eps xi).
template <class V>
LineFunction<V> mollify(const LineFunction<V>& g, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("mollify: eps > 0");
    return line_multiplier(
        g, [eps](double xi) { return cdouble(mollifier_hat(eps * xi), 0.0); });
}

} // namespace bblab
