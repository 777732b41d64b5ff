#pragma once

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "bblab/field_traits.hpp"
#include "bblab/space_norm.hpp"

namespace bblab {

/**
 * Uniformly sampled function on [-T, T] with values in a vector space of
 * torus fields: the boundary traces v_j(t) = v(j + it) and their Fourier
 * transforms live here.  The samples sit at t_k = -T + k h, k = 0..count-1,
 * count = 2T/h + 1 (kept odd so the dual grid is symmetric).
 *
 * decay_bound declares the Gaussian budget ||samples(t)|| <= decay_bound
 * e^{-t^2} near |t| = T, measured in the coefficient sup norm; it is checked
 * at the four outermost samples.
 */
template <class V>
struct LineFunction {
    double T = 8.0;
    double h = 1.0 / 64.0;
    std::vector<V> samples;
    SpaceNorm space = SpaceNorm::lp(2.0);
    double decay_bound = 0.0; // 0 = no declared budget

    std::size_t count() const { return samples.size(); }
    double t_at(std::size_t k) const { return -T + double(k) * h; }

    static std::size_t expected_count(double T_, double h_) {
        double c = 2.0 * T_ / h_ + 1.0;
        double r = std::round(c);
        if (std::abs(c - r) > 1e-9 || r < 3.0)
            throw std::invalid_argument("LineFunction: 2T/h must be a positive integer");
        return std::size_t(r);
    }

    void validate() const {
        if (samples.size() != expected_count(T, h))
            throw std::runtime_error("LineFunction: sample count != 2T/h + 1");
        if (decay_bound <= 0.0) return;
        for (std::size_t k : {std::size_t(0), std::size_t(1), samples.size() - 2,
                              samples.size() - 1}) {
            double t = t_at(k);
            double budget = decay_bound * std::exp(-t * t);
            if (coeff_max_abs(samples[k]) > budget * (1.0 + 1e-9))
                throw std::runtime_error("LineFunction: Gaussian decay budget violated");
        }
    }
};

/// Dual-grid spacing 2 pi / (count * h); the transform samples
/// xi_m = m * spacing for |m| <= (count-1)/2.
template <class V>
double xi_spacing(const LineFunction<V>& g) {
    return 2.0 * M_PI / (double(g.count()) * g.h);
}

namespace line_detail {

/// DFT across the sample axis for every coefficient slot; phase-twisted so
/// the result matches hat g(xi) = integral g(t) e^{-i xi t} dt on the dual
/// grid (forward) or its exact inverse.
template <class V>
LineFunction<V> transform_impl(const LineFunction<V>& g, bool inverse) {
    using Tr = FieldTraits<V>;
    const std::size_t M = g.count();
    if (M == 0) throw std::invalid_argument("line transform: empty input");
    const std::size_t half = (M - 1) / 2;
    if (2 * half + 1 != M)
        throw std::invalid_argument("line transform: sample count must be odd");

    std::vector<cvec> flat(M);
    for (std::size_t k = 0; k < M; ++k) flat[k] = Tr::flatten(g.samples[k]);
    const std::size_t width = flat[0].size();

    LineFunction<V> out;
    if (!inverse) {
        double hx = xi_spacing(g);
        out.T = hx * double(half);
        out.h = hx;
    } else {
        double ht = 2.0 * M_PI / (double(M) * g.h);
        out.T = ht * double(half);
        out.h = ht;
    }
    out.space = g.space;

    // forward:  hat[m] = h e^{+i xi_m T} sum_k flat[k] e^{-2 pi i mk/M}
    // inverse:  g[k] = (1/(M hx_out... )) recovered by the conjugate phases
    std::vector<cvec> res(M, cvec(width, cdouble(0.0, 0.0)));
    cvec line(M);
    for (std::size_t slot = 0; slot < width; ++slot) {
        for (std::size_t k = 0; k < M; ++k) line[k] = flat[k][slot];
        if (!inverse) {
            dft(line, false); // bins m mod M
            for (std::size_t m = 0; m < M; ++m) {
                long mm = long(m) <= long(half) ? long(m) : long(m) - long(M);
                double xi = double(mm) * out.h;
                cdouble phase = std::polar(g.h, xi * g.T);
                res[std::size_t(mm + long(half))][slot] = phase * line[m];
            }
        } else {
            // input samples indexed by m in symmetric order; undo the
            // forward map exactly
            cvec bins(M);
            for (std::size_t idx = 0; idx < M; ++idx) {
                long mm = long(idx) - long(half);
                double xi = double(mm) * g.h;
                cdouble phase = std::polar(1.0, -xi * g.T);
                std::size_t m = std::size_t(mm >= 0 ? mm : mm + long(M));
                bins[m] = phase * flat[idx][slot];
            }
            dft(bins, true);
            const double scale = 1.0 / (double(M) * out.h);
            for (std::size_t k = 0; k < M; ++k) res[k][slot] = bins[k] * scale;
        }
    }
    out.samples.reserve(M);
    for (std::size_t k = 0; k < M; ++k)
        out.samples.push_back(Tr::unflatten(res[k], g.samples[0]));
    return out;
}

} // namespace line_detail

/// hat g on the symmetric dual grid.
template <class V>
LineFunction<V> line_fourier(const LineFunction<V>& g) {
    return line_detail::transform_impl(g, false);
}

/// Exact inverse of line_fourier.
template <class V>
LineFunction<V> line_inverse_fourier(const LineFunction<V>& ghat) {
    return line_detail::transform_impl(ghat, true);
}

/// Applies a scalar multiplier m(xi) on the dual grid.
template <class V>
LineFunction<V> line_multiplier(const LineFunction<V>& g,
                                const std::function<cdouble(double)>& m) {
    LineFunction<V> ghat = line_fourier(g);
    for (std::size_t k = 0; k < ghat.count(); ++k) {
        V& s = ghat.samples[k];
        s *= m(ghat.t_at(k));
    }
    LineFunction<V> out = line_inverse_fourier(ghat);
    out.T = g.T;
    out.h = g.h;
    out.space = g.space;
    out.decay_bound = 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// LFD1 file format
// ---------------------------------------------------------------------------
// Header "LFD1 T h count inner-format\n" with inner-format TFD1 (scalar
// samples) or VFD1 d (vector samples: d TFD1 records each), followed by the
// samples serialized in TFD1.

namespace line_detail {
inline std::string fmt_double(double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}
} // namespace line_detail

inline void save_lfd1(std::ostream& os, const LineFunction<TorusField>& g) {
    os << "LFD1 " << line_detail::fmt_double(g.T) << ' ' << line_detail::fmt_double(g.h)
       << ' ' << g.count() << " TFD1\n";
    for (const auto& s : g.samples) save_tfd1(os, s);
}

inline void save_lfd1(std::ostream& os, const LineFunction<VectorField>& g) {
    if (g.samples.empty()) throw std::invalid_argument("LFD1: empty line function");
    os << "LFD1 " << line_detail::fmt_double(g.T) << ' ' << line_detail::fmt_double(g.h)
       << ' ' << g.count() << " VFD1 " << g.samples[0].dim() << '\n';
    for (const auto& s : g.samples)
        for (const auto& c : s.comps) save_tfd1(os, c);
}

namespace line_detail {
inline void parse_lfd1_header(std::istream& is, double& T, double& h, std::size_t& count,
                              std::string& inner, int& d) {
    std::string header;
    if (!std::getline(is, header)) throw std::runtime_error("LFD1: missing header");
    std::istringstream hs(header);
    std::string magic;
    if (!(hs >> magic >> T >> h >> count >> inner) || magic != "LFD1")
        throw std::runtime_error("LFD1: bad header '" + header + "'");
    d = 0;
    if (inner == "VFD1" && !(hs >> d))
        throw std::runtime_error("LFD1: VFD1 header missing dimension");
}
} // namespace line_detail

inline LineFunction<TorusField> load_lfd1_scalar(std::istream& is) {
    LineFunction<TorusField> g;
    std::size_t count = 0;
    std::string inner;
    int d = 0;
    line_detail::parse_lfd1_header(is, g.T, g.h, count, inner, d);
    if (inner != "TFD1") throw std::runtime_error("LFD1: expected TFD1 samples");
    g.samples.reserve(count);
    for (std::size_t k = 0; k < count; ++k) g.samples.push_back(load_tfd1(is));
    return g;
}

inline LineFunction<VectorField> load_lfd1_vector(std::istream& is) {
    LineFunction<VectorField> g;
    std::size_t count = 0;
    std::string inner;
    int d = 0;
    line_detail::parse_lfd1_header(is, g.T, g.h, count, inner, d);
    if (inner != "VFD1" || d < 1) throw std::runtime_error("LFD1: expected VFD1 samples");
    g.samples.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        std::vector<TorusField> comps;
        comps.reserve(std::size_t(d));
        for (int j = 0; j < d; ++j) comps.push_back(load_tfd1(is));
        g.samples.emplace_back(std::move(comps));
    }
    return g;
}

} // namespace bblab
