#pragma once

#include "bblab/torus_field.hpp"

namespace bblab {

/// Shape of the flat variable a compiled norm or transform acts on.
struct FieldShape {
    int d = 1;
    int N = 1;
    int ncomp = 1; // 1 = scalar field, d = vector field
    std::size_t coef_count() const {
        std::size_t n = 1;
        for (int j = 0; j < d; ++j) n *= std::size_t(2 * N + 1);
        return n;
    }
    std::size_t flat_size() const { return std::size_t(ncomp) * coef_count(); }
};

template <class FieldT>
struct FieldTraits;

template <>
struct FieldTraits<TorusField> {
    static FieldShape shape(const TorusField& f) { return {f.dim, f.bandlimit, 1}; }
    static cvec flatten(const TorusField& f) { return f.coeffs; }
    static TorusField unflatten(const cvec& v, const TorusField& like) {
        TorusField out(like.dim, like.bandlimit, false);
        out.coeffs = v;
        return out;
    }
    static TorusField zero_like(const TorusField& like) {
        return TorusField(like.dim, like.bandlimit, false);
    }
};

template <>
struct FieldTraits<VectorField> {
    static FieldShape shape(const VectorField& f) {
        return {f.dim(), f.bandlimit(), f.dim()};
    }
    static cvec flatten(const VectorField& f) {
        cvec v;
        v.reserve(std::size_t(f.dim()) * f.comps[0].size());
        for (const auto& c : f.comps) v.insert(v.end(), c.coeffs.begin(), c.coeffs.end());
        return v;
    }
    static VectorField unflatten(const cvec& v, const VectorField& like) {
        VectorField out(like.dim(), like.bandlimit(), false);
        const std::size_t block = like.comps[0].size();
        for (int j = 0; j < like.dim(); ++j)
            out.comps[std::size_t(j)].coeffs.assign(v.begin() + std::size_t(j) * block,
                                                    v.begin() + std::size_t(j + 1) * block);
        return out;
    }
    static VectorField zero_like(const VectorField& like) {
        return VectorField(like.dim(), like.bandlimit(), false);
    }
};

} // namespace bblab
