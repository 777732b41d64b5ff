#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "bblab/convex.hpp"

using namespace bblab;

namespace {

cvec rand_cvec(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    cvec v(n);
    for (auto& c : v) c = cdouble(g(rng), g(rng));
    return v;
}

double re_dot(const cvec& a, const cvec& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::real(std::conj(a[i]) * b[i]);
    return acc;
}

void check_adjoint(const LinOp& op, unsigned seed) {
    cvec x = rand_cvec(op.in_size(), seed);
    cvec y = rand_cvec(op.out_size(), seed + 1);
    cvec Ax, ATy;
    op.apply(x, Ax);
    op.adjoint(y, ATy);
    double lhs = re_dot(y, Ax), rhs = re_dot(ATy, x);
    REQUIRE(lhs == Catch::Approx(rhs).margin(1e-9 * (1.0 + std::abs(lhs))));
}

void check_lift(const LinOp& op, unsigned seed) {
    cvec r = rand_cvec(op.in_size(), seed);
    cvec eta, back;
    REQUIRE(op.lift(r, eta));
    op.adjoint(eta, back);
    double err = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) err = std::max(err, std::abs(back[i] - r[i]));
    REQUIRE(err <= 1e-10);
}

} // namespace

TEST_CASE("operators satisfy <Ax,y> = <x,A*y>") {
    check_adjoint(IdOp(7), 1);
    check_adjoint(DiagOp(std::vector<double>{0.5, 2.0, 3.0, 1.0, 7.0}), 2);
    check_adjoint(GridEvalOp(2, 3, 2, 0.25), 3);
    check_adjoint(SelectOp(3, 1, 5), 4);
    check_adjoint(GradOp(2, 3), 5);
    check_adjoint(LerayOp(2, 3), 6);
    check_adjoint(CompOp(std::make_shared<GridEvalOp>(2, 3, 2, 1.0),
                         std::make_shared<DiagOp>(std::vector<double>(49, 1.5))),
                  7);
}

TEST_CASE("lifts invert the adjoint exactly") {
    check_lift(IdOp(5), 11);
    check_lift(DiagOp(std::vector<double>{0.5, 2.0, 3.0, 1.0}), 12);
    check_lift(GridEvalOp(2, 3, 2, 0.1), 13);
    check_lift(CompOp(std::make_shared<GridEvalOp>(1, 4, 4, 2.0),
                      std::make_shared<DiagOp>(std::vector<double>(9, 0.7))),
               14);
    // gradient lift needs a mean-zero residual
    GradOp g(2, 3);
    cvec r = rand_cvec(g.in_size(), 15);
    r[g.in_size() / 2] = 0.0; // zero mode sits at the center index
    cvec eta, back;
    REQUIRE(g.lift(r, eta));
    g.adjoint(eta, back);
    for (std::size_t i = 0; i < r.size(); ++i) REQUIRE(std::abs(back[i] - r[i]) <= 1e-10);
}

TEST_CASE("Leray projection is idempotent and kills gradients") {
    LerayOp P(2, 4);
    GradOp G(2, 4);
    cvec x = rand_cvec(G.in_size(), 21);
    cvec gx, pgx, px, ppx;
    G.apply(x, gx);
    P.apply(gx, pgx);
    for (const auto& v : pgx) REQUIRE(std::abs(v) <= 1e-12);
    cvec u = rand_cvec(P.in_size(), 22);
    P.apply(u, px);
    P.apply(px, ppx);
    for (std::size_t i = 0; i < px.size(); ++i) REQUIRE(std::abs(px[i] - ppx[i]) <= 1e-12);
}

namespace {

void check_epi_projection(AtomKind k, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 40; ++trial) {
        cvec v = rand_cvec(8, seed * 100 + unsigned(trial));
        double s = 2.0 * g(rng);
        cvec pv = v;
        double ps = s;
        project_epi(k, pv, ps);
        // lands in the cone
        REQUIRE(atom_eval(k, pv) <= ps * (1.0 + 1e-12) + 1e-12);
        // idempotent
        cvec qv = pv;
        double qs = ps;
        project_epi(k, qv, qs);
        for (std::size_t i = 0; i < pv.size(); ++i)
            REQUIRE(std::abs(qv[i] - pv[i]) <= 1e-10);
        REQUIRE(qs == Catch::Approx(ps).margin(1e-10));
        // no cone member is closer than the projection
        for (int probe = 0; probe < 10; ++probe) {
            cvec w = rand_cvec(8, seed * 1000 + unsigned(trial * 10 + probe));
            double ws = atom_eval(k, w) + std::abs(g(rng));
            double dp = 0.0, dw = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) {
                dp += std::norm(v[i] - pv[i]);
                dw += std::norm(v[i] - w[i]);
            }
            dp += (s - ps) * (s - ps);
            dw += (s - ws) * (s - ws);
            REQUIRE(dp <= dw + 1e-9);
        }
    }
}

} // namespace

TEST_CASE("epigraph projections are projections") {
    check_epi_projection(AtomKind::L1, 31);
    check_epi_projection(AtomKind::L2, 32);
    check_epi_projection(AtomKind::Linf, 33);
}

TEST_CASE("power iteration bounds the stacked operator") {
    Problem pb;
    pb.xsize = 6;
    MaxGroup g;
    g.weight = 1.0;
    g.members.push_back({std::make_shared<IdOp>(6), AtomKind::L2});
    g.members.push_back({std::make_shared<DiagOp>(std::vector<double>{3, 1, 1, 1, 1, 1}),
                         AtomKind::L2});
    pb.groups = {g};
    double L = estimate_op_norm(pb);
    // x-block contributes 1 + 9 = 10, the epigraph block 2 members -> 2
    REQUIRE(L == Catch::Approx(std::sqrt(10.0)).epsilon(1e-3));
}
