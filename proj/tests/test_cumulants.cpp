#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "granular/checks.hpp"
#include "granular/cumulants.hpp"

using namespace granular;

namespace {

std::vector<PhasePoint<1>> points1(std::initializer_list<std::pair<double, double>> qp) {
    std::vector<PhasePoint<1>> x;
    for (auto [q, p] : qp) {
        PhasePoint<1> y;
        y.q[0] = q;
        y.p[0] = p;
        x.push_back(y);
    }
    return x;
}

FlowParams rods(double sigma, double eps) {
    FlowParams f;
    f.sigma = sigma;
    f.eps = Inelasticity(eps);
    return f;
}

double half_p2(const PhasePoint<1>& x) { return 0.5 * x.p.squaredNorm(); }

} // namespace

TEST_CASE("partition enumeration") {
    const auto t0 = enumerate_cumulant_terms(0);
    REQUIRE(t0.size() == 1);
    CHECK(t0[0].coefficient == 1);

    const auto t1 = enumerate_cumulant_terms(1);
    REQUIRE(t1.size() == 2);
    std::multiset<long long> c1;
    for (const auto& t : t1) c1.insert(t.coefficient);
    CHECK(c1 == std::multiset<long long>{-1, 1});

    const auto t2 = enumerate_cumulant_terms(2);
    REQUIRE(t2.size() == 5);
    std::multiset<long long> c2;
    for (const auto& t : t2) c2.insert(t.coefficient);
    CHECK(c2 == std::multiset<long long>{-1, -1, -1, 1, 2});

    const std::size_t bell[] = {1, 2, 5, 15, 52, 203};
    for (int n = 0; n <= 5; ++n) {
        const auto terms = enumerate_cumulant_terms(n);
        CHECK(terms.size() == bell[n]);
        long long sum = 0;
        for (const auto& t : terms) {
            sum += t.coefficient;
            std::size_t covered = 0;
            for (const auto& b : t.blocks) covered += b.size();
            CHECK(covered == static_cast<std::size_t>(n + 1));
        }
        CHECK(sum == (n == 0 ? 1 : 0));
    }
    CHECK_THROWS_AS(enumerate_cumulant_terms(kMaxCumulantOrder + 1), std::out_of_range);
    CHECK_THROWS(enumerate_cumulant_terms(-1));
}

TEST_CASE("second-order cumulant of two rods") {
    const auto x = points1({{0.0, 1.0}, {1.0, 0.0}});
    const auto flow = rods(0.1, 0.25);
    const Observable<1> energy = additive<1>(half_p2);
    const std::span<const PhasePoint<1>> xs(x);
    // S_2 b - S_1 x S_1 b = energy after the collision minus free energy
    CHECK(apply_cumulant<1>(1, 1.0, energy, xs, flow) == doctest::Approx(-0.1875));
    CHECK(apply_cumulant<1>(1, 0.5, energy, xs, flow) == doctest::Approx(0.0));
    CHECK(apply_cumulant<1>(1, 0.0, energy, xs, flow) == 0.0);
    CHECK(apply_cumulant<1>(0, 1.0, energy, xs.first(1), flow) == doctest::Approx(0.5));
}

TEST_CASE("cumulants vanish at t = 0 and for independent clusters") {
    const auto x = points1({{0.0, 0.3}, {0.5, -1.0}, {2.0, 0.7}});
    const auto flow = rods(0.1, 0.2);
    const Observable<1> b = [](std::span<const PhasePoint<1>> y) {
        double v = 1.0;
        for (const auto& z : y) v *= std::cos(z.q[0] + z.p[0]);
        return v;
    };
    const std::span<const PhasePoint<1>> xs(x);
    CHECK(apply_cumulant<1>(1, 0.0, b, xs.first(2), flow) == 0.0);
    CHECK(apply_cumulant<1>(2, 0.0, b, xs, flow) == 0.0);

    const auto r = cumulant_property_suite(40, 7);
    CHECK(r.independent_max <= 1e-12);
    CHECK(r.identity_error <= 1e-12);
    CHECK(r.passed);
}

TEST_CASE("marginal observable expansion") {
    CHECK(marginal_observable_expansion(1).terms.size() == 2);
    CHECK(marginal_observable_expansion(2).terms.size() == 4);
    CHECK(marginal_observable_expansion(3).terms.size() == 8);

    const auto x = points1({{0.0, 1.0}, {1.0, 0.0}});
    const std::span<const PhasePoint<1>> xs(x);
    const auto flow = rods(0.1, 0.25);
    const Observable<1> b1 = [](std::span<const PhasePoint<1>> y) { return half_p2(y[0]); };
    const Observable<1> b2 = [](std::span<const PhasePoint<1>> y) { return y[0].p[0] * y[1].p[0]; };

    // additive initial data: only the top cumulant survives for s = 2
    const double via_marginal = evolve_marginal_observable<1>(2, {b1, {}}, 1.0, xs, flow);
    const double via_additive = evolve_additive_observable<1>(half_p2, 1.0, xs, flow);
    CHECK(via_marginal == doctest::Approx(via_additive).epsilon(1e-14));
    CHECK(via_additive == doctest::Approx(-0.1875));

    CHECK(evolve_marginal_observable<1>(2, {b1, b2}, 0.0, xs, flow) == doctest::Approx(0.0));
    CHECK(evolve_marginal_observable<1>(1, {b1}, 0.7, xs.first(1), flow) == doctest::Approx(0.5));
    // B_2(t) = S_2 b2 + A_2 (b1 + b1), with b2 read after the collision
    CHECK(evolve_marginal_observable<1>(2, {b1, b2}, 1.0, xs, flow) ==
          doctest::Approx(0.25 * 0.75 - 0.1875));
}

TEST_CASE("scattering map") {
    const auto x = points1({{0.0, -1.0}, {1.0, 0.0}});
    const std::span<const PhasePoint<1>> xs(x);
    const auto m = scattering_map<1>(xs, 1.0, rods(0.1, 0.0));
    REQUIRE(m.has_value());
    CHECK(m->weight == 1.0);
    CHECK(m->points[0].q[0] == doctest::Approx(0.9).epsilon(1e-13));
    CHECK(m->points[0].p[0] == doctest::Approx(0.0).epsilon(1e-13));
    CHECK(m->points[1].q[0] == doctest::Approx(0.1).epsilon(1e-13));
    CHECK(m->points[1].p[0] == doctest::Approx(-1.0).epsilon(1e-13));

    const auto w = scattering_map<1>(xs, 1.0, rods(0.1, 0.25));
    REQUIRE(w.has_value());
    CHECK(w->weight == doctest::Approx(4.0));

    // receding points are left alone
    const auto far = points1({{0.0, 1.0}, {1.0, 0.0}});
    const auto id = scattering_map<1>(std::span<const PhasePoint<1>>(far), 1.0, rods(0.1, 0.25));
    REQUIRE(id.has_value());
    CHECK(id->weight == 1.0);
    CHECK(id->points[0].q[0] == 0.0);
    CHECK(id->points[1].p[0] == 0.0);

    const auto overlap = points1({{0.0, 1.0}, {0.05, 0.0}});
    CHECK_FALSE(scattering_map<1>(std::span<const PhasePoint<1>>(overlap), 1.0, rods(0.1, 0.25)).has_value());

    const auto t0 = scattering_map<1>(xs, 0.0, rods(0.1, 0.25));
    REQUIRE(t0.has_value());
    CHECK(t0->points[0].q[0] == 0.0);
    CHECK(t0->points[0].p[0] == -1.0);
}

TEST_CASE("second generating operator annihilates non-interacting points") {
    const auto x = points1({{0.0, -1.0}, {5.0, 1.0}});
    const Observable<1> f = [](std::span<const PhasePoint<1>> y) { return std::exp(-y[0].p[0] * y[1].q[0]); };
    const auto a2 = scattering_cumulant<1>(1, 1.0, std::span<const PhasePoint<1>>(x), rods(0.1, 0.25));
    CHECK(std::abs(a2.apply(f)) < 1e-15);
    const auto v2 = generating_operator_v2<1>(1.0, std::span<const PhasePoint<1>>(x), rods(0.1, 0.25));
    CHECK(std::abs(v2.apply(f)) < 1e-15);
}

TEST_CASE("F2 functional") {
    const auto f1 = gaussian_blob<1>(Vector<1>(0.0), 2.0, 1.0);
    const auto flow = rods(0.1, 0.25);
    PhasePoint<1> a, b;
    a.q[0] = -3.0;
    a.p[0] = -1.0;
    b.q[0] = 3.0;
    b.p[0] = 1.0;
    const auto far = marginal_functional_F2<1>(1.0, f1, a, b, flow);
    CHECK(far.estimate == doctest::Approx(f1.density(a) * f1.density(b)).epsilon(1e-14));
    CHECK(far.stderr_ == 0.0);

    b.q[0] = -2.95;
    CHECK(marginal_functional_F2<1>(1.0, f1, a, b, flow).estimate == 0.0);

    MarginalFunctionalOptions two;
    two.order = 2;
    CHECK_THROWS_AS(marginal_functional_F2<1>(1.0, f1, a, b, flow, two), NotImplemented);
    MarginalFunctionalOptions one;
    one.order = 1;
    CHECK_THROWS_AS(marginal_functional_F2<1>(1.0, f1, a, b, flow, one), GuardAbort);
}

TEST_CASE("duality") {
    const auto f1 = maxwellian_uniform<1>(2.0, 1.0);
    FlowParams flow = rods(0.1, 0.25);
    flow.domain = Domain::periodic(2.0);
    DualityOptions opt;
    opt.mc_samples = 4000;
    opt.seed = 3;

    const auto zero = duality_residual<1>(half_p2, f1, 0.0, flow, opt);
    CHECK(zero.residual == 0.0);

    const auto momentum = duality_residual<1>([](const PhasePoint<1>& x) { return x.p[0]; }, f1, 1.0, flow, opt);
    CHECK(momentum.z < 3.0);

    const auto energy = duality_residual<1>(half_p2, f1, 1.0, flow, opt);
    CHECK(energy.z < 3.0);
    CHECK(energy.state_side < energy.initial_value);

    // the adjoint weights (1-2eps)^{-2k} are heavy-tailed at larger eps and t,
    // so the small-sample check uses a mild case
    FlowParams mild = rods(0.1, 0.1);
    mild.domain = Domain::periodic(2.0);
    opt.n_particles = 3;
    opt.adjoint_route = true;
    opt.threads = 1;
    const auto serial = duality_residual<1>(half_p2, f1, 1.0, mild, opt);
    opt.threads = 4;
    const auto parallel = duality_residual<1>(half_p2, f1, 1.0, mild, opt);
    CHECK(serial.z < 3.0);
    CHECK(serial.adjoint_z < 3.0);
    CHECK(serial.residual == parallel.residual);
    CHECK(serial.adjoint_estimate == parallel.adjoint_estimate);
    CHECK(serial.stderr_ == parallel.stderr_);

    opt.n_particles = 7;
    CHECK_THROWS_AS(duality_residual<1>(half_p2, f1, 1.0, flow, opt), std::out_of_range);
}
