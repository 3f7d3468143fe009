#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "granular/kinetic.hpp"

using namespace granular;

namespace {

// E|p - p'|^3 for independent unit-temperature Maxwellians in d dimensions
double mean_cubed_speed(int d) {
    const double chi3 = std::pow(2.0, 1.5) * std::tgamma(0.5 * d + 1.5) / std::tgamma(0.5 * d);
    return std::pow(2.0, 1.5) * chi3;
}

bool within(const Estimate& e, double target, double k = 3.0) {
    return std::abs(e.value - target) <= k * e.stderr_ + 1e-12 * e.scale;
}

DsmcState beams() {
    DsmcState s;
    s.length = 1.0;
    s.cells = 1;
    s.weight = 1.0;
    s.eps = Inelasticity(0.25);
    s.seed = 5;
    s.q = {0.1, 0.2};
    s.p = {1.0, -1.0};
    return s;
}

} // namespace

TEST_CASE("empty pair density gives zero") {
    const PairDensity<1> zero = [](const Vector<1>&, const Vector<1>&, const Vector<1>&, const Vector<1>&) {
        return 0.0;
    };
    PhasePoint<1> x;
    x.p[0] = 0.3;
    const auto e = enskog_collision_integral<1>(zero, x, 0.1, Inelasticity(0.25));
    CHECK(e.value == 0.0);
    CHECK(e.stderr_ == 0.0);
}

TEST_CASE("elastic Maxwellians are stationary") {
    const auto m1 = maxwellian_velocity_density<1>(1.0, 1.0, 1.0);
    PhasePoint<1> x1;
    x1.p[0] = 0.7;
    const auto e1 = enskog_collision_integral<1>(product_closure(m1), x1, 0.01, Inelasticity(0.0));
    CHECK(std::abs(e1.value) <= 1e-15 * e1.scale);

    const auto m3 = maxwellian_velocity_density<3>(1.0, 1.0, 1.0);
    PhasePoint<3> x3;
    x3.p = Vector<3>(0.4, -1.1, 0.2);
    CollisionIntegralOptions opt;
    opt.mc_budget = 20000;
    const auto e3 = enskog_collision_integral<3>(product_closure(m3), x3, 0.1, Inelasticity(0.0), opt);
    CHECK(std::abs(e3.value) <= std::max(3.0 * e3.stderr_, 1e-12 * e3.scale));
    CHECK(e3.scale > 0.0);
}

TEST_CASE("uniform states do not see the offset") {
    const auto m = maxwellian_velocity_density<1>(2.0, 1.5, 1.0);
    PhasePoint<1> x;
    x.p[0] = -0.4;
    CollisionIntegralOptions opt;
    opt.seed = 9;
    const auto a = enskog_collision_integral<1>(product_closure(m), x, 0.1, Inelasticity(0.25), opt);
    const auto b = enskog_collision_integral<1>(product_closure(m), x, 0.05, Inelasticity(0.25), opt);
    CHECK(a.value == doctest::Approx(b.value).epsilon(1e-12));
    CHECK(a.value != 0.0);
}

TEST_CASE("half-line form agrees with the eta form") {
    const PairDensity<1> f2 = [](const Vector<1>& q1, const Vector<1>& p1, const Vector<1>& q2, const Vector<1>& p2) {
        const double m = std::exp(-0.5 * (p1[0] - 0.3) * (p1[0] - 0.3) - 0.5 * p2[0] * p2[0]) / (2.0 * std::numbers::pi);
        return (1.0 + 0.5 * std::cos(2.0 * std::numbers::pi * q1[0])) *
               (1.0 + 0.3 * std::sin(2.0 * std::numbers::pi * q2[0])) * (1.0 + 0.2 * std::tanh(p1[0] * p2[0])) * m;
    };
    PhasePoint<1> x;
    x.q[0] = 0.2;
    x.p[0] = 0.5;
    for (double e : {0.0, 0.25, 0.4}) {
        CollisionIntegralOptions opt;
        opt.mc_budget = 400000;
        opt.seed = 2;
        const auto mc = enskog_collision_integral<1>(f2, x, 0.15, Inelasticity(e), opt);
        const auto [value, err] = enskog_collision_integral_halfline(f2, x, 0.15, Inelasticity(e));
        CHECK(err < 1e-6);
        CHECK(std::abs(mc.value - value) < 3.5 * mc.stderr_ + 1e-9);
    }
}

TEST_CASE("expansion order") {
    const auto m = maxwellian_velocity_density<1>(1.0, 1.0, 1.0);
    PhasePoint<1> x;
    CollisionIntegralOptions opt;
    opt.order = 1;
    CHECK_THROWS_AS(enskog_collision_integral<1>(product_closure(m), x, 0.1, Inelasticity(0.25), opt), NotImplemented);
    CHECK_THROWS_AS(enskog_collision_integral_halfline(product_closure(m), x, 0.1, Inelasticity(0.25), 1), NotImplemented);
    opt.order = -1;
    CHECK_THROWS_AS(enskog_collision_integral<1>(product_closure(m), x, 0.1, Inelasticity(0.25), opt),
                    std::invalid_argument);
}

TEST_CASE("collision moments") {
    const double e = 0.25;
    CollisionIntegralOptions opt;
    opt.mc_budget = 200000;
    opt.seed = 4;

    const auto m1 = collision_integral_moments<1>(maxwellian_velocity_density<1>(1.0, 1.0, 1.0), 0.01,
                                                  Inelasticity(e), opt);
    CHECK(within(m1.mass, 0.0));
    CHECK(within(m1.momentum, 0.0));
    CHECK(m1.energy.value < -3.0 * m1.energy.stderr_);
    CHECK(within(m1.energy, -0.5 * e * (1.0 - e) * mean_cubed_speed(1), 4.0));

    const double sigma = 0.1;
    const auto m3 = collision_integral_moments<3>(maxwellian_velocity_density<3>(1.0, 1.0, 1.0), sigma,
                                                  Inelasticity(e), opt);
    CHECK(within(m3.mass, 0.0));
    CHECK(within(m3.momentum, 0.0));
    CHECK(m3.energy.value < -3.0 * m3.energy.stderr_);
    const double analytic3 = -0.5 * e * (1.0 - e) * sigma * sigma * 0.5 * std::numbers::pi * mean_cubed_speed(3);
    CHECK(within(m3.energy, analytic3, 4.0));

    const auto el = collision_integral_moments<3>(maxwellian_velocity_density<3>(1.0, 1.0, 1.0), sigma,
                                                  Inelasticity(0.0), opt);
    CHECK(within(el.energy, 0.0));
}

TEST_CASE("DSMC delta beams") {
    CHECK(granular_temperature(beams()) == 1.0);
    DsmcConfig cfg;
    cfg.cells = 1;
    DsmcState s = beams();
    std::size_t collisions = 0;
    for (int k = 0; k < 2000 && collisions == 0; ++k) {
        DsmcStepStats st;
        s = dsmc_step(std::move(s), 0.04, cfg, &st);
        collisions = st.collisions;
    }
    REQUIRE(collisions == 1);
    std::vector<double> p = s.p;
    std::sort(p.begin(), p.end());
    CHECK(p[0] == doctest::Approx(-0.5));
    CHECK(p[1] == doctest::Approx(0.5));
    CHECK(granular_temperature(s) == doctest::Approx(0.25));

    CHECK_THROWS_AS(dsmc_step(beams(), 1.0, cfg), DtGuard);
    CHECK(dsmc_max_stable_dt(beams(), 0.2) == doctest::Approx(0.05));

    DsmcState one = beams();
    one.p = {1.0, 1.0};
    CHECK(granular_temperature(one) == 0.0);
    one.p = {1.0};
    one.q = {0.5};
    CHECK_THROWS_AS(granular_temperature(one), std::invalid_argument);
}

TEST_CASE("DSMC conservation laws") {
    const auto f0 = maxwellian_velocity_density<1>(1.0, 1.0, 8.0);
    DsmcConfig cfg;
    cfg.cells = 8;
    cfg.samples = 20000;
    cfg.seed = 3;
    DsmcState s = dsmc_initialize(f0, Inelasticity(0.25), cfg);
    CHECK(dsmc_moments(s).mass == doctest::Approx(8.0));

    const DsmcState same = dsmc_step(s, 0.0, cfg);
    CHECK(same.q == s.q);
    CHECK(same.p == s.p);
    CHECK(same.step == s.step);

    double p0 = 0.0, abs0 = 0.0;
    for (double p : s.p) {
        p0 += p;
        abs0 += std::abs(p);
    }
    double t_prev = granular_temperature(s);
    for (int k = 0; k < 20; ++k) {
        const double dt = 0.5 * dsmc_max_stable_dt(s, cfg.dt_bound);
        DsmcStepStats st;
        s = dsmc_step(std::move(s), dt, cfg, &st);
        const double t_now = granular_temperature(s);
        if (st.collisions > 0) CHECK(t_now < t_prev);
        CHECK(st.dissipated > 0.0);
        t_prev = t_now;
    }
    double p1 = 0.0;
    for (double p : s.p) p1 += p;
    CHECK(std::abs(p1 - p0) <= 1e-12 * abs0);
    CHECK(dsmc_moments(s).mass == doctest::Approx(8.0));

    DsmcState el = dsmc_initialize(f0, Inelasticity(0.0), cfg);
    std::vector<double> before = el.p;
    for (int k = 0; k < 20; ++k) el = dsmc_step(std::move(el), 0.5 * dsmc_max_stable_dt(el), cfg);
    std::vector<double> after = el.p;
    std::sort(before.begin(), before.end());
    std::sort(after.begin(), after.end());
    CHECK(before == after);
}

TEST_CASE("DSMC keeps a uniform gas uniform") {
    LimitEquationConfig cfg;
    cfg.dsmc.cells = 16;
    cfg.dsmc.samples = 40000;
    cfg.dsmc.seed = 8;
    cfg.keep_states = true;
    cfg.snapshot_times = {0.5};
    const auto sol = solve_limit_equation(maxwellian_velocity_density<1>(1.0, 1.0, 16.0), 1.0, Inelasticity(0.25), cfg);
    REQUIRE(sol.times == std::vector<double>{0.0, 0.5, 1.0});
    CHECK(sol.moments[2].temperature < sol.moments[1].temperature);
    CHECK(sol.moments[1].temperature < sol.moments[0].temperature);
    CHECK(sol.moments[2].mass == doctest::Approx(sol.moments[0].mass));

    const DsmcState& last = sol.states.back();
    const Grid1D g(0.0, 16.0, 16);
    std::vector<double> counts(16, 0.0);
    for (double q : last.q) counts[g.index(q)] += 1.0;
    const auto [stat, dof] = chi_square(counts, std::vector<double>(16, 1.0 / 16.0));
    CHECK(chi_square_pvalue(stat, dof) > 0.001);
}

TEST_CASE("DSMC cooling follows the quadrature rate") {
    const auto f0 = maxwellian_velocity_density<1>(1.0, 1.0, 1.0);
    DsmcConfig cfg;
    cfg.cells = 1;
    cfg.samples = 100000;
    cfg.seed = 12;
    const Inelasticity eps(0.25);
    DsmcState s = dsmc_initialize(f0, eps, cfg);
    const double quad0 = cooling_rate_quadrature(s.p, 1.0, eps);
    CHECK(quad0 == doctest::Approx(-0.25 * 0.75 * mean_cubed_speed(1)).epsilon(0.03));

    const double t0 = granular_temperature(s);
    const double span = 0.1;
    while (s.time < span - 1e-12) {
        const double dt = std::min(0.5 * dsmc_max_stable_dt(s), span - s.time);
        s = dsmc_step(std::move(s), dt, cfg);
    }
    const double fd = (granular_temperature(s) - t0) / span;
    const double quad = 0.5 * (quad0 + cooling_rate_quadrature(s.p, 1.0, eps));
    CHECK(std::abs(fd / quad - 1.0) < 0.05);
}

TEST_CASE("DSMC is independent of the thread count") {
    const auto f0 = maxwellian_velocity_density<1>(1.0, 1.0, 16.0);
    DsmcConfig one;
    one.cells = 16;
    one.samples = 20000;
    one.seed = 21;
    DsmcConfig four = one;
    four.threads = 4;
    DsmcState a = dsmc_initialize(f0, Inelasticity(0.25), one);
    DsmcState b = a;
    for (int k = 0; k < 10; ++k) {
        a = dsmc_step(std::move(a), 0.02, one);
        b = dsmc_step(std::move(b), 0.02, four);
    }
    CHECK(a.p == b.p);
    CHECK(a.q == b.q);
}

TEST_CASE("moment series csv") {
    Moments m;
    m.t = 0.5;
    m.mass = 1.0;
    const auto csv = moments_csv({m});
    CHECK(csv.rfind("t,mass,momentum,energy,temperature\n", 0) == 0);
    CHECK(csv.find("0.5,1,0,0,0\n") != std::string::npos);
}
