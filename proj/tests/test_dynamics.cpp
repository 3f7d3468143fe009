#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "granular/dynamics.hpp"

using namespace granular;

namespace {

SystemState<1> two_rods(double eps) {
    SystemState<1> s;
    s.particles.resize(2);
    s.particles[0].q[0] = 0.0;
    s.particles[0].p[0] = 1.0;
    s.particles[1].q[0] = 1.0;
    s.particles[1].p[0] = 0.0;
    s.sigma = 0.1;
    s.eps = Inelasticity(eps);
    s.domain = Domain::unbounded();
    return s;
}

template <int Dim>
SystemState<Dim> random_gas(std::size_t n, double length, double sigma, double eps, std::uint64_t seed) {
    Rng rng(seed);
    return sample_chaotic_state<Dim>(n, maxwellian_uniform<Dim>(length, 1.0), sigma, Inelasticity(eps),
                                     Domain::periodic(length), rng)
        .state;
}

template <int Dim>
double max_distance(const SystemState<Dim>& a, const SystemState<Dim>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d = std::max(d, a.domain.displacement(a.particles[i].q, b.particles[i].q).norm());
        d = std::max(d, (a.particles[i].p - b.particles[i].p).norm());
    }
    return d;
}

} // namespace

TEST_CASE("pair collision times") {
    const auto s = two_rods(0.0);
    auto t = pair_collision_time(s, 0, 1);
    REQUIRE(t.has_value());
    CHECK(*t == doctest::Approx(0.9).epsilon(1e-14));

    auto apart = s;
    apart.particles[0].p[0] = -1.0;
    CHECK_FALSE(pair_collision_time(apart, 0, 1).has_value());

    // the only approach on a ring can be through the wrap
    SystemState<1> ring = s;
    ring.domain = Domain::periodic(10.0);
    ring.particles[0].q[0] = 0.0;
    ring.particles[0].p[0] = -1.0;
    ring.particles[1].q[0] = 5.0;
    t = pair_collision_time(ring, 0, 1);
    REQUIRE(t.has_value());
    CHECK(*t == doctest::Approx(4.9).epsilon(1e-13));

    SystemState<3> head;
    head.particles.resize(2);
    head.particles[0].q = Vector<3>(-0.5, 0.0, 0.0);
    head.particles[0].p = Vector<3>(1.0, 0.0, 0.0);
    head.particles[1].q = Vector<3>(0.5, 0.0, 0.0);
    head.particles[1].p = Vector<3>(-1.0, 0.0, 0.0);
    head.sigma = 0.2;
    t = pair_collision_time(head, 0, 1);
    REQUIRE(t.has_value());
    CHECK(*t == doctest::Approx(0.4).epsilon(1e-14));
    head.particles[1].q = Vector<3>(0.5, 0.3, 0.0);
    CHECK_FALSE(pair_collision_time(head, 0, 1).has_value());
}

TEST_CASE("two rods") {
    TrajectoryLog<1> log;
    const auto elastic = advance(two_rods(0.0), 1.0, &log);
    REQUIRE(log.events.size() == 1);
    CHECK(log.events[0].t == doctest::Approx(0.9).epsilon(1e-14));
    CHECK(log.events[0].g_n == doctest::Approx(1.0));
    // normal from j to i: the left rod sits on the negative side
    CHECK(log.events[0].eta[0] == (log.events[0].i == 0 ? -1.0 : 1.0));
    CHECK(elastic.particles[0].q[0] == doctest::Approx(0.9).epsilon(1e-14));
    CHECK(elastic.particles[0].p[0] == 0.0);
    CHECK(elastic.particles[1].q[0] == doctest::Approx(1.1).epsilon(1e-14));
    CHECK(elastic.particles[1].p[0] == 1.0);
    CHECK(elastic.time == 1.0);

    TrajectoryLog<1> log2;
    const auto inelastic = advance(two_rods(0.25), 1.0, &log2);
    REQUIRE(log2.events.size() == 1);
    CHECK(log2.events[0].dE == doctest::Approx(-0.1875));
    CHECK(inelastic.particles[0].q[0] == doctest::Approx(0.925).epsilon(1e-14));
    CHECK(inelastic.particles[1].q[0] == doctest::Approx(1.075).epsilon(1e-14));
    CHECK(inelastic.particles[0].p[0] == doctest::Approx(0.25));
    CHECK(inelastic.particles[1].p[0] == doctest::Approx(0.75));

    CHECK(advance(two_rods(0.25), 0.0).particles[0].q[0] == 0.0);
}

TEST_CASE("backward flow inverts the forward flow") {
    const auto forward = advance(two_rods(0.25), 1.0);
    std::size_t k = 0;
    const auto back = advance_backward(forward, 1.0, &k);
    CHECK(k == 1);
    CHECK(back.particles[0].q[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(back.particles[0].p[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(back.particles[1].q[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(back.particles[1].p[0] == doctest::Approx(0.0).epsilon(1e-12));

    auto gas = random_gas<1>(40, 10.0, 0.05, 0.2, 9);
    const auto there = advance(gas, 1.5);
    const auto again = advance_backward(there, 1.5);
    CHECK(max_distance(gas, again) < 1e-9);
}

TEST_CASE("semigroup property") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto g1 = random_gas<1>(30, 5.0, 0.05, 0.2, seed);
        const auto whole = advance(g1, 1.0);
        const auto split = advance(advance(g1, 0.37), 0.63);
        CHECK(max_distance(whole, split) < 1e-9);

        const auto g3 = random_gas<3>(30, 3.0, 0.2, 0.3, seed);
        const auto whole3 = advance(g3, 1.0);
        const auto split3 = advance(advance(g3, 0.5), 0.5);
        CHECK(max_distance(whole3, split3) < 1e-9);
    }
}

TEST_CASE("neighbour structures agree with all pairs") {
    SimulatorOptions reference;
    reference.neighbors = NeighborMode::all_pairs;
    // weakly inelastic: 50 rods at eps = 0.25 collapse within a time unit
    const auto g1 = random_gas<1>(50, 10.0, 0.05, 0.02, 4);
    TrajectoryLog<1> a, b;
    advance(g1, 3.0, &a);
    advance(g1, 3.0, &b, reference);
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t k = 0; k < a.events.size(); ++k) {
        CHECK(a.events[k].t == doctest::Approx(b.events[k].t).epsilon(1e-12));
        CHECK(std::min(a.events[k].i, a.events[k].j) == std::min(b.events[k].i, b.events[k].j));
    }

    const auto g3 = random_gas<3>(60, 4.0, 0.25, 0.25, 4);
    TrajectoryLog<3> c, d;
    advance(g3, 2.0, &c);
    advance(g3, 2.0, &d, reference);
    REQUIRE(c.events.size() == d.events.size());
    CHECK(c.events.size() > 10);
    for (std::size_t k = 0; k < c.events.size(); ++k) {
        CHECK(c.events[k].t == doctest::Approx(d.events[k].t).epsilon(1e-12));
    }
}

TEST_CASE("energy ledger, momentum and allowed set") {
    auto gas = random_gas<1>(1000, 1000.0, 0.001, 0.25, 2);
    const double e0 = kinetic_energy(gas);
    const double m0 = total_momentum(gas)[0];
    EventDrivenSimulator<1> sim(gas);
    TrajectoryLog<1> log;
    CHECK(sim.run_collisions(20000, &log) == 20000);
    const auto end = sim.state();
    const double e1 = kinetic_energy(end);
    CHECK(std::abs(e0 - e1 - sim.dissipated()) <= 1e-9 * e0);
    double sum = 0.0;
    for (const auto& ev : log.events) {
        CHECK(ev.g_n > 0.0);
        CHECK(ev.dE == doctest::Approx(-0.25 * 0.75 * ev.g_n * ev.g_n));
        sum += ev.dE;
    }
    CHECK(std::abs(sum + sim.dissipated()) <= 1e-9 * e0);
    CHECK(std::abs(total_momentum(end)[0] - m0) < 1e-9);
    // the last colliding pair sits at contact, up to rounding of positions near L
    CHECK(min_separation<1>(std::span<const PhasePoint<1>>(end.particles), end.domain) >= 0.001 * (1.0 - 1e-9));
    CHECK(sim.log_density_factor() == doctest::Approx(-2.0 * 20000 * std::log(0.5)));

    auto g3 = random_gas<3>(100, 10.0, 0.3, 0.3, 2);
    const double e3 = kinetic_energy(g3);
    EventDrivenSimulator<3> sim3(g3);
    sim3.advance(2.0);
    const auto end3 = sim3.state();
    CHECK(sim3.collisions() > 0);
    CHECK(std::abs(e3 - kinetic_energy(end3) - sim3.dissipated()) <= 1e-9 * e3);
    CHECK((total_momentum(end3) - total_momentum(g3)).norm() < 1e-9);
    CHECK(is_allowed(end3));
}

TEST_CASE("elastic rods permute momenta") {
    auto gas = random_gas<1>(500, 100.0, 0.01, 0.0, 8);
    const auto end = advance(gas, 20.0);
    std::vector<double> a, b;
    for (const auto& x : gas.particles) a.push_back(x.p[0]);
    for (const auto& x : end.particles) b.push_back(x.p[0]);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
    CHECK(kinetic_energy(end) == doctest::Approx(kinetic_energy(gas)).epsilon(1e-15));
}

TEST_CASE("event storm guard") {
    auto gas = random_gas<1>(1000, 1000.0, 0.001, 0.25, 3);
    SimulatorOptions tight;
    tight.max_event_rate = 0.5;
    CHECK_THROWS_AS(advance<1>(gas, 5.0, nullptr, tight), EventStorm);
}

TEST_CASE("TC threshold makes slow collisions elastic") {
    auto gas = random_gas<1>(200, 100.0, 0.01, 0.25, 6);
    SimulatorOptions tc;
    tc.tc_threshold = 1e9;
    EventDrivenSimulator<1> sim(gas, tc);
    sim.advance(5.0);
    CHECK(sim.collisions() > 0);
    CHECK(sim.dissipated() == 0.0);
    CHECK(kinetic_energy(sim.state()) == doctest::Approx(kinetic_energy(gas)).epsilon(1e-14));
}

TEST_CASE("evolved observables") {
    const Observable<1> energy = [](std::span<const PhasePoint<1>> x) { return kinetic_energy<1>(x); };
    CHECK(evolve_observable<1>(energy, two_rods(0.25), 1.0) == doctest::Approx(0.3125));
    CHECK(evolve_observable<1>(energy, two_rods(0.25), 0.5) == doctest::Approx(0.5));
    auto overlapping = two_rods(0.25);
    overlapping.particles[1].q[0] = 0.05;
    CHECK(evolve_observable<1>(energy, overlapping, 1.0) == 0.0);
}

TEST_CASE("csv dumps") {
    TrajectoryLog<1> log;
    EventDrivenSimulator<1> sim(two_rods(0.25));
    sim.snapshot(log);
    sim.advance(1.0, &log);
    sim.snapshot(log);
    const auto ev = events_csv(log.events, 1);
    CHECK(ev.rfind("t,i,j,eta_x,g_n,dE\n", 0) == 0);
    CHECK(std::count(ev.begin(), ev.end(), '\n') == 2);
    const auto snap = snapshots_csv(log);
    CHECK(snap.rfind("t,particle,qx,px\n", 0) == 0);
    CHECK(std::count(snap.begin(), snap.end(), '\n') == 5);
}
