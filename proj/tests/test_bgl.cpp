#include <doctest.h>

#include <cmath>
#include <vector>

#include "granular/bgl.hpp"
#include "granular/report.hpp"

using namespace granular;

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

std::vector<SystemState<1>> iid_replicas(std::size_t replicas, std::size_t n, std::uint64_t seed) {
    std::vector<SystemState<1>> out(replicas);
    Rng rng(seed);
    for (auto& s : out) {
        s.particles.resize(n);
        for (auto& x : s.particles) {
            x.q[0] = uniform01(rng);
            x.p[0] = standard_normal(rng);
        }
    }
    return out;
}

} // namespace

TEST_CASE("pair histogram layout") {
    PairHistogram h(Grid1D(0.0, 1.0, 2), Grid1D(-3.0, 3.0, 4));
    CHECK(h.cells() == 8);
    CHECK(h.cell(0.2, -2.0) == 0);
    CHECK(h.cell(0.7, 2.5) == 7);
    CHECK(h.cell(0.7, 10.0) == 7);
    h.at(1, 2) += 3.0;
    CHECK(h.total() == 3.0);
}

TEST_CASE("empirical marginals reject bad input") {
    const MarginalGrid grid;
    CHECK_THROWS_AS(empirical_marginals({}, grid), std::invalid_argument);
    auto single = iid_replicas(2, 1, 1);
    CHECK_THROWS_AS(empirical_marginals(single, grid), std::invalid_argument);
    auto mixed = iid_replicas(2, 5, 1);
    mixed[1].time = 1.0;
    CHECK_THROWS_AS(empirical_marginals(mixed, grid), std::invalid_argument);
}

TEST_CASE("uniform F1 is flat and pair counts are complete") {
    const std::size_t replicas = 40, n = 250;
    const auto snaps = iid_replicas(replicas, n, 7);
    MarginalGrid grid;
    grid.p = Grid1D(-5.0, 5.0, 10);
    const auto m = empirical_marginals(snaps, grid);
    CHECK(m.f1.total_count() == replicas * n);
    CHECK(m.f2.total() == doctest::Approx(static_cast<double>(replicas * n * (n - 1))));

    std::vector<double> counts, probs;
    for (int qb = 0; qb < grid.q.bins; ++qb) {
        for (int pb = 0; pb < grid.p.bins; ++pb) {
            counts.push_back(static_cast<double>(m.f1.count(qb, pb)));
            const double lo = pb == 0 ? -INFINITY : grid.p.lo + pb * grid.p.width();
            const double hi = pb == grid.p.bins - 1 ? INFINITY : grid.p.lo + (pb + 1) * grid.p.width();
            probs.push_back((normal_cdf(hi) - normal_cdf(lo)) / grid.q.bins);
        }
    }
    const auto [stat, dof] = chi_square(counts, probs);
    CHECK(chi_square_pvalue(stat, dof) > 0.001);
}

TEST_CASE("independent replicas sit at the G2 floor") {
    const std::size_t replicas = 50, n = 200;
    const auto snaps = iid_replicas(replicas, n, 11);
    const MarginalGrid grid;
    const auto m = empirical_marginals(snaps, grid);

    std::vector<double> probs;
    const double edges[] = {-INFINITY, -1.5, 0.0, 1.5, INFINITY};
    for (int qb = 0; qb < 2; ++qb) {
        for (int pb = 0; pb < 4; ++pb) probs.push_back(0.5 * (normal_cdf(edges[pb + 1]) - normal_cdf(edges[pb])));
    }
    const auto floor = g2_iid_floor(probs, std::vector<std::size_t>(replicas, n), 64, 3);
    CHECK(floor.mean > 0.0);
    CHECK(floor.sd > 0.0);
    CHECK(std::abs(m.g2 - floor.mean) < 3.0 * floor.sd);
    CHECK(m.g2_err > 0.0);

    CHECK_THROWS_AS(g2_iid_floor(probs, {n}, 1, 3), std::invalid_argument);
}

TEST_CASE("dilute guard") {
    BgStudyConfig cfg;
    cfg.n_particles = 1000;
    cfg.sigma_list = {0.5};
    CHECK_THROWS_AS(bg_study(cfg), std::invalid_argument);
    cfg.sigma_list = {};
    CHECK_THROWS_AS(bg_study(cfg), std::invalid_argument);
}

TEST_CASE("elastic control study") {
    BgStudyConfig cfg;
    cfg.n_particles = 1000;
    cfg.eps = 0.0;
    cfg.sigma_list = {0.04, 0.02};
    cfg.t_list = {0.0, 0.5};
    cfg.replicas = 8;
    cfg.dsmc_samples = 200000;
    cfg.floor_repeats = 16;
    cfg.seed = 5;
    cfg.threads = 1;
    const auto report = bg_study(cfg);
    REQUIRE(report.per_sigma.size() == 4);
    CHECK(report.length == 1000.0);
    for (const auto& p : report.per_sigma) {
        CHECK(p.d1 < 3.0 * p.d1_floor);
        CHECK(p.energy_particle == doctest::Approx(p.energy_dsmc).epsilon(0.05));
        if (p.t == 0.0) {
            CHECK(p.collisions_per_particle == 0.0);
            CHECK(p.g2 < p.g2_floor + 3.0 * p.g2_floor_sd);
        }
    }
    CHECK(report.verdicts.energy_consistent);

    cfg.threads = 4;
    const auto again = bg_study(cfg);
    CHECK(to_json(report).dump() == to_json(again).dump());
    CHECK(chaos_csv(report) == chaos_csv(again));
}
