#include "granular/bgl.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "granular/dynamics.hpp"
#include "granular/kinetic.hpp"
#include "granular/parallel.hpp"
#include "granular/random.hpp"

namespace granular {

PairHistogram::PairHistogram(Grid1D q, Grid1D p)
    : q_(q), p_(p), k_(static_cast<std::size_t>(q.bins) * p.bins), table_(k_ * k_, 0.0) {}

std::size_t PairHistogram::cell(double q, double p) const {
    return static_cast<std::size_t>(q_.index(q)) * p_.bins + p_.index(p);
}

double PairHistogram::total() const {
    double s = 0.0;
    for (double v : table_) s += v;
    return s;
}

namespace {

using Counts = std::vector<double>;

double jackknife_error(const std::vector<double>& leave_one_out) {
    const std::size_t r = leave_one_out.size();
    if (r < 2) return 0.0;
    double mean = 0.0;
    for (double v : leave_one_out) mean += v;
    mean /= static_cast<double>(r);
    double ss = 0.0;
    for (double v : leave_one_out) ss += (v - mean) * (v - mean);
    return std::sqrt(ss * static_cast<double>(r - 1) / static_cast<double>(r));
}

// Sufficient statistics of the pair table: sum_r c_a c_b - delta_ab c_a,
// sum_r c_a and the pair and particle totals.
struct PairSums {
    std::vector<double> pairs;
    Counts singles;
    double n_pairs = 0.0;
    double n = 0.0;
    std::size_t k = 0;

    explicit PairSums(std::size_t cells) : pairs(cells * cells, 0.0), singles(cells, 0.0), k(cells) {}

    void add(const Counts& c, double sign) {
        double n_r = 0.0;
        for (std::size_t a = 0; a < k; ++a) {
            n_r += c[a];
            singles[a] += sign * c[a];
            for (std::size_t b = 0; b < k; ++b) {
                pairs[a * k + b] += sign * (c[a] * c[b] - (a == b ? c[a] : 0.0));
            }
        }
        n += sign * n_r;
        n_pairs += sign * n_r * (n_r - 1.0);
    }

    double g2() const {
        double s = 0.0;
        for (std::size_t a = 0; a < k; ++a) {
            for (std::size_t b = 0; b < k; ++b) {
                s += std::abs(pairs[a * k + b] / n_pairs - singles[a] / n * singles[b] / n);
            }
        }
        return s;
    }
};

std::pair<double, double> g2_with_error(const std::vector<Counts>& replicas, std::size_t cells) {
    PairSums all(cells);
    for (const auto& c : replicas) all.add(c, 1.0);
    const double g2 = all.g2();
    if (replicas.size() < 3) return {g2, 0.0};
    std::vector<double> loo(replicas.size());
    for (std::size_t r = 0; r < replicas.size(); ++r) {
        PairSums s = all;
        s.add(replicas[r], -1.0);
        loo[r] = s.g2();
    }
    return {g2, jackknife_error(loo)};
}

double l1(const Counts& counts, double total, const std::vector<double>& ref) {
    double d = 0.0;
    for (std::size_t k = 0; k < counts.size(); ++k) d += std::abs(counts[k] / total - ref[k]);
    return d;
}

std::size_t draw_category(const std::vector<double>& cdf, Rng& rng) {
    const double u = uniform01(rng) * cdf.back();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

std::vector<double> cumulative(const std::vector<double>& probs) {
    std::vector<double> cdf(probs.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        if (!(probs[k] >= 0.0)) throw std::invalid_argument("probabilities must be non-negative");
        acc += probs[k];
        cdf[k] = acc;
    }
    if (!(acc > 0.0)) throw std::invalid_argument("probabilities sum to zero");
    return cdf;
}

} // namespace

EmpiricalMarginals empirical_marginals(std::span<const SystemState<1>> snapshots, const MarginalGrid& grid) {
    if (snapshots.empty()) throw std::invalid_argument("empirical_marginals: empty snapshot set");
    const double t0 = snapshots.front().time;
    for (const auto& s : snapshots) {
        if (s.size() < 2) throw std::invalid_argument("empirical_marginals: F2 needs two particles per replica");
        if (std::abs(s.time - t0) > 1e-12 * std::max(1.0, std::abs(t0))) {
            throw std::invalid_argument("empirical_marginals: snapshots at different times");
        }
    }
    EmpiricalMarginals out;
    out.f1 = PhaseHistogram(grid.q, grid.p);
    out.f2 = PairHistogram(grid.pair_q, grid.pair_p);
    const std::size_t k = out.f2.cells();
    std::vector<Counts> coarse;
    coarse.reserve(snapshots.size());
    for (const auto& s : snapshots) {
        Counts c(k, 0.0);
        for (const auto& x : s.particles) {
            out.f1.add(x.q[0], x.p[0]);
            c[out.f2.cell(x.q[0], x.p[0])] += 1.0;
        }
        for (std::size_t a = 0; a < k; ++a) {
            for (std::size_t b = 0; b < k; ++b) out.f2.at(a, b) += c[a] * c[b] - (a == b ? c[a] : 0.0);
        }
        coarse.push_back(std::move(c));
    }
    std::tie(out.g2, out.g2_err) = g2_with_error(coarse, k);
    return out;
}

FloorEstimate g2_iid_floor(const std::vector<double>& probs, const std::vector<std::size_t>& replica_sizes,
                           std::size_t repeats, std::uint64_t seed) {
    if (repeats < 2) throw std::invalid_argument("floor needs at least two repeats");
    const auto cdf = cumulative(probs);
    std::vector<double> values(repeats);
    for (std::size_t m = 0; m < repeats; ++m) {
        PairSums sums(probs.size());
        for (std::size_t r = 0; r < replica_sizes.size(); ++r) {
            Rng rng = make_rng(seed, {0x6F, m, r});
            Counts c(probs.size(), 0.0);
            for (std::size_t i = 0; i < replica_sizes[r]; ++i) c[draw_category(cdf, rng)] += 1.0;
            sums.add(c, 1.0);
        }
        values[m] = sums.g2();
    }
    const auto s = sample_stats(values);
    return {s.mean, s.stderr_ * std::sqrt(static_cast<double>(repeats))};
}

ChaosReport bg_study(const BgStudyConfig& config) {
    if (config.sigma_list.empty()) throw std::invalid_argument("bg_study: sigma_list is empty");
    if (config.t_list.empty()) throw std::invalid_argument("bg_study: t_list is empty");
    if (config.n_particles < 2) throw std::invalid_argument("bg_study: need at least two particles");
    if (config.replicas < 2) throw std::invalid_argument("bg_study: need at least two replicas");
    if (!(config.number_density > 0.0) || !(config.temperature > 0.0)) {
        throw std::invalid_argument("bg_study: number density and temperature must be > 0");
    }
    const double length = static_cast<double>(config.n_particles) / config.number_density;
    for (double s : config.sigma_list) {
        if (!(s > 0.0)) throw std::invalid_argument("bg_study: sigma must be > 0");
        if (!(static_cast<double>(config.n_particles) * s / length < 0.2)) {
            std::ostringstream msg;
            msg << "bg_study: sigma=" << s << " leaves the dilute regime (N sigma / L = "
                << static_cast<double>(config.n_particles) * s / length << " >= 0.2)";
            throw std::invalid_argument(msg.str());
        }
    }
    std::vector<double> times = config.t_list;
    for (double t : times) {
        if (!(t >= 0.0)) throw std::invalid_argument("bg_study: times must be >= 0");
    }
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());

    const Inelasticity eps(config.eps);
    MarginalGrid grid = config.grid;
    grid.q = Grid1D(0.0, length, config.grid.q.bins);
    grid.pair_q = Grid1D(0.0, length, config.grid.pair_q.bins);

    ChaosReport report;
    report.config = config;
    report.length = length;

    // one reference of the limit equation, shared by every sigma
    const auto f1_0 = maxwellian_velocity_density<1>(config.number_density, config.temperature, length);
    LimitEquationConfig lc;
    lc.dsmc.samples = config.dsmc_samples;
    lc.dsmc.cells = config.dsmc_cells ? config.dsmc_cells : std::max<std::size_t>(1, static_cast<std::size_t>(length * config.number_density));
    lc.dsmc.seed = derive_seed(config.seed, {0xD5});
    lc.dsmc.threads = config.threads;
    lc.snapshot_times = times;
    lc.q_grid = grid.q;
    lc.p_grid = grid.p;
    const auto reference = solve_limit_equation(f1_0, times.back(), eps, lc);
    auto reference_at = [&](double t) -> std::size_t {
        for (std::size_t k = 0; k < reference.times.size(); ++k) {
            if (reference.times[k] == t) return k;
        }
        throw std::logic_error("bg_study: reference snapshot missing");
    };

    const auto law = maxwellian_uniform<1>(length, config.temperature);
    const Domain box = Domain::periodic(length);
    const std::size_t fine_bins = static_cast<std::size_t>(grid.q.bins) * grid.p.bins;
    const PairHistogram coarse_layout(grid.pair_q, grid.pair_p);
    const std::size_t coarse_bins = coarse_layout.cells();

    struct ReplicaResult {
        std::vector<Counts> fine;   // per time
        std::vector<Counts> coarse; // per time
        std::vector<double> energy; // per particle, per time
        std::vector<std::size_t> collisions; // up to each time
    };

    for (std::size_t si = 0; si < config.sigma_list.size(); ++si) {
        const double sigma = config.sigma_list[si];
        std::vector<ReplicaResult> results(config.replicas);
        parallel_for(config.replicas, config.threads, [&](std::size_t r) {
            // common random numbers across sigma
            Rng rng = make_rng(config.seed, {0xB6, r});
            auto init = sample_chaotic_state<1>(config.n_particles, law, sigma, eps, box, rng);
            EventDrivenSimulator<1> sim(std::move(init.state));
            auto& res = results[r];
            for (double t : times) {
                sim.advance(t - sim.time());
                const auto s = sim.state();
                Counts fine(fine_bins, 0.0), coarse(coarse_bins, 0.0);
                double e = 0.0;
                for (const auto& x : s.particles) {
                    fine[static_cast<std::size_t>(grid.q.index(x.q[0])) * grid.p.bins + grid.p.index(x.p[0])] += 1.0;
                    coarse[coarse_layout.cell(x.q[0], x.p[0])] += 1.0;
                    e += 0.5 * x.p[0] * x.p[0];
                }
                res.fine.push_back(std::move(fine));
                res.coarse.push_back(std::move(coarse));
                res.energy.push_back(e / static_cast<double>(s.size()));
                res.collisions.push_back(sim.collisions());
            }
        });

        for (std::size_t ti = 0; ti < times.size(); ++ti) {
            const double t = times[ti];
            const std::size_t ref = reference_at(t);
            const auto ref_probs = reference.histograms[ref].normalized();

            Counts pooled(fine_bins, 0.0);
            std::vector<Counts> coarse;
            std::vector<double> energies;
            double collisions = 0.0;
            for (const auto& res : results) {
                collisions += static_cast<double>(res.collisions[ti]);
                for (std::size_t k = 0; k < fine_bins; ++k) pooled[k] += res.fine[ti][k];
                coarse.push_back(res.coarse[ti]);
                energies.push_back(res.energy[ti]);
            }
            const double total = static_cast<double>(config.replicas * config.n_particles);
            const double per_replica = static_cast<double>(config.n_particles);

            ChaosPoint pt;
            pt.sigma = sigma;
            pt.t = t;
            pt.d1 = l1(pooled, total, ref_probs);
            std::vector<double> loo(config.replicas);
            for (std::size_t r = 0; r < config.replicas; ++r) {
                Counts c = pooled;
                for (std::size_t k = 0; k < fine_bins; ++k) c[k] -= results[r].fine[ti][k];
                loo[r] = l1(c, total - per_replica, ref_probs);
            }
            pt.d1_err = jackknife_error(loo);

            // same-size sampling discrepancy against the reference itself
            {
                const auto cdf = cumulative(ref_probs);
                std::vector<double> d(config.floor_repeats);
                for (std::size_t m = 0; m < config.floor_repeats; ++m) {
                    Rng rng = make_rng(config.seed, {0xD1, si, ti, m});
                    Counts c(fine_bins, 0.0);
                    for (std::size_t i = 0; i < config.replicas * config.n_particles; ++i) c[draw_category(cdf, rng)] += 1.0;
                    d[m] = l1(c, total, ref_probs);
                }
                pt.d1_floor = sample_stats(d).mean;
            }

            std::tie(pt.g2, pt.g2_err) = g2_with_error(coarse, coarse_bins);
            Counts coarse_pooled(coarse_bins, 0.0);
            for (const auto& c : coarse) {
                for (std::size_t k = 0; k < coarse_bins; ++k) coarse_pooled[k] += c[k] / total;
            }
            const auto floor = g2_iid_floor(coarse_pooled, std::vector<std::size_t>(config.replicas, config.n_particles),
                                            config.floor_repeats, derive_seed(config.seed, {0x62, si, ti}));
            pt.g2_floor = floor.mean;
            pt.g2_floor_sd = floor.sd;

            const auto es = sample_stats(energies);
            pt.energy_particle = es.mean;
            pt.energy_particle_err = es.stderr_;
            pt.energy_dsmc = reference.moments[ref].energy / reference.moments[ref].mass;
            pt.collisions_per_particle = collisions / total;
            report.per_sigma.push_back(pt);
        }
    }

    // verdicts: sigma in decreasing order, at each time
    std::vector<std::size_t> order(config.sigma_list.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return config.sigma_list[a] > config.sigma_list[b]; });
    auto point = [&](std::size_t si, std::size_t ti) -> const ChaosPoint& {
        return report.per_sigma[si * times.size() + ti];
    };
    std::ostringstream detail;
    bool trend = true, chaos = true, energy = true;
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        for (std::size_t k = 1; k < order.size(); ++k) {
            const auto& big = point(order[k - 1], ti);
            const auto& small = point(order[k], ti);
            const double tol = std::hypot(big.d1_err, small.d1_err);
            if (small.d1 > big.d1 + tol) {
                trend = false;
                detail << "D1 rises from sigma=" << big.sigma << " to " << small.sigma << " at t=" << big.t << "; ";
            }
        }
        const auto& smallest = point(order.back(), ti);
        if (!(smallest.g2 <= 2.0 * smallest.g2_floor)) {
            chaos = false;
            detail << "G2=" << smallest.g2 << " exceeds twice the floor " << smallest.g2_floor << " at t=" << smallest.t
                   << "; ";
        }
        const double rel = std::abs(smallest.energy_particle - smallest.energy_dsmc) / smallest.energy_dsmc;
        if (!(rel <= config.energy_tolerance)) {
            energy = false;
            detail << "energy differs by " << rel << " at t=" << smallest.t << "; ";
        }
    }
    report.verdicts = {trend, chaos, energy, detail.str()};
    return report;
}

} // namespace granular
