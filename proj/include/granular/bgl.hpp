#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "granular/core.hpp"
#include "granular/histogram.hpp"

namespace granular {

/// Fine grid for F1 and the coarse (q, p) cells whose ordered pairs carry F2.
struct MarginalGrid {
    Grid1D q{0.0, 1.0, 4};
    Grid1D p{-5.0, 5.0, 16};
    Grid1D pair_q{0.0, 1.0, 2};
    Grid1D pair_p{-3.0, 3.0, 4};
};

/// Ordered-pair counts over coarse cells, a K x K table with K = qbins * pbins.
class PairHistogram {
public:
    PairHistogram() = default;
    PairHistogram(Grid1D q, Grid1D p);

    std::size_t cell(double q, double p) const;
    std::size_t cells() const { return k_; }
    double& at(std::size_t a, std::size_t b) { return table_[a * k_ + b]; }
    double at(std::size_t a, std::size_t b) const { return table_[a * k_ + b]; }
    double total() const;
    const Grid1D& q_grid() const { return q_; }
    const Grid1D& p_grid() const { return p_; }

private:
    Grid1D q_;
    Grid1D p_;
    std::size_t k_ = 0;
    std::vector<double> table_;
};

struct EmpiricalMarginals {
    PhaseHistogram f1;
    PairHistogram f2;
    /// L1 norm of F2 - F1 (x) F1 on the coarse cells, both as probabilities.
    double g2 = 0.0;
    /// Jackknife error over replicas (0 for a single replica).
    double g2_err = 0.0;
};

/// F1 pooled over all replicas, F2 over ordered pairs within each replica.
/// Throws std::invalid_argument on an empty set, replicas with fewer than two
/// particles, or snapshots at different times.
EmpiricalMarginals empirical_marginals(std::span<const SystemState<1>> snapshots, const MarginalGrid& grid);

/// Mean and spread of the G2 norm for i.i.d. replicas of the given sizes drawn
/// from the coarse-cell law `probs`.
struct FloorEstimate {
    double mean = 0.0;
    double sd = 0.0;
};

FloorEstimate g2_iid_floor(const std::vector<double>& probs, const std::vector<std::size_t>& replica_sizes,
                           std::size_t repeats, std::uint64_t seed);

struct BgStudyConfig {
    std::vector<double> sigma_list{0.04, 0.02, 0.01};
    std::size_t n_particles = 10000;
    double number_density = 1.0; // L = N / n; the mean free path is 1 / n
    double eps = 0.25;
    double temperature = 1.0;
    std::vector<double> t_list{1.0};
    std::size_t replicas = 64;
    std::uint64_t seed = 0;
    MarginalGrid grid; // q ranges are rescaled to [0, L)
    std::size_t dsmc_samples = 1000000;
    std::size_t dsmc_cells = 0; // 0: one cell per mean free path
    std::size_t floor_repeats = 32;
    /// Relative energy tolerance against the DSMC curve at the smallest sigma.
    double energy_tolerance = 0.05;
    unsigned threads = 1;
};

struct ChaosPoint {
    double sigma = 0.0;
    double t = 0.0;
    double d1 = 0.0;
    double d1_err = 0.0;
    double d1_floor = 0.0;
    double g2 = 0.0;
    double g2_err = 0.0;
    double g2_floor = 0.0;
    double g2_floor_sd = 0.0;
    double energy_particle = 0.0; // per particle, ensemble mean
    double energy_particle_err = 0.0;
    double energy_dsmc = 0.0; // per unit mass
    double collisions_per_particle = 0.0;
};

struct ChaosVerdicts {
    bool d1_nonincreasing = false;
    bool g2_at_floor = false;
    bool energy_consistent = false;
    std::string detail;
};

struct ChaosReport {
    BgStudyConfig config;
    double length = 0.0;
    std::vector<ChaosPoint> per_sigma; // sigma-major, then t
    ChaosVerdicts verdicts;
};

/// Event-driven ensembles at each sigma against one DSMC reference of the
/// limit equation. Throws std::invalid_argument outside the dilute regime
/// N sigma / L < 0.2.
ChaosReport bg_study(const BgStudyConfig& config);

} // namespace granular
