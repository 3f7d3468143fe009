#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "granular/core.hpp"
#include "granular/histogram.hpp"

namespace granular {

/// One-particle density f(q, p) normalised to number density (mass per unit
/// volume), with a sampler for phase points over a periodic box.
template <int Dim>
struct VelocityDensity {
    std::function<double(const Vector<Dim>&, const Vector<Dim>&)> f;
    /// Draws a phase point from f / (n L^d) on [0, L)^d.
    std::function<PhasePoint<Dim>(Rng&)> sample;
    /// Normalised momentum law of a homogeneous density, when available.
    std::function<Vector<Dim>(Rng&)> sample_momentum;
    std::function<double(const Vector<Dim>&)> momentum_pdf;
    double number_density = 1.0;
    double length = 1.0;
};

/// Spatially uniform Maxwellian with number density n and temperature T.
template <int Dim>
VelocityDensity<Dim> maxwellian_velocity_density(double n, double temperature, double length,
                                                 Vector<Dim> mean = Vector<Dim>::Zero());

template <int Dim>
using PairDensity = std::function<double(const Vector<Dim>& q1, const Vector<Dim>& p1,
                                         const Vector<Dim>& q2, const Vector<Dim>& p2)>;

/// F_2 = F_1 (x) F_1, the leading (Boltzmann-Enskog) closure.
template <int Dim>
PairDensity<Dim> product_closure(const VelocityDensity<Dim>& f1);

struct Estimate {
    double value = 0.0;
    double stderr_ = 0.0;
    std::size_t n_samples = 0;
    /// Mean magnitude of the gain and loss terms; the round-off scale of a
    /// value that cancels exactly.
    double scale = 0.0;
};

struct CollisionIntegralOptions {
    std::size_t mc_budget = 100000;
    std::uint64_t seed = 0;
    /// Order of the collision-integral expansion. Only the leading term is
    /// implemented.
    int order = 0;
    /// Gaussian proposal for p2.
    double proposal_temperature = 1.0;
    unsigned threads = 1;
};

/// Monte Carlo estimate of the gain - loss collision integral at x1 with
/// F_2 given by `f2`; in 3D eta is drawn uniformly on the sphere, in 1D both
/// eta = +-1 are summed.
template <int Dim>
Estimate enskog_collision_integral(const PairDensity<Dim>& f2, const PhasePoint<Dim>& x1,
                                   double sigma, Inelasticity eps, const CollisionIntegralOptions& options = {});

/// 1D collision integral in the two half-line form over P in (0, inf), with
/// gain/loss offsets q1 -+ sigma_hat, integrated by double-exponential
/// quadrature. Returns {value, error estimate}.
std::pair<double, double> enskog_collision_integral_halfline(const PairDensity<1>& f2, const PhasePoint<1>& x1,
                                                             double sigma_hat, Inelasticity eps,
                                                             int order = 0);

struct CollisionMoments {
    Estimate mass;
    Estimate momentum; // first component
    Estimate energy;
};

/// Integrals of (1, p, p^2/2) against the collision integral of a
/// homogeneous density at position q, with p1 and p2 drawn from its
/// momentum law.
template <int Dim>
CollisionMoments collision_integral_moments(const VelocityDensity<Dim>& f1, double sigma, Inelasticity eps,
                                            const CollisionIntegralOptions& options = {});

// ---------------------------------------------------------------------------
// 1D DSMC for the limit equation
// ---------------------------------------------------------------------------

/// Raised when a DSMC step would let per-pair collision probabilities exceed
/// the configured bound.
class DtGuard : public GuardAbort {
public:
    using GuardAbort::GuardAbort;
};

struct DsmcState {
    double length = 1.0;
    std::size_t cells = 64;
    double weight = 1.0; // physical mass per sample
    Inelasticity eps;
    double time = 0.0;
    std::uint64_t step = 0;
    std::uint64_t seed = 0;
    std::vector<double> q;
    std::vector<double> p;

    std::size_t size() const { return q.size(); }
    std::size_t cell_of(double x) const;
    /// Sample indices per cell, each list in increasing index order.
    std::vector<std::vector<std::uint32_t>> cell_members() const;
};

/// The domain length comes from the initial density.
struct DsmcConfig {
    std::size_t cells = 64;
    std::size_t samples = 100000;
    std::uint64_t seed = 0;
    /// Bound on dt n_cell v_max sigma_eff, sigma_eff = 1 in 1D.
    double dt_bound = 0.2;
    unsigned threads = 1;
};

DsmcState dsmc_initialize(const VelocityDensity<1>& f1_0, Inelasticity eps, const DsmcConfig& config);

struct DsmcStepStats {
    std::size_t candidates = 0;
    std::size_t collisions = 0;
    double dissipated = 0.0;
};

/// Streaming then per-cell no-time-counter collisions with null collisions.
DsmcState dsmc_step(DsmcState state, double dt, const DsmcConfig& config = {},
                    DsmcStepStats* stats = nullptr);

/// Largest dt the guard admits for the current cell occupation.
double dsmc_max_stable_dt(const DsmcState& state, double dt_bound = 0.2);

double granular_temperature(const DsmcState& state);

struct Moments {
    double t = 0.0;
    double mass = 0.0;
    double momentum = 0.0;
    double energy = 0.0;
    double temperature = 0.0;
};

Moments dsmc_moments(const DsmcState& state);

struct LimitEquationConfig {
    DsmcConfig dsmc;
    std::vector<double> snapshot_times; // sorted, within [0, t_end]; t_end is always added
    Grid1D q_grid{0.0, 1.0, 1};
    Grid1D p_grid{-5.0, 5.0, 40};
    /// Fraction of the guard limit used for adaptive steps.
    double dt_fraction = 0.5;
    std::optional<double> max_dt;
    bool keep_states = false;
};

struct LimitSolution {
    std::vector<double> times;
    std::vector<PhaseHistogram> histograms;
    std::vector<Moments> moments;
    std::vector<DsmcState> states; // filled when keep_states
    std::size_t steps = 0;
    std::size_t collisions = 0;
};

/// DSMC solution of the 1D limit equation from f1_0 up to t_end.
LimitSolution solve_limit_equation(const VelocityDensity<1>& f1_0, double t_end, Inelasticity eps,
                                   const LimitEquationConfig& config);

PhaseHistogram dsmc_histogram(const DsmcState& state, const Grid1D& q, const Grid1D& p);

/// dT/dt of a homogeneous 1D gas from the energy moment of the collision
/// integral, by 2D binned quadrature over the empirical momentum law:
/// dT/dt = -eps (1 - eps) n <|p - p1|^3>.
double cooling_rate_quadrature(const std::vector<double>& momenta, double number_density, Inelasticity eps,
                               int bins = 400);

std::string moments_csv(const std::vector<Moments>& series);

} // namespace granular
