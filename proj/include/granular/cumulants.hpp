#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "granular/dynamics.hpp"

namespace granular {

/// One set partition of {0, 1, ..., n}. Element 0 stands for the cluster
/// {Y \ Z}, which always moves as a single element.
struct PartitionTerm {
    std::vector<std::vector<int>> blocks;
    long long coefficient = 0; // (-1)^{|P|-1} (|P|-1)!
};

constexpr int kMaxCumulantOrder = 6;

/// All partitions of the (1+n)-element set behind the cumulant of order 1+n.
std::vector<PartitionTerm> enumerate_cumulant_terms(int n);

/// Parameters shared by every flow the cumulant operators compose.
struct FlowParams {
    double sigma = 0.0;
    Inelasticity eps;
    Domain domain = Domain::unbounded();
    SimulatorOptions options;
};

/// Pathwise evaluation of cumulants of the hard-sphere semigroups on a fixed
/// list of phase points. Evolved sub-systems are cached by particle subset,
/// so several cumulants over the same points share trajectories.
template <int Dim>
class CumulantEvaluator {
public:
    CumulantEvaluator(std::vector<PhasePoint<Dim>> points, FlowParams flow, double t);

    /// A_{1+|others|}(t, {cluster}, others) b, with b a function of all the
    /// points in `cluster` and `others` listed in that order.
    double apply(const std::vector<int>& cluster, const std::vector<int>& others,
                 const Observable<Dim>& b);

    std::size_t trajectories() const { return cache_.size(); }

private:
    // evolved points of a subset; nullopt if the subset starts forbidden
    const std::optional<std::vector<PhasePoint<Dim>>>& evolved(std::uint32_t mask);

    std::vector<PhasePoint<Dim>> points_;
    FlowParams flow_;
    double t_;
    std::map<std::uint32_t, std::optional<std::vector<PhasePoint<Dim>>>> cache_;
};

/// (A_{1+n}(t) b)(x_1, ..., x_{1+n}) with every element a single particle.
template <int Dim>
double apply_cumulant(int n, double t, const Observable<Dim>& b,
                      std::span<const PhasePoint<Dim>> points, const FlowParams& flow);

/// Observable that sums b1 over all particles it is handed.
template <int Dim>
Observable<Dim> additive(std::function<double(const PhasePoint<Dim>&)> b1);

/// Terms of the solution expansion of B_s(t): one per subset Z of Y with
/// cumulant order 1 + |Z| acting on B^0_{s-|Z|}(Y \ Z).
struct ExpansionTerm {
    std::vector<int> rest;   // Y \ Z
    std::vector<int> subset; // Z
};

struct MarginalObservableExpansion {
    int s = 0;
    std::vector<ExpansionTerm> terms;
};

MarginalObservableExpansion marginal_observable_expansion(int s);

/// B_s(t, x_1..x_s) for s in {1, 2}. `initial[k]` is B^0_{k+1}; missing or
/// empty entries count as zero.
template <int Dim>
double evolve_marginal_observable(int s, const std::vector<Observable<Dim>>& initial, double t,
                                  std::span<const PhasePoint<Dim>> points, const FlowParams& flow);

/// Additive-type case: A_s(t, 1..s) sum_j b1(x_j).
template <int Dim>
double evolve_additive_observable(const std::function<double(const PhasePoint<Dim>&)>& b1, double t,
                                  std::span<const PhasePoint<Dim>> points, const FlowParams& flow);

// ---------------------------------------------------------------------------
// Scattering cumulants
// ---------------------------------------------------------------------------

/// coefficient * weight * f(points)
template <int Dim>
struct MappedTerm {
    double coefficient = 1.0;
    double weight = 1.0;
    std::vector<PhasePoint<Dim>> points;
};

/// A linear functional on functions of phase points, written as a finite
/// sum of point evaluations.
template <int Dim>
struct PointFunctional {
    std::vector<MappedTerm<Dim>> terms;

    double apply(const Observable<Dim>& f) const;
};

/// Adjoint flow of a state for time t (inverse collisions, reversed motion)
/// followed by free streaming forward for t, with the phase-volume factor
/// (1-2eps)^{-2k}. Returns nullopt when the points are forbidden.
template <int Dim>
std::optional<MappedTerm<Dim>> scattering_map(std::span<const PhasePoint<Dim>> points, double t,
                                              const FlowParams& flow);

/// Scattering cumulant of order 1+n (n in {0, 1}) acting on the given points.
/// For n = 0 all points form the cluster {Y}; for n = 1 the last point is
/// the extra particle s+1.
template <int Dim>
PointFunctional<Dim> scattering_cumulant(int n, double t, std::span<const PhasePoint<Dim>> points,
                                         const FlowParams& flow);

/// Second generating operator V_2(t, {Y}, s+1) = A^_2(t,{Y},s+1) -
/// A^_1(t,{Y}) sum_i A^_2(t, i, s+1), as a composed term list. The last
/// point is particle s+1.
template <int Dim>
PointFunctional<Dim> generating_operator_v2(double t, std::span<const PhasePoint<Dim>> points,
                                            const FlowParams& flow);

struct McEstimate {
    double estimate = 0.0;
    double stderr_ = 0.0;
    std::size_t n_samples = 0;
};

struct MarginalFunctionalOptions {
    int order = 0;
    std::size_t mc_samples = 0;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

/// F_2(t, x1, x2 | F_1(t)) truncated at `order` (0 or 1). `f1` is F_1(t):
/// its density is evaluated on mapped points and its sampler draws x_3.
template <int Dim>
McEstimate marginal_functional_F2(double t, const PhaseDensity<Dim>& f1, const PhasePoint<Dim>& x1,
                                  const PhasePoint<Dim>& x2, const FlowParams& flow,
                                  const MarginalFunctionalOptions& options = {});

// ---------------------------------------------------------------------------
// Duality harness
// ---------------------------------------------------------------------------

struct DualityOptions {
    std::size_t n_particles = 2;
    std::size_t mc_samples = 100000;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    /// Also estimate <B(0)|F(t)> by reweighting the adjoint flow.
    bool adjoint_route = false;
};

struct DualityResult {
    double residual = 0.0;
    double stderr_ = 0.0;
    /// |residual| / sqrt(stderr^2 + floor^2) with floor = 1e-12 * scale
    double z = 0.0;
    double observable_side = 0.0; // <B(t)|F(0)> via the cumulant expansion
    double state_side = 0.0;      // <B(0)|F(t)> via forward simulation
    double initial_value = 0.0;   // <B(0)|F(0)>
    double scale = 0.0;
    std::size_t n_samples = 0;
    // adjoint-reweighting route, when requested
    double adjoint_estimate = 0.0;
    double adjoint_stderr = 0.0;
    double adjoint_z = 0.0;
};

/// Monte Carlo estimate of <B(t)|F(0)> - <B(0)|F(t)> for an additive
/// observable and chaotic initial data of n_particles in {2, 3}.
template <int Dim>
DualityResult duality_residual(const std::function<double(const PhasePoint<Dim>&)>& b1,
                               const PhaseDensity<Dim>& f1, double t, const FlowParams& flow,
                               const DualityOptions& options);

} // namespace granular
