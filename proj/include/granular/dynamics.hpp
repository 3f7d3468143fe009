#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "granular/core.hpp"

namespace granular {

/// Raised when the collision rate of a particle exceeds the configured limit,
/// the usual signature of inelastic collapse.
class EventStorm : public GuardAbort {
public:
    using GuardAbort::GuardAbort;
};

/// Raised when a collision leaves the pair closer than sigma (1 - 1e-9).
class OverlapError : public GuardAbort {
public:
    using GuardAbort::GuardAbort;
};

/// Raised when the adjoint flow accumulates infinitely many inverse
/// collisions in finite time (energy grows geometrically). The state then
/// has no preimage under the forward flow.
class AdjointBlowUp : public GuardAbort {
public:
    using GuardAbort::GuardAbort;
};

enum class NeighborMode {
    automatic, ///< 1D: sorted adjacency; 3D periodic: cell lists; otherwise all pairs
    all_pairs, ///< O(N) re-prediction per event; reference mode for small N
};

enum class FlowDirection {
    forward,  ///< S(t): free flight plus `collide`
    backward, ///< adjoint flow: motion with reversed time plus `precollide`
};

struct SimulatorOptions {
    NeighborMode neighbors = NeighborMode::automatic;
    FlowDirection direction = FlowDirection::forward;
    /// Abort when a particle collides more than this many times per unit time
    /// (measured over at least one time unit).
    double max_event_rate = 1e5;
    /// Optional TC-model regularisation: collisions with approach speed below
    /// the threshold are treated as elastic. Off by default.
    std::optional<double> tc_threshold;
    /// Backward flow only: abort with AdjointBlowUp once the kinetic energy
    /// exceeds this multiple of its initial value.
    double adjoint_energy_cap = 1e8;
};

template <int Dim>
struct TrajectoryLog {
    std::vector<CollisionEvent> events;
    std::vector<double> snapshot_times;
    std::vector<SystemState<Dim>> snapshots;
};

/// Exact event-driven dynamics of inelastic hard spheres (hard rods in 1D).
/// Particles carry their own time stamps; positions are advanced lazily.
template <int Dim>
class EventDrivenSimulator {
public:
    explicit EventDrivenSimulator(SystemState<Dim> initial, SimulatorOptions options = {});

    /// Advance by dt >= 0, appending processed collisions to `log`.
    void advance(double dt, TrajectoryLog<Dim>* log = nullptr);

    /// Process exactly `count` further collisions (or stop at `t_limit`).
    /// Leaves the clock at the time of the last processed collision.
    std::size_t run_collisions(std::size_t count, TrajectoryLog<Dim>* log = nullptr,
                               double t_limit = std::numeric_limits<double>::infinity());

    /// Synchronised copy of the state at the current time. Momenta are
    /// reported in the physical orientation for both flow directions.
    SystemState<Dim> state() const;

    /// Appends the current state to the log's snapshot list.
    void snapshot(TrajectoryLog<Dim>& log) const;

    double time() const { return now_; }
    std::size_t collisions() const { return n_collisions_; }
    /// Sum of -dE over processed collisions.
    double dissipated() const { return dissipated_; }
    /// log of the phase-space density factor accumulated along the flow,
    /// -2 k log(1 - 2 eps) after k inelastic collisions. Each collision
    /// contracts phase volume by (1 - 2 eps)^2 in either direction.
    double log_density_factor() const;
    std::size_t inelastic_collisions() const { return n_inelastic_; }

private:
    struct Event {
        double time;
        std::uint32_t a;
        std::uint32_t b;
        std::uint8_t kind; // 0 collision, 1 cell crossing, 2 recheck
        std::uint32_t slot;
        std::uint64_t ca;
        std::uint64_t cb;
        bool operator>(const Event& o) const;
    };
    static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

    Vector<Dim> position_at(std::size_t i, double t) const;
    void sync(std::size_t i, double t);
    bool valid(const Event& e) const;
    void schedule_all();
    void predict_particle(std::size_t i, std::size_t skip = kNone);
    void predict_gap(std::uint32_t slot);
    void predict_pair(std::size_t i, std::size_t j, const Vector<Dim>& shift, bool images);
    void predict_crossing(std::size_t i);
    bool process(const Event& e, TrajectoryLog<Dim>* log);
    bool collide_pair(std::size_t a, std::size_t b, TrajectoryLog<Dim>* log);
    void finish(double t_end);

    SystemState<Dim> meta_; // sigma, eps, domain; particles unused
    SimulatorOptions options_;
    std::vector<Vector<Dim>> q_;
    std::vector<Vector<Dim>> p_;
    std::vector<double> t_;
    std::vector<std::uint64_t> counter_;
    std::vector<std::uint64_t> hits_;
    std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
    double now_ = 0.0;
    double start_ = 0.0;
    std::size_t n_collisions_ = 0;
    std::size_t n_inelastic_ = 0;
    double dissipated_ = 0.0;
    double energy_ = 0.0;
    double energy_limit_ = 0.0;

    // 1D adjacency
    bool adjacency_ = false;
    std::vector<std::uint32_t> order_;
    std::vector<std::uint32_t> rank_;

    // 3D cell lists
    bool cells_ = false;
    int m_ = 0;
    double width_ = 0.0;
    std::vector<std::array<int, 3>> cell_of_;
    std::vector<std::vector<std::uint32_t>> members_;
    int cell_index(const std::array<int, 3>& c) const;
    void remove_from_cell(std::size_t i);
};

/// Earliest time t' > state.time at which particles i and j touch with
/// inward radial velocity, ignoring all other particles. In 1D periodic boxes
/// both gaps are considered; 3D periodic boxes are searched up to `horizon`.
template <int Dim>
std::optional<double> pair_collision_time(const SystemState<Dim>& state, std::size_t i,
                                          std::size_t j,
                                          double horizon = std::numeric_limits<double>::infinity());

/// S(dt) applied to a state.
template <int Dim>
SystemState<Dim> advance(const SystemState<Dim>& state, double dt, TrajectoryLog<Dim>* log = nullptr,
                         const SimulatorOptions& options = {});

/// Backward (adjoint) flow for dt. Returns the state and writes the number
/// of inverse collisions to `collisions` when given.
template <int Dim>
SystemState<Dim> advance_backward(const SystemState<Dim>& state, double dt,
                                  std::size_t* collisions = nullptr,
                                  const SimulatorOptions& options = {});

template <int Dim>
using Observable = std::function<double(std::span<const PhasePoint<Dim>>)>;

/// (S_s(t) b_s)(x): b evaluated at the time-t phase point of the trajectory
/// started at state0; 0 if state0 is a forbidden configuration.
template <int Dim>
double evolve_observable(const Observable<Dim>& b, const SystemState<Dim>& state0, double t,
                         const SimulatorOptions& options = {});

// CSV dumps
template <int Dim>
std::string snapshots_csv(const TrajectoryLog<Dim>& log);
std::string events_csv(std::span<const CollisionEvent> events, int dim);

} // namespace granular
