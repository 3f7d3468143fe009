#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "granular/random.hpp"

namespace granular {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Raised when a computation hits one of the runtime guards (event storm,
/// dt guard, rejection budget, ...). The CLI maps these to exit code 3.
class GuardAbort : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidCollision : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class SamplingFailure : public GuardAbort {
public:
    SamplingFailure(const std::string& what, double acceptance_rate)
        : GuardAbort(what), acceptance_rate_(acceptance_rate) {}
    double acceptance_rate() const { return acceptance_rate_; }

private:
    double acceptance_rate_;
};

class NotImplemented : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

template <typename Scalar, int Dim>
using VectorN = Eigen::Matrix<Scalar, Dim, 1>;

template <int Dim>
using Vector = VectorN<double, Dim>;

/// Inelasticity parameter epsilon in [0, 1/2). Restitution e = 1 - 2 epsilon.
class Inelasticity {
public:
    Inelasticity() = default;
    explicit Inelasticity(double epsilon);

    double epsilon() const { return epsilon_; }
    double restitution() const { return 1.0 - 2.0 * epsilon_; }
    bool elastic() const { return epsilon_ == 0.0; }

private:
    double epsilon_ = 0.0;
};

template <typename Scalar, int Dim>
class UnitNormalN {
public:
    explicit UnitNormalN(const VectorN<Scalar, Dim>& eta) : eta_(eta) {
        using std::abs;
        if (!(abs(eta_.norm() - Scalar(1)) <= Scalar(1e-12))) {
            throw std::invalid_argument("unit normal must have |eta| = 1");
        }
    }
    const VectorN<Scalar, Dim>& vector() const { return eta_; }
    UnitNormalN operator-() const { return UnitNormalN(-eta_, 0); }

private:
    UnitNormalN(const VectorN<Scalar, Dim>& eta, int) : eta_(eta) {}
    VectorN<Scalar, Dim> eta_;
};

template <int Dim>
using UnitNormal = UnitNormalN<double, Dim>;

template <int Dim>
struct PhasePoint {
    Vector<Dim> q = Vector<Dim>::Zero();
    Vector<Dim> p = Vector<Dim>::Zero();
};

/// Either the whole of R^d or a periodic cube of side `length`.
class Domain {
public:
    static Domain unbounded() { return Domain(); }
    static Domain periodic(double length);

    bool is_periodic() const { return length_.has_value(); }
    double length() const;

    double wrap(double x) const {
        if (!length_) return x;
        double y = x - *length_ * std::floor(x / *length_);
        return y >= *length_ ? 0.0 : y;
    }

    template <int Dim>
    Vector<Dim> wrap(const Vector<Dim>& q) const {
        Vector<Dim> out;
        for (int k = 0; k < Dim; ++k) out[k] = wrap(q[k]);
        return out;
    }

    /// Minimum-image displacement qa - qb.
    template <int Dim>
    Vector<Dim> displacement(const Vector<Dim>& qa, const Vector<Dim>& qb) const {
        Vector<Dim> d = qa - qb;
        if (length_) {
            for (int k = 0; k < Dim; ++k) d[k] -= *length_ * std::round(d[k] / *length_);
        }
        return d;
    }

private:
    std::optional<double> length_;
};

template <int Dim>
struct SystemState {
    std::vector<PhasePoint<Dim>> particles;
    double sigma = 0.0;
    Inelasticity eps;
    Domain domain;
    double time = 0.0;

    std::size_t size() const { return particles.size(); }
};

struct CollisionEvent {
    double t = 0.0;
    std::size_t i = 0;
    std::size_t j = 0;
    /// Contact normal, unit vector from particle j's centre to particle i's.
    /// Stored with three slots; only the first `dim` are meaningful.
    Eigen::Vector3d eta = Eigen::Vector3d::Zero();
    int dim = 1;
    /// Approach speed -<eta, p_i - p_j> at impact (> 0).
    double g_n = 0.0;
    /// Kinetic energy change, -eps (1 - eps) g_n^2.
    double dE = 0.0;
};

// ---------------------------------------------------------------------------
// Collision algebra
// ---------------------------------------------------------------------------

/// Post-collision momenta for an approaching pair, <eta, p1 - p2> >= 0.
/// The normal components become the convex combinations
///   u1* = eps u1 + (1 - eps) u2,   u2* = (1 - eps) u1 + eps u2,
/// which is p1* = p1 - (1 - eps) eta <eta, p1 - p2> written so that the
/// elastic 1D case is an exact swap.
template <typename Scalar, int Dim>
std::pair<VectorN<Scalar, Dim>, VectorN<Scalar, Dim>>
collide(const VectorN<Scalar, Dim>& p1, const VectorN<Scalar, Dim>& p2,
        const UnitNormalN<Scalar, Dim>& eta, Inelasticity eps) {
    const auto& n = eta.vector();
    const Scalar u1 = n.dot(p1);
    const Scalar u2 = n.dot(p2);
    if (u1 - u2 < Scalar(0)) {
        throw InvalidCollision("collide: pair is separating, <eta, p1 - p2> < 0");
    }
    const Scalar e = Scalar(eps.epsilon());
    const Scalar keep = Scalar(1) - e;
    if constexpr (Dim == 1) {
        return {VectorN<Scalar, 1>(e * p1[0] + keep * p2[0]),
                VectorN<Scalar, 1>(keep * p1[0] + e * p2[0])};
    } else {
        const Scalar u1s = e * u1 + keep * u2;
        const Scalar u2s = keep * u1 + e * u2;
        return {p1 + n * (u1s - u1), p2 + n * (u2s - u2)};
    }
}

/// Pre-collision momenta: the preimage of `collide`. Even in eta.
template <typename Scalar, int Dim>
std::pair<VectorN<Scalar, Dim>, VectorN<Scalar, Dim>>
precollide(const VectorN<Scalar, Dim>& p1, const VectorN<Scalar, Dim>& p2,
           const UnitNormalN<Scalar, Dim>& eta, Inelasticity eps) {
    const auto& n = eta.vector();
    const Scalar e = Scalar(eps.epsilon());
    const Scalar c = (Scalar(1) - e) / (Scalar(1) - Scalar(2) * e);
    if constexpr (Dim == 1) {
        return {VectorN<Scalar, 1>((Scalar(1) - c) * p1[0] + c * p2[0]),
                VectorN<Scalar, 1>(c * p1[0] + (Scalar(1) - c) * p2[0])};
    } else {
        const Scalar shift = c * n.dot(p1 - p2);
        return {p1 - n * shift, p2 + n * shift};
    }
}

/// Kinetic energy change of `collide`, -eps (1 - eps) <eta, p1 - p2>^2.
template <typename Scalar, int Dim>
Scalar dissipation(const VectorN<Scalar, Dim>& p1, const VectorN<Scalar, Dim>& p2,
                   const UnitNormalN<Scalar, Dim>& eta, Inelasticity eps) {
    const Scalar g = eta.vector().dot(p1 - p2);
    if (g < Scalar(0)) {
        throw InvalidCollision("dissipation: pair is separating, <eta, p1 - p2> < 0");
    }
    const Scalar e = Scalar(eps.epsilon());
    return -e * (Scalar(1) - e) * g * g;
}

/// |det d(p1*, p2*)/d(p1, p2)| of the collision map; only the two normal
/// components mix, so the value is 1 - 2 eps in every dimension.
double collision_jacobian(Inelasticity eps, int dim);

// ---------------------------------------------------------------------------
// State helpers
// ---------------------------------------------------------------------------

template <int Dim>
double kinetic_energy(std::span<const PhasePoint<Dim>> particles) {
    double e = 0.0;
    for (const auto& x : particles) e += 0.5 * x.p.squaredNorm();
    return e;
}

template <int Dim>
double kinetic_energy(const SystemState<Dim>& s) {
    return kinetic_energy<Dim>(std::span<const PhasePoint<Dim>>(s.particles));
}

template <int Dim>
Vector<Dim> total_momentum(const SystemState<Dim>& s) {
    Vector<Dim> m = Vector<Dim>::Zero();
    for (const auto& x : s.particles) m += x.p;
    return m;
}

/// Smallest pair centre distance (minimum image), +inf for fewer than two particles.
template <int Dim>
double min_separation(std::span<const PhasePoint<Dim>> particles, const Domain& domain);

/// True iff |q_i - q_j| >= sigma for all pairs.
template <int Dim>
bool is_allowed(std::span<const PhasePoint<Dim>> particles, double sigma, const Domain& domain);

template <int Dim>
bool is_allowed(const SystemState<Dim>& s) {
    return is_allowed<Dim>(std::span<const PhasePoint<Dim>>(s.particles), s.sigma, s.domain);
}

/// Throws std::invalid_argument if the state violates its invariants.
template <int Dim>
void validate(const SystemState<Dim>& s);

// ---------------------------------------------------------------------------
// One-particle laws and chaotic initial states
// ---------------------------------------------------------------------------

/// A one-particle phase-space density together with an exact sampler.
/// `density` integrates to `mass`; `sample` draws from density / mass.
template <int Dim>
struct PhaseDensity {
    std::function<PhasePoint<Dim>(Rng&)> sample;
    std::function<double(const PhasePoint<Dim>&)> density;
    double mass = 1.0;
    /// Set when positions are uniform on the periodic box [0, box)^d and
    /// independent of momenta; draws a momentum only.
    std::function<Vector<Dim>(Rng&)> momentum;
    std::optional<double> box;
};

/// Positions uniform on the periodic box [0, length)^d, momenta Maxwellian
/// with the given temperature and mean. `mass` scales the density only.
template <int Dim>
PhaseDensity<Dim> maxwellian_uniform(double length, double temperature,
                                     Vector<Dim> mean = Vector<Dim>::Zero(), double mass = 1.0);

/// Positions Maxwellian-distributed (std `spread`) around `centre`, momenta
/// Maxwellian. For unbounded-domain few-body work.
template <int Dim>
PhaseDensity<Dim> gaussian_blob(const Vector<Dim>& centre, double spread, double temperature,
                                double mass = 1.0);

struct ChaoticSamplerOptions {
    std::size_t max_attempts = 100000;
    /// Use the exact hard-rod gap construction in 1D periodic boxes when the
    /// law has uniform positions. It samples the same conditioned measure as
    /// joint rejection but never rejects.
    bool exact_hard_rod_path = true;
};

template <int Dim>
struct ChaoticSample {
    SystemState<Dim> state;
    std::size_t attempts = 0;
};

/// n i.i.d. draws from `law` conditioned jointly on the allowed set.
template <int Dim>
ChaoticSample<Dim> sample_chaotic_state(std::size_t n, const PhaseDensity<Dim>& law, double sigma,
                                        Inelasticity eps, const Domain& domain, Rng& rng,
                                        const ChaoticSamplerOptions& options = {});

} // namespace granular
