#include "granular/core.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <sstream>

namespace granular {

Inelasticity::Inelasticity(double epsilon) : epsilon_(epsilon) {
    if (!(epsilon >= 0.0 && epsilon < 0.5)) {
        std::ostringstream msg;
        msg << "inelasticity eps must lie in [0, 0.5), got " << epsilon;
        throw std::invalid_argument(msg.str());
    }
}

Domain Domain::periodic(double length) {
    if (!(length > 0.0) || !std::isfinite(length)) {
        throw std::invalid_argument("periodic domain needs a finite side L > 0");
    }
    Domain d;
    d.length_ = length;
    return d;
}

double Domain::length() const {
    if (!length_) throw std::logic_error("unbounded domain has no length");
    return *length_;
}

double collision_jacobian(Inelasticity eps, int dim) {
    if (dim != 1 && dim != 3) throw std::invalid_argument("dimension must be 1 or 3");
    return 1.0 - 2.0 * eps.epsilon();
}

template <int Dim>
double min_separation(std::span<const PhasePoint<Dim>> particles, const Domain& domain) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < particles.size(); ++i) {
        for (std::size_t j = i + 1; j < particles.size(); ++j) {
            best = std::min(best, domain.displacement<Dim>(particles[i].q, particles[j].q).norm());
        }
    }
    return best;
}

template <int Dim>
bool is_allowed(std::span<const PhasePoint<Dim>> particles, double sigma, const Domain& domain) {
    if constexpr (Dim == 1) {
        // sort once instead of all pairs
        std::vector<double> q;
        q.reserve(particles.size());
        for (const auto& x : particles) q.push_back(domain.wrap(x.q[0]));
        std::sort(q.begin(), q.end());
        for (std::size_t k = 1; k < q.size(); ++k) {
            if (q[k] - q[k - 1] < sigma) return false;
        }
        if (domain.is_periodic() && q.size() >= 2) {
            if (q.front() + domain.length() - q.back() < sigma) return false;
        }
        return true;
    } else {
        return min_separation<Dim>(particles, domain) >= sigma;
    }
}

template <int Dim>
void validate(const SystemState<Dim>& s) {
    if (!(s.sigma > 0.0) || !std::isfinite(s.sigma)) {
        throw std::invalid_argument("sigma must be a positive finite number");
    }
    if (s.domain.is_periodic() && !(s.sigma < 0.5 * s.domain.length())) {
        throw std::invalid_argument("periodic domain requires sigma < L/2");
    }
    if (!(s.time >= 0.0)) throw std::invalid_argument("time must be nonnegative");
    for (const auto& x : s.particles) {
        if (!x.q.allFinite() || !x.p.allFinite()) {
            throw std::invalid_argument("phase point components must be finite");
        }
    }
    if (!is_allowed(s)) throw std::invalid_argument("configuration has overlapping particles");
}

template <int Dim>
PhaseDensity<Dim> maxwellian_uniform(double length, double temperature, Vector<Dim> mean,
                                     double mass) {
    if (!(length > 0.0) || !(temperature > 0.0)) {
        throw std::invalid_argument("maxwellian_uniform needs L > 0 and T > 0");
    }
    const double sd = std::sqrt(temperature);
    const double norm = mass / std::pow(length, Dim) /
                        std::pow(2.0 * std::numbers::pi * temperature, 0.5 * Dim);
    PhaseDensity<Dim> law;
    law.mass = mass;
    law.box = length;
    law.momentum = [sd, mean](Rng& rng) {
        Vector<Dim> p;
        for (int k = 0; k < Dim; ++k) p[k] = mean[k] + sd * standard_normal(rng);
        return p;
    };
    law.sample = [length, momentum = law.momentum](Rng& rng) {
        PhasePoint<Dim> x;
        for (int k = 0; k < Dim; ++k) x.q[k] = length * uniform01(rng);
        x.p = momentum(rng);
        return x;
    };
    law.density = [length, temperature, mean, norm](const PhasePoint<Dim>& x) {
        for (int k = 0; k < Dim; ++k) {
            if (x.q[k] < 0.0 || x.q[k] >= length) return 0.0;
        }
        return norm * std::exp(-0.5 * (x.p - mean).squaredNorm() / temperature);
    };
    return law;
}

template <int Dim>
PhaseDensity<Dim> gaussian_blob(const Vector<Dim>& centre, double spread, double temperature,
                                double mass) {
    if (!(spread > 0.0) || !(temperature > 0.0)) {
        throw std::invalid_argument("gaussian_blob needs spread > 0 and T > 0");
    }
    const double sq = spread;
    const double sp = std::sqrt(temperature);
    const double norm = mass / std::pow(2.0 * std::numbers::pi * sq * sq, 0.5 * Dim) /
                        std::pow(2.0 * std::numbers::pi * temperature, 0.5 * Dim);
    PhaseDensity<Dim> law;
    law.mass = mass;
    law.sample = [centre, sq, sp](Rng& rng) {
        PhasePoint<Dim> x;
        for (int k = 0; k < Dim; ++k) x.q[k] = centre[k] + sq * standard_normal(rng);
        for (int k = 0; k < Dim; ++k) x.p[k] = sp * standard_normal(rng);
        return x;
    };
    law.density = [centre, sq, temperature, norm](const PhasePoint<Dim>& x) {
        return norm * std::exp(-0.5 * (x.q - centre).squaredNorm() / (sq * sq) -
                               0.5 * x.p.squaredNorm() / temperature);
    };
    return law;
}

namespace {

// Uniform measure on allowed configurations of n labelled rods on a circle:
// the left ends, shifted down by k*sigma for the k-th rod in cyclic order,
// are a uniform anchor plus n-1 sorted uniforms on [0, L - n sigma).
std::vector<double> hard_rod_positions(std::size_t n, double sigma, double length, Rng& rng) {
    const double free_length = length - static_cast<double>(n) * sigma;
    std::vector<double> u(n);
    u[0] = 0.0;
    for (std::size_t k = 1; k < n; ++k) u[k] = free_length * uniform01(rng);
    std::sort(u.begin() + 1, u.end());
    const double anchor = length * uniform01(rng);
    std::vector<double> q(n);
    for (std::size_t k = 0; k < n; ++k) {
        double x = anchor + u[k] + static_cast<double>(k) * sigma;
        x -= length * std::floor(x / length);
        q[k] = x >= length ? 0.0 : x;
    }
    std::shuffle(q.begin(), q.end(), rng);
    return q;
}

} // namespace

template <int Dim>
ChaoticSample<Dim> sample_chaotic_state(std::size_t n, const PhaseDensity<Dim>& law, double sigma,
                                        Inelasticity eps, const Domain& domain, Rng& rng,
                                        const ChaoticSamplerOptions& options) {
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
    if (!law.sample) throw std::invalid_argument("one-particle law has no sampler");
    ChaoticSample<Dim> out;
    out.state.sigma = sigma;
    out.state.eps = eps;
    out.state.domain = domain;
    out.state.particles.resize(n);

    if constexpr (Dim == 1) {
        const bool exact = options.exact_hard_rod_path && domain.is_periodic() && law.momentum &&
                           law.box && *law.box == domain.length() && n >= 2;
        if (exact) {
            if (static_cast<double>(n) * sigma >= domain.length()) {
                throw SamplingFailure("no allowed configuration: n * sigma >= L", 0.0);
            }
            const auto q = hard_rod_positions(n, sigma, domain.length(), rng);
            for (std::size_t k = 0; k < n; ++k) {
                out.state.particles[k].q[0] = q[k];
                out.state.particles[k].p = law.momentum(rng);
            }
            out.attempts = 1;
            return out;
        }
    }

    for (std::size_t attempt = 1; attempt <= options.max_attempts; ++attempt) {
        for (auto& x : out.state.particles) {
            x = law.sample(rng);
            if (domain.is_periodic()) x.q = domain.wrap<Dim>(x.q);
        }
        if (n <= 1 ||
            is_allowed<Dim>(std::span<const PhasePoint<Dim>>(out.state.particles), sigma, domain)) {
            out.attempts = attempt;
            return out;
        }
    }
    std::ostringstream msg;
    msg << "chaotic-state rejection budget exhausted after " << options.max_attempts
        << " attempts (acceptance rate 0 observed; n=" << n << ", sigma=" << sigma << ")";
    throw SamplingFailure(msg.str(), 0.0);
}

#define GRANULAR_INSTANTIATE_CORE(D)                                                             \
    template double min_separation<D>(std::span<const PhasePoint<D>>, const Domain&);           \
    template bool is_allowed<D>(std::span<const PhasePoint<D>>, double, const Domain&);          \
    template void validate<D>(const SystemState<D>&);                                            \
    template PhaseDensity<D> maxwellian_uniform<D>(double, double, Vector<D>, double);           \
    template PhaseDensity<D> gaussian_blob<D>(const Vector<D>&, double, double, double);         \
    template ChaoticSample<D> sample_chaotic_state<D>(std::size_t, const PhaseDensity<D>&, double, \
                                                      Inelasticity, const Domain&, Rng&,         \
                                                      const ChaoticSamplerOptions&);

GRANULAR_INSTANTIATE_CORE(1)
GRANULAR_INSTANTIATE_CORE(3)

} // namespace granular
