#include "granular/kinetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "granular/parallel.hpp"

namespace granular {

template <int Dim>
VelocityDensity<Dim> maxwellian_velocity_density(double n, double temperature, double length, Vector<Dim> mean) {
    if (!(n > 0.0) || !(temperature > 0.0) || !(length > 0.0)) {
        throw std::invalid_argument("Maxwellian needs n > 0, T > 0, L > 0");
    }
    const double sd = std::sqrt(temperature);
    const double norm = std::pow(2.0 * std::numbers::pi * temperature, -0.5 * Dim);
    VelocityDensity<Dim> d;
    d.number_density = n;
    d.length = length;
    d.momentum_pdf = [=](const Vector<Dim>& p) {
        return norm * std::exp(-0.5 * (p - mean).squaredNorm() / temperature);
    };
    d.f = [n, pdf = d.momentum_pdf](const Vector<Dim>&, const Vector<Dim>& p) { return n * pdf(p); };
    d.sample_momentum = [=](Rng& rng) {
        Vector<Dim> p;
        for (int k = 0; k < Dim; ++k) p[k] = mean[k] + sd * standard_normal(rng);
        return p;
    };
    d.sample = [length, draw = d.sample_momentum](Rng& rng) {
        PhasePoint<Dim> x;
        for (int k = 0; k < Dim; ++k) x.q[k] = length * uniform01(rng);
        x.p = draw(rng);
        return x;
    };
    return d;
}

template <int Dim>
PairDensity<Dim> product_closure(const VelocityDensity<Dim>& f1) {
    return [f = f1.f](const Vector<Dim>& q1, const Vector<Dim>& p1, const Vector<Dim>& q2, const Vector<Dim>& p2) {
        return f(q1, p1) * f(q2, p2);
    };
}

namespace {

struct GainLoss {
    double gain = 0.0; // includes <eta, g> and 1/(1-2eps)^2
    double loss = 0.0; // includes <eta, g>
};

// Integrand of the collision integral for one (p2, eta) node.
template <int Dim>
GainLoss collision_node(const PairDensity<Dim>& f2, const Vector<Dim>& q1, const Vector<Dim>& p1,
                        const Vector<Dim>& p2, const Vector<Dim>& eta, double sigma, Inelasticity eps) {
    GainLoss out;
    const double gn = eta.dot(p1 - p2);
    if (!(gn > 0.0)) return out;
    const UnitNormal<Dim> n(eta);
    const auto [a, b] = precollide<double, Dim>(p1, p2, n, eps);
    const double k = 1.0 - 2.0 * eps.epsilon();
    out.gain = gn * f2(q1, a, Vector<Dim>(q1 - sigma * eta), b) / (k * k);
    out.loss = gn * f2(q1, p1, Vector<Dim>(q1 + sigma * eta), p2);
    if (!std::isfinite(out.gain) || !std::isfinite(out.loss)) {
        throw GuardAbort("collision integral: non-finite two-particle density");
    }
    return out;
}

template <int Dim>
Vector<Dim> random_direction(Rng& rng) {
    if constexpr (Dim == 1) {
        return Vector<Dim>(uniform01(rng) < 0.5 ? -1.0 : 1.0);
    } else {
        Vector<Dim> v;
        do {
            for (int k = 0; k < Dim; ++k) v[k] = standard_normal(rng);
        } while (v.squaredNorm() < 1e-300);
        return v / v.norm();
    }
}

// Sum over eta = +-1 in 1D, one uniform direction times the sphere area
// sigma^2 4 pi in 3D.
template <int Dim>
GainLoss eta_sum(const PairDensity<Dim>& f2, const Vector<Dim>& q1, const Vector<Dim>& p1, const Vector<Dim>& p2,
                 double sigma, Inelasticity eps, Rng& rng) {
    GainLoss total;
    if constexpr (Dim == 1) {
        (void)rng;
        for (double e : {1.0, -1.0}) {
            const auto node = collision_node<1>(f2, q1, p1, p2, Vector<1>(e), sigma, eps);
            total.gain += node.gain;
            total.loss += node.loss;
        }
    } else {
        const Vector<Dim> eta = random_direction<Dim>(rng);
        const double area = 4.0 * std::numbers::pi * sigma * sigma;
        const auto node = collision_node<Dim>(f2, q1, p1, p2, eta, sigma, eps);
        total.gain = area * node.gain;
        total.loss = area * node.loss;
    }
    return total;
}

void check_order(int order) {
    if (order < 0) throw std::invalid_argument("collision-integral order must be >= 0");
    if (order > 0) {
        throw NotImplemented("collision-integral corrections of order >= 1 need the general generating operators");
    }
}

} // namespace

template <int Dim>
Estimate enskog_collision_integral(const PairDensity<Dim>& f2, const PhasePoint<Dim>& x1, double sigma,
                                   Inelasticity eps, const CollisionIntegralOptions& options) {
    check_order(options.order);
    if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
    if (options.mc_budget < 2) throw GuardAbort("collision integral needs an MC budget of at least 2");
    if (!(options.proposal_temperature > 0.0)) throw std::invalid_argument("proposal temperature must be > 0");
    const double T = options.proposal_temperature;
    const double sd = std::sqrt(T);
    const double norm = std::pow(2.0 * std::numbers::pi * T, -0.5 * Dim);
    const std::size_t m = options.mc_budget;
    std::vector<double> values(m), scale(m);
    parallel_for(m, options.threads, [&](std::size_t k) {
        Rng rng = make_rng(options.seed, {0xE1, k});
        Vector<Dim> p2;
        for (int c = 0; c < Dim; ++c) p2[c] = sd * standard_normal(rng);
        const double g = norm * std::exp(-0.5 * p2.squaredNorm() / T);
        const auto node = eta_sum<Dim>(f2, x1.q, x1.p, p2, sigma, eps, rng);
        values[k] = (node.gain - node.loss) / g;
        scale[k] = (std::abs(node.gain) + std::abs(node.loss)) / g;
    });
    const auto s = sample_stats(values);
    Estimate e;
    e.value = s.mean;
    e.stderr_ = s.stderr_;
    e.n_samples = m;
    e.scale = sample_stats(scale).mean;
    return e;
}

std::pair<double, double> enskog_collision_integral_halfline(const PairDensity<1>& f2, const PhasePoint<1>& x1,
                                                             double sigma_hat, Inelasticity eps, int order) {
    check_order(order);
    const double e = eps.epsilon();
    const double r = e / (2.0 * e - 1.0);
    const double k2 = (1.0 - 2.0 * e) * (1.0 - 2.0 * e);
    const double q1 = x1.q[0];
    const double p1 = x1.p[0];
    auto f = [&f2](double qa, double pa, double qb, double pb) {
        return f2(Vector<1>(qa), Vector<1>(pa), Vector<1>(qb), Vector<1>(pb));
    };
    // partner on the left: gain with p1 - P + r P, p1 - r P
    auto left = [&](double P) {
        return P * (f(q1, p1 - P + r * P, q1 - sigma_hat, p1 - r * P) / k2 - f(q1, p1, q1 - sigma_hat, p1 + P));
    };
    // partner on the right: gain with p1 + P - r P, p1 + r P
    auto right = [&](double P) {
        return P * (f(q1, p1 + P - r * P, q1 + sigma_hat, p1 + r * P) / k2 - f(q1, p1, q1 + sigma_hat, p1 - P));
    };
    boost::math::quadrature::exp_sinh<double> integrator;
    double err_l = 0.0, err_r = 0.0;
    const double a = integrator.integrate(left, 0.0, std::numeric_limits<double>::infinity(), 1e-10, &err_l);
    const double b = integrator.integrate(right, 0.0, std::numeric_limits<double>::infinity(), 1e-10, &err_r);
    return {a + b, std::abs(err_l) + std::abs(err_r)};
}

template <int Dim>
CollisionMoments collision_integral_moments(const VelocityDensity<Dim>& f1, double sigma, Inelasticity eps,
                                            const CollisionIntegralOptions& options) {
    check_order(options.order);
    if (!f1.sample_momentum || !f1.momentum_pdf) {
        throw std::invalid_argument("moments need a homogeneous density with a momentum law");
    }
    if (options.mc_budget < 2) throw GuardAbort("moments need an MC budget of at least 2");
    const auto f2 = product_closure(f1);
    const std::size_t m = options.mc_budget;
    std::vector<double> mass(m), mom(m), energy(m), scale(m), escale(m);
    const Vector<Dim> q1 = Vector<Dim>::Zero();
    parallel_for(m, options.threads, [&](std::size_t k) {
        Rng rng = make_rng(options.seed, {0xE2, k});
        const Vector<Dim> p1 = f1.sample_momentum(rng);
        const Vector<Dim> p2 = f1.sample_momentum(rng);
        const double w = 1.0 / (f1.momentum_pdf(p1) * f1.momentum_pdf(p2));
        const auto node = eta_sum<Dim>(f2, q1, p1, p2, sigma, eps, rng);
        const double v = (node.gain - node.loss) * w;
        const double a = (std::abs(node.gain) + std::abs(node.loss)) * w;
        mass[k] = v;
        mom[k] = v * p1[0];
        energy[k] = v * 0.5 * p1.squaredNorm();
        scale[k] = a * (1.0 + std::abs(p1[0]));
        escale[k] = a * 0.5 * p1.squaredNorm();
    });
    auto pack = [m](const std::vector<double>& x, double sc) {
        const auto s = sample_stats(x);
        return Estimate{s.mean, s.stderr_, m, sc};
    };
    const double sc = sample_stats(scale).mean;
    return {pack(mass, sc), pack(mom, sc), pack(energy, sample_stats(escale).mean)};
}

// ---------------------------------------------------------------------------

std::size_t DsmcState::cell_of(double x) const {
    const auto c = static_cast<std::size_t>(x / length * static_cast<double>(cells));
    return std::min(c, cells - 1);
}

std::vector<std::vector<std::uint32_t>> DsmcState::cell_members() const {
    std::vector<std::vector<std::uint32_t>> out(cells);
    for (std::size_t i = 0; i < q.size(); ++i) out[cell_of(q[i])].push_back(static_cast<std::uint32_t>(i));
    return out;
}

DsmcState dsmc_initialize(const VelocityDensity<1>& f1_0, Inelasticity eps, const DsmcConfig& config) {
    if (config.samples < 2 || config.cells < 1) throw std::invalid_argument("DSMC needs >= 2 samples and >= 1 cell");
    if (!f1_0.sample) throw std::invalid_argument("initial density has no sampler");
    DsmcState s;
    s.length = f1_0.length;
    s.cells = config.cells;
    s.weight = f1_0.number_density * f1_0.length / static_cast<double>(config.samples);
    s.eps = eps;
    s.seed = config.seed;
    s.q.resize(config.samples);
    s.p.resize(config.samples);
    const Domain box = Domain::periodic(s.length);
    Rng rng = make_rng(config.seed, {0x1D});
    for (std::size_t i = 0; i < config.samples; ++i) {
        const auto x = f1_0.sample(rng);
        s.q[i] = box.wrap(x.q[0]);
        s.p[i] = x.p[0];
    }
    return s;
}

namespace {

struct CellRange {
    double lo = 0.0;
    double hi = 0.0;
};

CellRange momentum_range(const DsmcState& s, const std::vector<std::uint32_t>& members) {
    CellRange r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (auto i : members) {
        r.lo = std::min(r.lo, s.p[i]);
        r.hi = std::max(r.hi, s.p[i]);
    }
    return r;
}

} // namespace

double dsmc_max_stable_dt(const DsmcState& state, double dt_bound) {
    const double dx = state.length / static_cast<double>(state.cells);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& members : state.cell_members()) {
        if (members.size() < 2) continue;
        const auto r = momentum_range(state, members);
        const double rate = state.weight * static_cast<double>(members.size()) / dx * (r.hi - r.lo);
        if (rate > 0.0) best = std::min(best, dt_bound / rate);
    }
    return best;
}

DsmcState dsmc_step(DsmcState state, double dt, const DsmcConfig& config, DsmcStepStats* stats) {
    if (!(dt >= 0.0)) throw std::invalid_argument("dsmc_step: dt must be >= 0");
    if (dt == 0.0) return state;
    const Domain box = Domain::periodic(state.length);
    for (std::size_t i = 0; i < state.size(); ++i) state.q[i] = box.wrap(state.q[i] + state.p[i] * dt);

    const auto members = state.cell_members();
    const double dx = state.length / static_cast<double>(state.cells);
    std::vector<CellRange> ranges(state.cells);
    for (std::size_t c = 0; c < state.cells; ++c) {
        if (members[c].size() < 2) continue;
        ranges[c] = momentum_range(state, members[c]);
        const double nc = state.weight * static_cast<double>(members[c].size()) / dx;
        const double load = dt * nc * (ranges[c].hi - ranges[c].lo);
        if (load > config.dt_bound) {
            std::ostringstream msg;
            msg << "DSMC dt guard: cell " << c << " has dt*n*v_max = " << load << " > " << config.dt_bound
                << " (dt=" << dt << ", n_cell=" << nc << ", v_max=" << ranges[c].hi - ranges[c].lo
                << "); largest admissible dt is " << config.dt_bound / (nc * (ranges[c].hi - ranges[c].lo));
            throw DtGuard(msg.str());
        }
    }

    std::vector<DsmcStepStats> per_cell(state.cells);
    const Inelasticity eps = state.eps;
    parallel_for(state.cells, config.threads, [&](std::size_t c) {
        const auto& list = members[c];
        const std::size_t n = list.size();
        if (n < 2) return;
        const double vmax = ranges[c].hi - ranges[c].lo;
        if (!(vmax > 0.0)) return;
        Rng rng = make_rng(state.seed, {0xC0, state.step, c});
        const double expected = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1) * state.weight * vmax * dt / dx;
        const auto m = static_cast<std::size_t>(std::floor(expected + uniform01(rng)));
        auto& st = per_cell[c];
        st.candidates = m;
        for (std::size_t k = 0; k < m; ++k) {
            const auto a = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
            auto b = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n - 1));
            if (b >= a) ++b;
            const std::uint32_t i = list[a];
            const std::uint32_t j = list[b];
            const double g = std::abs(state.p[i] - state.p[j]);
            if (g > vmax * (1.0 + 1e-12)) {
                throw GuardAbort("DSMC acceptance probability exceeds 1: cell majorant too small");
            }
            if (!(uniform01(rng) * vmax < g)) continue;
            const UnitNormal<1> eta(Vector<1>(state.p[i] > state.p[j] ? 1.0 : -1.0));
            const Vector<1> pi(state.p[i]), pj(state.p[j]);
            st.dissipated -= dissipation<double, 1>(pi, pj, eta, eps) * state.weight;
            const auto [a1, b1] = collide<double, 1>(pi, pj, eta, eps);
            state.p[i] = a1[0];
            state.p[j] = b1[0];
            ++st.collisions;
        }
    });
    if (stats) {
        *stats = {};
        for (const auto& st : per_cell) {
            stats->candidates += st.candidates;
            stats->collisions += st.collisions;
            stats->dissipated += st.dissipated;
        }
    }
    state.time += dt;
    ++state.step;
    return state;
}

double granular_temperature(const DsmcState& state) {
    if (state.size() < 2) throw std::invalid_argument("temperature needs at least two samples");
    double mean = 0.0;
    for (double p : state.p) mean += p;
    mean /= static_cast<double>(state.size());
    double var = 0.0;
    for (double p : state.p) var += (p - mean) * (p - mean);
    return var / static_cast<double>(state.size());
}

Moments dsmc_moments(const DsmcState& state) {
    Moments m;
    m.t = state.time;
    double mom = 0.0, e = 0.0;
    for (double p : state.p) {
        mom += p;
        e += 0.5 * p * p;
    }
    m.mass = state.weight * static_cast<double>(state.size());
    m.momentum = state.weight * mom;
    m.energy = state.weight * e;
    m.temperature = granular_temperature(state);
    return m;
}

PhaseHistogram dsmc_histogram(const DsmcState& state, const Grid1D& q, const Grid1D& p) {
    PhaseHistogram h(q, p);
    for (std::size_t i = 0; i < state.size(); ++i) h.add(state.q[i], state.p[i], state.weight);
    return h;
}

LimitSolution solve_limit_equation(const VelocityDensity<1>& f1_0, double t_end, Inelasticity eps,
                                   const LimitEquationConfig& config) {
    if (!(t_end >= 0.0)) throw std::invalid_argument("t_end must be >= 0");
    if (!(config.dt_fraction > 0.0 && config.dt_fraction <= 1.0)) {
        throw std::invalid_argument("dt_fraction must lie in (0, 1]");
    }
    std::vector<double> targets{0.0};
    for (double t : config.snapshot_times) {
        if (t < 0.0 || t > t_end) throw std::invalid_argument("snapshot times must lie in [0, t_end]");
        targets.push_back(t);
    }
    targets.push_back(t_end);
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());

    LimitSolution out;
    DsmcState state = dsmc_initialize(f1_0, eps, config.dsmc);
    auto record = [&](double t) {
        state.time = t;
        out.times.push_back(t);
        out.histograms.push_back(dsmc_histogram(state, config.q_grid, config.p_grid));
        out.moments.push_back(dsmc_moments(state));
        if (config.keep_states) out.states.push_back(state);
    };
    for (double target : targets) {
        while (target - state.time > 1e-12 * std::max(1.0, target)) {
            double dt = config.dt_fraction * dsmc_max_stable_dt(state, config.dsmc.dt_bound);
            if (config.max_dt) dt = std::min(dt, *config.max_dt);
            dt = std::min(dt, target - state.time);
            DsmcStepStats st;
            state = dsmc_step(std::move(state), dt, config.dsmc, &st);
            ++out.steps;
            out.collisions += st.collisions;
        }
        record(target);
    }
    return out;
}

double cooling_rate_quadrature(const std::vector<double>& momenta, double number_density, Inelasticity eps,
                               int bins) {
    if (momenta.size() < 2) throw std::invalid_argument("quadrature needs at least two momenta");
    const auto [lo_it, hi_it] = std::minmax_element(momenta.begin(), momenta.end());
    const double pad = 1e-9 * std::max(1.0, *hi_it - *lo_it);
    const Grid1D grid(*lo_it - pad, *hi_it + pad, bins);
    std::vector<double> w(bins, 0.0);
    for (double p : momenta) w[grid.index(p)] += 1.0;
    for (double& v : w) v /= static_cast<double>(momenta.size());
    double g3 = 0.0;
    for (int a = 0; a < bins; ++a) {
        if (w[a] == 0.0) continue;
        for (int b = 0; b < bins; ++b) {
            if (w[b] == 0.0) continue;
            const double g = std::abs(grid.centre(a) - grid.centre(b));
            g3 += w[a] * w[b] * g * g * g;
        }
    }
    const double e = eps.epsilon();
    return -e * (1.0 - e) * number_density * g3;
}

std::string moments_csv(const std::vector<Moments>& series) {
    std::string out = "t,mass,momentum,energy,temperature\n";
    char buf[160];
    for (const auto& m : series) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", m.t, m.mass, m.momentum, m.energy,
                      m.temperature);
        out += buf;
    }
    return out;
}

#define GRANULAR_INSTANTIATE_KINETIC(D)                                                                  \
    template VelocityDensity<D> maxwellian_velocity_density<D>(double, double, double, Vector<D>);      \
    template PairDensity<D> product_closure<D>(const VelocityDensity<D>&);                               \
    template Estimate enskog_collision_integral<D>(const PairDensity<D>&, const PhasePoint<D>&, double, \
                                                   Inelasticity, const CollisionIntegralOptions&);      \
    template CollisionMoments collision_integral_moments<D>(const VelocityDensity<D>&, double,         \
                                                            Inelasticity, const CollisionIntegralOptions&);

GRANULAR_INSTANTIATE_KINETIC(1)
GRANULAR_INSTANTIATE_KINETIC(3)

} // namespace granular
