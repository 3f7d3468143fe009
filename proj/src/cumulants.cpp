#include "granular/cumulants.hpp"

#include <bit>
#include <cmath>
#include <sstream>

#include "granular/parallel.hpp"

namespace granular {

std::vector<PartitionTerm> enumerate_cumulant_terms(int n) {
    if (n < 0 || n > kMaxCumulantOrder) {
        std::ostringstream msg;
        msg << "cumulant order 1+n needs 0 <= n <= " << kMaxCumulantOrder << ", got n=" << n;
        throw std::out_of_range(msg.str());
    }
    const int m = n + 1;
    std::vector<PartitionTerm> out;
    // restricted growth strings a[0..m-1], a[0] = 0, a[k] <= 1 + max(a[0..k-1])
    std::vector<int> a(m, 0), peak(m, 0);
    while (true) {
        const int nblocks = *std::max_element(a.begin(), a.end()) + 1;
        PartitionTerm term;
        term.blocks.assign(nblocks, {});
        for (int k = 0; k < m; ++k) term.blocks[a[k]].push_back(k);
        long long f = 1;
        for (int k = 2; k < nblocks; ++k) f *= k;
        term.coefficient = (nblocks % 2 == 1 ? 1 : -1) * f;
        out.push_back(std::move(term));

        int k = m - 1;
        while (k > 0 && a[k] > peak[k - 1]) --k;
        if (k == 0) break;
        ++a[k];
        peak[k] = std::max(peak[k - 1], a[k]);
        for (int r = k + 1; r < m; ++r) {
            a[r] = 0;
            peak[r] = peak[k];
        }
    }
    return out;
}

namespace {

template <int Dim>
SystemState<Dim> make_state(std::vector<PhasePoint<Dim>> points, const FlowParams& flow) {
    SystemState<Dim> s;
    s.particles = std::move(points);
    s.sigma = flow.sigma;
    s.eps = flow.eps;
    s.domain = flow.domain;
    return s;
}

template <int Dim>
PhasePoint<Dim> free_flight(const PhasePoint<Dim>& x, double t, const Domain& domain) {
    PhasePoint<Dim> y = x;
    y.q = x.q + x.p * t;
    if (domain.is_periodic()) y.q = domain.template wrap<Dim>(y.q);
    return y;
}

} // namespace

template <int Dim>
CumulantEvaluator<Dim>::CumulantEvaluator(std::vector<PhasePoint<Dim>> points, FlowParams flow, double t)
    : points_(std::move(points)), flow_(std::move(flow)), t_(t) {
    if (points_.size() > 31) throw std::out_of_range("CumulantEvaluator: at most 31 points");
    if (!(t >= 0.0)) throw std::invalid_argument("cumulant time must be >= 0");
}

template <int Dim>
const std::optional<std::vector<PhasePoint<Dim>>>& CumulantEvaluator<Dim>::evolved(std::uint32_t mask) {
    auto it = cache_.find(mask);
    if (it != cache_.end()) return it->second;
    std::vector<PhasePoint<Dim>> sub;
    for (std::size_t i = 0; i < points_.size(); ++i) {
        if (mask & (1u << i)) sub.push_back(points_[i]);
    }
    std::optional<std::vector<PhasePoint<Dim>>> result;
    if (sub.size() == 1) {
        result = std::vector<PhasePoint<Dim>>{free_flight(sub[0], t_, flow_.domain)};
    } else {
        const SystemState<Dim> s0 = make_state<Dim>(std::move(sub), flow_);
        if (is_allowed(s0)) {
            result = t_ == 0.0 ? s0.particles : advance<Dim>(s0, t_, nullptr, flow_.options).particles;
        }
    }
    return cache_.emplace(mask, std::move(result)).first->second;
}

template <int Dim>
double CumulantEvaluator<Dim>::apply(const std::vector<int>& cluster, const std::vector<int>& others,
                                     const Observable<Dim>& b) {
    const int n = static_cast<int>(others.size());
    // element e -> particle indices and their slots in the argument list of b
    std::vector<std::vector<int>> members(n + 1), slots(n + 1);
    members[0] = cluster;
    for (std::size_t k = 0; k < cluster.size(); ++k) slots[0].push_back(static_cast<int>(k));
    for (int e = 1; e <= n; ++e) {
        members[e] = {others[e - 1]};
        slots[e] = {static_cast<int>(cluster.size()) + e - 1};
    }
    for (const auto& list : members) {
        for (int i : list) {
            if (i < 0 || i >= static_cast<int>(points_.size())) {
                throw std::out_of_range("cumulant element refers to an unknown point");
            }
        }
    }
    const std::size_t arity = cluster.size() + others.size();
    std::vector<PhasePoint<Dim>> args(arity);

    double total = 0.0;
    for (const auto& term : enumerate_cumulant_terms(n)) {
        bool forbidden = false;
        for (const auto& block : term.blocks) {
            std::uint32_t mask = 0;
            for (int e : block) {
                for (int i : members[e]) mask |= 1u << i;
            }
            if (mask == 0) continue;
            const auto& ev = evolved(mask);
            if (!ev) {
                forbidden = true;
                break;
            }
            // evolved points come back in increasing particle index order
            std::vector<int> order;
            for (std::size_t i = 0; i < points_.size(); ++i) {
                if (mask & (1u << i)) order.push_back(static_cast<int>(i));
            }
            for (int e : block) {
                for (std::size_t k = 0; k < members[e].size(); ++k) {
                    const auto pos = std::find(order.begin(), order.end(), members[e][k]) - order.begin();
                    args[slots[e][k]] = (*ev)[pos];
                }
            }
        }
        if (forbidden) continue;
        total += static_cast<double>(term.coefficient) * b(std::span<const PhasePoint<Dim>>(args));
    }
    return total;
}

template <int Dim>
double apply_cumulant(int n, double t, const Observable<Dim>& b, std::span<const PhasePoint<Dim>> points,
                      const FlowParams& flow) {
    if (static_cast<int>(points.size()) != n + 1) {
        throw std::invalid_argument("apply_cumulant: need exactly 1+n phase points");
    }
    CumulantEvaluator<Dim> eval(std::vector<PhasePoint<Dim>>(points.begin(), points.end()), flow, t);
    std::vector<int> others;
    for (int k = 1; k <= n; ++k) others.push_back(k);
    return eval.apply({0}, others, b);
}

template <int Dim>
Observable<Dim> additive(std::function<double(const PhasePoint<Dim>&)> b1) {
    return [b1 = std::move(b1)](std::span<const PhasePoint<Dim>> x) {
        double s = 0.0;
        for (const auto& p : x) s += b1(p);
        return s;
    };
}

MarginalObservableExpansion marginal_observable_expansion(int s) {
    if (s < 1 || s > kMaxCumulantOrder) throw std::out_of_range("expansion needs 1 <= s <= 6");
    MarginalObservableExpansion e;
    e.s = s;
    // subsets in order of size, then lexicographic
    for (int size = 0; size <= s; ++size) {
        for (std::uint32_t mask = 0; mask < (1u << s); ++mask) {
            if (std::popcount(mask) != size) continue;
            ExpansionTerm term;
            for (int i = 0; i < s; ++i) ((mask >> i) & 1u ? term.subset : term.rest).push_back(i);
            e.terms.push_back(std::move(term));
        }
    }
    return e;
}

template <int Dim>
double evolve_marginal_observable(int s, const std::vector<Observable<Dim>>& initial, double t,
                                  std::span<const PhasePoint<Dim>> points, const FlowParams& flow) {
    if (s != 1 && s != 2) throw std::invalid_argument("evolve_marginal_observable supports s = 1, 2");
    if (static_cast<int>(points.size()) != s) throw std::invalid_argument("need s phase points");
    CumulantEvaluator<Dim> eval(std::vector<PhasePoint<Dim>>(points.begin(), points.end()), flow, t);
    double total = 0.0;
    for (const auto& term : marginal_observable_expansion(s).terms) {
        const std::size_t k = term.rest.size();
        if (k == 0 || k > initial.size() || !initial[k - 1]) continue; // B_0 is not carried
        const auto& b0 = initial[k - 1];
        const Observable<Dim> b = [&b0, k](std::span<const PhasePoint<Dim>> x) { return b0(x.first(k)); };
        total += eval.apply(term.rest, term.subset, b);
    }
    return total;
}

template <int Dim>
double evolve_additive_observable(const std::function<double(const PhasePoint<Dim>&)>& b1, double t,
                                  std::span<const PhasePoint<Dim>> points, const FlowParams& flow) {
    const int s = static_cast<int>(points.size());
    if (s < 1 || s > kMaxCumulantOrder + 1) throw std::out_of_range("additive expansion needs 1 <= s <= 7");
    std::vector<int> others;
    for (int k = 1; k < s; ++k) others.push_back(k);
    CumulantEvaluator<Dim> eval(std::vector<PhasePoint<Dim>>(points.begin(), points.end()), flow, t);
    return eval.apply({0}, others, additive<Dim>(b1));
}

// ---------------------------------------------------------------------------

template <int Dim>
double PointFunctional<Dim>::apply(const Observable<Dim>& f) const {
    double total = 0.0;
    for (const auto& term : terms) {
        if (term.coefficient == 0.0 || term.weight == 0.0) continue;
        total += term.coefficient * term.weight * f(std::span<const PhasePoint<Dim>>(term.points));
    }
    return total;
}

namespace {

// Adjoint-flow endpoint of the points with its phase-volume factor; nullopt
// for forbidden points and for points without a forward preimage.
template <int Dim>
std::optional<MappedTerm<Dim>> adjoint_flow(std::span<const PhasePoint<Dim>> points, double t,
                                            const FlowParams& flow) {
    SystemState<Dim> s = make_state<Dim>(std::vector<PhasePoint<Dim>>(points.begin(), points.end()), flow);
    if (!is_allowed(s)) return std::nullopt;
    MappedTerm<Dim> out;
    if (t == 0.0 || s.size() == 1) {
        out.points = std::move(s.particles);
        for (auto& x : out.points) x = free_flight(x, -t, flow.domain);
        return out;
    }
    SimulatorOptions opts = flow.options;
    opts.direction = FlowDirection::backward;
    EventDrivenSimulator<Dim> sim(std::move(s), opts);
    try {
        sim.advance(t);
    } catch (const AdjointBlowUp&) {
        return std::nullopt; // no preimage: the state density vanishes here
    }
    out.weight = std::exp(sim.log_density_factor());
    out.points = sim.state().particles;
    return out;
}

} // namespace

template <int Dim>
std::optional<MappedTerm<Dim>> scattering_map(std::span<const PhasePoint<Dim>> points, double t,
                                              const FlowParams& flow) {
    auto out = adjoint_flow<Dim>(points, t, flow);
    if (!out) return out;
    if (points.size() == 1) {
        // a lone particle streams back and forth freely
        out->points[0] = points[0];
        if (flow.domain.is_periodic()) out->points[0].q = flow.domain.template wrap<Dim>(points[0].q);
        return out;
    }
    for (auto& x : out->points) x = free_flight(x, t, flow.domain);
    return out;
}

template <int Dim>
PointFunctional<Dim> scattering_cumulant(int n, double t, std::span<const PhasePoint<Dim>> points,
                                         const FlowParams& flow) {
    if (n != 0 && n != 1) throw std::out_of_range("scattering_cumulant implements n in {0, 1}");
    if (points.size() < static_cast<std::size_t>(n + 1)) throw std::invalid_argument("too few points");
    PointFunctional<Dim> out;
    if (auto whole = scattering_map<Dim>(points, t, flow)) out.terms.push_back(std::move(*whole));
    if (n == 0) return out;

    // - S*_s(t, Y) S*_1(t, s+1), then the allowed-set indicator and inverse free flows
    const auto y = points.first(points.size() - 1);
    const PhasePoint<Dim>& extra = points.back();
    auto cluster = adjoint_flow<Dim>(y, t, flow);
    if (!cluster) return out;
    std::vector<PhasePoint<Dim>> back = cluster->points;
    back.push_back(free_flight(extra, -t, flow.domain));
    const SystemState<Dim> joint = make_state<Dim>(back, flow);
    if (!is_allowed(joint)) return out;
    MappedTerm<Dim> term;
    term.coefficient = -1.0;
    term.weight = cluster->weight;
    for (const auto& x : cluster->points) term.points.push_back(free_flight(x, t, flow.domain));
    PhasePoint<Dim> same = extra;
    if (flow.domain.is_periodic()) same.q = flow.domain.template wrap<Dim>(same.q);
    term.points.push_back(same);
    out.terms.push_back(std::move(term));
    return out;
}

template <int Dim>
PointFunctional<Dim> generating_operator_v2(double t, std::span<const PhasePoint<Dim>> points,
                                            const FlowParams& flow) {
    if (points.size() < 2) throw std::invalid_argument("V_2 needs |Y| >= 1 plus one extra point");
    const std::size_t s = points.size() - 1;
    PointFunctional<Dim> out = scattering_cumulant<Dim>(1, t, points, flow);

    auto outer = scattering_map<Dim>(points.first(s), t, flow);
    if (!outer) return out;
    const PhasePoint<Dim>& extra = points.back();
    for (std::size_t i = 0; i < s; ++i) {
        const std::array<PhasePoint<Dim>, 2> pair{outer->points[i], extra};
        const auto inner = scattering_cumulant<Dim>(1, t, std::span<const PhasePoint<Dim>>(pair), flow);
        for (const auto& term : inner.terms) {
            MappedTerm<Dim> composed;
            composed.coefficient = -term.coefficient;
            composed.weight = outer->weight * term.weight;
            composed.points = outer->points;
            composed.points[i] = term.points[0];
            composed.points.push_back(term.points[1]);
            out.terms.push_back(std::move(composed));
        }
    }
    return out;
}

template <int Dim>
McEstimate marginal_functional_F2(double t, const PhaseDensity<Dim>& f1, const PhasePoint<Dim>& x1,
                                  const PhasePoint<Dim>& x2, const FlowParams& flow,
                                  const MarginalFunctionalOptions& options) {
    if (options.order < 0) throw std::invalid_argument("order must be >= 0");
    if (options.order > 1) throw NotImplemented("marginal functional beyond order 1");
    if (!f1.density) throw std::invalid_argument("F_1 density is required");
    const Observable<Dim> product = [&f1](std::span<const PhasePoint<Dim>> x) {
        double v = 1.0;
        for (const auto& p : x) v *= f1.density(p);
        return v;
    };
    const std::array<PhasePoint<Dim>, 2> pair{x1, x2};
    McEstimate out;
    out.estimate = scattering_cumulant<Dim>(0, t, std::span<const PhasePoint<Dim>>(pair), flow).apply(product);
    if (options.order == 0) return out;

    if (options.mc_samples < 2) throw GuardAbort("order-1 functional needs mc_samples >= 2");
    if (!f1.sample) throw std::invalid_argument("F_1 sampler is required for order 1");
    std::vector<double> values(options.mc_samples);
    parallel_for(options.mc_samples, options.threads, [&](std::size_t k) {
        Rng rng = make_rng(options.seed, {0xF2, k});
        PhasePoint<Dim> x3 = f1.sample(rng);
        if (flow.domain.is_periodic()) x3.q = flow.domain.template wrap<Dim>(x3.q);
        const double pdf = f1.density(x3) / f1.mass;
        if (!(pdf > 0.0)) {
            values[k] = 0.0;
            return;
        }
        const std::array<PhasePoint<Dim>, 3> triple{x1, x2, x3};
        values[k] =
            generating_operator_v2<Dim>(t, std::span<const PhasePoint<Dim>>(triple), flow).apply(product) / pdf;
    });
    const auto stats = sample_stats(values);
    if (!std::isfinite(stats.mean)) throw GuardAbort("order-1 functional produced a non-finite estimate");
    out.estimate += stats.mean;
    out.stderr_ = stats.stderr_;
    out.n_samples = stats.n;
    return out;
}

template <int Dim>
DualityResult duality_residual(const std::function<double(const PhasePoint<Dim>&)>& b1,
                               const PhaseDensity<Dim>& f1, double t, const FlowParams& flow,
                               const DualityOptions& options) {
    const std::size_t n = options.n_particles;
    if (n < 1 || n > 6) throw std::out_of_range("duality harness supports 1..6 particles");
    if (options.mc_samples < 2) throw std::invalid_argument("duality harness needs >= 2 samples");
    if (options.adjoint_route && !f1.density) throw std::invalid_argument("adjoint route needs a density");
    const std::size_t m = options.mc_samples;
    std::vector<double> lhs(m), rhs(m), init(m), adj(m, 0.0);
    const Observable<Dim> sum_b = additive<Dim>(b1);

    parallel_for(m, options.threads, [&](std::size_t k) {
        Rng rng = make_rng(options.seed, {0xD0, n, k});
        const auto sample = sample_chaotic_state<Dim>(n, f1, flow.sigma, flow.eps, flow.domain, rng);
        const auto& x = sample.state.particles;
        const std::span<const PhasePoint<Dim>> xs(x);
        init[k] = sum_b(xs);

        const auto forward = advance<Dim>(sample.state, t, nullptr, flow.options);
        rhs[k] = sum_b(std::span<const PhasePoint<Dim>>(forward.particles));

        CumulantEvaluator<Dim> eval(x, flow, t);
        double total = 0.0;
        for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
            std::vector<int> members;
            for (std::size_t i = 0; i < n; ++i) {
                if (mask & (1u << i)) members.push_back(static_cast<int>(i));
            }
            const std::vector<int> others(members.begin() + 1, members.end());
            total += eval.apply({members[0]}, others, sum_b);
        }
        lhs[k] = total;

        if (options.adjoint_route) {
            auto back = adjoint_flow<Dim>(xs, t, flow);
            adj[k] = -rhs[k];
            if (back) {
                double ratio = back->weight;
                for (std::size_t i = 0; i < n; ++i) ratio *= f1.density(back->points[i]) / f1.density(x[i]);
                adj[k] = init[k] * ratio - rhs[k];
            }
        }
    });

    std::vector<double> diff(m);
    double scale = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        diff[k] = lhs[k] - rhs[k];
        scale += std::abs(lhs[k]) + std::abs(rhs[k]);
    }
    scale /= 2.0 * static_cast<double>(m);
    const auto d = sample_stats(diff);
    DualityResult r;
    r.residual = d.mean;
    r.stderr_ = d.stderr_;
    r.n_samples = m;
    r.scale = scale;
    r.observable_side = sample_stats(lhs).mean;
    r.state_side = sample_stats(rhs).mean;
    r.initial_value = sample_stats(init).mean;
    const double floor = 1e-12 * scale;
    const double denom = std::sqrt(d.stderr_ * d.stderr_ + floor * floor);
    r.z = denom > 0.0 ? std::abs(d.mean) / denom : (d.mean == 0.0 ? 0.0 : INFINITY);
    if (options.adjoint_route) {
        const auto a = sample_stats(adj);
        r.adjoint_estimate = r.state_side + a.mean;
        r.adjoint_stderr = a.stderr_;
        const double da = std::sqrt(a.stderr_ * a.stderr_ + floor * floor);
        r.adjoint_z = da > 0.0 ? std::abs(a.mean) / da : (a.mean == 0.0 ? 0.0 : INFINITY);
    }
    return r;
}

template class CumulantEvaluator<1>;
template class CumulantEvaluator<3>;
template struct PointFunctional<1>;
template struct PointFunctional<3>;

#define GRANULAR_INSTANTIATE_CUMULANTS(D)                                                             \
    template double apply_cumulant<D>(int, double, const Observable<D>&, std::span<const PhasePoint<D>>, \
                                      const FlowParams&);                                             \
    template Observable<D> additive<D>(std::function<double(const PhasePoint<D>&)>);                  \
    template double evolve_marginal_observable<D>(int, const std::vector<Observable<D>>&, double,     \
                                                  std::span<const PhasePoint<D>>, const FlowParams&);  \
    template double evolve_additive_observable<D>(const std::function<double(const PhasePoint<D>&)>&, \
                                                  double, std::span<const PhasePoint<D>>,             \
                                                  const FlowParams&);                                 \
    template std::optional<MappedTerm<D>> scattering_map<D>(std::span<const PhasePoint<D>>, double,   \
                                                            const FlowParams&);                       \
    template PointFunctional<D> scattering_cumulant<D>(int, double, std::span<const PhasePoint<D>>,   \
                                                       const FlowParams&);                            \
    template PointFunctional<D> generating_operator_v2<D>(double, std::span<const PhasePoint<D>>,     \
                                                          const FlowParams&);                         \
    template McEstimate marginal_functional_F2<D>(double, const PhaseDensity<D>&, const PhasePoint<D>&, \
                                                  const PhasePoint<D>&, const FlowParams&,            \
                                                  const MarginalFunctionalOptions&);                  \
    template DualityResult duality_residual<D>(const std::function<double(const PhasePoint<D>&)>&,    \
                                               const PhaseDensity<D>&, double, const FlowParams&,     \
                                               const DualityOptions&);

GRANULAR_INSTANTIATE_CUMULANTS(1)
GRANULAR_INSTANTIATE_CUMULANTS(3)

} // namespace granular
