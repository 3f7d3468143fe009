#include "granular/checks.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "granular/cumulants.hpp"
#include "granular/random.hpp"

namespace granular {

namespace {

template <int Dim>
Vector<Dim> gaussian_vector(Rng& rng, double scale) {
    Vector<Dim> v;
    for (int k = 0; k < Dim; ++k) v[k] = scale * standard_normal(rng);
    return v;
}

template <int Dim>
Vector<Dim> unit_vector(Rng& rng) {
    Vector<Dim> v;
    do {
        v = gaussian_vector<Dim>(rng, 1.0);
    } while (v.norm() < 1e-6);
    return v / v.norm();
}

template <int Dim>
void collision_case(Rng& rng, CollisionCheckReport& r) {
    const double scale = std::pow(10.0, -3.0 + 6.0 * uniform01(rng));
    const Vector<Dim> p1 = gaussian_vector<Dim>(rng, scale);
    const Vector<Dim> p2 = gaussian_vector<Dim>(rng, scale);
    Vector<Dim> n = unit_vector<Dim>(rng);
    if (n.dot(p1 - p2) < 0.0) n = -n;
    const UnitNormal<Dim> eta(n);
    static constexpr double fixed[] = {0.0, 0.1, 0.25, 0.49};
    const double u = uniform01(rng);
    const Inelasticity eps(u < 0.5 ? fixed[static_cast<int>(8.0 * u)] : 0.49 * uniform01(rng));

    const double pscale = p1.norm() + p2.norm();
    const double escale = 0.5 * (p1.squaredNorm() + p2.squaredNorm());
    const auto [a, b] = collide<double, Dim>(p1, p2, eta, eps);

    r.momentum_error = std::max(r.momentum_error, ((a + b) - (p1 + p2)).norm() / pscale);
    const double restitution = n.dot(a - b) + eps.restitution() * n.dot(p1 - p2);
    r.restitution_error = std::max(r.restitution_error, std::abs(restitution) / pscale);

    const auto [c, d] = precollide<double, Dim>(a, b, eta, eps);
    const auto [e, f] = collide<double, Dim>(c, d, eta, eps);
    const double rt = std::max({(c - p1).norm(), (d - p2).norm(), (e - a).norm(), (f - b).norm()});
    r.roundtrip_error = std::max(r.roundtrip_error, rt / pscale);

    const double brute = 0.5 * (a.squaredNorm() + b.squaredNorm()) - escale;
    const double closed = dissipation<double, Dim>(p1, p2, eta, eps);
    r.dissipation_error = std::max(r.dissipation_error, std::abs(brute - closed) / escale);
}

template <int Dim>
double test_function(std::span<const PhasePoint<Dim>> x) {
    double v = 1.0, lin = 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        v *= std::exp(-x[i].q.squaredNorm() / 50.0 - x[i].p.squaredNorm() / 4.0);
        lin += 0.3 * static_cast<double>(i + 1) * x[i].p[0];
    }
    return v * lin;
}

// Separated clusters moving apart along the first axis never meet.
template <int Dim>
std::vector<PhasePoint<Dim>> separated_points(std::size_t n, Rng& rng) {
    std::vector<double> speeds(n);
    for (auto& s : speeds) s = standard_normal(rng);
    std::sort(speeds.begin(), speeds.end());
    std::vector<PhasePoint<Dim>> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i].q = gaussian_vector<Dim>(rng, 0.2);
        x[i].q[0] += 5.0 * static_cast<double>(i);
        x[i].p = gaussian_vector<Dim>(rng, 0.3);
        x[i].p[0] = speeds[i];
    }
    return x;
}

template <int Dim>
double independent_case(Rng& rng) {
    FlowParams flow;
    flow.sigma = 0.1;
    flow.eps = Inelasticity(0.45 * uniform01(rng));
    const double t = 2.0 * uniform01(rng);
    double worst = 0.0;
    for (int n : {1, 2}) {
        const auto x = separated_points<Dim>(static_cast<std::size_t>(n + 1), rng);
        const Observable<Dim> b = test_function<Dim>;
        const Observable<Dim> sum_p2 = additive<Dim>([](const PhasePoint<Dim>& y) { return y.p.squaredNorm(); });
        const std::span<const PhasePoint<Dim>> xs(x);
        worst = std::max(worst, std::abs(apply_cumulant<Dim>(n, t, b, xs, flow)));
        worst = std::max(worst, std::abs(apply_cumulant<Dim>(n, t, sum_p2, xs, flow)) / (1.0 + sum_p2(xs)));
    }
    return worst;
}

// V_2 applied directly against A^_2 f minus the nested A^_1 (A^_2 f).
double identity_case(Rng& rng) {
    FlowParams flow;
    flow.sigma = 0.1;
    flow.eps = Inelasticity(0.45 * uniform01(rng));
    const double t = 0.5 + 1.5 * uniform01(rng);
    const std::size_t s = uniform01(rng) < 0.5 ? 1 : 2;
    std::vector<PhasePoint<1>> x(s + 1);
    for (std::size_t i = 0; i <= s; ++i) {
        x[i].q[0] = 0.6 * static_cast<double>(i) + 0.2 * uniform01(rng);
        x[i].p[0] = standard_normal(rng);
    }
    const std::span<const PhasePoint<1>> xs(x);
    const Observable<1> f = test_function<1>;
    const double direct = generating_operator_v2<1>(t, xs, flow).apply(f);

    double nested = scattering_cumulant<1>(1, t, xs, flow).apply(f);
    const auto outer = scattering_cumulant<1>(0, t, xs.first(s), flow);
    for (const auto& o : outer.terms) {
        for (std::size_t i = 0; i < s; ++i) {
            const std::array<PhasePoint<1>, 2> pair{o.points[i], x.back()};
            const auto inner = scattering_cumulant<1>(1, t, std::span<const PhasePoint<1>>(pair), flow);
            const Observable<1> g = [&](std::span<const PhasePoint<1>> y) {
                std::vector<PhasePoint<1>> full = o.points;
                full[i] = y[0];
                full.push_back(y[1]);
                return f(std::span<const PhasePoint<1>>(full));
            };
            nested -= o.coefficient * o.weight * inner.apply(g);
        }
    }
    return std::abs(direct - nested) / (1.0 + std::abs(direct));
}

} // namespace

CollisionCheckReport collision_property_suite(std::size_t cases, std::uint64_t seed) {
    CollisionCheckReport r;
    r.cases = cases;
    for (std::size_t k = 0; k < cases; ++k) {
        Rng rng = make_rng(seed, {0xC1, k});
        switch (k % 3) {
        case 0: collision_case<1>(rng, r); break;
        case 1: collision_case<2>(rng, r); break;
        default: collision_case<3>(rng, r); break;
        }
    }
    r.passed = r.momentum_error <= 1e-14 && r.restitution_error <= 1e-12 && r.roundtrip_error <= 1e-12 &&
               r.dissipation_error <= 1e-12;
    return r;
}

CumulantCheckReport cumulant_property_suite(std::size_t cases, std::uint64_t seed) {
    CumulantCheckReport r;
    bool sums_ok = true;
    for (int n = 1; n <= 5; ++n) {
        long long sum = 0;
        for (const auto& term : enumerate_cumulant_terms(n)) sum += term.coefficient;
        r.coefficient_sums.push_back(sum);
        sums_ok = sums_ok && sum == 0;
    }
    for (std::size_t k = 0; k < cases; ++k) {
        Rng rng = make_rng(seed, {0xC4, k});
        r.independent_max = std::max(r.independent_max, k % 2 ? independent_case<3>(rng) : independent_case<1>(rng));
        ++r.independent_cases;
        Rng rng2 = make_rng(seed, {0xC5, k});
        r.identity_error = std::max(r.identity_error, identity_case(rng2));
        ++r.identity_cases;
    }
    r.passed = sums_ok && r.independent_max <= 1e-12 && r.identity_error <= 1e-12;
    return r;
}

} // namespace granular
