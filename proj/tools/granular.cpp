// granular: command-line front end for the simulation, kinetic and scaling harnesses.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "granular/bgl.hpp"
#include "granular/checks.hpp"
#include "granular/cumulants.hpp"
#include "granular/dynamics.hpp"
#include "granular/kinetic.hpp"
#include "granular/report.hpp"

namespace fs = std::filesystem;
using namespace granular;

namespace {

constexpr int kExitFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitGuard = 3;
constexpr int kExitVerify = 4;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// config schema: defaults double as the schema

Json defaults_for(const std::string& cmd) {
    if (cmd == "simulate") {
        return Json::parse(R"({
            "dim": 1, "n": 100, "sigma": 0.01, "eps": 0.0, "temperature": 1.0,
            "domain": {"type": "periodic", "length": 10.0},
            "t_end": 1.0, "snapshot_times": [], "particles": [],
            "neighbors": "automatic", "max_event_rate": 100000.0, "seed": 0})");
    }
    if (cmd == "dsmc") {
        return Json::parse(R"({
            "n": 1.0, "temperature": 1.0, "length": 1.0, "eps": 0.25,
            "t_end": 1.0, "snapshot_times": [], "cells": 64, "samples": 100000,
            "dt_fraction": 0.5, "dt_bound": 0.2, "max_dt": null,
            "grid": {"q_bins": 1, "p_lo": -5.0, "p_hi": 5.0, "p_bins": 40}, "seed": 0})");
    }
    if (cmd == "collision-check") return Json::parse(R"({"cases": 10000, "seed": 0})");
    if (cmd == "cumulant-check") return Json::parse(R"({"cases": 200, "seed": 0})");
    if (cmd == "duality") {
        return Json::parse(R"({
            "dim": 1, "eps_list": [0.0, 0.1, 0.25], "t_list": [0.5, 1.0, 2.0], "n_list": [2, 3],
            "sigma": 0.1, "length": 2.0, "temperature": 1.0, "observable": "energy",
            "mc_samples": 100000, "adjoint_route": false, "seed": 0})");
    }
    if (cmd == "enskog-integral") {
        return Json::parse(R"({
            "dim": 1, "mode": "moments", "n": 1.0, "temperature": 1.0, "sigma": 0.01, "eps": 0.25,
            "point": {"q": [0.0], "p": [0.5]}, "mc_budget": 100000, "proposal_temperature": 1.0,
            "order": 0, "seed": 0})");
    }
    if (cmd == "bgl-study") {
        return Json::parse(R"({
            "sigma_list": [0.04, 0.02, 0.01], "n_particles": 10000, "number_density": 1.0,
            "eps": 0.25, "temperature": 1.0, "t_list": [1.0], "replicas": 64,
            "grid": {"q_bins": 4, "p_lo": -5.0, "p_hi": 5.0, "p_bins": 16,
                     "pair_q_bins": 2, "pair_p_lo": -3.0, "pair_p_hi": 3.0, "pair_p_bins": 4},
            "dsmc_samples": 1000000, "dsmc_cells": 0, "floor_repeats": 32,
            "energy_tolerance": 0.05, "seed": 0})");
    }
    throw std::logic_error("no defaults for " + cmd);
}

bool same_kind(const Json& base, const Json& value) {
    if (base.is_null()) return true;
    if (base.is_number()) return value.is_number();
    return base.type() == value.type();
}

void merge_checked(Json& base, const Json& patch, const std::string& where) {
    if (!patch.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, value] : patch.items()) {
        const std::string path = where.empty() ? key : where + "." + key;
        if (!base.contains(key)) throw ConfigError("unknown config key '" + path + "'");
        Json& slot = base[key];
        if (slot.is_object()) {
            merge_checked(slot, value, path);
        } else if (!same_kind(slot, value)) {
            throw ConfigError("config key '" + path + "' has type " + value.type_name() + ", expected " +
                              slot.type_name());
        } else {
            slot = value;
        }
    }
}

void apply_override(Json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    Json value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    Json patch = value;
    std::string rest = key;
    std::vector<std::string> parts;
    for (std::size_t dot; (dot = rest.find('.')) != std::string::npos; rest = rest.substr(dot + 1)) {
        parts.push_back(rest.substr(0, dot));
    }
    parts.push_back(rest);
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = Json{{*it, patch}};
    merge_checked(config, patch, "");
}

double real(const Json& c, const char* key) { return c.at(key).get<double>(); }

std::size_t count(const Json& c, const char* key) {
    const double v = c.at(key).get<double>();
    if (!(v >= 0.0) || v != std::floor(v) || v > 1e15) {
        throw ConfigError(std::string("config key '") + key + "' must be a non-negative integer");
    }
    return static_cast<std::size_t>(v);
}

std::uint64_t seed_of(const Json& c) {
    const auto& s = c.at("seed");
    if (s.is_number_unsigned()) return s.get<std::uint64_t>();
    if (s.is_number_integer() && s.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(s.get<std::int64_t>());
    throw ConfigError("seed must be a non-negative integer");
}

std::vector<double> reals(const Json& c, const char* key) {
    std::vector<double> out;
    for (const auto& v : c.at(key)) {
        if (!v.is_number()) throw ConfigError(std::string("config key '") + key + "' must hold numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

Inelasticity inelasticity(double eps) {
    try {
        return Inelasticity(eps);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

int dimension(const Json& c) {
    const std::size_t d = count(c, "dim");
    require(d == 1 || d == 3, "dim must be 1 or 3");
    return static_cast<int>(d);
}

// ---------------------------------------------------------------------------
// subcommands. Each returns the results block; validation errors throw
// ConfigError before any computation starts.

struct Context {
    Json config;
    fs::path out;
    unsigned threads = 1;
    bool ok = true; // false when a check ran but failed
};

template <int Dim>
Vector<Dim> vector_from(const Json& j, const char* what) {
    require(j.is_array() && j.size() == static_cast<std::size_t>(Dim),
            std::string(what) + " must be an array of " + std::to_string(Dim) + " numbers");
    Vector<Dim> v;
    for (int k = 0; k < Dim; ++k) v[k] = j[k].get<double>();
    return v;
}

template <int Dim>
Json run_simulate(Context& ctx) {
    const Json& c = ctx.config;
    SystemState<Dim> state;
    state.sigma = real(c, "sigma");
    state.eps = inelasticity(real(c, "eps"));
    const std::string type = c.at("domain").at("type").get<std::string>();
    const double length = c.at("domain").at("length").get<double>();
    require(type == "periodic" || type == "unbounded", "domain.type must be 'periodic' or 'unbounded'");
    require(length > 0.0, "domain.length must be > 0");
    state.domain = type == "periodic" ? Domain::periodic(length) : Domain::unbounded();
    const double t_end = real(c, "t_end");
    require(t_end >= 0.0, "t_end must be >= 0");
    auto snaps = reals(c, "snapshot_times");
    for (double t : snaps) require(t >= 0.0 && t <= t_end, "snapshot_times must lie in [0, t_end]");
    std::sort(snaps.begin(), snaps.end());
    SimulatorOptions opts;
    const std::string nb = c.at("neighbors").get<std::string>();
    require(nb == "automatic" || nb == "all_pairs", "neighbors must be 'automatic' or 'all_pairs'");
    opts.neighbors = nb == "automatic" ? NeighborMode::automatic : NeighborMode::all_pairs;
    opts.max_event_rate = real(c, "max_event_rate");
    require(opts.max_event_rate > 0.0, "max_event_rate must be > 0");

    const auto& given = c.at("particles");
    if (!given.empty()) {
        for (const auto& x : given) {
            require(x.is_object() && x.contains("q") && x.contains("p"), "particles entries need q and p");
            state.particles.push_back({vector_from<Dim>(x.at("q"), "particle q"), vector_from<Dim>(x.at("p"), "particle p")});
        }
        try {
            validate(state);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    } else {
        const std::size_t n = count(c, "n");
        const double temperature = real(c, "temperature");
        require(temperature > 0.0, "temperature must be > 0");
        require(state.sigma >= 0.0, "sigma must be >= 0");
        const auto law = state.domain.is_periodic() ? maxwellian_uniform<Dim>(length, temperature)
                                                    : gaussian_blob<Dim>(Vector<Dim>::Zero(), length, temperature);
        Rng rng = make_rng(seed_of(c), {0x51});
        state = sample_chaotic_state<Dim>(n, law, state.sigma, state.eps, state.domain, rng).state;
    }

    const double e0 = kinetic_energy(state);
    const Vector<Dim> m0 = total_momentum(state);
    EventDrivenSimulator<Dim> sim(state, opts);
    TrajectoryLog<Dim> log;
    for (double t : snaps) {
        sim.advance(t - sim.time(), &log);
        sim.snapshot(log);
    }
    sim.advance(t_end - sim.time(), &log);
    if (snaps.empty() || snaps.back() != t_end) sim.snapshot(log);
    const auto final_state = sim.state();

    write_text(ctx.out / "events.csv", events_csv(log.events, Dim));
    write_text(ctx.out / "snapshots.csv", snapshots_csv(log));

    const double e1 = kinetic_energy(final_state);
    Json results = {{"time", sim.time()},
                    {"particles", final_state.size()},
                    {"collisions", sim.collisions()},
                    {"dissipated", sim.dissipated()},
                    {"energy_initial", e0},
                    {"energy_final", e1},
                    {"energy_ledger_error", std::abs(e0 - e1 - sim.dissipated())},
                    {"momentum_initial", std::vector<double>(m0.data(), m0.data() + Dim)},
                    {"momentum_final", [&] {
                         const Vector<Dim> m = total_momentum(final_state);
                         return std::vector<double>(m.data(), m.data() + Dim);
                     }()}};
    if (log.events.size() <= 1000) {
        Json events = Json::array();
        for (const auto& e : log.events) {
            events.push_back({{"t", e.t}, {"i", e.i}, {"j", e.j}, {"g_n", e.g_n}, {"dE", e.dE}});
        }
        results["events"] = events;
    }
    return results;
}

Json run_dsmc(Context& ctx) {
    const Json& c = ctx.config;
    const Inelasticity eps = inelasticity(real(c, "eps"));
    const double n = real(c, "n"), temperature = real(c, "temperature"), length = real(c, "length");
    require(n > 0.0 && temperature > 0.0 && length > 0.0, "n, temperature and length must be > 0");
    const double t_end = real(c, "t_end");
    require(t_end >= 0.0, "t_end must be >= 0");
    LimitEquationConfig lc;
    lc.dsmc.cells = count(c, "cells");
    lc.dsmc.samples = count(c, "samples");
    lc.dsmc.seed = seed_of(c);
    lc.dsmc.dt_bound = real(c, "dt_bound");
    lc.dsmc.threads = ctx.threads;
    require(lc.dsmc.cells >= 1 && lc.dsmc.samples >= 2, "dsmc needs cells >= 1 and samples >= 2");
    require(lc.dsmc.dt_bound > 0.0, "dt_bound must be > 0");
    lc.dt_fraction = real(c, "dt_fraction");
    require(lc.dt_fraction > 0.0 && lc.dt_fraction <= 1.0, "dt_fraction must lie in (0, 1]");
    if (!c.at("max_dt").is_null()) {
        require(c.at("max_dt").is_number() && c.at("max_dt").get<double>() > 0.0, "max_dt must be null or > 0");
        lc.max_dt = c.at("max_dt").get<double>();
    }
    lc.snapshot_times = reals(c, "snapshot_times");
    for (double t : lc.snapshot_times) require(t >= 0.0 && t <= t_end, "snapshot_times must lie in [0, t_end]");
    const Json& g = c.at("grid");
    try {
        lc.q_grid = Grid1D(0.0, length, static_cast<int>(count(g, "q_bins")));
        lc.p_grid = Grid1D(real(g, "p_lo"), real(g, "p_hi"), static_cast<int>(count(g, "p_bins")));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("grid: ") + e.what());
    }
    lc.keep_states = true;

    const auto f0 = maxwellian_velocity_density<1>(n, temperature, length);
    const auto sol = solve_limit_equation(f0, t_end, eps, lc);

    std::string hist;
    Json moments = Json::array();
    for (std::size_t k = 0; k < sol.times.size(); ++k) {
        hist += sol.histograms[k].csv(sol.times[k], k == 0);
        Json m = to_json(sol.moments[k]);
        m["cooling_rate_quadrature"] = cooling_rate_quadrature(sol.states[k].p, n, eps);
        moments.push_back(m);
    }
    write_text(ctx.out / "histograms.csv", hist);
    write_text(ctx.out / "moments.csv", moments_csv(sol.moments));
    return {{"steps", sol.steps}, {"collisions", sol.collisions}, {"moments", moments}};
}

Json run_collision_check(Context& ctx) {
    const auto r = collision_property_suite(count(ctx.config, "cases"), seed_of(ctx.config));
    ctx.ok = r.passed;
    return {{"cases", r.cases},
            {"momentum_error", r.momentum_error},
            {"restitution_error", r.restitution_error},
            {"roundtrip_error", r.roundtrip_error},
            {"dissipation_error", r.dissipation_error},
            {"passed", r.passed}};
}

Json run_cumulant_check(Context& ctx) {
    const auto r = cumulant_property_suite(count(ctx.config, "cases"), seed_of(ctx.config));
    ctx.ok = r.passed;
    return {{"coefficient_sums", r.coefficient_sums},
            {"independent_cases", r.independent_cases},
            {"independent_max", r.independent_max},
            {"identity_cases", r.identity_cases},
            {"identity_error", r.identity_error},
            {"passed", r.passed}};
}

template <int Dim>
Json run_duality(Context& ctx, const std::string& hash) {
    const Json& c = ctx.config;
    const auto eps_list = reals(c, "eps_list");
    const auto t_list = reals(c, "t_list");
    std::vector<std::size_t> n_list;
    for (const auto& v : c.at("n_list")) {
        require(v.is_number_unsigned() && v.get<std::size_t>() >= 1 && v.get<std::size_t>() <= 6,
                "n_list entries must be integers in [1, 6]");
        n_list.push_back(v.get<std::size_t>());
    }
    std::vector<Inelasticity> epss;
    for (double e : eps_list) epss.push_back(inelasticity(e));
    for (double t : t_list) require(t >= 0.0, "t_list entries must be >= 0");
    const double sigma = real(c, "sigma"), length = real(c, "length"), temperature = real(c, "temperature");
    require(sigma > 0.0 && length > 0.0 && temperature > 0.0, "sigma, length and temperature must be > 0");
    const std::string obs = c.at("observable").get<std::string>();
    std::function<double(const PhasePoint<Dim>&)> b1;
    if (obs == "energy") {
        b1 = [](const PhasePoint<Dim>& x) { return 0.5 * x.p.squaredNorm(); };
    } else if (obs == "mass") {
        b1 = [](const PhasePoint<Dim>&) { return 1.0; };
    } else if (obs == "momentum") {
        b1 = [](const PhasePoint<Dim>& x) { return x.p[0]; };
    } else {
        throw ConfigError("observable must be 'energy', 'mass' or 'momentum'");
    }
    const std::size_t samples = count(c, "mc_samples");
    require(samples >= 2, "mc_samples must be >= 2");
    const auto law = maxwellian_uniform<Dim>(length, temperature);
    const std::uint64_t seed = seed_of(c);

    Json cells = Json::array();
    std::string csv = "eps,t,n_particles,estimate,stderr,z,observable_side,state_side,initial_value,seed\n";
    double max_z = 0.0;
    for (std::size_t a = 0; a < epss.size(); ++a) {
        for (std::size_t b = 0; b < t_list.size(); ++b) {
            for (std::size_t n : n_list) {
                FlowParams flow;
                flow.sigma = sigma;
                flow.eps = epss[a];
                flow.domain = Domain::periodic(length);
                DualityOptions o;
                o.n_particles = n;
                o.mc_samples = samples;
                o.seed = derive_seed(seed, {a, b, n});
                o.threads = ctx.threads;
                o.adjoint_route = c.at("adjoint_route").get<bool>();
                const auto r = duality_residual<Dim>(b1, law, t_list[b], flow, o);
                Json cell = to_json(r);
                cell["eps"] = eps_list[a];
                cell["t"] = t_list[b];
                cell["n_particles"] = n;
                cell["seed"] = o.seed;
                cell["config_hash"] = hash;
                cells.push_back(cell);
                max_z = std::max(max_z, r.z);
                if (o.adjoint_route) max_z = std::max(max_z, r.adjoint_z);
                for (double v : {eps_list[a], t_list[b], static_cast<double>(n), r.residual, r.stderr_, r.z,
                                 r.observable_side, r.state_side, r.initial_value}) {
                    csv += format_double(v) + ",";
                }
                csv += std::to_string(o.seed) + "\n";
            }
        }
    }
    write_text(ctx.out / "duality.csv", csv);
    ctx.ok = max_z < 3.0;
    return {{"cells", cells}, {"max_abs_z", max_z}, {"all_within_3", max_z < 3.0}};
}

template <int Dim>
Json run_enskog(Context& ctx) {
    const Json& c = ctx.config;
    const Inelasticity eps = inelasticity(real(c, "eps"));
    const double n = real(c, "n"), temperature = real(c, "temperature"), sigma = real(c, "sigma");
    require(n > 0.0 && temperature > 0.0 && sigma >= 0.0, "n, temperature must be > 0 and sigma >= 0");
    CollisionIntegralOptions o;
    o.mc_budget = count(c, "mc_budget");
    o.seed = seed_of(c);
    o.threads = ctx.threads;
    o.proposal_temperature = real(c, "proposal_temperature");
    require(o.proposal_temperature > 0.0, "proposal_temperature must be > 0");
    require(o.mc_budget >= 2, "mc_budget must be >= 2");
    o.order = static_cast<int>(count(c, "order"));
    require(o.order == 0, "collision-integral order >= 1 is not implemented; use order 0");
    const std::string mode = c.at("mode").get<std::string>();
    const auto f1 = maxwellian_velocity_density<Dim>(n, temperature, 1.0);
    if (mode == "moments") {
        const auto m = collision_integral_moments<Dim>(f1, sigma, eps, o);
        return {{"mass", to_json(m.mass)}, {"momentum", to_json(m.momentum)}, {"energy", to_json(m.energy)}};
    }
    require(mode == "point", "mode must be 'moments' or 'point'");
    PhasePoint<Dim> x;
    x.q = vector_from<Dim>(c.at("point").at("q"), "point.q");
    x.p = vector_from<Dim>(c.at("point").at("p"), "point.p");
    const auto e = enskog_collision_integral<Dim>(product_closure(f1), x, sigma, eps, o);
    Json results = {{"estimate", to_json(e)}};
    if constexpr (Dim == 1) {
        const auto [value, err] = enskog_collision_integral_halfline(product_closure(f1), x, sigma, eps);
        results["halfline"] = {{"value", value}, {"error", err}};
    }
    return results;
}

Json run_bgl(Context& ctx) {
    const Json& c = ctx.config;
    BgStudyConfig b;
    b.sigma_list = reals(c, "sigma_list");
    b.n_particles = count(c, "n_particles");
    b.number_density = real(c, "number_density");
    b.eps = inelasticity(real(c, "eps")).epsilon();
    b.temperature = real(c, "temperature");
    b.t_list = reals(c, "t_list");
    b.replicas = count(c, "replicas");
    b.seed = seed_of(c);
    b.dsmc_samples = count(c, "dsmc_samples");
    b.dsmc_cells = count(c, "dsmc_cells");
    b.floor_repeats = count(c, "floor_repeats");
    b.energy_tolerance = real(c, "energy_tolerance");
    b.threads = ctx.threads;
    const Json& g = c.at("grid");
    try {
        b.grid.q = Grid1D(0.0, 1.0, static_cast<int>(count(g, "q_bins")));
        b.grid.p = Grid1D(real(g, "p_lo"), real(g, "p_hi"), static_cast<int>(count(g, "p_bins")));
        b.grid.pair_q = Grid1D(0.0, 1.0, static_cast<int>(count(g, "pair_q_bins")));
        b.grid.pair_p = Grid1D(real(g, "pair_p_lo"), real(g, "pair_p_hi"), static_cast<int>(count(g, "pair_p_bins")));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("grid: ") + e.what());
    }
    require(b.grid.pair_q.bins * b.grid.pair_p.bins <= 64, "pair grid must have at most 64 coarse cells");
    require(b.replicas >= 2 && b.floor_repeats >= 2, "replicas and floor_repeats must be >= 2");
    require(b.dsmc_samples >= 2, "dsmc_samples must be >= 2");
    require(!b.sigma_list.empty() && !b.t_list.empty(), "sigma_list and t_list must be non-empty");
    const double length = static_cast<double>(b.n_particles) / b.number_density;
    for (double s : b.sigma_list) {
        require(s > 0.0 && static_cast<double>(b.n_particles) * s / length < 0.2,
                "every sigma must satisfy 0 < N sigma / L < 0.2 (dilute regime)");
    }
    const auto report = bg_study(b);
    write_text(ctx.out / "bgl-study.csv", chaos_csv(report));
    ctx.ok = report.verdicts.d1_nonincreasing && report.verdicts.g2_at_floor && report.verdicts.energy_consistent;
    return to_json(report);
}

Json dispatch(const std::string& cmd, Context& ctx, const std::string& hash) {
    if (cmd == "simulate") return dimension(ctx.config) == 1 ? run_simulate<1>(ctx) : run_simulate<3>(ctx);
    if (cmd == "dsmc") return run_dsmc(ctx);
    if (cmd == "collision-check") return run_collision_check(ctx);
    if (cmd == "cumulant-check") return run_cumulant_check(ctx);
    if (cmd == "duality") return dimension(ctx.config) == 1 ? run_duality<1>(ctx, hash) : run_duality<3>(ctx, hash);
    if (cmd == "enskog-integral") return dimension(ctx.config) == 1 ? run_enskog<1>(ctx) : run_enskog<3>(ctx);
    if (cmd == "bgl-study") return run_bgl(ctx);
    throw std::logic_error("unknown subcommand " + cmd);
}

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    std::vector<std::string> sets;
    unsigned threads = 1;
    bool verify = false;
};

Json resolve(const std::string& cmd, const Options& o) {
    Json config = defaults_for(cmd);
    if (!o.config.empty()) {
        std::ifstream in(o.config);
        if (!in) throw ConfigError("cannot read config file " + o.config);
        Json file = Json::parse(in, nullptr, false, true);
        if (file.is_discarded()) throw ConfigError("config file " + o.config + " is not valid JSON");
        merge_checked(config, file, "");
    }
    for (const auto& s : o.sets) apply_override(config, s);
    if (o.seed) config["seed"] = *o.seed;
    return config;
}

int verify(const std::string& cmd, const Options& o) {
    const fs::path artifact = fs::path(o.out) / (cmd + ".json");
    std::ifstream in(artifact);
    if (!in) {
        std::cerr << "verify: cannot read " << artifact << "\n";
        return kExitVerify;
    }
    const Json doc = Json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.contains("config") || !doc.contains("config_hash")) {
        std::cerr << "verify: " << artifact << " is not a run artifact\n";
        return kExitVerify;
    }
    const std::string recomputed = config_hash(doc["config"]);
    if (recomputed != doc["config_hash"].get<std::string>()) {
        std::cerr << "verify: embedded hash " << doc["config_hash"].get<std::string>() << " does not match "
                  << recomputed << "\n";
        return kExitVerify;
    }
    if (!o.config.empty() || !o.sets.empty() || o.seed) {
        const std::string expected = config_hash(resolve(cmd, o));
        if (expected != recomputed) {
            std::cerr << "verify: artifact config " << recomputed << " differs from the given config " << expected
                      << "\n";
            return kExitVerify;
        }
    }
    std::cout << "verified " << artifact.string() << " " << recomputed << "\n";
    return 0;
}

int run(const std::string& cmd, const Options& o) {
    if (o.verify) return verify(cmd, o);
    Json config;
    std::string hash;
    try {
        if (o.threads < 1) throw ConfigError("--threads must be >= 1");
        config = resolve(cmd, o);
        hash = config_hash(config);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    Context ctx{config, fs::path(o.out), o.threads};
    try {
        Json results = dispatch(cmd, ctx, hash);
        const Json doc = {{"command", cmd}, {"config", config}, {"config_hash", hash}, {"results", results}};
        write_text(ctx.out / (cmd + ".json"), doc.dump(2) + "\n");
        std::cout << cmd << ": " << (ctx.ok ? "ok" : "FAILED") << " (" << (ctx.out / (cmd + ".json")).string()
                  << ")\n";
        return ctx.ok ? 0 : kExitFailed;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const GuardAbort& e) {
        const Json diag = {{"command", cmd},
                           {"error", "guard_abort"},
                           {"message", e.what()},
                           {"config", config},
                           {"config_hash", hash}};
        try {
            write_text(ctx.out / (cmd + ".error.json"), diag.dump(2) + "\n");
        } catch (const std::exception&) {
        }
        std::cerr << "guard abort: " << e.what() << "\n" << diag.dump() << "\n";
        return kExitGuard;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const Json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailed;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Inelastic hard-sphere dynamics, kinetic equations and scaling studies"};
    app.require_subcommand(1);
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"simulate", "event-driven run: snapshots and event log"},
        {"dsmc", "DSMC solution of the 1D limit equation: histograms and moments"},
        {"collision-check", "randomised collision-algebra property suite"},
        {"cumulant-check", "partition and cumulant property suite"},
        {"duality", "duality residuals over an (eps, t, N) grid"},
        {"enskog-integral", "collision-integral evaluation"},
        {"bgl-study", "scaling study of the rod gas against the limit equation"},
    };
    Options options;
    std::uint64_t seed = 0;
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", options.config, "JSON config file");
        sub->add_option("--seed", seed, "master seed (overrides the config)");
        sub->add_option("--out", options.out, "output directory")->capture_default_str();
        sub->add_option("--set", options.sets, "override key=value (dotted keys, JSON values)");
        sub->add_option("--threads", options.threads, "worker threads; results do not depend on it")
            ->capture_default_str();
        sub->add_flag("--verify", options.verify, "recompute and check the config hash of an existing artifact");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    for (auto* sub : app.get_subcommands()) {
        if (sub->count("--seed") > 0) options.seed = seed;
        return run(sub->get_name(), options);
    }
    return kExitConfig;
}
