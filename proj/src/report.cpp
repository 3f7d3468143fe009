#include "granular/report.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace granular {

std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string config_hash(const Json& config) {
    const std::string text = config.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

Json to_json(const Estimate& e) {
    return {{"value", e.value}, {"stderr", e.stderr_}, {"n_samples", e.n_samples}, {"scale", e.scale}};
}

Json to_json(const Moments& m) {
    return {{"t", m.t},
            {"mass", m.mass},
            {"momentum", m.momentum},
            {"energy", m.energy},
            {"temperature", m.temperature}};
}

Json to_json(const DualityResult& r) {
    Json j = {{"estimate", r.residual},
              {"stderr", r.stderr_},
              {"z", r.z},
              {"observable_side", r.observable_side},
              {"state_side", r.state_side},
              {"initial_value", r.initial_value},
              {"scale", r.scale},
              {"n_samples", r.n_samples}};
    if (r.adjoint_stderr > 0.0) {
        j["adjoint"] = {{"estimate", r.adjoint_estimate}, {"stderr", r.adjoint_stderr}, {"z", r.adjoint_z}};
    }
    return j;
}

namespace {

Json grid_json(const Grid1D& g) { return {{"lo", g.lo}, {"hi", g.hi}, {"bins", g.bins}}; }

} // namespace

Json to_json(const BgStudyConfig& c) {
    return {{"sigma_list", c.sigma_list},
            {"n_particles", c.n_particles},
            {"number_density", c.number_density},
            {"eps", c.eps},
            {"temperature", c.temperature},
            {"t_list", c.t_list},
            {"replicas", c.replicas},
            {"seed", c.seed},
            {"grid",
             {{"q_bins", c.grid.q.bins},
              {"p", grid_json(c.grid.p)},
              {"pair_q_bins", c.grid.pair_q.bins},
              {"pair_p", grid_json(c.grid.pair_p)}}},
            {"dsmc_samples", c.dsmc_samples},
            {"dsmc_cells", c.dsmc_cells},
            {"floor_repeats", c.floor_repeats},
            {"energy_tolerance", c.energy_tolerance}};
}

Json to_json(const ChaosReport& r) {
    Json rows = Json::array();
    for (const auto& p : r.per_sigma) {
        rows.push_back({{"sigma", p.sigma},
                        {"t", p.t},
                        {"D1", p.d1},
                        {"D1_err", p.d1_err},
                        {"D1_floor", p.d1_floor},
                        {"G2", p.g2},
                        {"G2_err", p.g2_err},
                        {"G2_floor", p.g2_floor},
                        {"G2_floor_sd", p.g2_floor_sd},
                        {"energy_particle", p.energy_particle},
                        {"energy_particle_err", p.energy_particle_err},
                        {"energy_dsmc", p.energy_dsmc},
                        {"collisions_per_particle", p.collisions_per_particle}});
    }
    return {{"config", to_json(r.config)},
            {"length", r.length},
            {"ensemble_size", r.config.replicas},
            {"per_sigma", rows},
            {"verdicts",
             {{"d1_nonincreasing", r.verdicts.d1_nonincreasing},
              {"g2_at_floor", r.verdicts.g2_at_floor},
              {"energy_consistent", r.verdicts.energy_consistent},
              {"detail", r.verdicts.detail}}}};
}

std::string chaos_csv(const ChaosReport& r) {
    std::string out = "sigma,t,D1,D1_err,D1_floor,G2,G2_err,G2_floor,G2_floor_sd,energy_particle,energy_particle_err,"
                      "energy_dsmc,collisions_per_particle\n";
    for (const auto& p : r.per_sigma) {
        for (double v : {p.sigma, p.t, p.d1, p.d1_err, p.d1_floor, p.g2, p.g2_err, p.g2_floor, p.g2_floor_sd,
                         p.energy_particle, p.energy_particle_err, p.energy_dsmc}) {
            out += format_double(v);
            out += ',';
        }
        out += format_double(p.collisions_per_particle);
        out += '\n';
    }
    return out;
}

} // namespace granular
