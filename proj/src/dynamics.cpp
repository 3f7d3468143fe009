#include "granular/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace granular {

namespace {

// Time until |r + v tau| = sigma for an approaching pair; nullopt when the
// pair is separating, grazing, or misses.
template <int Dim>
std::optional<double> contact_time(const Vector<Dim>& r, const Vector<Dim>& v, double sigma) {
    const double b = r.dot(v);
    if (!(b < 0.0)) return std::nullopt;
    const double c = r.squaredNorm() - sigma * sigma;
    if (c <= 0.0) return 0.0;
    const double vv = v.squaredNorm();
    const double disc = b * b - vv * c;
    if (!(disc > 0.0)) return std::nullopt;
    return c / (-b + std::sqrt(disc));
}

double positive_mod(double x, double period) {
    double y = std::fmod(x, period);
    if (y < 0.0) y += period;
    return y;
}

// Both gap closures of a rod pair on a line or circle; dq = qj - qi, dv = pi - pj.
std::optional<double> rod_contact_time(double dq, double dv, double sigma, const Domain& domain) {
    if (dv == 0.0) return std::nullopt;
    if (domain.is_periodic()) {
        const double L = domain.length();
        const double right = positive_mod(dq, L); // j ahead of i
        const double left = L - right;            // i ahead of j
        if (dv > 0.0) return std::max(right - sigma, 0.0) / dv;
        return std::max(left - sigma, 0.0) / (-dv);
    }
    if (dq > 0.0) {
        if (dv > 0.0) return std::max(dq - sigma, 0.0) / dv;
        return std::nullopt;
    }
    if (dv < 0.0) return std::max(-dq - sigma, 0.0) / (-dv);
    return std::nullopt;
}

template <int Dim>
std::array<int, 3> offset3(int k) {
    // k in [0, 27): offsets in {-1, 0, 1}^3
    return {k % 3 - 1, (k / 3) % 3 - 1, k / 9 - 1};
}

} // namespace

template <int Dim>
bool EventDrivenSimulator<Dim>::Event::operator>(const Event& o) const {
    if (time != o.time) return time > o.time;
    const auto lo = std::min(a, b), hi = std::max(a, b);
    const auto olo = std::min(o.a, o.b), ohi = std::max(o.a, o.b);
    if (lo != olo) return lo > olo;
    if (hi != ohi) return hi > ohi;
    if (kind != o.kind) return kind > o.kind;
    return slot > o.slot;
}

template <int Dim>
EventDrivenSimulator<Dim>::EventDrivenSimulator(SystemState<Dim> initial, SimulatorOptions options)
    : options_(options) {
    validate(initial);
    if (!(options_.max_event_rate > 0.0)) throw std::invalid_argument("max_event_rate must be > 0");
    const std::size_t n = initial.size();
    if (n >= kNone) throw std::invalid_argument("too many particles");
    const double sign = options_.direction == FlowDirection::backward ? -1.0 : 1.0;
    q_.reserve(n);
    p_.reserve(n);
    for (const auto& x : initial.particles) {
        q_.push_back(initial.domain.is_periodic() ? initial.domain.template wrap<Dim>(x.q) : x.q);
        p_.push_back(sign * x.p);
    }
    for (const auto& x : initial.particles) energy_ += 0.5 * x.p.squaredNorm();
    energy_limit_ = options_.adjoint_energy_cap * std::max(energy_, std::numeric_limits<double>::min());
    meta_ = std::move(initial);
    meta_.particles.clear();
    now_ = start_ = meta_.time;
    t_.assign(n, now_);
    counter_.assign(n, 0);
    hits_.assign(n, 0);

    if constexpr (Dim == 1) {
        if (options_.neighbors == NeighborMode::automatic && n >= 2) {
            adjacency_ = true;
            order_.resize(n);
            std::iota(order_.begin(), order_.end(), 0u);
            std::sort(order_.begin(), order_.end(),
                      [this](std::uint32_t x, std::uint32_t y) { return q_[x][0] < q_[y][0]; });
            rank_.resize(n);
            for (std::uint32_t k = 0; k < n; ++k) rank_[order_[k]] = k;
        }
    } else {
        if (options_.neighbors == NeighborMode::automatic && meta_.domain.is_periodic()) {
            const double L = meta_.domain.length();
            int m = static_cast<int>(std::floor(L / meta_.sigma));
            const int cap = std::max(3, static_cast<int>(std::cbrt(8.0 * static_cast<double>(n))));
            m = std::min(m, cap);
            if (m >= 3) {
                cells_ = true;
                m_ = m;
                width_ = L / m;
                members_.assign(static_cast<std::size_t>(m) * m * m, {});
                cell_of_.resize(n);
                for (std::size_t i = 0; i < n; ++i) {
                    std::array<int, 3> c{};
                    for (int k = 0; k < 3; ++k) {
                        c[k] = std::clamp(static_cast<int>(std::floor(q_[i][k] / width_)), 0, m - 1);
                    }
                    cell_of_[i] = c;
                    members_[cell_index(c)].push_back(static_cast<std::uint32_t>(i));
                }
            }
        }
    }
    schedule_all();
}

template <int Dim>
int EventDrivenSimulator<Dim>::cell_index(const std::array<int, 3>& c) const {
    return (c[2] * m_ + c[1]) * m_ + c[0];
}

template <int Dim>
void EventDrivenSimulator<Dim>::remove_from_cell(std::size_t i) {
    auto& list = members_[cell_index(cell_of_[i])];
    auto it = std::find(list.begin(), list.end(), static_cast<std::uint32_t>(i));
    if (it != list.end()) {
        *it = list.back();
        list.pop_back();
    }
}

template <int Dim>
Vector<Dim> EventDrivenSimulator<Dim>::position_at(std::size_t i, double t) const {
    return q_[i] + p_[i] * (t - t_[i]);
}

template <int Dim>
void EventDrivenSimulator<Dim>::sync(std::size_t i, double t) {
    if (t_[i] == t) return;
    Vector<Dim> q = position_at(i, t);
    q_[i] = meta_.domain.is_periodic() ? meta_.domain.template wrap<Dim>(q) : q;
    t_[i] = t;
}

template <int Dim>
bool EventDrivenSimulator<Dim>::valid(const Event& e) const {
    if (counter_[e.a] != e.ca) return false;
    if (e.b != kNone && counter_[e.b] != e.cb) return false;
    return true;
}

template <int Dim>
void EventDrivenSimulator<Dim>::schedule_all() {
    const std::size_t n = q_.size();
    if (adjacency_) {
        const std::uint32_t slots = meta_.domain.is_periodic() ? n : n - 1;
        for (std::uint32_t s = 0; s < slots; ++s) predict_gap(s);
        return;
    }
    if (cells_) {
        for (std::size_t i = 0; i < n; ++i) {
            predict_crossing(i);
            const auto& c = cell_of_[i];
            for (int k = 0; k < 27; ++k) {
                const auto d = offset3<Dim>(k);
                std::array<int, 3> nc{};
                Vector<Dim> shift = Vector<Dim>::Zero();
                for (int a = 0; a < Dim; ++a) {
                    int x = c[a] + d[a];
                    if (x < 0) {
                        x += m_;
                        shift[a] = -meta_.domain.length();
                    } else if (x >= m_) {
                        x -= m_;
                        shift[a] = meta_.domain.length();
                    }
                    nc[a] = x;
                }
                for (auto j : members_[cell_index(nc)]) {
                    if (j > i) predict_pair(i, j, shift, false);
                }
            }
        }
        return;
    }
    const bool images = Dim == 3 && meta_.domain.is_periodic();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) predict_pair(i, j, Vector<Dim>::Zero(), images);
    }
}

template <int Dim>
void EventDrivenSimulator<Dim>::predict_gap(std::uint32_t slot) {
    const std::size_t n = order_.size();
    const std::uint32_t a = order_[slot];
    const std::uint32_t b = order_[(slot + 1) % n];
    const double qa = position_at(a, now_)[0];
    const double qb = position_at(b, now_)[0];
    double gap = qb - qa;
    if (meta_.domain.is_periodic()) gap = positive_mod(gap, meta_.domain.length());
    gap -= meta_.sigma;
    const double v = p_[a][0] - p_[b][0];
    if (!(v > 0.0)) return;
    const double tau = std::max(gap, 0.0) / v;
    queue_.push(Event{now_ + tau, a, b, 0, slot, counter_[a], counter_[b]});
}

template <int Dim>
void EventDrivenSimulator<Dim>::predict_pair(std::size_t i, std::size_t j, const Vector<Dim>& shift,
                                             bool images) {
    const Vector<Dim> qi = position_at(i, now_);
    const Vector<Dim> qj = position_at(j, now_) + shift;
    const Vector<Dim> v = p_[i] - p_[j];
    std::optional<double> tau;
    if constexpr (Dim == 1) {
        tau = rod_contact_time(qj[0] - qi[0], v[0], meta_.sigma, meta_.domain);
    } else {
        if (images) {
            const double L = meta_.domain.length();
            const Vector<Dim> r0 = meta_.domain.template displacement<Dim>(qi, qj);
            for (int k = 0; k < 27; ++k) {
                const auto d = offset3<Dim>(k);
                Vector<Dim> r = r0;
                for (int a = 0; a < 3; ++a) r[a] += d[a] * L;
                if (auto t = contact_time<Dim>(r, v, meta_.sigma); t && (!tau || *t < *tau)) tau = t;
            }
            const double speed = v.norm();
            if (speed == 0.0) return;
            const double horizon = (0.5 * L - meta_.sigma) / speed;
            if (!tau || *tau > horizon) {
                queue_.push(Event{now_ + horizon, static_cast<std::uint32_t>(i),
                                  static_cast<std::uint32_t>(j), 2, 0, counter_[i], counter_[j]});
                return;
            }
        } else {
            const Vector<Dim> r = cells_ ? Vector<Dim>(qi - qj)
                                         : meta_.domain.template displacement<Dim>(qi, qj);
            tau = contact_time<Dim>(r, v, meta_.sigma);
        }
    }
    if (!tau) return;
    queue_.push(Event{now_ + *tau, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), 0, 0,
                      counter_[i], counter_[j]});
}

template <int Dim>
void EventDrivenSimulator<Dim>::predict_crossing(std::size_t i) {
    if constexpr (Dim == 3) {
        const Vector<Dim> q = position_at(i, now_);
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t which = 0;
        for (int k = 0; k < 3; ++k) {
            const double v = p_[i][k];
            if (v == 0.0) continue;
            const double lo = cell_of_[i][k] * width_;
            const double tau = v > 0.0 ? (lo + width_ - q[k]) / v : (lo - q[k]) / v;
            if (tau < best) {
                best = tau;
                which = static_cast<std::uint32_t>(2 * k + (v > 0.0 ? 1 : 0));
            }
        }
        if (!std::isfinite(best)) return;
        queue_.push(Event{now_ + std::max(best, 0.0), static_cast<std::uint32_t>(i), kNone, 1, which,
                          counter_[i], 0});
    } else {
        (void)i;
    }
}

template <int Dim>
void EventDrivenSimulator<Dim>::predict_particle(std::size_t i, std::size_t skip) {
    const std::size_t n = q_.size();
    if (cells_) {
        predict_crossing(i);
        const auto& c = cell_of_[i];
        for (int k = 0; k < 27; ++k) {
            const auto d = offset3<Dim>(k);
            std::array<int, 3> nc{};
            Vector<Dim> shift = Vector<Dim>::Zero();
            for (int a = 0; a < Dim; ++a) {
                int x = c[a] + d[a];
                if (x < 0) {
                    x += m_;
                    shift[a] = -meta_.domain.length();
                } else if (x >= m_) {
                    x -= m_;
                    shift[a] = meta_.domain.length();
                }
                nc[a] = x;
            }
            for (auto j : members_[cell_index(nc)]) {
                if (j != i && j != skip) predict_pair(i, j, shift, false);
            }
        }
        return;
    }
    const bool images = Dim == 3 && meta_.domain.is_periodic();
    for (std::size_t j = 0; j < n; ++j) {
        if (j != i && j != skip) predict_pair(i, j, Vector<Dim>::Zero(), images);
    }
}

template <int Dim>
bool EventDrivenSimulator<Dim>::collide_pair(std::size_t a, std::size_t b, TrajectoryLog<Dim>* log) {
    const std::size_t i = std::min(a, b);
    const std::size_t j = std::max(a, b);
    const Vector<Dim> r = meta_.domain.template displacement<Dim>(q_[i], q_[j]);
    const double dist = r.norm();
    if (!(dist > 0.0)) throw OverlapError("coincident particle centres at contact");
    const Vector<Dim> contact = r / dist; // from j to i
    const UnitNormal<Dim> eta(-contact);
    const double g = eta.vector().dot(p_[i] - p_[j]);
    if (!(g > 0.0)) return false; // grazing: spheres slide past
    if (dist < meta_.sigma * (1.0 - 1e-9)) {
        std::ostringstream msg;
        msg << "overlap at collision t=" << now_ << " pair (" << i << "," << j << ") distance " << dist
            << " < sigma " << meta_.sigma;
        throw OverlapError(msg.str());
    }
    Inelasticity eps = meta_.eps;
    if (options_.tc_threshold && g < *options_.tc_threshold) eps = Inelasticity(0.0);
    const double e = eps.epsilon();
    double dE = 0.0;
    if (options_.direction == FlowDirection::forward) {
        auto [pi, pj] = collide<double, Dim>(p_[i], p_[j], eta, eps);
        p_[i] = pi;
        p_[j] = pj;
        dE = -e * (1.0 - e) * g * g;
    } else {
        auto [pi, pj] = precollide<double, Dim>(p_[i], p_[j], eta, eps);
        p_[i] = pi;
        p_[j] = pj;
        const double k = 1.0 - 2.0 * e;
        dE = e * (1.0 - e) * g * g / (k * k);
    }
    ++counter_[i];
    ++counter_[j];
    ++n_collisions_;
    if (e > 0.0) ++n_inelastic_;
    dissipated_ -= dE;
    energy_ += dE;
    if (options_.direction == FlowDirection::backward && !(energy_ <= energy_limit_)) {
        std::ostringstream msg;
        msg << "adjoint flow blow-up at t=" << now_ << ": kinetic energy " << energy_
            << " exceeds cap after " << n_collisions_ << " inverse collisions";
        throw AdjointBlowUp(msg.str());
    }
    const double window = std::max(now_ - start_, 1.0);
    for (std::size_t x : {i, j}) {
        if (static_cast<double>(++hits_[x]) > options_.max_event_rate * window) {
            std::ostringstream msg;
            msg << "event storm: particle " << x << " collided " << hits_[x] << " times by t=" << now_
                << " (limit " << options_.max_event_rate
                << " per particle per unit time); likely inelastic collapse";
            throw EventStorm(msg.str());
        }
    }
    if (log) {
        CollisionEvent ev;
        ev.t = now_;
        ev.i = i;
        ev.j = j;
        ev.dim = Dim;
        for (int k = 0; k < Dim; ++k) ev.eta[k] = contact[k];
        ev.g_n = g;
        ev.dE = dE;
        log->events.push_back(ev);
    }
    return true;
}

template <int Dim>
bool EventDrivenSimulator<Dim>::process(const Event& e, TrajectoryLog<Dim>* log) {
    now_ = std::max(now_, e.time);
    if (e.kind == 2) {
        predict_pair(e.a, e.b, Vector<Dim>::Zero(), true);
        return false;
    }
    if (e.kind == 1) {
        if constexpr (Dim == 3) {
            sync(e.a, now_);
            const int k = static_cast<int>(e.slot / 2);
            const bool up = e.slot % 2 == 1;
            remove_from_cell(e.a);
            auto& c = cell_of_[e.a];
            c[k] += up ? 1 : -1;
            if (c[k] < 0) c[k] += m_;
            if (c[k] >= m_) c[k] -= m_;
            // pin the coordinate onto the entered cell's face
            q_[e.a][k] = up ? c[k] * width_ : std::nextafter((c[k] + 1) * width_, 0.0);
            members_[cell_index(c)].push_back(e.a);
            ++counter_[e.a];
            predict_particle(e.a);
        }
        return false;
    }
    sync(e.a, now_);
    sync(e.b, now_);
    const bool hit = collide_pair(e.a, e.b, log);
    if (adjacency_) {
        const std::uint32_t n = static_cast<std::uint32_t>(order_.size());
        const bool periodic = meta_.domain.is_periodic();
        std::array<std::int64_t, 3> slots{static_cast<std::int64_t>(e.slot) - 1, e.slot,
                                          static_cast<std::int64_t>(e.slot) + 1};
        std::vector<std::uint32_t> todo;
        for (auto s : slots) {
            if (periodic) {
                s = (s % n + n) % n;
            } else if (s < 0 || s >= static_cast<std::int64_t>(n) - 1) {
                continue;
            }
            const auto u = static_cast<std::uint32_t>(s);
            if (std::find(todo.begin(), todo.end(), u) == todo.end()) todo.push_back(u);
        }
        if (hit) {
            for (auto s : todo) predict_gap(s);
        }
    } else if (hit) {
        predict_particle(e.a);
        predict_particle(e.b, e.a);
    }
    return hit;
}

template <int Dim>
void EventDrivenSimulator<Dim>::finish(double t_end) {
    now_ = t_end;
    for (std::size_t i = 0; i < q_.size(); ++i) sync(i, t_end);
}

template <int Dim>
void EventDrivenSimulator<Dim>::advance(double dt, TrajectoryLog<Dim>* log) {
    if (!(dt >= 0.0)) throw std::invalid_argument("advance: dt must be >= 0");
    const double t_end = now_ + dt;
    while (!queue_.empty() && queue_.top().time <= t_end) {
        const Event e = queue_.top();
        queue_.pop();
        if (!valid(e)) continue;
        process(e, log);
    }
    finish(t_end);
}

template <int Dim>
std::size_t EventDrivenSimulator<Dim>::run_collisions(std::size_t count, TrajectoryLog<Dim>* log,
                                                      double t_limit) {
    std::size_t done = 0;
    while (done < count) {
        if (queue_.empty() || queue_.top().time > t_limit) {
            if (std::isfinite(t_limit)) finish(t_limit);
            break;
        }
        const Event e = queue_.top();
        queue_.pop();
        if (!valid(e)) continue;
        if (process(e, log) && e.kind == 0) ++done;
    }
    return done;
}

template <int Dim>
SystemState<Dim> EventDrivenSimulator<Dim>::state() const {
    SystemState<Dim> s = meta_;
    s.time = now_;
    const double sign = options_.direction == FlowDirection::backward ? -1.0 : 1.0;
    s.particles.resize(q_.size());
    for (std::size_t i = 0; i < q_.size(); ++i) {
        const Vector<Dim> q = position_at(i, now_);
        s.particles[i].q = meta_.domain.is_periodic() ? meta_.domain.template wrap<Dim>(q) : q;
        s.particles[i].p = sign * p_[i];
    }
    return s;
}

template <int Dim>
void EventDrivenSimulator<Dim>::snapshot(TrajectoryLog<Dim>& log) const {
    log.snapshot_times.push_back(now_);
    log.snapshots.push_back(state());
}

template <int Dim>
double EventDrivenSimulator<Dim>::log_density_factor() const {
    return -2.0 * static_cast<double>(n_inelastic_) * std::log1p(-2.0 * meta_.eps.epsilon());
}

// ---------------------------------------------------------------------------

template <int Dim>
std::optional<double> pair_collision_time(const SystemState<Dim>& state, std::size_t i, std::size_t j,
                                          double horizon) {
    if (i >= state.size() || j >= state.size() || i == j) {
        throw std::out_of_range("pair_collision_time: bad particle indices");
    }
    const auto& a = state.particles[i];
    const auto& b = state.particles[j];
    const Vector<Dim> v = a.p - b.p;
    if constexpr (Dim == 1) {
        auto tau = rod_contact_time(b.q[0] - a.q[0], v[0], state.sigma, state.domain);
        if (!tau || *tau > horizon) return std::nullopt;
        return state.time + *tau;
    } else {
        if (!state.domain.is_periodic()) {
            auto tau = contact_time<Dim>(a.q - b.q, v, state.sigma);
            if (!tau || *tau > horizon) return std::nullopt;
            return state.time + *tau;
        }
        const double L = state.domain.length();
        const double speed = v.norm();
        if (speed == 0.0) return std::nullopt;
        const double step = (0.5 * L - state.sigma) / speed;
        const double limit = std::isfinite(horizon) ? horizon : 10.0 * L / speed;
        for (double t0 = 0.0; t0 <= limit; t0 += step) {
            const Vector<Dim> r0 = state.domain.template displacement<Dim>(a.q - b.q + v * t0,
                                                                             Vector<Dim>::Zero());
            std::optional<double> best;
            for (int k = 0; k < 27; ++k) {
                const auto d = offset3<Dim>(k);
                Vector<Dim> r = r0;
                for (int c = 0; c < 3; ++c) r[c] += d[c] * L;
                if (auto t = contact_time<Dim>(r, v, state.sigma); t && (!best || *t < *best)) best = t;
            }
            if (best && *best <= step) {
                if (t0 + *best > limit) return std::nullopt;
                return state.time + t0 + *best;
            }
        }
        return std::nullopt;
    }
}

template <int Dim>
SystemState<Dim> advance(const SystemState<Dim>& state, double dt, TrajectoryLog<Dim>* log,
                         const SimulatorOptions& options) {
    SimulatorOptions opts = options;
    opts.direction = FlowDirection::forward;
    EventDrivenSimulator<Dim> sim(state, opts);
    if (log && log->snapshots.empty()) sim.snapshot(*log);
    sim.advance(dt, log);
    if (log) sim.snapshot(*log);
    return sim.state();
}

template <int Dim>
SystemState<Dim> advance_backward(const SystemState<Dim>& state, double dt, std::size_t* collisions,
                                  const SimulatorOptions& options) {
    SimulatorOptions opts = options;
    opts.direction = FlowDirection::backward;
    EventDrivenSimulator<Dim> sim(state, opts);
    sim.advance(dt);
    if (collisions) *collisions = sim.inelastic_collisions();
    return sim.state();
}

template <int Dim>
double evolve_observable(const Observable<Dim>& b, const SystemState<Dim>& state0, double t,
                         const SimulatorOptions& options) {
    if (!is_allowed(state0)) return 0.0;
    const SystemState<Dim> s = advance<Dim>(state0, t, nullptr, options);
    return b(std::span<const PhasePoint<Dim>>(s.particles));
}

namespace {
void put(std::string& out, double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    out += buf;
}
} // namespace

template <int Dim>
std::string snapshots_csv(const TrajectoryLog<Dim>& log) {
    std::string out = Dim == 1 ? "t,particle,qx,px\n" : "t,particle,qx,qy,qz,px,py,pz\n";
    for (std::size_t s = 0; s < log.snapshots.size(); ++s) {
        const auto& st = log.snapshots[s];
        for (std::size_t i = 0; i < st.size(); ++i) {
            put(out, log.snapshot_times[s]);
            out += ',' + std::to_string(i);
            for (int k = 0; k < Dim; ++k) {
                out += ',';
                put(out, st.particles[i].q[k]);
            }
            for (int k = 0; k < Dim; ++k) {
                out += ',';
                put(out, st.particles[i].p[k]);
            }
            out += '\n';
        }
    }
    return out;
}

std::string events_csv(std::span<const CollisionEvent> events, int dim) {
    std::string out = dim == 1 ? "t,i,j,eta_x,g_n,dE\n" : "t,i,j,eta_x,eta_y,eta_z,g_n,dE\n";
    for (const auto& e : events) {
        put(out, e.t);
        out += ',' + std::to_string(e.i) + ',' + std::to_string(e.j);
        for (int k = 0; k < dim; ++k) {
            out += ',';
            put(out, e.eta[k]);
        }
        out += ',';
        put(out, e.g_n);
        out += ',';
        put(out, e.dE);
        out += '\n';
    }
    return out;
}

template class EventDrivenSimulator<1>;
template class EventDrivenSimulator<3>;

#define GRANULAR_INSTANTIATE_DYNAMICS(D)                                                              \
    template std::optional<double> pair_collision_time<D>(const SystemState<D>&, std::size_t,         \
                                                          std::size_t, double);                      \
    template SystemState<D> advance<D>(const SystemState<D>&, double, TrajectoryLog<D>*,              \
                                       const SimulatorOptions&);                                      \
    template SystemState<D> advance_backward<D>(const SystemState<D>&, double, std::size_t*,          \
                                                const SimulatorOptions&);                             \
    template double evolve_observable<D>(const Observable<D>&, const SystemState<D>&, double,         \
                                         const SimulatorOptions&);                                    \
    template std::string snapshots_csv<D>(const TrajectoryLog<D>&);

GRANULAR_INSTANTIATE_DYNAMICS(1)
GRANULAR_INSTANTIATE_DYNAMICS(3)

} // namespace granular
