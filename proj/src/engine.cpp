#include "mergesim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <stdexcept>

namespace mergesim {

namespace {

constexpr std::uint64_t kMainStream = 0x6d61696eULL;
constexpr std::uint64_t kRampStream = 0x72616d70ULL;
constexpr std::uint64_t kPolicyStream = 0x706f6c69ULL;

int av_period(double av_fraction) {
    if (av_fraction <= 0.0) return 0;  // no AVs
    return std::max(1, static_cast<int>(std::floor(1.0 / av_fraction)));
}

void append_route_arrivals(std::vector<Arrival>& out, RouteId route, double inflow_vph,
                           double av_fraction, const ScenarioConfig& cfg,
                           RngStream rng) {
    if (inflow_vph <= 0.0) return;
    double nominal_headway = 3600.0 / inflow_vph;  // s
    double episode_end = cfg.horizon * cfg.dt;
    int period = route == RouteId::Main ? av_period(av_fraction) : 0;
    double t = 0.0;
    int seq = 0;
    while (true) {
        t += nominal_headway * rng.uniform(0.8, 1.2);
        if (t >= episode_end) break;
        ++seq;
        Arrival a;
        a.scheduled_step = static_cast<int>(t / cfg.dt);
        a.route = route;
        a.cls = (period > 0 && seq % period == 0) ? VehClass::Av : VehClass::Human;
        out.push_back(a);
    }
}

}  // namespace

InflowSchedule schedule_inflows(const ScenarioConfig& cfg, std::uint64_t seed) {
    InflowSchedule s;
    s.rng_seed = seed;
    std::vector<Arrival> main, ramp;
    append_route_arrivals(main, RouteId::Main, cfg.main_inflow, cfg.av_fraction, cfg,
                          RngStream::derive(seed, kMainStream));
    append_route_arrivals(ramp, RouteId::Ramp, cfg.ramp_inflow, cfg.av_fraction, cfg,
                          RngStream::derive(seed, kRampStream));
    s.arrivals.reserve(main.size() + ramp.size());
    std::merge(main.begin(), main.end(), ramp.begin(), ramp.end(),
               std::back_inserter(s.arrivals), [](const Arrival& a, const Arrival& b) {
                   if (a.scheduled_step != b.scheduled_step)
                       return a.scheduled_step < b.scheduled_step;
                   return static_cast<int>(a.route) < static_cast<int>(b.route);
               });
    for (std::size_t i = 0; i < s.arrivals.size(); ++i)
        s.arrivals[i].id = static_cast<int>(i);
    return s;
}

const double* find_action(const ActionMap& m, int id) {
    auto it = std::lower_bound(m.begin(), m.end(), id,
                               [](const auto& p, int v) { return p.first < v; });
    if (it != m.end() && it->first == id) return &it->second;
    return nullptr;
}

int WorldState::vehicle_count() const {
    int n = 0;
    for (const auto& lane : edge_vehicles) n += static_cast<int>(lane.size());
    return n;
}

double WorldState::speed_sum() const {
    double s = 0.0;
    for (const auto& lane : edge_vehicles)
        for (const auto& v : lane) s += v.speed;
    return s;
}

const Vehicle* WorldState::find(int id) const {
    for (const auto& lane : edge_vehicles)
        for (const auto& v : lane)
            if (v.id == id) return &v;
    return nullptr;
}

std::optional<Neighbor> WorldState::leader_from(RouteId route, EdgeKind edge,
                                                double position,
                                                const RoadNetwork& net) const {
    const auto& seq = RoadNetwork::route_edges(route);
    std::size_t idx = 0;
    while (seq[idx] != edge) ++idx;
    double ahead = 0.0;  // route distance from `position` to the current edge start
    for (std::size_t k = idx; k < seq.size(); ++k) {
        const auto& lane = on_edge(seq[k]);
        double base = k == idx ? position : 0.0;
        // lane sorted descending: nearest vehicle ahead is the last one whose
        // position exceeds `base`.
        const Vehicle* best = nullptr;
        for (const auto& v : lane) {
            if (v.position > base) best = &v;  // keep the closest-ahead
        }
        if (best) {
            double gap = ahead + (best->position - base) - kVehicleLength;
            return Neighbor{best, gap};
        }
        ahead += net.edge(seq[k]).length - base;
    }
    return std::nullopt;
}

std::optional<Neighbor> WorldState::leader_of(const Vehicle& v,
                                              const RoadNetwork& net) const {
    return leader_from(v.route, v.edge, v.position, net);
}

std::optional<Neighbor> WorldState::follower_of(const Vehicle& v,
                                                const RoadNetwork& net) const {
    const auto& seq = RoadNetwork::route_edges(v.route);
    int idx = 0;
    while (seq[idx] != v.edge) ++idx;
    for (const auto& u : on_edge(v.edge)) {  // descending: first below is nearest
        if (u.position < v.position)
            return Neighbor{&u, v.position - u.position - kVehicleLength};
    }
    double behind = v.position;  // back to the start of the vehicle's edge
    for (int k = idx - 1; k >= 0; --k) {
        const auto& lane = on_edge(seq[k]);
        if (!lane.empty()) {
            const Vehicle& u = lane.front();
            double gap =
                behind + (net.edge(seq[k]).length - u.position) - kVehicleLength;
            return Neighbor{&u, gap};
        }
        behind += net.edge(seq[k]).length;
    }
    return std::nullopt;
}

namespace {

double insertion_safe_speed(const std::optional<Neighbor>& leader,
                            const ActionBounds& bounds, double dt) {
    if (!leader) return std::numeric_limits<double>::infinity();
    double budget = leader->gap +
                    braking_travel(leader->vehicle->speed, bounds.decel_max, dt) -
                    kSafetyMargin;
    if (budget <= 0.0) return 0.0;
    return max_speed_within(budget, bounds.decel_max, dt) + bounds.decel_max * dt;
}

}  // namespace

bool try_insert(WorldState& w, RouteId route, const ScenarioConfig& cfg,
                const IdmParams& idm, const ActionBounds& bounds) {
    auto& queue = w.entry_queues[static_cast<int>(route)];
    if (queue.empty()) return false;
    EdgeKind entry_edge = RoadNetwork::route_edges(route).front();
    auto leader = w.leader_from(route, entry_edge, 0.0, cfg.network);
    double speed =
        std::min(cfg.speed_limit(), insertion_safe_speed(leader, bounds, cfg.dt));
    if (leader && leader->gap < idm.s0 + speed * idm.T_headway) return false;

    const Arrival& a = queue.front();
    Vehicle v;
    v.id = a.id;
    v.cls = a.cls;
    v.route = route;
    v.edge = entry_edge;
    v.position = 0.0;
    v.speed = speed;
    v.entry_time = w.time;
    v.controlled = a.cls == VehClass::Av;
    w.edge_vehicles[static_cast<int>(entry_edge)].push_back(v);  // rearmost slot
    queue.pop_front();
    ++w.cumulative_entered;
    return true;
}

namespace {

struct JunctionState {
    std::optional<MergeCandidate> main, ramp;
};

JunctionState junction_candidates(const WorldState& w, const RoadNetwork& net,
                                  double zone) {
    JunctionState js;
    const auto& main_lane = w.on_edge(EdgeKind::MainPre);
    if (!main_lane.empty()) {
        const Vehicle& v = main_lane.front();
        double d = distance_to_junction(net, v.edge, v.position);
        if (d <= zone) js.main = MergeCandidate{v.id, v.speed, d};
    }
    const auto& ramp_lane = w.on_edge(EdgeKind::Ramp);
    if (!ramp_lane.empty()) {
        const Vehicle& v = ramp_lane.front();
        double d = distance_to_junction(net, v.edge, v.position);
        if (d <= zone) js.ramp = MergeCandidate{v.id, v.speed, d};
    }
    return js;
}

// Merged-order predecessor on the other incoming edge: the vehicle there that
// is closer to the junction than `dist`, with the largest such distance.
const Vehicle* cross_predecessor(const WorldState& w, const RoadNetwork& net,
                                 EdgeKind other_edge, double dist, bool strict,
                                 double range, double* pred_dist) {
    const Vehicle* best = nullptr;
    double best_d = -1.0;
    for (const auto& u : w.on_edge(other_edge)) {
        double d = distance_to_junction(net, u.edge, u.position);
        if (d > range) continue;
        bool closer = strict ? d < dist : d <= dist;
        if (closer && d > best_d) {
            best = &u;
            best_d = d;
        }
    }
    if (best) *pred_dist = best_d;
    return best;
}

}  // namespace

StepEvents step(WorldState& w, const InflowSchedule& sched, const ActionMap& actions,
                const ScenarioConfig& cfg, const IdmParams& idm,
                const ActionBounds& bounds) {
    StepEvents ev;
    const RoadNetwork& net = cfg.network;
    const double dt = cfg.dt;
    const double v_limit = cfg.speed_limit();

    // release due arrivals, then insert until each route blocks
    while (w.next_arrival < sched.arrivals.size() &&
           sched.arrivals[w.next_arrival].scheduled_step <= w.time) {
        const Arrival& a = sched.arrivals[w.next_arrival++];
        w.entry_queues[static_cast<int>(a.route)].push_back(a);
    }
    for (RouteId route : {RouteId::Main, RouteId::Ramp}) {
        while (!w.entry_queues[static_cast<int>(route)].empty()) {
            int id = w.entry_queues[static_cast<int>(route)].front().id;
            if (!try_insert(w, route, cfg, idm, bounds)) break;
            ++ev.entries;
            ev.entered_ids.push_back(id);
        }
    }

    // acceleration pass (reads the pre-integration world only)
    std::array<std::vector<double>, kNumEdges> accel;
    std::size_t actions_used = 0;
    for (int e = 0; e < kNumEdges; ++e) {
        const auto& lane = w.edge_vehicles[e];
        accel[e].resize(lane.size());
        for (std::size_t i = 0; i < lane.size(); ++i) {
            const Vehicle& v = lane[i];
            auto leader = w.leader_of(v, net);
            std::optional<double> lv, lgap;
            if (leader) {
                lv = leader->vehicle->speed;
                lgap = leader->gap;
            }
            double a;
            const double* cmd =
                v.controlled ? find_action(actions, v.id) : nullptr;
            if (cmd) {
                a = *cmd;
                ++actions_used;
            } else {
                a = idm_acceleration(v.speed, lv, lgap, idm);
            }
            a = clamp_action(a, bounds, v.speed, dt);
            a = std::min(a, (v_limit - v.speed) / dt);  // lane speed cap
            a = safety_clamp(a, v.speed, lv, lgap, bounds, dt);
            accel[e][i] = a;
        }
    }
    if (actions_used != actions.size()) {
        for (const auto& [id, value] : actions) {
            const Vehicle* v = w.find(id);
            if (!v || !v->controlled)
                throw std::invalid_argument("action for unknown vehicle id " +
                                            std::to_string(id));
        }
    }

    // junction arbitration: the loser treats the junction as a standing
    // virtual leader for this step
    const double zone = v_limit * dt;
    JunctionState js = junction_candidates(w, net, zone);
    MergeWinner winner = resolve_merge_priority(js.main, js.ramp);
    auto yield_at_junction = [&](EdgeKind edge, const MergeCandidate& c) {
        auto& lane_accel = accel[static_cast<int>(edge)];
        const Vehicle& v = w.on_edge(edge).front();
        double gap = std::max(c.dist_to_junction, 1e-3);
        double a = std::min(lane_accel.front(),
                            idm_acceleration(v.speed, 0.0, gap, idm));
        lane_accel.front() = safety_clamp(a, v.speed, 0.0, c.dist_to_junction,
                                          bounds, dt);
    };
    if (winner == MergeWinner::Main && js.ramp) yield_at_junction(EdgeKind::Ramp, *js.ramp);
    if (winner == MergeWinner::Ramp && js.main) yield_at_junction(EdgeKind::MainPre, *js.main);

    // cross-stream safety: approaching vehicles keep a stopping-distance gap
    // to merged-order predecessors on the other incoming edge
    const double cross_range = stop_travel(v_limit, bounds.decel_max, dt) + 10.0;
    for (EdgeKind edge : {EdgeKind::MainPre, EdgeKind::Ramp}) {
        EdgeKind other =
            edge == EdgeKind::MainPre ? EdgeKind::Ramp : EdgeKind::MainPre;
        bool strict = edge == EdgeKind::MainPre;  // main wins distance ties
        auto& lane = w.edge_vehicles[static_cast<int>(edge)];
        auto& lane_accel = accel[static_cast<int>(edge)];
        for (std::size_t i = 0; i < lane.size(); ++i) {
            double d = distance_to_junction(net, edge, lane[i].position);
            if (d > cross_range) continue;
            double pred_d = 0.0;
            const Vehicle* pred =
                cross_predecessor(w, net, other, d, strict, cross_range, &pred_d);
            if (!pred) continue;
            double gap = d - pred_d - kVehicleLength;
            lane_accel[i] = safety_clamp(lane_accel[i], lane[i].speed, pred->speed,
                                         gap, bounds, dt);
        }
    }

    // integrate simultaneously from the pre-step state
    std::array<std::vector<Vehicle>, kNumEdges> next;
    for (int e = 0; e < kNumEdges; ++e) {
        const auto& lane = w.edge_vehicles[e];
        for (std::size_t i = 0; i < lane.size(); ++i) {
            IntegrateResult r = integrate(lane[i], accel[e][i], dt, net);
            if (r.exited) {
                ++ev.exits;
                ev.exited_ids.push_back(lane[i].id);
                ++w.cumulative_exited;
            } else {
                next[static_cast<int>(r.vehicle.edge)].push_back(r.vehicle);
            }
        }
    }
    for (auto& lane : next) {
        std::sort(lane.begin(), lane.end(), [](const Vehicle& a, const Vehicle& b) {
            if (a.position != b.position) return a.position > b.position;
            return a.id < b.id;
        });
    }
    w.edge_vehicles = std::move(next);
    std::sort(ev.exited_ids.begin(), ev.exited_ids.end());
    ++w.time;
    return ev;
}

std::string EpisodeLog::to_csv() const {
    std::string out = "step,n,sum_speed,entries,exits\n";
    char buf[128];
    for (int t = 0; t < steps(); ++t) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%d,%d\n", t, n[t], sum_speed[t],
                      entries[t], exits[t]);
        out += buf;
    }
    return out;
}

bool EpisodeLog::operator==(const EpisodeLog& other) const {
    auto rec_eq = [](const VehicleRecord& a, const VehicleRecord& b) {
        return a.id == b.id && a.cls == b.cls && a.route == b.route &&
               a.entry_time == b.entry_time && a.exit_time == b.exit_time;
    };
    if (!(horizon == other.horizon && dt == other.dt && v_max == other.v_max &&
          n == other.n && sum_speed == other.sum_speed && entries == other.entries &&
          exits == other.exits && total_entered == other.total_entered &&
          total_exited == other.total_exited &&
          scheduled_arrivals == other.scheduled_arrivals &&
          vehicles.size() == other.vehicles.size()))
        return false;
    for (std::size_t i = 0; i < vehicles.size(); ++i)
        if (!rec_eq(vehicles[i], other.vehicles[i])) return false;
    return true;
}

EpisodeLog run_episode(Controller& controller, const ScenarioConfig& cfg,
                       std::uint64_t seed, EpisodeObserver* observer) {
    cfg.validate();
    InflowSchedule sched = schedule_inflows(cfg, seed);
    IdmParams idm;
    idm.v0 = cfg.speed_limit();
    ActionBounds bounds;

    WorldState w;
    RngStream policy_rng = RngStream::derive(seed, kPolicyStream);

    EpisodeLog log;
    log.horizon = cfg.horizon;
    log.dt = cfg.dt;
    log.v_max = cfg.speed_limit();
    log.scheduled_arrivals = static_cast<long long>(sched.arrivals.size());
    log.n.reserve(cfg.horizon);
    log.sum_speed.reserve(cfg.horizon);
    log.entries.reserve(cfg.horizon);
    log.exits.reserve(cfg.horizon);

    std::map<int, VehicleRecord> records;
    for (int t = 0; t < cfg.horizon; ++t) {
        ActionMap actions = controller.act(w, cfg, policy_rng);
        StepEvents ev = step(w, sched, actions, cfg, idm, bounds);
        for (int id : ev.entered_ids) {
            const Vehicle* v = w.find(id);
            VehicleRecord rec;
            rec.id = id;
            rec.entry_time = t;
            if (v) {
                rec.cls = v->cls;
                rec.route = v->route;
            }
            records[id] = rec;
        }
        for (int id : ev.exited_ids) records[id].exit_time = t;
        if (observer) observer->on_step(w, ev, cfg);
        log.n.push_back(w.vehicle_count());
        log.sum_speed.push_back(w.speed_sum());
        log.entries.push_back(ev.entries);
        log.exits.push_back(ev.exits);
    }
    log.total_entered = w.cumulative_entered;
    log.total_exited = w.cumulative_exited;
    log.vehicles.reserve(records.size());
    for (auto& [id, rec] : records) log.vehicles.push_back(rec);
    return log;
}

}  // namespace mergesim
