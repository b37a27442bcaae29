#include "mergesim/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mergesim {

double idm_acceleration(double speed, std::optional<double> leader_speed,
                        std::optional<double> gap, const IdmParams& p) {
    double free_term = std::pow(speed / p.v0, p.delta);
    double interaction = 0.0;
    if (leader_speed && gap) {
        double dv = speed - *leader_speed;
        double s_star =
            p.s0 + std::max(0.0, speed * p.T_headway +
                                     speed * dv / (2.0 * std::sqrt(p.a_max * p.b_comf)));
        interaction = (s_star / *gap) * (s_star / *gap);
    }
    return p.a_max * (1.0 - free_term - interaction);
}

double clamp_action(double accel, const ActionBounds& b) {
    if (!std::isfinite(accel))
        throw std::invalid_argument("non-finite acceleration command");
    return std::clamp(accel, -b.decel_max, b.accel_max);
}

double clamp_action(double accel, const ActionBounds& b, double speed, double dt) {
    double a = clamp_action(accel, b);
    return std::max(a, -speed / dt);
}

double braking_travel(double speed, double decel, double dt) {
    if (speed <= 0.0) return 0.0;
    double bdt = decel * dt;
    double m = std::floor(speed / bdt);
    return dt * (m * speed - bdt * m * (m + 1.0) / 2.0);
}

double stop_travel(double speed, double decel, double dt) {
    return speed * dt + braking_travel(speed, decel, dt);
}

double max_speed_within(double budget, double decel, double dt) {
    if (budget <= 0.0) return 0.0;
    double bdt = decel * dt;
    // stop_travel is piecewise linear in v within each braking-step regime m;
    // walk regimes until the inverse lands inside one.
    for (double m = 0.0;; m += 1.0) {
        double v = (budget + bdt * dt * m * (m + 1.0) / 2.0) / (dt * (m + 1.0));
        if (v <= (m + 1.0) * bdt) return std::max(v, 0.0);
    }
}

double safety_clamp(double accel, double speed, std::optional<double> leader_speed,
                    std::optional<double> gap, const ActionBounds& b, double dt) {
    if (!leader_speed || !gap) return accel;
    double leader_next = std::max(0.0, *leader_speed - b.decel_max * dt);
    double budget = *gap + stop_travel(leader_next, b.decel_max, dt) - kSafetyMargin;
    double v_allow = max_speed_within(budget, b.decel_max, dt);
    double a_allow = (v_allow - speed) / dt;
    return std::max(-b.decel_max, std::min(accel, a_allow));
}

MergeWinner resolve_merge_priority(const std::optional<MergeCandidate>& main,
                                   const std::optional<MergeCandidate>& ramp) {
    if (!main && !ramp) return MergeWinner::None;
    if (main && !ramp) return MergeWinner::Main;
    if (!main && ramp) return MergeWinner::Ramp;
    return ramp->speed > main->speed ? MergeWinner::Ramp : MergeWinner::Main;
}

IntegrateResult integrate(const Vehicle& v, double accel, double dt,
                          const RoadNetwork& net) {
    IntegrateResult r;
    r.vehicle = v;
    double speed = std::max(0.0, v.speed + accel * dt);
    double position = v.position + speed * dt;
    EdgeKind edge = v.edge;

    const auto& route = RoadNetwork::route_edges(v.route);
    std::size_t idx = 0;
    while (route[idx] != edge) ++idx;
    while (position > net.edge(edge).length) {
        position -= net.edge(edge).length;
        if (++idx >= route.size()) {
            r.exited = true;
            break;
        }
        edge = route[idx];
    }
    r.vehicle.speed = speed;
    r.vehicle.position = position;
    r.vehicle.edge = edge;
    return r;
}

}  // namespace mergesim
