#pragma once

#include <optional>

#include "mergesim/network.hpp"

namespace mergesim {

// Bumper-to-bumper geometry: positions are front bumpers, gaps are net of
// the (uniform) vehicle length.
inline constexpr double kVehicleLength = 5.0;  // m

// Strict clearance kept when solving the worst-case stopping inequality.
inline constexpr double kSafetyMargin = 0.1;  // m

struct IdmParams {
    double v0 = 30.0;         // desired speed, m/s
    double T_headway = 1.0;   // s
    double a_max = 2.6;       // m/s^2
    double b_comf = 4.5;      // m/s^2
    double delta = 4.0;
    double s0 = 2.0;          // minimum gap, m
};

struct ActionBounds {
    double accel_max = 2.6;  // m/s^2
    double decel_max = 4.5;  // m/s^2, positive magnitude
};

enum class VehClass { Human = 0, Av = 1 };

struct Vehicle {
    int id = -1;
    VehClass cls = VehClass::Human;
    RouteId route = RouteId::Main;
    EdgeKind edge = EdgeKind::MainPre;
    double position = 0.0;  // m along edge, front bumper
    double speed = 0.0;     // m/s
    int entry_time = 0;     // step index
    bool controlled = false;
};

// Car-following acceleration. Absent leader means free road. `gap` is the
// net bumper gap and must be > 0 when a leader is present.
double idm_acceleration(double speed, std::optional<double> leader_speed,
                        std::optional<double> gap, const IdmParams& p);

// Range clamp to [-decel_max, accel_max]. Throws on non-finite input.
double clamp_action(double accel, const ActionBounds& b);
// Same, plus a lower clip so speed + accel*dt >= 0 (no reverse driving).
double clamp_action(double accel, const ActionBounds& b, double speed, double dt);

// Travel of a vehicle braking at `decel` every step from `speed`, under
// semi-implicit Euler with the speed floored at zero.
double braking_travel(double speed, double decel, double dt);
// Travel if moving one step at `speed` and then braking to a stop.
double stop_travel(double speed, double decel, double dt);
// Largest speed whose stop_travel fits in `budget` meters.
double max_speed_within(double budget, double decel, double dt);

// One-step worst-case stopping rule: the returned acceleration never exceeds
// `accel` and guarantees the net gap stays positive even if the leader
// brakes at decel_max from now on. Absent leader returns `accel` unchanged.
double safety_clamp(double accel, double speed, std::optional<double> leader_speed,
                    std::optional<double> gap, const ActionBounds& b, double dt);

struct MergeCandidate {
    int vehicle_id = -1;
    double speed = 0.0;
    double dist_to_junction = 0.0;
};

enum class MergeWinner { None, Main, Ramp };

// Priority arbitration between the nearest contenders on the two incoming
// edges. Higher speed proceeds; ties go to the main road.
MergeWinner resolve_merge_priority(const std::optional<MergeCandidate>& main,
                                   const std::optional<MergeCandidate>& ramp);

struct IntegrateResult {
    Vehicle vehicle;
    bool exited = false;
};

// Semi-implicit Euler: speed first, then position; transitions onto the next
// route edge carry the positional remainder, and passing the end of
// post_merge exits the network.
IntegrateResult integrate(const Vehicle& v, double accel, double dt,
                          const RoadNetwork& net);

}  // namespace mergesim
