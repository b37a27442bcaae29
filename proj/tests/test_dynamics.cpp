#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "mergesim/dynamics.hpp"
#include "mergesim/rng.hpp"

using namespace mergesim;

namespace {

// Independent scalar evaluation of the car-following formula.
double idm_oracle(double v, double v_lead, double gap, const IdmParams& p) {
    double s_star = p.s0 + std::max(0.0, v * p.T_headway +
                                             v * (v - v_lead) /
                                                 (2.0 * std::sqrt(p.a_max * p.b_comf)));
    return p.a_max *
           (1.0 - std::pow(v / p.v0, p.delta) - (s_star / gap) * (s_star / gap));
}

// Brute-force travel: move at the current speed each step, then brake.
double brute_stop_travel(double v, double b, double dt) {
    double pos = 0.0;
    while (v > 0.0) {
        pos += v * dt;
        v = std::max(0.0, v - b * dt);
    }
    return pos;
}

double brute_braking_travel(double v, double b, double dt) {
    return brute_stop_travel(std::max(0.0, v - b * dt), b, dt);
}

// Bisection inverse of brute_stop_travel.
double brute_max_speed_within(double budget, double b, double dt) {
    if (budget <= 0.0) return 0.0;
    double lo = 0.0, hi = 1000.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (brute_stop_travel(mid, b, dt) <= budget) lo = mid;
        else hi = mid;
    }
    return lo;
}

}  // namespace

TEST_CASE("idm free road") {
    IdmParams p;
    CHECK(idm_acceleration(p.v0, std::nullopt, std::nullopt, p) ==
          doctest::Approx(0.0));
    CHECK(idm_acceleration(0.0, std::nullopt, std::nullopt, p) ==
          doctest::Approx(p.a_max));
}

TEST_CASE("idm car following matches the formula oracle") {
    IdmParams p;  // v0=30, T=1, a=2.6, b=4.5, delta=4, s0=2
    double got = idm_acceleration(10.0, 10.0, 15.0, p);
    CHECK(got == doctest::Approx(idm_oracle(10.0, 10.0, 15.0, p)).epsilon(1e-12));
    CHECK(got == doctest::Approx(0.9039012345679013).epsilon(1e-12));
    // approaching leader brakes harder than steady following
    CHECK(idm_acceleration(10.0, 5.0, 15.0, p) < got);
}

TEST_CASE("clamp_action range") {
    ActionBounds b;
    CHECK(clamp_action(5.0, b) == 2.6);
    CHECK(clamp_action(-10.0, b) == -4.5);
    CHECK(clamp_action(1.0, b) == 1.0);
    CHECK_THROWS_AS(clamp_action(std::nan(""), b), std::invalid_argument);
    CHECK_THROWS_AS(clamp_action(INFINITY, b), std::invalid_argument);
}

TEST_CASE("clamp_action no-reverse clip and idempotence") {
    ActionBounds b;
    // at 1 m/s, dt 0.5: lower clip is -2
    CHECK(clamp_action(-4.5, b, 1.0, 0.5) == doctest::Approx(-2.0));
    RngStream rng(7);
    for (int i = 0; i < 200; ++i) {
        double x = rng.uniform(-20.0, 20.0);
        CHECK(clamp_action(clamp_action(x, b), b) == clamp_action(x, b));
    }
}

TEST_CASE("stopping travel matches brute force") {
    RngStream rng(11);
    for (int i = 0; i < 300; ++i) {
        double v = rng.uniform(0.0, 40.0);
        CHECK(stop_travel(v, 4.5, 0.5) ==
              doctest::Approx(brute_stop_travel(v, 4.5, 0.5)).epsilon(1e-12));
        CHECK(braking_travel(v, 4.5, 0.5) ==
              doctest::Approx(brute_braking_travel(v, 4.5, 0.5)).epsilon(1e-12));
    }
}

TEST_CASE("max_speed_within inverts stop_travel") {
    RngStream rng(13);
    for (int i = 0; i < 200; ++i) {
        double budget = rng.uniform(0.01, 300.0);
        double v = max_speed_within(budget, 4.5, 0.5);
        CHECK(v == doctest::Approx(brute_max_speed_within(budget, 4.5, 0.5))
                       .epsilon(1e-7));
        CHECK(brute_stop_travel(v, 4.5, 0.5) <= budget + 1e-9);
        CHECK(brute_stop_travel(v + 1e-6, 4.5, 0.5) >= budget - 1e-9);
    }
}

TEST_CASE("safety clamp basics") {
    ActionBounds b;
    // huge gap: unconstrained
    CHECK(safety_clamp(2.6, 20.0, 20.0, 500.0, b, 0.5) == 2.6);
    // no leader: pass-through
    CHECK(safety_clamp(2.6, 20.0, std::nullopt, std::nullopt, b, 0.5) == 2.6);
    // maximal braking always allowed
    RngStream rng(17);
    for (int i = 0; i < 100; ++i) {
        double v = rng.uniform(0.0, 30.0);
        double lv = rng.uniform(0.0, 30.0);
        double gap = rng.uniform(0.1, 100.0);
        CHECK(safety_clamp(-4.5, v, lv, gap, b, 0.5) == -4.5);
        // never increases the command
        double a_in = rng.uniform(-4.5, 2.6);
        CHECK(safety_clamp(a_in, v, lv, gap, b, 0.5) <= a_in);
    }
}

TEST_CASE("safety clamp bound agrees with the stopping-distance oracle") {
    ActionBounds b;
    double dt = 0.5;
    // tight closing situation from the module examples
    double v = 10.0, lv = 2.0, gap = 0.5;
    double a = safety_clamp(2.6, v, lv, gap, b, dt);
    double leader_next = std::max(0.0, lv - b.decel_max * dt);
    double budget =
        gap + brute_stop_travel(leader_next, b.decel_max, dt) - kSafetyMargin;
    double v_allow = brute_max_speed_within(budget, b.decel_max, dt);
    double expected = std::max(-b.decel_max, std::min(2.6, (v_allow - v) / dt));
    CHECK(a == doctest::Approx(expected).epsilon(1e-7));
    CHECK(a < 0.0);  // must brake
}

TEST_CASE("safety clamp keeps the gap positive under worst-case braking") {
    ActionBounds b;
    const double dt = 0.5;
    RngStream rng(23);
    for (int i = 0; i < 500; ++i) {
        double lv = rng.uniform(0.0, 30.0);
        double gap = rng.uniform(0.2, 120.0);
        // start from a state satisfying the stopping-distance invariant
        double budget = gap + brute_braking_travel(lv, b.decel_max, dt) - kSafetyMargin;
        double v_inv =
            brute_max_speed_within(budget, b.decel_max, dt) + b.decel_max * dt;
        double v = rng.uniform(0.0, std::min(v_inv, 30.0));
        double a = safety_clamp(b.accel_max, v, lv, gap, b, dt);
        // one step with the chosen action while the leader brakes, then both
        // brake to a stop
        double vf = std::max(0.0, v + a * dt);
        double vl = std::max(0.0, lv - b.decel_max * dt);
        double g = gap + (vl - vf) * dt;
        CHECK(g > 0.0);
        while (vf > 0.0 || vl > 0.0) {
            vf = std::max(0.0, vf - b.decel_max * dt);
            vl = std::max(0.0, vl - b.decel_max * dt);
            g += (vl - vf) * dt;
            CHECK(g > 0.0);
        }
    }
}

TEST_CASE("merge priority") {
    MergeCandidate main{1, 12.0, 5.0};
    MergeCandidate ramp{2, 8.0, 5.0};
    CHECK(resolve_merge_priority(main, ramp) == MergeWinner::Main);
    CHECK(resolve_merge_priority(main, std::nullopt) == MergeWinner::Main);
    CHECK(resolve_merge_priority(std::nullopt, ramp) == MergeWinner::Ramp);
    CHECK(resolve_merge_priority(std::nullopt, std::nullopt) == MergeWinner::None);
    // faster ramp wins, equal speeds go to main
    MergeCandidate fast_ramp{2, 14.0, 5.0};
    CHECK(resolve_merge_priority(main, fast_ramp) == MergeWinner::Ramp);
    MergeCandidate tied{2, 12.0, 5.0};
    CHECK(resolve_merge_priority(main, tied) == MergeWinner::Main);
    // pure function: repeated calls agree
    CHECK(resolve_merge_priority(main, ramp) == resolve_merge_priority(main, ramp));
}

TEST_CASE("integrate") {
    RoadNetwork net = build_simple_merge();
    Vehicle v;
    v.route = RouteId::Main;
    v.edge = EdgeKind::MainPre;

    v.position = 100.0;
    v.speed = 10.0;
    auto r = integrate(v, 0.0, 0.5, net);
    CHECK(r.vehicle.position == doctest::Approx(105.0));
    CHECK(!r.exited);

    v.speed = 1.0;
    r = integrate(v, -4.5, 0.5, net);
    CHECK(r.vehicle.speed == 0.0);  // floored, no reverse

    v.position = 599.0;
    v.speed = 10.0;
    r = integrate(v, 0.0, 0.5, net);
    CHECK(r.vehicle.edge == EdgeKind::PostMerge);
    CHECK(r.vehicle.position == doctest::Approx(4.0));

    v.edge = EdgeKind::PostMerge;
    v.position = 99.0;
    v.speed = 10.0;
    r = integrate(v, 0.0, 0.5, net);
    CHECK(r.exited);
}

TEST_CASE("idm platoon holds its equilibrium") {
    IdmParams p;
    const double v_eq = 15.0;
    const double dt = 0.5;
    double s_star = p.s0 + v_eq * p.T_headway;
    double gap_eq = s_star / std::sqrt(1.0 - std::pow(v_eq / p.v0, p.delta));

    // scripted lead vehicle at constant speed; five IDM followers behind
    const int n = 5;
    std::vector<double> pos(n + 1), speed(n + 1, v_eq);
    pos[0] = 1000.0;
    for (int i = 1; i <= n; ++i) pos[i] = pos[i - 1] - gap_eq - kVehicleLength;
    for (int step = 0; step < 100; ++step) {
        std::vector<double> acc(n + 1, 0.0);
        for (int i = 1; i <= n; ++i) {
            double gap = pos[i - 1] - pos[i] - kVehicleLength;
            acc[i] = idm_acceleration(speed[i], speed[i - 1], gap, p);
        }
        pos[0] += v_eq * dt;
        for (int i = 1; i <= n; ++i) {
            speed[i] = std::max(0.0, speed[i] + acc[i] * dt);
            pos[i] += speed[i] * dt;
        }
    }
    for (int i = 1; i <= n; ++i) CHECK(std::abs(speed[i] - v_eq) < 1e-6);
}
