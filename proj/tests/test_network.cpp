#include "doctest.h"

#include <fstream>

#include "mergesim/network.hpp"

using namespace mergesim;

TEST_CASE("simple merge geometry") {
    RoadNetwork net = build_simple_merge();
    CHECK(net.edge(EdgeKind::MainPre).length == 600.0);
    CHECK(net.edge(EdgeKind::Ramp).length == 200.0);
    CHECK(net.edge(EdgeKind::PostMerge).length == 100.0);
    CHECK(net.route_length(RouteId::Main) == 700.0);
    CHECK(net.route_length(RouteId::Ramp) == 300.0);
}

TEST_CASE("i696 merge geometry") {
    RoadNetwork net = build_i696_merge();
    CHECK(net.edge(EdgeKind::MainPre).length == 3131.0);
    CHECK(net.edge(EdgeKind::Ramp).length == 1878.56);
    CHECK(net.edge(EdgeKind::PostMerge).length == 5077.7);
    CHECK(net.route_length(RouteId::Main) == doctest::Approx(8208.7));
    // identical topology class as the simple merge
    for (int k = 0; k < kNumEdges; ++k)
        CHECK(net.edges[k].kind == build_simple_merge().edges[k].kind);
}

TEST_CASE("build functions are pure") {
    RoadNetwork a = build_simple_merge();
    RoadNetwork b = build_simple_merge();
    for (int k = 0; k < kNumEdges; ++k) {
        CHECK(a.edges[k].length == b.edges[k].length);
        CHECK(a.edges[k].speed_limit == b.edges[k].speed_limit);
        CHECK(a.edges[k].id == b.edges[k].id);
    }
}

TEST_CASE("distance to junction") {
    RoadNetwork net = build_simple_merge();
    CHECK(distance_to_junction(net, EdgeKind::MainPre, 0.0) == 600.0);
    CHECK(distance_to_junction(net, EdgeKind::MainPre, 450.0) == 150.0);
    CHECK(distance_to_junction(net, EdgeKind::PostMerge, 50.0) == 0.0);
    CHECK(distance_to_junction(net, EdgeKind::Ramp, 120.0) == 80.0);
    CHECK_THROWS(distance_to_junction(net, "nope", 0.0));

    // nonincreasing along each pre-junction edge
    for (EdgeKind e : {EdgeKind::MainPre, EdgeKind::Ramp}) {
        double prev = distance_to_junction(net, e, 0.0);
        for (double p = 1.0; p <= net.edge(e).length; p += 13.7) {
            double d = distance_to_junction(net, e, p);
            CHECK(d <= prev);
            prev = d;
        }
    }
}

TEST_CASE("scenario file parses with documented defaults") {
    ScenarioConfig cfg = load_scenario(std::string(MERGESIM_SCENARIO_DIR) +
                                       "/simple_merge.toml");
    CHECK(cfg.main_inflow == 2000.0);
    CHECK(cfg.ramp_inflow == 200.0);
    CHECK(cfg.av_fraction == 0.1);
    CHECK(cfg.horizon == 2000);
    CHECK(cfg.dt == 0.5);
    CHECK(cfg.n_av_max == 5);
    CHECK(!cfg.window.has_value());
    CHECK(cfg.speed_limit() == 30.0);
}

TEST_CASE("scenario validation names the violated invariant") {
    std::string text = "network = \"simple_merge\"\nav_fraction = 1.2\n";
    CHECK_THROWS_WITH_AS(parse_scenario(text, "inline"),
                         "av_fraction must be in [0, 1]", std::invalid_argument);
    CHECK_THROWS_AS(parse_scenario("network = \"simple_merge\"\nhorizon = -3\n",
                                   "inline"),
                    std::invalid_argument);
}

TEST_CASE("parse errors carry the line") {
    try {
        parse_scenario("network = \"simple_merge\"\nmain_inflow = abc\n", "inline");
        CHECK(false);
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("inline:2") != std::string::npos);
    }
}

TEST_CASE("scenario round-trips through serialization") {
    ScenarioConfig cfg = load_scenario(std::string(MERGESIM_SCENARIO_DIR) +
                                       "/i696_merge.toml");
    cfg.window = Window{600.0, 100.0};
    cfg.seeds = {0, 1, 2};
    ScenarioConfig back = parse_scenario(serialize_scenario(cfg), "roundtrip");
    CHECK(scenario_equal(cfg, back));
}

TEST_CASE("seed list parsing") {
    CHECK(parse_seed_list("0..3") == std::vector<std::uint64_t>{0, 1, 2, 3});
    CHECK(parse_seed_list("7,3,11") == std::vector<std::uint64_t>{7, 3, 11});
    CHECK_THROWS(parse_seed_list("1,1"));
}

TEST_CASE("window membership is strict at the boundary") {
    RoadNetwork net = build_simple_merge();
    Window empty{0.0, 0.0};
    CHECK(!window_contains(empty, net, EdgeKind::MainPre, 600.0));
    CHECK(!window_contains(empty, net, EdgeKind::PostMerge, 0.0));
    Window w{150.0, 50.0};
    CHECK(window_contains(w, net, EdgeKind::MainPre, 500.0));   // 100 m out
    CHECK(!window_contains(w, net, EdgeKind::MainPre, 450.0));  // exactly 150 m out
    CHECK(window_contains(w, net, EdgeKind::PostMerge, 49.0));
    CHECK(!window_contains(w, net, EdgeKind::PostMerge, 50.0));
    CHECK(!window_contains(w, net, EdgeKind::Ramp, 199.0));
}
