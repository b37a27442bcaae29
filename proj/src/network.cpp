#include "mergesim/network.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace mergesim {

const char* edge_kind_name(EdgeKind k) {
    switch (k) {
        case EdgeKind::MainPre: return "main_pre_merge";
        case EdgeKind::Ramp: return "ramp";
        case EdgeKind::PostMerge: return "post_merge";
    }
    return "?";
}

const char* route_name(RouteId r) {
    return r == RouteId::Main ? "main" : "ramp";
}

const Edge& RoadNetwork::edge_by_id(const std::string& id) const {
    for (const auto& e : edges)
        if (e.id == id) return e;
    throw std::invalid_argument("unknown edge id: " + id);
}

const std::array<std::vector<EdgeKind>, kNumRoutes>& RoadNetwork::routes() {
    static const std::array<std::vector<EdgeKind>, kNumRoutes> r = {
        std::vector<EdgeKind>{EdgeKind::MainPre, EdgeKind::PostMerge},
        std::vector<EdgeKind>{EdgeKind::Ramp, EdgeKind::PostMerge}};
    return r;
}

const std::vector<EdgeKind>& RoadNetwork::route_edges(RouteId r) {
    return routes()[static_cast<int>(r)];
}

double RoadNetwork::route_length(RouteId r) const {
    double total = 0.0;
    for (EdgeKind k : route_edges(r)) total += edge(k).length;
    return total;
}

void RoadNetwork::validate() const {
    for (int i = 0; i < kNumEdges; ++i) {
        const Edge& e = edges[i];
        if (e.kind != static_cast<EdgeKind>(i))
            throw std::invalid_argument("edge kind/slot mismatch");
        if (!(e.length > 0.0))
            throw std::invalid_argument(std::string("edge length must be > 0: ") + e.id);
        if (!(e.speed_limit > 0.0))
            throw std::invalid_argument(std::string("edge speed_limit must be > 0: ") + e.id);
    }
}

double distance_to_junction(const RoadNetwork& net, EdgeKind edge, double position) {
    const Edge& e = net.edge(edge);
    if (position < 0.0 || position > e.length)
        throw std::invalid_argument("position outside edge");
    if (edge == EdgeKind::PostMerge) return 0.0;
    return e.length - position;
}

double distance_to_junction(const RoadNetwork& net, const std::string& edge_id,
                            double position) {
    return distance_to_junction(net, net.edge_by_id(edge_id).kind, position);
}

static RoadNetwork make_network(double main_len, double ramp_len, double post_len,
                                double speed_limit) {
    RoadNetwork net;
    net.edges[0] = Edge{"main", EdgeKind::MainPre, main_len, speed_limit};
    net.edges[1] = Edge{"ramp", EdgeKind::Ramp, ramp_len, speed_limit};
    net.edges[2] = Edge{"post", EdgeKind::PostMerge, post_len, speed_limit};
    net.validate();
    return net;
}

RoadNetwork build_simple_merge(double speed_limit) {
    return make_network(600.0, 200.0, 100.0, speed_limit);
}

RoadNetwork build_i696_merge(double speed_limit) {
    return make_network(3131.0, 1878.56, 5077.7, speed_limit);
}

RoadNetwork build_custom_merge(double main_len, double ramp_len, double post_len,
                               double speed_limit) {
    return make_network(main_len, ramp_len, post_len, speed_limit);
}

bool window_contains(const Window& w, const RoadNetwork& net, EdgeKind edge,
                     double position) {
    if (edge == EdgeKind::PostMerge) return position < w.end_offset;
    if (edge == EdgeKind::Ramp) return false;  // AVs run on the main route only
    return distance_to_junction(net, edge, position) < w.start_offset;
}

void ScenarioConfig::validate() const {
    network.validate();
    if (!(main_inflow >= 0.0)) throw std::invalid_argument("main_inflow must be >= 0");
    if (!(ramp_inflow >= 0.0)) throw std::invalid_argument("ramp_inflow must be >= 0");
    if (!(av_fraction >= 0.0 && av_fraction <= 1.0))
        throw std::invalid_argument("av_fraction must be in [0, 1]");
    if (horizon <= 0) throw std::invalid_argument("horizon must be > 0");
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
    if (n_av_max <= 0) throw std::invalid_argument("n_av_max must be > 0");
    if (!(h_max > 0.0)) throw std::invalid_argument("h_max must be > 0");
    if (window) {
        if (window->start_offset < 0.0 || window->end_offset < 0.0)
            throw std::invalid_argument("window offsets must be nonnegative");
        if (window->start_offset > network.edge(EdgeKind::MainPre).length ||
            window->end_offset > network.edge(EdgeKind::PostMerge).length)
            throw std::invalid_argument("window exceeds network extent");
    }
}

namespace {

struct KvFile {
    std::map<std::string, std::pair<std::string, int>> kv;  // key -> (value, line)
    std::string origin;

    bool has(const std::string& k) const { return kv.count(k) > 0; }

    std::string str(const std::string& k, const std::string& dflt) const {
        auto it = kv.find(k);
        return it == kv.end() ? dflt : it->second.first;
    }

    double num(const std::string& k, double dflt) const {
        auto it = kv.find(k);
        if (it == kv.end()) return dflt;
        try {
            std::size_t pos = 0;
            double v = std::stod(it->second.first, &pos);
            if (pos != it->second.first.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw std::runtime_error(origin + ":" + std::to_string(it->second.second) +
                                     ": field '" + k + "' is not a number: " +
                                     it->second.first);
        }
    }
};

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
        return s.substr(1, s.size() - 2);
    return s;
}

KvFile parse_kv(const std::string& text, const std::string& origin) {
    KvFile out;
    out.origin = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                     ": expected 'key = value', got: " + line);
        std::string key = trim(line.substr(0, eq));
        std::string value = unquote(trim(line.substr(eq + 1)));
        if (key.empty())
            throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                     ": empty key");
        out.kv[key] = {value, lineno};
    }
    return out;
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::string s = trim(text);
    if (s.empty()) return seeds;
    auto dots = s.find("..");
    if (dots != std::string::npos) {
        std::uint64_t lo = std::stoull(trim(s.substr(0, dots)));
        std::uint64_t hi = std::stoull(trim(s.substr(dots + 2)));
        if (hi < lo) throw std::invalid_argument("seed range is empty: " + text);
        for (std::uint64_t v = lo; v <= hi; ++v) seeds.push_back(v);
        return seeds;
    }
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        tok = trim(tok);
        if (!tok.empty()) seeds.push_back(std::stoull(tok));
    }
    for (std::size_t i = 0; i < seeds.size(); ++i)
        for (std::size_t j = i + 1; j < seeds.size(); ++j)
            if (seeds[i] == seeds[j])
                throw std::invalid_argument("duplicate seed in list: " +
                                            std::to_string(seeds[i]));
    return seeds;
}

ScenarioConfig parse_scenario(const std::string& text, const std::string& origin) {
    KvFile f = parse_kv(text, origin);
    ScenarioConfig cfg;
    double speed_limit = f.num("speed_limit", 30.0);
    std::string net = f.str("network", "");
    if (net == "simple_merge") {
        cfg.network = build_simple_merge(speed_limit);
    } else if (net == "i696_merge") {
        cfg.network = build_i696_merge(speed_limit);
    } else if (net.empty() || net == "custom") {
        if (!f.has("main_length") || !f.has("ramp_length") || !f.has("post_length"))
            throw std::runtime_error(origin +
                                     ": custom network requires main_length, "
                                     "ramp_length and post_length");
        cfg.network = build_custom_merge(f.num("main_length", 0), f.num("ramp_length", 0),
                                         f.num("post_length", 0), speed_limit);
    } else {
        throw std::runtime_error(origin + ": unknown network '" + net + "'");
    }
    cfg.name = f.str("name", net.empty() ? "custom" : net);
    cfg.main_inflow = f.num("main_inflow", cfg.main_inflow);
    cfg.ramp_inflow = f.num("ramp_inflow", cfg.ramp_inflow);
    cfg.av_fraction = f.num("av_fraction", cfg.av_fraction);
    cfg.horizon = static_cast<int>(f.num("horizon", cfg.horizon));
    cfg.dt = f.num("dt", cfg.dt);
    cfg.n_av_max = static_cast<int>(f.num("n_av_max", cfg.n_av_max));
    cfg.h_max = f.num("h_max", cfg.h_max);
    bool has_ws = f.has("window_start"), has_we = f.has("window_end");
    if (has_ws != has_we)
        throw std::runtime_error(origin +
                                 ": window_start and window_end must be given together");
    if (has_ws)
        cfg.window = Window{f.num("window_start", 0.0), f.num("window_end", 0.0)};
    if (f.has("seeds")) cfg.seeds = parse_seed_list(f.str("seeds", ""));
    cfg.validate();
    return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path);
}

std::string serialize_scenario(const ScenarioConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    out << "name = \"" << cfg.name << "\"\n";
    out << "network = \"custom\"\n";
    out << "main_length = " << cfg.network.edge(EdgeKind::MainPre).length << "\n";
    out << "ramp_length = " << cfg.network.edge(EdgeKind::Ramp).length << "\n";
    out << "post_length = " << cfg.network.edge(EdgeKind::PostMerge).length << "\n";
    out << "speed_limit = " << cfg.speed_limit() << "\n";
    out << "main_inflow = " << cfg.main_inflow << "\n";
    out << "ramp_inflow = " << cfg.ramp_inflow << "\n";
    out << "av_fraction = " << cfg.av_fraction << "\n";
    out << "horizon = " << cfg.horizon << "\n";
    out << "dt = " << cfg.dt << "\n";
    out << "n_av_max = " << cfg.n_av_max << "\n";
    out << "h_max = " << cfg.h_max << "\n";
    if (cfg.window) {
        out << "window_start = " << cfg.window->start_offset << "\n";
        out << "window_end = " << cfg.window->end_offset << "\n";
    }
    if (!cfg.seeds.empty()) {
        out << "seeds = \"";
        for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
            out << (i ? "," : "") << cfg.seeds[i];
        out << "\"\n";
    }
    return out.str();
}

bool scenario_equal(const ScenarioConfig& a, const ScenarioConfig& b) {
    auto edges_eq = [&](EdgeKind k) {
        return a.network.edge(k).length == b.network.edge(k).length &&
               a.network.edge(k).speed_limit == b.network.edge(k).speed_limit;
    };
    return edges_eq(EdgeKind::MainPre) && edges_eq(EdgeKind::Ramp) &&
           edges_eq(EdgeKind::PostMerge) && a.main_inflow == b.main_inflow &&
           a.ramp_inflow == b.ramp_inflow && a.av_fraction == b.av_fraction &&
           a.horizon == b.horizon && a.dt == b.dt && a.n_av_max == b.n_av_max &&
           a.h_max == b.h_max && a.window == b.window && a.seeds == b.seeds;
}

}  // namespace mergesim
