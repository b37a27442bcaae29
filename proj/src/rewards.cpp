#include "mergesim/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace mergesim {

void DistributedMixedSpec::validate() const {
    if (eta1 < 0.0 || eta2 < 0.0)
        throw std::invalid_argument("eta1 and eta2 must be nonnegative");
    if (std::abs(eta1 + eta2 - 1.0) > 1e-9)
        throw std::invalid_argument("eta1 + eta2 must equal 1");
}

namespace {

std::pair<std::string, std::string> split_once(const std::string& s, char sep) {
    auto p = s.find(sep);
    if (p == std::string::npos) return {s, ""};
    return {s.substr(0, p), s.substr(p + 1)};
}

void parse_params(const std::string& text,
                  const std::function<void(const std::string&, double)>& set) {
    std::istringstream in(text);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        if (tok.empty()) continue;
        auto [key, value] = split_once(tok, '=');
        if (value.empty())
            throw std::invalid_argument("expected key=value in reward spec: " + tok);
        set(key, std::stod(value));
    }
}

}  // namespace

RewardSpec RewardSpec::parse(const std::string& text) {
    auto [name, params] = split_once(text, ':');
    RewardSpec spec;
    if (name == "outflow") {
        spec.kind = RewardKind::Outflow;
    } else if (name == "avgspeed") {
        spec.kind = RewardKind::AvgSpeed;
    } else if (name == "flow") {
        spec.kind = RewardKind::Flow;
        parse_params(params, [&](const std::string& k, double v) {
            if (k == "Vd") spec.flow.v_desired = v;
            else if (k == "alpha") spec.flow.alpha = v;
            else if (k == "hexp") spec.flow.h_expected = v;
            else throw std::invalid_argument("unknown flow reward param: " + k);
        });
    } else if (name == "mixed") {
        spec.kind = RewardKind::DistributedMixed;
        parse_params(params, [&](const std::string& k, double v) {
            if (k == "eta1") spec.mixed.eta1 = v;
            else if (k == "eta2") spec.mixed.eta2 = v;
            else if (k == "bonus") spec.mixed.bonus = v;
            else throw std::invalid_argument("unknown mixed reward param: " + k);
        });
        spec.mixed.validate();
    } else {
        throw std::invalid_argument("unknown reward: " + name);
    }
    return spec;
}

std::string RewardSpec::to_string() const {
    std::ostringstream out;
    switch (kind) {
        case RewardKind::Outflow: return "outflow";
        case RewardKind::AvgSpeed: return "avgspeed";
        case RewardKind::Flow:
            out << "flow:Vd=" << flow.v_desired << ",alpha=" << flow.alpha
                << ",hexp=" << flow.h_expected;
            return out.str();
        case RewardKind::DistributedMixed:
            out << "mixed:eta1=" << mixed.eta1 << ",eta2=" << mixed.eta2
                << ",bonus=" << mixed.bonus;
            return out.str();
    }
    return "?";
}

double metric_avg_speed(const EpisodeLog& log) {
    double total = 0.0;
    for (int t = 0; t < log.steps(); ++t)
        if (log.n[t] > 0) total += log.sum_speed[t] / log.n[t];
    return total / log.horizon;
}

double metric_outflow_vph(const EpisodeLog& log) {
    long long exits = 0;
    for (int x : log.exits) exits += x;
    return static_cast<double>(exits) / (log.horizon * log.dt) * 3600.0;
}

double metric_inflow_vph(const EpisodeLog& log) {
    long long entries = 0;
    for (int x : log.entries) entries += x;
    return static_cast<double>(entries) / (log.horizon * log.dt) * 3600.0;
}

double flow_reward(const WorldState& w, const RoadNetwork& net,
                   const FlowRewardSpec& spec) {
    int n = w.vehicle_count();
    if (n == 0) return 0.0;
    double base = spec.v_desired * spec.v_desired * n;  // ||Vd * 1||^2
    double dev = 0.0;
    double penalty = 0.0;
    for (const auto& lane : w.edge_vehicles) {
        for (const auto& v : lane) {
            dev += (spec.v_desired - v.speed) * (spec.v_desired - v.speed);
            if (v.cls == VehClass::Av) {
                auto leader = w.leader_of(v, net);
                double h = leader ? leader->gap : spec.h_expected;
                penalty += std::max(spec.h_expected - h, 0.0);
            }
        }
    }
    double norm = std::sqrt(base);
    return std::max(norm - std::sqrt(dev), 0.0) / norm - spec.alpha * penalty;
}

double avg_speed_reward(const WorldState& w, double v_max) {
    int n = w.vehicle_count();
    if (n == 0) return 0.0;
    return w.speed_sum() / (n * v_max);
}

double outflow_reward(const StepEvents& events) {
    return static_cast<double>(events.exits);
}

double distributed_reward(int agent_id, const WorldState& w, const StepEvents& events,
                          const DistributedMixedSpec& spec, double v_max) {
    if (std::binary_search(events.exited_ids.begin(), events.exited_ids.end(),
                           agent_id))
        return spec.bonus;
    if (!w.find(agent_id))
        throw std::invalid_argument("distributed_reward: unknown agent id " +
                                    std::to_string(agent_id));
    return -spec.eta1 + spec.eta2 * avg_speed_reward(w, v_max);
}

CiStat aggregate_ci(std::span<const double> values) {
    if (values.size() < 2)
        throw std::invalid_argument("aggregate_ci needs at least 2 values");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    double stddev = std::sqrt(ss / (static_cast<double>(values.size()) - 1.0));
    return {mean, 1.96 * stddev / std::sqrt(static_cast<double>(values.size()))};
}

MetricsReport metrics_over(std::span<const EpisodeLog> logs) {
    std::vector<double> outflow, inflow, speed;
    outflow.reserve(logs.size());
    for (const auto& log : logs) {
        outflow.push_back(metric_outflow_vph(log));
        inflow.push_back(metric_inflow_vph(log));
        speed.push_back(metric_avg_speed(log));
    }
    MetricsReport r;
    r.outflow = aggregate_ci(outflow);
    r.inflow = aggregate_ci(inflow);
    r.avg_speed = aggregate_ci(speed);
    r.n_episodes = static_cast<int>(logs.size());
    return r;
}

}  // namespace mergesim
