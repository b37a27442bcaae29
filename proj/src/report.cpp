#include "mergesim/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mergesim {

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x00000100000001b3ULL;
    }
    return h;
}

std::string hash_hex(const std::string& data) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(data)));
    return buf;
}

std::string hash_file_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "";
    std::stringstream buf;
    buf << in.rdbuf();
    return hash_hex(buf.str());
}

void atomic_write_file(const std::string& path, const std::string& content) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

std::string format_ci(const CiStat& s) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f +/- %.2f", s.mean, s.ci95);
    return buf;
}

std::string render_table(const std::vector<ResultRow>& rows) {
    std::size_t label_w = 10;
    for (const auto& r : rows) label_w = std::max(label_w, r.label.size());
    std::ostringstream out;
    auto pad = [&](const std::string& s, std::size_t w) {
        std::string p = s;
        p.resize(std::max(w, s.size()), ' ');
        return p;
    };
    out << pad("Controller", label_w) << " | " << pad("Outflow (veh/h)", 20) << " | "
        << pad("Inflow (veh/h)", 20) << " | " << pad("Avg speed (m/s)", 20) << "\n";
    out << std::string(label_w, '-') << "-+-" << std::string(20, '-') << "-+-"
        << std::string(20, '-') << "-+-" << std::string(20, '-') << "\n";
    for (const auto& r : rows) {
        out << pad(r.label, label_w) << " | " << pad(format_ci(r.metrics.outflow), 20)
            << " | " << pad(format_ci(r.metrics.inflow), 20) << " | "
            << pad(format_ci(r.metrics.avg_speed), 20) << "\n";
    }
    return out.str();
}

std::string render_csv(const std::vector<ResultRow>& rows) {
    std::string out =
        "label,outflow_mean,outflow_ci95,inflow_mean,inflow_ci95,avg_speed_mean,"
        "avg_speed_ci95,episodes\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n",
                      r.label.c_str(), r.metrics.outflow.mean, r.metrics.outflow.ci95,
                      r.metrics.inflow.mean, r.metrics.inflow.ci95,
                      r.metrics.avg_speed.mean, r.metrics.avg_speed.ci95,
                      r.metrics.n_episodes);
        out += buf;
    }
    return out;
}

}  // namespace mergesim
