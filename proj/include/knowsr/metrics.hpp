#pragma once

#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "knowsr/errors.hpp"
#include "knowsr/textio.hpp"
#include "knowsr/trainer.hpp"

namespace knowsr::metrics {

using trainer::MetricsRecord;

inline constexpr const char* kHeader =
    "seed\tepisode\tavg_step_reward\tepisode_return\tphase\tself_updates\tshare_updates";

/// Writes the per-episode table. Every column is a deterministic function of
/// the run configuration and seed; floats use a round-trip exact format, so
/// identical runs produce byte-identical files. Wall-clock time lives in a
/// separate timing file (write_timing).
inline void write_metrics(std::ostream& out, const std::vector<MetricsRecord>& records) {
    out << kHeader << '\n';
    for (const MetricsRecord& r : records) {
        out << r.seed << '\t' << r.episode << '\t' << format_double(r.avg_step_reward) << '\t'
            << format_double(r.episode_return) << '\t' << sharing::phase_name(r.phase) << '\t'
            << r.self_updates << '\t' << r.share_updates << '\n';
    }
}

inline void write_metrics_file(const std::string& path, const std::vector<MetricsRecord>& records) {
    std::ofstream out(path);
    if (!out) throw ConfigError("write_metrics_file: cannot open " + path);
    write_metrics(out, records);
    if (!out.good()) throw ConfigError("write_metrics_file: write failed for " + path);
}

/// Measured episode durations, kept out of the metrics table on purpose:
/// timing varies between runs of the same seed.
inline void write_timing_file(const std::string& path, const std::vector<MetricsRecord>& records) {
    std::ofstream out(path);
    if (!out) throw ConfigError("write_timing_file: cannot open " + path);
    out << "episode\twall_seconds\n";
    double total = 0.0;
    for (const MetricsRecord& r : records) {
        out << r.episode << '\t' << format_double(r.wall_seconds) << '\n';
        total += r.wall_seconds;
    }
    out << "# total\t" << format_double(total) << '\n';
}

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == '\t') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

inline std::vector<MetricsRecord> read_metrics(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("read_metrics: empty input");
    if (line == std::string(kHeader) + "\r") line.pop_back();
    if (line != kHeader) throw ConfigError("read_metrics: unexpected header: " + line);
    std::vector<MetricsRecord> records;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        lineno += 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> f = split_tabs(line);
        if (f.size() != 7)
            throw ConfigError("read_metrics: line " + std::to_string(lineno) + " has " +
                              std::to_string(f.size()) + " fields, want 7");
        MetricsRecord r;
        r.seed = static_cast<std::uint64_t>(std::stoull(f[0]));
        r.episode = static_cast<std::size_t>(std::stoull(f[1]));
        r.avg_step_reward = parse_double(f[2]);
        r.episode_return = parse_double(f[3]);
        if (f[4] == "self") {
            r.phase = sharing::Phase::SelfTrain;
        } else if (f[4] == "share") {
            r.phase = sharing::Phase::Share;
        } else {
            throw ConfigError("read_metrics: line " + std::to_string(lineno) + ": bad phase " + f[4]);
        }
        r.self_updates = static_cast<std::size_t>(std::stoull(f[5]));
        r.share_updates = static_cast<std::size_t>(std::stoull(f[6]));
        records.push_back(r);
    }
    return records;
}

inline std::vector<MetricsRecord> read_metrics_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("read_metrics_file: cannot open " + path);
    return read_metrics(in);
}

} // namespace knowsr::metrics
