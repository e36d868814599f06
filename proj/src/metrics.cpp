#include "zkvpn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace zkvpn {
namespace metrics {

namespace {

std::string format_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string sanitize(const std::string& s) {
    std::string out = s;
    for (char& c : out) {
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    }
    return out;
}

} // namespace

Record make_record(const std::string& run_id, const std::string& metric, double value_ms,
                   const std::string& detail) {
    // round to microsecond precision so write/parse round trips exactly
    double rounded = std::round(value_ms * 1000.0) / 1000.0;
    return Record{sanitize(run_id), sanitize(metric), rounded, sanitize(detail)};
}

void write_csv(const std::vector<Record>& records, std::ostream& out) {
    out << "run_id,metric,value_ms,detail\n";
    for (const Record& r : records) {
        out << r.run_id << ',' << r.metric << ',' << format_value(r.value_ms) << ',' << r.detail
            << '\n';
    }
}

bool write_csv_file(const std::vector<Record>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) return false;
    write_csv(records, out);
    return bool(out);
}

std::optional<std::vector<Record>> read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) return std::nullopt;
    if (line != "run_id,metric,value_ms,detail") return std::nullopt;
    std::vector<Record> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, ',')) cols.push_back(col);
        if (cols.size() == 3) cols.push_back(""); // empty detail
        if (cols.size() != 4) return std::nullopt;
        try {
            out.push_back(Record{cols[0], cols[1], std::stod(cols[2]), cols[3]});
        } catch (const std::exception&) {
            return std::nullopt;
        }
    }
    return out;
}

double percentile(std::vector<double> samples, int p) {
    if (samples.empty()) throw std::invalid_argument("percentile of empty sample");
    if (p <= 0 || p > 100) throw std::invalid_argument("percentile rank out of range");
    std::sort(samples.begin(), samples.end());
    size_t rank = size_t(std::ceil(double(p) / 100.0 * double(samples.size())));
    return samples[rank - 1];
}

Summary summarize(const std::vector<double>& samples) {
    Summary s{};
    s.count = samples.size();
    if (samples.empty()) return s;
    s.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / double(samples.size());
    s.p10 = percentile(samples, 10);
    s.p25 = percentile(samples, 25);
    s.p50 = percentile(samples, 50);
    s.p75 = percentile(samples, 75);
    s.p90 = percentile(samples, 90);
    s.p95 = percentile(samples, 95);
    s.p99 = percentile(samples, 99);
    return s;
}

std::string format_summary_table(const std::string& name, const Summary& s) {
    std::ostringstream out;
    out << name << ": n=" << s.count << " mean=" << format_value(s.mean)
        << "ms p10=" << format_value(s.p10) << " p25=" << format_value(s.p25)
        << " p50=" << format_value(s.p50) << " p75=" << format_value(s.p75)
        << " p90=" << format_value(s.p90) << " p95=" << format_value(s.p95)
        << " p99=" << format_value(s.p99);
    return out.str();
}

} // namespace metrics
} // namespace zkvpn
