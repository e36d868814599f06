#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace zkvpn {
namespace metrics {

// One measurement row. Network durations are sim-time, prove/verify are
// wall-clock. value_ms is kept to microsecond precision so CSV round trips
// are exact.
struct Record {
    std::string run_id;
    std::string metric; // lookup_duration | splice_duration | prove_time | verify_time | e2e_setup
    double value_ms;
    std::string detail;

    bool operator==(const Record&) const = default;
};

Record make_record(const std::string& run_id, const std::string& metric, double value_ms,
                   const std::string& detail = "");

// header: run_id,metric,value_ms,detail
void write_csv(const std::vector<Record>& records, std::ostream& out);
bool write_csv_file(const std::vector<Record>& records, const std::string& path);
std::optional<std::vector<Record>> read_csv(std::istream& in);

// nearest-rank percentile over an unsorted sample, p in (0, 100]
double percentile(std::vector<double> samples, int p);

struct Summary {
    size_t count;
    double mean;
    double p10, p25, p50, p75, p90, p95, p99;
};

Summary summarize(const std::vector<double>& samples);
std::string format_summary_table(const std::string& name, const Summary& s);

} // namespace metrics
} // namespace zkvpn
