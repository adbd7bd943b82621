#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace stainbench {

/// Named scalar results with provenance of the inputs that produced them.
/// PSNR of identical images is an infinity sentinel; infinite entries are
/// excluded from mean/std and counted separately.
struct MetricReport {
    int schema_version = 1;
    std::string metric;
    double mean = 0.0;
    double stddev = 0.0;  // population standard deviation over finite values
    std::vector<double> values;  // per-image, in input order
    int finite_count = 0;
    int infinite_count = 0;
    std::map<std::string, std::string> provenance;  // ordered, so serialization is stable

    nlohmann::json to_json() const;
    static MetricReport from_json(const nlohmann::json& j);

    /// One CSV row matching csv_header(); provenance flattened to key=value
    /// pairs joined by ';'.
    std::string csv_row() const;
    static std::string csv_header();
};

/// Builds a report from per-image values, computing mean/std over the finite
/// entries.
MetricReport make_report(const std::string& metric, std::vector<double> values,
                         std::map<std::string, std::string> provenance);

void save_reports_json(const std::vector<MetricReport>& reports,
                       const std::filesystem::path& path);
void save_reports_csv(const std::vector<MetricReport>& reports,
                      const std::filesystem::path& path);

}  // namespace stainbench
