#include "stainbench/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "stainbench/errors.hpp"

namespace stainbench {

namespace {

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace

MetricReport make_report(const std::string& metric, std::vector<double> values,
                         std::map<std::string, std::string> provenance) {
    MetricReport r;
    r.metric = metric;
    r.values = std::move(values);
    r.provenance = std::move(provenance);

    double sum = 0.0;
    for (const double v : r.values) {
        if (std::isinf(v)) {
            ++r.infinite_count;
        } else {
            sum += v;
            ++r.finite_count;
        }
    }
    if (r.finite_count > 0) {
        r.mean = sum / r.finite_count;
        double sq = 0.0;
        for (const double v : r.values) {
            if (!std::isinf(v)) sq += (v - r.mean) * (v - r.mean);
        }
        r.stddev = std::sqrt(sq / r.finite_count);
    }
    return r;
}

nlohmann::json MetricReport::to_json() const {
    nlohmann::json vals = nlohmann::json::array();
    for (const double v : values) {
        if (std::isinf(v)) {
            vals.push_back(v > 0 ? "inf" : "-inf");  // JSON has no infinity literal
        } else {
            vals.push_back(v);
        }
    }
    return nlohmann::json{{"schema_version", schema_version},
                          {"metric", metric},
                          {"mean", mean},
                          {"std", stddev},
                          {"finite_count", finite_count},
                          {"infinite_count", infinite_count},
                          {"values", vals},
                          {"provenance", provenance}};
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
    MetricReport r;
    try {
        r.schema_version = j.at("schema_version").get<int>();
        r.metric = j.at("metric").get<std::string>();
        r.mean = j.at("mean").get<double>();
        r.stddev = j.at("std").get<double>();
        r.finite_count = j.at("finite_count").get<int>();
        r.infinite_count = j.at("infinite_count").get<int>();
        for (const auto& v : j.at("values")) {
            if (v.is_string()) {
                r.values.push_back(v.get<std::string>() == "inf"
                                       ? std::numeric_limits<double>::infinity()
                                       : -std::numeric_limits<double>::infinity());
            } else {
                r.values.push_back(v.get<double>());
            }
        }
        if (j.contains("provenance")) {
            r.provenance = j.at("provenance").get<std::map<std::string, std::string>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("MetricReport parse error: ") + e.what());
    }
    return r;
}

std::string MetricReport::csv_header() {
    return "metric,mean,std,count,infinite_count,provenance";
}

std::string MetricReport::csv_row() const {
    std::string prov;
    for (const auto& [k, v] : provenance) {
        if (!prov.empty()) prov += ';';
        prov += k + "=" + v;
    }
    return metric + "," + format_double(mean) + "," + format_double(stddev) + "," +
           std::to_string(finite_count) + "," + std::to_string(infinite_count) + ",\"" + prov +
           "\"";
}

void save_reports_json(const std::vector<MetricReport>& reports,
                       const std::filesystem::path& path) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : reports) arr.push_back(r.to_json());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report: " + path.string());
    out << arr.dump(2) << "\n";
}

void save_reports_csv(const std::vector<MetricReport>& reports,
                      const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report: " + path.string());
    out << MetricReport::csv_header() << "\n";
    for (const auto& r : reports) out << r.csv_row() << "\n";
}

}  // namespace stainbench
