#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "cropmap/ensemble.hpp"
#include "cropmap/evaluation.hpp"
#include "cropmap/landchange.hpp"

namespace cropmap {

// ---------------------------------------------------------------------------
// Delimited + JSON report emission, mirroring the published table layouts:
// selection (method x metric), per-year evaluation, cross-year transfer,
// relative CPU, cropland change, core-cropland share.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace detail

inline std::string selection_report_csv(const SelectionReport& rep,
                                        const std::string& input = "features") {
    std::string out = "method,metric,input,mean,std,selected\n";
    for (const auto& e : rep.entries) {
        bool chosen = e.learner == rep.chosen.first || e.learner == rep.chosen.second;
        std::string sel = chosen ? "yes" : "no";
        out += to_string(e.learner) + ",accuracy," + input + "," + detail::fmt(e.accuracy_mean) +
               "," + detail::fmt(e.accuracy_std) + "," + sel + "\n";
        out += to_string(e.learner) + ",macro_f1," + input + "," + detail::fmt(e.macro_f1_mean) +
               "," + detail::fmt(e.macro_f1_std) + "," + sel + "\n";
        out += to_string(e.learner) + ",weighted_f1," + input + "," +
               detail::fmt(e.weighted_f1_mean) + "," + detail::fmt(e.weighted_f1_std) + "," + sel +
               "\n";
    }
    return out;
}

inline json selection_report_json(const SelectionReport& rep) {
    json j;
    j["runs"] = rep.runs;
    j["chosen"] = {to_string(rep.chosen.first), to_string(rep.chosen.second)};
    j["tie_broken"] = rep.tie_broken;
    j["resample_policy"] = rep.resample_policy;
    j["diagnostics"] = rep.diagnostics;
    j["entries"] = json::array();
    for (const auto& e : rep.entries) {
        json je;
        je["learner"] = to_string(e.learner);
        je["accuracy"] = {{"mean", e.accuracy_mean}, {"std", e.accuracy_std}};
        je["macro_f1"] = {{"mean", e.macro_f1_mean}, {"std", e.macro_f1_std}};
        je["weighted_f1"] = {{"mean", e.weighted_f1_mean}, {"std", e.weighted_f1_std}};
        je["completed_runs"] = e.completed_runs;
        je["combined_mean"] = e.combined_mean();
        j["entries"].push_back(je);
    }
    return j;
}

inline std::string evaluation_rows_csv_header() {
    return "year,method,task,accuracy_mean,accuracy_std,macro_f1_mean,macro_f1_std,"
           "weighted_f1_mean,weighted_f1_std,runs_completed,runs_total\n";
}

inline std::string evaluation_row_csv(const EvaluationReport& rep) {
    auto get = [&](const std::string& k) {
        auto it = rep.metadata.find(k);
        return it == rep.metadata.end() ? std::string() : it->second;
    };
    return get("year") + "," + get("input") + "," + get("task") + "," +
           detail::fmt(rep.accuracy_mean) + "," + detail::fmt(rep.accuracy_std) + "," +
           detail::fmt(rep.macro_f1_mean) + "," + detail::fmt(rep.macro_f1_std) + "," +
           detail::fmt(rep.weighted_f1_mean) + "," + detail::fmt(rep.weighted_f1_std) + "," +
           std::to_string(rep.completed) + "," + std::to_string(rep.runs.size()) + "\n";
}

inline std::string transfer_rows_csv_header() {
    return "method,train_year,predict_year,accuracy_mean,accuracy_std,macro_f1_mean,"
           "macro_f1_std,weighted_f1_mean,weighted_f1_std,runs_completed,runs_total\n";
}

inline std::string transfer_row_csv(const EvaluationReport& rep) {
    auto get = [&](const std::string& k) {
        auto it = rep.metadata.find(k);
        return it == rep.metadata.end() ? std::string() : it->second;
    };
    return get("input") + "," + get("train_year") + "," + get("predict_year") + "," +
           detail::fmt(rep.accuracy_mean) + "," + detail::fmt(rep.accuracy_std) + "," +
           detail::fmt(rep.macro_f1_mean) + "," + detail::fmt(rep.macro_f1_std) + "," +
           detail::fmt(rep.weighted_f1_mean) + "," + detail::fmt(rep.weighted_f1_std) + "," +
           std::to_string(rep.completed) + "," + std::to_string(rep.runs.size()) + "\n";
}

inline json evaluation_report_json(const EvaluationReport& rep) {
    json j;
    j["metadata"] = rep.metadata;
    j["completed"] = rep.completed;
    j["accuracy"] = {{"mean", rep.accuracy_mean}, {"std", rep.accuracy_std}};
    j["macro_f1"] = {{"mean", rep.macro_f1_mean}, {"std", rep.macro_f1_std}};
    j["weighted_f1"] = {{"mean", rep.weighted_f1_mean}, {"std", rep.weighted_f1_std}};
    j["runs"] = json::array();
    for (const auto& run : rep.runs) {
        json jr;
        jr["seed"] = run.seed;
        jr["ok"] = run.ok;
        if (!run.ok) jr["error"] = run.error;
        if (run.ok) {
            jr["accuracy"] = run.metrics.accuracy;
            jr["macro_f1"] = run.metrics.macro_f1;
            jr["weighted_f1"] = run.metrics.weighted_f1;
        }
        j["runs"].push_back(jr);
    }
    return j;
}

inline std::string change_rows_csv_header() {
    return "dataset,year_a,year_b,decrease_pct,increase_pct,aggregate_pct\n";
}

inline std::string change_row_csv(const std::string& dataset, const ChangeReport& rep) {
    return dataset + "," + std::to_string(rep.year_a) + "," + std::to_string(rep.year_b) + "," +
           detail::fmt(rep.decrease_pct) + "," + detail::fmt(rep.increase_pct) + "," +
           detail::fmt(rep.aggregate_pct) + "\n";
}

inline std::string core_cropland_csv(const std::string& dataset, const CoreCroplandMask& mask) {
    std::string out = "method,percent_cropland,years\n";
    std::string years;
    for (int y : mask.contributing_years) years += (years.empty() ? "" : " ") + std::to_string(y);
    out += dataset + "," + detail::fmt(mask.percent_of_area) + "," + years + "\n";
    return out;
}

inline std::string cpu_table_csv(const CpuTable& table) {
    std::string out = "method,relative_cpu_mean,relative_cpu_interval,cpu_seconds,wall_seconds\n";
    for (const auto& row : table.rows)
        out += row.name + "," + detail::fmt(row.ratio_mean) + "," +
               detail::fmt(row.ratio_interval) + "," + detail::fmt(row.cpu_seconds_mean) + "," +
               detail::fmt(row.wall_seconds_mean) + "\n";
    return out;
}

inline json cpu_table_json(const CpuTable& table) {
    json j;
    j["baseline"] = table.baseline;
    j["runs"] = table.runs;
    j["interval"] = "1.96*std/sqrt(n) of per-run CPU ratio";
    j["rows"] = json::array();
    for (const auto& row : table.rows) {
        json jr;
        jr["method"] = row.name;
        jr["relative_cpu"] = {{"mean", row.ratio_mean}, {"interval", row.ratio_interval}};
        jr["cpu_seconds_mean"] = row.cpu_seconds_mean;
        jr["wall_seconds_mean"] = row.wall_seconds_mean;
        j["rows"].push_back(jr);
    }
    return j;
}

}  // namespace cropmap
