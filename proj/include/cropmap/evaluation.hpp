#pragma once

#include <chrono>
#include <ctime>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cropmap/dataset.hpp"
#include "cropmap/ensemble.hpp"
#include "cropmap/metrics.hpp"
#include "cropmap/splits.hpp"

namespace cropmap {

// ---------------------------------------------------------------------------
// Multi-seed ensemble evaluation
// ---------------------------------------------------------------------------

struct EvalRunOptions {
    std::pair<LearnerKind, LearnerKind> heads{LearnerKind::LR, LearnerKind::RF};
    TrainConfig base;
    SplitSpec split;           // three-way by default
    std::size_t n_runs = 20;
    std::uint64_t seed0 = 1;
};

struct EvaluationReport {
    struct Run {
        std::uint64_t seed = 0;
        bool ok = false;
        std::string error;
        MetricRecord metrics;
    };
    std::vector<Run> runs;
    std::size_t completed = 0;
    double accuracy_mean = 0.0, accuracy_std = 0.0;
    double macro_f1_mean = 0.0, macro_f1_std = 0.0;
    double weighted_f1_mean = 0.0, weighted_f1_std = 0.0;
    std::map<std::string, std::string> metadata;

    void aggregate() {
        detail::RunningStat acc, mf1, wf1;
        for (const auto& run : runs) {
            if (!run.ok) continue;
            acc.add(run.metrics.accuracy);
            mf1.add(run.metrics.macro_f1);
            wf1.add(run.metrics.weighted_f1);
        }
        completed = acc.n;
        accuracy_mean = acc.mean();
        accuracy_std = acc.stddev();
        macro_f1_mean = mf1.mean();
        macro_f1_std = mf1.stddev();
        weighted_f1_mean = wf1.mean();
        weighted_f1_std = wf1.stddev();
    }
};

namespace detail {

inline std::vector<std::int32_t> argmax_labels(const Matrix& probs,
                                               const std::vector<std::int32_t>& classes) {
    std::vector<std::int32_t> out(probs.rows());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        const double* row = probs.row(i);
        std::size_t best = 0;
        for (std::size_t k = 1; k < classes.size(); ++k)
            if (row[k] > row[best]) best = k;
        out[i] = classes[best];
    }
    return out;
}

}  // namespace detail

// n_runs independent cycles of fresh polygon split + fresh member seeds;
// aggregates mean and sample std over the completed runs. Failed runs are
// recorded and skipped.
inline EvaluationReport evaluate_multi_run(const FeatureRaster& fr, const LabelSet& labels,
                                           const EvalRunOptions& opt) {
    if (opt.n_runs < 1) throw ConfigError("evaluation needs n_runs >= 1");
    EvaluationReport report;
    report.metadata["input"] = to_string(fr.source);
    report.metadata["task"] = to_string(labels.task);
    report.metadata["year"] = std::to_string(labels.year);
    report.metadata["heads"] = to_string(opt.heads.first) + "+" + to_string(opt.heads.second);
    report.metadata["n_runs"] = std::to_string(opt.n_runs);

    for (std::size_t run = 0; run < opt.n_runs; ++run) {
        EvaluationReport::Run rr;
        rr.seed = opt.seed0 + run;
        try {
            SplitSpec split = opt.split;
            split.seed = opt.seed0 + run;
            SplitResult sr = split_polygons(labels, split);
            const LabelSet& eval_part = split.test > 0.0 ? sr.test : sr.val;
            PixelDataset train_ds = extract_dataset(fr, sr.train);
            PixelDataset val_ds = extract_dataset(fr, sr.val);
            PixelDataset eval_ds = extract_dataset(fr, eval_part);
            if (eval_ds.y.empty()) throw DataError("evaluation partition is empty");

            EnsembleModel em = train_ensemble(train_ds, val_ds, labels.class_table,
                                                      opt.heads, opt.base, rr.seed);
            Matrix probs = predict_ensemble_matrix(em, eval_ds.X);
            auto pred = detail::argmax_labels(probs, em.first.classes);
            rr.metrics = compute_metrics(pred, eval_ds.y, labels.class_table);
            rr.ok = true;
        } catch (const Error& e) {
            rr.error = e.what();
        }
        report.runs.push_back(std::move(rr));
    }
    report.aggregate();
    return report;
}

// ---------------------------------------------------------------------------
// Cross-year transfer
// ---------------------------------------------------------------------------

struct TransferOptions {
    std::pair<LearnerKind, LearnerKind> heads{LearnerKind::LR, LearnerKind::RF};
    TrainConfig base;
    double train_fraction = 0.9;  // two-way split on the training year
    std::size_t n_runs = 5;
    std::uint64_t seed0 = 1;
};

// Trains on year A with a 90/10 train/validation split (no withheld test
// set) and evaluates on every labeled pixel of year B. Runs differ in the
// validation subset and the member seeds.
inline EvaluationReport transfer_evaluate(const FeatureRaster& train_fr,
                                          const LabelSet& train_labels,
                                          const FeatureRaster& predict_fr,
                                          const LabelSet& predict_labels,
                                          const TransferOptions& opt) {
    if (train_fr.feature_names != predict_fr.feature_names) {
        std::string diff;
        std::size_t shown = 0;
        std::size_t n = std::max(train_fr.feature_names.size(), predict_fr.feature_names.size());
        for (std::size_t i = 0; i < n && shown < 4; ++i) {
            std::string a = i < train_fr.feature_names.size() ? train_fr.feature_names[i] : "<none>";
            std::string b = i < predict_fr.feature_names.size() ? predict_fr.feature_names[i] : "<none>";
            if (a != b) {
                diff += " [" + std::to_string(i) + "] " + a + " vs " + b + ";";
                ++shown;
            }
        }
        throw ContractError("transfer: feature manifests differ:" + diff);
    }
    bool any_shared = false;
    for (const auto& [cls, name] : train_labels.class_table) {
        (void)name;
        if (predict_labels.class_table.count(cls)) any_shared = true;
    }
    if (!any_shared) throw ContractError("transfer: class tables are disjoint");

    // metrics are computed over the union table so transfer-year labels the
    // model never saw still count as errors
    std::map<std::int32_t, std::string> union_table = train_labels.class_table;
    for (const auto& [cls, name] : predict_labels.class_table) union_table.emplace(cls, name);

    EvaluationReport report;
    report.metadata["protocol"] = "transfer";
    report.metadata["train_year"] = std::to_string(train_labels.year);
    report.metadata["predict_year"] = std::to_string(predict_labels.year);
    report.metadata["input"] = to_string(train_fr.source);
    report.metadata["task"] = to_string(train_labels.task);
    report.metadata["heads"] = to_string(opt.heads.first) + "+" + to_string(opt.heads.second);
    report.metadata["shared_label_geometry_note"] =
        "labels of different years may reuse polygon geometry; not corrected";

    PixelDataset eval_ds = extract_dataset(predict_fr, predict_labels);

    for (std::size_t run = 0; run < opt.n_runs; ++run) {
        EvaluationReport::Run rr;
        rr.seed = opt.seed0 + run;
        try {
            SplitSpec split;
            split.train = opt.train_fraction;
            split.val = 1.0 - opt.train_fraction;
            split.test = 0.0;
            split.seed = opt.seed0 + run;
            SplitResult sr = split_polygons(train_labels, split);
            PixelDataset train_ds = extract_dataset(train_fr, sr.train);
            PixelDataset val_ds = extract_dataset(train_fr, sr.val);

            EnsembleModel em = train_ensemble(train_ds, val_ds, train_labels.class_table,
                                                      opt.heads, opt.base, rr.seed);
            Matrix probs = predict_ensemble_matrix(em, eval_ds.X);
            auto pred = detail::argmax_labels(probs, em.first.classes);
            rr.metrics = compute_metrics(pred, eval_ds.y, union_table);
            rr.ok = true;
        } catch (const Error& e) {
            rr.error = e.what();
        }
        report.runs.push_back(std::move(rr));
    }
    report.aggregate();
    return report;
}

// ---------------------------------------------------------------------------
// Relative CPU measurement
// ---------------------------------------------------------------------------

struct CpuTable {
    struct Row {
        std::string name;
        double cpu_seconds_mean = 0.0;
        double wall_seconds_mean = 0.0;
        double ratio_mean = 0.0;      // CPU relative to the baseline, per run
        double ratio_interval = 0.0;  // 1.96 * std / sqrt(n)
    };
    std::vector<Row> rows;
    std::string baseline;
    std::size_t runs = 0;
};

namespace detail {

inline double process_cpu_seconds() {
    timespec ts{};
    clock_gettime(CLOCK_PROCESS_CPUTIME_ID, &ts);
    return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

}  // namespace detail

// Times each workload n_runs times; per run, every workload's CPU time is
// divided by the baseline's CPU time from the same run, so the baseline row
// is exactly 1.
inline CpuTable measure_cpu(
    const std::vector<std::pair<std::string, std::function<void()>>>& workloads,
    std::size_t n_runs, const std::string& baseline) {
    if (workloads.size() < 2) throw ConfigError("measure_cpu needs at least 2 workloads");
    std::size_t base_idx = workloads.size();
    for (std::size_t i = 0; i < workloads.size(); ++i)
        if (workloads[i].first == baseline) base_idx = i;
    if (base_idx == workloads.size())
        throw ConfigError("measure_cpu: baseline '" + baseline + "' not among the workloads");

    std::size_t n = workloads.size();
    Matrix cpu(n_runs, n), wall(n_runs, n);
    for (std::size_t run = 0; run < n_runs; ++run) {
        for (std::size_t w = 0; w < n; ++w) {
            double c0 = detail::process_cpu_seconds();
            auto w0 = std::chrono::steady_clock::now();
            workloads[w].second();
            auto w1 = std::chrono::steady_clock::now();
            double c1 = detail::process_cpu_seconds();
            cpu(run, w) = std::max(c1 - c0, 1e-9);
            wall(run, w) = std::chrono::duration<double>(w1 - w0).count();
        }
    }

    CpuTable table;
    table.baseline = baseline;
    table.runs = n_runs;
    for (std::size_t w = 0; w < n; ++w) {
        CpuTable::Row row;
        row.name = workloads[w].first;
        detail::RunningStat ratio;
        double cpu_sum = 0.0, wall_sum = 0.0;
        for (std::size_t run = 0; run < n_runs; ++run) {
            cpu_sum += cpu(run, w);
            wall_sum += wall(run, w);
            ratio.add(cpu(run, w) / cpu(run, base_idx));
        }
        row.cpu_seconds_mean = cpu_sum / static_cast<double>(n_runs);
        row.wall_seconds_mean = wall_sum / static_cast<double>(n_runs);
        row.ratio_mean = ratio.mean();
        row.ratio_interval =
            n_runs > 1 ? 1.96 * ratio.stddev() / std::sqrt(static_cast<double>(n_runs)) : 0.0;
        table.rows.push_back(row);
    }
    return table;
}

}  // namespace cropmap
