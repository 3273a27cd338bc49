#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "cropmap/dataset.hpp"
#include "cropmap/embeddings.hpp"
#include "cropmap/learners.hpp"
#include "cropmap/metrics.hpp"
#include "cropmap/splits.hpp"

namespace cropmap {

namespace detail {

inline bool learner_wants_normalized_inputs(LearnerKind k) {
    return k == LearnerKind::LR || k == LearnerKind::MLP;  // trees are split-invariant
}

}  // namespace detail

// Trains one head; linear/MLP heads get z-scored inputs fitted on the train
// partition, with the record attached so prediction replays it. Trees train
// on the raw features.
inline TrainedModel train_head(LearnerKind kind, const PixelDataset& train_ds,
                               const PixelDataset& val_ds, const TrainConfig& base,
                               std::uint64_t head_seed, const std::string& norm_ref = "train_pixels") {
    TrainConfig cfg = base;
    cfg.learner = kind;
    cfg.seed = head_seed;
    const Matrix* xv = val_ds.y.empty() ? nullptr : &val_ds.X;
    const std::vector<std::int32_t>* yv = val_ds.y.empty() ? nullptr : &val_ds.y;
    if (!detail::learner_wants_normalized_inputs(kind))
        return train(train_ds.X, train_ds.y, cfg, xv, yv);

    auto rec = std::make_shared<NormalizationRecord>(
        fit_normalization(train_ds.X, NormMethod::zscore, norm_ref));
    Matrix Xn = train_ds.X;
    rec->apply_rows(Xn);
    Matrix Xvn;
    if (xv) {
        Xvn = *xv;
        rec->apply_rows(Xvn);
        xv = &Xvn;
    }
    TrainedModel tm = train(Xn, train_ds.y, cfg, xv, yv);
    tm.normalization = rec;
    tm.normalization_ref = norm_ref;
    return tm;
}

// ---------------------------------------------------------------------------
// Classifier-head selection
// ---------------------------------------------------------------------------

struct SelectionOptions {
    std::vector<LearnerKind> learners = {LearnerKind::LR, LearnerKind::MLP, LearnerKind::RF,
                                         LearnerKind::GBT};
    std::size_t runs = 200;
    std::uint64_t seed0 = 1;
    SplitSpec split;
    TrainConfig base;  // hyperparameters; learner/seed overwritten per run
};

struct SelectionReport {
    struct Entry {
        LearnerKind learner;
        double accuracy_mean = 0.0, accuracy_std = 0.0;
        double macro_f1_mean = 0.0, macro_f1_std = 0.0;
        double weighted_f1_mean = 0.0, weighted_f1_std = 0.0;
        std::size_t completed_runs = 0;

        double combined_mean() const {
            return (accuracy_mean + macro_f1_mean + weighted_f1_mean) / 3.0;
        }
    };
    std::vector<Entry> entries;                 // one per surviving learner
    std::pair<LearnerKind, LearnerKind> chosen{LearnerKind::LR, LearnerKind::LR};
    std::size_t runs = 0;
    bool tie_broken = false;
    std::vector<std::string> diagnostics;       // excluded learners etc.
    std::string resample_policy = "split_and_seed_per_run";
};

namespace detail {

struct RunningStat {
    double sum = 0.0, sum_sq = 0.0;
    std::size_t n = 0;
    void add(double v) {
        sum += v;
        sum_sq += v * v;
        ++n;
    }
    double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
    // sample std (n-1)
    double stddev() const {
        if (n < 2) return 0.0;
        double m = mean();
        double var = (sum_sq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1);
        return var > 0.0 ? std::sqrt(var) : 0.0;
    }
};

}  // namespace detail

// R train/evaluate cycles per learner with a fresh polygon split and seed
// per run (seed0..seed0+R-1), ranked by the unweighted mean of the three
// metric means; the top two become the ensemble pair. Ties break toward the
// lower learner enum order. A learner that fails any run is excluded.
inline SelectionReport select_heads(const FeatureRaster& fr, const LabelSet& labels,
                                    const SelectionOptions& opt) {
    if (opt.runs < 2) throw ConfigError("selection needs R >= 2 runs");
    if (opt.learners.size() < 2) throw ConfigError("selection needs at least 2 learners");

    SelectionReport report;
    report.runs = opt.runs;

    struct Acc {
        detail::RunningStat acc, mf1, wf1;
        bool failed = false;
        std::string error;
    };
    std::map<LearnerKind, Acc> stats;
    for (auto k : opt.learners) stats[k];

    for (std::size_t run = 0; run < opt.runs; ++run) {
        SplitSpec split = opt.split;
        split.seed = opt.seed0 + run;
        SplitResult sr = split_polygons(labels, split);
        const LabelSet& eval_part = split.test > 0.0 ? sr.test : sr.val;

        PixelDataset train_ds = extract_dataset(fr, sr.train);
        PixelDataset val_ds = extract_dataset(fr, sr.val);
        PixelDataset eval_ds = extract_dataset(fr, eval_part);
        if (train_ds.y.empty() || eval_ds.y.empty())
            throw DataError("selection split produced an empty partition");

        for (auto kind : opt.learners) {
            auto& acc = stats[kind];
            if (acc.failed) continue;
            try {
                TrainedModel model =
                    train_head(kind, train_ds, val_ds, opt.base, opt.seed0 + run);
                auto pred = model.predict(eval_ds.X);
                MetricRecord m = compute_metrics(pred, eval_ds.y, labels.class_table);
                acc.acc.add(m.accuracy);
                acc.mf1.add(m.macro_f1);
                acc.wf1.add(m.weighted_f1);
            } catch (const Error& e) {
                acc.failed = true;
                acc.error = e.what();
            }
        }
    }

    std::vector<std::pair<double, LearnerKind>> ranking;
    for (auto kind : opt.learners) {
        const auto& acc = stats[kind];
        if (acc.failed) {
            report.diagnostics.push_back(to_string(kind) + " excluded: " + acc.error);
            continue;
        }
        SelectionReport::Entry e;
        e.learner = kind;
        e.accuracy_mean = acc.acc.mean();
        e.accuracy_std = acc.acc.stddev();
        e.macro_f1_mean = acc.mf1.mean();
        e.macro_f1_std = acc.mf1.stddev();
        e.weighted_f1_mean = acc.wf1.mean();
        e.weighted_f1_std = acc.wf1.stddev();
        e.completed_runs = acc.acc.n;
        report.entries.push_back(e);
        ranking.emplace_back(e.combined_mean(), kind);
    }
    if (ranking.size() < 2)
        throw DataError("fewer than 2 learners completed selection; cannot form an ensemble");

    std::sort(ranking.begin(), ranking.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return static_cast<int>(a.second) < static_cast<int>(b.second);
    });
    report.tie_broken = ranking.size() >= 2 && ranking[0].first == ranking[1].first;
    if (ranking.size() > 2 && ranking[1].first == ranking[2].first) report.tie_broken = true;
    report.chosen = {ranking[0].second, ranking[1].second};
    return report;
}

// ---------------------------------------------------------------------------
// Two-head probability-averaging ensemble
// ---------------------------------------------------------------------------

struct EnsembleModel {
    TrainedModel first;
    TrainedModel second;
    std::map<std::int32_t, std::string> class_table;

    void validate() const {
        if (first.classes != second.classes)
            throw ContractError("ensemble members disagree on the class list");
        if (first.feature_dim != second.feature_dim)
            throw ContractError("ensemble members disagree on feature dimension");
        for (auto cls : first.classes)
            if (class_table.find(cls) == class_table.end())
                throw ContractError("ensemble class " + std::to_string(cls) +
                                    " missing from class table");
    }
};

// Trains the two heads on the train partition (validation passed through for
// early stopping) and returns the probability-averaging ensemble.
inline EnsembleModel train_ensemble(const PixelDataset& train_ds, const PixelDataset& val_ds,
                                    const std::map<std::int32_t, std::string>& class_table,
                                    std::pair<LearnerKind, LearnerKind> heads,
                                    const TrainConfig& base, std::uint64_t run_seed,
                                    const std::string& norm_ref = "train_pixels") {
    EnsembleModel em;
    em.class_table = class_table;
    em.first = train_head(heads.first, train_ds, val_ds, base, derive_seed(run_seed, 0), norm_ref);
    em.second = train_head(heads.second, train_ds, val_ds, base, derive_seed(run_seed, 1), norm_ref);
    em.validate();
    return em;
}

// Arithmetic mean of the two members' probability rows.
inline Matrix predict_ensemble_matrix(const EnsembleModel& model, const Matrix& X) {
    model.validate();
    Matrix a = model.first.predict_proba(X);
    Matrix b = model.second.predict_proba(X);
    for (std::size_t i = 0; i < a.data().size(); ++i)
        a.data()[i] = 0.5 * (a.data()[i] + b.data()[i]);
    return a;
}

// Wall-to-wall probability map over every raster pixel, chunked to bound
// memory on large scenes.
inline ClassProbabilityMap predict_ensemble(const EnsembleModel& model, const FeatureRaster& fr,
                                            std::size_t chunk_pixels = 1 << 16) {
    model.validate();
    if (fr.n_features() != model.first.feature_dim)
        throw ContractError("feature raster dimension " + std::to_string(fr.n_features()) +
                            " does not match ensemble dimension " +
                            std::to_string(model.first.feature_dim));
    ClassProbabilityMap pm;
    pm.width = fr.width;
    pm.height = fr.height;
    pm.year = fr.year;
    pm.class_ids = model.first.classes;
    pm.class_table = model.class_table;
    std::size_t n_px = fr.n_pixels();
    std::size_t K = pm.class_ids.size();
    pm.probs.resize(K * n_px);
    for (std::size_t begin = 0; begin < n_px; begin += chunk_pixels) {
        std::size_t end = std::min(n_px, begin + chunk_pixels);
        Matrix X = raster_chunk_matrix(fr, begin, end);
        Matrix probs = predict_ensemble_matrix(model, X);
        for (std::size_t p = begin; p < end; ++p)
            for (std::size_t k = 0; k < K; ++k)
                pm.probs[k * n_px + p] = static_cast<float>(probs(p - begin, k));
    }
    return pm;
}

// ---------------------------------------------------------------------------
// Multi-run aggregation
// ---------------------------------------------------------------------------

// Mean of the per-run probability maps; summing in sorted value order keeps
// the result independent of the run ordering bit for bit.
inline ClassProbabilityMap mean_probability_map(const std::vector<ClassProbabilityMap>& runs) {
    if (runs.empty()) throw ContractError("aggregate_runs: no probability maps");
    const auto& head = runs.front();
    for (const auto& pm : runs) {
        if (pm.width != head.width || pm.height != head.height)
            throw ContractError("aggregate_runs: probability map shapes differ");
        if (pm.class_ids != head.class_ids)
            throw ContractError("aggregate_runs: probability map class lists differ");
    }
    ClassProbabilityMap mean = head;
    double inv = 1.0 / static_cast<double>(runs.size());
    constexpr std::size_t kBlock = 8192;
    std::size_t n_blocks = (mean.probs.size() + kBlock - 1) / kBlock;
    parallel_for(n_blocks, [&](std::size_t blk) {
        std::vector<float> vals(runs.size());
        std::size_t lo = blk * kBlock, hi = std::min(mean.probs.size(), lo + kBlock);
        for (std::size_t i = lo; i < hi; ++i) {
            for (std::size_t rix = 0; rix < runs.size(); ++rix) vals[rix] = runs[rix].probs[i];
            std::sort(vals.begin(), vals.end());
            double acc = 0.0;
            for (float v : vals) acc += v;
            mean.probs[i] = static_cast<float>(acc * inv);
        }
    });
    return mean;
}

// Mean probabilities over runs, then argmax.
inline ClassMap aggregate_runs(const std::vector<ClassProbabilityMap>& runs,
                               std::size_t* tie_count = nullptr) {
    return mean_probability_map(runs).argmax(tie_count);
}

}  // namespace cropmap
