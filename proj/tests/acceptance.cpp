// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Each criterion pins its tolerances in code.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "cropmap/evaluation.hpp"
#include "cropmap/landchange.hpp"
#include "cropmap/pipeline.hpp"
#include "cropmap/synthgen.hpp"
#include "oracles.hpp"

using namespace cropmap;

namespace {

struct Criterion {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
    void info(const std::string& what) {
        if (!detail.empty()) detail += "; ";
        detail += what;
    }
};

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1. Statistic oracle suite
// ---------------------------------------------------------------------------

Criterion criterion_stat_oracle() {
    Criterion c;
    auto t0 = std::chrono::steady_clock::now();
    Rng rng(1001);
    WindowSpec all{"all", "01-01", "12-31", false};
    double worst = 0.0;
    for (int it = 0; it < 1000; ++it) {
        std::size_t n = 1 + rng.next_below(60);
        std::vector<SeriesPoint> series;
        std::vector<double> vals;
        for (std::size_t i = 0; i < n; ++i) {
            double v = rng.next_gaussian() * (1.0 + rng.next_double() * 10.0);
            char buf[11];
            std::snprintf(buf, sizeof(buf), "2018-%02zu-%02zu", i / 28 + 1, i % 28 + 1);
            series.push_back({buf, v, true});
            vals.push_back(v);
        }
        auto check = [&](Stat stat, double want, bool defined) {
            Reduction got = reduce_window(series, all, stat);
            if (!defined) {
                if (got.valid) c.require(false, "statistic defined where oracle says undefined");
                return;
            }
            worst = std::max(worst, std::abs(got.value - want));
            if (std::abs(got.value - want) > 1e-9)
                c.require(false, to_string(stat) + " off by " +
                                     std::to_string(std::abs(got.value - want)));
        };
        std::vector<double> sorted = vals;
        std::sort(sorted.begin(), sorted.end());
        check(Stat::min, sorted.front(), true);
        check(Stat::max, sorted.back(), true);
        check(Stat::q25, oracle::quantile(vals, 0.25), true);
        check(Stat::q50, oracle::quantile(vals, 0.50), true);
        check(Stat::q75, oracle::quantile(vals, 0.75), true);
        check(Stat::mean, oracle::mean(vals), true);
        check(Stat::stddev, oracle::pop_std(vals), true);
        check(Stat::range, sorted.back() - sorted.front(), true);
        check(Stat::iqr, oracle::quantile(vals, 0.75) - oracle::quantile(vals, 0.25), true);
        bool moments_defined = n >= 3 && oracle::central_moment(vals, 2) > 0.0;
        check(Stat::skewness, moments_defined ? oracle::skewness(vals) : 0.0, moments_defined);
        check(Stat::kurtosis, moments_defined ? oracle::kurtosis_excess(vals) : 0.0, moments_defined);

        // quantile ordering invariant
        double q0 = reduce_window(series, all, Stat::min).value;
        double q1 = reduce_window(series, all, Stat::q25).value;
        double q2 = reduce_window(series, all, Stat::q50).value;
        double q3 = reduce_window(series, all, Stat::q75).value;
        double q4 = reduce_window(series, all, Stat::max).value;
        c.require(q0 <= q1 && q1 <= q2 && q2 <= q3 && q3 <= q4, "quantile ordering violated");
        c.require(reduce_window(series, all, Stat::range).value >= 0.0, "negative range");
        c.require(reduce_window(series, all, Stat::iqr).value >= 0.0, "negative iqr");
    }
    double secs = elapsed_s(t0);
    c.require(secs < 10.0, "runtime " + std::to_string(secs) + " s exceeds 10 s");
    char buf[128];
    std::snprintf(buf, sizeof(buf), "1000 series, max |err| %.2e, %.2f s", worst, secs);
    c.info(buf);
    return c;
}

// ---------------------------------------------------------------------------
// 2. Focal-loss correctness
// ---------------------------------------------------------------------------

Criterion criterion_focal() {
    Criterion c;
    Rng rng(1002);
    double worst_val = 0.0;
    for (int it = 0; it < 500; ++it) {
        std::size_t k = 2 + rng.next_below(7);
        std::vector<double> probs(k);
        double sum = 0.0;
        for (auto& p : probs) {
            p = 0.02 + rng.next_double();
            sum += p;
        }
        for (auto& p : probs) p /= sum;
        std::size_t t = rng.next_below(k);
        double w = 0.25 + rng.next_double() * 4.0;
        double a = 0.05 + rng.next_double() * 0.95;
        double got = focal_loss(probs, t, 0.0, a, w);
        double want = -w * a * std::log(probs[t]);
        worst_val = std::max(worst_val, std::abs(got - want));
        c.require(std::abs(got - want) <= 1e-9, "gamma=0 focal != weighted CE");
    }

    double worst_grad = 0.0;
    double gammas[] = {0.0, 0.5, 1.0, 2.0, 5.0};
    for (int it = 0; it < 50; ++it) {
        std::size_t k = 2 + rng.next_below(6);
        std::vector<double> logits(k);
        for (auto& z : logits) z = rng.next_gaussian() * 2.0;
        std::size_t t = rng.next_below(k);
        double gamma = gammas[it % 5];
        double alpha = 0.2 + 0.8 * rng.next_double();
        double w = 0.5 + rng.next_double();
        auto grad = focal_grad_logits(logits, t, gamma, alpha, w);
        auto f = [&](const std::vector<double>& z) {
            auto p = z;
            softmax_inplace(p);
            return focal_loss(p, t, gamma, alpha, w);
        };
        auto fd = oracle::finite_difference_gradient(f, logits, 1e-5);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            num += (grad[i] - fd[i]) * (grad[i] - fd[i]);
            den += fd[i] * fd[i];
        }
        double rel = std::sqrt(num) / std::max(1.0, std::sqrt(den));
        worst_grad = std::max(worst_grad, rel);
        c.require(rel < 1e-4, "gradient rel err " + std::to_string(rel));
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "500 value cases (max %.2e), 50 gradient cases (max rel %.2e)",
                  worst_val, worst_grad);
    c.info(buf);
    return c;
}

// ---------------------------------------------------------------------------
// 3. Learner sanity on separable synthetic data
// ---------------------------------------------------------------------------

Criterion criterion_learner_sanity() {
    Criterion c;
    auto t0 = std::chrono::steady_clock::now();

    SceneSpec spec = default_scene_spec(8, 5);
    spec.width = 64;
    spec.height = 64;
    spec.mean_field_px = 40.0;
    spec.noise_sigma = 0.02;
    spec.labeled_fraction = 0.6;
    spec.seed = 33;
    SyntheticScene scene = generate_scene(spec);
    const auto& yr = scene.years.front();

    SplitSpec split;
    split.seed = 5;
    SplitResult sr = split_polygons(yr.labels, split);
    PixelDataset train_ds = extract_dataset(yr.embeddings, sr.train);
    PixelDataset val_ds = extract_dataset(yr.embeddings, sr.val);
    PixelDataset test_ds = extract_dataset(yr.embeddings, sr.test);

    TrainConfig base;
    for (LearnerKind kind :
         {LearnerKind::LR, LearnerKind::MLP, LearnerKind::RF, LearnerKind::GBT}) {
        TrainedModel model = train_head(kind, train_ds, val_ds, base, 17);
        auto pred = model.predict(test_ds.X);
        std::size_t hit = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == test_ds.y[i];
        double acc = static_cast<double>(hit) / static_cast<double>(pred.size());
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%s %.4f", to_string(kind).c_str(), acc);
        c.info(buf);
        c.require(acc >= 0.99, to_string(kind) + " held-out accuracy " + std::to_string(acc));

        TrainedModel again = train_head(kind, train_ds, val_ds, base, 17);
        c.require(serialize_model(model) == serialize_model(again),
                  to_string(kind) + " rerun not byte-identical");
    }
    double secs = elapsed_s(t0);
    c.require(secs < 120.0, "runtime " + std::to_string(secs) + " s exceeds 2 min");
    c.info(std::to_string(secs).substr(0, 5) + " s");
    return c;
}

// ---------------------------------------------------------------------------
// 4. End-to-end pipeline on the 256x256 scene
// ---------------------------------------------------------------------------

SceneSpec e2e_scene_spec() {
    SceneSpec spec = default_scene_spec(16, 6);
    spec.width = 256;
    spec.height = 256;
    spec.mean_field_px = 150.0;  // ~437 fields, smallholder scale
    spec.noise_sigma = 0.12;
    spec.field_jitter_sigma = 0.04;
    spec.years = {{2018, 0.0, 0.0}, {2019, 0.0, 0.05}, {2021, 0.0, 0.10}};
    spec.seed = 2025;
    // 120 labeled polygons per year out of the ~437 fields
    double n_fields = std::round(256.0 * 256.0 / spec.mean_field_px);
    spec.labeled_fraction = 120.0 / n_fields;
    return spec;
}

Criterion criterion_end_to_end(const SyntheticScene& scene) {
    Criterion c;
    auto t0 = std::chrono::steady_clock::now();
    const auto& yr = scene.years.front();
    c.info("labeled polygons " + std::to_string(yr.labels.entries.size()));

    EvalRunOptions opt;
    opt.heads = {LearnerKind::LR, LearnerKind::RF};
    opt.base.class_weights = class_weights_inverse_frequency(yr.labels);
    opt.n_runs = 20;
    opt.seed0 = 91;
    EvaluationReport rep = evaluate_multi_run(yr.embeddings, yr.labels, opt);
    c.require(rep.completed == 20, "only " + std::to_string(rep.completed) + "/20 runs completed");
    char buf[160];
    std::snprintf(buf, sizeof(buf), "accuracy %.4f +- %.4f, macro-F1 %.4f +- %.4f",
                  rep.accuracy_mean, rep.accuracy_std, rep.macro_f1_mean, rep.macro_f1_std);
    c.info(buf);
    c.require(rep.accuracy_mean >= 0.95, "mean accuracy below 0.95");
    c.require(rep.macro_f1_mean >= 0.90, "mean macro-F1 below 0.90");

    double secs = elapsed_s(t0);
    c.require(secs < 600.0, "runtime " + std::to_string(secs) + " s exceeds 10 min");
    c.info(std::to_string(secs).substr(0, 6) + " s");
    return c;
}

// ---------------------------------------------------------------------------
// 5. Transfer protocol: zero drift, then label-noise degradation
// ---------------------------------------------------------------------------

Criterion criterion_transfer(const SyntheticScene& scene) {
    Criterion c;
    const auto& year_a = scene.years[0];
    const auto& year_b = scene.years[1];

    TransferOptions topt;
    topt.heads = {LearnerKind::RF, LearnerKind::GBT};
    topt.base.gbt_rounds = 80;
    topt.n_runs = 5;
    topt.seed0 = 7;
    EvaluationReport clean =
        transfer_evaluate(year_a.embeddings, year_a.labels, year_b.embeddings, year_b.labels, topt);

    EvalRunOptions eopt;
    eopt.heads = topt.heads;
    eopt.base = topt.base;
    eopt.n_runs = 5;
    eopt.seed0 = 7;
    EvaluationReport same_year = evaluate_multi_run(year_a.embeddings, year_a.labels, eopt);

    char buf[200];
    std::snprintf(buf, sizeof(buf), "same-year %.4f, transfer %.4f", same_year.accuracy_mean,
                  clean.accuracy_mean);
    c.info(buf);
    c.require(std::abs(clean.accuracy_mean - same_year.accuracy_mean) <= 0.02,
              "zero-drift transfer deviates from same-year by more than 0.02");

    LabelSet noisy = inject_label_noise(year_a.labels, 0.3, 99);
    EvaluationReport degraded =
        transfer_evaluate(year_a.embeddings, noisy, year_b.embeddings, year_b.labels, topt);
    double drop = clean.accuracy_mean - degraded.accuracy_mean;
    std::snprintf(buf, sizeof(buf), "noisy transfer %.4f (drop %.4f)", degraded.accuracy_mean, drop);
    c.info(buf);
    c.require(drop >= 0.05, "label noise degraded transfer accuracy by only " + std::to_string(drop));
    return c;
}

// ---------------------------------------------------------------------------
// 6. Change accounting
// ---------------------------------------------------------------------------

Criterion criterion_change() {
    Criterion c;
    auto map_of = [](std::size_t w, std::size_t h, const std::vector<std::int32_t>& ids, int year) {
        ClassMap m;
        m.width = w;
        m.height = h;
        m.year = year;
        m.class_table = {{0, "noncrop"}, {1, "cropland"}};
        m.class_ids = ids;
        return m;
    };

    // hand-counted pair: 100 pixels, 5 crop->noncrop, 2 noncrop->crop
    std::vector<std::int32_t> a(100, 0), b(100, 0);
    for (int i = 0; i < 30; ++i) a[i] = 1;
    for (int i = 0; i < 30; ++i) b[i] = 1;
    for (int i = 0; i < 5; ++i) b[i] = 0;
    for (int i = 30; i < 32; ++i) b[i] = 1;
    auto rep = cropland_change(map_of(10, 10, a, 2018), map_of(10, 10, b, 2019), 1);
    c.require(rep.decrease_pct == 5.0 && rep.increase_pct == 2.0 && rep.aggregate_pct == 7.0,
              "hand-counted change not reproduced exactly");

    auto same = cropland_change(map_of(10, 10, a, 2018), map_of(10, 10, a, 2018), 1);
    c.require(same.decrease_pct == 0.0 && same.increase_pct == 0.0 && same.aggregate_pct == 0.0,
              "identical maps must give exactly zero change");

    Rng rng(1006);
    for (int it = 0; it < 100; ++it) {
        std::vector<ClassMap> maps;
        double min_pct = 101.0;
        for (int y = 0; y < 3; ++y) {
            std::vector<std::int32_t> ids(144);
            std::size_t crop = 0;
            for (auto& v : ids) {
                v = rng.next_double() < 0.4 + 0.2 * rng.next_double() ? 1 : 0;
                crop += v;
            }
            min_pct = std::min(min_pct, 100.0 * static_cast<double>(crop) / 144.0);
            maps.push_back(map_of(12, 12, ids, 2018 + y));
        }
        auto core = core_cropland(maps, 1);
        c.require(core.percent_of_area <= min_pct + 1e-9,
                  "core percent exceeds the per-year minimum");
    }
    c.info("hand counts exact, 100 random triples monotone");
    return c;
}

// ---------------------------------------------------------------------------
// 7. Split hygiene
// ---------------------------------------------------------------------------

Criterion criterion_split_hygiene() {
    Criterion c;
    Rng rng(1007);
    std::size_t leaks = 0;
    for (int it = 0; it < 1000; ++it) {
        LabelSet labels;
        std::size_t classes = 2 + rng.next_below(5);
        std::int64_t poly = 0;
        std::uint32_t row = 0;
        for (std::size_t cls = 0; cls < classes; ++cls) {
            labels.class_table[static_cast<std::int32_t>(cls)] = "c" + std::to_string(cls);
            std::size_t polys = 1 + rng.next_below(15);
            for (std::size_t p = 0; p < polys; ++p) {
                LabelEntry e;
                e.polygon_id = poly++;
                e.class_id = static_cast<std::int32_t>(cls);
                e.pixels.emplace_back(row++, 0u);
                labels.entries.push_back(e);
            }
        }
        SplitSpec spec;
        spec.seed = rng.next_u64();
        auto res = split_polygons(labels, spec);
        std::set<std::int64_t> seen;
        std::size_t total = 0;
        for (const LabelSet* part : {&res.train, &res.val, &res.test}) {
            for (const auto& e : part->entries) {
                ++total;
                if (!seen.insert(e.polygon_id).second) ++leaks;
            }
        }
        if (total != labels.entries.size()) ++leaks;
    }
    c.require(leaks == 0, std::to_string(leaks) + " polygon leaks");
    c.info("1000 random splits, 0 leaked polygon ids");
    return c;
}

// ---------------------------------------------------------------------------
// 8. Metric oracle
// ---------------------------------------------------------------------------

Criterion criterion_metric_oracle() {
    Criterion c;
    Rng rng(1008);
    std::map<std::int32_t, std::string> table;
    for (int k = 0; k < 9; ++k) table[k] = "c" + std::to_string(k);
    double worst = 0.0;
    for (int it = 0; it < 1000; ++it) {
        std::size_t n = 1 + rng.next_below(300);
        std::size_t k = 2 + rng.next_below(8);
        std::vector<std::int32_t> truth(n), pred(n);
        for (std::size_t i = 0; i < n; ++i) {
            truth[i] = static_cast<std::int32_t>(rng.next_below(k));
            pred[i] = static_cast<std::int32_t>(rng.next_below(k));
        }
        auto got = compute_metrics(pred, truth, table);
        auto want = oracle::confusion_metrics(pred, truth);
        worst = std::max({worst, std::abs(got.accuracy - want.accuracy),
                          std::abs(got.macro_f1 - want.macro_f1),
                          std::abs(got.weighted_f1 - want.weighted_f1)});
    }
    c.require(worst <= 1e-12, "metric deviation " + std::to_string(worst));

    auto hand = compute_metrics({0, 1, 1, 1}, {0, 0, 1, 1}, {{0, "a"}, {1, "b"}});
    c.require(hand.accuracy == 0.75, "hand case accuracy");
    c.require(std::abs(hand.macro_f1 - (2.0 / 3.0 + 0.8) / 2.0) < 1e-12, "hand case macro-F1");
    char buf[96];
    std::snprintf(buf, sizeof(buf), "1000 random vectors, max |err| %.2e; 4-sample case exact",
                  worst);
    c.info(buf);
    return c;
}

// ---------------------------------------------------------------------------
// 9. STM performance / thread determinism + relative CPU table
// ---------------------------------------------------------------------------

Criterion criterion_performance() {
    Criterion c;

    // 512 x 512, 36 optical dates x 12 bands
    SceneSpec spec = default_scene_spec(8, 5);
    spec.width = 512;
    spec.height = 512;
    spec.mean_field_px = 180.0;
    spec.noise_sigma = 0.04;
    spec.optical_dates = 36;
    spec.sar_dates = 30;
    spec.optical_bands = {"S2_B02", "S2_B03", "S2_B04", "S2_B05", "S2_B06", "S2_B07",
                          "S2_B08", "S2_B8A", "S2_B11", "S2_B12", "S2_X1", "S2_X2"};
    spec.cloud_fraction = 0.1;
    spec.seed = 512;
    SyntheticScene scene = generate_scene(spec);
    TimeSeriesCube& cube = scene.years.front().optical;
    TimeSeriesCube& sar = scene.years.front().sar;

    StmOptions opt;
    opt.index_specs.push_back({IndexKind::NDVI, {{"red", "S2_B04"}, {"nir", "S2_B08"}}});
    opt.index_specs.push_back(
        {IndexKind::EVI, {{"blue", "S2_B02"}, {"red", "S2_B04"}, {"nir", "S2_B08"}}});
    opt.index_specs.push_back({IndexKind::NDWI, {{"green", "S2_B03"}, {"nir", "S2_B08"}}});
    opt.tasseled_cap.coefficients["TCW"] = {0.1, 0.2, 0.3, 0.1, 0.0, -0.1, 0.2, 0.1, -0.2, 0.1, 0.05, 0.0};
    opt.tasseled_cap.coefficients["TCG"] = {-0.2, 0.1, 0.4, 0.0, 0.1, 0.2, -0.1, 0.0, 0.1, -0.3, 0.0, 0.1};
    opt.tasseled_cap.coefficients["TCB"] = {0.3, 0.3, 0.2, 0.1, 0.1, 0.1, 0.2, 0.2, 0.1, 0.1, 0.1, 0.1};

    std::uint64_t hashes[3] = {0, 0, 0};
    double best_throughput = 0.0;
    unsigned thread_counts[3] = {1, 4, hardware_threads()};
    for (int t = 0; t < 3; ++t) {
        auto t0 = std::chrono::steady_clock::now();
        FeatureRaster fr = build_stm_features(cube, sar, opt, nullptr, thread_counts[t]);
        double secs = elapsed_s(t0);
        hashes[t] = fnv1a64(fr.values.data(), fr.values.size() * 4);
        hashes[t] = fnv1a64(fr.valid.data(), fr.valid.size(), hashes[t]);
        hashes[t] = fnv1a64(fr.imputed_bits.data(), fr.imputed_bits.size(), hashes[t]);
        double throughput = static_cast<double>(cube.n_pixels()) / secs;
        best_throughput = std::max(best_throughput, throughput);
        char buf[120];
        std::snprintf(buf, sizeof(buf), "%u threads %.1f s (%.0f px/s, %zu features)",
                      thread_counts[t], secs, throughput, fr.n_features());
        c.info(buf);
    }
    c.require(hashes[0] == hashes[1] && hashes[1] == hashes[2],
              "outputs differ across thread counts");

    // relative CPU across input preparations, Table 8 layout: feature
    // preparation plus one ensemble train/predict cycle per method
    SceneSpec small = default_scene_spec(8, 5);
    small.width = 96;
    small.height = 96;
    small.mean_field_px = 60.0;
    small.noise_sigma = 0.04;
    small.labeled_fraction = 0.8;
    small.seed = 77;
    SyntheticScene small_scene = generate_scene(small);
    auto& sy = small_scene.years.front();
    StmOptions small_opt;
    small_opt.stats.index_summaries.clear();
    auto classify_cycle = [&](const FeatureRaster& fr) {
        SplitSpec split;
        split.train = 0.9;
        split.val = 0.1;
        split.test = 0.0;
        split.seed = 3;
        SplitResult sr = split_polygons(sy.labels, split);
        PixelDataset train_ds = extract_dataset(fr, sr.train);
        PixelDataset val_ds = extract_dataset(fr, sr.val);
        TrainConfig base;
        base.rf_trees = 60;
        EnsembleModel em = train_ensemble(train_ds, val_ds, sy.labels.class_table,
                                          {LearnerKind::LR, LearnerKind::RF}, base, 5);
        predict_ensemble_matrix(em, val_ds.X);
    };
    std::vector<std::pair<std::string, std::function<void()>>> workloads = {
        {"embedding", [&] { classify_cycle(sy.embeddings); }},
        {"stm",
         [&] { classify_cycle(build_stm_features(sy.optical, sy.sar, small_opt)); }},
    };
    CpuTable table = measure_cpu(workloads, 3, "embedding");
    std::string csv = cpu_table_csv(table);
    c.require(csv.find("method,relative_cpu_mean") == 0, "cpu table layout missing header");
    c.require(table.rows.front().ratio_mean == 1.0, "baseline ratio must be exactly 1");
    std::printf("%s", csv.c_str());
    return c;
}

}  // namespace

int main() {
    struct Entry {
        const char* name;
        std::function<Criterion()> run;
    };

    // the 256x256 scene is shared by criteria 4 and 5
    SceneSpec shared_spec = e2e_scene_spec();
    SyntheticScene shared_scene;

    std::vector<Entry> criteria = {
        {"1 statistic oracle suite", criterion_stat_oracle},
        {"2 focal-loss correctness", criterion_focal},
        {"3 learner sanity", criterion_learner_sanity},
        {"4 end-to-end pipeline", [&] { return criterion_end_to_end(shared_scene); }},
        {"5 transfer protocol", [&] { return criterion_transfer(shared_scene); }},
        {"6 change accounting", criterion_change},
        {"7 split hygiene", criterion_split_hygiene},
        {"8 metric oracle", criterion_metric_oracle},
        {"9 performance/determinism", criterion_performance},
    };

    std::printf("generating shared 256x256 scene...\n");
    shared_scene = generate_scene(shared_spec);

    int failures = 0;
    for (auto& entry : criteria) {
        Criterion c;
        try {
            c = entry.run();
        } catch (const std::exception& e) {
            c.pass = false;
            c.info(std::string("exception: ") + e.what());
        }
        std::printf("[%s] criterion %s%s%s\n", c.pass ? "PASS" : "FAIL", entry.name,
                    c.detail.empty() ? "" : ": ", c.detail.c_str());
        std::fflush(stdout);
        if (!c.pass) ++failures;
    }
    if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
