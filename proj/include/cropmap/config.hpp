#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cropmap/common.hpp"
#include "cropmap/embeddings.hpp"
#include "cropmap/indices.hpp"
#include "cropmap/learners.hpp"
#include "cropmap/splits.hpp"
#include "cropmap/stm.hpp"
#include "cropmap/synthgen.hpp"

namespace cropmap {

// ---------------------------------------------------------------------------
// Declarative run configuration
//
// One JSON file drives a whole run; the CLI only picks the config and may
// override the output directory. Seeds are explicit: a config without a
// seed does not parse.
// ---------------------------------------------------------------------------

struct YearInputs {
    int year = 0;
    std::string optical_cube;  // directory paths; empty where unused
    std::string sar_cube;
    std::string embeddings;
    std::string labels;
};

struct TransferSpec {
    int train_year = 0;
    std::vector<int> predict_years;
    std::size_t runs = 5;
    double train_fraction = 0.9;
};

struct PipelineConfig {
    FeatureSource input = FeatureSource::embedding;
    Task task = Task::landcover;
    std::vector<YearInputs> years;
    std::map<std::int32_t, std::int32_t> class_merge;

    std::vector<WindowSpec> windows = default_windows();
    StatSpec stats = default_stat_spec();
    std::vector<IndexSpec> indices;
    TasseledCapSpec tasseled_cap;
    std::size_t stm_feature_target = 0;
    std::size_t embedding_dim = 0;  // 0 = accept whatever the payload carries

    std::vector<LearnerKind> learners = {LearnerKind::LR, LearnerKind::MLP, LearnerKind::RF,
                                         LearnerKind::GBT};
    std::optional<std::pair<LearnerKind, LearnerKind>> heads;  // fixed ensemble pair
    TrainConfig hyper;
    bool inverse_frequency_weights = true;

    std::size_t selection_runs = 200;
    std::size_t eval_runs = 20;
    std::size_t map_runs = 3;
    SplitSpec split;
    std::optional<TransferSpec> transfer;
    std::optional<std::int32_t> cropland_class;
    std::string core_mask_dir;  // croptype mapping input

    std::size_t cpu_runs = 5;
    std::vector<std::string> cpu_inputs;  // feature kinds to compare
    std::string cpu_baseline;

    std::uint64_t seed = 0;
    std::string output_dir = "out";

    std::optional<SceneSpec> synth;  // for the synth command

    json raw;  // the parsed config document, kept for provenance copies

    const YearInputs& inputs_for(int year) const {
        for (const auto& y : years)
            if (y.year == year) return y;
        throw ConfigError("no inputs configured for year " + std::to_string(year));
    }
};

namespace detail {

inline IndexSpec index_spec_from_json(const json& j) {
    IndexSpec spec;
    spec.name = index_kind_from_string(j.at("name").get<std::string>());
    if (j.contains("band_map"))
        spec.band_map = j.at("band_map").get<std::map<std::string, std::string>>();
    return spec;
}

inline std::map<std::int32_t, std::int32_t> int_map_from_json(const json& j,
                                                              const std::string& what) {
    std::map<std::int32_t, std::int32_t> out;
    for (auto it = j.begin(); it != j.end(); ++it) {
        try {
            out[std::stoi(it.key())] = it.value().get<std::int32_t>();
        } catch (const std::exception&) {
            throw ConfigError(what + ": bad entry '" + it.key() + "'");
        }
    }
    return out;
}

inline SceneSpec scene_spec_from_json(const json& j) {
    SceneSpec spec = default_scene_spec(j.value("embedding_dim", std::size_t(16)),
                                        j.value("n_classes", std::size_t(6)));
    spec.width = j.value("width", spec.width);
    spec.height = j.value("height", spec.height);
    spec.mean_field_px = j.value("mean_field_px", spec.mean_field_px);
    spec.noise_sigma = j.value("noise_sigma", spec.noise_sigma);
    spec.field_jitter_sigma = j.value("field_jitter_sigma", spec.field_jitter_sigma);
    spec.labeled_fraction = j.value("labeled_fraction", spec.labeled_fraction);
    spec.cloud_fraction = j.value("cloud_fraction", spec.cloud_fraction);
    spec.bayes_error_bound = j.value("bayes_error_bound", spec.bayes_error_bound);
    spec.optical_dates = j.value("optical_dates", spec.optical_dates);
    spec.sar_dates = j.value("sar_dates", spec.sar_dates);
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("years")) {
        spec.years.clear();
        for (const auto& y : j.at("years")) {
            YearSpec ys;
            ys.year = y.at("year").get<int>();
            ys.signature_drift = y.value("signature_drift", 0.0);
            ys.rotation_rate = y.value("rotation_rate", 0.0);
            spec.years.push_back(ys);
        }
    }
    if (j.contains("classes")) {
        spec.classes.clear();
        for (const auto& c : j.at("classes")) {
            SyntheticClass cls;
            cls.name = c.at("name").get<std::string>();
            cls.base = c.value("base", cls.base);
            cls.amplitude = c.value("amplitude", cls.amplitude);
            cls.green_up_day = c.value("green_up_day", cls.green_up_day);
            cls.senescence_day = c.value("senescence_day", cls.senescence_day);
            cls.rate_up = c.value("rate_up", cls.rate_up);
            cls.rate_down = c.value("rate_down", cls.rate_down);
            cls.share = c.value("share", cls.share);
            cls.embedding_prototype = c.at("embedding_prototype").get<std::vector<double>>();
            spec.classes.push_back(cls);
        }
    }
    return spec;
}

}  // namespace detail

inline PipelineConfig parse_config(const json& j) {
    PipelineConfig cfg;
    cfg.raw = j;
    if (!j.contains("seed"))
        throw ConfigError("config must set an explicit seed (wall-clock seeding is not supported)");
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.hyper.seed = cfg.seed;

    if (j.contains("input")) cfg.input = feature_source_from_string(j.at("input").get<std::string>());
    if (j.contains("task")) cfg.task = task_from_string(j.at("task").get<std::string>());
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();

    if (j.contains("years")) {
        for (const auto& y : j.at("years")) {
            YearInputs in;
            in.year = y.at("year").get<int>();
            in.optical_cube = y.value("optical_cube", std::string());
            in.sar_cube = y.value("sar_cube", std::string());
            in.embeddings = y.value("embeddings", std::string());
            in.labels = y.value("labels", std::string());
            cfg.years.push_back(in);
        }
    }
    if (j.contains("class_merge"))
        cfg.class_merge = detail::int_map_from_json(j.at("class_merge"), "class_merge");

    if (j.contains("windows")) {
        cfg.windows.clear();
        for (const auto& w : j.at("windows")) {
            WindowSpec ws;
            ws.name = w.at("name").get<std::string>();
            ws.start = w.at("start").get<std::string>();
            ws.end = w.at("end").get<std::string>();
            ws.wraps_year = w.value("wraps_year", false);
            ws.validate();
            cfg.windows.push_back(ws);
        }
    }
    if (j.contains("statistics")) {
        cfg.stats.statistics.clear();
        for (const auto& s : j.at("statistics"))
            cfg.stats.statistics.push_back(stat_from_string(s.get<std::string>()));
    }
    if (j.contains("index_summaries")) {
        cfg.stats.index_summaries.clear();
        for (const auto& s : j.at("index_summaries")) {
            IndexSummary sum;
            sum.index = s.at("index").get<std::string>();
            std::string red = s.value("reduction", std::string("median"));
            if (red != "mean" && red != "median")
                throw ConfigError("index summary reduction must be mean or median");
            sum.reduction = red == "mean" ? IndexReduction::mean : IndexReduction::median;
            cfg.stats.index_summaries.push_back(sum);
        }
    }
    if (j.contains("indices"))
        for (const auto& spec : j.at("indices")) cfg.indices.push_back(detail::index_spec_from_json(spec));
    if (j.contains("tasseled_cap"))
        cfg.tasseled_cap.coefficients =
            j.at("tasseled_cap").get<std::map<std::string, std::vector<double>>>();
    cfg.stm_feature_target = j.value("stm_feature_target", std::size_t(0));
    cfg.embedding_dim = j.value("embedding_dim", std::size_t(0));

    if (j.contains("learners")) {
        cfg.learners.clear();
        for (const auto& l : j.at("learners"))
            cfg.learners.push_back(learner_from_string(l.get<std::string>()));
    }
    if (j.contains("heads")) {
        const auto& h = j.at("heads");
        if (!h.is_array() || h.size() != 2) throw ConfigError("heads must name exactly 2 learners");
        cfg.heads = {learner_from_string(h[0].get<std::string>()),
                     learner_from_string(h[1].get<std::string>())};
    }
    if (j.contains("hyperparameters")) {
        const auto& h = j.at("hyperparameters");
        cfg.hyper.focal_gamma = h.value("focal_gamma", cfg.hyper.focal_gamma);
        cfg.hyper.focal_alpha = h.value("focal_alpha", cfg.hyper.focal_alpha);
        cfg.hyper.lr_l2_lambda = h.value("lr_l2_lambda", cfg.hyper.lr_l2_lambda);
        cfg.hyper.lr_max_iter = h.value("lr_max_iter", cfg.hyper.lr_max_iter);
        cfg.hyper.mlp_hidden = h.value("mlp_hidden", cfg.hyper.mlp_hidden);
        cfg.hyper.mlp_batch = h.value("mlp_batch", cfg.hyper.mlp_batch);
        cfg.hyper.mlp_learning_rate = h.value("mlp_learning_rate", cfg.hyper.mlp_learning_rate);
        cfg.hyper.mlp_max_epochs = h.value("mlp_max_epochs", cfg.hyper.mlp_max_epochs);
        cfg.hyper.mlp_patience = h.value("mlp_patience", cfg.hyper.mlp_patience);
        cfg.hyper.rf_trees = h.value("rf_trees", cfg.hyper.rf_trees);
        cfg.hyper.rf_mtry = h.value("rf_mtry", cfg.hyper.rf_mtry);
        cfg.hyper.gbt_rounds = h.value("gbt_rounds", cfg.hyper.gbt_rounds);
        cfg.hyper.gbt_depth = h.value("gbt_depth", cfg.hyper.gbt_depth);
        cfg.hyper.gbt_learning_rate = h.value("gbt_learning_rate", cfg.hyper.gbt_learning_rate);
        cfg.hyper.gbt_bins = h.value("gbt_bins", cfg.hyper.gbt_bins);
    }
    cfg.inverse_frequency_weights = j.value("inverse_frequency_weights", true);

    cfg.selection_runs = j.value("selection_runs", cfg.selection_runs);
    cfg.eval_runs = j.value("eval_runs", cfg.eval_runs);
    cfg.map_runs = j.value("map_runs", cfg.map_runs);
    if (j.contains("split")) {
        const auto& s = j.at("split");
        cfg.split.train = s.value("train", cfg.split.train);
        cfg.split.val = s.value("val", cfg.split.val);
        cfg.split.test = s.value("test", cfg.split.test);
        cfg.split.validate();
    }
    cfg.split.seed = cfg.seed;

    if (j.contains("transfer")) {
        TransferSpec t;
        const auto& tj = j.at("transfer");
        t.train_year = tj.at("train_year").get<int>();
        t.predict_years = tj.at("predict_years").get<std::vector<int>>();
        t.runs = tj.value("runs", t.runs);
        t.train_fraction = tj.value("train_fraction", t.train_fraction);
        cfg.transfer = t;
    }
    if (j.contains("cropland_class")) cfg.cropland_class = j.at("cropland_class").get<std::int32_t>();
    cfg.core_mask_dir = j.value("core_mask", std::string());

    cfg.cpu_runs = j.value("cpu_runs", cfg.cpu_runs);
    if (j.contains("cpu_inputs"))
        cfg.cpu_inputs = j.at("cpu_inputs").get<std::vector<std::string>>();
    cfg.cpu_baseline = j.value("cpu_baseline", std::string());

    if (j.contains("synth")) cfg.synth = detail::scene_spec_from_json(j.at("synth"));
    return cfg;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw ConfigError("config file not found: " + path.string());
    json j = json::parse(fsutil::read_text(path), nullptr, false);
    if (j.is_discarded()) throw ConfigError("cannot parse config file: " + path.string());
    return parse_config(j);
}

}  // namespace cropmap
