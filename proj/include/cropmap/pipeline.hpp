#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cropmap/config.hpp"
#include "cropmap/dataset.hpp"
#include "cropmap/ensemble.hpp"
#include "cropmap/evaluation.hpp"
#include "cropmap/landchange.hpp"
#include "cropmap/reports.hpp"
#include "cropmap/synthgen.hpp"

namespace cropmap {

// ---------------------------------------------------------------------------
// Command layer: features / select / train / map / report / synth
//
// Every command is deterministic given the config (seeds included) and the
// inputs, and stamps its output directory with the resolved config plus a
// content hash of every input file it read.
// ---------------------------------------------------------------------------

struct CommandResult {
    int exit_code = 0;  // 0 ok, 2 config, 3 data/contract, 4 partial
    std::vector<std::string> messages;

    void note(const std::string& msg) { messages.push_back(msg); }
};

namespace detail {

namespace fs = std::filesystem;

inline std::uint64_t hash_tree(const fs::path& p, std::uint64_t h) {
    if (!fs::exists(p)) return h;
    if (fs::is_regular_file(p)) {
        auto bytes = fsutil::read_bytes(p);
        std::string name = p.filename().string();
        h = fnv1a64(name.data(), name.size(), h);
        return fnv1a64(bytes.data(), bytes.size(), h);
    }
    std::vector<fs::path> children;
    for (const auto& e : fs::directory_iterator(p)) children.push_back(e.path());
    std::sort(children.begin(), children.end());
    for (const auto& c : children) h = hash_tree(c, h);
    return h;
}

inline std::uint64_t hash_inputs(const PipelineConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& y : cfg.years)
        for (const auto& path : {y.optical_cube, y.sar_cube, y.embeddings, y.labels})
            if (!path.empty()) h = hash_tree(path, h);
    if (!cfg.core_mask_dir.empty()) h = hash_tree(cfg.core_mask_dir, h);
    return h;
}

inline void stamp_provenance(const PipelineConfig& cfg, const fs::path& out_dir,
                             const std::string& command) {
    fs::create_directories(out_dir);
    json stamped = cfg.raw;
    stamped["resolved_command"] = command;
    stamped["resolved_output_dir"] = cfg.output_dir;
    fsutil::write_text(out_dir / "run_config.json", stamped.dump(2) + "\n");
    fsutil::write_text(out_dir / "inputs.hash", "fnv1a64:" + to_hex(hash_inputs(cfg)) + "\n");
}

inline LabelSet load_labels(const PipelineConfig& cfg, const YearInputs& in) {
    if (in.labels.empty())
        throw ConfigError("year " + std::to_string(in.year) + ": no labels path configured");
    LabelSet labels = read_label_set(in.labels);
    if (!cfg.class_merge.empty()) labels = merge_classes(labels, cfg.class_merge);
    labels.task = cfg.task;
    return labels;
}

inline FeatureRaster build_features(const PipelineConfig& cfg, const YearInputs& in,
                                    std::vector<std::string>* warnings, unsigned threads = 0) {
    switch (cfg.input) {
        case FeatureSource::embedding: {
            if (in.embeddings.empty())
                throw ConfigError("year " + std::to_string(in.year) +
                                  ": embedding input needs an embeddings path");
            FeatureRaster fr = read_feature_raster(in.embeddings);
            std::size_t expect = cfg.embedding_dim == 0 ? fr.n_features() : cfg.embedding_dim;
            return ingest_embeddings(in.embeddings, expect);
        }
        case FeatureSource::stm: {
            if (in.optical_cube.empty() || in.sar_cube.empty())
                throw ConfigError("year " + std::to_string(in.year) +
                                  ": stm input needs optical_cube and sar_cube paths");
            TimeSeriesCube optical = read_cube(in.optical_cube);
            TimeSeriesCube sar = read_cube(in.sar_cube);
            StmOptions opt;
            opt.windows = cfg.windows;
            opt.stats = cfg.stats;
            opt.index_specs = cfg.indices;
            opt.tasseled_cap = cfg.tasseled_cap;
            opt.feature_count_target = cfg.stm_feature_target;
            return build_stm_features(optical, sar, opt, warnings, threads);
        }
        case FeatureSource::raw: {
            if (in.optical_cube.empty() || in.sar_cube.empty())
                throw ConfigError("year " + std::to_string(in.year) +
                                  ": raw input needs optical_cube and sar_cube paths");
            TimeSeriesCube optical = read_cube(in.optical_cube);
            TimeSeriesCube sar = read_cube(in.sar_cube);
            return build_raw_features(optical, sar, cfg.indices, warnings, threads);
        }
    }
    throw ConfigError("unknown input kind");
}

inline fs::path features_dir(const PipelineConfig& cfg, int year) {
    return fs::path(cfg.output_dir) / "features" / to_string(cfg.input) / std::to_string(year);
}

// Uses the features stage's output when present, otherwise builds in memory.
inline FeatureRaster load_or_build_features(const PipelineConfig& cfg, const YearInputs& in,
                                            std::vector<std::string>* warnings) {
    fs::path dir = features_dir(cfg, in.year);
    if (fs::exists(dir / "features.json")) return read_feature_raster(dir);
    return build_features(cfg, in, warnings);
}

inline TrainConfig resolve_train_config(const PipelineConfig& cfg, const LabelSet& labels) {
    TrainConfig tc = cfg.hyper;
    if (cfg.inverse_frequency_weights) tc.class_weights = class_weights_inverse_frequency(labels);
    return tc;
}

inline std::pair<LearnerKind, LearnerKind> require_heads(const PipelineConfig& cfg) {
    if (!cfg.heads)
        throw ConfigError("config must set \"heads\" (run the select command to choose them)");
    return *cfg.heads;
}

// Croptype runs train only on labeled pixels inside the core mask.
inline LabelSet restrict_to_mask(const LabelSet& labels, const CoreCroplandMask& mask) {
    LabelSet out = labels;
    out.entries.clear();
    for (const auto& e : labels.entries) {
        LabelEntry kept = e;
        kept.pixels.clear();
        for (const auto& px : e.pixels)
            if (mask.mask[px.first * mask.width + px.second]) kept.pixels.push_back(px);
        if (!kept.pixels.empty()) out.entries.push_back(std::move(kept));
    }
    return out;
}

inline CoreCroplandMask load_core_mask(const std::string& dir) {
    ClassMap cm = read_class_map(dir);
    CoreCroplandMask mask;
    mask.width = cm.width;
    mask.height = cm.height;
    mask.mask.reserve(cm.class_ids.size());
    for (auto v : cm.class_ids) mask.mask.push_back(v == 1 ? 1 : 0);
    mask.percent_of_area =
        100.0 * static_cast<double>(mask.true_count()) / static_cast<double>(mask.mask.size());
    return mask;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// features
// ---------------------------------------------------------------------------

inline CommandResult cmd_features(const PipelineConfig& cfg) {
    CommandResult res;
    if (cfg.years.empty()) throw ConfigError("no years configured");
    for (const auto& in : cfg.years) {
        std::vector<std::string> warnings;
        FeatureRaster fr = detail::build_features(cfg, in, &warnings);
        auto dir = detail::features_dir(cfg, in.year);
        write_feature_raster(fr, dir);
        res.note("year " + std::to_string(in.year) + ": " + std::to_string(fr.n_features()) +
                 " features -> " + dir.string());
        for (const auto& w : warnings) res.note("warning: " + w);
    }
    detail::stamp_provenance(cfg, std::filesystem::path(cfg.output_dir) / "features", "features");
    return res;
}

// ---------------------------------------------------------------------------
// select
// ---------------------------------------------------------------------------

inline CommandResult cmd_select(const PipelineConfig& cfg) {
    CommandResult res;
    if (cfg.years.empty()) throw ConfigError("no years configured");
    const YearInputs& in = cfg.years.front();
    LabelSet labels = detail::load_labels(cfg, in);
    FeatureRaster fr = detail::load_or_build_features(cfg, in, nullptr);

    SelectionOptions opt;
    opt.learners = cfg.learners;
    opt.runs = cfg.selection_runs;
    opt.seed0 = cfg.seed;
    opt.split = cfg.split;
    opt.base = detail::resolve_train_config(cfg, labels);
    SelectionReport report = select_heads(fr, labels, opt);

    auto dir = std::filesystem::path(cfg.output_dir) / "select";
    std::filesystem::create_directories(dir);
    fsutil::write_text(dir / "selection.csv", selection_report_csv(report, to_string(cfg.input)));
    fsutil::write_text(dir / "selection.json", selection_report_json(report).dump(2) + "\n");
    detail::stamp_provenance(cfg, dir, "select");
    res.note("chosen heads: " + to_string(report.chosen.first) + " + " +
             to_string(report.chosen.second));
    for (const auto& d : report.diagnostics) res.note("diagnostic: " + d);
    if (!report.diagnostics.empty()) res.exit_code = 4;
    return res;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

namespace detail {

// Full-map protocol: 90/10 train/validation on everything labeled, one
// ensemble per map run.
inline std::vector<EnsembleModel> train_map_ensembles(const PipelineConfig& cfg,
                                                      const FeatureRaster& fr,
                                                      const LabelSet& labels,
                                                      std::uint64_t year_salt) {
    auto heads = require_heads(cfg);
    TrainConfig base = resolve_train_config(cfg, labels);
    std::vector<EnsembleModel> models;
    for (std::size_t run = 0; run < cfg.map_runs; ++run) {
        SplitSpec split;
        split.train = 0.9;
        split.val = 0.1;
        split.test = 0.0;
        split.seed = derive_seed(cfg.seed, year_salt * 1000 + run);
        SplitResult sr = split_polygons(labels, split);
        PixelDataset train_ds = extract_dataset(fr, sr.train);
        PixelDataset val_ds = extract_dataset(fr, sr.val);
        models.push_back(train_ensemble(train_ds, val_ds, labels.class_table, heads, base,
                                        derive_seed(cfg.seed, year_salt * 1000 + 500 + run)));
    }
    return models;
}

inline fs::path models_dir(const PipelineConfig& cfg, int year) {
    return fs::path(cfg.output_dir) / "models" / std::to_string(year);
}

}  // namespace detail

inline CommandResult cmd_train(const PipelineConfig& cfg) {
    CommandResult res;
    if (cfg.years.empty()) throw ConfigError("no years configured");
    for (const auto& in : cfg.years) {
        LabelSet labels = detail::load_labels(cfg, in);
        FeatureRaster fr = detail::load_or_build_features(cfg, in, nullptr);
        if (cfg.task == Task::croptype) {
            if (cfg.core_mask_dir.empty())
                throw ConfigError("croptype training needs a core_mask directory");
            labels = detail::restrict_to_mask(labels, detail::load_core_mask(cfg.core_mask_dir));
        }
        auto models = detail::train_map_ensembles(cfg, fr, labels,
                                                  static_cast<std::uint64_t>(in.year));
        auto dir = detail::models_dir(cfg, in.year);
        std::filesystem::create_directories(dir);
        for (std::size_t run = 0; run < models.size(); ++run) {
            save_model(models[run].first, dir / ("run" + std::to_string(run) + "_a.model"));
            save_model(models[run].second, dir / ("run" + std::to_string(run) + "_b.model"));
        }
        res.note("year " + std::to_string(in.year) + ": " + std::to_string(models.size()) +
                 " ensemble runs -> " + dir.string());
    }
    detail::stamp_provenance(cfg, std::filesystem::path(cfg.output_dir) / "models", "train");
    return res;
}

// ---------------------------------------------------------------------------
// map
// ---------------------------------------------------------------------------

inline CommandResult cmd_map(const PipelineConfig& cfg) {
    CommandResult res;
    if (cfg.years.empty()) throw ConfigError("no years configured");

    CoreCroplandMask mask;
    bool have_mask = false;
    if (cfg.task == Task::croptype) {
        if (cfg.core_mask_dir.empty())
            throw ConfigError("croptype mapping needs a core_mask directory");
        mask = detail::load_core_mask(cfg.core_mask_dir);
        have_mask = true;
    }

    for (const auto& in : cfg.years) {
        LabelSet labels = detail::load_labels(cfg, in);
        FeatureRaster fr = detail::load_or_build_features(cfg, in, nullptr);
        LabelSet train_labels = labels;
        if (have_mask) {
            if (mask.width != fr.width || mask.height != fr.height)
                throw ContractError("core mask grid does not match the feature raster");
            train_labels = detail::restrict_to_mask(labels, mask);
        }

        // load saved ensembles when the train stage ran; otherwise train here
        std::vector<EnsembleModel> models;
        auto mdir = detail::models_dir(cfg, in.year);
        if (std::filesystem::exists(mdir / "run0_a.model")) {
            for (std::size_t run = 0; run < cfg.map_runs; ++run) {
                EnsembleModel em;
                em.first = load_model(mdir / ("run" + std::to_string(run) + "_a.model"));
                em.second = load_model(mdir / ("run" + std::to_string(run) + "_b.model"));
                em.class_table = labels.class_table;
                em.validate();
                models.push_back(std::move(em));
            }
            res.note("year " + std::to_string(in.year) + ": loaded " +
                     std::to_string(models.size()) + " saved ensembles");
        } else {
            models = detail::train_map_ensembles(cfg, fr, train_labels,
                                                 static_cast<std::uint64_t>(in.year));
        }

        std::vector<ClassProbabilityMap> prob_maps;
        for (const auto& em : models) prob_maps.push_back(predict_ensemble(em, fr));
        ClassProbabilityMap mean_pm = mean_probability_map(prob_maps);
        std::size_t ties = 0;
        ClassMap map = mean_pm.argmax(&ties);
        map.year = in.year;
        if (have_mask) map = apply_crop_mask(mean_pm, mask);

        auto dir = std::filesystem::path(cfg.output_dir) / "maps" / std::to_string(in.year);
        write_class_map(map, dir / "classmap");
        write_prob_map(mean_pm, dir / "probmap");
        res.note("year " + std::to_string(in.year) + ": map written (" +
                 std::to_string(ties) + " argmax ties)");
    }
    detail::stamp_provenance(cfg, std::filesystem::path(cfg.output_dir) / "maps", "map");
    return res;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

inline CommandResult cmd_report(const PipelineConfig& cfg) {
    CommandResult res;
    if (cfg.years.empty()) throw ConfigError("no years configured");
    auto dir = std::filesystem::path(cfg.output_dir) / "report";
    std::filesystem::create_directories(dir);
    bool any_failed_runs = false;

    // per-year ensemble evaluation
    {
        std::string csv = evaluation_rows_csv_header();
        json all = json::array();
        for (const auto& in : cfg.years) {
            LabelSet labels = detail::load_labels(cfg, in);
            FeatureRaster fr = detail::load_or_build_features(cfg, in, nullptr);
            EvalRunOptions opt;
            opt.heads = detail::require_heads(cfg);
            opt.base = detail::resolve_train_config(cfg, labels);
            opt.split = cfg.split;
            opt.n_runs = cfg.eval_runs;
            opt.seed0 = derive_seed(cfg.seed, static_cast<std::uint64_t>(in.year));
            EvaluationReport rep = evaluate_multi_run(fr, labels, opt);
            rep.metadata["normalized_inputs"] = "LR,MLP";
            rep.metadata["focal_loss"] = "LR,MLP";
            csv += evaluation_row_csv(rep);
            all.push_back(evaluation_report_json(rep));
            if (rep.completed < rep.runs.size()) any_failed_runs = true;
        }
        fsutil::write_text(dir / "evaluation.csv", csv);
        fsutil::write_text(dir / "evaluation.json", all.dump(2) + "\n");
        res.note("evaluation tables written");
    }

    // cross-year transfer
    if (cfg.transfer) {
        std::string csv = transfer_rows_csv_header();
        json all = json::array();
        const auto& t = *cfg.transfer;
        const YearInputs& train_in = cfg.inputs_for(t.train_year);
        LabelSet train_labels = detail::load_labels(cfg, train_in);
        FeatureRaster train_fr = detail::load_or_build_features(cfg, train_in, nullptr);
        for (int py : t.predict_years) {
            const YearInputs& pred_in = cfg.inputs_for(py);
            LabelSet pred_labels = detail::load_labels(cfg, pred_in);
            FeatureRaster pred_fr = detail::load_or_build_features(cfg, pred_in, nullptr);
            TransferOptions opt;
            opt.heads = detail::require_heads(cfg);
            opt.base = detail::resolve_train_config(cfg, train_labels);
            opt.train_fraction = t.train_fraction;
            opt.n_runs = t.runs;
            opt.seed0 = derive_seed(cfg.seed, 0x7472u + static_cast<std::uint64_t>(py));
            EvaluationReport rep =
                transfer_evaluate(train_fr, train_labels, pred_fr, pred_labels, opt);
            csv += transfer_row_csv(rep);
            all.push_back(evaluation_report_json(rep));
            if (rep.completed < rep.runs.size()) any_failed_runs = true;
        }
        fsutil::write_text(dir / "transfer.csv", csv);
        fsutil::write_text(dir / "transfer.json", all.dump(2) + "\n");
        res.note("transfer tables written");
    }

    // cropland change + core cropland from the map stage's class maps
    if (cfg.cropland_class) {
        std::vector<ClassMap> maps;
        std::vector<int> years;
        for (const auto& in : cfg.years) {
            auto mdir = std::filesystem::path(cfg.output_dir) / "maps" / std::to_string(in.year) /
                        "classmap";
            if (std::filesystem::exists(mdir / "classmap.bin")) {
                maps.push_back(read_class_map(mdir));
                years.push_back(in.year);
            }
        }
        if (maps.size() >= 2) {
            std::string csv = change_rows_csv_header();
            std::string dataset = to_string(cfg.input);
            for (std::size_t a = 0; a < maps.size(); ++a)
                for (std::size_t b = a + 1; b < maps.size(); ++b)
                    csv += change_row_csv(dataset,
                                          cropland_change(maps[a], maps[b], *cfg.cropland_class));
            fsutil::write_text(dir / "change.csv", csv);
            CoreCroplandMask core = core_cropland(maps, *cfg.cropland_class);
            fsutil::write_text(dir / "core_cropland.csv", core_cropland_csv(dataset, core));
            write_class_map(mask_to_class_map(core), dir / "core_mask");
            res.note("change and core-cropland tables written (" + std::to_string(maps.size()) +
                     " years)");
        } else {
            res.note("change accounting skipped: fewer than 2 class maps under " +
                     (std::filesystem::path(cfg.output_dir) / "maps").string());
        }
    }

    // relative CPU comparison across input kinds
    if (cfg.cpu_inputs.size() >= 2) {
        const YearInputs& in = cfg.years.front();
        LabelSet labels = detail::load_labels(cfg, in);
        auto heads = detail::require_heads(cfg);
        std::vector<std::pair<std::string, std::function<void()>>> workloads;
        for (const auto& kind_name : cfg.cpu_inputs) {
            PipelineConfig variant = cfg;
            variant.input = feature_source_from_string(kind_name);
            workloads.emplace_back(kind_name, [variant, in, labels, heads]() {
                FeatureRaster fr = detail::build_features(variant, in, nullptr);
                TrainConfig base = detail::resolve_train_config(variant, labels);
                SplitSpec split;
                split.train = 0.9;
                split.val = 0.1;
                split.test = 0.0;
                split.seed = variant.seed;
                SplitResult sr = split_polygons(labels, split);
                PixelDataset train_ds = extract_dataset(fr, sr.train);
                PixelDataset val_ds = extract_dataset(fr, sr.val);
                EnsembleModel em = train_ensemble(train_ds, val_ds, labels.class_table, heads,
                                                  base, variant.seed);
                predict_ensemble_matrix(em, val_ds.X);
            });
        }
        std::string baseline = cfg.cpu_baseline.empty() ? cfg.cpu_inputs.front() : cfg.cpu_baseline;
        CpuTable table = measure_cpu(workloads, cfg.cpu_runs, baseline);
        fsutil::write_text(dir / "cpu.csv", cpu_table_csv(table));
        fsutil::write_text(dir / "cpu.json", cpu_table_json(table).dump(2) + "\n");
        res.note("relative CPU table written (baseline " + baseline + ")");
    }

    detail::stamp_provenance(cfg, dir, "report");
    if (any_failed_runs) {
        res.exit_code = 4;
        res.note("some evaluation runs failed; aggregates cover completed runs only");
    }
    return res;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

inline CommandResult cmd_synth(const PipelineConfig& cfg) {
    CommandResult res;
    if (!cfg.synth) throw ConfigError("synth command needs a \"synth\" section");
    SyntheticScene scene = generate_scene(*cfg.synth);
    auto base = std::filesystem::path(cfg.output_dir) / "synth";
    for (const auto& yr : scene.years) {
        auto dir = base / std::to_string(yr.truth.year);
        write_cube(yr.optical, dir / "optical");
        write_cube(yr.sar, dir / "sar");
        write_feature_raster(yr.embeddings, dir / "embeddings");
        write_label_set(yr.labels, dir / "labels");
        write_class_map(yr.truth, dir / "truth");
        res.note("year " + std::to_string(yr.truth.year) + " -> " + dir.string());
    }
    for (const auto& w : scene.warnings) res.note("warning: " + w);
    detail::stamp_provenance(cfg, base, "synth");
    return res;
}

}  // namespace cropmap
