#pragma once

#include "cropmap/learners/core.hpp"

#include "cropmap/learners/gbt.hpp"
#include "cropmap/learners/lr.hpp"
#include "cropmap/learners/mlp.hpp"
#include "cropmap/learners/rf.hpp"

namespace cropmap {

// ---------------------------------------------------------------------------
// Training entry point and model serialization
// ---------------------------------------------------------------------------

// Deterministic in (data, config, seed). The optional validation set feeds
// MLP early stopping; other learners ignore it.
inline TrainedModel train(const Matrix& X, const std::vector<std::int32_t>& labels,
                          const TrainConfig& cfg, const Matrix* X_val = nullptr,
                          const std::vector<std::int32_t>* y_val = nullptr) {
    cfg.validate();
    if (X.rows() != labels.size()) throw ContractError("train: feature/label row mismatch");
    if (X.cols() == 0) throw ContractError("train: feature dimension must be > 0");
    detail::check_finite(X);
    auto indexed = detail::index_labels(labels);
    if (indexed.classes.size() < 2) throw ContractError("train: need at least 2 classes present");
    auto weights = detail::resolve_weights(cfg, indexed.classes);

    std::vector<int> yv_idx;
    const std::vector<int>* val_labels = nullptr;
    if (X_val && y_val) {
        detail::check_finite(*X_val);
        std::map<std::int32_t, int> to_index;
        for (std::size_t i = 0; i < indexed.classes.size(); ++i)
            to_index[indexed.classes[i]] = static_cast<int>(i);
        yv_idx.reserve(y_val->size());
        for (auto l : *y_val) {
            auto it = to_index.find(l);
            if (it == to_index.end())
                throw DataError("validation label " + std::to_string(l) + " absent from train set");
            yv_idx.push_back(it->second);
        }
        val_labels = &yv_idx;
    }

    TrainedModel tm;
    tm.kind = cfg.learner;
    tm.classes = indexed.classes;
    tm.feature_dim = X.cols();
    tm.seed = cfg.seed;
    switch (cfg.learner) {
        case LearnerKind::LR:
            tm.impl = train_logistic_regression(X, indexed.y, indexed.classes.size(), weights, cfg);
            break;
        case LearnerKind::MLP:
            tm.impl = train_mlp(X, indexed.y, indexed.classes.size(), weights, cfg,
                                X_val && val_labels ? X_val : nullptr, val_labels);
            break;
        case LearnerKind::RF:
            tm.impl = train_random_forest(X, indexed.y, indexed.classes.size(), weights, cfg);
            break;
        case LearnerKind::GBT:
            tm.impl = train_gbt(X, indexed.y, indexed.classes.size(), weights, cfg);
            break;
    }
    return tm;
}

constexpr char kModelMagic[8] = {'C', 'M', 'A', 'P', 'M', 'D', 'L', '\x01'};

inline std::vector<std::uint8_t> serialize_model(const TrainedModel& tm) {
    json header;
    header["kind"] = to_string(tm.kind);
    header["version"] = 1;
    header["classes"] = tm.classes;
    header["feature_dim"] = tm.feature_dim;
    header["seed"] = tm.seed;
    header["normalization_ref"] = tm.normalization_ref;
    if (tm.normalization && tm.normalization->method != NormMethod::none)
        header["normalization"] = normalization_to_json(*tm.normalization);
    std::string h = header.dump();

    detail::BinaryWriter w;
    w.raw(kModelMagic, 8);
    w.u32(static_cast<std::uint32_t>(h.size()));
    w.raw(h.data(), h.size());
    tm.impl->save(w);
    return w.buffer();
}

inline TrainedModel deserialize_model(const std::vector<std::uint8_t>& buf) {
    if (buf.size() < 12 || std::memcmp(buf.data(), kModelMagic, 8) != 0)
        throw FormatError("not a model container (bad magic)");
    detail::BinaryReader r(buf);
    r.seek(8);
    std::uint32_t hlen = r.u32();
    if (12 + static_cast<std::size_t>(hlen) > buf.size())
        throw FormatError("model header truncated");
    json header = json::parse(std::string(buf.begin() + 12, buf.begin() + 12 + hlen), nullptr, false);
    if (header.is_discarded()) throw FormatError("garbled model header");
    r.seek(12 + hlen);

    TrainedModel tm;
    tm.kind = learner_from_string(header.at("kind").get<std::string>());
    tm.classes = header.at("classes").get<std::vector<std::int32_t>>();
    tm.feature_dim = header.at("feature_dim").get<std::size_t>();
    tm.seed = header.at("seed").get<std::uint64_t>();
    tm.normalization_ref = header.value("normalization_ref", std::string());
    if (header.contains("normalization"))
        tm.normalization = std::make_shared<NormalizationRecord>(
            normalization_from_json(header.at("normalization")));
    switch (tm.kind) {
        case LearnerKind::LR: tm.impl = LogisticRegressionModel::load(r); break;
        case LearnerKind::MLP: tm.impl = MlpModel::load(r); break;
        case LearnerKind::RF: tm.impl = RandomForestModel::load(r); break;
        case LearnerKind::GBT: tm.impl = GbtModel::load(r); break;
    }
    return tm;
}

inline void save_model(const TrainedModel& tm, const std::filesystem::path& path) {
    auto buf = serialize_model(tm);
    fsutil::write_bytes(path, buf.data(), buf.size());
}

inline TrainedModel load_model(const std::filesystem::path& path) {
    return deserialize_model(fsutil::read_bytes(path));
}

}  // namespace cropmap
