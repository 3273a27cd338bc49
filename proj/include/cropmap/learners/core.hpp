#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "cropmap/common.hpp"
#include "cropmap/embeddings.hpp"
#include "cropmap/metrics.hpp"
#include "cropmap/rastercube.hpp"

namespace cropmap {

// ---------------------------------------------------------------------------
// Learner kinds and training configuration
// ---------------------------------------------------------------------------

enum class LearnerKind { LR = 0, MLP = 1, RF = 2, GBT = 3 };

inline std::string to_string(LearnerKind k) {
    switch (k) {
        case LearnerKind::LR: return "LR";
        case LearnerKind::MLP: return "MLP";
        case LearnerKind::RF: return "RF";
        case LearnerKind::GBT: return "GBT";
    }
    return "LR";
}

inline LearnerKind learner_from_string(const std::string& s) {
    if (s == "LR") return LearnerKind::LR;
    if (s == "MLP") return LearnerKind::MLP;
    if (s == "RF") return LearnerKind::RF;
    if (s == "GBT") return LearnerKind::GBT;
    throw ConfigError("unknown learner: " + s);
}

struct TrainConfig {
    LearnerKind learner = LearnerKind::LR;
    std::uint64_t seed = 1;
    std::map<std::int32_t, double> class_weights;  // empty = all 1
    double focal_gamma = 2.0;                      // LR/MLP only; trees use weights alone
    double focal_alpha = 1.0;
    std::map<std::int32_t, double> focal_alpha_per_class;  // overrides focal_alpha when set
    unsigned n_threads = 0;                        // 0 = hardware concurrency

    // LR
    double lr_l2_lambda = 1e-4;
    double lr_tolerance = 1e-8;
    std::size_t lr_max_iter = 500;

    // MLP
    std::size_t mlp_hidden = 128;     // two hidden layers of this width
    std::size_t mlp_batch = 256;
    double mlp_learning_rate = 1e-3;
    std::size_t mlp_max_epochs = 200;
    std::size_t mlp_patience = 10;
    double mlp_val_fraction = 0.1;    // used when no validation set is passed

    // RF
    std::size_t rf_trees = 200;
    std::size_t rf_mtry = 0;          // 0 = floor(sqrt(F))
    std::size_t rf_min_split = 2;

    // GBT
    std::size_t gbt_rounds = 200;
    std::size_t gbt_depth = 6;
    double gbt_learning_rate = 0.1;
    double gbt_l2 = 1.0;
    std::size_t gbt_bins = 256;
    double gbt_min_child_hessian = 1e-3;

    void validate() const {
        for (const auto& [cls, w] : class_weights) {
            (void)cls;
            if (!(w > 0.0)) throw ConfigError("class weights must be positive");
        }
        if (!std::isfinite(focal_gamma) || focal_gamma < 0.0)
            throw ConfigError("focal gamma must be finite and >= 0");
        if (!(focal_alpha > 0.0 && focal_alpha <= 1.0))
            throw ConfigError("focal alpha must lie in (0, 1]");
    }
};

// ---------------------------------------------------------------------------
// Class weighting and focal loss
// ---------------------------------------------------------------------------

// weight_c = N_total / (K * N_c); the pixel-mean of the weights is 1.
inline std::map<std::int32_t, double> class_weights_inverse_frequency(const LabelSet& labels) {
    auto counts = labels.pixel_counts();
    if (counts.empty()) throw ConfigError("label set has no pixels");
    std::size_t total = 0;
    for (const auto& [cls, n] : counts) {
        if (n == 0) throw ConfigError("class " + std::to_string(cls) + " has no pixels");
        total += n;
    }
    std::map<std::int32_t, double> weights;
    double k = static_cast<double>(counts.size());
    for (const auto& [cls, n] : counts)
        weights[cls] = static_cast<double>(total) / (k * static_cast<double>(n));
    return weights;
}

constexpr double kProbClamp = 1e-12;

// class_weight * alpha * (1 - p_t)^gamma * (-ln p_t); gamma = 0, alpha = 1
// reduces to weighted cross-entropy.
inline double focal_loss(const std::vector<double>& probs, std::size_t true_class, double gamma,
                         double alpha, double class_weight) {
    double p = probs[true_class];
    p = std::min(std::max(p, kProbClamp), 1.0 - kProbClamp);
    return class_weight * alpha * std::pow(1.0 - p, gamma) * (-std::log(p));
}

inline void softmax_inplace(std::vector<double>& z) {
    double zmax = z[0];
    for (double v : z) zmax = std::max(zmax, v);
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - zmax);
        sum += v;
    }
    for (double& v : z) v /= sum;
}

// Gradient of the focal loss w.r.t. softmax logits:
//   dL/dz_k = w a g'(p_t) p_t (1[k=t] - p_k),
//   g'(p) = gamma (1-p)^(gamma-1) ln p - (1-p)^gamma / p.
inline std::vector<double> focal_grad_logits(const std::vector<double>& logits,
                                             std::size_t true_class, double gamma, double alpha,
                                             double class_weight) {
    std::vector<double> p = logits;
    softmax_inplace(p);
    double pt = std::min(std::max(p[true_class], kProbClamp), 1.0 - kProbClamp);
    double one_m = 1.0 - pt;
    double gprime;
    if (gamma == 0.0) {
        gprime = -1.0 / pt;
    } else {
        gprime = gamma * std::pow(one_m, gamma - 1.0) * std::log(pt) - std::pow(one_m, gamma) / pt;
    }
    std::vector<double> grad(p.size());
    double scale = class_weight * alpha * gprime * pt;
    for (std::size_t k = 0; k < p.size(); ++k) {
        double indicator = (k == true_class) ? 1.0 : 0.0;
        grad[k] = scale * (indicator - p[k]);
    }
    return grad;
}

// ---------------------------------------------------------------------------
// Model interface
// ---------------------------------------------------------------------------

namespace detail {

class BinaryWriter {
 public:
    void u32(std::uint32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void i32(std::int32_t v) { raw(&v, 4); }
    void f64(double v) { raw(&v, 8); }
    void f64v(const std::vector<double>& v) {
        u64(v.size());
        raw(v.data(), v.size() * 8);
    }
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    const std::vector<std::uint8_t>& buffer() const { return buf_; }

 private:
    std::vector<std::uint8_t> buf_;
};

class BinaryReader {
 public:
    explicit BinaryReader(const std::vector<std::uint8_t>& buf) : buf_(buf) {}
    std::uint32_t u32() { return get<std::uint32_t>(); }
    std::uint64_t u64() { return get<std::uint64_t>(); }
    std::int32_t i32() { return get<std::int32_t>(); }
    double f64() { return get<double>(); }
    std::vector<double> f64v() {
        std::uint64_t n = u64();
        std::vector<double> v(n);
        need(n * 8);
        std::memcpy(v.data(), buf_.data() + pos_, n * 8);
        pos_ += n * 8;
        return v;
    }
    std::size_t position() const { return pos_; }
    void seek(std::size_t pos) { pos_ = pos; }

 private:
    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, buf_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    void need(std::size_t n) const {
        if (pos_ + n > buf_.size()) throw FormatError("model payload truncated");
    }
    const std::vector<std::uint8_t>& buf_;
    std::size_t pos_ = 0;
};

}  // namespace detail

class Model {
 public:
    virtual ~Model() = default;
    virtual LearnerKind kind() const = 0;
    // Probabilities over dense class indices; each row sums to 1.
    virtual Matrix predict_proba_indexed(const Matrix& X) const = 0;
    virtual void save(detail::BinaryWriter& w) const = 0;
};

// A trained classifier plus the bookkeeping the pipeline needs: class list,
// feature dimension, training seed and the input normalization it was
// trained behind (applied automatically at prediction; transfer years reuse
// it verbatim).
struct TrainedModel {
    LearnerKind kind = LearnerKind::LR;
    std::vector<std::int32_t> classes;  // ascending
    std::size_t feature_dim = 0;
    std::uint64_t seed = 0;
    std::string normalization_ref;
    std::shared_ptr<const NormalizationRecord> normalization;  // optional
    std::shared_ptr<const Model> impl;

    std::size_t n_classes() const { return classes.size(); }

    Matrix predict_proba(const Matrix& X) const {
        if (X.cols() != feature_dim)
            throw ContractError("predict_proba: model expects " + std::to_string(feature_dim) +
                                " features, got " + std::to_string(X.cols()));
        if (normalization && normalization->method != NormMethod::none) {
            Matrix Xn = X;
            normalization->apply_rows(Xn);
            return impl->predict_proba_indexed(Xn);
        }
        return impl->predict_proba_indexed(X);
    }

    std::vector<std::int32_t> predict(const Matrix& X) const {
        Matrix p = predict_proba(X);
        std::vector<std::int32_t> out(X.rows());
        for (std::size_t i = 0; i < X.rows(); ++i) {
            const double* row = p.row(i);
            std::size_t best = 0;
            for (std::size_t k = 1; k < classes.size(); ++k)
                if (row[k] > row[best]) best = k;
            out[i] = classes[best];
        }
        return out;
    }
};

namespace detail {

// Maps raw class-id labels to dense indices against an ascending class list.
struct IndexedLabels {
    std::vector<std::int32_t> classes;
    std::vector<int> y;
};

inline IndexedLabels index_labels(const std::vector<std::int32_t>& labels) {
    IndexedLabels out;
    std::set<std::int32_t> uniq(labels.begin(), labels.end());
    out.classes.assign(uniq.begin(), uniq.end());
    std::map<std::int32_t, int> to_index;
    for (std::size_t i = 0; i < out.classes.size(); ++i)
        to_index[out.classes[i]] = static_cast<int>(i);
    out.y.reserve(labels.size());
    for (auto l : labels) out.y.push_back(to_index[l]);
    return out;
}

inline void check_finite(const Matrix& X) {
    std::vector<std::size_t> bad;
    for (std::size_t i = 0; i < X.rows() && bad.size() < 8; ++i) {
        const double* row = X.row(i);
        for (std::size_t f = 0; f < X.cols(); ++f) {
            if (!std::isfinite(row[f])) {
                bad.push_back(i);
                break;
            }
        }
    }
    if (!bad.empty()) {
        std::string msg = "non-finite feature values at sample indices:";
        for (auto i : bad) msg += " " + std::to_string(i);
        throw DataError(msg);
    }
}

// Per-sample loss weights: class weight times alpha (per-class alpha wins).
struct SampleWeights {
    std::vector<double> class_weight;  // indexed by dense class
    std::vector<double> alpha;
};

inline SampleWeights resolve_weights(const TrainConfig& cfg,
                                     const std::vector<std::int32_t>& classes) {
    SampleWeights sw;
    sw.class_weight.reserve(classes.size());
    sw.alpha.reserve(classes.size());
    for (auto cls : classes) {
        auto it = cfg.class_weights.find(cls);
        sw.class_weight.push_back(it == cfg.class_weights.end() ? 1.0 : it->second);
        auto ia = cfg.focal_alpha_per_class.find(cls);
        sw.alpha.push_back(ia == cfg.focal_alpha_per_class.end() ? cfg.focal_alpha : ia->second);
    }
    return sw;
}

}  // namespace detail

}  // namespace cropmap
