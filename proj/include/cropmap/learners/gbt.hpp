#pragma once

#include <array>

#include "cropmap/learners/core.hpp"

namespace cropmap {

// ---------------------------------------------------------------------------
// Gradient-boosted trees: softmax multiclass objective with class-weighted
// gradient/hessian statistics, one depth-limited regression tree per class
// per round, histogram split finding over quantile bins, Newton leaf values
// -G/(H + l2) scaled by the learning rate.
// ---------------------------------------------------------------------------

class GbtModel : public Model {
 public:
    struct Node {
        std::int32_t feature = -1;  // -1 = leaf
        double threshold = 0.0;
        std::uint32_t left = 0;
        std::uint32_t right = 0;
        double value = 0.0;         // leaf: additive score contribution
    };
    struct Tree {
        std::vector<Node> nodes;

        double predict(const double* x) const {
            std::uint32_t at = 0;
            while (nodes[at].feature >= 0)
                at = x[nodes[at].feature] <= nodes[at].threshold ? nodes[at].left : nodes[at].right;
            return nodes[at].value;
        }
    };

    GbtModel(std::size_t n_classes, std::vector<Tree> trees)
        : k_(n_classes), trees_(std::move(trees)) {}

    LearnerKind kind() const override { return LearnerKind::GBT; }

    // trees are stored round-major: round r, class k at index r*k_ + k
    Matrix predict_proba_indexed(const Matrix& X) const override {
        Matrix out(X.rows(), k_, 0.0);
        parallel_for(X.rows(), [&](std::size_t i) {
            const double* x = X.row(i);
            std::vector<double> score(k_, 0.0);
            for (std::size_t t = 0; t < trees_.size(); ++t) score[t % k_] += trees_[t].predict(x);
            softmax_inplace(score);
            std::copy(score.begin(), score.end(), out.row(i));
        });
        return out;
    }

    void save(detail::BinaryWriter& w) const override {
        w.u64(k_);
        w.u64(trees_.size());
        for (const auto& tree : trees_) {
            w.u64(tree.nodes.size());
            for (const auto& n : tree.nodes) {
                w.i32(n.feature);
                w.f64(n.threshold);
                w.u32(n.left);
                w.u32(n.right);
                w.f64(n.value);
            }
        }
    }

    static std::shared_ptr<Model> load(detail::BinaryReader& r) {
        std::size_t k = r.u64();
        std::vector<Tree> trees(r.u64());
        for (auto& tree : trees) {
            tree.nodes.resize(r.u64());
            for (auto& n : tree.nodes) {
                n.feature = r.i32();
                n.threshold = r.f64();
                n.left = r.u32();
                n.right = r.u32();
                n.value = r.f64();
            }
        }
        return std::make_shared<GbtModel>(k, std::move(trees));
    }

    const std::vector<Tree>& trees() const { return trees_; }

 private:
    std::size_t k_;
    std::vector<Tree> trees_;
};

namespace detail {

// Quantile binning: per feature, up to `max_bins` edges; bin b holds values
// <= edges[b], the last bin is open-ended.
struct FeatureBins {
    std::vector<std::vector<double>> edges;   // per feature, ascending upper edges
    std::vector<std::uint16_t> bin_of;        // (sample, feature) row-major
    std::size_t n_features = 0;

    std::uint16_t bins_in(std::size_t f) const {
        return static_cast<std::uint16_t>(edges[f].size() + 1);
    }
};

inline FeatureBins build_bins(const Matrix& X, std::size_t max_bins) {
    FeatureBins fb;
    fb.n_features = X.cols();
    fb.edges.resize(X.cols());
    fb.bin_of.resize(X.rows() * X.cols());
    parallel_for(X.cols(), [&](std::size_t f) {
        std::vector<double> vals(X.rows());
        for (std::size_t i = 0; i < X.rows(); ++i) vals[i] = X(i, f);
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        auto& e = fb.edges[f];
        if (vals.size() > max_bins) {
            e.reserve(max_bins - 1);
            for (std::size_t b = 1; b < max_bins; ++b) {
                std::size_t at = b * vals.size() / max_bins;
                double edge = 0.5 * (vals[at - 1] + vals[at]);
                if (e.empty() || edge > e.back()) e.push_back(edge);
            }
        } else {
            e.reserve(vals.size() > 0 ? vals.size() - 1 : 0);
            for (std::size_t v = 0; v + 1 < vals.size(); ++v)
                e.push_back(0.5 * (vals[v] + vals[v + 1]));
        }
        for (std::size_t i = 0; i < X.rows(); ++i) {
            double x = X(i, f);
            auto it = std::lower_bound(e.begin(), e.end(), x);
            fb.bin_of[i * X.cols() + f] = static_cast<std::uint16_t>(it - e.begin());
        }
    });
    return fb;
}

struct GbtSplit {
    double gain = 0.0;
    std::int32_t feature = -1;
    std::uint16_t bin = 0;
    double threshold = 0.0;
};

// One round's tree for one class, grown level-wise to `depth` on (g, h).
inline GbtModel::Tree grow_gbt_tree(const FeatureBins& fb, const std::vector<double>& g,
                                    const std::vector<double>& h, const TrainConfig& cfg) {
    unsigned threads = cfg.n_threads == 0 ? hardware_threads() : cfg.n_threads;
    std::size_t n = g.size();
    std::size_t F = fb.n_features;
    double l2 = cfg.gbt_l2;

    GbtModel::Tree tree;
    auto leaf_value = [&](double G, double H) { return -G / (H + l2) * cfg.gbt_learning_rate; };
    auto score = [&](double G, double H) { return G * G / (H + l2); };

    tree.nodes.push_back({});
    std::vector<std::uint32_t> node_of(n, 0);
    std::vector<std::uint32_t> active = {0};
    std::vector<double> node_g = {0.0}, node_h = {0.0};
    for (std::size_t i = 0; i < n; ++i) {
        node_g[0] += g[i];
        node_h[0] += h[i];
    }
    tree.nodes[0].value = leaf_value(node_g[0], node_h[0]);

    for (std::size_t level = 0; level < cfg.gbt_depth && !active.empty(); ++level) {
        // per (active node, feature, bin) gradient histograms
        std::vector<std::int32_t> slot_of(tree.nodes.size(), -1);
        for (std::size_t s = 0; s < active.size(); ++s) slot_of[active[s]] = static_cast<std::int32_t>(s);
        std::size_t n_slots = active.size();

        std::vector<std::vector<double>> hist_g(F), hist_h(F);
        parallel_for(F, threads, [&](std::size_t f) {
            std::uint16_t nb = fb.bins_in(f);
            hist_g[f].assign(n_slots * nb, 0.0);
            hist_h[f].assign(n_slots * nb, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                std::int32_t s = slot_of[node_of[i]];
                if (s < 0) continue;
                std::uint16_t b = fb.bin_of[i * F + f];
                hist_g[f][static_cast<std::size_t>(s) * nb + b] += g[i];
                hist_h[f][static_cast<std::size_t>(s) * nb + b] += h[i];
            }
        });

        // best split per active node, features scanned in parallel with a
        // deterministic sequential reduce
        std::vector<std::vector<GbtSplit>> per_feature(F);
        parallel_for(F, threads, [&](std::size_t f) {
            per_feature[f].assign(n_slots, {});
            std::uint16_t nb = fb.bins_in(f);
            for (std::size_t s = 0; s < n_slots; ++s) {
                double G = node_g[active[s]], H = node_h[active[s]];
                double parent = score(G, H);
                double GL = 0.0, HL = 0.0;
                GbtSplit best;
                for (std::uint16_t b = 0; b + 1 < nb; ++b) {
                    GL += hist_g[f][s * nb + b];
                    HL += hist_h[f][s * nb + b];
                    double GR = G - GL, HR = H - HL;
                    if (HL < cfg.gbt_min_child_hessian || HR < cfg.gbt_min_child_hessian) continue;
                    double gain = score(GL, HL) + score(GR, HR) - parent;
                    if (gain > best.gain) {
                        best.gain = gain;
                        best.feature = static_cast<std::int32_t>(f);
                        best.bin = b;
                        best.threshold = fb.edges[f][b];
                    }
                }
                per_feature[f][s] = best;
            }
        });

        std::vector<GbtSplit> chosen(n_slots);
        for (std::size_t f = 0; f < F; ++f)
            for (std::size_t s = 0; s < n_slots; ++s)
                if (per_feature[f][s].gain > chosen[s].gain) chosen[s] = per_feature[f][s];

        // materialize splits
        std::vector<std::uint32_t> next_active;
        std::vector<std::array<std::uint32_t, 2>> children(n_slots, {0, 0});
        for (std::size_t s = 0; s < n_slots; ++s) {
            if (chosen[s].feature < 0 || chosen[s].gain <= 1e-12) continue;
            std::uint32_t id = active[s];
            std::uint32_t lid = static_cast<std::uint32_t>(tree.nodes.size());
            tree.nodes.push_back({});
            std::uint32_t rid = static_cast<std::uint32_t>(tree.nodes.size());
            tree.nodes.push_back({});
            tree.nodes[id].feature = chosen[s].feature;
            tree.nodes[id].threshold = chosen[s].threshold;
            tree.nodes[id].left = lid;
            tree.nodes[id].right = rid;
            children[s] = {lid, rid};
            next_active.push_back(lid);
            next_active.push_back(rid);
        }
        if (next_active.empty()) break;

        node_g.assign(tree.nodes.size(), 0.0);
        node_h.assign(tree.nodes.size(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (node_of[i] >= slot_of.size()) continue;
            std::int32_t s_raw = slot_of[node_of[i]];
            if (s_raw < 0) continue;
            std::size_t s = static_cast<std::size_t>(s_raw);
            if (children[s][0] == 0) continue;  // node stayed a leaf
            const auto& parent = tree.nodes[active[s]];
            std::uint16_t b = fb.bin_of[i * F + static_cast<std::size_t>(parent.feature)];
            node_of[i] = b <= chosen[s].bin ? children[s][0] : children[s][1];
            node_g[node_of[i]] += g[i];
            node_h[node_of[i]] += h[i];
        }
        for (std::uint32_t id : next_active)
            tree.nodes[id].value = leaf_value(node_g[id], node_h[id]);
        active = std::move(next_active);
    }
    return tree;
}

}  // namespace detail

inline std::shared_ptr<Model> train_gbt(const Matrix& X, const std::vector<int>& y,
                                        std::size_t n_classes, const detail::SampleWeights& sw,
                                        const TrainConfig& cfg) {
    std::size_t n = X.rows();
    std::size_t K = n_classes;
    unsigned threads = cfg.n_threads == 0 ? hardware_threads() : cfg.n_threads;
    auto fb = detail::build_bins(X, cfg.gbt_bins);

    std::vector<double> scores(n * K, 0.0);
    std::vector<double> g(n), h(n);
    std::vector<GbtModel::Tree> trees;
    trees.reserve(cfg.gbt_rounds * K);

    Matrix probs(n, K);
    for (std::size_t round = 0; round < cfg.gbt_rounds; ++round) {
        parallel_for(n, threads, [&](std::size_t i) {
            std::vector<double> z(scores.begin() + static_cast<std::ptrdiff_t>(i * K),
                                  scores.begin() + static_cast<std::ptrdiff_t>((i + 1) * K));
            softmax_inplace(z);
            std::copy(z.begin(), z.end(), probs.row(i));
        });
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t i = 0; i < n; ++i) {
                double w = sw.class_weight[y[i]];
                double pk = probs(i, k);
                double target = (static_cast<std::size_t>(y[i]) == k) ? 1.0 : 0.0;
                g[i] = w * (pk - target);
                h[i] = w * std::max(pk * (1.0 - pk), 1e-16);
            }
            trees.push_back(detail::grow_gbt_tree(fb, g, h, cfg));
            const auto& tree = trees.back();
            parallel_for(n, threads, [&](std::size_t i) {
                const double* row = X.row(i);
                scores[i * K + k] += tree.predict(row);
            });
        }
    }
    return std::make_shared<GbtModel>(K, std::move(trees));
}

}  // namespace cropmap
