#pragma once

#include "cropmap/learners/core.hpp"

namespace cropmap {

// ---------------------------------------------------------------------------
// Random forest: bagged CART trees on weighted Gini impurity, sqrt(F)
// features per split, no depth limit. Probability = fraction of tree votes.
// Trees train in parallel with per-tree seeds from derive_seed, so the
// forest is identical for any thread count.
// ---------------------------------------------------------------------------

class RandomForestModel : public Model {
 public:
    struct Node {
        std::int32_t feature = -1;  // -1 = leaf
        double threshold = 0.0;
        std::uint32_t left = 0;
        std::uint32_t right = 0;
        std::int32_t vote = 0;      // leaf: argmax of weighted class mass
    };
    struct Tree {
        std::vector<Node> nodes;

        std::int32_t predict(const double* x) const {
            std::uint32_t at = 0;
            while (nodes[at].feature >= 0)
                at = x[nodes[at].feature] <= nodes[at].threshold ? nodes[at].left : nodes[at].right;
            return nodes[at].vote;
        }
    };

    RandomForestModel(std::size_t n_classes, std::vector<Tree> trees)
        : k_(n_classes), trees_(std::move(trees)) {}

    LearnerKind kind() const override { return LearnerKind::RF; }

    Matrix predict_proba_indexed(const Matrix& X) const override {
        Matrix out(X.rows(), k_, 0.0);
        double n_trees = static_cast<double>(trees_.size());
        parallel_for(X.rows(), [&](std::size_t i) {
            const double* x = X.row(i);
            std::vector<std::uint32_t> votes(k_, 0);
            for (const auto& tree : trees_) ++votes[tree.predict(x)];
            double* row = out.row(i);
            for (std::size_t k = 0; k < k_; ++k) row[k] = static_cast<double>(votes[k]) / n_trees;
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
                w.i32(n.vote);
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
                n.vote = r.i32();
            }
        }
        return std::make_shared<RandomForestModel>(k, std::move(trees));
    }

    const std::vector<Tree>& trees() const { return trees_; }

 private:
    std::size_t k_;
    std::vector<Tree> trees_;
};

namespace detail {

struct CartContext {
    const Matrix& X;
    const std::vector<int>& y;
    std::size_t n_classes;
    const std::vector<double>& class_weight;
    std::size_t mtry;
    std::size_t min_split;
};

inline double gini_from_counts(const std::vector<double>& w_counts, double w_total) {
    if (w_total <= 0.0) return 0.0;
    double acc = 0.0;
    for (double w : w_counts) {
        double frac = w / w_total;
        acc += frac * frac;
    }
    return 1.0 - acc;
}

// Grows one CART tree depth-first on the given bootstrap sample. Splits are
// exact: candidate features are scanned over the node's sorted values with
// ties broken toward the lower feature index then the lower threshold.
inline void grow_cart(const CartContext& ctx, std::vector<std::size_t>& samples, Rng& rng,
                      std::vector<RandomForestModel::Node>& nodes, std::size_t lo, std::size_t hi) {
    RandomForestModel::Node node;
    std::vector<double> w_counts(ctx.n_classes, 0.0);
    double w_total = 0.0;
    for (std::size_t s = lo; s < hi; ++s) {
        double w = ctx.class_weight[ctx.y[samples[s]]];
        w_counts[ctx.y[samples[s]]] += w;
        w_total += w;
    }
    std::size_t node_id = nodes.size();
    nodes.push_back(node);

    auto make_leaf = [&]() {
        std::size_t best = 0;
        for (std::size_t c = 1; c < ctx.n_classes; ++c)
            if (w_counts[c] > w_counts[best]) best = c;
        nodes[node_id].feature = -1;
        nodes[node_id].vote = static_cast<std::int32_t>(best);
    };

    std::size_t n = hi - lo;
    bool pure = true;
    for (std::size_t s = lo + 1; s < hi && pure; ++s)
        if (ctx.y[samples[s]] != ctx.y[samples[lo]]) pure = false;
    if (n < ctx.min_split || pure) {
        make_leaf();
        return;
    }

    double parent_gini = gini_from_counts(w_counts, w_total);

    // mtry features without replacement
    std::size_t F = ctx.X.cols();
    std::vector<std::size_t> feats(F);
    for (std::size_t f = 0; f < F; ++f) feats[f] = f;
    for (std::size_t pick = 0; pick < ctx.mtry && pick < F; ++pick) {
        std::size_t j = pick + static_cast<std::size_t>(rng.next_below(F - pick));
        std::swap(feats[pick], feats[j]);
    }

    double best_gain = 0.0;
    std::int32_t best_feature = -1;
    double best_threshold = 0.0;

    std::vector<std::pair<double, std::size_t>> order(n);
    std::vector<double> left_counts(ctx.n_classes);
    for (std::size_t pick = 0; pick < ctx.mtry && pick < F; ++pick) {
        std::size_t f = feats[pick];
        for (std::size_t s = 0; s < n; ++s)
            order[s] = {ctx.X(samples[lo + s], f), samples[lo + s]};
        std::sort(order.begin(), order.end());
        if (order.front().first == order.back().first) continue;

        std::fill(left_counts.begin(), left_counts.end(), 0.0);
        double w_left = 0.0;
        for (std::size_t s = 0; s + 1 < n; ++s) {
            double w = ctx.class_weight[ctx.y[order[s].second]];
            left_counts[ctx.y[order[s].second]] += w;
            w_left += w;
            if (order[s].first == order[s + 1].first) continue;
            double w_right = w_total - w_left;
            double gini_l = gini_from_counts(left_counts, w_left);
            double gini_r = 0.0;
            {
                double acc = 0.0;
                for (std::size_t c = 0; c < ctx.n_classes; ++c) {
                    double frac = (w_counts[c] - left_counts[c]) / w_right;
                    acc += frac * frac;
                }
                gini_r = 1.0 - acc;
            }
            double gain = parent_gini - (w_left * gini_l + w_right * gini_r) / w_total;
            if (gain > best_gain && gain > 0.0) {
                best_gain = gain;
                best_feature = static_cast<std::int32_t>(f);
                best_threshold = order[s].first + 0.5 * (order[s + 1].first - order[s].first);
            }
        }
    }

    if (best_feature < 0) {
        make_leaf();
        return;
    }

    // partition samples[lo, hi) in place
    std::size_t mid = lo;
    for (std::size_t s = lo; s < hi; ++s)
        if (ctx.X(samples[s], best_feature) <= best_threshold) std::swap(samples[mid++], samples[s]);
    if (mid == lo || mid == hi) {
        make_leaf();
        return;
    }

    nodes[node_id].feature = best_feature;
    nodes[node_id].threshold = best_threshold;
    nodes[node_id].left = static_cast<std::uint32_t>(nodes.size());
    grow_cart(ctx, samples, rng, nodes, lo, mid);
    nodes[node_id].right = static_cast<std::uint32_t>(nodes.size());
    grow_cart(ctx, samples, rng, nodes, mid, hi);
}

}  // namespace detail

inline std::shared_ptr<Model> train_random_forest(const Matrix& X, const std::vector<int>& y,
                                                  std::size_t n_classes,
                                                  const detail::SampleWeights& sw,
                                                  const TrainConfig& cfg) {
    std::size_t n = X.rows();
    std::size_t mtry = cfg.rf_mtry > 0
                           ? cfg.rf_mtry
                           : std::max<std::size_t>(1, static_cast<std::size_t>(
                                                          std::floor(std::sqrt(static_cast<double>(X.cols())))));
    detail::CartContext ctx{X, y, n_classes, sw.class_weight, mtry, cfg.rf_min_split};

    unsigned threads = cfg.n_threads == 0 ? hardware_threads() : cfg.n_threads;
    std::vector<RandomForestModel::Tree> trees(cfg.rf_trees);
    parallel_for(cfg.rf_trees, threads, [&](std::size_t t) {
        Rng rng(derive_seed(cfg.seed, t));
        std::vector<std::size_t> samples(n);
        for (std::size_t i = 0; i < n; ++i) samples[i] = static_cast<std::size_t>(rng.next_below(n));
        std::sort(samples.begin(), samples.end());
        trees[t].nodes.reserve(2 * n / cfg.rf_min_split + 1);
        detail::grow_cart(ctx, samples, rng, trees[t].nodes, 0, n);
    });
    return std::make_shared<RandomForestModel>(n_classes, std::move(trees));
}

}  // namespace cropmap
