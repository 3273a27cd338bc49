#pragma once

#include "cropmap/learners/core.hpp"

namespace cropmap {

// ---------------------------------------------------------------------------
// Two-hidden-layer ReLU perceptron with a softmax head, trained on mean
// focal loss with Adam, minibatch 256, early stopping on validation macro-F1
// (patience 10, best weights restored).
// ---------------------------------------------------------------------------

class MlpModel : public Model {
 public:
    struct Params {
        std::size_t in = 0, hidden = 0, out = 0;
        Matrix w1, w2, w3;                 // (hidden x in), (hidden x hidden), (out x hidden)
        std::vector<double> b1, b2, b3;
    };

    explicit MlpModel(Params p) : p_(std::move(p)) {}

    LearnerKind kind() const override { return LearnerKind::MLP; }

    Matrix predict_proba_indexed(const Matrix& X) const override {
        Matrix logits = forward_logits(X);
        parallel_for(X.rows(), [&](std::size_t i) {
            std::vector<double> z(logits.row(i), logits.row(i) + p_.out);
            softmax_inplace(z);
            std::copy(z.begin(), z.end(), logits.row(i));
        });
        return logits;
    }

    // Raw pre-softmax head activations; exposed so a hand-rolled forward pass
    // can be checked against it.
    Matrix forward_logits(const Matrix& X) const {
        Matrix h1(X.rows(), p_.hidden), h2(X.rows(), p_.hidden), z(X.rows(), p_.out);
        parallel_for(X.rows(), [&](std::size_t i) {
            const double* x = X.row(i);
            double* a1 = h1.row(i);
            for (std::size_t j = 0; j < p_.hidden; ++j) {
                double acc = p_.b1[j];
                const double* w = p_.w1.row(j);
                for (std::size_t k = 0; k < p_.in; ++k) acc += w[k] * x[k];
                a1[j] = acc > 0.0 ? acc : 0.0;
            }
            double* a2 = h2.row(i);
            for (std::size_t j = 0; j < p_.hidden; ++j) {
                double acc = p_.b2[j];
                const double* w = p_.w2.row(j);
                for (std::size_t k = 0; k < p_.hidden; ++k) acc += w[k] * a1[k];
                a2[j] = acc > 0.0 ? acc : 0.0;
            }
            double* zi = z.row(i);
            for (std::size_t j = 0; j < p_.out; ++j) {
                double acc = p_.b3[j];
                const double* w = p_.w3.row(j);
                for (std::size_t k = 0; k < p_.hidden; ++k) acc += w[k] * a2[k];
                zi[j] = acc;
            }
        });
        return z;
    }

    void save(detail::BinaryWriter& w) const override {
        w.u64(p_.in);
        w.u64(p_.hidden);
        w.u64(p_.out);
        w.f64v(p_.w1.data());
        w.f64v(p_.b1);
        w.f64v(p_.w2.data());
        w.f64v(p_.b2);
        w.f64v(p_.w3.data());
        w.f64v(p_.b3);
    }

    static std::shared_ptr<Model> load(detail::BinaryReader& r) {
        Params p;
        p.in = r.u64();
        p.hidden = r.u64();
        p.out = r.u64();
        p.w1 = Matrix(p.hidden, p.in);
        p.w1.data() = r.f64v();
        p.b1 = r.f64v();
        p.w2 = Matrix(p.hidden, p.hidden);
        p.w2.data() = r.f64v();
        p.b2 = r.f64v();
        p.w3 = Matrix(p.out, p.hidden);
        p.w3.data() = r.f64v();
        p.b3 = r.f64v();
        if (p.w1.data().size() != p.hidden * p.in || p.w2.data().size() != p.hidden * p.hidden ||
            p.w3.data().size() != p.out * p.hidden)
            throw FormatError("MLP payload shape mismatch");
        return std::make_shared<MlpModel>(std::move(p));
    }

    const Params& params() const { return p_; }

 private:
    Params p_;
};

namespace detail {

struct AdamState {
    std::vector<double> m, v;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double beta1_t = 1.0, beta2_t = 1.0;

    explicit AdamState(std::size_t dim) : m(dim, 0.0), v(dim, 0.0) {}

    void step(std::vector<double>& theta, const std::vector<double>& grad, double lr) {
        beta1_t *= beta1;
        beta2_t *= beta2;
        for (std::size_t j = 0; j < theta.size(); ++j) {
            m[j] = beta1 * m[j] + (1.0 - beta1) * grad[j];
            v[j] = beta2 * v[j] + (1.0 - beta2) * grad[j] * grad[j];
            double mh = m[j] / (1.0 - beta1_t);
            double vh = v[j] / (1.0 - beta2_t);
            theta[j] -= lr * mh / (std::sqrt(vh) + eps);
        }
    }
};

}  // namespace detail

inline std::shared_ptr<Model> train_mlp(const Matrix& X, const std::vector<int>& y,
                                        std::size_t n_classes, const detail::SampleWeights& sw,
                                        const TrainConfig& cfg, const Matrix* X_val = nullptr,
                                        const std::vector<int>* y_val = nullptr) {
    std::size_t F = X.cols();
    std::size_t H = cfg.mlp_hidden;
    std::size_t K = n_classes;
    Rng rng(derive_seed(cfg.seed, 0x4d4c50));

    // When no validation set is supplied, split off a stratified fraction for
    // early stopping.
    std::vector<std::size_t> train_idx, val_idx;
    Matrix Xv_local;
    std::vector<int> yv_local;
    const Matrix* Xv = X_val;
    const std::vector<int>* yv = y_val;
    if (!Xv || !yv) {
        std::vector<std::vector<std::size_t>> by_class(K);
        for (std::size_t i = 0; i < y.size(); ++i) by_class[y[i]].push_back(i);
        for (auto& bucket : by_class) {
            rng.shuffle(bucket);
            std::size_t n_val = static_cast<std::size_t>(
                std::floor(cfg.mlp_val_fraction * static_cast<double>(bucket.size())));
            if (bucket.size() >= 2 && n_val == 0) n_val = 1;
            for (std::size_t i = 0; i < bucket.size(); ++i)
                (i < n_val ? val_idx : train_idx).push_back(bucket[i]);
        }
        std::sort(train_idx.begin(), train_idx.end());
        std::sort(val_idx.begin(), val_idx.end());
        Xv_local = Matrix(val_idx.size(), F);
        yv_local.resize(val_idx.size());
        for (std::size_t i = 0; i < val_idx.size(); ++i) {
            std::copy(X.row(val_idx[i]), X.row(val_idx[i]) + F, Xv_local.row(i));
            yv_local[i] = y[val_idx[i]];
        }
        Xv = &Xv_local;
        yv = &yv_local;
    } else {
        train_idx.resize(X.rows());
        for (std::size_t i = 0; i < X.rows(); ++i) train_idx[i] = i;
    }

    // He-normal initialization.
    MlpModel::Params p;
    p.in = F;
    p.hidden = H;
    p.out = K;
    p.w1 = Matrix(H, F);
    p.w2 = Matrix(H, H);
    p.w3 = Matrix(K, H);
    p.b1.assign(H, 0.0);
    p.b2.assign(H, 0.0);
    p.b3.assign(K, 0.0);
    double s1 = std::sqrt(2.0 / static_cast<double>(F));
    double s2 = std::sqrt(2.0 / static_cast<double>(H));
    for (auto& v : p.w1.data()) v = rng.next_gaussian() * s1;
    for (auto& v : p.w2.data()) v = rng.next_gaussian() * s2;
    // zero softmax head: training starts from uniform probabilities instead
    // of saturated logits, so early stopping sees real progress from epoch 1

    // Flattened parameter order: w1 b1 w2 b2 w3 b3.
    std::size_t dim = H * F + H + H * H + H + K * H + K;
    auto pack = [&](const MlpModel::Params& q, std::vector<double>& theta) {
        theta.clear();
        theta.reserve(dim);
        theta.insert(theta.end(), q.w1.data().begin(), q.w1.data().end());
        theta.insert(theta.end(), q.b1.begin(), q.b1.end());
        theta.insert(theta.end(), q.w2.data().begin(), q.w2.data().end());
        theta.insert(theta.end(), q.b2.begin(), q.b2.end());
        theta.insert(theta.end(), q.w3.data().begin(), q.w3.data().end());
        theta.insert(theta.end(), q.b3.begin(), q.b3.end());
    };
    auto unpack = [&](const std::vector<double>& theta, MlpModel::Params& q) {
        auto it = theta.begin();
        std::copy(it, it + static_cast<std::ptrdiff_t>(H * F), q.w1.data().begin());
        it += static_cast<std::ptrdiff_t>(H * F);
        std::copy(it, it + static_cast<std::ptrdiff_t>(H), q.b1.begin());
        it += static_cast<std::ptrdiff_t>(H);
        std::copy(it, it + static_cast<std::ptrdiff_t>(H * H), q.w2.data().begin());
        it += static_cast<std::ptrdiff_t>(H * H);
        std::copy(it, it + static_cast<std::ptrdiff_t>(H), q.b2.begin());
        it += static_cast<std::ptrdiff_t>(H);
        std::copy(it, it + static_cast<std::ptrdiff_t>(K * H), q.w3.data().begin());
        it += static_cast<std::ptrdiff_t>(K * H);
        std::copy(it, it + static_cast<std::ptrdiff_t>(K), q.b3.begin());
    };

    std::vector<double> theta;
    pack(p, theta);
    detail::AdamState adam(dim);

    MlpModel::Params best = p;
    double best_f1 = -1.0;
    std::size_t stale = 0;

    std::vector<std::size_t> order = train_idx;
    std::vector<double> grad(dim);

    for (std::size_t epoch = 0; epoch < cfg.mlp_max_epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += cfg.mlp_batch) {
            std::size_t bsz = std::min(cfg.mlp_batch, order.size() - start);

            // forward
            Matrix a1(bsz, H), a2(bsz, H), delta(bsz, K);
            unpack(theta, p);
            parallel_for(bsz, [&](std::size_t bi) {
                const double* x = X.row(order[start + bi]);
                double* h1 = a1.row(bi);
                for (std::size_t j = 0; j < H; ++j) {
                    double acc = p.b1[j];
                    const double* w = p.w1.row(j);
                    for (std::size_t k = 0; k < F; ++k) acc += w[k] * x[k];
                    h1[j] = acc > 0.0 ? acc : 0.0;
                }
                double* h2 = a2.row(bi);
                for (std::size_t j = 0; j < H; ++j) {
                    double acc = p.b2[j];
                    const double* w = p.w2.row(j);
                    for (std::size_t k = 0; k < H; ++k) acc += w[k] * h1[k];
                    h2[j] = acc > 0.0 ? acc : 0.0;
                }
                std::vector<double> z(K);
                for (std::size_t j = 0; j < K; ++j) {
                    double acc = p.b3[j];
                    const double* w = p.w3.row(j);
                    for (std::size_t k = 0; k < H; ++k) acc += w[k] * h2[k];
                    z[j] = acc;
                }
                std::vector<double> probs = z;
                softmax_inplace(probs);
                int t = y[order[start + bi]];
                double w = sw.class_weight[t];
                double a = sw.alpha[t];
                double pt = std::min(std::max(probs[t], kProbClamp), 1.0 - kProbClamp);
                double gprime;
                if (cfg.focal_gamma == 0.0) {
                    gprime = -1.0 / pt;
                } else {
                    double one_m = 1.0 - pt;
                    gprime = cfg.focal_gamma * std::pow(one_m, cfg.focal_gamma - 1.0) * std::log(pt) -
                             std::pow(one_m, cfg.focal_gamma) / pt;
                }
                double scale = w * a * gprime * pt;
                double* d = delta.row(bi);
                for (std::size_t k = 0; k < K; ++k)
                    d[k] = scale * ((static_cast<int>(k) == t ? 1.0 : 0.0) - probs[k]);
            });

            // backward: gradients w.r.t. each weight block, parallel over
            // output rows so every slot is written by exactly one thread
            std::fill(grad.begin(), grad.end(), 0.0);
            double inv_b = 1.0 / static_cast<double>(bsz);
            double* g_w1 = grad.data();
            double* g_b1 = g_w1 + H * F;
            double* g_w2 = g_b1 + H;
            double* g_b2 = g_w2 + H * H;
            double* g_w3 = g_b2 + H;
            double* g_b3 = g_w3 + K * H;

            // delta3 = dL/dz3 (bsz x K) is `delta`
            Matrix d2(bsz, H), d1(bsz, H);
            parallel_for(bsz, [&](std::size_t bi) {
                const double* d3 = delta.row(bi);
                const double* h1 = a1.row(bi);
                const double* h2 = a2.row(bi);
                double* e2 = d2.row(bi);
                for (std::size_t j = 0; j < H; ++j) {
                    if (h2[j] <= 0.0) {
                        e2[j] = 0.0;
                        continue;
                    }
                    double acc = 0.0;
                    for (std::size_t k = 0; k < K; ++k) acc += p.w3(k, j) * d3[k];
                    e2[j] = acc;
                }
                double* e1 = d1.row(bi);
                for (std::size_t j = 0; j < H; ++j) {
                    if (h1[j] <= 0.0) {
                        e1[j] = 0.0;
                        continue;
                    }
                    double acc = 0.0;
                    for (std::size_t k = 0; k < H; ++k) acc += p.w2(k, j) * e2[k];
                    e1[j] = acc;
                }
            });

            parallel_for(K, [&](std::size_t k) {
                double* gw = g_w3 + k * H;
                double gb = 0.0;
                for (std::size_t bi = 0; bi < bsz; ++bi) {
                    double d = delta(bi, k) * inv_b;
                    const double* h2 = a2.row(bi);
                    for (std::size_t j = 0; j < H; ++j) gw[j] += d * h2[j];
                    gb += d;
                }
                g_b3[k] = gb;
            });
            parallel_for(H, [&](std::size_t j) {
                double* gw2 = g_w2 + j * H;
                double gb2 = 0.0;
                for (std::size_t bi = 0; bi < bsz; ++bi) {
                    double d = d2(bi, j) * inv_b;
                    if (d == 0.0) continue;
                    const double* h1 = a1.row(bi);
                    for (std::size_t k = 0; k < H; ++k) gw2[k] += d * h1[k];
                    gb2 += d;
                }
                g_b2[j] = gb2;

                double* gw1 = g_w1 + j * F;
                double gb1 = 0.0;
                for (std::size_t bi = 0; bi < bsz; ++bi) {
                    double d = d1(bi, j) * inv_b;
                    if (d == 0.0) continue;
                    const double* x = X.row(order[start + bi]);
                    for (std::size_t k = 0; k < F; ++k) gw1[k] += d * x[k];
                    gb1 += d;
                }
                g_b1[j] = gb1;
            });

            adam.step(theta, grad, cfg.mlp_learning_rate);
        }

        // early stopping on validation macro-F1
        unpack(theta, p);
        MlpModel probe(p);
        Matrix probs = probe.predict_proba_indexed(*Xv);
        std::vector<int> pred(Xv->rows());
        for (std::size_t i = 0; i < Xv->rows(); ++i) {
            const double* row = probs.row(i);
            std::size_t bestk = 0;
            for (std::size_t k = 1; k < K; ++k)
                if (row[k] > row[bestk]) bestk = k;
            pred[i] = static_cast<int>(bestk);
        }
        double f1 = macro_f1_indexed(pred, *yv, static_cast<int>(K));
        if (f1 > best_f1) {
            best_f1 = f1;
            best = p;
            stale = 0;
        } else if (++stale >= cfg.mlp_patience) {
            break;
        }
    }

    return std::make_shared<MlpModel>(std::move(best));
}

}  // namespace cropmap
