#pragma once

#include <numeric>

#include "cropmap/learners/core.hpp"

namespace cropmap {

// ---------------------------------------------------------------------------
// Multinomial logistic regression trained on mean focal loss (gamma = 0 gives
// weighted cross-entropy) with an L2 penalty on the weights, optimized by
// L-BFGS with Armijo backtracking.
// ---------------------------------------------------------------------------

class LogisticRegressionModel : public Model {
 public:
    LogisticRegressionModel(std::size_t n_classes, std::size_t n_features, Matrix weights,
                            std::vector<double> bias)
        : k_(n_classes), f_(n_features), w_(std::move(weights)), b_(std::move(bias)) {}

    LearnerKind kind() const override { return LearnerKind::LR; }

    Matrix predict_proba_indexed(const Matrix& X) const override {
        Matrix out(X.rows(), k_);
        parallel_for(X.rows(), [&](std::size_t i) {
            std::vector<double> z(k_);
            const double* row = X.row(i);
            for (std::size_t k = 0; k < k_; ++k) {
                double acc = b_[k];
                const double* wk = w_.row(k);
                for (std::size_t j = 0; j < f_; ++j) acc += wk[j] * row[j];
                z[k] = acc;
            }
            softmax_inplace(z);
            std::copy(z.begin(), z.end(), out.row(i));
        });
        return out;
    }

    void save(detail::BinaryWriter& w) const override {
        w.u64(k_);
        w.u64(f_);
        w.f64v(w_.data());
        w.f64v(b_);
    }

    static std::shared_ptr<Model> load(detail::BinaryReader& r) {
        std::size_t k = r.u64();
        std::size_t f = r.u64();
        auto wdata = r.f64v();
        auto b = r.f64v();
        if (wdata.size() != k * f || b.size() != k) throw FormatError("LR payload shape mismatch");
        Matrix w(k, f);
        w.data() = std::move(wdata);
        return std::make_shared<LogisticRegressionModel>(k, f, std::move(w), std::move(b));
    }

    const Matrix& weights() const { return w_; }
    const std::vector<double>& bias() const { return b_; }

 private:
    std::size_t k_, f_;
    Matrix w_;               // k x f
    std::vector<double> b_;  // k
};

namespace detail {

// Mean focal loss + (lambda/2)||W||^2 over flattened (W, b); gradient
// accumulated in fixed chunk order so results do not depend on threading.
class LrObjective {
 public:
    LrObjective(const Matrix& X, const std::vector<int>& y, std::size_t k,
                const SampleWeights& sw, const TrainConfig& cfg)
        : X_(X), y_(y), k_(k), f_(X.cols()), sw_(sw), cfg_(cfg) {}

    std::size_t dim() const { return k_ * (f_ + 1); }

    double eval(const std::vector<double>& theta, std::vector<double>& grad) const {
        grad.assign(dim(), 0.0);
        std::size_t n = X_.rows();
        constexpr std::size_t kChunk = 2048;
        std::size_t n_chunks = (n + kChunk - 1) / kChunk;
        std::vector<double> chunk_loss(n_chunks, 0.0);
        std::vector<std::vector<double>> chunk_grad(n_chunks);

        parallel_for(n_chunks, [&](std::size_t ci) {
            std::vector<double>& g = chunk_grad[ci];
            g.assign(dim(), 0.0);
            std::vector<double> z(k_), p(k_);
            double loss = 0.0;
            std::size_t lo = ci * kChunk, hi = std::min(n, lo + kChunk);
            for (std::size_t i = lo; i < hi; ++i) {
                const double* row = X_.row(i);
                for (std::size_t k = 0; k < k_; ++k) {
                    double acc = theta[k_ * f_ + k];  // bias block after weights
                    const double* wk = theta.data() + k * f_;
                    for (std::size_t j = 0; j < f_; ++j) acc += wk[j] * row[j];
                    z[k] = acc;
                }
                p = z;
                softmax_inplace(p);
                int t = y_[i];
                double w = sw_.class_weight[t];
                double a = sw_.alpha[t];
                loss += focal_loss(p, static_cast<std::size_t>(t), cfg_.focal_gamma, a, w);

                double pt = std::min(std::max(p[t], kProbClamp), 1.0 - kProbClamp);
                double gprime;
                if (cfg_.focal_gamma == 0.0) {
                    gprime = -1.0 / pt;
                } else {
                    double one_m = 1.0 - pt;
                    gprime = cfg_.focal_gamma * std::pow(one_m, cfg_.focal_gamma - 1.0) * std::log(pt) -
                             std::pow(one_m, cfg_.focal_gamma) / pt;
                }
                double scale = w * a * gprime * pt;
                for (std::size_t k = 0; k < k_; ++k) {
                    double dz = scale * ((static_cast<int>(k) == t ? 1.0 : 0.0) - p[k]);
                    double* gw = g.data() + k * f_;
                    for (std::size_t j = 0; j < f_; ++j) gw[j] += dz * row[j];
                    g[k_ * f_ + k] += dz;
                }
            }
            chunk_loss[ci] = loss;
        });

        double loss = 0.0;
        for (std::size_t ci = 0; ci < n_chunks; ++ci) {
            loss += chunk_loss[ci];
            const auto& g = chunk_grad[ci];
            for (std::size_t j = 0; j < dim(); ++j) grad[j] += g[j];
        }
        double inv_n = 1.0 / static_cast<double>(n);
        loss *= inv_n;
        for (double& g : grad) g *= inv_n;

        // L2 on weights only
        double l2 = 0.0;
        for (std::size_t j = 0; j < k_ * f_; ++j) {
            l2 += theta[j] * theta[j];
            grad[j] += cfg_.lr_l2_lambda * theta[j];
        }
        loss += 0.5 * cfg_.lr_l2_lambda * l2;
        return loss;
    }

 private:
    const Matrix& X_;
    const std::vector<int>& y_;
    std::size_t k_, f_;
    const SampleWeights& sw_;
    const TrainConfig& cfg_;
};

// Compact L-BFGS (history 10) with Armijo backtracking.
template <typename Objective>
std::vector<double> lbfgs_minimize(const Objective& obj, std::vector<double> theta,
                                   std::size_t max_iter, double tol) {
    const std::size_t m = 10;
    std::size_t dim = theta.size();
    std::vector<double> grad(dim), grad_new(dim);
    double f = obj.eval(theta, grad);

    std::vector<std::vector<double>> s_hist, y_hist;
    std::vector<double> rho_hist;

    auto inf_norm = [](const std::vector<double>& v) {
        double top = 0.0;
        for (double x : v) top = std::max(top, std::abs(x));
        return top;
    };

    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        if (inf_norm(grad) < tol) break;

        // two-loop recursion
        std::vector<double> q = grad;
        std::vector<double> alpha(s_hist.size());
        for (std::size_t h = s_hist.size(); h-- > 0;) {
            double a = rho_hist[h] * std::inner_product(s_hist[h].begin(), s_hist[h].end(), q.begin(), 0.0);
            alpha[h] = a;
            for (std::size_t j = 0; j < dim; ++j) q[j] -= a * y_hist[h][j];
        }
        if (!s_hist.empty()) {
            const auto& s = s_hist.back();
            const auto& y = y_hist.back();
            double sy = std::inner_product(s.begin(), s.end(), y.begin(), 0.0);
            double yy = std::inner_product(y.begin(), y.end(), y.begin(), 0.0);
            if (yy > 0) {
                double h0 = sy / yy;
                for (double& v : q) v *= h0;
            }
        }
        for (std::size_t h = 0; h < s_hist.size(); ++h) {
            double beta = rho_hist[h] * std::inner_product(y_hist[h].begin(), y_hist[h].end(), q.begin(), 0.0);
            for (std::size_t j = 0; j < dim; ++j) q[j] += s_hist[h][j] * (alpha[h] - beta);
        }
        // q is now the ascent direction scale; step along -q... q approximates H^-1 g
        double dir_dot_grad = 0.0;
        for (std::size_t j = 0; j < dim; ++j) dir_dot_grad += q[j] * grad[j];
        if (dir_dot_grad <= 0) {
            // not a descent direction; fall back to steepest descent
            q = grad;
            dir_dot_grad = std::inner_product(grad.begin(), grad.end(), grad.begin(), 0.0);
        }

        double step = 1.0;
        std::vector<double> theta_new(dim);
        double f_new = f;
        bool moved = false;
        for (int bt = 0; bt < 40; ++bt) {
            for (std::size_t j = 0; j < dim; ++j) theta_new[j] = theta[j] - step * q[j];
            f_new = obj.eval(theta_new, grad_new);
            if (f_new <= f - 1e-4 * step * dir_dot_grad) {
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;

        std::vector<double> s(dim), yv(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            s[j] = theta_new[j] - theta[j];
            yv[j] = grad_new[j] - grad[j];
        }
        double sy = std::inner_product(s.begin(), s.end(), yv.begin(), 0.0);
        if (sy > 1e-12) {
            if (s_hist.size() == m) {
                s_hist.erase(s_hist.begin());
                y_hist.erase(y_hist.begin());
                rho_hist.erase(rho_hist.begin());
            }
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(yv));
            rho_hist.push_back(1.0 / sy);
        }
        theta = std::move(theta_new);
        theta_new.resize(dim);
        grad = grad_new;
        double f_prev = f;
        f = f_new;
        if (std::abs(f_prev - f) < tol * std::max(1.0, std::abs(f))) break;
    }
    return theta;
}

}  // namespace detail

inline std::shared_ptr<Model> train_logistic_regression(const Matrix& X, const std::vector<int>& y,
                                                        std::size_t n_classes,
                                                        const detail::SampleWeights& sw,
                                                        const TrainConfig& cfg) {
    detail::LrObjective obj(X, y, n_classes, sw, cfg);
    std::vector<double> theta(obj.dim(), 0.0);
    theta = detail::lbfgs_minimize(obj, std::move(theta), cfg.lr_max_iter, cfg.lr_tolerance);

    Matrix w(n_classes, X.cols());
    std::copy(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(n_classes * X.cols()),
              w.data().begin());
    std::vector<double> b(theta.begin() + static_cast<std::ptrdiff_t>(n_classes * X.cols()), theta.end());
    return std::make_shared<LogisticRegressionModel>(n_classes, X.cols(), std::move(w), std::move(b));
}

}  // namespace cropmap
