#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cropmap/common.hpp"

namespace cropmap {

// ---------------------------------------------------------------------------
// Classification metrics
// ---------------------------------------------------------------------------

struct MetricRecord {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double weighted_f1 = 0.0;
    std::map<std::int32_t, double> per_class_f1;
    // confusion[(truth, pred)] = count; row sums equal per-class support
    std::map<std::pair<std::int32_t, std::int32_t>, std::size_t> confusion;
    std::size_t n_samples = 0;
};

// accuracy = fraction correct; per-class F1 = 2PR/(P+R), 0 when P+R = 0;
// macro-F1 averages classes present in the truth vector; weighted-F1 weights
// by truth support.
inline MetricRecord compute_metrics(const std::vector<std::int32_t>& pred,
                                    const std::vector<std::int32_t>& truth,
                                    const std::map<std::int32_t, std::string>& class_table) {
    if (pred.size() != truth.size() || truth.empty())
        throw ContractError("compute_metrics: prediction and truth lengths differ or are empty");
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (class_table.find(truth[i]) == class_table.end())
            throw DataError("truth label " + std::to_string(truth[i]) + " outside class table");
        if (class_table.find(pred[i]) == class_table.end())
            throw DataError("predicted label " + std::to_string(pred[i]) + " outside class table");
    }

    MetricRecord rec;
    rec.n_samples = truth.size();
    std::map<std::int32_t, std::size_t> support, tp, fp, fn;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ++rec.confusion[{truth[i], pred[i]}];
        ++support[truth[i]];
        if (pred[i] == truth[i]) {
            ++correct;
            ++tp[truth[i]];
        } else {
            ++fn[truth[i]];
            ++fp[pred[i]];
        }
    }
    rec.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());

    double macro_sum = 0.0, weighted_sum = 0.0;
    for (const auto& [cls, sup] : support) {
        double p_den = static_cast<double>(tp[cls] + fp[cls]);
        double r_den = static_cast<double>(tp[cls] + fn[cls]);
        double precision = p_den > 0 ? static_cast<double>(tp[cls]) / p_den : 0.0;
        double recall = r_den > 0 ? static_cast<double>(tp[cls]) / r_den : 0.0;
        double f1 = (precision + recall) > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        rec.per_class_f1[cls] = f1;
        macro_sum += f1;
        weighted_sum += f1 * static_cast<double>(sup);
    }
    rec.macro_f1 = macro_sum / static_cast<double>(support.size());
    rec.weighted_f1 = weighted_sum / static_cast<double>(truth.size());
    return rec;
}

// Macro-F1 over dense class indices 0..K-1; used for early stopping where
// labels are already index-mapped.
inline double macro_f1_indexed(const std::vector<int>& pred, const std::vector<int>& truth,
                               int n_classes) {
    std::vector<std::size_t> tp(n_classes, 0), fp(n_classes, 0), fn(n_classes, 0), sup(n_classes, 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ++sup[truth[i]];
        if (pred[i] == truth[i])
            ++tp[truth[i]];
        else {
            ++fn[truth[i]];
            ++fp[pred[i]];
        }
    }
    double sum = 0.0;
    int present = 0;
    for (int c = 0; c < n_classes; ++c) {
        if (sup[c] == 0) continue;
        ++present;
        double p_den = static_cast<double>(tp[c] + fp[c]);
        double r_den = static_cast<double>(tp[c] + fn[c]);
        double precision = p_den > 0 ? tp[c] / p_den : 0.0;
        double recall = r_den > 0 ? tp[c] / r_den : 0.0;
        if (precision + recall > 0) sum += 2.0 * precision * recall / (precision + recall);
    }
    return present > 0 ? sum / present : 0.0;
}

}  // namespace cropmap
