#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cropmap/common.hpp"
#include "cropmap/rastercube.hpp"

namespace cropmap {

// ---------------------------------------------------------------------------
// Polygon-level splits
//
// Whole polygons move between partitions, stratified per class, so pixels of
// one field can never leak between train and evaluation.
// ---------------------------------------------------------------------------

struct SplitSpec {
    double train = 0.70;
    double val = 0.15;
    double test = 0.15;  // 0 = two-way (train/val) full-map mode
    std::uint64_t seed = 1;

    void validate() const {
        if (!(train > 0.0) || !(val > 0.0) || test < 0.0)
            throw ConfigError("split fractions must be positive (test may be 0)");
        double sum = train + val + test;
        if (std::abs(sum - 1.0) > 1e-9)
            throw ConfigError("split fractions must sum to 1, got " + std::to_string(sum));
    }
};

struct SplitResult {
    LabelSet train;
    LabelSet val;
    LabelSet test;
    std::vector<std::string> warnings;
};

namespace detail {

// Largest-remainder allocation of n polygons over the fractions; partitions
// with a positive fraction get at least one polygon when enough exist.
inline std::vector<std::size_t> allocate_counts(std::size_t n, const std::vector<double>& fractions) {
    std::size_t parts = fractions.size();
    std::vector<std::size_t> counts(parts, 0);
    std::vector<std::pair<double, std::size_t>> remainders(parts);
    std::size_t assigned = 0;
    for (std::size_t p = 0; p < parts; ++p) {
        double want = fractions[p] * static_cast<double>(n);
        counts[p] = static_cast<std::size_t>(std::floor(want + 1e-12));
        remainders[p] = {want - static_cast<double>(counts[p]), p};
        assigned += counts[p];
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[remainders[i % parts].second];
    // guarantee every positive-fraction partition a polygon when possible
    if (n >= parts) {
        for (std::size_t p = 0; p < parts; ++p) {
            if (fractions[p] > 0.0 && counts[p] == 0) {
                std::size_t donor = 0;
                for (std::size_t q = 1; q < parts; ++q)
                    if (counts[q] > counts[donor]) donor = q;
                if (counts[donor] > 1) {
                    --counts[donor];
                    ++counts[p];
                }
            }
        }
    }
    return counts;
}

}  // namespace detail

// Stratified polygon-level split. A class with fewer polygons than
// partitions goes entirely to train, with a warning.
inline SplitResult split_polygons(const LabelSet& labels, const SplitSpec& spec) {
    spec.validate();
    bool three_way = spec.test > 0.0;
    std::size_t parts = three_way ? 3 : 2;

    SplitResult res;
    for (LabelSet* part : {&res.train, &res.val, &res.test}) {
        part->class_table = labels.class_table;
        part->task = labels.task;
        part->year = labels.year;
    }

    std::map<std::int32_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.entries.size(); ++i)
        by_class[labels.entries[i].class_id].push_back(i);

    Rng rng(derive_seed(spec.seed, 0x53504c49ULL));
    std::vector<double> fractions = three_way ? std::vector<double>{spec.train, spec.val, spec.test}
                                              : std::vector<double>{spec.train, spec.val};

    for (auto& [cls, idxs] : by_class) {
        if (idxs.size() < parts) {
            res.warnings.push_back("class " + std::to_string(cls) + " has " +
                                   std::to_string(idxs.size()) +
                                   " polygons (< partitions); assigned to train only");
            for (std::size_t i : idxs) res.train.entries.push_back(labels.entries[i]);
            continue;
        }
        rng.shuffle(idxs);
        auto counts = detail::allocate_counts(idxs.size(), fractions);
        std::size_t at = 0;
        LabelSet* parts_arr[3] = {&res.train, &res.val, &res.test};
        for (std::size_t p = 0; p < parts; ++p)
            for (std::size_t k = 0; k < counts[p]; ++k)
                parts_arr[p]->entries.push_back(labels.entries[idxs[at++]]);
    }

    // partitions share the parent class table so metrics align across runs
    return res;
}

}  // namespace cropmap
