#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cropmap/common.hpp"
#include "cropmap/rastercube.hpp"

namespace cropmap {

// ---------------------------------------------------------------------------
// Embedding ingestion
// ---------------------------------------------------------------------------

// Reads a FeatureRaster directory holding precomputed annual embeddings and
// enforces the expected dimension. Values pass through unchanged.
inline FeatureRaster ingest_embeddings(const std::filesystem::path& dir, std::size_t expected_dim) {
    FeatureRaster fr = read_feature_raster(dir);
    if (fr.source != FeatureSource::embedding)
        throw FormatError(dir.string() + ": source is '" + to_string(fr.source) +
                          "', expected 'embedding'");
    if (fr.provider.empty())
        throw FormatError(dir.string() + ": embedding raster must name a provider");
    if (fr.n_features() != expected_dim)
        throw FormatError(dir.string() + ": embedding dimension mismatch: expected " +
                          std::to_string(expected_dim) + ", found " +
                          std::to_string(fr.n_features()));
    return fr;
}

// ---------------------------------------------------------------------------
// Feature normalization
// ---------------------------------------------------------------------------

enum class NormMethod { zscore, minmax, none };

inline std::string to_string(NormMethod m) {
    switch (m) {
        case NormMethod::zscore: return "zscore";
        case NormMethod::minmax: return "minmax";
        case NormMethod::none: return "none";
    }
    return "none";
}

inline NormMethod norm_method_from_string(const std::string& s) {
    if (s == "zscore") return NormMethod::zscore;
    if (s == "minmax") return NormMethod::minmax;
    if (s == "none") return NormMethod::none;
    throw ConfigError("unknown normalization method: " + s);
}

// Per-feature affine transform x' = (x - offset) / scale, fitted once and
// replayed verbatim on transfer years.
struct NormalizationRecord {
    NormMethod method = NormMethod::none;
    std::vector<double> offset;
    std::vector<double> scale;
    std::string fitted_on;  // provenance: which pixel population fit the stats

    double apply_one(std::size_t f, double x) const {
        if (method == NormMethod::none) return x;
        return (x - offset[f]) / scale[f];
    }
    double invert_one(std::size_t f, double x) const {
        if (method == NormMethod::none) return x;
        return x * scale[f] + offset[f];
    }

    void apply_rows(Matrix& m) const {
        if (method == NormMethod::none) return;
        if (m.cols() != offset.size())
            throw ContractError("normalization record dimension mismatch: record " +
                                std::to_string(offset.size()) + ", data " + std::to_string(m.cols()));
        for (std::size_t r = 0; r < m.rows(); ++r) {
            double* row = m.row(r);
            for (std::size_t f = 0; f < m.cols(); ++f) row[f] = (row[f] - offset[f]) / scale[f];
        }
    }
};

struct NormalizeResult {
    FeatureRaster raster;
    NormalizationRecord record;
    std::vector<std::string> warnings;
};

// Fits per-feature statistics on the chosen pixel set (empty = whole raster)
// and applies the transform to every pixel. Zero-spread features keep the
// offset and get scale 1 with a warning.
inline NormalizeResult normalize_features(const FeatureRaster& fr, NormMethod method,
                                          const std::vector<std::pair<std::uint32_t, std::uint32_t>>&
                                              stats_pixels = {},
                                          const std::string& fitted_on = "whole_raster") {
    NormalizeResult res;
    res.record.method = method;
    res.record.fitted_on = fitted_on;
    if (method == NormMethod::none) {
        res.raster = fr;
        return res;
    }

    std::size_t F = fr.n_features();
    res.record.offset.assign(F, 0.0);
    res.record.scale.assign(F, 1.0);

    std::vector<std::size_t> flat;
    if (stats_pixels.empty()) {
        flat.resize(fr.n_pixels());
        for (std::size_t p = 0; p < flat.size(); ++p) flat[p] = p;
    } else {
        flat.reserve(stats_pixels.size());
        for (const auto& [r, c] : stats_pixels) {
            if (r >= fr.height || c >= fr.width)
                throw ContractError("normalization pixel out of bounds");
            flat.push_back(static_cast<std::size_t>(r) * fr.width + c);
        }
    }
    if (flat.empty()) throw ConfigError("normalization: empty fitting pixel set");

    std::vector<std::uint8_t> degenerate(F, 0);
    parallel_for(F, [&](std::size_t f) {
        const float* plane = fr.values.data() + f * fr.n_pixels();
        if (method == NormMethod::zscore) {
            double sum = 0.0;
            for (std::size_t p : flat) sum += plane[p];
            double mean = sum / static_cast<double>(flat.size());
            double var = 0.0;
            for (std::size_t p : flat) {
                double d = plane[p] - mean;
                var += d * d;
            }
            var /= static_cast<double>(flat.size());
            res.record.offset[f] = mean;
            if (var > 0.0) {
                res.record.scale[f] = std::sqrt(var);
            } else {
                res.record.scale[f] = 1.0;
                degenerate[f] = 1;
            }
        } else {
            double lo = plane[flat[0]], hi = plane[flat[0]];
            for (std::size_t p : flat) {
                lo = std::min(lo, static_cast<double>(plane[p]));
                hi = std::max(hi, static_cast<double>(plane[p]));
            }
            res.record.offset[f] = lo;
            if (hi > lo) {
                res.record.scale[f] = hi - lo;
            } else {
                res.record.scale[f] = 1.0;
                degenerate[f] = 1;
            }
        }
    });
    for (std::size_t f = 0; f < F; ++f)
        if (degenerate[f])
            res.warnings.push_back("feature '" + fr.feature_names[f] +
                                   "' has zero spread; scale forced to 1");

    res.raster = fr;
    parallel_for(F, [&](std::size_t f) {
        float* plane = res.raster.values.data() + f * fr.n_pixels();
        double off = res.record.offset[f], sc = res.record.scale[f];
        for (std::size_t p = 0; p < fr.n_pixels(); ++p)
            plane[p] = static_cast<float>((plane[p] - off) / sc);
    });
    res.raster.metadata["normalization"] = to_string(method);
    res.raster.metadata["normalization_fitted_on"] = fitted_on;
    return res;
}

// Replays a previously fitted record on another raster (e.g. a transfer
// year). Never refits.
inline FeatureRaster apply_normalization(const FeatureRaster& fr, const NormalizationRecord& rec) {
    if (rec.method == NormMethod::none) return fr;
    if (rec.offset.size() != fr.n_features())
        throw ContractError("normalization record dimension mismatch: record " +
                            std::to_string(rec.offset.size()) + ", raster " +
                            std::to_string(fr.n_features()));
    FeatureRaster out = fr;
    parallel_for(fr.n_features(), [&](std::size_t f) {
        float* plane = out.values.data() + f * fr.n_pixels();
        double off = rec.offset[f], sc = rec.scale[f];
        for (std::size_t p = 0; p < fr.n_pixels(); ++p)
            plane[p] = static_cast<float>((plane[p] - off) / sc);
    });
    out.metadata["normalization"] = to_string(rec.method);
    out.metadata["normalization_fitted_on"] = rec.fitted_on;
    return out;
}

// Fits a record on the rows of a sample matrix (one column per feature);
// used when normalization is fitted on training pixels only.
inline NormalizationRecord fit_normalization(const Matrix& X, NormMethod method,
                                             const std::string& fitted_on) {
    if (X.rows() == 0) throw ConfigError("normalization: empty fitting pixel set");
    NormalizationRecord rec;
    rec.method = method;
    rec.fitted_on = fitted_on;
    if (method == NormMethod::none) return rec;
    std::size_t F = X.cols();
    rec.offset.assign(F, 0.0);
    rec.scale.assign(F, 1.0);
    double n = static_cast<double>(X.rows());
    for (std::size_t f = 0; f < F; ++f) {
        if (method == NormMethod::zscore) {
            double sum = 0.0;
            for (std::size_t i = 0; i < X.rows(); ++i) sum += X(i, f);
            double mean = sum / n;
            double var = 0.0;
            for (std::size_t i = 0; i < X.rows(); ++i) {
                double d = X(i, f) - mean;
                var += d * d;
            }
            var /= n;
            rec.offset[f] = mean;
            rec.scale[f] = var > 0.0 ? std::sqrt(var) : 1.0;
        } else {
            double lo = X(0, f), hi = X(0, f);
            for (std::size_t i = 0; i < X.rows(); ++i) {
                lo = std::min(lo, X(i, f));
                hi = std::max(hi, X(i, f));
            }
            rec.offset[f] = lo;
            rec.scale[f] = hi > lo ? hi - lo : 1.0;
        }
    }
    return rec;
}

inline json normalization_to_json(const NormalizationRecord& rec) {
    json j;
    j["method"] = to_string(rec.method);
    j["offset"] = rec.offset;
    j["scale"] = rec.scale;
    j["fitted_on"] = rec.fitted_on;
    return j;
}

inline NormalizationRecord normalization_from_json(const json& j) {
    NormalizationRecord rec;
    rec.method = norm_method_from_string(j.at("method").get<std::string>());
    rec.offset = j.at("offset").get<std::vector<double>>();
    rec.scale = j.at("scale").get<std::vector<double>>();
    rec.fitted_on = j.value("fitted_on", std::string());
    return rec;
}

}  // namespace cropmap
