#pragma once

#include <cstdint>
#include <vector>

#include "cropmap/common.hpp"
#include "cropmap/rastercube.hpp"

namespace cropmap {

// ---------------------------------------------------------------------------
// Labeled-pixel datasets
// ---------------------------------------------------------------------------

// One row per labeled pixel, with the owning polygon kept for split
// bookkeeping.
struct PixelDataset {
    Matrix X;
    std::vector<std::int32_t> y;
    std::vector<std::int64_t> polygon;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pixels;
};

inline PixelDataset extract_dataset(const FeatureRaster& fr, const LabelSet& labels) {
    std::size_t n = labels.total_pixels();
    PixelDataset ds;
    ds.X = Matrix(n, fr.n_features());
    ds.y.reserve(n);
    ds.polygon.reserve(n);
    ds.pixels.reserve(n);
    std::size_t row = 0;
    for (const auto& e : labels.entries) {
        for (const auto& [r, c] : e.pixels) {
            if (r >= fr.height || c >= fr.width)
                throw ContractError("labeled pixel outside feature raster grid");
            double* out = ds.X.row(row);
            for (std::size_t f = 0; f < fr.n_features(); ++f) out[f] = fr.at(f, r, c);
            ds.y.push_back(e.class_id);
            ds.polygon.push_back(e.polygon_id);
            ds.pixels.emplace_back(r, c);
            ++row;
        }
    }
    return ds;
}

// Rows of a raster for a run of pixels [begin, end), used to predict
// wall-to-wall maps in bounded-memory chunks.
inline Matrix raster_chunk_matrix(const FeatureRaster& fr, std::size_t begin, std::size_t end) {
    Matrix X(end - begin, fr.n_features());
    std::size_t n_px = fr.n_pixels();
    for (std::size_t p = begin; p < end; ++p) {
        double* out = X.row(p - begin);
        for (std::size_t f = 0; f < fr.n_features(); ++f) out[f] = fr.values[f * n_px + p];
    }
    return X;
}

}  // namespace cropmap
