#pragma once

#include <map>
#include <string>
#include <vector>

#include "cropmap/common.hpp"
#include "cropmap/rastercube.hpp"

namespace cropmap {

// ---------------------------------------------------------------------------
// Vegetation / water indices and tasseled-cap projections
//
// All outputs are per-date single-band (indices) or three-band (tasseled cap)
// cubes on the input grid, so they plug straight into the window reductions.
// ---------------------------------------------------------------------------

enum class IndexKind { NDVI, GCVI, EVI, LSWI, NDWI, RVI };

inline std::string to_string(IndexKind k) {
    switch (k) {
        case IndexKind::NDVI: return "NDVI";
        case IndexKind::GCVI: return "GCVI";
        case IndexKind::EVI: return "EVI";
        case IndexKind::LSWI: return "LSWI";
        case IndexKind::NDWI: return "NDWI";
        case IndexKind::RVI: return "RVI";
    }
    return "NDVI";
}

inline IndexKind index_kind_from_string(const std::string& s) {
    if (s == "NDVI") return IndexKind::NDVI;
    if (s == "GCVI") return IndexKind::GCVI;
    if (s == "EVI") return IndexKind::EVI;
    if (s == "LSWI") return IndexKind::LSWI;
    if (s == "NDWI") return IndexKind::NDWI;
    if (s == "RVI") return IndexKind::RVI;
    throw ConfigError("unknown index: " + s);
}

struct IndexSpec {
    IndexKind name = IndexKind::NDVI;
    // role -> band identifier; roles: red, green, blue (EVI only), nir,
    // swir1, vv, vh
    std::map<std::string, std::string> band_map;

    static std::vector<std::string> required_roles(IndexKind k) {
        switch (k) {
            case IndexKind::NDVI: return {"red", "nir"};
            case IndexKind::GCVI: return {"green", "nir"};
            case IndexKind::EVI: return {"red", "nir", "blue"};
            case IndexKind::LSWI: return {"nir", "swir1"};
            case IndexKind::NDWI: return {"green", "nir"};
            case IndexKind::RVI: return {"vv", "vh"};
        }
        return {};
    }
};

struct TasseledCapSpec {
    // component (TCW/TCG/TCB) -> weights aligned to the optical band order
    std::map<std::string, std::vector<double>> coefficients;
};

namespace detail {

struct IndexEval {
    std::vector<std::size_t> band_of_role;   // aligned to role order
    IndexKind kind;

    // Returns (value, ok). ok=false marks a zero denominator.
    std::pair<float, bool> operator()(const float* b) const {
        auto safe_ratio = [](double num, double den) -> std::pair<float, bool> {
            if (den == 0.0) return {0.0f, false};
            return {static_cast<float>(num / den), true};
        };
        switch (kind) {
            case IndexKind::NDVI: {
                double red = b[0], nir = b[1];
                return safe_ratio(nir - red, nir + red);
            }
            case IndexKind::GCVI: {
                double green = b[0], nir = b[1];
                if (green == 0.0) return {0.0f, false};
                return {static_cast<float>(nir / green - 1.0), true};
            }
            case IndexKind::EVI: {
                double red = b[0], nir = b[1], blue = b[2];
                return safe_ratio(2.5 * (nir - red), nir + 6.0 * red - 7.5 * blue + 1.0);
            }
            case IndexKind::LSWI: {
                double nir = b[0], swir1 = b[1];
                return safe_ratio(nir - swir1, nir + swir1);
            }
            case IndexKind::NDWI: {
                double green = b[0], nir = b[1];
                return safe_ratio(green - nir, green + nir);
            }
            case IndexKind::RVI: {
                double vv = b[0], vh = b[1];
                return safe_ratio(4.0 * vh, vv + vh);
            }
        }
        return {0.0f, false};
    }
};

}  // namespace detail

// Per-pixel, per-date index plane. Output cube has a single band named after
// the index; its valid mask is the input mask with zero-denominator pixels
// additionally flagged invalid (so window statistics see them as missing).
inline TimeSeriesCube compute_index(const TimeSeriesCube& cube, const IndexSpec& spec) {
    auto roles = IndexSpec::required_roles(spec.name);
    detail::IndexEval eval;
    eval.kind = spec.name;
    for (const auto& role : roles) {
        auto it = spec.band_map.find(role);
        if (it == spec.band_map.end())
            throw ConfigError("index " + to_string(spec.name) + ": band_map missing role '" + role + "'");
        eval.band_of_role.push_back(cube.manifest.band_index(it->second));
    }

    TimeSeriesCube out;
    out.manifest = cube.manifest;
    out.manifest.bands = {to_string(spec.name)};
    std::size_t n_px = cube.n_pixels();
    out.values.resize(cube.n_dates() * n_px);
    out.valid.resize(cube.n_dates() * n_px);

    parallel_for(cube.n_dates() * cube.manifest.height, [&](std::size_t job) {
        std::size_t d = job / cube.manifest.height;
        std::size_t r = job % cube.manifest.height;
        float vals[4];
        for (std::size_t c = 0; c < cube.manifest.width; ++c) {
            std::size_t vi = (d * cube.manifest.height + r) * cube.manifest.width + c;
            if (!cube.valid[vi]) {
                out.values[vi] = 0.0f;
                out.valid[vi] = 0;
                continue;
            }
            for (std::size_t k = 0; k < eval.band_of_role.size(); ++k)
                vals[k] = cube.at(d, eval.band_of_role[k], r, c);
            auto [v, ok] = eval(vals);
            out.values[vi] = v;
            out.valid[vi] = ok ? 1 : 0;
        }
    });
    return out;
}

// Tasseled-cap projections: one output band per configured component, each
// the per-pixel per-date dot product of the band vector with the component
// weights. Weight vectors must match the cube band count.
inline TimeSeriesCube compute_tasseled_cap(const TimeSeriesCube& cube, const TasseledCapSpec& spec) {
    if (spec.coefficients.empty()) throw ConfigError("tasseled cap: no coefficient vectors configured");
    for (const auto& [name, coeffs] : spec.coefficients) {
        if (coeffs.size() != cube.n_bands())
            throw ConfigError("tasseled cap " + name + ": " + std::to_string(coeffs.size()) +
                              " coefficients for " + std::to_string(cube.n_bands()) + " bands");
    }

    TimeSeriesCube out;
    out.manifest = cube.manifest;
    out.manifest.bands.clear();
    std::vector<const std::vector<double>*> comps;
    for (const auto& [name, coeffs] : spec.coefficients) {
        out.manifest.bands.push_back(name);
        comps.push_back(&coeffs);
    }
    std::size_t n_px = cube.n_pixels();
    std::size_t n_comp = comps.size();
    out.values.resize(cube.n_dates() * n_comp * n_px);
    out.valid = cube.valid;

    parallel_for(cube.n_dates() * cube.manifest.height, [&](std::size_t job) {
        std::size_t d = job / cube.manifest.height;
        std::size_t r = job % cube.manifest.height;
        for (std::size_t c = 0; c < cube.manifest.width; ++c) {
            if (!cube.is_valid(d, r, c)) {
                for (std::size_t k = 0; k < n_comp; ++k)
                    out.values[out.value_index(d, k, r, c)] = 0.0f;
                continue;
            }
            for (std::size_t k = 0; k < n_comp; ++k) {
                const auto& w = *comps[k];
                double acc = 0.0;
                for (std::size_t b = 0; b < cube.n_bands(); ++b)
                    acc += w[b] * static_cast<double>(cube.at(d, b, r, c));
                out.values[out.value_index(d, k, r, c)] = static_cast<float>(acc);
            }
        }
    });
    return out;
}

}  // namespace cropmap
