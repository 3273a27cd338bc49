#pragma once

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "cropmap/common.hpp"
#include "cropmap/indices.hpp"
#include "cropmap/rastercube.hpp"

namespace cropmap {

// ---------------------------------------------------------------------------
// Calendar windows
// ---------------------------------------------------------------------------

struct WindowSpec {
    std::string name;
    std::string start;  // "MM-DD"
    std::string end;    // "MM-DD"
    bool wraps_year = false;

    void validate() const {
        if (start.size() != 5 || end.size() != 5)
            throw ConfigError("window " + name + ": start/end must be MM-DD");
        if (!wraps_year && start > end)
            throw ConfigError("window " + name + ": start must not be after end");
    }

    bool contains(const std::string& iso_date) const {
        if (iso_date.size() < 10) throw FormatError("bad ISO date: " + iso_date);
        std::string md = iso_date.substr(5, 5);
        if (wraps_year) return md >= start || md <= end;
        return md >= start && md <= end;
    }
};

// The six windows the default pipeline reduces over: whole year, season
// onset, peak, end, full season, off season (wrapping the calendar).
inline std::vector<WindowSpec> default_windows() {
    return {
        {"all", "01-01", "12-31", false},
        {"sos", "07-01", "08-15", false},
        {"peak", "08-16", "10-15", false},
        {"eos", "10-16", "11-30", false},
        {"season", "07-01", "11-30", false},
        {"off", "12-01", "06-30", true},
    };
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

enum class Stat { min, q25, q50, q75, max, mean, stddev, range, iqr, skewness, kurtosis };

inline std::string to_string(Stat s) {
    switch (s) {
        case Stat::min: return "min";
        case Stat::q25: return "q25";
        case Stat::q50: return "q50";
        case Stat::q75: return "q75";
        case Stat::max: return "max";
        case Stat::mean: return "mean";
        case Stat::stddev: return "std";
        case Stat::range: return "range";
        case Stat::iqr: return "iqr";
        case Stat::skewness: return "skewness";
        case Stat::kurtosis: return "kurtosis";
    }
    return "min";
}

inline Stat stat_from_string(const std::string& s) {
    if (s == "min") return Stat::min;
    if (s == "q25") return Stat::q25;
    if (s == "q50") return Stat::q50;
    if (s == "q75") return Stat::q75;
    if (s == "max") return Stat::max;
    if (s == "mean") return Stat::mean;
    if (s == "std") return Stat::stddev;
    if (s == "range") return Stat::range;
    if (s == "iqr") return Stat::iqr;
    if (s == "skewness") return Stat::skewness;
    if (s == "kurtosis") return Stat::kurtosis;
    throw ConfigError("unknown statistic: " + s);
}

inline std::vector<Stat> all_stats() {
    return {Stat::min, Stat::q25, Stat::q50, Stat::q75, Stat::max, Stat::mean,
            Stat::stddev, Stat::range, Stat::iqr, Stat::skewness, Stat::kurtosis};
}

enum class IndexReduction { mean, median };

struct IndexSummary {
    std::string index;  // NDVI, EVI, NDWI, TCW, TCG, TCB
    IndexReduction reduction = IndexReduction::median;
};

struct StatSpec {
    std::vector<Stat> statistics;
    std::vector<IndexSummary> index_summaries;

    void validate() const {
        if (statistics.empty() && index_summaries.empty())
            throw ConfigError("stat spec must name at least one statistic or index summary");
    }
};

inline StatSpec default_stat_spec() {
    StatSpec s;
    s.statistics = all_stats();
    for (const auto& name : {"NDVI", "EVI", "NDWI", "TCW", "TCG", "TCB"})
        s.index_summaries.push_back({name, IndexReduction::median});
    return s;
}

struct Reduction {
    double value = 0.0;
    bool valid = false;
};

namespace detail {

// Type-7 quantile: linear interpolation between order statistics of a sorted
// sample.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    std::size_t n = sorted.size();
    if (n == 1) return sorted[0];
    double h = static_cast<double>(n - 1) * p;
    std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= n) return sorted[n - 1];
    double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

struct Moments {
    double mean = 0.0, m2 = 0.0, m3 = 0.0, m4 = 0.0;
};

inline Moments moments(const std::vector<double>& vals) {
    Moments mm;
    double n = static_cast<double>(vals.size());
    for (double v : vals) mm.mean += v;
    mm.mean /= n;
    for (double v : vals) {
        double d = v - mm.mean;
        double d2 = d * d;
        mm.m2 += d2;
        mm.m3 += d2 * d;
        mm.m4 += d2 * d2;
    }
    mm.m2 /= n;
    mm.m3 /= n;
    mm.m4 /= n;
    return mm;
}

}  // namespace detail

// Statistic of a sorted sample. Population moments; skewness g1 = m3/m2^1.5,
// excess kurtosis g2 = m4/m2^2 - 3, both invalid below 3 points or at zero
// variance. Every other statistic needs one point.
inline Reduction reduce_sorted(const std::vector<double>& sorted, Stat stat) {
    if (sorted.empty()) return {0.0, false};
    switch (stat) {
        case Stat::min: return {sorted.front(), true};
        case Stat::max: return {sorted.back(), true};
        case Stat::q25: return {detail::quantile_sorted(sorted, 0.25), true};
        case Stat::q50: return {detail::quantile_sorted(sorted, 0.50), true};
        case Stat::q75: return {detail::quantile_sorted(sorted, 0.75), true};
        case Stat::range: return {sorted.back() - sorted.front(), true};
        case Stat::iqr:
            return {detail::quantile_sorted(sorted, 0.75) - detail::quantile_sorted(sorted, 0.25), true};
        case Stat::mean: {
            return {detail::moments(sorted).mean, true};
        }
        case Stat::stddev: {
            return {std::sqrt(detail::moments(sorted).m2), true};
        }
        case Stat::skewness: {
            if (sorted.size() < 3) return {0.0, false};
            auto mm = detail::moments(sorted);
            if (mm.m2 <= 0.0) return {0.0, false};
            return {mm.m3 / std::pow(mm.m2, 1.5), true};
        }
        case Stat::kurtosis: {
            if (sorted.size() < 3) return {0.0, false};
            auto mm = detail::moments(sorted);
            if (mm.m2 <= 0.0) return {0.0, false};
            return {mm.m4 / (mm.m2 * mm.m2) - 3.0, true};
        }
    }
    throw ConfigError("unknown statistic id");
}

struct SeriesPoint {
    std::string date;  // ISO-8601
    double value = 0.0;
    bool valid = true;
};

// Statistic over the valid in-window values of a dated series.
inline Reduction reduce_window(const std::vector<SeriesPoint>& series, const WindowSpec& window,
                               Stat stat) {
    window.validate();
    std::vector<double> vals;
    vals.reserve(series.size());
    for (const auto& pt : series)
        if (pt.valid && window.contains(pt.date)) vals.push_back(pt.value);
    std::sort(vals.begin(), vals.end());
    return reduce_sorted(vals, stat);
}

// ---------------------------------------------------------------------------
// Date arithmetic (for temporal interpolation)
// ---------------------------------------------------------------------------

namespace detail {

// Days since civil epoch 1970-01-01 (Hinnant's days_from_civil).
inline std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline std::int64_t iso_to_days(const std::string& iso) {
    if (iso.size() < 10 || iso[4] != '-' || iso[7] != '-')
        throw FormatError("bad ISO date: " + iso);
    int y = std::stoi(iso.substr(0, 4));
    unsigned m = static_cast<unsigned>(std::stoi(iso.substr(5, 2)));
    unsigned d = static_cast<unsigned>(std::stoi(iso.substr(8, 2)));
    return days_from_civil(y, m, d);
}

// Fill gaps of a per-date series in place by linear interpolation against
// time; leading/trailing gaps take the nearest valid value. Marks imputed
// entries. Returns false when no date is valid.
inline bool impute_series(std::vector<double>& v, const std::vector<std::uint8_t>& ok,
                          const std::vector<std::int64_t>& day, std::vector<std::uint8_t>& imputed) {
    std::size_t n = v.size();
    std::size_t first = n, last = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (ok[i]) {
            if (first == n) first = i;
            last = i;
        }
    }
    if (first == n) return false;
    for (std::size_t i = 0; i < first; ++i) {
        v[i] = v[first];
        imputed[i] = 1;
    }
    for (std::size_t i = last + 1; i < n; ++i) {
        v[i] = v[last];
        imputed[i] = 1;
    }
    std::size_t prev = first;
    for (std::size_t i = first + 1; i <= last; ++i) {
        if (ok[i]) {
            if (i > prev + 1) {
                double v0 = v[prev], v1 = v[i];
                double t0 = static_cast<double>(day[prev]), t1 = static_cast<double>(day[i]);
                for (std::size_t k = prev + 1; k < i; ++k) {
                    double w = (static_cast<double>(day[k]) - t0) / (t1 - t0);
                    v[k] = v0 + w * (v1 - v0);
                    imputed[k] = 1;
                }
            }
            prev = i;
        }
    }
    return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// STM feature raster
// ---------------------------------------------------------------------------

struct StmOptions {
    std::vector<WindowSpec> windows = default_windows();
    StatSpec stats = default_stat_spec();
    std::vector<IndexSpec> index_specs;  // specs for the summary indices
    TasseledCapSpec tasseled_cap;        // needed when summaries include TC*
    std::size_t feature_count_target = 0;  // 0 = no documented target
};

// windows x (bands * |stats| + |summaries|) + sar_dates * (sar_bands + 1)
inline std::size_t stm_feature_count(std::size_t n_windows, std::size_t n_bands,
                                     std::size_t n_stats, std::size_t n_summaries,
                                     std::size_t n_sar_dates, std::size_t n_sar_bands) {
    return n_windows * (n_bands * n_stats + n_summaries) + n_sar_dates * (n_sar_bands + 1);
}

namespace detail {

// Gathers one image row of a cube into a row-major tile (d, b, c). Keeps the
// hot loop reading contiguous memory.
inline void gather_row_tile(const TimeSeriesCube& cube, std::size_t r, std::vector<float>& tile,
                            std::vector<std::uint8_t>& vtile) {
    std::size_t W = cube.manifest.width, H = cube.manifest.height;
    std::size_t D = cube.n_dates(), B = cube.n_bands();
    tile.resize(D * B * W);
    vtile.resize(D * W);
    for (std::size_t d = 0; d < D; ++d) {
        for (std::size_t b = 0; b < B; ++b)
            std::memcpy(&tile[(d * B + b) * W], &cube.values[((d * B + b) * H + r) * W], W * 4);
        std::memcpy(&vtile[d * W], &cube.valid[(d * H + r) * W], W);
    }
}

}  // namespace detail

// Spectral-temporal metrics: per-window, per-band statistics of the optical
// cube plus per-window index summaries, then the SAR time series (all SAR
// bands per date) with per-date RVI appended. Feature names are
// `<window>_<band-or-index>_<stat>` and `<sar-band>_<date>` / `RVI_<date>`,
// in deterministic order. Output is bit-identical for any thread count.
inline FeatureRaster build_stm_features(const TimeSeriesCube& cube, const TimeSeriesCube& sar_cube,
                                        const StmOptions& opt,
                                        std::vector<std::string>* warnings = nullptr,
                                        unsigned threads = 0) {
    if (threads == 0) threads = hardware_threads();
    opt.stats.validate();
    for (const auto& w : opt.windows) w.validate();
    if (cube.manifest.width != sar_cube.manifest.width ||
        cube.manifest.height != sar_cube.manifest.height)
        throw ContractError("optical and SAR cube grids differ");

    std::size_t W = cube.manifest.width, H = cube.manifest.height;
    std::size_t D = cube.n_dates(), B = cube.n_bands();
    std::size_t Ds = sar_cube.n_dates(), Bs = sar_cube.n_bands();

    // Window membership per optical date.
    std::vector<std::vector<std::uint8_t>> in_window(opt.windows.size(),
                                                     std::vector<std::uint8_t>(D, 0));
    std::string empty_windows;
    for (std::size_t w = 0; w < opt.windows.size(); ++w) {
        std::size_t hits = 0;
        for (std::size_t d = 0; d < D; ++d) {
            if (opt.windows[w].contains(cube.manifest.dates[d])) {
                in_window[w][d] = 1;
                ++hits;
            }
        }
        if (hits == 0) {
            empty_windows += (empty_windows.empty() ? "" : ",") + opt.windows[w].name;
            if (warnings)
                warnings->push_back("window '" + opt.windows[w].name +
                                    "' matches no acquisition date; its features are invalid");
        }
    }

    // Summary index planes: single-band cubes on the optical grid.
    std::vector<TimeSeriesCube> summary_cubes;
    for (const auto& sum : opt.stats.index_summaries) {
        if (sum.index == "TCW" || sum.index == "TCG" || sum.index == "TCB") {
            auto it = opt.tasseled_cap.coefficients.find(sum.index);
            if (it == opt.tasseled_cap.coefficients.end())
                throw ConfigError("index summary " + sum.index + ": no tasseled-cap coefficients");
            TasseledCapSpec one;
            one.coefficients[sum.index] = it->second;
            summary_cubes.push_back(compute_tasseled_cap(cube, one));
        } else {
            const IndexSpec* found = nullptr;
            for (const auto& spec : opt.index_specs)
                if (to_string(spec.name) == sum.index) found = &spec;
            if (!found) throw ConfigError("index summary " + sum.index + ": no index spec configured");
            summary_cubes.push_back(compute_index(cube, *found));
        }
    }

    // SAR RVI plane.
    IndexSpec rvi_spec;
    rvi_spec.name = IndexKind::RVI;
    for (const auto& b : sar_cube.manifest.bands) {
        if (b.find("VV") != std::string::npos) rvi_spec.band_map["vv"] = b;
        if (b.find("VH") != std::string::npos) rvi_spec.band_map["vh"] = b;
    }
    if (rvi_spec.band_map.size() != 2)
        throw ConfigError("SAR cube must carry VV and VH bands for RVI");
    TimeSeriesCube rvi = compute_index(sar_cube, rvi_spec);

    FeatureRaster out;
    out.width = W;
    out.height = H;
    out.source = FeatureSource::stm;
    out.year = cube.manifest.year;
    for (const auto& win : opt.windows) {
        for (const auto& band : cube.manifest.bands)
            for (const auto& st : opt.stats.statistics)
                out.feature_names.push_back(win.name + "_" + band + "_" + to_string(st));
        for (const auto& sum : opt.stats.index_summaries)
            out.feature_names.push_back(win.name + "_" + sum.index + "_" +
                                        (sum.reduction == IndexReduction::mean ? "mean" : "median"));
    }
    for (const auto& band : sar_cube.manifest.bands)
        for (const auto& date : sar_cube.manifest.dates)
            out.feature_names.push_back(band + "_" + date);
    for (const auto& date : sar_cube.manifest.dates)
        out.feature_names.push_back("RVI_" + date);

    std::size_t F = out.feature_names.size();
    std::size_t closed_form = stm_feature_count(opt.windows.size(), B,
                                                opt.stats.statistics.size(),
                                                opt.stats.index_summaries.size(), Ds, Bs);
    if (F != closed_form)
        throw ContractError("stm feature count disagrees with closed form");
    out.metadata["feature_count"] = std::to_string(F);
    out.metadata["rvi_backscatter"] = "linear";
    if (!empty_windows.empty()) out.metadata["invalid_windows"] = empty_windows;
    if (opt.feature_count_target != 0) {
        out.metadata["feature_count_target"] = std::to_string(opt.feature_count_target);
        if (opt.feature_count_target != F && warnings)
            warnings->push_back("stm feature count " + std::to_string(F) +
                                " differs from the configured target " +
                                std::to_string(opt.feature_count_target));
    }

    out.values.assign(F * W * H, 0.0f);
    out.valid.assign(W * H, 1);
    out.ensure_imputed_bits();

    std::vector<std::int64_t> sar_days(Ds);
    for (std::size_t d = 0; d < Ds; ++d) sar_days[d] = detail::iso_to_days(sar_cube.manifest.dates[d]);

    std::size_t n_stats = opt.stats.statistics.size();
    std::size_t n_sums = opt.stats.index_summaries.size();

    parallel_for(H, threads, [&](std::size_t r) {
        std::vector<float> tile;
        std::vector<std::uint8_t> vtile;
        detail::gather_row_tile(cube, r, tile, vtile);

        std::vector<std::vector<float>> sum_tiles(summary_cubes.size());
        std::vector<std::vector<std::uint8_t>> sum_vtiles(summary_cubes.size());
        for (std::size_t s = 0; s < summary_cubes.size(); ++s)
            detail::gather_row_tile(summary_cubes[s], r, sum_tiles[s], sum_vtiles[s]);

        std::vector<float> sar_tile;
        std::vector<std::uint8_t> sar_vtile;
        detail::gather_row_tile(sar_cube, r, sar_tile, sar_vtile);
        std::vector<float> rvi_tile;
        std::vector<std::uint8_t> rvi_vtile;
        detail::gather_row_tile(rvi, r, rvi_tile, rvi_vtile);

        std::vector<double> buf;
        buf.reserve(D);
        std::vector<double> series(Ds);
        std::vector<std::uint8_t> series_ok(Ds), series_imp(Ds);

        for (std::size_t c = 0; c < W; ++c) {
            std::size_t f = 0;
            for (std::size_t w = 0; w < opt.windows.size(); ++w) {
                const auto& member = in_window[w];
                for (std::size_t b = 0; b < B; ++b) {
                    buf.clear();
                    for (std::size_t d = 0; d < D; ++d)
                        if (member[d] && vtile[d * W + c]) buf.push_back(tile[(d * B + b) * W + c]);
                    std::sort(buf.begin(), buf.end());
                    for (std::size_t s = 0; s < n_stats; ++s) {
                        Reduction red = reduce_sorted(buf, opt.stats.statistics[s]);
                        out.values[(f++ * H + r) * W + c] = static_cast<float>(red.value);
                    }
                }
                for (std::size_t s = 0; s < n_sums; ++s) {
                    buf.clear();
                    for (std::size_t d = 0; d < D; ++d)
                        if (member[d] && sum_vtiles[s][d * W + c])
                            buf.push_back(sum_tiles[s][d * W + c]);
                    std::sort(buf.begin(), buf.end());
                    Stat st = opt.stats.index_summaries[s].reduction == IndexReduction::mean
                                  ? Stat::mean
                                  : Stat::q50;
                    out.values[(f++ * H + r) * W + c] = static_cast<float>(reduce_sorted(buf, st).value);
                }
            }

            // SAR series with gap interpolation, then per-date RVI.
            for (std::size_t b = 0; b < Bs; ++b) {
                for (std::size_t d = 0; d < Ds; ++d) {
                    series[d] = sar_tile[(d * Bs + b) * W + c];
                    series_ok[d] = sar_vtile[d * W + c];
                    series_imp[d] = 0;
                }
                bool any = detail::impute_series(series, series_ok, sar_days, series_imp);
                for (std::size_t d = 0; d < Ds; ++d) {
                    out.values[(f * H + r) * W + c] = any ? static_cast<float>(series[d]) : 0.0f;
                    if (series_imp[d]) out.mark_imputed(f, r, c);
                    ++f;
                }
                if (!any) out.valid[r * W + c] = 0;
            }
            for (std::size_t d = 0; d < Ds; ++d) {
                series[d] = rvi_tile[d * W + c];
                series_ok[d] = rvi_vtile[d * W + c];
                series_imp[d] = 0;
            }
            bool any = detail::impute_series(series, series_ok, sar_days, series_imp);
            for (std::size_t d = 0; d < Ds; ++d) {
                out.values[(f * H + r) * W + c] = any ? static_cast<float>(series[d]) : 0.0f;
                if (series_imp[d]) out.mark_imputed(f, r, c);
                ++f;
            }
            if (!any) out.valid[r * W + c] = 0;
        }
    });
    out.drop_imputed_bits_if_clear();
    return out;
}

// Raw features: per-date band values, per-date index values, per-date SAR
// band values, gaps filled by temporal linear interpolation (nearest valid
// value at the edges). A pixel with no valid date in a band is flagged
// invalid. Imputed entries are recorded per feature.
inline FeatureRaster build_raw_features(const TimeSeriesCube& cube, const TimeSeriesCube& sar_cube,
                                        const std::vector<IndexSpec>& indices,
                                        std::vector<std::string>* warnings = nullptr,
                                        unsigned threads = 0) {
    if (threads == 0) threads = hardware_threads();
    if (cube.manifest.width != sar_cube.manifest.width ||
        cube.manifest.height != sar_cube.manifest.height)
        throw ContractError("optical and SAR cube grids differ");

    std::size_t W = cube.manifest.width, H = cube.manifest.height;
    std::size_t D = cube.n_dates(), B = cube.n_bands();
    std::size_t Ds = sar_cube.n_dates(), Bs = sar_cube.n_bands();

    // Each index is evaluated against whichever cube carries its bands.
    std::vector<TimeSeriesCube> index_cubes;
    for (const auto& spec : indices) {
        bool optical = true;
        for (const auto& [role, band] : spec.band_map) {
            (void)role;
            if (!cube.manifest.has_band(band)) optical = false;
        }
        index_cubes.push_back(optical ? compute_index(cube, spec) : compute_index(sar_cube, spec));
    }

    FeatureRaster out;
    out.width = W;
    out.height = H;
    out.source = FeatureSource::raw;
    out.year = cube.manifest.year;
    for (const auto& band : cube.manifest.bands)
        for (const auto& date : cube.manifest.dates) out.feature_names.push_back(band + "_" + date);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto& ic = index_cubes[i];
        for (const auto& date : ic.manifest.dates)
            out.feature_names.push_back(to_string(indices[i].name) + "_" + date);
    }
    for (const auto& band : sar_cube.manifest.bands)
        for (const auto& date : sar_cube.manifest.dates) out.feature_names.push_back(band + "_" + date);

    std::size_t F = out.feature_names.size();
    out.metadata["feature_count"] = std::to_string(F);
    out.metadata["rvi_backscatter"] = "linear";
    out.values.assign(F * W * H, 0.0f);
    out.valid.assign(W * H, 1);
    out.ensure_imputed_bits();
    (void)warnings;

    std::vector<std::int64_t> days(D), sar_days(Ds);
    for (std::size_t d = 0; d < D; ++d) days[d] = detail::iso_to_days(cube.manifest.dates[d]);
    for (std::size_t d = 0; d < Ds; ++d) sar_days[d] = detail::iso_to_days(sar_cube.manifest.dates[d]);
    std::vector<const std::vector<std::int64_t>*> index_days;
    for (const auto& ic : index_cubes)
        index_days.push_back(ic.manifest.dates == cube.manifest.dates ? &days : &sar_days);

    parallel_for(H, threads, [&](std::size_t r) {
        std::vector<float> tile, sar_tile;
        std::vector<std::uint8_t> vtile, sar_vtile;
        detail::gather_row_tile(cube, r, tile, vtile);
        detail::gather_row_tile(sar_cube, r, sar_tile, sar_vtile);
        std::vector<std::vector<float>> idx_tiles(index_cubes.size());
        std::vector<std::vector<std::uint8_t>> idx_vtiles(index_cubes.size());
        for (std::size_t i = 0; i < index_cubes.size(); ++i)
            detail::gather_row_tile(index_cubes[i], r, idx_tiles[i], idx_vtiles[i]);

        std::vector<double> series;
        std::vector<std::uint8_t> ok, imp;

        auto emit_series = [&](std::size_t n, const std::vector<std::int64_t>& day,
                               std::size_t& f, std::size_t c) {
            bool any = detail::impute_series(series, ok, day, imp);
            for (std::size_t d = 0; d < n; ++d) {
                out.values[(f * H + r) * W + c] = any ? static_cast<float>(series[d]) : 0.0f;
                if (imp[d]) out.mark_imputed(f, r, c);
                ++f;
            }
            if (!any) out.valid[r * W + c] = 0;
        };

        for (std::size_t c = 0; c < W; ++c) {
            std::size_t f = 0;
            for (std::size_t b = 0; b < B; ++b) {
                series.resize(D);
                ok.resize(D);
                imp.assign(D, 0);
                for (std::size_t d = 0; d < D; ++d) {
                    series[d] = tile[(d * B + b) * W + c];
                    ok[d] = vtile[d * W + c];
                }
                emit_series(D, days, f, c);
            }
            for (std::size_t i = 0; i < index_cubes.size(); ++i) {
                std::size_t Di = index_cubes[i].n_dates();
                const auto& iday = *index_days[i];
                series.resize(Di);
                ok.resize(Di);
                imp.assign(Di, 0);
                for (std::size_t d = 0; d < Di; ++d) {
                    series[d] = idx_tiles[i][d * W + c];
                    ok[d] = idx_vtiles[i][d * W + c];
                }
                emit_series(Di, iday, f, c);
            }
            for (std::size_t b = 0; b < Bs; ++b) {
                series.resize(Ds);
                ok.resize(Ds);
                imp.assign(Ds, 0);
                for (std::size_t d = 0; d < Ds; ++d) {
                    series[d] = sar_tile[(d * Bs + b) * W + c];
                    ok[d] = sar_vtile[d * W + c];
                }
                emit_series(Ds, sar_days, f, c);
            }
        }
    });
    out.drop_imputed_bits_if_clear();
    return out;
}

}  // namespace cropmap
