#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cropmap/common.hpp"

namespace cropmap {

using json = nlohmann::json;

constexpr std::int32_t kNoDataClass = -1;

// ---------------------------------------------------------------------------
// CubeManifest / TimeSeriesCube
// ---------------------------------------------------------------------------

enum class NoDataPolicy { masked, sentinel_value };

struct CubeManifest {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::string> dates;   // ISO-8601, strictly increasing
    std::vector<std::string> bands;   // e.g. "S2_B02", "S1_VV"
    double pixel_size_m = 10.0;
    NoDataPolicy nodata_policy = NoDataPolicy::masked;
    int year = 0;

    void validate() const {
        if (width < 1 || height < 1) throw FormatError("manifest: width/height must be >= 1");
        if (bands.empty()) throw FormatError("manifest: bands must be non-empty");
        std::set<std::string> uniq(bands.begin(), bands.end());
        if (uniq.size() != bands.size()) throw FormatError("manifest: bands must be unique");
        for (std::size_t i = 1; i < dates.size(); ++i) {
            if (!(dates[i - 1] < dates[i]))
                throw FormatError("manifest: dates must be strictly increasing at index " + std::to_string(i));
        }
    }

    std::size_t band_index(const std::string& name) const {
        for (std::size_t i = 0; i < bands.size(); ++i)
            if (bands[i] == name) return i;
        throw ConfigError("band not found in cube: " + name);
    }

    bool has_band(const std::string& name) const {
        for (const auto& b : bands)
            if (b == name) return true;
        return false;
    }
};

// Per-pixel, per-date, per-band stack with a validity mask. values is laid
// out date-major (date, band, row, col); valid is (date, row, col).
struct TimeSeriesCube {
    CubeManifest manifest;
    std::vector<float> values;
    std::vector<std::uint8_t> valid;

    std::size_t n_dates() const { return manifest.dates.size(); }
    std::size_t n_bands() const { return manifest.bands.size(); }
    std::size_t n_pixels() const { return manifest.width * manifest.height; }

    std::size_t value_index(std::size_t d, std::size_t b, std::size_t r, std::size_t c) const {
        return ((d * n_bands() + b) * manifest.height + r) * manifest.width + c;
    }
    std::size_t valid_index(std::size_t d, std::size_t r, std::size_t c) const {
        return (d * manifest.height + r) * manifest.width + c;
    }

    float at(std::size_t d, std::size_t b, std::size_t r, std::size_t c) const {
        return values[value_index(d, b, r, c)];
    }
    bool is_valid(std::size_t d, std::size_t r, std::size_t c) const {
        return valid[valid_index(d, r, c)] != 0;
    }

    void check_shape() const {
        manifest.validate();
        std::size_t want_vals = n_dates() * n_bands() * n_pixels();
        std::size_t want_mask = n_dates() * n_pixels();
        if (values.size() != want_vals)
            throw SizeError("cube values: expected " + std::to_string(want_vals) +
                            " floats, found " + std::to_string(values.size()));
        if (valid.size() != want_mask)
            throw SizeError("cube valid mask: expected " + std::to_string(want_mask) +
                            " bytes, found " + std::to_string(valid.size()));
    }
};

// ---------------------------------------------------------------------------
// FeatureRaster
// ---------------------------------------------------------------------------

enum class FeatureSource { raw, stm, embedding };

inline std::string to_string(FeatureSource s) {
    switch (s) {
        case FeatureSource::raw: return "raw";
        case FeatureSource::stm: return "stm";
        case FeatureSource::embedding: return "embedding";
    }
    return "raw";
}

inline FeatureSource feature_source_from_string(const std::string& s) {
    if (s == "raw") return FeatureSource::raw;
    if (s == "stm") return FeatureSource::stm;
    if (s == "embedding") return FeatureSource::embedding;
    throw FormatError("unknown feature source: " + s);
}

// Fixed-length per-pixel feature vectors, feature-major (feature, row, col).
// valid and imputed are optional sidecars: valid marks pixels whose whole
// vector is usable; imputed is a bit per (feature, pixel) set where the value
// was filled by temporal interpolation.
struct FeatureRaster {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::string> feature_names;
    std::vector<float> values;
    FeatureSource source = FeatureSource::raw;
    int year = 0;
    std::string provider;                   // embeddings only
    std::map<std::string, std::string> metadata;

    std::vector<std::uint8_t> valid;        // per pixel; empty = all valid
    std::vector<std::uint8_t> imputed_bits; // bit-packed (feature, pixel); may be empty

    std::size_t n_features() const { return feature_names.size(); }
    std::size_t n_pixels() const { return width * height; }

    std::size_t value_index(std::size_t f, std::size_t r, std::size_t c) const {
        return (f * height + r) * width + c;
    }
    float at(std::size_t f, std::size_t r, std::size_t c) const {
        return values[value_index(f, r, c)];
    }
    bool pixel_valid(std::size_t r, std::size_t c) const {
        return valid.empty() || valid[r * width + c] != 0;
    }

    bool is_imputed(std::size_t f, std::size_t r, std::size_t c) const {
        if (imputed_bits.empty()) return false;
        std::size_t bit = value_index(f, r, c);
        return (imputed_bits[bit >> 3] >> (bit & 7)) & 1;
    }
    void ensure_imputed_bits() {
        if (imputed_bits.empty()) imputed_bits.assign((values.size() + 7) / 8, 0);
    }
    // Requires ensure_imputed_bits() first. Atomic: adjacent rows may share a
    // byte, and rows are filled from different threads.
    void mark_imputed(std::size_t f, std::size_t r, std::size_t c) {
        std::size_t bit = value_index(f, r, c);
        std::atomic_ref<std::uint8_t> byte(imputed_bits[bit >> 3]);
        byte.fetch_or(static_cast<std::uint8_t>(1u << (bit & 7)), std::memory_order_relaxed);
    }
    // Frees the bitmap when nothing was marked.
    void drop_imputed_bits_if_clear() {
        for (std::uint8_t b : imputed_bits)
            if (b != 0) return;
        imputed_bits.clear();
        imputed_bits.shrink_to_fit();
    }

    void check_shape() const {
        std::set<std::string> uniq(feature_names.begin(), feature_names.end());
        if (uniq.size() != feature_names.size())
            throw FormatError("feature raster: feature names must be unique");
        if (values.size() != n_features() * n_pixels())
            throw SizeError("feature raster values: expected " +
                            std::to_string(n_features() * n_pixels()) + " floats, found " +
                            std::to_string(values.size()));
        if (!valid.empty() && valid.size() != n_pixels())
            throw SizeError("feature raster valid mask: expected " + std::to_string(n_pixels()) +
                            " bytes, found " + std::to_string(valid.size()));
    }
};

// ---------------------------------------------------------------------------
// LabelSet
// ---------------------------------------------------------------------------

enum class Task { landcover, croptype };

inline std::string to_string(Task t) { return t == Task::landcover ? "landcover" : "croptype"; }

inline Task task_from_string(const std::string& s) {
    if (s == "landcover") return Task::landcover;
    if (s == "croptype") return Task::croptype;
    throw FormatError("unknown task: " + s);
}

struct LabelEntry {
    std::int64_t polygon_id = 0;
    std::int32_t class_id = 0;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pixels;  // (row, col)
};

struct LabelSet {
    std::vector<LabelEntry> entries;
    std::map<std::int32_t, std::string> class_table;
    Task task = Task::landcover;
    int year = 0;

    std::size_t total_pixels() const {
        std::size_t n = 0;
        for (const auto& e : entries) n += e.pixels.size();
        return n;
    }

    std::map<std::int32_t, std::size_t> pixel_counts() const {
        std::map<std::int32_t, std::size_t> counts;
        for (const auto& e : entries) counts[e.class_id] += e.pixels.size();
        return counts;
    }

    void validate(std::size_t width = 0, std::size_t height = 0) const {
        std::set<std::int64_t> poly_ids;
        std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
        for (const auto& e : entries) {
            if (!poly_ids.insert(e.polygon_id).second)
                throw FormatError("label set: duplicate polygon id " + std::to_string(e.polygon_id));
            if (class_table.find(e.class_id) == class_table.end())
                throw FormatError("label set: class id " + std::to_string(e.class_id) +
                                  " missing from class table");
            for (const auto& px : e.pixels) {
                if (width > 0 && (px.second >= width || px.first >= height))
                    throw FormatError("label set: pixel out of bounds (" + std::to_string(px.first) +
                                      "," + std::to_string(px.second) + ")");
                if (!seen.insert(px).second)
                    throw FormatError("label set: pixel assigned to more than one polygon");
            }
        }
    }
};

// ---------------------------------------------------------------------------
// ClassMap / ClassProbabilityMap
// ---------------------------------------------------------------------------

struct ClassMap {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::int32_t> class_ids;  // row-major
    std::map<std::int32_t, std::string> class_table;
    int year = 0;

    std::int32_t at(std::size_t r, std::size_t c) const { return class_ids[r * width + c]; }

    void check_shape() const {
        if (class_ids.size() != width * height)
            throw SizeError("class map: expected " + std::to_string(width * height) +
                            " entries, found " + std::to_string(class_ids.size()));
        for (std::int32_t id : class_ids) {
            if (id != kNoDataClass && class_table.find(id) == class_table.end())
                throw FormatError("class map: class id " + std::to_string(id) +
                                  " missing from class table");
        }
    }
};

// Per-pixel class probability vectors, class-major (class, row, col) in the
// order of class_ids.
struct ClassProbabilityMap {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::int32_t> class_ids;  // ordered
    std::map<std::int32_t, std::string> class_table;
    std::vector<float> probs;
    int year = 0;

    std::size_t index(std::size_t k, std::size_t r, std::size_t c) const {
        return (k * height + r) * width + c;
    }

    // argmax; ties toward the lower class id (class_ids assumed ascending).
    ClassMap argmax(std::size_t* tie_count = nullptr) const {
        ClassMap out;
        out.width = width;
        out.height = height;
        out.year = year;
        out.class_table = class_table;
        out.class_ids.resize(width * height, kNoDataClass);
        std::size_t ties = 0;
        for (std::size_t p = 0; p < width * height; ++p) {
            std::size_t best = 0;
            float best_p = probs[p];
            bool tie = false;
            for (std::size_t k = 1; k < class_ids.size(); ++k) {
                float v = probs[k * width * height + p];
                if (v > best_p) {
                    best_p = v;
                    best = k;
                    tie = false;
                } else if (v == best_p) {
                    tie = true;
                }
            }
            if (tie) ++ties;
            out.class_ids[p] = class_ids[best];
        }
        if (tie_count) *tie_count = ties;
        return out;
    }
};

// ---------------------------------------------------------------------------
// Directory I/O
//
// Every type is a self-describing directory: a small JSON/CSV text part plus
// flat little-endian binary payloads. Round-trips are bit-exact.
// ---------------------------------------------------------------------------

namespace detail {

inline void write_f32(const std::filesystem::path& p, const std::vector<float>& v) {
    static_assert(sizeof(float) == 4);
    fsutil::write_bytes(p, v.data(), v.size() * 4);
}

inline std::vector<float> read_f32(const std::filesystem::path& p, std::size_t expected) {
    auto bytes = fsutil::read_bytes(p);
    if (bytes.size() != expected * 4)
        throw SizeError(p.string() + ": expected " + std::to_string(expected * 4) +
                        " bytes, found " + std::to_string(bytes.size()));
    std::vector<float> out(expected);
    std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
}

inline json parse_json_file(const std::filesystem::path& p) {
    json j = json::parse(fsutil::read_text(p), nullptr, false);
    if (j.is_discarded()) throw FormatError("garbled JSON: " + p.string());
    return j;
}

template <typename T>
T require_field(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) throw FormatError(where + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw FormatError(where + ": bad value for field '" + key + "'");
    }
}

}  // namespace detail

inline void write_cube(const TimeSeriesCube& cube, const std::filesystem::path& dir) {
    cube.check_shape();
    std::filesystem::create_directories(dir);
    json m;
    m["width"] = cube.manifest.width;
    m["height"] = cube.manifest.height;
    m["dates"] = cube.manifest.dates;
    m["bands"] = cube.manifest.bands;
    m["pixel_size_m"] = cube.manifest.pixel_size_m;
    m["year"] = cube.manifest.year;
    fsutil::write_text(dir / "manifest.json", m.dump(2) + "\n");
    detail::write_f32(dir / "values.bin", cube.values);
    fsutil::write_bytes(dir / "valid.bin", cube.valid.data(), cube.valid.size());
}

inline TimeSeriesCube read_cube(const std::filesystem::path& dir) {
    json m = detail::parse_json_file(dir / "manifest.json");
    TimeSeriesCube cube;
    cube.manifest.width = detail::require_field<std::size_t>(m, "width", "manifest.json");
    cube.manifest.height = detail::require_field<std::size_t>(m, "height", "manifest.json");
    cube.manifest.dates = detail::require_field<std::vector<std::string>>(m, "dates", "manifest.json");
    cube.manifest.bands = detail::require_field<std::vector<std::string>>(m, "bands", "manifest.json");
    cube.manifest.pixel_size_m = detail::require_field<double>(m, "pixel_size_m", "manifest.json");
    cube.manifest.year = detail::require_field<int>(m, "year", "manifest.json");
    cube.manifest.validate();

    std::size_t n_vals = cube.manifest.dates.size() * cube.manifest.bands.size() *
                         cube.manifest.width * cube.manifest.height;
    std::size_t n_mask = cube.manifest.dates.size() * cube.manifest.width * cube.manifest.height;
    cube.values = detail::read_f32(dir / "values.bin", n_vals);
    cube.valid = fsutil::read_bytes(dir / "valid.bin");
    if (cube.valid.size() != n_mask)
        throw SizeError((dir / "valid.bin").string() + ": expected " + std::to_string(n_mask) +
                        " bytes, found " + std::to_string(cube.valid.size()));
    return cube;
}

inline void write_feature_raster(const FeatureRaster& fr, const std::filesystem::path& dir) {
    fr.check_shape();
    std::filesystem::create_directories(dir);
    json m;
    m["width"] = fr.width;
    m["height"] = fr.height;
    m["feature_names"] = fr.feature_names;
    m["source"] = to_string(fr.source);
    m["year"] = fr.year;
    if (!fr.provider.empty()) m["provider"] = fr.provider;
    if (!fr.metadata.empty()) m["metadata"] = fr.metadata;
    m["has_valid_mask"] = !fr.valid.empty();
    m["has_imputed_bits"] = !fr.imputed_bits.empty();
    fsutil::write_text(dir / "features.json", m.dump(2) + "\n");
    detail::write_f32(dir / "values.bin", fr.values);
    if (!fr.valid.empty())
        fsutil::write_bytes(dir / "valid.bin", fr.valid.data(), fr.valid.size());
    if (!fr.imputed_bits.empty())
        fsutil::write_bytes(dir / "imputed.bin", fr.imputed_bits.data(), fr.imputed_bits.size());
}

inline FeatureRaster read_feature_raster(const std::filesystem::path& dir) {
    json m = detail::parse_json_file(dir / "features.json");
    FeatureRaster fr;
    fr.width = detail::require_field<std::size_t>(m, "width", "features.json");
    fr.height = detail::require_field<std::size_t>(m, "height", "features.json");
    fr.feature_names = detail::require_field<std::vector<std::string>>(m, "feature_names", "features.json");
    fr.source = feature_source_from_string(detail::require_field<std::string>(m, "source", "features.json"));
    fr.year = detail::require_field<int>(m, "year", "features.json");
    if (m.contains("provider")) fr.provider = m.at("provider").get<std::string>();
    if (m.contains("metadata")) fr.metadata = m.at("metadata").get<std::map<std::string, std::string>>();
    fr.values = detail::read_f32(dir / "values.bin", fr.n_features() * fr.n_pixels());
    if (m.value("has_valid_mask", false)) {
        fr.valid = fsutil::read_bytes(dir / "valid.bin");
        if (fr.valid.size() != fr.n_pixels())
            throw SizeError((dir / "valid.bin").string() + ": bad size");
    }
    if (m.value("has_imputed_bits", false)) {
        fr.imputed_bits = fsutil::read_bytes(dir / "imputed.bin");
        if (fr.imputed_bits.size() != (fr.values.size() + 7) / 8)
            throw SizeError((dir / "imputed.bin").string() + ": bad size");
    }
    fr.check_shape();
    return fr;
}

namespace detail {

inline void write_class_table(const std::filesystem::path& p,
                              const std::map<std::int32_t, std::string>& table,
                              const std::vector<std::pair<std::string, std::string>>& header) {
    std::string out;
    for (const auto& [k, v] : header) out += "# " + k + "=" + v + "\n";
    for (const auto& [id, name] : table) out += std::to_string(id) + "," + name + "\n";
    fsutil::write_text(p, out);
}

inline std::map<std::int32_t, std::string> read_class_table(
    const std::filesystem::path& p, std::map<std::string, std::string>* header = nullptr) {
    std::istringstream in(fsutil::read_text(p));
    std::map<std::int32_t, std::string> table;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (header) {
                auto eq = line.find('=');
                auto start = line.find_first_not_of("# ");
                if (eq != std::string::npos && start != std::string::npos)
                    (*header)[line.substr(start, eq - start)] = line.substr(eq + 1);
            }
            continue;
        }
        auto comma = line.find(',');
        if (comma == std::string::npos) throw FormatError(p.string() + ": bad class table row: " + line);
        table[std::stoi(line.substr(0, comma))] = line.substr(comma + 1);
    }
    return table;
}

}  // namespace detail

inline void write_label_set(const LabelSet& labels, const std::filesystem::path& dir) {
    labels.validate();
    std::filesystem::create_directories(dir);
    std::string out;
    out.reserve(labels.total_pixels() * 16);
    for (const auto& e : labels.entries)
        for (const auto& px : e.pixels)
            out += std::to_string(e.polygon_id) + "," + std::to_string(e.class_id) + "," +
                   std::to_string(px.first) + "," + std::to_string(px.second) + "\n";
    fsutil::write_text(dir / "labels.csv", out);
    detail::write_class_table(dir / "classes.csv", labels.class_table,
                              {{"task", to_string(labels.task)}, {"year", std::to_string(labels.year)}});
}

inline LabelSet read_label_set(const std::filesystem::path& dir) {
    LabelSet labels;
    std::map<std::string, std::string> header;
    labels.class_table = detail::read_class_table(dir / "classes.csv", &header);
    if (header.count("task")) labels.task = task_from_string(header["task"]);
    if (header.count("year")) labels.year = std::stoi(header["year"]);

    std::map<std::int64_t, std::size_t> index;
    std::istringstream in(fsutil::read_text(dir / "labels.csv"));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        long long poly_raw = 0;
        std::int32_t cls = 0;
        std::uint32_t row = 0, col = 0;
        if (std::sscanf(line.c_str(), "%lld,%d,%u,%u", &poly_raw, &cls, &row, &col) != 4)
            throw FormatError("labels.csv line " + std::to_string(lineno) + ": bad row: " + line);
        auto poly = static_cast<std::int64_t>(poly_raw);
        auto it = index.find(poly);
        if (it == index.end()) {
            index[poly] = labels.entries.size();
            labels.entries.push_back({poly, cls, {}});
            it = index.find(poly);
        }
        labels.entries[it->second].pixels.emplace_back(row, col);
    }
    labels.validate();
    return labels;
}

inline void write_class_map(const ClassMap& map, const std::filesystem::path& dir) {
    map.check_shape();
    std::filesystem::create_directories(dir);
    static_assert(sizeof(std::int32_t) == 4);
    fsutil::write_bytes(dir / "classmap.bin", map.class_ids.data(), map.class_ids.size() * 4);
    detail::write_class_table(dir / "classes.csv", map.class_table,
                              {{"width", std::to_string(map.width)},
                               {"height", std::to_string(map.height)},
                               {"year", std::to_string(map.year)}});
}

inline ClassMap read_class_map(const std::filesystem::path& dir) {
    ClassMap map;
    std::map<std::string, std::string> header;
    map.class_table = detail::read_class_table(dir / "classes.csv", &header);
    if (!header.count("width") || !header.count("height"))
        throw FormatError((dir / "classes.csv").string() + ": missing width/height header");
    map.width = std::stoul(header["width"]);
    map.height = std::stoul(header["height"]);
    if (header.count("year")) map.year = std::stoi(header["year"]);
    auto bytes = fsutil::read_bytes(dir / "classmap.bin");
    if (bytes.size() != map.width * map.height * 4)
        throw SizeError((dir / "classmap.bin").string() + ": expected " +
                        std::to_string(map.width * map.height * 4) + " bytes, found " +
                        std::to_string(bytes.size()));
    map.class_ids.resize(map.width * map.height);
    std::memcpy(map.class_ids.data(), bytes.data(), bytes.size());
    map.check_shape();
    return map;
}

inline void write_prob_map(const ClassProbabilityMap& pm, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json m;
    m["width"] = pm.width;
    m["height"] = pm.height;
    m["year"] = pm.year;
    m["class_ids"] = pm.class_ids;
    fsutil::write_text(dir / "probmap.json", m.dump(2) + "\n");
    detail::write_f32(dir / "probs.bin", pm.probs);
    detail::write_class_table(dir / "classes.csv", pm.class_table,
                              {{"width", std::to_string(pm.width)},
                               {"height", std::to_string(pm.height)},
                               {"year", std::to_string(pm.year)}});
}

inline ClassProbabilityMap read_prob_map(const std::filesystem::path& dir) {
    json m = detail::parse_json_file(dir / "probmap.json");
    ClassProbabilityMap pm;
    pm.width = detail::require_field<std::size_t>(m, "width", "probmap.json");
    pm.height = detail::require_field<std::size_t>(m, "height", "probmap.json");
    pm.year = detail::require_field<int>(m, "year", "probmap.json");
    pm.class_ids = detail::require_field<std::vector<std::int32_t>>(m, "class_ids", "probmap.json");
    pm.class_table = detail::read_class_table(dir / "classes.csv");
    pm.probs = detail::read_f32(dir / "probs.bin", pm.class_ids.size() * pm.width * pm.height);
    return pm;
}

// ---------------------------------------------------------------------------
// Label rasterization
// ---------------------------------------------------------------------------

struct PolygonRing {
    std::int64_t polygon_id = 0;
    std::int32_t class_id = 0;
    std::vector<std::pair<double, double>> vertices;  // (x, y) in pixel coords
};

// Even-odd rule at the pixel center (col + 0.5, row + 0.5). Standard ray
// crossing with the half-open [ymin, ymax) edge convention.
inline bool point_in_ring(const std::vector<std::pair<double, double>>& ring, double x, double y) {
    bool inside = false;
    std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        double xi = ring[i].first, yi = ring[i].second;
        double xj = ring[j].first, yj = ring[j].second;
        if ((yi > y) != (yj > y)) {
            double x_cross = xj + (y - yj) / (yi - yj) * (xi - xj);
            if (x < x_cross) inside = !inside;
        }
    }
    return inside;
}

struct RasterizeResult {
    LabelSet labels;
    std::size_t overlap_pixels = 0;  // pixels claimed by more than one polygon
};

// A pixel belongs to a polygon iff its center lies inside the ring (even-odd
// rule). Overlaps resolve to the later polygon in the list; the overlap count
// is reported so callers can warn.
inline RasterizeResult rasterize_labels(const std::vector<PolygonRing>& polygons,
                                        std::size_t width, std::size_t height,
                                        const std::map<std::int32_t, std::string>& class_table,
                                        Task task = Task::landcover, int year = 0) {
    for (const auto& poly : polygons) {
        if (poly.vertices.size() < 3)
            throw GeometryError("polygon " + std::to_string(poly.polygon_id) +
                                ": ring needs at least 3 vertices, has " +
                                std::to_string(poly.vertices.size()));
    }

    // owner per pixel: index into polygons + 1; 0 = unclaimed
    std::vector<std::uint32_t> owner(width * height, 0);
    std::size_t overlaps = 0;
    for (std::size_t pi = 0; pi < polygons.size(); ++pi) {
        const auto& poly = polygons[pi];
        double xmin = poly.vertices[0].first, xmax = xmin;
        double ymin = poly.vertices[0].second, ymax = ymin;
        for (const auto& v : poly.vertices) {
            xmin = std::min(xmin, v.first);
            xmax = std::max(xmax, v.first);
            ymin = std::min(ymin, v.second);
            ymax = std::max(ymax, v.second);
        }
        std::size_t c0 = xmin < 0.5 ? 0 : static_cast<std::size_t>(xmin - 0.5);
        std::size_t r0 = ymin < 0.5 ? 0 : static_cast<std::size_t>(ymin - 0.5);
        std::size_t c1 = std::min(width, static_cast<std::size_t>(std::max(0.0, xmax + 0.5)) + 1);
        std::size_t r1 = std::min(height, static_cast<std::size_t>(std::max(0.0, ymax + 0.5)) + 1);
        for (std::size_t r = r0; r < r1; ++r) {
            for (std::size_t c = c0; c < c1; ++c) {
                if (point_in_ring(poly.vertices, c + 0.5, r + 0.5)) {
                    auto& slot = owner[r * width + c];
                    if (slot != 0) ++overlaps;
                    slot = static_cast<std::uint32_t>(pi + 1);
                }
            }
        }
    }

    RasterizeResult res;
    res.overlap_pixels = overlaps;
    res.labels.task = task;
    res.labels.year = year;
    res.labels.class_table = class_table;
    res.labels.entries.reserve(polygons.size());
    std::map<std::int64_t, std::size_t> entry_index;
    for (const auto& poly : polygons) {
        entry_index[poly.polygon_id] = res.labels.entries.size();
        res.labels.entries.push_back({poly.polygon_id, poly.class_id, {}});
    }
    for (std::size_t r = 0; r < height; ++r)
        for (std::size_t c = 0; c < width; ++c) {
            std::uint32_t o = owner[r * width + c];
            if (o == 0) continue;
            const auto& poly = polygons[o - 1];
            res.labels.entries[entry_index[poly.polygon_id]].pixels.emplace_back(
                static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c));
        }
    // polygons rasterizing to nothing keep an empty entry; drop them
    std::vector<LabelEntry> kept;
    for (auto& e : res.labels.entries)
        if (!e.pixels.empty()) kept.push_back(std::move(e));
    res.labels.entries = std::move(kept);
    return res;
}

// ---------------------------------------------------------------------------
// Class merging
// ---------------------------------------------------------------------------

// Relabels entries per the rules map, drops classes with no remaining
// entries from the class table, preserves polygon identity.
inline LabelSet merge_classes(const LabelSet& labels,
                              const std::map<std::int32_t, std::int32_t>& rules) {
    for (const auto& [old_id, new_id] : rules) {
        if (labels.class_table.find(old_id) == labels.class_table.end())
            throw ConfigError("merge rule source class " + std::to_string(old_id) +
                              " not in class table");
        if (labels.class_table.find(new_id) == labels.class_table.end())
            throw ConfigError("merge rule target class " + std::to_string(new_id) +
                              " not in class table");
    }
    LabelSet out = labels;
    for (auto& e : out.entries) {
        auto it = rules.find(e.class_id);
        if (it != rules.end()) e.class_id = it->second;
    }
    std::set<std::int32_t> present;
    for (const auto& e : out.entries) present.insert(e.class_id);
    // Only classes a rule mapped away lose their table row; untouched classes
    // stay even when they had no entries to begin with.
    for (const auto& [old_id, new_id] : rules) {
        if (old_id != new_id && present.find(old_id) == present.end())
            out.class_table.erase(old_id);
    }
    return out;
}

}  // namespace cropmap
