#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cropmap/common.hpp"
#include "cropmap/rastercube.hpp"

namespace cropmap {

// ---------------------------------------------------------------------------
// Core cropland and between-year change accounting
// ---------------------------------------------------------------------------

struct CoreCroplandMask {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> mask;  // row-major, 1 = cropland in every year
    std::vector<int> contributing_years;
    double percent_of_area = 0.0;

    std::size_t true_count() const {
        std::size_t n = 0;
        for (auto v : mask) n += v;
        return n;
    }
};

// Pixelwise AND of (class == cropland) across the maps.
inline CoreCroplandMask core_cropland(const std::vector<const ClassMap*>& maps,
                                      std::int32_t cropland_class_id) {
    if (maps.empty()) throw ContractError("core_cropland: no maps");
    const ClassMap& head = *maps.front();
    for (const ClassMap* m : maps)
        if (m->width != head.width || m->height != head.height)
            throw ContractError("core_cropland: map grids differ");

    CoreCroplandMask out;
    out.width = head.width;
    out.height = head.height;
    out.mask.assign(head.width * head.height, 1);
    for (const ClassMap* m : maps) {
        out.contributing_years.push_back(m->year);
        for (std::size_t p = 0; p < out.mask.size(); ++p)
            if (m->class_ids[p] != cropland_class_id) out.mask[p] = 0;
    }
    out.percent_of_area =
        100.0 * static_cast<double>(out.true_count()) / static_cast<double>(out.mask.size());
    return out;
}

inline CoreCroplandMask core_cropland(const std::vector<ClassMap>& maps,
                                      std::int32_t cropland_class_id) {
    std::vector<const ClassMap*> ptrs;
    ptrs.reserve(maps.size());
    for (const auto& m : maps) ptrs.push_back(&m);
    return core_cropland(ptrs, cropland_class_id);
}

struct ChangeReport {
    int year_a = 0;
    int year_b = 0;
    double decrease_pct = 0.0;   // crop in a, not crop in b
    double increase_pct = 0.0;   // not crop in a, crop in b
    double aggregate_pct = 0.0;  // sum of the two
    std::size_t decrease_pixels = 0;
    std::size_t increase_pixels = 0;
    std::size_t stable_crop_pixels = 0;
    std::size_t stable_noncrop_pixels = 0;
};

// Percentages are of total mapped area.
inline ChangeReport cropland_change(const ClassMap& map_a, const ClassMap& map_b,
                                    std::int32_t cropland_class_id) {
    if (map_a.width != map_b.width || map_a.height != map_b.height)
        throw ContractError("cropland_change: map grids differ");
    ChangeReport rep;
    rep.year_a = map_a.year;
    rep.year_b = map_b.year;
    std::size_t total = map_a.width * map_a.height;
    for (std::size_t p = 0; p < total; ++p) {
        bool crop_a = map_a.class_ids[p] == cropland_class_id;
        bool crop_b = map_b.class_ids[p] == cropland_class_id;
        if (crop_a && !crop_b)
            ++rep.decrease_pixels;
        else if (!crop_a && crop_b)
            ++rep.increase_pixels;
        else if (crop_a)
            ++rep.stable_crop_pixels;
        else
            ++rep.stable_noncrop_pixels;
    }
    rep.decrease_pct = 100.0 * static_cast<double>(rep.decrease_pixels) / static_cast<double>(total);
    rep.increase_pct = 100.0 * static_cast<double>(rep.increase_pixels) / static_cast<double>(total);
    rep.aggregate_pct = rep.decrease_pct + rep.increase_pct;
    return rep;
}

// Crop-type map restricted to the core-cropland mask: outside pixels get
// NODATA, inside pixels take the crop-type argmax.
inline ClassMap apply_crop_mask(const ClassProbabilityMap& prob_map, const CoreCroplandMask& mask,
                                std::size_t* tie_count = nullptr) {
    if (prob_map.width != mask.width || prob_map.height != mask.height)
        throw ContractError("apply_crop_mask: grids differ");
    ClassMap out = prob_map.argmax(tie_count);
    for (std::size_t p = 0; p < out.class_ids.size(); ++p)
        if (!mask.mask[p]) out.class_ids[p] = kNoDataClass;
    return out;
}

// 0/1 mask in the ClassMap binary container.
inline ClassMap mask_to_class_map(const CoreCroplandMask& mask) {
    ClassMap out;
    out.width = mask.width;
    out.height = mask.height;
    out.class_table = {{0, "outside"}, {1, "core_cropland"}};
    out.class_ids.reserve(mask.mask.size());
    for (auto v : mask.mask) out.class_ids.push_back(v ? 1 : 0);
    if (!mask.contributing_years.empty()) out.year = mask.contributing_years.front();
    return out;
}

}  // namespace cropmap
