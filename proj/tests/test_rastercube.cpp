#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "cropmap/rastercube.hpp"
#include "oracles.hpp"

using namespace cropmap;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
    auto p = fs::temp_directory_path() / "cropmap_tests" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

TimeSeriesCube random_cube(Rng& rng, std::size_t w, std::size_t h, std::size_t dates,
                           std::size_t bands) {
    TimeSeriesCube cube;
    cube.manifest.width = w;
    cube.manifest.height = h;
    cube.manifest.year = 2018;
    for (std::size_t d = 0; d < dates; ++d) {
        char buf[11];
        std::snprintf(buf, sizeof(buf), "2018-%02zu-%02zu", d / 27 + 1, d % 27 + 1);
        cube.manifest.dates.push_back(buf);
    }
    for (std::size_t b = 0; b < bands; ++b) cube.manifest.bands.push_back("B" + std::to_string(b));
    cube.values.resize(dates * bands * w * h);
    for (auto& v : cube.values) v = static_cast<float>(rng.next_double());
    cube.valid.resize(dates * w * h);
    for (auto& v : cube.valid) v = rng.next_double() < 0.9 ? 1 : 0;
    return cube;
}

}  // namespace

TEST_CASE("cube layout read-back") {
    auto dir = temp_dir("cube_layout");
    TimeSeriesCube cube;
    cube.manifest.width = 2;
    cube.manifest.height = 2;
    cube.manifest.dates = {"2018-01-01"};
    cube.manifest.bands = {"B0"};
    cube.manifest.year = 2018;
    cube.values = {0.1f, 0.2f, 0.3f, 0.4f};
    cube.valid = {1, 1, 1, 1};
    write_cube(cube, dir);
    TimeSeriesCube back = read_cube(dir);
    CHECK(back.at(0, 0, 1, 1) == doctest::Approx(0.4f));
    CHECK(back.at(0, 0, 0, 0) == doctest::Approx(0.1f));
    CHECK(back.manifest.pixel_size_m == doctest::Approx(10.0));
}

TEST_CASE("cube payload size mismatch is a size error") {
    auto dir = temp_dir("cube_badsize");
    Rng rng(7);
    TimeSeriesCube cube = random_cube(rng, 2, 2, 2, 1);
    write_cube(cube, dir);
    // manifest claims 3 dates, payload sized for 2
    json m = json::parse(fsutil::read_text(dir / "manifest.json"));
    m["dates"].push_back("2018-12-31");
    fsutil::write_text(dir / "manifest.json", m.dump());
    CHECK_THROWS_AS(read_cube(dir), SizeError);
}

TEST_CASE("missing and garbled manifests are format errors") {
    auto dir = temp_dir("cube_badmanifest");
    Rng rng(9);
    write_cube(random_cube(rng, 2, 2, 1, 1), dir);

    fsutil::write_text(dir / "manifest.json", "{not json");
    CHECK_THROWS_AS(read_cube(dir), FormatError);

    json m;
    m["width"] = 2;  // height missing
    m["dates"] = {"2018-01-01"};
    m["bands"] = {"B0"};
    m["pixel_size_m"] = 10.0;
    m["year"] = 2018;
    fsutil::write_text(dir / "manifest.json", m.dump());
    CHECK_THROWS_WITH_AS(read_cube(dir), doctest::Contains("height"), FormatError);
}

TEST_CASE("manifest invariants rejected") {
    CubeManifest m;
    m.width = 1;
    m.height = 1;
    m.bands = {"B0", "B0"};
    m.dates = {"2018-01-01"};
    CHECK_THROWS_AS(m.validate(), FormatError);
    m.bands = {"B0"};
    m.dates = {"2018-02-01", "2018-01-01"};
    CHECK_THROWS_AS(m.validate(), FormatError);
}

TEST_CASE("cube round-trip is byte identical over random cubes") {
    Rng rng(42);
    for (int it = 0; it < 100; ++it) {
        auto dir = temp_dir("cube_roundtrip");
        TimeSeriesCube cube = random_cube(rng, 8, 8, 4, 3);
        write_cube(cube, dir);
        auto payload1 = fsutil::read_bytes(dir / "values.bin");
        auto mask1 = fsutil::read_bytes(dir / "valid.bin");
        TimeSeriesCube back = read_cube(dir);
        auto dir2 = temp_dir("cube_roundtrip2");
        write_cube(back, dir2);
        CHECK(fsutil::read_bytes(dir2 / "values.bin") == payload1);
        CHECK(fsutil::read_bytes(dir2 / "valid.bin") == mask1);
        REQUIRE(back.values.size() == cube.values.size());
        CHECK(std::memcmp(back.values.data(), cube.values.data(), cube.values.size() * 4) == 0);
    }
}

TEST_CASE("feature raster and label set and class map round-trips") {
    Rng rng(11);
    auto dir = temp_dir("fr_roundtrip");
    FeatureRaster fr;
    fr.width = 5;
    fr.height = 4;
    fr.year = 2019;
    fr.source = FeatureSource::embedding;
    fr.provider = "synthetic";
    fr.feature_names = {"e0", "e1", "e2"};
    fr.values.resize(3 * 20);
    for (auto& v : fr.values) v = static_cast<float>(rng.next_double());
    fr.valid.assign(20, 1);
    fr.valid[7] = 0;
    fr.ensure_imputed_bits();
    fr.mark_imputed(1, 2, 3);
    write_feature_raster(fr, dir);
    FeatureRaster back = read_feature_raster(dir);
    CHECK(back.feature_names == fr.feature_names);
    CHECK(back.values == fr.values);
    CHECK(back.valid == fr.valid);
    CHECK(back.is_imputed(1, 2, 3));
    CHECK_FALSE(back.is_imputed(0, 2, 3));
    CHECK(back.provider == "synthetic");

    LabelSet labels;
    labels.class_table = {{0, "cropland"}, {1, "water"}};
    labels.year = 2019;
    labels.task = Task::landcover;
    labels.entries = {{10, 0, {{0, 0}, {0, 1}}}, {11, 1, {{2, 2}}}};
    auto ldir = temp_dir("labels_roundtrip");
    write_label_set(labels, ldir);
    LabelSet lback = read_label_set(ldir);
    CHECK(lback.entries.size() == 2);
    CHECK(lback.total_pixels() == 3);
    CHECK(lback.class_table == labels.class_table);
    CHECK(lback.year == 2019);

    ClassMap map;
    map.width = 3;
    map.height = 2;
    map.year = 2021;
    map.class_table = {{0, "a"}, {1, "b"}};
    map.class_ids = {0, 1, 0, kNoDataClass, 1, 1};
    auto mdir = temp_dir("classmap_roundtrip");
    write_class_map(map, mdir);
    ClassMap mback = read_class_map(mdir);
    CHECK(mback.class_ids == map.class_ids);
    CHECK(mback.width == 3);
    CHECK(mback.year == 2021);
}

TEST_CASE("label set invariants") {
    LabelSet labels;
    labels.class_table = {{0, "a"}};
    labels.entries = {{1, 0, {{0, 0}}}, {1, 0, {{1, 1}}}};
    CHECK_THROWS_AS(labels.validate(), FormatError);  // duplicate polygon id
    labels.entries = {{1, 0, {{0, 0}}}, {2, 0, {{0, 0}}}};
    CHECK_THROWS_AS(labels.validate(), FormatError);  // pixel in two polygons
    labels.entries = {{1, 5, {{0, 0}}}};
    CHECK_THROWS_AS(labels.validate(), FormatError);  // class not in table
}

TEST_CASE("rasterize: axis-aligned square covers exactly its pixel centers") {
    std::vector<PolygonRing> polys = {{1, 0, {{0.0, 0.0}, {2.0, 0.0}, {2.0, 2.0}, {0.0, 2.0}}}};
    auto res = rasterize_labels(polys, 4, 4, {{0, "c"}});
    REQUIRE(res.labels.entries.size() == 1);
    CHECK(res.labels.entries[0].pixels.size() == 4);
    CHECK(res.overlap_pixels == 0);
    std::set<std::pair<std::uint32_t, std::uint32_t>> got(res.labels.entries[0].pixels.begin(),
                                                          res.labels.entries[0].pixels.end());
    std::set<std::pair<std::uint32_t, std::uint32_t>> want = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
    CHECK(got == want);
}

TEST_CASE("rasterize: degenerate ring is a geometry error") {
    std::vector<PolygonRing> polys = {{1, 0, {{0.0, 0.0}, {2.0, 2.0}}}};
    CHECK_THROWS_AS(rasterize_labels(polys, 4, 4, {{0, "c"}}), GeometryError);
}

TEST_CASE("rasterize matches the brute-force even-odd oracle on random convex polygons") {
    Rng rng(123);
    for (int it = 0; it < 50; ++it) {
        // convex polygon: points on a randomized ellipse
        std::vector<std::pair<double, double>> ring;
        double cx = 4.0 + rng.next_double() * 24.0;
        double cy = 4.0 + rng.next_double() * 24.0;
        double rx = 1.0 + rng.next_double() * 8.0;
        double ry = 1.0 + rng.next_double() * 8.0;
        std::size_t n = 3 + rng.next_below(7);
        double phase = rng.next_double() * 6.283;
        for (std::size_t k = 0; k < n; ++k) {
            double a = phase + 6.283185307 * static_cast<double>(k) / static_cast<double>(n);
            ring.emplace_back(cx + rx * std::cos(a), cy + ry * std::sin(a));
        }
        std::vector<PolygonRing> polys = {{1, 0, ring}};
        auto res = rasterize_labels(polys, 32, 32, {{0, "c"}});

        std::set<std::pair<std::uint32_t, std::uint32_t>> got;
        if (!res.labels.entries.empty())
            got.insert(res.labels.entries[0].pixels.begin(), res.labels.entries[0].pixels.end());
        std::set<std::pair<std::uint32_t, std::uint32_t>> want;
        for (std::uint32_t r = 0; r < 32; ++r)
            for (std::uint32_t c = 0; c < 32; ++c)
                if (oracle::point_in_polygon_even_odd(ring, c + 0.5, r + 0.5)) want.insert({r, c});
        CHECK(got == want);
    }
}

TEST_CASE("rasterize: later polygon wins overlaps and the count is reported") {
    std::vector<PolygonRing> polys = {
        {1, 0, {{0.0, 0.0}, {3.0, 0.0}, {3.0, 3.0}, {0.0, 3.0}}},
        {2, 1, {{1.0, 1.0}, {3.0, 1.0}, {3.0, 3.0}, {1.0, 3.0}}},
    };
    auto res = rasterize_labels(polys, 4, 4, {{0, "a"}, {1, "b"}});
    CHECK(res.overlap_pixels == 4);  // the inner 2x2 block
    std::size_t poly2_pixels = 0;
    for (const auto& e : res.labels.entries)
        if (e.polygon_id == 2) poly2_pixels = e.pixels.size();
    CHECK(poly2_pixels == 4);
    CHECK(res.labels.total_pixels() == 9);
}

TEST_CASE("merge_classes") {
    LabelSet labels;
    labels.class_table = {{0, "bissap"}, {1, "hibiscus"}, {2, "other"}, {3, "millet"}};
    labels.entries = {{1, 0, {{0, 0}, {0, 1}}}, {2, 1, {{1, 0}}}, {3, 3, {{2, 0}}}};

    SUBCASE("merging to a shared label sums the pixel counts") {
        auto merged = merge_classes(labels, {{0, 2}, {1, 2}});
        auto counts = merged.pixel_counts();
        CHECK(counts[2] == 3);
        CHECK(merged.class_table.count(0) == 0);
        CHECK(merged.class_table.count(1) == 0);
        CHECK(merged.class_table.count(2) == 1);
        // polygon identity preserved
        CHECK(merged.entries.size() == 3);
        CHECK(merged.entries[0].polygon_id == 1);
    }

    SUBCASE("empty rules is the identity") {
        auto merged = merge_classes(labels, {});
        CHECK(merged.class_table == labels.class_table);
        CHECK(merged.total_pixels() == labels.total_pixels());
        CHECK(merged.entries.size() == labels.entries.size());
    }

    SUBCASE("unknown source or target class is a config error") {
        CHECK_THROWS_AS(merge_classes(labels, {{9, 2}}), ConfigError);
        CHECK_THROWS_AS(merge_classes(labels, {{0, 9}}), ConfigError);
    }

    SUBCASE("random rules keep the total pixel count") {
        Rng rng(5);
        std::vector<std::int32_t> ids = {0, 1, 2, 3};
        for (int it = 0; it < 20; ++it) {
            std::map<std::int32_t, std::int32_t> rules;
            for (auto id : ids)
                if (rng.next_double() < 0.5) rules[id] = ids[rng.next_below(ids.size())];
            auto merged = merge_classes(labels, rules);
            CHECK(merged.total_pixels() == labels.total_pixels());
        }
    }
}

TEST_CASE("prob map argmax breaks ties toward the lower class id") {
    ClassProbabilityMap pm;
    pm.width = 2;
    pm.height = 1;
    pm.class_ids = {3, 7};
    pm.class_table = {{3, "a"}, {7, "b"}};
    pm.probs = {0.5f, 0.2f, /* class 7: */ 0.5f, 0.8f};
    std::size_t ties = 0;
    ClassMap map = pm.argmax(&ties);
    CHECK(map.class_ids[0] == 3);  // tie -> lower id
    CHECK(map.class_ids[1] == 7);
    CHECK(ties == 1);
}
