#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "cropmap/embeddings.hpp"
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

FeatureRaster make_embedding(Rng& rng, std::size_t w, std::size_t h, std::size_t dim) {
    FeatureRaster fr;
    fr.width = w;
    fr.height = h;
    fr.year = 2018;
    fr.source = FeatureSource::embedding;
    fr.provider = "synthetic";
    for (std::size_t f = 0; f < dim; ++f) fr.feature_names.push_back("e" + std::to_string(f));
    fr.values.resize(dim * w * h);
    for (auto& v : fr.values) v = static_cast<float>(rng.next_gaussian());
    return fr;
}

}  // namespace

TEST_CASE("ingest enforces dimension and provider") {
    Rng rng(3);
    auto fr = make_embedding(rng, 4, 4, 128);
    auto dir = temp_dir("emb_128");
    write_feature_raster(fr, dir);
    auto back = ingest_embeddings(dir, 128);
    CHECK(back.n_features() == 128);
    CHECK(back.values == fr.values);  // pass-through

    auto fr64 = make_embedding(rng, 4, 4, 64);
    auto dir64 = temp_dir("emb_64");
    write_feature_raster(fr64, dir64);
    CHECK_THROWS_WITH_AS(ingest_embeddings(dir64, 128), doctest::Contains("128"), FormatError);

    auto plain = fr;
    plain.source = FeatureSource::stm;
    auto dir_plain = temp_dir("emb_notsource");
    write_feature_raster(plain, dir_plain);
    CHECK_THROWS_AS(ingest_embeddings(dir_plain, 128), FormatError);
}

TEST_CASE("embedding round-trip is byte identical") {
    Rng rng(5);
    auto fr = make_embedding(rng, 6, 3, 16);
    auto dir = temp_dir("emb_rt");
    write_feature_raster(fr, dir);
    auto bytes1 = fsutil::read_bytes(dir / "values.bin");
    auto back = read_feature_raster(dir);
    auto dir2 = temp_dir("emb_rt2");
    write_feature_raster(back, dir2);
    CHECK(fsutil::read_bytes(dir2 / "values.bin") == bytes1);
}

TEST_CASE("zscore normalization: two-point column maps to -1, 1") {
    FeatureRaster fr;
    fr.width = 2;
    fr.height = 1;
    fr.year = 2018;
    fr.feature_names = {"f"};
    fr.values = {2.0f, 4.0f};
    auto res = normalize_features(fr, NormMethod::zscore);
    CHECK(res.raster.values[0] == doctest::Approx(-1.0));
    CHECK(res.raster.values[1] == doctest::Approx(1.0));
    CHECK(res.record.offset[0] == doctest::Approx(3.0));
}

TEST_CASE("method none is the identity") {
    Rng rng(6);
    auto fr = make_embedding(rng, 3, 3, 4);
    auto res = normalize_features(fr, NormMethod::none);
    CHECK(res.raster.values == fr.values);
    CHECK(res.record.method == NormMethod::none);
}

TEST_CASE("stored record reproduces the normalized output and inverts") {
    Rng rng(8);
    auto fr = make_embedding(rng, 5, 4, 6);
    auto res = normalize_features(fr, NormMethod::zscore, {}, "train_pixels");
    auto replay = apply_normalization(fr, res.record);
    for (std::size_t i = 0; i < fr.values.size(); ++i)
        CHECK(replay.values[i] == doctest::Approx(res.raster.values[i]).epsilon(1e-9));

    // inverse restores inputs
    for (std::size_t f = 0; f < fr.n_features(); ++f)
        for (std::size_t p = 0; p < fr.n_pixels(); ++p) {
            double normed = res.raster.values[f * fr.n_pixels() + p];
            double restored = res.record.invert_one(f, normed);
            CHECK(restored == doctest::Approx(fr.values[f * fr.n_pixels() + p]).epsilon(1e-6));
        }
    CHECK(res.record.fitted_on == "train_pixels");
}

TEST_CASE("minmax maps to [0,1] on the fitting set") {
    Rng rng(9);
    auto fr = make_embedding(rng, 8, 8, 3);
    auto res = normalize_features(fr, NormMethod::minmax);
    for (float v : res.raster.values) {
        CHECK(v >= -1e-6f);
        CHECK(v <= 1.0f + 1e-6f);
    }
}

TEST_CASE("zero variance feature gets scale 1 and a warning") {
    FeatureRaster fr;
    fr.width = 3;
    fr.height = 1;
    fr.year = 2018;
    fr.feature_names = {"flat", "ok"};
    fr.values = {5.0f, 5.0f, 5.0f, 1.0f, 2.0f, 3.0f};
    auto res = normalize_features(fr, NormMethod::zscore);
    CHECK(res.record.scale[0] == doctest::Approx(1.0));
    CHECK(res.record.offset[0] == doctest::Approx(5.0));
    REQUIRE(res.warnings.size() == 1);
    CHECK(res.raster.values[0] == doctest::Approx(0.0));
}

TEST_CASE("fitting on a pixel subset uses only those pixels") {
    FeatureRaster fr;
    fr.width = 4;
    fr.height = 1;
    fr.year = 2018;
    fr.feature_names = {"f"};
    fr.values = {0.0f, 10.0f, 1000.0f, -1000.0f};
    auto res = normalize_features(fr, NormMethod::zscore, {{0, 0}, {0, 1}}, "train_pixels");
    CHECK(res.record.offset[0] == doctest::Approx(5.0));
    CHECK(res.record.scale[0] == doctest::Approx(5.0));
}

TEST_CASE("matrix-fit normalization agrees with a direct computation") {
    Rng rng(10);
    Matrix X(50, 3);
    for (auto& v : X.data()) v = rng.next_gaussian() * 2.0 + 1.0;
    auto rec = fit_normalization(X, NormMethod::zscore, "train_pixels");
    for (std::size_t f = 0; f < 3; ++f) {
        std::vector<double> col;
        for (std::size_t i = 0; i < 50; ++i) col.push_back(X(i, f));
        CHECK(rec.offset[f] == doctest::Approx(oracle::mean(col)).epsilon(1e-9));
        CHECK(rec.scale[f] == doctest::Approx(oracle::pop_std(col)).epsilon(1e-9));
    }
    Matrix Xn = X;
    rec.apply_rows(Xn);
    auto rec2 = fit_normalization(Xn, NormMethod::zscore, "check");
    for (std::size_t f = 0; f < 3; ++f) {
        CHECK(rec2.offset[f] == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(rec2.scale[f] == doctest::Approx(1.0).epsilon(1e-9));
    }
}
