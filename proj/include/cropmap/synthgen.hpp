#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cropmap/common.hpp"
#include "cropmap/rastercube.hpp"
#include "cropmap/stm.hpp"

namespace cropmap {

// ---------------------------------------------------------------------------
// Synthetic multi-year scenes with known per-pixel truth
//
// Fields come from a seeded Voronoi partition at smallholder scale; class
// signatures are double-logistic seasonal curves; embeddings are prototype
// vectors plus noise. All randomness is counter-based, so any tile
// partitioning generates the same scene.
// ---------------------------------------------------------------------------

struct SyntheticClass {
    std::string name;
    double base = 0.10;            // off-season reflectance level
    double amplitude = 0.45;       // seasonal gain
    double green_up_day = 190.0;   // day-of-year of green-up midpoint
    double senescence_day = 295.0; // day-of-year of decline midpoint
    double rate_up = 0.09;
    double rate_down = 0.09;
    double share = 1.0;            // relative field-count share
    std::vector<double> embedding_prototype;
};

struct YearSpec {
    int year = 2018;
    double signature_drift = 0.0;  // shifts phenology days, scales amplitude
    double rotation_rate = 0.0;    // per-field chance of a new class this year
};

struct SceneSpec {
    std::size_t width = 128;
    std::size_t height = 128;
    std::vector<SyntheticClass> classes;
    double mean_field_px = 150.0;       // < 200 px keeps fields smallholder-sized
    double noise_sigma = 0.02;          // per-pixel observation noise
    double field_jitter_sigma = 0.0;    // per-field, per-year signature offset
    std::vector<YearSpec> years = {{2018, 0.0, 0.0}};
    double labeled_fraction = 0.3;      // fraction of fields emitted as polygons
    double cloud_fraction = 0.0;        // per (date, pixel) invalidity rate
    double bayes_error_bound = 0.05;
    std::uint64_t seed = 1;

    std::vector<std::string> optical_bands = {"S2_B02", "S2_B03", "S2_B04", "S2_B05", "S2_B06",
                                              "S2_B07", "S2_B08", "S2_B8A", "S2_B11", "S2_B12"};
    std::vector<std::string> sar_bands = {"S1_VV", "S1_VH"};
    std::size_t optical_dates = 36;     // every ~10 days
    std::size_t sar_dates = 30;         // every ~12 days

    void validate() const {
        if (classes.size() < 2) throw ConfigError("scene needs at least 2 classes");
        if (noise_sigma < 0.0 || field_jitter_sigma < 0.0)
            throw ConfigError("noise sigmas must be >= 0");
        if (width < 1 || height < 1) throw ConfigError("scene grid must be at least 1x1");
        if (years.empty()) throw ConfigError("scene needs at least one year");
        if (!(labeled_fraction > 0.0 && labeled_fraction <= 1.0))
            throw ConfigError("labeled_fraction must lie in (0, 1]");
        std::size_t dim = classes.front().embedding_prototype.size();
        if (dim == 0) throw ConfigError("classes need embedding prototypes");
        for (std::size_t a = 0; a < classes.size(); ++a) {
            if (classes[a].embedding_prototype.size() != dim)
                throw ConfigError("embedding prototypes must share one dimension");
            for (std::size_t b = a + 1; b < classes.size(); ++b)
                if (classes[a].embedding_prototype == classes[b].embedding_prototype)
                    throw ConfigError("embedding prototypes must be distinct");
        }
    }
};

struct SyntheticYear {
    TimeSeriesCube optical;
    TimeSeriesCube sar;
    FeatureRaster embeddings;
    LabelSet labels;
    ClassMap truth;
};

struct SyntheticScene {
    std::vector<SyntheticYear> years;
    std::vector<std::string> warnings;
    std::size_t n_fields = 0;
    double estimated_overlap = 0.0;  // pairwise prototype confusion estimate
};

// A reasonable default scene palette: a cropland-heavy landscape with five
// contrasting covers. Prototypes sit on scaled coordinate axes.
inline SceneSpec default_scene_spec(std::size_t embedding_dim = 16, std::size_t n_classes = 6) {
    SceneSpec spec;
    const char* names[] = {"cropland", "shrubland", "water", "bare_soil", "wetland", "built_up",
                           "forest", "grassland"};
    for (std::size_t c = 0; c < n_classes; ++c) {
        SyntheticClass cls;
        cls.name = names[c % 8];
        cls.base = 0.06 + 0.02 * static_cast<double>(c);
        cls.amplitude = (c == 2) ? 0.02 : 0.25 + 0.06 * static_cast<double>(c);  // water stays flat
        cls.green_up_day = 175.0 + 12.0 * static_cast<double>(c);
        cls.senescence_day = 280.0 + 8.0 * static_cast<double>(c);
        cls.share = (c == 0) ? 3.0 : 1.0;
        cls.embedding_prototype.assign(embedding_dim, 0.1);
        cls.embedding_prototype[c % embedding_dim] = 1.0;
        cls.embedding_prototype[(c * 3 + 1) % embedding_dim] = 0.6;
        spec.classes.push_back(cls);
    }
    return spec;
}

namespace detail {

inline double dlogistic(double day, const SyntheticClass& cls, double drift) {
    double up = cls.green_up_day + drift;
    double down = cls.senescence_day + drift;
    double amp = cls.amplitude * (1.0 + 0.01 * drift);
    double s_up = 1.0 / (1.0 + std::exp(-cls.rate_up * (day - up)));
    double s_down = 1.0 / (1.0 + std::exp(-cls.rate_down * (day - down)));
    return cls.base + amp * (s_up - s_down);
}

inline std::string make_date(int year, int day_of_year) {
    static const int month_days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    int m = 0, d = day_of_year;
    while (d > month_days[m]) {
        d -= month_days[m];
        ++m;
    }
    char buf[11];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, m + 1, d);
    return buf;
}

// stream tags for the counter-based draws
enum : std::uint64_t {
    kStreamSites = 1,
    kStreamClassAssign = 2,
    kStreamRotation = 3,
    kStreamJitter = 4,
    kStreamCube = 5,
    kStreamEmbedding = 6,
    kStreamCloud = 7,
    kStreamLabelPick = 8,
    kStreamSar = 9,
};

}  // namespace detail

// Deterministic in spec.seed. Labels agree with the truth map at every
// labeled pixel; every pixel of the truth map is classified.
inline SyntheticScene generate_scene(const SceneSpec& spec) {
    spec.validate();
    SyntheticScene scene;
    std::size_t W = spec.width, H = spec.height, n_px = W * H;
    std::size_t K = spec.classes.size();
    std::size_t dim = spec.classes.front().embedding_prototype.size();

    // Voronoi field partition.
    std::size_t n_fields = std::max<std::size_t>(
        K, static_cast<std::size_t>(std::llround(static_cast<double>(n_px) / spec.mean_field_px)));
    scene.n_fields = n_fields;
    std::vector<std::pair<double, double>> sites(n_fields);
    std::uint64_t site_seed = derive_seed(spec.seed, detail::kStreamSites);
    for (std::size_t s = 0; s < n_fields; ++s) {
        sites[s] = {counter_uniform(site_seed, 2 * s) * static_cast<double>(W),
                    counter_uniform(site_seed, 2 * s + 1) * static_cast<double>(H)};
    }
    std::vector<std::uint32_t> field_of(n_px);
    parallel_for(H, [&](std::size_t r) {
        for (std::size_t c = 0; c < W; ++c) {
            double px = static_cast<double>(c) + 0.5;
            double py = static_cast<double>(r) + 0.5;
            std::size_t best = 0;
            double best_d = 1e300;
            for (std::size_t s = 0; s < n_fields; ++s) {
                double dx = sites[s].first - px, dy = sites[s].second - py;
                double d = dx * dx + dy * dy;
                if (d < best_d) {
                    best_d = d;
                    best = s;
                }
            }
            field_of[r * W + c] = static_cast<std::uint32_t>(best);
        }
    });

    // class share distribution
    std::vector<double> cum_share(K);
    double total_share = 0.0;
    for (std::size_t c = 0; c < K; ++c) {
        total_share += spec.classes[c].share;
        cum_share[c] = total_share;
    }
    auto share_pick = [&](double u) {
        double x = u * total_share;
        for (std::size_t c = 0; c < K; ++c)
            if (x < cum_share[c]) return static_cast<std::int32_t>(c);
        return static_cast<std::int32_t>(K - 1);
    };

    std::map<std::int32_t, std::string> class_table;
    for (std::size_t c = 0; c < K; ++c)
        class_table[static_cast<std::int32_t>(c)] = spec.classes[c].name;

    // prototype overlap estimate: worst pairwise confusion under the total
    // noise magnitude
    double sigma_total = std::sqrt(spec.noise_sigma * spec.noise_sigma +
                                   spec.field_jitter_sigma * spec.field_jitter_sigma);
    if (sigma_total > 0.0) {
        double worst = 0.0;
        for (std::size_t a = 0; a < K; ++a)
            for (std::size_t b = a + 1; b < K; ++b) {
                double d2 = 0.0;
                for (std::size_t j = 0; j < dim; ++j) {
                    double diff = spec.classes[a].embedding_prototype[j] -
                                  spec.classes[b].embedding_prototype[j];
                    d2 += diff * diff;
                }
                double err = 0.5 * std::erfc(std::sqrt(d2) / (2.0 * sigma_total * std::sqrt(2.0)));
                worst = std::max(worst, err);
            }
        scene.estimated_overlap = worst;
        if (worst > spec.bayes_error_bound)
            scene.warnings.push_back("prototype overlap: estimated pairwise confusion " +
                                     std::to_string(worst) + " exceeds bound " +
                                     std::to_string(spec.bayes_error_bound));
    }

    // per-band response pattern (fixed, deterministic)
    std::size_t Bo = spec.optical_bands.size();
    std::vector<double> band_base(Bo), band_gain(Bo);
    for (std::size_t b = 0; b < Bo; ++b) {
        band_base[b] = 0.04 + 0.012 * static_cast<double>(b % 5);
        band_gain[b] = 0.55 + 0.35 * ((static_cast<double>((b * 7) % Bo)) / static_cast<double>(Bo));
    }

    std::uint64_t assign_seed = derive_seed(spec.seed, detail::kStreamClassAssign);
    std::uint64_t rot_seed = derive_seed(spec.seed, detail::kStreamRotation);
    std::uint64_t jitter_seed = derive_seed(spec.seed, detail::kStreamJitter);

    std::vector<std::int32_t> field_class(n_fields);
    for (std::size_t fld = 0; fld < n_fields; ++fld)
        field_class[fld] = share_pick(counter_uniform(assign_seed, fld));

    for (std::size_t yi = 0; yi < spec.years.size(); ++yi) {
        const YearSpec& ys = spec.years[yi];
        SyntheticYear out;

        // rotation: some fields change class this year (first year keeps the
        // base assignment)
        std::vector<std::int32_t> cls_of_field = field_class;
        if (yi > 0 && ys.rotation_rate > 0.0) {
            for (std::size_t fld = 0; fld < n_fields; ++fld) {
                std::uint64_t ctr = yi * n_fields + fld;
                if (counter_uniform(rot_seed, ctr * 2) < ys.rotation_rate)
                    cls_of_field[fld] = share_pick(counter_uniform(rot_seed, ctr * 2 + 1));
            }
        }

        // truth map
        out.truth.width = W;
        out.truth.height = H;
        out.truth.year = ys.year;
        out.truth.class_table = class_table;
        out.truth.class_ids.resize(n_px);
        for (std::size_t p = 0; p < n_px; ++p) out.truth.class_ids[p] = cls_of_field[field_of[p]];

        // per-field jitter for this year: a scalar for the curves plus a
        // vector for the embedding space
        std::vector<double> field_scalar(n_fields, 0.0);
        std::vector<double> field_vec(n_fields * dim, 0.0);
        if (spec.field_jitter_sigma > 0.0) {
            for (std::size_t fld = 0; fld < n_fields; ++fld) {
                std::uint64_t base_ctr = (yi * n_fields + fld) * (dim + 1);
                field_scalar[fld] =
                    counter_gaussian(jitter_seed, base_ctr) * spec.field_jitter_sigma;
                for (std::size_t j = 0; j < dim; ++j)
                    field_vec[fld * dim + j] =
                        counter_gaussian(jitter_seed, base_ctr + 1 + j) * spec.field_jitter_sigma;
            }
        }

        // acquisition calendars
        std::vector<int> optical_doy(spec.optical_dates), sar_doy(spec.sar_dates);
        for (std::size_t d = 0; d < spec.optical_dates; ++d)
            optical_doy[d] = static_cast<int>(5 + d * 360 / spec.optical_dates);
        for (std::size_t d = 0; d < spec.sar_dates; ++d)
            sar_doy[d] = static_cast<int>(3 + d * 360 / spec.sar_dates);

        // seasonal curve per (class, date), cached
        std::vector<double> curve(K * spec.optical_dates), sar_curve(K * spec.sar_dates);
        for (std::size_t c = 0; c < K; ++c) {
            for (std::size_t d = 0; d < spec.optical_dates; ++d)
                curve[c * spec.optical_dates + d] =
                    detail::dlogistic(optical_doy[d], spec.classes[c], ys.signature_drift);
            for (std::size_t d = 0; d < spec.sar_dates; ++d)
                sar_curve[c * spec.sar_dates + d] =
                    detail::dlogistic(sar_doy[d], spec.classes[c], ys.signature_drift);
        }

        // optical cube
        out.optical.manifest.width = W;
        out.optical.manifest.height = H;
        out.optical.manifest.year = ys.year;
        out.optical.manifest.bands = spec.optical_bands;
        for (std::size_t d = 0; d < spec.optical_dates; ++d)
            out.optical.manifest.dates.push_back(detail::make_date(ys.year, optical_doy[d]));
        out.optical.values.resize(spec.optical_dates * Bo * n_px);
        out.optical.valid.assign(spec.optical_dates * n_px, 1);

        std::uint64_t cube_seed = derive_seed(spec.seed, detail::kStreamCube + 100 * yi);
        std::uint64_t cloud_seed = derive_seed(spec.seed, detail::kStreamCloud + 100 * yi);
        parallel_for(H, [&](std::size_t r) {
            for (std::size_t c = 0; c < W; ++c) {
                std::size_t p = r * W + c;
                std::uint32_t fld = field_of[p];
                std::int32_t cls = cls_of_field[fld];
                for (std::size_t d = 0; d < spec.optical_dates; ++d) {
                    if (spec.cloud_fraction > 0.0 &&
                        counter_uniform(cloud_seed, d * n_px + p) < spec.cloud_fraction)
                        out.optical.valid[d * n_px + p] = 0;
                    double s = curve[static_cast<std::size_t>(cls) * spec.optical_dates + d] +
                               field_scalar[fld];
                    for (std::size_t b = 0; b < Bo; ++b) {
                        double noise =
                            spec.noise_sigma > 0.0
                                ? counter_gaussian(cube_seed, (d * Bo + b) * n_px + p) * spec.noise_sigma
                                : 0.0;
                        double v = band_base[b] + band_gain[b] * s + noise;
                        out.optical.values[(d * Bo + b) * n_px + p] = static_cast<float>(v);
                    }
                }
            }
        });

        // SAR cube: VV/VH follow the same curve at backscatter scale, never
        // cloud-masked
        std::size_t Bs = spec.sar_bands.size();
        out.sar.manifest.width = W;
        out.sar.manifest.height = H;
        out.sar.manifest.year = ys.year;
        out.sar.manifest.bands = spec.sar_bands;
        for (std::size_t d = 0; d < spec.sar_dates; ++d)
            out.sar.manifest.dates.push_back(detail::make_date(ys.year, sar_doy[d]));
        out.sar.values.resize(spec.sar_dates * Bs * n_px);
        out.sar.valid.assign(spec.sar_dates * n_px, 1);
        std::uint64_t sar_seed = derive_seed(spec.seed, detail::kStreamSar + 100 * yi);
        parallel_for(H, [&](std::size_t r) {
            for (std::size_t c = 0; c < W; ++c) {
                std::size_t p = r * W + c;
                std::uint32_t fld = field_of[p];
                std::int32_t cls = cls_of_field[fld];
                for (std::size_t d = 0; d < spec.sar_dates; ++d) {
                    double s = sar_curve[static_cast<std::size_t>(cls) * spec.sar_dates + d] +
                               field_scalar[fld];
                    for (std::size_t b = 0; b < Bs; ++b) {
                        double noise =
                            spec.noise_sigma > 0.0
                                ? counter_gaussian(sar_seed, (d * Bs + b) * n_px + p) *
                                      spec.noise_sigma * 0.5
                                : 0.0;
                        double scale = b == 0 ? 0.08 : 0.04;
                        double v = 0.02 + scale * s + noise;
                        out.sar.values[(d * Bs + b) * n_px + p] = static_cast<float>(v);
                    }
                }
            }
        });

        // embeddings: prototype + field vector + pixel noise
        out.embeddings.width = W;
        out.embeddings.height = H;
        out.embeddings.year = ys.year;
        out.embeddings.source = FeatureSource::embedding;
        out.embeddings.provider = "synthetic";
        for (std::size_t j = 0; j < dim; ++j)
            out.embeddings.feature_names.push_back("emb_" + std::to_string(j));
        out.embeddings.values.resize(dim * n_px);
        std::uint64_t emb_seed = derive_seed(spec.seed, detail::kStreamEmbedding + 100 * yi);
        parallel_for(H, [&](std::size_t r) {
            for (std::size_t c = 0; c < W; ++c) {
                std::size_t p = r * W + c;
                std::uint32_t fld = field_of[p];
                const auto& proto =
                    spec.classes[static_cast<std::size_t>(cls_of_field[fld])].embedding_prototype;
                for (std::size_t j = 0; j < dim; ++j) {
                    double noise = spec.noise_sigma > 0.0
                                       ? counter_gaussian(emb_seed, j * n_px + p) * spec.noise_sigma
                                       : 0.0;
                    out.embeddings.values[j * n_px + p] =
                        static_cast<float>(proto[j] + field_vec[fld * dim + j] + noise);
                }
            }
        });

        // labeled polygons: a fraction of fields, whole-field pixel sets
        out.labels.task = Task::landcover;
        out.labels.year = ys.year;
        out.labels.class_table = class_table;
        std::vector<std::size_t> field_ids(n_fields);
        for (std::size_t fld = 0; fld < n_fields; ++fld) field_ids[fld] = fld;
        Rng pick_rng(derive_seed(spec.seed, detail::kStreamLabelPick + 100 * yi));
        pick_rng.shuffle(field_ids);
        std::size_t n_labeled = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(spec.labeled_fraction *
                                                     static_cast<double>(n_fields))));
        std::vector<std::uint8_t> labeled(n_fields, 0);
        for (std::size_t i = 0; i < n_labeled && i < n_fields; ++i) labeled[field_ids[i]] = 1;

        std::vector<LabelEntry> entries(n_fields);
        for (std::size_t fld = 0; fld < n_fields; ++fld) {
            entries[fld].polygon_id = static_cast<std::int64_t>(fld);
            entries[fld].class_id = cls_of_field[fld];
        }
        for (std::size_t r = 0; r < H; ++r)
            for (std::size_t c = 0; c < W; ++c) {
                std::uint32_t fld = field_of[r * W + c];
                if (labeled[fld])
                    entries[fld].pixels.emplace_back(static_cast<std::uint32_t>(r),
                                                     static_cast<std::uint32_t>(c));
            }
        for (auto& e : entries)
            if (!e.pixels.empty()) out.labels.entries.push_back(std::move(e));

        scene.years.push_back(std::move(out));
    }
    return scene;
}

// Flips each polygon's class to a uniformly drawn other class with
// probability flip_rate.
inline LabelSet inject_label_noise(const LabelSet& labels, double flip_rate, std::uint64_t seed) {
    if (flip_rate < 0.0 || flip_rate >= 1.0)
        throw ConfigError("flip_rate must lie in [0, 1)");
    LabelSet out = labels;
    if (flip_rate == 0.0) return out;
    std::vector<std::int32_t> all_classes;
    for (const auto& [cls, name] : labels.class_table) {
        (void)name;
        all_classes.push_back(cls);
    }
    if (all_classes.size() < 2) return out;
    Rng rng(derive_seed(seed, 0x464c4950ULL));
    for (auto& e : out.entries) {
        if (rng.next_double() < flip_rate) {
            std::int32_t pick;
            do {
                pick = all_classes[rng.next_below(all_classes.size())];
            } while (pick == e.class_id);
            e.class_id = pick;
        }
    }
    return out;
}

}  // namespace cropmap
