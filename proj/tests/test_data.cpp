#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mvae/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace mvae;
namespace fs = std::filesystem;

namespace {

CohortSpec small_spec() {
    CohortSpec spec;
    spec.n_subjects = 8;
    spec.n_modalities = 4;
    spec.n_effect_modalities = 2;
    spec.extents = {8, 8, 8};
    return spec;
}

Volume random_volume(std::array<int, 3> extents, std::uint64_t seed) {
    Volume v;
    v.extents = extents;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(-2.0f, 2.0f);
    v.values.resize(static_cast<std::size_t>(v.voxel_count()));
    for (auto& x : v.values) x = dist(rng);
    return v;
}

bool volumes_equal(const Volume& a, const Volume& b) {
    return a.extents == b.extents && a.values == b.values;
}

}  // namespace

TEST_CASE("maxabs_scale: hand values, zero guard, exact unit peak, idempotence") {
    Volume v;
    v.extents = {1, 1, 3};
    v.values = {2.0f, -4.0f, 1.0f};
    Volume s = maxabs_scale(v);
    CHECK(s.values == std::vector<float>{0.5f, -1.0f, 0.25f});

    Volume zero;
    zero.extents = {1, 1, 3};
    zero.values = {0.0f, 0.0f, 0.0f};
    CHECK(maxabs_scale(zero).values == zero.values);

    Volume r = random_volume({5, 4, 3}, 77);
    Volume rs = maxabs_scale(r);
    float peak = 0.0f;
    for (float x : rs.values) {
        peak = std::max(peak, std::abs(x));
        CHECK(std::abs(x) <= 1.0f);
    }
    CHECK(peak == 1.0f);
    CHECK(maxabs_scale(rs).values == rs.values);
}

TEST_CASE("cohort spec validation") {
    CohortSpec spec = small_spec();
    CHECK_NOTHROW(spec.validate());
    spec.n_subjects = 3;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = small_spec();
    spec.extents = {8, 3, 8};
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = small_spec();
    spec.n_effect_modalities = 4;  // must leave at least one effect-free modality
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = small_spec();
    spec.effect_size = -1.0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = small_spec();
    spec.noise_sigma = -0.1;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = small_spec();
    spec.n_modalities = 1;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("generate_cohort is a pure function of (spec, seed)") {
    CohortSpec spec = small_spec();
    Cohort a = generate_cohort(spec, 123);
    Cohort b = generate_cohort(spec, 123);
    REQUIRE(a.subjects.size() == b.subjects.size());
    for (std::size_t j = 0; j < a.subjects.size(); ++j) {
        CHECK(a.subjects[j].id == b.subjects[j].id);
        CHECK(a.subjects[j].group == b.subjects[j].group);
        for (int m = 0; m < spec.n_modalities; ++m)
            CHECK(volumes_equal(a.subjects[j].volumes[m], b.subjects[j].volumes[m]));
    }
    Cohort c = generate_cohort(spec, 124);
    CHECK_FALSE(volumes_equal(a.subjects[0].volumes[0], c.subjects[0].volumes[0]));
}

TEST_CASE("cohort structure: labels, effect modalities, extents") {
    CohortSpec spec = small_spec();
    Cohort cohort = generate_cohort(spec, 9);
    auto labels = cohort.labels();
    REQUIRE(labels.size() == 8);
    int pos = 0;
    for (int l : labels) pos += l;
    CHECK(pos == 4);  // alternating HC/SZ

    REQUIRE(cohort.effect_modalities.size() == 2);
    for (int m : cohort.effect_modalities) {
        CHECK(m >= 1);  // modality 0 (the whole-volume pattern) never carries the effect
        CHECK(m < spec.n_modalities);
    }
    CHECK(cohort.effect_modalities == effect_modalities_for(spec));

    for (const auto& s : cohort.subjects) {
        REQUIRE(static_cast<int>(s.volumes.size()) == spec.n_modalities);
        for (const auto& v : s.volumes) CHECK(v.extents == spec.extents);
    }
}

TEST_CASE("injected effect dominates at the effect site; absent in the null cohort") {
    CohortSpec spec = small_spec();
    spec.n_subjects = 32;
    spec.effect_size = 5.0 * spec.noise_sigma;
    Cohort cohort = generate_cohort(spec, 4);
    Volume mask = effect_site_mask(spec);

    auto site_vs_offsite = [&](const Cohort& c) {
        int m = c.effect_modalities.empty() ? 1 : c.effect_modalities[0];
        std::size_t nvox = c.subjects[0].volumes[m].values.size();
        std::vector<double> hc(nvox, 0.0), sz(nvox, 0.0);
        int nhc = 0, nsz = 0;
        for (const auto& s : c.subjects) {
            auto& acc = s.group == Group::HC ? hc : sz;
            (s.group == Group::HC ? nhc : nsz)++;
            for (std::size_t i = 0; i < nvox; ++i) acc[i] += s.volumes[m].values[i];
        }
        double site = 0.0, off = 0.0;
        int nsite = 0, noff = 0;
        for (std::size_t i = 0; i < nvox; ++i) {
            double diff = std::abs(hc[i] / nhc - sz[i] / nsz);
            if (mask.values[i] > 0.0f) {
                site += diff;
                ++nsite;
            } else {
                off += diff;
                ++noff;
            }
        }
        return std::pair<double, double>{site / nsite, off / noff};
    };

    auto [site, off] = site_vs_offsite(cohort);
    CHECK(site > 3.0 * off);

    // the effect is an intensity reduction in the SZ group: the HC - SZ
    // contrast must be positive on average inside the effect site
    {
        int m = cohort.effect_modalities[0];
        std::size_t nvox = cohort.subjects[0].volumes[m].values.size();
        double contrast = 0.0;
        int nhc = 0, nsz = 0;
        for (const auto& s : cohort.subjects) (s.group == Group::HC ? nhc : nsz)++;
        for (std::size_t i = 0; i < nvox; ++i) {
            if (mask.values[i] <= 0.0f) continue;
            double hc_mean = 0.0, sz_mean = 0.0;
            for (const auto& s : cohort.subjects) {
                if (s.group == Group::HC) hc_mean += s.volumes[m].values[i] / nhc;
                else sz_mean += s.volumes[m].values[i] / nsz;
            }
            contrast += hc_mean - sz_mean;
        }
        CHECK(contrast > 0.0);
    }

    CohortSpec null_spec = spec;
    null_spec.effect_size = 0.0;
    Cohort null_cohort = generate_cohort(null_spec, 4);
    null_cohort.effect_modalities = cohort.effect_modalities;  // probe the same modality
    auto [nsite, noff] = site_vs_offsite(null_cohort);
    CHECK(nsite < 3.0 * noff);
}

TEST_CASE("subject_batch: order, scaling, completeness check") {
    CohortSpec spec = small_spec();
    Cohort cohort = generate_cohort(spec, 11);
    const Subject& s = cohort.subjects[0];
    SubjectBatch batch = subject_batch(s, spec.n_modalities);
    REQUIRE(batch.volumes.size() == static_cast<std::size_t>(spec.n_modalities));
    for (int m = 0; m < spec.n_modalities; ++m) {
        CHECK(volumes_equal(batch.volumes[m], maxabs_scale(s.volumes[m])));
        for (float v : batch.volumes[m].values) {
            CHECK(v >= -1.0f);
            CHECK(v <= 1.0f);
        }
    }
    CHECK_THROWS_AS(subject_batch(s, spec.n_modalities + 1), std::invalid_argument);
}

TEST_CASE("volume/tensor conversion round trip") {
    Volume v = random_volume({4, 5, 6}, 31);
    Tensor t = volume_to_tensor(v);
    REQUIRE(t.shape() == Shape{1, 4, 5, 6});
    Volume back = tensor_to_volume(t);
    CHECK(volumes_equal(v, back));
    CHECK_THROWS_AS(tensor_to_volume(Tensor::zeros({2, 4, 5, 6})), std::invalid_argument);
}

TEST_CASE("volume file round trip and header validation") {
    fs::path dir = fs::temp_directory_path() / "mvae_test_vol";
    fs::create_directories(dir);
    fs::path path = dir / "v.vvol";
    Volume v = random_volume({6, 5, 4}, 55);
    write_volume(path.string(), v);
    Volume r = read_volume(path.string());
    CHECK(volumes_equal(v, r));

    // Truncated payload.
    auto bytes_of = [&](const fs::path& p) {
        std::ifstream is(p, std::ios::binary);
        return std::vector<char>((std::istreambuf_iterator<char>(is)),
                                 std::istreambuf_iterator<char>());
    };
    auto bytes = bytes_of(path);
    fs::path trunc = dir / "trunc.vvol";
    {
        std::ofstream os(trunc, std::ios::binary);
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 8));
    }
    CHECK_THROWS_AS(read_volume(trunc.string()), std::runtime_error);

    // Payload longer than the header-declared extents.
    fs::path fat = dir / "fat.vvol";
    {
        std::ofstream os(fat, std::ios::binary);
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        float extra = 1.0f;
        os.write(reinterpret_cast<char*>(&extra), sizeof(float));
    }
    CHECK_THROWS_AS(read_volume(fat.string()), std::runtime_error);

    // Bad magic.
    fs::path bad = dir / "bad.vvol";
    {
        std::ofstream os(bad, std::ios::binary);
        os << "WHAT";
        os.write(bytes.data() + 4, static_cast<std::streamsize>(bytes.size() - 4));
    }
    CHECK_THROWS_AS(read_volume(bad.string()), std::runtime_error);

    // Zero extent in the header.
    fs::path zext = dir / "zext.vvol";
    {
        auto copy = bytes;
        std::uint32_t zero = 0;
        std::memcpy(copy.data() + 8, &zero, 4);
        std::ofstream os(zext, std::ios::binary);
        os.write(copy.data(), static_cast<std::streamsize>(copy.size()));
    }
    CHECK_THROWS_AS(read_volume(zext.string()), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("cohort directory round trip preserves everything") {
    fs::path dir = fs::temp_directory_path() / "mvae_test_cohort";
    fs::remove_all(dir);
    CohortSpec spec = small_spec();
    Cohort cohort = generate_cohort(spec, 21);
    write_cohort(dir.string(), cohort);
    Cohort r = read_cohort(dir.string());
    CHECK(r.seed == cohort.seed);
    CHECK(r.n_modalities == cohort.n_modalities);
    CHECK(r.effect_modalities == cohort.effect_modalities);
    REQUIRE(r.subjects.size() == cohort.subjects.size());
    for (std::size_t j = 0; j < r.subjects.size(); ++j) {
        CHECK(r.subjects[j].id == cohort.subjects[j].id);
        CHECK(r.subjects[j].group == cohort.subjects[j].group);
        REQUIRE(r.subjects[j].volumes.size() == cohort.subjects[j].volumes.size());
        for (std::size_t m = 0; m < r.subjects[j].volumes.size(); ++m)
            CHECK(volumes_equal(r.subjects[j].volumes[m], cohort.subjects[j].volumes[m]));
    }
    CHECK_THROWS_AS(read_cohort((dir / "missing").string()), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("effect site mask is a binary localized region") {
    CohortSpec spec = small_spec();
    Volume mask = effect_site_mask(spec);
    int on = 0;
    for (float v : mask.values) {
        CHECK((v == 0.0f || v == 1.0f));
        if (v == 1.0f) ++on;
    }
    CHECK(on > 0);
    CHECK(on < static_cast<int>(mask.values.size()) / 4);  // localized, not global
}
