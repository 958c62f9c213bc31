#include "mvae/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace mvae {

void CohortSpec::validate() const {
    if (n_subjects < 4) throw std::invalid_argument("cohort needs at least 4 subjects");
    if (n_modalities < 2) throw std::invalid_argument("cohort needs at least 2 modalities");
    if (n_effect_modalities < 0 || n_effect_modalities >= n_modalities)
        throw std::invalid_argument("effect modality count out of range");
    if (effect_size < 0.0) throw std::invalid_argument("negative effect size");
    if (noise_sigma < 0.0) throw std::invalid_argument("negative noise sigma");
    for (int e : extents)
        if (e < 4) throw std::invalid_argument("volume extents must be at least 4 voxels");
}

std::vector<int> Cohort::labels() const {
    std::vector<int> out;
    out.reserve(subjects.size());
    for (const auto& s : subjects) out.push_back(static_cast<int>(s.group));
    return out;
}

Volume maxabs_scale(const Volume& v) {
    float m = 0.0f;
    for (float x : v.values) m = std::max(m, std::abs(x));
    if (m == 0.0f) return v;
    Volume out = v;
    for (auto& x : out.values) x /= m;
    return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::mt19937_64 sub_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return std::mt19937_64(splitmix64(splitmix64(seed ^ (a << 32)) ^ b));
}

void add_bump(Volume& v, const std::array<double, 3>& center_frac,
              const std::array<double, 3>& width_voxels, double amplitude) {
    for (int z = 0; z < v.extents[0]; ++z)
        for (int y = 0; y < v.extents[1]; ++y)
            for (int x = 0; x < v.extents[2]; ++x) {
                double dz = (z - center_frac[0] * (v.extents[0] - 1)) / width_voxels[0];
                double dy = (y - center_frac[1] * (v.extents[1] - 1)) / width_voxels[1];
                double dx = (x - center_frac[2] * (v.extents[2] - 1)) / width_voxels[2];
                double r2 = dz * dz + dy * dy + dx * dx;
                v.values[(static_cast<std::size_t>(z) * v.extents[1] + y) * v.extents[2] + x] +=
                    static_cast<float>(amplitude * std::exp(-0.5 * r2));
            }
}

Volume zero_volume(const std::array<int, 3>& extents) {
    Volume v;
    v.extents = extents;
    v.values.assign(static_cast<std::size_t>(extents[0]) * extents[1] * extents[2], 0.0f);
    return v;
}

// Base spatial pattern for one modality. Modality 0 is broad and covers the
// whole volume; others are a few localized blobs.
Volume modality_pattern(const CohortSpec& spec, int modality, std::uint64_t seed) {
    Volume v = zero_volume(spec.extents);
    auto rng = sub_rng(seed, 0xA11CEULL, static_cast<std::uint64_t>(modality));
    std::uniform_real_distribution<double> ufrac(0.15, 0.85);
    std::uniform_real_distribution<double> uamp(0.6, 1.0);
    std::uniform_real_distribution<double> usign(0.0, 1.0);
    double minext = static_cast<double>(*std::min_element(spec.extents.begin(), spec.extents.end()));
    int n_bumps = modality == 0 ? 6 : 3;
    double wlo = modality == 0 ? minext / 3.0 : minext / 9.0;
    double whi = modality == 0 ? minext / 2.0 : minext / 6.0;
    std::uniform_real_distribution<double> uw(wlo, whi);
    for (int b = 0; b < n_bumps; ++b) {
        std::array<double, 3> c{ufrac(rng), ufrac(rng), ufrac(rng)};
        std::array<double, 3> w{uw(rng), uw(rng), uw(rng)};
        double amp = uamp(rng) * (usign(rng) < 0.25 ? -1.0 : 1.0);
        add_bump(v, c, w, amp);
    }
    return v;
}

// Fixed effect site, independent of the seed so ground truth is stable.
constexpr std::array<double, 3> kEffectCenter{0.35, 0.55, 0.6};

Volume effect_pattern(const CohortSpec& spec) {
    Volume v = zero_volume(spec.extents);
    double minext = static_cast<double>(*std::min_element(spec.extents.begin(), spec.extents.end()));
    double w = minext / 6.0;
    add_bump(v, kEffectCenter, {w, w, w}, 1.0);
    return v;
}

// Smooth per-subject noise field: iid normals box-averaged over a 3^3
// clamped window, rescaled to roughly unit per-voxel std.
Volume smooth_noise(const CohortSpec& spec, std::mt19937_64& rng) {
    Volume raw = zero_volume(spec.extents);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& x : raw.values) x = static_cast<float>(normal(rng));
    Volume out = zero_volume(spec.extents);
    const auto& e = spec.extents;
    for (int z = 0; z < e[0]; ++z)
        for (int y = 0; y < e[1]; ++y)
            for (int x = 0; x < e[2]; ++x) {
                double acc = 0.0;
                int count = 0;
                for (int dz = -1; dz <= 1; ++dz)
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            int iz = z + dz, iy = y + dy, ix = x + dx;
                            if (iz < 0 || iz >= e[0] || iy < 0 || iy >= e[1] || ix < 0 ||
                                ix >= e[2])
                                continue;
                            acc += raw.values[(static_cast<std::size_t>(iz) * e[1] + iy) * e[2] + ix];
                            ++count;
                        }
                // mean of `count` iid unit normals has std 1/sqrt(count)
                out.values[(static_cast<std::size_t>(z) * e[1] + y) * e[2] + x] =
                    static_cast<float>(acc / count * std::sqrt(static_cast<double>(count)));
            }
    return out;
}

}  // namespace

std::vector<int> effect_modalities_for(const CohortSpec& spec) {
    std::vector<int> out;
    if (spec.n_effect_modalities == 0) return out;
    int step = std::max(1, (spec.n_modalities - 1) / spec.n_effect_modalities);
    for (int j = 0; j < spec.n_effect_modalities; ++j)
        out.push_back(std::min(1 + j * step, spec.n_modalities - 1));
    return out;
}

Volume effect_site_mask(const CohortSpec& spec) {
    Volume pattern = effect_pattern(spec);
    float peak = 0.0f;
    for (float v : pattern.values) peak = std::max(peak, v);
    Volume mask = zero_volume(spec.extents);
    for (std::size_t i = 0; i < pattern.values.size(); ++i)
        mask.values[i] = pattern.values[i] > 0.3f * peak ? 1.0f : 0.0f;
    return mask;
}

Cohort generate_cohort(const CohortSpec& spec, std::uint64_t seed) {
    spec.validate();
    Cohort cohort;
    cohort.n_modalities = spec.n_modalities;
    cohort.effect_modalities = effect_modalities_for(spec);
    cohort.seed = seed;

    std::vector<Volume> patterns;
    for (int m = 0; m < spec.n_modalities; ++m) patterns.push_back(modality_pattern(spec, m, seed));
    Volume effect = effect_pattern(spec);
    std::vector<bool> has_effect(spec.n_modalities, false);
    for (int m : cohort.effect_modalities) has_effect[m] = true;

    for (int j = 0; j < spec.n_subjects; ++j) {
        Subject s;
        std::ostringstream id;
        id << "sub" << (j < 100 ? (j < 10 ? "00" : "0") : "") << j;
        s.id = id.str();
        s.group = (j % 2 == 1) ? Group::SZ : Group::HC;
        for (int m = 0; m < spec.n_modalities; ++m) {
            auto rng = sub_rng(seed, static_cast<std::uint64_t>(j) + 1, static_cast<std::uint64_t>(m));
            Volume noise = smooth_noise(spec, rng);
            Volume vol = patterns[m];
            for (std::size_t i = 0; i < vol.values.size(); ++i)
                vol.values[i] += static_cast<float>(spec.noise_sigma) * noise.values[i];
            if (s.group == Group::SZ && has_effect[m]) {
                // the group effect is a localized intensity reduction, so the
                // HC - SZ contrast is positive at the effect site
                for (std::size_t i = 0; i < vol.values.size(); ++i)
                    vol.values[i] -= static_cast<float>(spec.effect_size) * effect.values[i];
            }
            s.volumes.push_back(std::move(vol));
        }
        cohort.subjects.push_back(std::move(s));
    }
    return cohort;
}

SubjectBatch subject_batch(const Subject& s, int expected_modalities) {
    if (static_cast<int>(s.volumes.size()) != expected_modalities) {
        throw std::invalid_argument("subject " + s.id + " has " +
                                    std::to_string(s.volumes.size()) + " modalities, expected " +
                                    std::to_string(expected_modalities));
    }
    SubjectBatch batch;
    for (const auto& v : s.volumes) {
        if (v.extents != s.volumes[0].extents)
            throw std::invalid_argument("subject " + s.id + " has inconsistent volume extents");
        batch.volumes.push_back(maxabs_scale(v));
    }
    return batch;
}

Tensor volume_to_tensor(const Volume& v, bool requires_grad) {
    return Tensor::from_data({1, v.extents[0], v.extents[1], v.extents[2]}, v.values,
                             requires_grad);
}

Volume tensor_to_volume(const Tensor& t) {
    const auto& s = t.shape();
    if (s.size() != 4 || s[0] != 1)
        throw std::invalid_argument("tensor_to_volume: expected [1,D,H,W], got " + shape_str(s));
    Volume v;
    v.extents = {s[1], s[2], s[3]};
    v.values = t.values();
    return v;
}

namespace {

constexpr char kVolMagic[4] = {'V', 'V', 'O', 'L'};
constexpr std::uint32_t kVolVersion = 1;

}  // namespace

void write_volume(const std::string& path, const Volume& v) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open volume file for writing: " + path);
    os.write(kVolMagic, 4);
    std::uint32_t u = kVolVersion;
    os.write(reinterpret_cast<char*>(&u), 4);
    for (int e : v.extents) {
        u = static_cast<std::uint32_t>(e);
        os.write(reinterpret_cast<char*>(&u), 4);
    }
    os.write(reinterpret_cast<const char*>(v.values.data()),
             static_cast<std::streamsize>(v.values.size() * sizeof(float)));
    if (!os) throw std::runtime_error("volume write failed: " + path);
}

Volume read_volume(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open volume file: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kVolMagic, 4) != 0)
        throw std::runtime_error("bad volume magic in " + path);
    std::uint32_t version = 0;
    is.read(reinterpret_cast<char*>(&version), 4);
    if (!is || version != kVolVersion)
        throw std::runtime_error("unsupported volume version in " + path);
    Volume v;
    for (auto& e : v.extents) {
        std::uint32_t u = 0;
        is.read(reinterpret_cast<char*>(&u), 4);
        if (!is || u == 0 || u > (1u << 20))
            throw std::runtime_error("bad volume extents header in " + path);
        e = static_cast<int>(u);
    }
    v.values.resize(static_cast<std::size_t>(v.voxel_count()));
    is.read(reinterpret_cast<char*>(v.values.data()),
            static_cast<std::streamsize>(v.values.size() * sizeof(float)));
    if (!is || is.gcount() != static_cast<std::streamsize>(v.values.size() * sizeof(float)))
        throw std::runtime_error("volume payload truncated in " + path);
    is.peek();
    if (!is.eof())
        throw std::runtime_error("volume payload longer than header-declared extents in " + path);
    return v;
}

namespace {

std::string volume_filename(const std::string& subject_id, int modality) {
    std::ostringstream os;
    os << subject_id << "_mod" << (modality < 10 ? "0" : "") << modality << ".vvol";
    return os.str();
}

}  // namespace

void write_cohort(const std::string& dir, const Cohort& cohort) {
    fs::create_directories(dir);
    std::ofstream mf(fs::path(dir) / "manifest.txt");
    if (!mf) throw std::runtime_error("cannot write manifest in " + dir);
    mf << "seed " << cohort.seed << "\n";
    mf << "modalities " << cohort.n_modalities << "\n";
    mf << "effect_modalities ";
    for (std::size_t i = 0; i < cohort.effect_modalities.size(); ++i)
        mf << (i ? "," : "") << cohort.effect_modalities[i];
    mf << "\n";
    for (const auto& s : cohort.subjects) {
        mf << "subject " << s.id << " " << (s.group == Group::SZ ? "SZ" : "HC");
        for (int m = 0; m < static_cast<int>(s.volumes.size()); ++m) {
            std::string name = volume_filename(s.id, m);
            write_volume((fs::path(dir) / name).string(), s.volumes[m]);
            mf << " " << name;
        }
        mf << "\n";
    }
}

Cohort read_cohort(const std::string& dir) {
    std::ifstream mf(fs::path(dir) / "manifest.txt");
    if (!mf) throw std::runtime_error("cannot open manifest in " + dir);
    Cohort cohort;
    std::string line;
    while (std::getline(mf, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "seed") ss >> cohort.seed;
        else if (key == "modalities") ss >> cohort.n_modalities;
        else if (key == "effect_modalities") {
            std::string list;
            ss >> list;
            std::stringstream ls(list);
            std::string tok;
            while (std::getline(ls, tok, ',')) cohort.effect_modalities.push_back(std::stoi(tok));
        } else if (key == "subject") {
            Subject s;
            std::string grp;
            ss >> s.id >> grp;
            if (grp != "HC" && grp != "SZ")
                throw std::runtime_error("manifest: unknown group '" + grp + "'");
            s.group = grp == "SZ" ? Group::SZ : Group::HC;
            std::string name;
            while (ss >> name) s.volumes.push_back(read_volume((fs::path(dir) / name).string()));
            cohort.subjects.push_back(std::move(s));
        } else {
            throw std::runtime_error("manifest: unknown record '" + key + "'");
        }
    }
    if (cohort.subjects.empty()) throw std::runtime_error("manifest lists no subjects in " + dir);
    return cohort;
}

}  // namespace mvae
