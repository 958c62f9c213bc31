#pragma once

#include "mvae/tensor.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

// Synthetic multimodal cohorts with a known injected group effect, max-abs
// scaling, and the on-disk volume / manifest formats.

namespace mvae {

struct Volume {
    std::array<int, 3> extents{0, 0, 0};
    std::vector<float> values;  // row-major, last axis fastest

    std::int64_t voxel_count() const {
        return static_cast<std::int64_t>(extents[0]) * extents[1] * extents[2];
    }
};

enum class Group : int { HC = 0, SZ = 1 };

struct Subject {
    std::string id;
    Group group = Group::HC;
    std::vector<Volume> volumes;  // indexed by modality
};

struct CohortSpec {
    int n_subjects = 64;
    int n_modalities = 12;
    int n_effect_modalities = 3;
    double effect_size = 1.0;
    double noise_sigma = 0.2;
    std::array<int, 3> extents{24, 28, 24};

    void validate() const;  // throws std::invalid_argument
};

struct Cohort {
    std::vector<Subject> subjects;
    int n_modalities = 0;
    std::vector<int> effect_modalities;  // ground truth
    std::uint64_t seed = 0;

    std::vector<int> labels() const;  // 0 = HC, 1 = SZ, aligned to subjects
};

struct SubjectBatch {
    std::vector<Volume> volumes;  // max-abs scaled, one per modality in order
};

// Divide by max |v|; all-zero volumes pass through unchanged.
Volume maxabs_scale(const Volume& v);

// Deterministic in (spec, seed). Modality 0 is a whole-volume smooth pattern
// (sMRI-like); the rest are localized blob patterns (ICN-like). SZ subjects
// get an additive bump of magnitude effect_size at a fixed site in each
// effect modality.
Cohort generate_cohort(const CohortSpec& spec, std::uint64_t seed);

// Deterministic choice of which modalities carry the effect, spread over the
// non-sMRI modalities.
std::vector<int> effect_modalities_for(const CohortSpec& spec);

// Binary mask of the injected effect site (bump above 30% of its peak).
Volume effect_site_mask(const CohortSpec& spec);

SubjectBatch subject_batch(const Subject& s, int expected_modalities);

Tensor volume_to_tensor(const Volume& v, bool requires_grad = false);
Volume tensor_to_volume(const Tensor& t);

// Volume file: magic "VVOL", u32 version=1, three u32 extents, f32 payload.
void write_volume(const std::string& path, const Volume& v);
Volume read_volume(const std::string& path);

// Cohort directory: one .vvol per (subject, modality) plus manifest.txt.
void write_cohort(const std::string& dir, const Cohort& cohort);
Cohort read_cohort(const std::string& dir);

}  // namespace mvae
