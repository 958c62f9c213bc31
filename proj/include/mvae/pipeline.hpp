#pragma once

#include "mvae/analysis.hpp"
#include "mvae/training.hpp"

#include <cstdint>
#include <vector>

// End-to-end train + classify pipeline over CV folds, and the multi-seed
// robustness sweep.

namespace mvae {

struct PipelineConfig {
    ArchitectureConfig arch;
    TrainingConfig training;
    double svm_c = 1.0;
    int threads = 1;  // folds trained in parallel; each fold is sequential
};

struct PipelineResult {
    FoldSplit split;
    std::vector<VaeParameters> fold_params;
    std::vector<std::vector<EpochRecord>> histories;
    CvResult cv;
};

PipelineResult run_pipeline(const Cohort& cohort, const PipelineConfig& config);

// Train the per-fold VAEs without the classification stage.
void train_folds(const Cohort& cohort, const FoldSplit& split, const PipelineConfig& config,
                 std::vector<VaeParameters>& params_out,
                 std::vector<std::vector<EpochRecord>>& histories_out);

struct SeedSweepResult {
    std::vector<std::uint64_t> seeds;
    std::vector<double> auc;  // mean CV AUC per seed
    double mean = 0.0;
    double stddev = 0.0;
};

// Full pipeline per seed; needs at least 2 seeds to report a std.
SeedSweepResult run_seed_sweep(const Cohort& cohort, const std::vector<std::uint64_t>& seeds,
                               PipelineConfig config);

}  // namespace mvae
