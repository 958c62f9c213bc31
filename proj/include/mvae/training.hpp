#pragma once

#include "mvae/data.hpp"
#include "mvae/vae.hpp"

#include <cstdint>
#include <vector>

namespace mvae {

struct TrainingConfig {
    double learning_rate = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int epochs = 30;
    std::uint64_t seed = 42;
    double kl_weight = 1.0;
    int folds = 10;
    double validation_fraction = 0.10;

    void validate() const;
};

struct FoldSplit {
    struct Fold {
        std::vector<int> train, val, test;  // subject indices
    };
    std::vector<Fold> folds;
};

// Test folds partition the cohort; within each fold a stratified
// validation_fraction of the non-test subjects is held out. Class counts in
// every test and validation set stay within one subject of proportional.
FoldSplit stratified_kfold(const std::vector<int>& labels, int k, double validation_fraction,
                           std::uint64_t seed);

struct AdamState {
    std::vector<std::vector<float>> m, v;
    long step = 0;
};

// Standard Adam update with bias correction, in place. grads are read from
// each tensor's accumulated gradient.
void adam_step(std::vector<Tensor>& params, AdamState& state, const TrainingConfig& config);

struct EpochRecord {
    int epoch = 0;  // 0 is the freshly initialized model, before any step
    LossBreakdown train, val;
};

struct TrainResult {
    VaeParameters params;  // best-validation weights (last epoch if no val set)
    std::vector<EpochRecord> history;
};

// One optimizer step per subject batch; loss is the mean of the per-volume
// single-sample ELBO estimates. Deterministic given config.seed.
TrainResult train_vae(const Cohort& cohort, const std::vector<int>& train_ids,
                      const std::vector<int>& val_ids, const ArchitectureConfig& arch,
                      const TrainingConfig& config);

// Mean per-subject batch loss over `ids`, evaluated with noise = 0.
LossBreakdown evaluate_loss(const Cohort& cohort, const std::vector<int>& ids,
                            const VaeParameters& params, double kl_weight);

void write_history(const std::string& path, const std::vector<EpochRecord>& history);

}  // namespace mvae
