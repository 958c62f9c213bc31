#include "mvae/pipeline.hpp"

#include <cmath>
#include <exception>
#include <stdexcept>
#include <thread>

namespace mvae {

void train_folds(const Cohort& cohort, const FoldSplit& split, const PipelineConfig& config,
                 std::vector<VaeParameters>& params_out,
                 std::vector<std::vector<EpochRecord>>& histories_out) {
    const int k = static_cast<int>(split.folds.size());
    params_out.resize(k);
    histories_out.resize(k);
    std::vector<std::exception_ptr> errors(k);

    auto run_fold = [&](int f) {
        try {
            TrainResult r = train_vae(cohort, split.folds[f].train, split.folds[f].val,
                                      config.arch, config.training);
            params_out[f] = std::move(r.params);
            histories_out[f] = std::move(r.history);
        } catch (...) {
            errors[f] = std::current_exception();
        }
    };

    int workers = std::max(1, std::min(config.threads, k));
    if (workers == 1) {
        for (int f = 0; f < k; ++f) run_fold(f);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (int f = w; f < k; f += workers) run_fold(f);
            });
        }
        for (auto& t : pool) t.join();
    }
    for (int f = 0; f < k; ++f)
        if (errors[f]) std::rethrow_exception(errors[f]);
}

PipelineResult run_pipeline(const Cohort& cohort, const PipelineConfig& config) {
    PipelineResult result;
    result.split = stratified_kfold(cohort.labels(), config.training.folds,
                                    config.training.validation_fraction, config.training.seed);
    train_folds(cohort, result.split, config, result.fold_params, result.histories);
    result.cv = cv_classification(cohort, result.fold_params, result.split, config.svm_c);
    return result;
}

SeedSweepResult run_seed_sweep(const Cohort& cohort, const std::vector<std::uint64_t>& seeds,
                               PipelineConfig config) {
    if (seeds.size() < 2)
        throw std::invalid_argument("run_seed_sweep: at least 2 seeds required for a std");
    SeedSweepResult result;
    result.seeds = seeds;
    for (std::uint64_t seed : seeds) {
        config.training.seed = seed;
        PipelineResult pr = run_pipeline(cohort, config);
        result.auc.push_back(pr.cv.mean);
    }
    double mean = 0.0;
    for (double a : result.auc) mean += a;
    mean /= static_cast<double>(result.auc.size());
    double var = 0.0;
    for (double a : result.auc) var += (a - mean) * (a - mean);
    result.mean = mean;
    result.stddev = std::sqrt(var / static_cast<double>(result.auc.size() - 1));
    return result;
}

}  // namespace mvae
