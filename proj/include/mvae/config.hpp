#pragma once

#include "mvae/data.hpp"
#include "mvae/pipeline.hpp"

#include <string>

// One flat key = value config document drives every CLI command.

namespace mvae {

struct RunConfig {
    CohortSpec cohort;
    ArchitectureConfig arch;
    TrainingConfig training;
    double svm_c = 1.0;
    int top_k = 5;
    double tsne_perplexity = 30.0;
    int tsne_iters = 1000;
    double tsne_learning_rate = 100.0;
    std::string out_dir = "out";
    int threads = 1;

    void validate() const;  // cross-field checks; throws
    PipelineConfig pipeline() const;
};

RunConfig default_run_config();

// `key = value` lines, '#' comments. Unknown keys are rejected.
RunConfig parse_run_config(const std::string& path);
RunConfig parse_run_config_text(const std::string& text);

}  // namespace mvae
