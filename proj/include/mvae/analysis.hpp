#pragma once

#include "mvae/data.hpp"
#include "mvae/training.hpp"
#include "mvae/vae.hpp"

#include <Eigen/Dense>

#include <vector>

// Downstream evaluation on frozen VAE weights: mu embeddings, linear SVM
// classification with ROC-AUC, per-modality importance, and decoded
// group-difference maps.

namespace mvae {

struct EmbeddingMatrix {
    // rows: subjects; columns: n_modalities * latent_dim, modality-major
    // (modality m occupies columns [m*l, (m+1)*l)).
    Eigen::MatrixXd features;
    std::vector<int> labels;  // aligned to rows, 0 = HC, 1 = SZ
    int n_modalities = 0;
    int latent_dim = 0;
};

// Deterministic: uses the posterior mean only, no sampling.
EmbeddingMatrix embed_dataset(const Cohort& cohort, const VaeParameters& params);

struct SvmModel {
    Eigen::VectorXd w;
    double b = 0.0;
    double C = 1.0;

    double decision(const Eigen::VectorXd& x) const { return w.dot(x) + b; }
};

// L2-regularized hinge loss, 0.5*|w|^2 + C*sum(max(0, 1 - y*(w.x+b))),
// minimized by deterministic averaged subgradient descent. Labels are 0/1.
SvmModel train_linear_svm(const Eigen::MatrixXd& X, const std::vector<int>& y, double C);

// Hinge objective value, for diagnostics and oracle comparison.
double svm_objective(const SvmModel& model, const Eigen::MatrixXd& X, const std::vector<int>& y);

// Mann-Whitney form: P(score_pos > score_neg) + 0.5*P(tie).
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct CvResult {
    std::vector<double> fold_auc;
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<SvmModel> fold_models;
};

// Per fold: embed the whole cohort with that fold's encoder, fit the SVM on
// train+validation rows, score the test rows. label_override substitutes the
// cohort labels (for permutation nulls) without retraining the VAEs.
CvResult cv_classification(const Cohort& cohort, const std::vector<VaeParameters>& fold_params,
                           const FoldSplit& split, double C,
                           const std::vector<int>* label_override = nullptr);

// Normalized absolute weight mass per modality block; sums to 1.
std::vector<double> modality_importance(const SvmModel& model, int n_modalities, int latent_dim);

// Indices of the k largest importances, most important first.
std::vector<int> top_modalities(const std::vector<double>& importance, int k);

struct DifferenceMap {
    Volume map;
    double quantile = 0.99;
    std::vector<int> modalities;
};

// Per modality: decode the HC and SZ latent centers, subtract (HC - SZ),
// keep values at or above the per-modality upper quantile, sum over
// modalities.
DifferenceMap group_difference_map(const VaeParameters& params, const EmbeddingMatrix& embedding,
                                   const std::vector<int>& labels,
                                   const std::vector<int>& modalities, double quantile = 0.99);

// Same thresholding applied to raw group-mean volumes, no latent decoding.
DifferenceMap voxelwise_group_difference(const Cohort& cohort, const std::vector<int>& modalities,
                                         double quantile = 0.99);

double cosine_similarity(const Volume& a, const Volume& b);
double dice_overlap(const Volume& map, const Volume& mask);

}  // namespace mvae
