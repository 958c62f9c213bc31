#include "mvae/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mvae {

EmbeddingMatrix embed_dataset(const Cohort& cohort, const VaeParameters& params) {
    const int n = cohort.n_modalities;
    const int l = params.arch.latent_dim;
    EmbeddingMatrix em;
    em.n_modalities = n;
    em.latent_dim = l;
    em.labels = cohort.labels();
    em.features.resize(static_cast<long>(cohort.subjects.size()), static_cast<long>(n) * l);
    for (std::size_t j = 0; j < cohort.subjects.size(); ++j) {
        SubjectBatch batch = subject_batch(cohort.subjects[j], n);
        for (int m = 0; m < n; ++m) {
            LatentCode code = encode(volume_to_tensor(batch.volumes[m]), params);
            const auto& mu = code.mu.values();
            for (int d = 0; d < l; ++d)
                em.features(static_cast<long>(j), static_cast<long>(m) * l + d) = mu[d];
        }
    }
    return em;
}

namespace {

void check_two_classes(const std::vector<int>& y, const char* op) {
    bool has0 = false, has1 = false;
    for (int v : y) {
        if (v == 0) has0 = true;
        else if (v == 1) has1 = true;
        else throw std::invalid_argument(std::string(op) + ": labels must be 0/1");
    }
    if (!has0 || !has1)
        throw std::invalid_argument(std::string(op) + ": both classes must be present");
}

}  // namespace

SvmModel train_linear_svm(const Eigen::MatrixXd& X, const std::vector<int>& y, double C) {
    if (X.rows() != static_cast<long>(y.size()))
        throw std::invalid_argument("train_linear_svm: row/label count mismatch");
    check_two_classes(y, "train_linear_svm");
    if (!X.allFinite()) throw std::invalid_argument("train_linear_svm: non-finite features");
    if (C <= 0.0) throw std::invalid_argument("train_linear_svm: C must be positive");

    const long n = X.rows();
    const long d = X.cols();
    Eigen::VectorXd s(n);
    for (long i = 0; i < n; ++i) s(i) = y[i] == 1 ? 1.0 : -1.0;

    // Full-batch Pegasos on the objective rescaled by 1/(C*n); deterministic,
    // with tail averaging. lambda = 1/(C*n), eta_t = 1/(lambda*t).
    const double lambda = 1.0 / (C * static_cast<double>(n));
    const int iters = 4000;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    double b = 0.0;
    Eigen::VectorXd w_avg = Eigen::VectorXd::Zero(d);
    double b_avg = 0.0;
    long avg_count = 0;
    for (int t = 1; t <= iters; ++t) {
        Eigen::VectorXd margins = s.array() * (X * w + Eigen::VectorXd::Constant(n, b)).array();
        Eigen::VectorXd gsum = Eigen::VectorXd::Zero(d);
        double gb = 0.0;
        for (long i = 0; i < n; ++i) {
            if (margins(i) < 1.0) {
                gsum += s(i) * X.row(i).transpose();
                gb += s(i);
            }
        }
        double eta = 1.0 / (lambda * t);
        w = (1.0 - 1.0 / t) * w + (eta / n) * gsum;
        b += (eta / n) * gb;
        if (t > iters / 2) {
            w_avg += w;
            b_avg += b;
            ++avg_count;
        }
    }
    SvmModel model;
    model.w = w_avg / static_cast<double>(avg_count);
    model.b = b_avg / static_cast<double>(avg_count);
    model.C = C;
    return model;
}

double svm_objective(const SvmModel& model, const Eigen::MatrixXd& X, const std::vector<int>& y) {
    double obj = 0.5 * model.w.squaredNorm();
    for (long i = 0; i < X.rows(); ++i) {
        double s = y[i] == 1 ? 1.0 : -1.0;
        obj += model.C * std::max(0.0, 1.0 - s * model.decision(X.row(i).transpose()));
    }
    return obj;
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("roc_auc: length mismatch");
    check_two_classes(labels, "roc_auc");
    const std::size_t n = scores.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // average ranks over ties (1-based), then the Mann-Whitney statistic
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        double r = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
        i = j + 1;
    }
    double n_pos = 0.0, rank_pos = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (labels[k] == 1) {
            n_pos += 1.0;
            rank_pos += rank[k];
        }
    }
    double n_neg = static_cast<double>(n) - n_pos;
    return (rank_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

CvResult cv_classification(const Cohort& cohort, const std::vector<VaeParameters>& fold_params,
                           const FoldSplit& split, double C,
                           const std::vector<int>* label_override) {
    if (fold_params.size() != split.folds.size())
        throw std::invalid_argument("cv_classification: one trained VAE per fold required");
    const std::vector<int> labels =
        label_override ? *label_override : cohort.labels();
    if (labels.size() != cohort.subjects.size())
        throw std::invalid_argument("cv_classification: label count mismatch");

    CvResult result;
    for (std::size_t f = 0; f < split.folds.size(); ++f) {
        const auto& fold = split.folds[f];
        EmbeddingMatrix em = embed_dataset(cohort, fold_params[f]);
        std::vector<int> fit_rows = fold.train;
        fit_rows.insert(fit_rows.end(), fold.val.begin(), fold.val.end());
        Eigen::MatrixXd Xfit(static_cast<long>(fit_rows.size()), em.features.cols());
        std::vector<int> yfit(fit_rows.size());
        for (std::size_t i = 0; i < fit_rows.size(); ++i) {
            Xfit.row(static_cast<long>(i)) = em.features.row(fit_rows[i]);
            yfit[i] = labels[fit_rows[i]];
        }
        SvmModel model = train_linear_svm(Xfit, yfit, C);
        std::vector<double> scores;
        std::vector<int> ytest;
        for (int r : fold.test) {
            scores.push_back(model.decision(em.features.row(r).transpose()));
            ytest.push_back(labels[r]);
        }
        result.fold_auc.push_back(roc_auc(scores, ytest));
        result.fold_models.push_back(std::move(model));
    }
    double mean = 0.0;
    for (double a : result.fold_auc) mean += a;
    mean /= static_cast<double>(result.fold_auc.size());
    double var = 0.0;
    for (double a : result.fold_auc) var += (a - mean) * (a - mean);
    result.mean = mean;
    result.stddev = result.fold_auc.size() > 1
                        ? std::sqrt(var / static_cast<double>(result.fold_auc.size() - 1))
                        : 0.0;
    return result;
}

std::vector<double> modality_importance(const SvmModel& model, int n_modalities, int latent_dim) {
    if (model.w.size() != static_cast<long>(n_modalities) * latent_dim)
        throw std::invalid_argument("modality_importance: weight length " +
                                    std::to_string(model.w.size()) + " != n*l");
    std::vector<double> imp(static_cast<std::size_t>(n_modalities), 0.0);
    double total = 0.0;
    for (int m = 0; m < n_modalities; ++m) {
        for (int d = 0; d < latent_dim; ++d)
            imp[m] += std::abs(model.w(static_cast<long>(m) * latent_dim + d));
        total += imp[m];
    }
    if (total == 0.0) {
        std::fill(imp.begin(), imp.end(), 1.0 / n_modalities);
    } else {
        for (auto& v : imp) v /= total;
    }
    return imp;
}

std::vector<int> top_modalities(const std::vector<double>& importance, int k) {
    std::vector<int> order(importance.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return importance[a] > importance[b]; });
    order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(k)));
    return order;
}

namespace {

// Keep the ceil((1-q)*N) largest values (ties broken by voxel index), zero
// the rest. Enforces the at-most-1%-nonzero contract even with ties.
Volume upper_quantile_threshold(const Volume& v, double quantile) {
    const std::size_t n = v.values.size();
    std::size_t keep = static_cast<std::size_t>(
        std::ceil((1.0 - quantile) * static_cast<double>(n)));
    keep = std::max<std::size_t>(1, std::min(keep, n));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<long>(keep), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (v.values[a] != v.values[b]) return v.values[a] > v.values[b];
                          return a < b;
                      });
    Volume out;
    out.extents = v.extents;
    out.values.assign(n, 0.0f);
    for (std::size_t i = 0; i < keep; ++i) out.values[order[i]] = v.values[order[i]];
    return out;
}

void check_groups(const std::vector<int>& labels) {
    check_two_classes(labels, "group_difference");
}

}  // namespace

DifferenceMap group_difference_map(const VaeParameters& params, const EmbeddingMatrix& embedding,
                                   const std::vector<int>& labels,
                                   const std::vector<int>& modalities, double quantile) {
    if (modalities.empty())
        throw std::invalid_argument("group_difference_map: no modalities selected");
    if (static_cast<long>(labels.size()) != embedding.features.rows())
        throw std::invalid_argument("group_difference_map: label/row mismatch");
    check_groups(labels);
    const int l = embedding.latent_dim;
    DifferenceMap dm;
    dm.quantile = quantile;
    dm.modalities = modalities;
    for (int m : modalities) {
        if (m < 0 || m >= embedding.n_modalities)
            throw std::invalid_argument("group_difference_map: modality index out of range");
        Eigen::VectorXd hc = Eigen::VectorXd::Zero(l), sz = Eigen::VectorXd::Zero(l);
        long n_hc = 0, n_sz = 0;
        for (long r = 0; r < embedding.features.rows(); ++r) {
            auto block = embedding.features.row(r).segment(static_cast<long>(m) * l, l);
            if (labels[static_cast<std::size_t>(r)] == 1) {
                sz += block.transpose();
                ++n_sz;
            } else {
                hc += block.transpose();
                ++n_hc;
            }
        }
        hc /= static_cast<double>(n_hc);
        sz /= static_cast<double>(n_sz);
        auto decode_center = [&](const Eigen::VectorXd& c) {
            std::vector<float> z(static_cast<std::size_t>(l));
            for (int d = 0; d < l; ++d) z[d] = static_cast<float>(c(d));
            return tensor_to_volume(decode(Tensor::from_data({l}, std::move(z)), params));
        };
        Volume hc_vol = decode_center(hc);
        Volume sz_vol = decode_center(sz);
        Volume diff = hc_vol;
        for (std::size_t i = 0; i < diff.values.size(); ++i) diff.values[i] -= sz_vol.values[i];
        Volume kept = upper_quantile_threshold(diff, quantile);
        if (dm.map.values.empty()) dm.map = kept;
        else
            for (std::size_t i = 0; i < kept.values.size(); ++i)
                dm.map.values[i] += kept.values[i];
    }
    return dm;
}

DifferenceMap voxelwise_group_difference(const Cohort& cohort, const std::vector<int>& modalities,
                                         double quantile) {
    if (modalities.empty())
        throw std::invalid_argument("voxelwise_group_difference: no modalities selected");
    check_groups(cohort.labels());
    DifferenceMap dm;
    dm.quantile = quantile;
    dm.modalities = modalities;
    for (int m : modalities) {
        if (m < 0 || m >= cohort.n_modalities)
            throw std::invalid_argument("voxelwise_group_difference: modality index out of range");
        Volume hc, sz;
        long n_hc = 0, n_sz = 0;
        for (const auto& s : cohort.subjects) {
            Volume v = maxabs_scale(s.volumes[m]);
            Volume& acc = s.group == Group::SZ ? sz : hc;
            if (acc.values.empty()) acc = v;
            else
                for (std::size_t i = 0; i < v.values.size(); ++i) acc.values[i] += v.values[i];
            (s.group == Group::SZ ? n_sz : n_hc) += 1;
        }
        Volume diff = hc;
        for (std::size_t i = 0; i < diff.values.size(); ++i)
            diff.values[i] = diff.values[i] / n_hc - sz.values[i] / n_sz;
        Volume kept = upper_quantile_threshold(diff, quantile);
        if (dm.map.values.empty()) dm.map = kept;
        else
            for (std::size_t i = 0; i < kept.values.size(); ++i)
                dm.map.values[i] += kept.values[i];
    }
    return dm;
}

double cosine_similarity(const Volume& a, const Volume& b) {
    if (a.values.size() != b.values.size())
        throw std::invalid_argument("cosine_similarity: size mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        dot += static_cast<double>(a.values[i]) * b.values[i];
        na += static_cast<double>(a.values[i]) * a.values[i];
        nb += static_cast<double>(b.values[i]) * b.values[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double dice_overlap(const Volume& map, const Volume& mask) {
    if (map.values.size() != mask.values.size())
        throw std::invalid_argument("dice_overlap: size mismatch");
    long a = 0, b = 0, both = 0;
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        bool in_a = map.values[i] != 0.0f;
        bool in_b = mask.values[i] != 0.0f;
        a += in_a;
        b += in_b;
        both += in_a && in_b;
    }
    if (a + b == 0) return 0.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

}  // namespace mvae
