#include "mvae/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace mvae {

void TrainingConfig::validate() const {
    if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be positive");
    if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
    if (folds < 2) throw std::invalid_argument("folds must be at least 2");
    if (validation_fraction <= 0.0 || validation_fraction >= 1.0)
        throw std::invalid_argument("validation_fraction must be in (0,1)");
    if (kl_weight < 0.0) throw std::invalid_argument("kl_weight must be non-negative");
}

FoldSplit stratified_kfold(const std::vector<int>& labels, int k, double validation_fraction,
                           std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("stratified_kfold: k must be at least 2");
    std::vector<std::vector<int>> by_class(2);
    for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw std::invalid_argument("stratified_kfold: labels must be 0/1");
        by_class[labels[i]].push_back(i);
    }
    for (int c = 0; c < 2; ++c) {
        if (static_cast<int>(by_class[c].size()) < k)
            throw std::invalid_argument("stratified_kfold: class " + std::to_string(c) + " has " +
                                        std::to_string(by_class[c].size()) +
                                        " members, fewer than k=" + std::to_string(k));
    }
    std::mt19937_64 rng(seed);
    FoldSplit split;
    split.folds.resize(k);
    // round-robin deal per class into test folds
    for (int c = 0; c < 2; ++c) {
        auto ids = by_class[c];
        std::shuffle(ids.begin(), ids.end(), rng);
        for (std::size_t i = 0; i < ids.size(); ++i)
            split.folds[i % k].test.push_back(ids[i]);
    }
    for (int f = 0; f < k; ++f) {
        auto& fold = split.folds[f];
        std::vector<bool> in_test(labels.size(), false);
        for (int i : fold.test) in_test[i] = true;
        std::vector<std::vector<int>> pool(2);
        for (int i = 0; i < static_cast<int>(labels.size()); ++i)
            if (!in_test[i]) pool[labels[i]].push_back(i);
        for (int c = 0; c < 2; ++c) {
            std::shuffle(pool[c].begin(), pool[c].end(), rng);
            int n_val = std::max(
                1, static_cast<int>(std::lround(validation_fraction * pool[c].size())));
            n_val = std::min(n_val, static_cast<int>(pool[c].size()) - 1);
            for (int i = 0; i < static_cast<int>(pool[c].size()); ++i) {
                (i < n_val ? fold.val : fold.train).push_back(pool[c][i]);
            }
        }
        std::sort(fold.test.begin(), fold.test.end());
        std::sort(fold.val.begin(), fold.val.end());
        std::sort(fold.train.begin(), fold.train.end());
    }
    return split;
}

void adam_step(std::vector<Tensor>& params, AdamState& state, const TrainingConfig& config) {
    if (state.m.size() != params.size()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i].size(), 0.0f);
            state.v[i].assign(params[i].size(), 0.0f);
        }
    }
    state.step += 1;
    const double b1 = config.adam_beta1, b2 = config.adam_beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& value = params[i].values();
        const auto& grad = params[i].grad();
        auto& m = state.m[i];
        auto& v = state.v[i];
        if (m.size() != value.size())
            throw std::invalid_argument("adam_step: state/parameter shape mismatch");
        for (std::size_t j = 0; j < value.size(); ++j) {
            double g = grad[j];
            m[j] = static_cast<float>(b1 * m[j] + (1.0 - b1) * g);
            v[j] = static_cast<float>(b2 * v[j] + (1.0 - b2) * g * g);
            double mhat = m[j] / bc1;
            double vhat = v[j] / bc2;
            value[j] -= static_cast<float>(config.learning_rate * mhat /
                                           (std::sqrt(vhat) + config.adam_eps));
        }
    }
}

namespace {

VaeParameters clone_params(const VaeParameters& p) {
    VaeParameters out = VaeParameters::zeros(p.arch);
    auto src = p.named_parameters();
    auto dst = out.named_parameters();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i].second.values() = src[i].second.values();
    return out;
}

}  // namespace

LossBreakdown evaluate_loss(const Cohort& cohort, const std::vector<int>& ids,
                            const VaeParameters& params, double kl_weight) {
    LossBreakdown acc;
    if (ids.empty()) return acc;
    Tensor zero_noise = Tensor::zeros({params.arch.latent_dim});
    for (int id : ids) {
        SubjectBatch batch = subject_batch(cohort.subjects[id], cohort.n_modalities);
        LossBreakdown subj;
        for (const auto& vol : batch.volumes) {
            Tensor x = volume_to_tensor(vol);
            ElboResult r = elbo_loss(x, params, zero_noise, kl_weight);
            subj.total += r.values.total;
            subj.kl += r.values.kl;
            subj.recon += r.values.recon;
        }
        double n = static_cast<double>(batch.volumes.size());
        acc.total += subj.total / n;
        acc.kl += subj.kl / n;
        acc.recon += subj.recon / n;
    }
    double n = static_cast<double>(ids.size());
    acc.total /= n;
    acc.kl /= n;
    acc.recon /= n;
    return acc;
}

TrainResult train_vae(const Cohort& cohort, const std::vector<int>& train_ids,
                      const std::vector<int>& val_ids, const ArchitectureConfig& arch,
                      const TrainingConfig& config) {
    config.validate();
    if (train_ids.empty()) throw std::invalid_argument("train_vae: empty training set");
    VaeParameters params = VaeParameters::init(arch, config.seed);
    std::vector<Tensor> trainable = params.trainable();
    AdamState state;
    std::mt19937_64 shuffle_rng(config.seed ^ 0x5D4C3B2A19080706ULL);
    std::mt19937_64 noise_rng(config.seed ^ 0xC0FFEE1234567890ULL);
    std::normal_distribution<float> normal(0.0f, 1.0f);

    TrainResult result;
    EpochRecord first;
    first.epoch = 0;
    first.train = evaluate_loss(cohort, train_ids, params, config.kl_weight);
    first.val = evaluate_loss(cohort, val_ids, params, config.kl_weight);
    result.history.push_back(first);

    double best_val = val_ids.empty() ? 0.0 : first.val.total;
    VaeParameters best = clone_params(params);
    bool have_best = !val_ids.empty();

    std::vector<int> order = train_ids;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        LossBreakdown epoch_train;
        for (int id : order) {
            SubjectBatch batch = subject_batch(cohort.subjects[id], cohort.n_modalities);
            for (auto& t : trainable) t.zero_grad();
            Tensor total;
            LossBreakdown step_values;
            for (const auto& vol : batch.volumes) {
                std::vector<float> eps(static_cast<std::size_t>(arch.latent_dim));
                for (auto& e : eps) e = normal(noise_rng);
                Tensor noise = Tensor::from_data({arch.latent_dim}, std::move(eps));
                Tensor x = volume_to_tensor(vol);
                ElboResult r = elbo_loss(x, params, noise, config.kl_weight);
                total = total.defined() ? add(total, r.total) : r.total;
                step_values.total += r.values.total;
                step_values.kl += r.values.kl;
                step_values.recon += r.values.recon;
            }
            float inv_n = 1.0f / static_cast<float>(batch.volumes.size());
            Tensor loss = scale(total, inv_n);
            step_values.total *= inv_n;
            step_values.kl *= inv_n;
            step_values.recon *= inv_n;
            if (!std::isfinite(step_values.total)) {
                throw std::runtime_error("train_vae: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", subject " +
                                         cohort.subjects[id].id);
            }
            backward(loss);
            adam_step(trainable, state, config);
            epoch_train.total += step_values.total;
            epoch_train.kl += step_values.kl;
            epoch_train.recon += step_values.recon;
        }
        double n_steps = static_cast<double>(order.size());
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train.total = epoch_train.total / n_steps;
        rec.train.kl = epoch_train.kl / n_steps;
        rec.train.recon = epoch_train.recon / n_steps;
        rec.val = evaluate_loss(cohort, val_ids, params, config.kl_weight);
        result.history.push_back(rec);
        if (!val_ids.empty() && rec.val.total < best_val) {
            best_val = rec.val.total;
            best = clone_params(params);
        }
    }
    result.params = have_best ? std::move(best) : std::move(params);
    return result;
}

void write_history(const std::string& path, const std::vector<EpochRecord>& history) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write history: " + path);
    os << "epoch\ttrain_total\ttrain_kl\ttrain_recon\tval_total\tval_kl\tval_recon\n";
    os.precision(9);
    for (const auto& r : history) {
        os << r.epoch << "\t" << r.train.total << "\t" << r.train.kl << "\t" << r.train.recon
           << "\t" << r.val.total << "\t" << r.val.kl << "\t" << r.val.recon << "\n";
    }
}

}  // namespace mvae
