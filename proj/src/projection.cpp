#include "mvae/projection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

namespace mvae {

namespace {

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& X) {
    const long n = X.rows();
    Eigen::VectorXd sq = X.rowwise().squaredNorm();
    Eigen::MatrixXd D = sq.replicate(1, n) + sq.transpose().replicate(n, 1) -
                        2.0 * (X * X.transpose());
    D = D.cwiseMax(0.0);
    D.diagonal().setZero();
    return D;
}

// Row entropy (in bits) and conditional probabilities for a given precision.
double row_entropy(const Eigen::VectorXd& d, long self, double beta, Eigen::VectorXd& p) {
    const long n = d.size();
    p.resize(n);
    double maxlog = -std::numeric_limits<double>::infinity();
    for (long j = 0; j < n; ++j) {
        if (j == self) continue;
        maxlog = std::max(maxlog, -beta * d(j));
    }
    double z = 0.0;
    for (long j = 0; j < n; ++j) {
        p(j) = j == self ? 0.0 : std::exp(-beta * d(j) - maxlog);
        z += p(j);
    }
    double h = 0.0;
    for (long j = 0; j < n; ++j) {
        p(j) /= z;
        if (p(j) > 0.0) h -= p(j) * std::log2(p(j));
    }
    return h;
}

}  // namespace

AffinityMatrix perplexity_affinities(const Eigen::MatrixXd& X, double perplexity) {
    const long n = X.rows();
    if (perplexity <= 1.0 || perplexity >= static_cast<double>(n))
        throw std::invalid_argument("perplexity must lie in (1, N)");
    Eigen::MatrixXd D = squared_distances(X);
    const double target_h = std::log2(perplexity);

    AffinityMatrix result;
    result.perplexity = perplexity;
    Eigen::MatrixXd cond = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd p;
    for (long i = 0; i < n; ++i) {
        Eigen::VectorXd d = D.row(i).transpose();
        // duplicate points collapse the row distribution; epsilon jitter
        double dmax = 0.0;
        for (long j = 0; j < n; ++j)
            if (j != i) dmax = std::max(dmax, d(j));
        if (dmax == 0.0) {
            for (long j = 0; j < n; ++j)
                if (j != i) d(j) = 1e-12 * static_cast<double>(j + 1);
            ++result.jittered_rows;
        }
        double lo = 0.0, hi = std::numeric_limits<double>::infinity();
        double beta = 1.0;
        double h = row_entropy(d, i, beta, p);
        for (int it = 0; it < 200 && std::abs(std::exp2(h) - perplexity) > 1e-3; ++it) {
            if (h > target_h) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
            h = row_entropy(d, i, beta, p);
        }
        cond.row(i) = p.transpose();
    }
    result.P = (cond + cond.transpose()) / (2.0 * static_cast<double>(n));
    result.P.diagonal().setZero();
    return result;
}

ProjectionResult tsne_embed(const AffinityMatrix& affinities, int iters, double learning_rate,
                            std::uint64_t seed) {
    const long n = affinities.P.rows();
    if (n < 2 || affinities.P.cols() != n)
        throw std::invalid_argument("tsne_embed: invalid affinity matrix");
    if (iters < 1) throw std::invalid_argument("tsne_embed: iters must be positive");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> init(0.0, 1e-2);
    Eigen::MatrixXd Y(n, 2);
    for (long i = 0; i < n; ++i)
        for (int c = 0; c < 2; ++c) Y(i, c) = init(rng);
    Eigen::MatrixXd velocity = Eigen::MatrixXd::Zero(n, 2);

    const int exaggeration_end = iters / 4;
    double kl = 0.0;
    for (int it = 0; it < iters; ++it) {
        double exaggeration = it < exaggeration_end ? 4.0 : 1.0;
        double momentum = it < exaggeration_end ? 0.5 : 0.8;

        Eigen::MatrixXd Dy = squared_distances(Y);
        Eigen::MatrixXd W = (1.0 + Dy.array()).inverse().matrix();  // Student-t kernel
        W.diagonal().setZero();
        double wsum = W.sum();
        kl = 0.0;
        Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(n, 2);
        for (long i = 0; i < n; ++i) {
            for (long j = 0; j < n; ++j) {
                if (j == i) continue;
                double p = affinities.P(i, j);
                double q = W(i, j) / wsum;
                if (p > 0.0) kl += p * std::log(p / q);
                double coeff = 4.0 * (exaggeration * p - q) * W(i, j);
                grad(i, 0) += coeff * (Y(i, 0) - Y(j, 0));
                grad(i, 1) += coeff * (Y(i, 1) - Y(j, 1));
            }
        }
        if (!std::isfinite(kl))
            throw std::runtime_error("tsne_embed: non-finite objective at iteration " +
                                     std::to_string(it));
        velocity = momentum * velocity - learning_rate * grad;
        Y += velocity;
    }
    ProjectionResult result;
    result.Y = std::move(Y);
    result.kl = kl;
    return result;
}

double silhouette_score(const Eigen::MatrixXd& X, const std::vector<int>& labels) {
    const long n = X.rows();
    if (static_cast<long>(labels.size()) != n)
        throw std::invalid_argument("silhouette_score: label count mismatch");
    std::map<int, std::vector<long>> clusters;
    for (long i = 0; i < n; ++i) clusters[labels[i]].push_back(i);
    if (clusters.size() < 2)
        throw std::invalid_argument("silhouette_score: need at least 2 clusters");

    Eigen::MatrixXd D = squared_distances(X).cwiseSqrt();
    double total = 0.0;
    long counted = 0;
    for (long i = 0; i < n; ++i) {
        const auto& own = clusters[labels[i]];
        if (own.size() < 2) continue;  // singleton clusters are excluded
        double a = 0.0;
        for (long j : own)
            if (j != i) a += D(i, j);
        a /= static_cast<double>(own.size() - 1);
        double b = std::numeric_limits<double>::infinity();
        for (const auto& [lab, members] : clusters) {
            if (lab == labels[i]) continue;
            double mean = 0.0;
            for (long j : members) mean += D(i, j);
            mean /= static_cast<double>(members.size());
            b = std::min(b, mean);
        }
        double denom = std::max(a, b);
        if (denom > 0.0) {
            total += (b - a) / denom;
            ++counted;
        }
    }
    if (counted == 0) return 0.0;
    return total / static_cast<double>(counted);
}

}  // namespace mvae
