#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

// Exact O(N^2) t-SNE and a silhouette-based cluster-quality score.

namespace mvae {

struct AffinityMatrix {
    Eigen::MatrixXd P;  // symmetric joint probabilities, zero diagonal, sums to 1
    double perplexity = 30.0;
    int jittered_rows = 0;  // rows whose bandwidth search needed epsilon jitter
};

// Per-row Gaussian bandwidths found by bisection so each conditional
// distribution's perplexity is within 1e-3 of the target.
AffinityMatrix perplexity_affinities(const Eigen::MatrixXd& X, double perplexity);

struct ProjectionResult {
    Eigen::MatrixXd Y;  // N x 2
    double kl = 0.0;    // final KL(P||Q)
};

// Gradient descent on KL(P||Q) with a Student-t low-dimensional kernel.
// Early exaggeration for the first quarter of iterations, momentum 0.5
// switching to 0.8 afterwards. Deterministic given seed.
ProjectionResult tsne_embed(const AffinityMatrix& affinities, int iters, double learning_rate,
                            std::uint64_t seed);

// Mean silhouette coefficient over points grouped by label; clusters with a
// single point are excluded. Needs at least 2 distinct labels.
double silhouette_score(const Eigen::MatrixXd& X, const std::vector<int>& labels);

}  // namespace mvae
