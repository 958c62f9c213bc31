#pragma once

// Independent reference implementations used only by tests: direct-loop
// convolution, central finite differences, Monte-Carlo KL, pairwise AUC.
// These must stay independent of the library's fast paths.

#include "mvae/tensor.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracles {

// Direct 7-nested-loop 3D convolution with zero padding.
inline std::vector<float> naive_conv3d(const std::vector<float>& input, int cin,
                                       const std::array<int, 3>& in_ext,
                                       const std::vector<float>& weights, int cout,
                                       const std::array<int, 3>& kernel,
                                       const std::array<int, 3>& stride,
                                       const std::array<int, 3>& padding,
                                       const std::vector<float>& bias,
                                       std::array<int, 3>& out_ext) {
    for (int a = 0; a < 3; ++a)
        out_ext[a] = (in_ext[a] + 2 * padding[a] - kernel[a]) / stride[a] + 1;
    std::vector<float> out(static_cast<std::size_t>(cout) * out_ext[0] * out_ext[1] * out_ext[2]);
    auto in_at = [&](int c, int z, int y, int x) -> double {
        if (z < 0 || z >= in_ext[0] || y < 0 || y >= in_ext[1] || x < 0 || x >= in_ext[2])
            return 0.0;
        return input[((static_cast<std::size_t>(c) * in_ext[0] + z) * in_ext[1] + y) * in_ext[2] + x];
    };
    std::size_t o = 0;
    for (int co = 0; co < cout; ++co)
        for (int z = 0; z < out_ext[0]; ++z)
            for (int y = 0; y < out_ext[1]; ++y)
                for (int x = 0; x < out_ext[2]; ++x, ++o) {
                    double acc = bias.empty() ? 0.0 : bias[co];
                    for (int ci = 0; ci < cin; ++ci)
                        for (int kz = 0; kz < kernel[0]; ++kz)
                            for (int ky = 0; ky < kernel[1]; ++ky)
                                for (int kx = 0; kx < kernel[2]; ++kx) {
                                    double w = weights[(((static_cast<std::size_t>(co) * cin + ci) *
                                                            kernel[0] + kz) * kernel[1] + ky) *
                                                           kernel[2] + kx];
                                    acc += w * in_at(ci, z * stride[0] - padding[0] + kz,
                                                     y * stride[1] - padding[1] + ky,
                                                     x * stride[2] - padding[2] + kx);
                                }
                    out[o] = static_cast<float>(acc);
                }
    return out;
}

// Double-precision variant of the direct convolution, for use as a
// finite-difference target where float32 forward roundoff would otherwise
// dominate the difference quotient.
template <class TIn, class TW>
inline std::vector<double> naive_conv3d_double(const std::vector<TIn>& input, int cin,
                                               const std::array<int, 3>& in_ext,
                                               const std::vector<TW>& weights, int cout,
                                               const std::array<int, 3>& kernel,
                                               const std::array<int, 3>& stride,
                                               const std::array<int, 3>& padding,
                                               const std::vector<float>& bias,
                                               std::array<int, 3>& out_ext) {
    for (int a = 0; a < 3; ++a)
        out_ext[a] = (in_ext[a] + 2 * padding[a] - kernel[a]) / stride[a] + 1;
    std::vector<double> out(static_cast<std::size_t>(cout) * out_ext[0] * out_ext[1] * out_ext[2]);
    auto in_at = [&](int c, int z, int y, int x) -> double {
        if (z < 0 || z >= in_ext[0] || y < 0 || y >= in_ext[1] || x < 0 || x >= in_ext[2])
            return 0.0;
        return input[((static_cast<std::size_t>(c) * in_ext[0] + z) * in_ext[1] + y) * in_ext[2] + x];
    };
    std::size_t o = 0;
    for (int co = 0; co < cout; ++co)
        for (int z = 0; z < out_ext[0]; ++z)
            for (int y = 0; y < out_ext[1]; ++y)
                for (int x = 0; x < out_ext[2]; ++x, ++o) {
                    double acc = bias.empty() ? 0.0 : bias[co];
                    for (int ci = 0; ci < cin; ++ci)
                        for (int kz = 0; kz < kernel[0]; ++kz)
                            for (int ky = 0; ky < kernel[1]; ++ky)
                                for (int kx = 0; kx < kernel[2]; ++kx) {
                                    double w = weights[(((static_cast<std::size_t>(co) * cin + ci) *
                                                            kernel[0] + kz) * kernel[1] + ky) *
                                                           kernel[2] + kx];
                                    acc += w * in_at(ci, z * stride[0] - padding[0] + kz,
                                                     y * stride[1] - padding[1] + ky,
                                                     x * stride[2] - padding[2] + kx);
                                }
                    out[o] = acc;
                }
    return out;
}

// Double-precision transposed convolution: the scatter adjoint of the direct
// convolution, with weights laid out [C_in, C_out, k, k, k] and output size
// forced to target_ext.
template <class TIn, class TW>
inline std::vector<double> naive_tconv3d_double(const std::vector<TIn>& input, int cin,
                                                const std::array<int, 3>& in_ext,
                                                const std::vector<TW>& weights, int cout,
                                                const std::array<int, 3>& kernel,
                                                const std::array<int, 3>& stride,
                                                const std::array<int, 3>& padding,
                                                const std::vector<float>& bias,
                                                const std::array<int, 3>& target_ext) {
    std::vector<double> out(static_cast<std::size_t>(cout) * target_ext[0] * target_ext[1] *
                            target_ext[2]);
    if (!bias.empty()) {
        std::size_t per = static_cast<std::size_t>(target_ext[0]) * target_ext[1] * target_ext[2];
        for (int co = 0; co < cout; ++co)
            for (std::size_t i = 0; i < per; ++i) out[co * per + i] = bias[co];
    }
    for (int ci = 0; ci < cin; ++ci)
        for (int iz = 0; iz < in_ext[0]; ++iz)
            for (int iy = 0; iy < in_ext[1]; ++iy)
                for (int ix = 0; ix < in_ext[2]; ++ix) {
                    double v = input[((static_cast<std::size_t>(ci) * in_ext[0] + iz) * in_ext[1] +
                                      iy) * in_ext[2] + ix];
                    for (int co = 0; co < cout; ++co)
                        for (int kz = 0; kz < kernel[0]; ++kz)
                            for (int ky = 0; ky < kernel[1]; ++ky)
                                for (int kx = 0; kx < kernel[2]; ++kx) {
                                    int oz = iz * stride[0] - padding[0] + kz;
                                    int oy = iy * stride[1] - padding[1] + ky;
                                    int ox = ix * stride[2] - padding[2] + kx;
                                    if (oz < 0 || oz >= target_ext[0] || oy < 0 ||
                                        oy >= target_ext[1] || ox < 0 || ox >= target_ext[2])
                                        continue;
                                    double w = weights[(((static_cast<std::size_t>(ci) * cout + co) *
                                                            kernel[0] + kz) * kernel[1] + ky) *
                                                           kernel[2] + kx];
                                    out[((static_cast<std::size_t>(co) * target_ext[0] + oz) *
                                             target_ext[1] + oy) * target_ext[2] + ox] += w * v;
                                }
                }
    return out;
}

// Central finite differences of a re-evaluated scalar loss with respect to
// one parameter tensor. The denominator uses the exact float32-representable
// perturbation actually stored. Returns the numeric gradient for the sampled
// coordinate indices.
inline std::vector<double> finite_difference(mvae::Tensor& param,
                                             const std::function<double()>& loss,
                                             const std::vector<std::size_t>& coords,
                                             double h) {
    std::vector<double> grads;
    for (std::size_t c : coords) {
        float saved = param.values()[c];
        float plus = static_cast<float>(saved + h);
        float minus = static_cast<float>(saved - h);
        param.values()[c] = plus;
        double up = loss();
        param.values()[c] = minus;
        double down = loss();
        param.values()[c] = saved;
        grads.push_back((up - down) / (static_cast<double>(plus) - minus));
    }
    return grads;
}

// max_i |analytic - numeric| / (|numeric| + 1e-8)
inline double max_relative_error(const std::vector<double>& analytic,
                                 const std::vector<double>& numeric) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        double rel = std::abs(analytic[i] - numeric[i]) / (std::abs(numeric[i]) + 1e-8);
        worst = std::max(worst, rel);
    }
    return worst;
}

struct McEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
};

// Monte-Carlo estimate of E_q[log q(z) - log p(z)] for diagonal Gaussians,
// q = N(mu, exp(logvar)), p = N(0, I).
inline McEstimate mc_kl(const std::vector<float>& mu, const std::vector<float>& logvar,
                        long samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    double sum = 0.0, sumsq = 0.0;
    for (long s = 0; s < samples; ++s) {
        double v = 0.0;
        for (std::size_t d = 0; d < mu.size(); ++d) {
            double eps = normal(rng);
            double z = mu[d] + std::exp(0.5 * logvar[d]) * eps;
            double logq = -0.5 * (eps * eps + logvar[d]);
            double logp = -0.5 * z * z;
            v += logq - logp;
        }
        sum += v;
        sumsq += v * v;
    }
    McEstimate est;
    est.mean = sum / samples;
    double sample_var = (sumsq - samples * est.mean * est.mean) / static_cast<double>(samples - 1);
    est.stderr_ = std::sqrt(sample_var / samples);
    return est;
}

// Exhaustive concordant-pair counting AUC.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double concordant = 0.0, ties = 0.0;
    long pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) concordant += 1.0;
            else if (scores[i] == scores[j]) ties += 1.0;
        }
    }
    return (concordant + 0.5 * ties) / static_cast<double>(pairs);
}

}  // namespace oracles
