#pragma once

#include "mvae/tensor.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

// Shared encoder-decoder VAE over volumes. One encoder and one decoder serve
// every modality; the latent posterior is a diagonal Gaussian (mu, logvar).

namespace mvae {

struct ArchitectureConfig {
    std::array<int, 3> input_extents{24, 28, 24};
    // encoder_channels[0] is the input channel count (1 for volumes); each
    // transition is a k=3 s=2 p=1 conv.
    std::vector<int> encoder_channels{1, 8, 16, 32, 64};
    // First num_stages() transitions are stride-2 transposed convs mirroring
    // the encoder; the rest are stride-1 refinement convs. Last transition has
    // stride 1, no bias, tanh. Must start at encoder_channels.back() and end at 1.
    std::vector<int> decoder_channels{64, 32, 16, 8, 4, 2, 1};
    int latent_dim = 16;
    int kernel = 3;
    int stride = 2;
    int padding = 1;

    int num_stages() const { return static_cast<int>(encoder_channels.size()) - 1; }
    // input extents, then extents after each stride-2 stage.
    std::vector<std::array<int, 3>> extent_chain() const;
    std::array<int, 3> bottleneck_extents() const { return extent_chain().back(); }
    // encoder_channels.back() * prod(bottleneck_extents)
    int flat_size() const;
    void validate() const;  // throws std::invalid_argument
};

struct LatentCode {
    Tensor mu;      // length latent_dim
    Tensor logvar;  // log of sigma^2
};

struct VaeParameters {
    ArchitectureConfig arch;
    std::vector<Tensor> enc_w, enc_b;           // per stride-2 conv stage
    Tensor mu_w, mu_b, logvar_w, logvar_b;      // affine heads on the flattened bottleneck
    Tensor stem_w, stem_b;                      // latent -> flattened bottleneck
    std::vector<Tensor> dec_tw, dec_tb;         // transposed conv stages
    std::vector<Tensor> dec_cw, dec_cb;         // stride-1 refinement convs; last has no bias

    // Kaiming-uniform fan-in init for weights, zero biases.
    static VaeParameters init(const ArchitectureConfig& arch, std::uint64_t seed);
    static VaeParameters zeros(const ArchitectureConfig& arch);

    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
    std::vector<Tensor> trainable() const;
    void set_requires_grad(bool on);
};

struct LossBreakdown {
    double total = 0.0;
    double kl = 0.0;
    double recon = 0.0;
};

struct ElboResult {
    Tensor total;  // scalar, graph-connected for backward()
    LossBreakdown values;
};

LatentCode encode(const Tensor& x, const VaeParameters& params);
// z = mu + exp(0.5*logvar) * noise, graph-connected.
Tensor reparameterize(const LatentCode& code, const Tensor& noise);
Tensor decode(const Tensor& z, const VaeParameters& params);

// 0.5 * sum(mu^2 + exp(logvar) - 1 - logvar), scalar tensor.
Tensor kl_term(const LatentCode& code);
// Closed form on plain vectors, double accumulation.
double kl_to_standard_normal(const std::vector<float>& mu, const std::vector<float>& logvar);

// 0.5 * sum((x - xhat)^2), scalar tensor.
Tensor reconstruction_term(const Tensor& x, const Tensor& xhat);
double reconstruction_loss(const std::vector<float>& x, const std::vector<float>& xhat);

// total = recon + kl_weight * kl on a single volume with one noise sample.
ElboResult elbo_loss(const Tensor& x, const VaeParameters& params, const Tensor& noise,
                     double kl_weight = 1.0);

// Checkpoint: magic + version, architecture as key-value text, then each
// parameter tensor as (name, shape, little-endian f32).
void save_checkpoint(const std::string& path, const VaeParameters& params);
VaeParameters load_checkpoint(const std::string& path);

}  // namespace mvae
