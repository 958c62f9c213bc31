#include "mvae/vae.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

namespace mvae {

std::vector<std::array<int, 3>> ArchitectureConfig::extent_chain() const {
    ConvSpec spec = ConvSpec::cubic(kernel, stride, padding, 1, 1);
    std::vector<std::array<int, 3>> chain{input_extents};
    for (int s = 0; s < num_stages(); ++s) chain.push_back(spec.output_extents(chain.back()));
    return chain;
}

int ArchitectureConfig::flat_size() const {
    auto b = bottleneck_extents();
    return encoder_channels.back() * b[0] * b[1] * b[2];
}

void ArchitectureConfig::validate() const {
    if (encoder_channels.size() < 2) throw std::invalid_argument("encoder needs at least one stage");
    for (int c : encoder_channels)
        if (c < 1) throw std::invalid_argument("non-positive encoder channel count");
    for (int c : decoder_channels)
        if (c < 1) throw std::invalid_argument("non-positive decoder channel count");
    if (decoder_channels.front() != encoder_channels.back())
        throw std::invalid_argument("decoder must start at the encoder's final channel count");
    if (decoder_channels.back() != 1)
        throw std::invalid_argument("decoder must end at 1 channel");
    if (static_cast<int>(decoder_channels.size()) < num_stages() + 2)
        throw std::invalid_argument("decoder channel list too short for stage count");
    if (latent_dim < 1) throw std::invalid_argument("latent_dim must be positive");
    extent_chain();  // throws if any stage collapses below 1 voxel
}

namespace {

Tensor kaiming_uniform(Shape shape, int fan_in, std::mt19937_64& rng) {
    float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
    std::uniform_real_distribution<float> dist(-bound, bound);
    std::vector<float> d(static_cast<std::size_t>(numel(shape)));
    for (auto& v : d) v = dist(rng);
    return Tensor::from_data(std::move(shape), std::move(d), true);
}

}  // namespace

VaeParameters VaeParameters::zeros(const ArchitectureConfig& arch) {
    arch.validate();
    VaeParameters p;
    p.arch = arch;
    const int k = arch.kernel;
    const int stages = arch.num_stages();
    for (int i = 0; i < stages; ++i) {
        int cin = arch.encoder_channels[i], cout = arch.encoder_channels[i + 1];
        p.enc_w.push_back(Tensor::zeros({cout, cin, k, k, k}, true));
        p.enc_b.push_back(Tensor::zeros({cout}, true));
    }
    const int flat = arch.flat_size();
    p.mu_w = Tensor::zeros({arch.latent_dim, flat}, true);
    p.mu_b = Tensor::zeros({arch.latent_dim}, true);
    p.logvar_w = Tensor::zeros({arch.latent_dim, flat}, true);
    p.logvar_b = Tensor::zeros({arch.latent_dim}, true);
    p.stem_w = Tensor::zeros({flat, arch.latent_dim}, true);
    p.stem_b = Tensor::zeros({flat}, true);
    for (int i = 0; i < stages; ++i) {
        int cin = arch.decoder_channels[i], cout = arch.decoder_channels[i + 1];
        p.dec_tw.push_back(Tensor::zeros({cin, cout, k, k, k}, true));
        p.dec_tb.push_back(Tensor::zeros({cout}, true));
    }
    const int n_refine = static_cast<int>(arch.decoder_channels.size()) - 1 - stages;
    for (int i = 0; i < n_refine; ++i) {
        int cin = arch.decoder_channels[stages + i], cout = arch.decoder_channels[stages + i + 1];
        p.dec_cw.push_back(Tensor::zeros({cout, cin, k, k, k}, true));
        if (i + 1 < n_refine) p.dec_cb.push_back(Tensor::zeros({cout}, true));
        else p.dec_cb.push_back(Tensor());  // final layer: no bias
    }
    return p;
}

VaeParameters VaeParameters::init(const ArchitectureConfig& arch, std::uint64_t seed) {
    VaeParameters p = zeros(arch);
    std::mt19937_64 rng(seed);
    const int k = arch.kernel;
    const int k3 = k * k * k;
    for (std::size_t i = 0; i < p.enc_w.size(); ++i) {
        int cin = arch.encoder_channels[i];
        p.enc_w[i] = kaiming_uniform(p.enc_w[i].shape(), cin * k3, rng);
    }
    const int flat = arch.flat_size();
    p.mu_w = kaiming_uniform(p.mu_w.shape(), flat, rng);
    p.logvar_w = kaiming_uniform(p.logvar_w.shape(), flat, rng);
    p.stem_w = kaiming_uniform(p.stem_w.shape(), arch.latent_dim, rng);
    for (std::size_t i = 0; i < p.dec_tw.size(); ++i) {
        int cin = arch.decoder_channels[i];
        p.dec_tw[i] = kaiming_uniform(p.dec_tw[i].shape(), cin * k3, rng);
    }
    const int stages = arch.num_stages();
    for (std::size_t i = 0; i < p.dec_cw.size(); ++i) {
        int cin = arch.decoder_channels[stages + i];
        p.dec_cw[i] = kaiming_uniform(p.dec_cw[i].shape(), cin * k3, rng);
    }
    return p;
}

std::vector<std::pair<std::string, Tensor>> VaeParameters::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (std::size_t i = 0; i < enc_w.size(); ++i) {
        out.emplace_back("enc.conv" + std::to_string(i) + ".weight", enc_w[i]);
        out.emplace_back("enc.conv" + std::to_string(i) + ".bias", enc_b[i]);
    }
    out.emplace_back("enc.mu.weight", mu_w);
    out.emplace_back("enc.mu.bias", mu_b);
    out.emplace_back("enc.logvar.weight", logvar_w);
    out.emplace_back("enc.logvar.bias", logvar_b);
    out.emplace_back("dec.stem.weight", stem_w);
    out.emplace_back("dec.stem.bias", stem_b);
    for (std::size_t i = 0; i < dec_tw.size(); ++i) {
        out.emplace_back("dec.tconv" + std::to_string(i) + ".weight", dec_tw[i]);
        out.emplace_back("dec.tconv" + std::to_string(i) + ".bias", dec_tb[i]);
    }
    for (std::size_t i = 0; i < dec_cw.size(); ++i) {
        out.emplace_back("dec.conv" + std::to_string(i) + ".weight", dec_cw[i]);
        if (dec_cb[i].defined())
            out.emplace_back("dec.conv" + std::to_string(i) + ".bias", dec_cb[i]);
    }
    return out;
}

std::vector<Tensor> VaeParameters::trainable() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

void VaeParameters::set_requires_grad(bool on) {
    for (auto& [name, t] : named_parameters()) t.node()->requires_grad = on;
}

LatentCode encode(const Tensor& x, const VaeParameters& params) {
    const auto& arch = params.arch;
    Shape want{arch.encoder_channels[0], arch.input_extents[0], arch.input_extents[1],
               arch.input_extents[2]};
    if (x.shape() != want) {
        throw std::invalid_argument("encode: input shape " + shape_str(x.shape()) +
                                    ", architecture expects " + shape_str(want));
    }
    Tensor h = x;
    for (int i = 0; i < arch.num_stages(); ++i) {
        ConvSpec spec = ConvSpec::cubic(arch.kernel, arch.stride, arch.padding,
                                        arch.encoder_channels[i], arch.encoder_channels[i + 1]);
        h = relu(conv3d(h, params.enc_w[i], params.enc_b[i], spec));
    }
    h = reshape(h, {arch.flat_size()});
    LatentCode code;
    code.mu = affine(h, params.mu_w, params.mu_b);
    code.logvar = affine(h, params.logvar_w, params.logvar_b);
    return code;
}

Tensor reparameterize(const LatentCode& code, const Tensor& noise) {
    Tensor sigma = exp_elem(scale(code.logvar, 0.5f));
    return add(code.mu, mul(sigma, noise));
}

Tensor decode(const Tensor& z, const VaeParameters& params) {
    const auto& arch = params.arch;
    if (z.shape() != Shape{arch.latent_dim}) {
        throw std::invalid_argument("decode: latent length " + std::to_string(z.size()) +
                                    ", expected " + std::to_string(arch.latent_dim));
    }
    const auto chain = arch.extent_chain();
    const int stages = arch.num_stages();
    Tensor h = relu(affine(z, params.stem_w, params.stem_b));
    auto b = chain.back();
    h = reshape(h, {arch.decoder_channels[0], b[0], b[1], b[2]});
    for (int i = 0; i < stages; ++i) {
        ConvSpec spec = ConvSpec::cubic(arch.kernel, arch.stride, arch.padding,
                                        arch.decoder_channels[i], arch.decoder_channels[i + 1]);
        // walk the extent chain back up towards the input extents
        h = relu(conv3d_transpose(h, params.dec_tw[i], params.dec_tb[i], spec,
                                  chain[stages - 1 - i]));
    }
    const int n_refine = static_cast<int>(params.dec_cw.size());
    for (int i = 0; i < n_refine; ++i) {
        bool last = (i + 1 == n_refine);
        ConvSpec spec = ConvSpec::cubic(arch.kernel, 1, arch.padding,
                                        arch.decoder_channels[stages + i],
                                        arch.decoder_channels[stages + i + 1], !last);
        Tensor c = conv3d(h, params.dec_cw[i], params.dec_cb[i], spec);
        h = last ? tanh_act(c) : relu(c);
    }
    return h;
}

Tensor kl_term(const LatentCode& code) {
    Tensor integrand = add(add(mul(code.mu, code.mu), exp_elem(code.logvar)),
                           affine_elem(code.logvar, -1.0f, -1.0f));
    return scale(sum(integrand), 0.5f);
}

double kl_to_standard_normal(const std::vector<float>& mu, const std::vector<float>& logvar) {
    if (mu.size() != logvar.size())
        throw std::invalid_argument("kl_to_standard_normal: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        double m = mu[i], lv = logvar[i];
        acc += m * m + std::exp(lv) - 1.0 - lv;
    }
    return 0.5 * acc;
}

Tensor reconstruction_term(const Tensor& x, const Tensor& xhat) {
    Tensor d = sub(x, xhat);
    return scale(sum(mul(d, d)), 0.5f);
}

double reconstruction_loss(const std::vector<float>& x, const std::vector<float>& xhat) {
    if (x.size() != xhat.size())
        throw std::invalid_argument("reconstruction_loss: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = static_cast<double>(x[i]) - xhat[i];
        acc += d * d;
    }
    return 0.5 * acc;
}

ElboResult elbo_loss(const Tensor& x, const VaeParameters& params, const Tensor& noise,
                     double kl_weight) {
    LatentCode code = encode(x, params);
    Tensor z = reparameterize(code, noise);
    Tensor xhat = decode(z, params);
    Tensor recon = reconstruction_term(x, xhat);
    Tensor kl = kl_term(code);
    ElboResult r;
    r.total = add(recon, scale(kl, static_cast<float>(kl_weight)));
    r.values.recon = recon.item();
    r.values.kl = kl.item();
    r.values.total = r.values.recon + kl_weight * r.values.kl;
    return r;
}

namespace {

constexpr char kMagic[4] = {'M', 'V', 'A', 'E'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<char*>(&v), 4); }
void write_u16(std::ostream& os, std::uint16_t v) { os.write(reinterpret_cast<char*>(&v), 2); }
std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
std::uint16_t read_u16(std::istream& is) {
    std::uint16_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 2);
    return v;
}

std::string ints_csv(const std::vector<int>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << ",";
        os << v[i];
    }
    return os.str();
}

std::vector<int> parse_ints_csv(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
    return out;
}

std::string arch_text(const ArchitectureConfig& a) {
    std::ostringstream os;
    os << "input_extents=" << a.input_extents[0] << "," << a.input_extents[1] << ","
       << a.input_extents[2] << "\n";
    os << "encoder_channels=" << ints_csv(a.encoder_channels) << "\n";
    os << "decoder_channels=" << ints_csv(a.decoder_channels) << "\n";
    os << "latent_dim=" << a.latent_dim << "\n";
    os << "kernel=" << a.kernel << "\n";
    os << "stride=" << a.stride << "\n";
    os << "padding=" << a.padding << "\n";
    return os.str();
}

ArchitectureConfig parse_arch_text(const std::string& text) {
    ArchitectureConfig a;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "input_extents") {
            auto v = parse_ints_csv(val);
            if (v.size() != 3) throw std::runtime_error("checkpoint: bad input_extents");
            a.input_extents = {v[0], v[1], v[2]};
        } else if (key == "encoder_channels") a.encoder_channels = parse_ints_csv(val);
        else if (key == "decoder_channels") a.decoder_channels = parse_ints_csv(val);
        else if (key == "latent_dim") a.latent_dim = std::stoi(val);
        else if (key == "kernel") a.kernel = std::stoi(val);
        else if (key == "stride") a.stride = std::stoi(val);
        else if (key == "padding") a.padding = std::stoi(val);
        else throw std::runtime_error("checkpoint: unknown architecture key '" + key + "'");
    }
    return a;
}

}  // namespace

void save_checkpoint(const std::string& path, const VaeParameters& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    std::string text = arch_text(params.arch);
    write_u32(os, static_cast<std::uint32_t>(text.size()));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    auto named = params.named_parameters();
    write_u32(os, static_cast<std::uint32_t>(named.size()));
    for (auto& [name, t] : named) {
        write_u16(os, static_cast<std::uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        std::uint8_t nd = static_cast<std::uint8_t>(t.shape().size());
        os.write(reinterpret_cast<char*>(&nd), 1);
        for (int e : t.shape()) write_u32(os, static_cast<std::uint32_t>(e));
        os.write(reinterpret_cast<const char*>(t.values().data()),
                 static_cast<std::streamsize>(t.size() * sizeof(float)));
    }
    if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

VaeParameters load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("bad checkpoint magic: " + path);
    std::uint32_t version = read_u32(is);
    if (version != kVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    std::uint32_t textlen = read_u32(is);
    std::string text(textlen, '\0');
    is.read(text.data(), textlen);
    ArchitectureConfig arch = parse_arch_text(text);
    VaeParameters params = VaeParameters::zeros(arch);
    std::map<std::string, Tensor> by_name;
    for (auto& [name, t] : params.named_parameters()) by_name.emplace(name, t);
    std::uint32_t count = read_u32(is);
    if (count != by_name.size())
        throw std::runtime_error("checkpoint tensor count mismatch in " + path);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint16_t namelen = read_u16(is);
        std::string name(namelen, '\0');
        is.read(name.data(), namelen);
        std::uint8_t nd = 0;
        is.read(reinterpret_cast<char*>(&nd), 1);
        Shape shape(nd);
        for (auto& e : shape) e = static_cast<int>(read_u32(is));
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw std::runtime_error("checkpoint: unexpected tensor '" + name + "'");
        if (it->second.shape() != shape)
            throw std::runtime_error("checkpoint: shape mismatch for '" + name + "'");
        is.read(reinterpret_cast<char*>(it->second.values().data()),
                static_cast<std::streamsize>(it->second.size() * sizeof(float)));
        if (!is) throw std::runtime_error("checkpoint truncated at tensor '" + name + "'");
    }
    return params;
}

}  // namespace mvae
