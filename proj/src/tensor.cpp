#include "mvae/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace mvae {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

std::int64_t numel(const Shape& shape) {
    std::int64_t n = 1;
    for (int e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

namespace detail {

void Node::ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0f);
}

}  // namespace detail

namespace {

std::shared_ptr<detail::Node> make_node(Shape shape, std::vector<float> data,
                                        bool requires_grad) {
    auto n = std::make_shared<detail::Node>();
    if (static_cast<std::int64_t>(data.size()) != numel(shape)) {
        throw std::invalid_argument("tensor data length " +
                                    std::to_string(data.size()) +
                                    " does not match shape " + shape_str(shape));
    }
    for (int e : shape) {
        if (e <= 0) throw std::invalid_argument("non-positive extent in shape " + shape_str(shape));
    }
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    return n;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
}

Tensor unary(const Tensor& a, std::vector<float> out,
             std::function<void(detail::Node&, detail::Node&)> back) {
    auto n = make_node(a.shape(), std::move(out), a.requires_grad());
    if (a.requires_grad()) {
        n->parents = {a.node()};
        n->backprop = [back = std::move(back)](detail::Node& self) {
            auto& p = *self.parents[0];
            if (!p.requires_grad) return;
            p.ensure_grad();
            back(self, p);
        };
    }
    return Tensor(n);
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    std::vector<float> d(static_cast<std::size_t>(numel(shape)), 0.0f);
    return Tensor(make_node(std::move(shape), std::move(d), requires_grad));
}

Tensor Tensor::full(Shape shape, float fill, bool requires_grad) {
    std::vector<float> d(static_cast<std::size_t>(numel(shape)), fill);
    return Tensor(make_node(std::move(shape), std::move(d), requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<float> data, bool requires_grad) {
    return Tensor(make_node(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(float v) { return from_data({1}, {v}, false); }

const Shape& Tensor::shape() const { return node_->shape; }
std::int64_t Tensor::size() const { return static_cast<std::int64_t>(node_->value.size()); }
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
const std::vector<float>& Tensor::values() const { return node_->value; }
std::vector<float>& Tensor::values() { return node_->value; }

const std::vector<float>& Tensor::grad() const {
    node_->ensure_grad();
    return node_->grad;
}

void Tensor::zero_grad() {
    node_->grad.assign(node_->value.size(), 0.0f);
}

float Tensor::item() const {
    if (size() != 1) {
        throw std::invalid_argument("item() on tensor of shape " + shape_str(shape()));
    }
    return node_->value[0];
}

ConvSpec ConvSpec::cubic(int k, int s, int p, int cin, int cout, bool bias) {
    ConvSpec spec;
    spec.kernel = {k, k, k};
    spec.stride = {s, s, s};
    spec.padding = {p, p, p};
    spec.in_channels = cin;
    spec.out_channels = cout;
    spec.bias = bias;
    return spec;
}

std::array<int, 3> ConvSpec::output_extents(const std::array<int, 3>& in) const {
    static const char* axis_name[3] = {"depth", "height", "width"};
    std::array<int, 3> out{};
    for (int a = 0; a < 3; ++a) {
        if (stride[a] <= 0) throw std::invalid_argument("non-positive stride");
        int num = in[a] + 2 * padding[a] - kernel[a];
        out[a] = num / stride[a] + 1;
        if (num < 0 || out[a] < 1) {
            throw std::invalid_argument(std::string("conv ") + axis_name[a] +
                                        " extent " + std::to_string(in[a]) +
                                        " too small for kernel/stride/padding");
        }
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    std::vector<float> out(a.values());
    const auto& bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    auto n = make_node(a.shape(), std::move(out), a.requires_grad() || b.requires_grad());
    if (n->requires_grad) {
        n->parents = {a.node(), b.node()};
        n->backprop = [](detail::Node& self) {
            for (auto& p : self.parents) {
                if (!p->requires_grad) continue;
                p->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
            }
        };
    }
    return Tensor(n);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    std::vector<float> out(a.values());
    const auto& bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    auto n = make_node(a.shape(), std::move(out), a.requires_grad() || b.requires_grad());
    if (n->requires_grad) {
        n->parents = {a.node(), b.node()};
        n->backprop = [](detail::Node& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            if (pa.requires_grad) {
                pa.ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
            }
        };
    }
    return Tensor(n);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    std::vector<float> out(a.values());
    const auto& bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    auto n = make_node(a.shape(), std::move(out), a.requires_grad() || b.requires_grad());
    if (n->requires_grad) {
        n->parents = {a.node(), b.node()};
        n->backprop = [](detail::Node& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            if (pa.requires_grad) {
                pa.ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    pa.grad[i] += self.grad[i] * pb.value[i];
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    pb.grad[i] += self.grad[i] * pa.value[i];
            }
        };
    }
    return Tensor(n);
}

Tensor scale(const Tensor& a, float k) { return affine_elem(a, k, 0.0f); }

Tensor affine_elem(const Tensor& a, float k, float c) {
    std::vector<float> out(a.values());
    for (auto& v : out) v = k * v + c;
    return unary(a, std::move(out), [k](detail::Node& self, detail::Node& p) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += k * self.grad[i];
    });
}

Tensor exp_elem(const Tensor& a) {
    std::vector<float> out(a.values());
    for (auto& v : out) v = std::exp(v);
    return unary(a, std::move(out), [](detail::Node& self, detail::Node& p) {
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            p.grad[i] += self.grad[i] * self.value[i];
    });
}

Tensor relu(const Tensor& a) {
    std::vector<float> out(a.values());
    for (auto& v : out) v = v > 0.0f ? v : 0.0f;
    return unary(a, std::move(out), [](detail::Node& self, detail::Node& p) {
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (p.value[i] > 0.0f) p.grad[i] += self.grad[i];
    });
}

Tensor tanh_act(const Tensor& a) {
    std::vector<float> out(a.values());
    for (auto& v : out) v = std::tanh(v);
    return unary(a, std::move(out), [](detail::Node& self, detail::Node& p) {
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            p.grad[i] += self.grad[i] * (1.0f - self.value[i] * self.value[i]);
    });
}

Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (float v : a.values()) acc += v;
    auto n = make_node({1}, {static_cast<float>(acc)}, a.requires_grad());
    if (a.requires_grad()) {
        n->parents = {a.node()};
        n->backprop = [](detail::Node& self) {
            auto& p = *self.parents[0];
            if (!p.requires_grad) return;
            p.ensure_grad();
            float g = self.grad[0];
            for (auto& pg : p.grad) pg += g;
        };
    }
    return Tensor(n);
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (numel(shape) != a.size()) {
        throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) +
                                    " as " + shape_str(shape));
    }
    auto n = make_node(std::move(shape), a.values(), a.requires_grad());
    if (a.requires_grad()) {
        n->parents = {a.node()};
        n->backprop = [](detail::Node& self) {
            auto& p = *self.parents[0];
            if (!p.requires_grad) return;
            p.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
        };
    }
    return Tensor(n);
}

Tensor affine(const Tensor& x, const Tensor& weights, const Tensor& bias) {
    if (weights.shape().size() != 2) {
        throw std::invalid_argument("affine: weights must be 2-D, got " +
                                    shape_str(weights.shape()));
    }
    const int out_dim = weights.shape()[0];
    const int in_dim = weights.shape()[1];
    if (x.size() != in_dim) {
        throw std::invalid_argument("affine: input length " + std::to_string(x.size()) +
                                    " does not match weight columns " + std::to_string(in_dim));
    }
    if (bias.defined() && bias.size() != out_dim) {
        throw std::invalid_argument("affine: bias length mismatch");
    }
    std::vector<float> out(static_cast<std::size_t>(out_dim));
    {
        ConstMatMap W(weights.values().data(), out_dim, in_dim);
        Eigen::Map<const Eigen::VectorXf> xv(x.values().data(), in_dim);
        Eigen::Map<Eigen::VectorXf> ov(out.data(), out_dim);
        ov.noalias() = W * xv;
        if (bias.defined()) {
            Eigen::Map<const Eigen::VectorXf> bv(bias.values().data(), out_dim);
            ov += bv;
        }
    }
    bool rg = x.requires_grad() || weights.requires_grad() ||
              (bias.defined() && bias.requires_grad());
    auto n = make_node({out_dim}, std::move(out), rg);
    if (rg) {
        n->parents = {x.node(), weights.node()};
        if (bias.defined()) n->parents.push_back(bias.node());
        n->backprop = [out_dim, in_dim](detail::Node& self) {
            auto& px = *self.parents[0];
            auto& pw = *self.parents[1];
            Eigen::Map<const Eigen::VectorXf> g(self.grad.data(), out_dim);
            if (px.requires_grad) {
                px.ensure_grad();
                ConstMatMap W(pw.value.data(), out_dim, in_dim);
                Eigen::Map<Eigen::VectorXf> gx(px.grad.data(), in_dim);
                gx.noalias() += W.transpose() * g;
            }
            if (pw.requires_grad) {
                pw.ensure_grad();
                Eigen::Map<const Eigen::VectorXf> xv(px.value.data(), in_dim);
                MatMap gW(pw.grad.data(), out_dim, in_dim);
                gW.noalias() += g * xv.transpose();
            }
            if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
                auto& pb = *self.parents[2];
                pb.ensure_grad();
                for (int o = 0; o < out_dim; ++o) pb.grad[o] += self.grad[o];
            }
        };
    }
    return Tensor(n);
}

namespace {

// im2col gathers conv input patches into a (C_in*k^3) x (outD*outH*outW)
// column matrix with zero padding, for GEMM-based conv. col2im_add is its
// adjoint (scatter-add).
void im2col_fill(const float* src, int cin, const std::array<int, 3>& in,
                 const std::array<int, 3>& out, const ConvSpec& spec,
                 Eigen::MatrixXf& col) {
    const int kd = spec.kernel[0], kh = spec.kernel[1], kw = spec.kernel[2];
    const long ocount = static_cast<long>(out[0]) * out[1] * out[2];
    col.setZero(static_cast<long>(cin) * kd * kh * kw, ocount);
    const long in_hw = static_cast<long>(in[1]) * in[2];
    long p = 0;
    for (int z = 0; z < out[0]; ++z)
        for (int y = 0; y < out[1]; ++y)
            for (int x = 0; x < out[2]; ++x, ++p) {
                const int z0 = z * spec.stride[0] - spec.padding[0];
                const int y0 = y * spec.stride[1] - spec.padding[1];
                const int x0 = x * spec.stride[2] - spec.padding[2];
                long r = 0;
                for (int c = 0; c < cin; ++c) {
                    const float* chan = src + static_cast<long>(c) * in[0] * in_hw;
                    for (int dz = 0; dz < kd; ++dz) {
                        const int iz = z0 + dz;
                        for (int dy = 0; dy < kh; ++dy) {
                            const int iy = y0 + dy;
                            for (int dx = 0; dx < kw; ++dx, ++r) {
                                const int ix = x0 + dx;
                                if (iz < 0 || iz >= in[0] || iy < 0 || iy >= in[1] ||
                                    ix < 0 || ix >= in[2])
                                    continue;
                                col(r, p) = chan[(static_cast<long>(iz) * in[1] + iy) * in[2] + ix];
                            }
                        }
                    }
                }
            }
}

void col2im_add(const Eigen::MatrixXf& col, int cin, const std::array<int, 3>& in,
                const std::array<int, 3>& out, const ConvSpec& spec, float* dst) {
    const int kd = spec.kernel[0], kh = spec.kernel[1], kw = spec.kernel[2];
    const long in_hw = static_cast<long>(in[1]) * in[2];
    long p = 0;
    for (int z = 0; z < out[0]; ++z)
        for (int y = 0; y < out[1]; ++y)
            for (int x = 0; x < out[2]; ++x, ++p) {
                const int z0 = z * spec.stride[0] - spec.padding[0];
                const int y0 = y * spec.stride[1] - spec.padding[1];
                const int x0 = x * spec.stride[2] - spec.padding[2];
                long r = 0;
                for (int c = 0; c < cin; ++c) {
                    float* chan = dst + static_cast<long>(c) * in[0] * in_hw;
                    for (int dz = 0; dz < kd; ++dz) {
                        const int iz = z0 + dz;
                        for (int dy = 0; dy < kh; ++dy) {
                            const int iy = y0 + dy;
                            for (int dx = 0; dx < kw; ++dx, ++r) {
                                const int ix = x0 + dx;
                                if (iz < 0 || iz >= in[0] || iy < 0 || iy >= in[1] ||
                                    ix < 0 || ix >= in[2])
                                    continue;
                                chan[(static_cast<long>(iz) * in[1] + iy) * in[2] + ix] += col(r, p);
                            }
                        }
                    }
                }
            }
}

std::array<int, 3> spatial3(const Shape& s, const char* op) {
    if (s.size() != 4) {
        throw std::invalid_argument(std::string(op) + ": expected 4-D [C,D,H,W] tensor, got " +
                                    shape_str(s));
    }
    return {s[1], s[2], s[3]};
}

}  // namespace

Tensor conv3d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              const ConvSpec& spec) {
    const auto in_ext = spatial3(input.shape(), "conv3d");
    if (input.shape()[0] != spec.in_channels) {
        throw std::invalid_argument("conv3d: input has " + std::to_string(input.shape()[0]) +
                                    " channels, spec expects " + std::to_string(spec.in_channels));
    }
    const long kvol = static_cast<long>(spec.kernel[0]) * spec.kernel[1] * spec.kernel[2];
    Shape want_w{spec.out_channels, spec.in_channels, spec.kernel[0], spec.kernel[1], spec.kernel[2]};
    if (weights.shape() != want_w) {
        throw std::invalid_argument("conv3d: weights shape " + shape_str(weights.shape()) +
                                    ", expected " + shape_str(want_w));
    }
    if (spec.bias != bias.defined()) {
        throw std::invalid_argument("conv3d: bias presence does not match spec");
    }
    if (bias.defined() && bias.size() != spec.out_channels) {
        throw std::invalid_argument("conv3d: bias length mismatch");
    }
    const auto out_ext = spec.output_extents(in_ext);
    const long ocount = static_cast<long>(out_ext[0]) * out_ext[1] * out_ext[2];

    Eigen::MatrixXf col;
    im2col_fill(input.values().data(), spec.in_channels, in_ext, out_ext, spec, col);

    std::vector<float> out(static_cast<std::size_t>(spec.out_channels) * ocount);
    {
        ConstMatMap W(weights.values().data(), spec.out_channels, spec.in_channels * kvol);
        MatMap O(out.data(), spec.out_channels, ocount);
        O.noalias() = W * col;
        if (bias.defined()) {
            for (int c = 0; c < spec.out_channels; ++c) O.row(c).array() += bias.values()[c];
        }
    }
    bool rg = input.requires_grad() || weights.requires_grad() ||
              (bias.defined() && bias.requires_grad());
    auto n = make_node({spec.out_channels, out_ext[0], out_ext[1], out_ext[2]}, std::move(out), rg);
    if (rg) {
        n->parents = {input.node(), weights.node()};
        if (bias.defined()) n->parents.push_back(bias.node());
        // col is rebuilt in the backward pass instead of saved with the node.
        n->backprop = [spec, in_ext, out_ext, kvol, ocount](detail::Node& self) {
            auto& px = *self.parents[0];
            auto& pw = *self.parents[1];
            ConstMatMap G(self.grad.data(), spec.out_channels, ocount);
            if (pw.requires_grad) {
                pw.ensure_grad();
                Eigen::MatrixXf col;
                im2col_fill(px.value.data(), spec.in_channels, in_ext, out_ext, spec, col);
                MatMap gW(pw.grad.data(), spec.out_channels, spec.in_channels * kvol);
                gW.noalias() += G * col.transpose();
            }
            if (px.requires_grad) {
                px.ensure_grad();
                ConstMatMap W(pw.value.data(), spec.out_channels, spec.in_channels * kvol);
                Eigen::MatrixXf gcol = W.transpose() * G;
                col2im_add(gcol, spec.in_channels, in_ext, out_ext, spec, px.grad.data());
            }
            if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
                auto& pb = *self.parents[2];
                pb.ensure_grad();
                for (int c = 0; c < spec.out_channels; ++c) {
                    double acc = 0.0;
                    for (long p = 0; p < ocount; ++p) acc += G(c, p);
                    pb.grad[c] += static_cast<float>(acc);
                }
            }
        };
    }
    return Tensor(n);
}

Tensor conv3d_transpose(const Tensor& input, const Tensor& weights, const Tensor& bias,
                        const ConvSpec& spec, const std::array<int, 3>& target_extents) {
    const auto in_ext = spatial3(input.shape(), "conv3d_transpose");
    if (input.shape()[0] != spec.in_channels) {
        throw std::invalid_argument("conv3d_transpose: input channel mismatch");
    }
    const long kvol = static_cast<long>(spec.kernel[0]) * spec.kernel[1] * spec.kernel[2];
    Shape want_w{spec.in_channels, spec.out_channels, spec.kernel[0], spec.kernel[1], spec.kernel[2]};
    if (weights.shape() != want_w) {
        throw std::invalid_argument("conv3d_transpose: weights shape " + shape_str(weights.shape()) +
                                    ", expected " + shape_str(want_w));
    }
    if (spec.bias != bias.defined()) {
        throw std::invalid_argument("conv3d_transpose: bias presence does not match spec");
    }
    // Output-size forcing: the matching forward conv on target_extents must
    // reproduce the input extents.
    const auto roundtrip = spec.output_extents(target_extents);
    if (roundtrip != in_ext) {
        throw std::invalid_argument(
            "conv3d_transpose: target extents [" + std::to_string(target_extents[0]) + "," +
            std::to_string(target_extents[1]) + "," + std::to_string(target_extents[2]) +
            "] are not achievable from input extents [" + std::to_string(in_ext[0]) + "," +
            std::to_string(in_ext[1]) + "," + std::to_string(in_ext[2]) + "]");
    }
    const long icount = static_cast<long>(in_ext[0]) * in_ext[1] * in_ext[2];
    const long tcount = static_cast<long>(target_extents[0]) * target_extents[1] * target_extents[2];

    std::vector<float> out(static_cast<std::size_t>(spec.out_channels) * tcount, 0.0f);
    {
        ConstMatMap W(weights.values().data(), spec.in_channels, spec.out_channels * kvol);
        ConstMatMap X(input.values().data(), spec.in_channels, icount);
        Eigen::MatrixXf col = W.transpose() * X;  // (C_out*k^3) x icount
        col2im_add(col, spec.out_channels, target_extents, in_ext, spec, out.data());
        if (bias.defined()) {
            for (int c = 0; c < spec.out_channels; ++c) {
                float b = bias.values()[c];
                float* chan = out.data() + static_cast<long>(c) * tcount;
                for (long i = 0; i < tcount; ++i) chan[i] += b;
            }
        }
    }
    bool rg = input.requires_grad() || weights.requires_grad() ||
              (bias.defined() && bias.requires_grad());
    auto n = make_node({spec.out_channels, target_extents[0], target_extents[1], target_extents[2]},
                       std::move(out), rg);
    if (rg) {
        n->parents = {input.node(), weights.node()};
        if (bias.defined()) n->parents.push_back(bias.node());
        n->backprop = [spec, in_ext, target_extents, kvol, icount, tcount](detail::Node& self) {
            auto& px = *self.parents[0];
            auto& pw = *self.parents[1];
            Eigen::MatrixXf gcol;  // im2col of the output gradient
            im2col_fill(self.grad.data(), spec.out_channels, target_extents, in_ext, spec, gcol);
            if (px.requires_grad) {
                px.ensure_grad();
                ConstMatMap W(pw.value.data(), spec.in_channels, spec.out_channels * kvol);
                MatMap gX(px.grad.data(), spec.in_channels, icount);
                gX.noalias() += W * gcol;
            }
            if (pw.requires_grad) {
                pw.ensure_grad();
                ConstMatMap X(px.value.data(), spec.in_channels, icount);
                MatMap gW(pw.grad.data(), spec.in_channels, spec.out_channels * kvol);
                gW.noalias() += X * gcol.transpose();
            }
            if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
                auto& pb = *self.parents[2];
                pb.ensure_grad();
                for (int c = 0; c < spec.out_channels; ++c) {
                    double acc = 0.0;
                    const float* chan = self.grad.data() + static_cast<long>(c) * tcount;
                    for (long i = 0; i < tcount; ++i) acc += chan[i];
                    pb.grad[c] += static_cast<float>(acc);
                }
            }
        };
    }
    return Tensor(n);
}

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1) {
        throw std::invalid_argument("backward: loss must be a scalar tensor");
    }
    // Reverse topological order via iterative post-order DFS.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> visited;
    struct Frame { detail::Node* n; std::size_t next; };
    std::vector<Frame> stack;
    stack.push_back({loss.node().get(), 0});
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next < f.n->parents.size()) {
            detail::Node* p = f.n->parents[f.next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.n);
            stack.pop_back();
        }
    }
    for (auto* n : order) n->grad.assign(n->value.size(), 0.0f);
    loss.node()->grad[0] = 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backprop) (*it)->backprop(**it);
    }
}

}  // namespace mvae
