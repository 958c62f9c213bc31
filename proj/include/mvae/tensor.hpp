#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

// Minimal dense float tensor with define-by-run reverse-mode autodiff.
// Tensors are immutable values once created; the tape is the implicit
// graph of parent links and is rebuilt on every forward pass.

namespace mvae {

using Shape = std::vector<int>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<float> value;
    std::vector<float> grad;  // allocated lazily, same length as value
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into the parents' grads.
    std::function<void(Node&)> backprop;

    void ensure_grad();
};

}  // namespace detail

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float fill, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<float> data,
                            bool requires_grad = false);
    static Tensor scalar(float v);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::int64_t size() const;
    bool requires_grad() const;

    const std::vector<float>& values() const;
    std::vector<float>& values();
    // Gradient accumulated by the last backward() call(s). Empty until
    // the tensor participates in a backward pass or zero_grad() is called.
    const std::vector<float>& grad() const;
    void zero_grad();

    float item() const;  // size-1 tensors only

    std::shared_ptr<detail::Node> node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

// Conv geometry shared by conv3d and conv3d_transpose. For the transpose,
// a ConvSpec describes the forward convolution being inverted: in_channels /
// out_channels always refer to the *transpose's* input and output.
struct ConvSpec {
    std::array<int, 3> kernel{3, 3, 3};
    std::array<int, 3> stride{2, 2, 2};
    std::array<int, 3> padding{1, 1, 1};
    int in_channels = 1;
    int out_channels = 1;
    bool bias = true;

    static ConvSpec cubic(int k, int s, int p, int cin, int cout, bool bias = true);

    // floor((in + 2*pad - kernel)/stride) + 1 per axis; throws naming the
    // offending axis when any extent drops below 1.
    std::array<int, 3> output_extents(const std::array<int, 3>& in) const;
};

// Elementwise / reduction ops.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float k);
// k*x + c elementwise.
Tensor affine_elem(const Tensor& a, float k, float c);
Tensor exp_elem(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor tanh_act(const Tensor& a);
// Scalar sum; accumulation in double.
Tensor sum(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

// out[o] = sum_i W[o,i] x[i] + b[o]; x must be flat, b may be undefined.
Tensor affine(const Tensor& x, const Tensor& weights, const Tensor& bias);

// input [C_in,D,H,W], weights [C_out,C_in,kd,kh,kw], bias [C_out] or undefined.
Tensor conv3d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              const ConvSpec& spec);

// input [C_in,d,h,w], weights [C_in,C_out,kd,kh,kw]. target_extents must be
// such that a conv3d with this geometry applied to them yields the input
// extents (output-size forcing resolves the stride ambiguity).
Tensor conv3d_transpose(const Tensor& input, const Tensor& weights,
                        const Tensor& bias, const ConvSpec& spec,
                        const std::array<int, 3>& target_extents);

// Reverse-mode pass from a scalar loss. Zeroes grads of every node reachable
// from the loss, then accumulates. Non-scalar loss is rejected.
void backward(const Tensor& loss);

}  // namespace mvae
