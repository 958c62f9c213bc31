#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mvae/tensor.hpp"
#include "oracles.hpp"

#include <random>

using namespace mvae;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, float half_range = 0.5f,
                     bool requires_grad = false) {
    std::uniform_real_distribution<float> dist(-half_range, half_range);
    std::vector<float> d(static_cast<std::size_t>(numel(shape)));
    for (auto& v : d) v = dist(rng);
    return Tensor::from_data(std::move(shape), std::move(d), requires_grad);
}

}  // namespace

TEST_CASE("conv output extent formula and the reference-size chain") {
    ConvSpec spec = ConvSpec::cubic(3, 2, 1, 1, 1);
    std::array<int, 3> e{53, 63, 52};
    e = spec.output_extents(e);
    CHECK(e == std::array<int, 3>{27, 32, 26});
    e = spec.output_extents(e);
    CHECK(e == std::array<int, 3>{14, 16, 13});
    e = spec.output_extents(e);
    CHECK(e == std::array<int, 3>{7, 8, 7});
    e = spec.output_extents(e);
    CHECK(e == std::array<int, 3>{4, 4, 4});
}

TEST_CASE("conv rejects collapsing extents naming the axis") {
    ConvSpec spec = ConvSpec::cubic(5, 1, 0, 1, 1);
    try {
        spec.output_extents({8, 8, 3});
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("width") != std::string::npos);
    }
}

TEST_CASE("identity kernel convolution is the identity") {
    std::mt19937_64 rng(7);
    Tensor x = random_tensor({1, 4, 5, 4}, rng);
    std::vector<float> w(27, 0.0f);
    w[13] = 1.0f;  // center tap
    Tensor weights = Tensor::from_data({1, 1, 3, 3, 3}, w);
    ConvSpec spec = ConvSpec::cubic(3, 1, 1, 1, 1, false);
    Tensor y = conv3d(x, weights, Tensor(), spec);
    REQUIRE(y.shape() == x.shape());
    for (std::size_t i = 0; i < x.values().size(); ++i)
        CHECK(y.values()[i] == doctest::Approx(x.values()[i]).epsilon(1e-6));
}

TEST_CASE("conv3d matches the direct-loop oracle") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor x = random_tensor({1, 5, 5, 5}, rng);
        Tensor w = random_tensor({2, 1, 3, 3, 3}, rng);
        Tensor b = random_tensor({2}, rng);
        ConvSpec spec = ConvSpec::cubic(3, 2, 1, 1, 2);
        Tensor y = conv3d(x, w, b, spec);
        std::array<int, 3> out_ext{};
        auto ref = oracles::naive_conv3d(x.values(), 1, {5, 5, 5}, w.values(), 2, {3, 3, 3},
                                         {2, 2, 2}, {1, 1, 1}, b.values(), out_ext);
        REQUIRE(y.shape() == Shape{2, out_ext[0], out_ext[1], out_ext[2]});
        for (std::size_t i = 0; i < ref.size(); ++i) {
            CHECK(std::abs(y.values()[i] - ref[i]) <=
                  1e-5 * std::max(1.0f, std::abs(ref[i])));
        }
    }
}

TEST_CASE("conv3d shape errors carry a diagnostic") {
    std::mt19937_64 rng(3);
    Tensor x = random_tensor({2, 5, 5, 5}, rng);
    Tensor w = random_tensor({2, 1, 3, 3, 3}, rng);
    ConvSpec spec = ConvSpec::cubic(3, 2, 1, 1, 2, false);
    CHECK_THROWS_AS(conv3d(x, w, Tensor(), spec), std::invalid_argument);
    Tensor x1 = random_tensor({1, 5, 5, 5}, rng);
    Tensor wbad = random_tensor({2, 1, 3, 3, 5}, rng);
    CHECK_THROWS_AS(conv3d(x1, wbad, Tensor(), spec), std::invalid_argument);
}

TEST_CASE("conv3d_transpose output-size forcing") {
    std::mt19937_64 rng(17);
    Tensor x = random_tensor({2, 4, 4, 4}, rng);
    Tensor w = random_tensor({2, 1, 3, 3, 3}, rng);
    ConvSpec spec = ConvSpec::cubic(3, 2, 1, 2, 1, false);
    Tensor y = conv3d_transpose(x, w, Tensor(), spec, {7, 8, 7});
    CHECK(y.shape() == Shape{1, 7, 8, 7});
    // (9,9,9) does not round-trip to (4,4,4) under this geometry
    CHECK_THROWS_AS(conv3d_transpose(x, w, Tensor(), spec, {9, 9, 9}), std::invalid_argument);
}

TEST_CASE("conv3d_transpose with k=1 s=1 identity weights is the identity") {
    std::mt19937_64 rng(19);
    Tensor x = random_tensor({1, 3, 4, 3}, rng);
    Tensor w = Tensor::from_data({1, 1, 1, 1, 1}, {1.0f});
    ConvSpec spec;
    spec.kernel = {1, 1, 1};
    spec.stride = {1, 1, 1};
    spec.padding = {0, 0, 0};
    spec.in_channels = 1;
    spec.out_channels = 1;
    spec.bias = false;
    Tensor y = conv3d_transpose(x, w, Tensor(), spec, {3, 4, 3});
    for (std::size_t i = 0; i < x.values().size(); ++i)
        CHECK(y.values()[i] == doctest::Approx(x.values()[i]));
}

TEST_CASE("conv3d_transpose is the adjoint of conv3d") {
    // <conv(x), y> == <x, conv_transpose(y)> with the shared weight buffer.
    std::mt19937_64 rng(23);
    Tensor x = random_tensor({2, 4, 4, 4}, rng);
    Tensor w = random_tensor({3, 2, 3, 3, 3}, rng);
    ConvSpec fwd = ConvSpec::cubic(3, 2, 1, 2, 3, false);
    Tensor cx = conv3d(x, w, Tensor(), fwd);
    Tensor y = random_tensor(cx.shape(), rng);

    Tensor wt = Tensor::from_data({3, 2, 3, 3, 3}, w.values());
    ConvSpec bwd = ConvSpec::cubic(3, 2, 1, 3, 2, false);
    Tensor cty = conv3d_transpose(y, wt, Tensor(), bwd, {4, 4, 4});

    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < cx.values().size(); ++i)
        lhs += static_cast<double>(cx.values()[i]) * y.values()[i];
    for (std::size_t i = 0; i < x.values().size(); ++i)
        rhs += static_cast<double>(x.values()[i]) * cty.values()[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-4));
}

TEST_CASE("conv transpose of conv restores the spatial extents") {
    std::mt19937_64 rng(29);
    for (auto ext : {std::array<int, 3>{5, 6, 7}, {8, 9, 8}, {11, 5, 9}}) {
        Tensor x = random_tensor({1, ext[0], ext[1], ext[2]}, rng);
        Tensor w = random_tensor({2, 1, 3, 3, 3}, rng);
        ConvSpec fwd = ConvSpec::cubic(3, 2, 1, 1, 2, false);
        Tensor mid = conv3d(x, w, Tensor(), fwd);
        Tensor wt = random_tensor({2, 1, 3, 3, 3}, rng);
        ConvSpec bwd = ConvSpec::cubic(3, 2, 1, 2, 1, false);
        Tensor back = conv3d_transpose(mid, wt, Tensor(), bwd, ext);
        CHECK(back.shape() == Shape{1, ext[0], ext[1], ext[2]});
    }
}

TEST_CASE("conv3d is linear for bias-free specs") {
    std::mt19937_64 rng(31);
    Tensor x = random_tensor({1, 5, 5, 5}, rng);
    Tensor y = random_tensor({1, 5, 5, 5}, rng);
    Tensor w = random_tensor({2, 1, 3, 3, 3}, rng);
    ConvSpec spec = ConvSpec::cubic(3, 2, 1, 1, 2, false);
    const float a = 1.7f, b = -0.6f;
    Tensor combo = add(scale(x, a), scale(y, b));
    Tensor lhs = conv3d(combo, w, Tensor(), spec);
    Tensor rhs = add(scale(conv3d(x, w, Tensor(), spec), a),
                     scale(conv3d(y, w, Tensor(), spec), b));
    for (std::size_t i = 0; i < lhs.values().size(); ++i)
        CHECK(std::abs(lhs.values()[i] - rhs.values()[i]) <=
              1e-5f * std::max(1.0f, std::abs(rhs.values()[i])));
}

TEST_CASE("affine matches hand arithmetic and the dot-product oracle") {
    Tensor x = Tensor::from_data({2}, {1.0f, 2.0f});
    Tensor w = Tensor::from_data({2, 2}, {1.0f, 1.0f, 1.0f, -1.0f});
    Tensor b = Tensor::zeros({2});
    Tensor y = affine(x, w, b);
    CHECK(y.values()[0] == doctest::Approx(3.0f));
    CHECK(y.values()[1] == doctest::Approx(-1.0f));

    std::mt19937_64 rng(37);
    Tensor x8 = random_tensor({8}, rng);
    Tensor w84 = random_tensor({4, 8}, rng);
    Tensor b4 = random_tensor({4}, rng);
    Tensor out = affine(x8, w84, b4);
    for (int o = 0; o < 4; ++o) {
        double acc = b4.values()[o];
        for (int i = 0; i < 8; ++i) acc += static_cast<double>(w84.values()[o * 8 + i]) * x8.values()[i];
        CHECK(std::abs(out.values()[o] - acc) <= 1e-6 * std::max(1.0, std::abs(acc)));
    }

    CHECK_THROWS_AS(affine(x8, w, b), std::invalid_argument);
}

TEST_CASE("identity affine is the identity") {
    Tensor x = Tensor::from_data({3}, {0.5f, -1.0f, 2.0f});
    Tensor w = Tensor::from_data({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    Tensor y = affine(x, w, Tensor::zeros({3}));
    for (int i = 0; i < 3; ++i) CHECK(y.values()[i] == x.values()[i]);
}

TEST_CASE("activations") {
    Tensor x = Tensor::from_data({3}, {-1.0f, 0.0f, 2.0f});
    Tensor r = relu(x);
    CHECK(r.values() == std::vector<float>{0.0f, 0.0f, 2.0f});
    CHECK(tanh_act(Tensor::scalar(0.0f)).item() == 0.0f);
    Tensor big = tanh_act(Tensor::from_data({3}, {5.0f, 20.0f, 80.0f}));
    for (float v : big.values()) {
        CHECK(v > 0.999f);
        CHECK(v <= 1.0f);
    }
}

TEST_CASE("backward of sum is all-ones; dead relu gives zero gradient") {
    Tensor x = Tensor::from_data({4}, {0.1f, -0.2f, 0.3f, -0.4f}, true);
    backward(sum(x));
    for (float g : x.grad()) CHECK(g == 1.0f);

    Tensor neg = Tensor::from_data({4}, {-1.0f, -2.0f, -0.5f, -3.0f}, true);
    backward(sum(relu(neg)));
    for (float g : neg.grad()) CHECK(g == 0.0f);
}

TEST_CASE("backward rejects non-scalar loss") {
    Tensor x = Tensor::from_data({2}, {1.0f, 2.0f}, true);
    CHECK_THROWS_AS(backward(x), std::invalid_argument);
}

TEST_CASE("gradients match central finite differences per layer type") {
    std::mt19937_64 rng(41);
    const double h = 1e-3, tol = 1e-3;

    // The analytic gradient comes from the float32 graph; the difference
    // quotient is taken on a double-precision re-evaluation of the same
    // function so that forward roundoff does not swamp the O(h) signal.
    auto check_param = [&](Tensor& param, const std::function<Tensor()>& forward,
                           const std::function<double()>& forward_double) {
        Tensor loss = forward();
        backward(loss);
        std::vector<double> analytic;
        std::vector<std::size_t> coords;
        for (std::size_t c = 0; c < param.values().size(); ++c) {
            coords.push_back(c);
            analytic.push_back(param.grad()[c]);
        }
        auto numeric = oracles::finite_difference(param, forward_double, coords, h);
        CHECK(oracles::max_relative_error(analytic, numeric) <= tol);
    };
    auto sum_tanh = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double e : v) s += std::tanh(e);
        return s;
    };

    SUBCASE("elementwise chain: tanh(exp(0.5x) * y)") {
        Tensor x = random_tensor({6}, rng, 0.4f, true);
        Tensor y = random_tensor({6}, rng, 0.4f, true);
        auto forward = [&] { return sum(tanh_act(mul(exp_elem(scale(x, 0.5f)), y))); };
        auto forward_double = [&] {
            double s = 0.0;
            for (std::size_t i = 0; i < x.values().size(); ++i)
                s += std::tanh(std::exp(0.5 * x.values()[i]) * y.values()[i]);
            return s;
        };
        check_param(x, forward, forward_double);
        check_param(y, forward, forward_double);
    }
    SUBCASE("affine") {
        Tensor x = random_tensor({5}, rng, 0.4f, true);
        Tensor w = random_tensor({3, 5}, rng, 0.4f, true);
        Tensor b = random_tensor({3}, rng, 0.4f, true);
        auto forward = [&] { return sum(tanh_act(affine(x, w, b))); };
        auto forward_double = [&] {
            double s = 0.0;
            for (int r = 0; r < 3; ++r) {
                double acc = b.values()[r];
                for (int c = 0; c < 5; ++c) acc += double(w.values()[r * 5 + c]) * x.values()[c];
                s += std::tanh(acc);
            }
            return s;
        };
        check_param(x, forward, forward_double);
        check_param(w, forward, forward_double);
        check_param(b, forward, forward_double);
    }
    SUBCASE("conv3d") {
        Tensor x = random_tensor({1, 4, 4, 4}, rng, 0.4f, true);
        Tensor w = random_tensor({2, 1, 3, 3, 3}, rng, 0.4f, true);
        Tensor b = random_tensor({2}, rng, 0.4f, true);
        ConvSpec spec = ConvSpec::cubic(3, 2, 1, 1, 2);
        auto forward = [&] { return sum(tanh_act(conv3d(x, w, b, spec))); };
        auto forward_double = [&] {
            std::array<int, 3> oe{};
            auto pre = oracles::naive_conv3d_double(x.values(), 1, {4, 4, 4}, w.values(), 2,
                                                    spec.kernel, spec.stride, spec.padding,
                                                    b.values(), oe);
            return sum_tanh(pre);
        };
        check_param(x, forward, forward_double);
        check_param(w, forward, forward_double);
        check_param(b, forward, forward_double);
    }
    SUBCASE("conv3d_transpose") {
        Tensor x = random_tensor({2, 2, 2, 2}, rng, 0.4f, true);
        Tensor w = random_tensor({2, 1, 3, 3, 3}, rng, 0.4f, true);
        Tensor b = random_tensor({1}, rng, 0.4f, true);
        ConvSpec spec = ConvSpec::cubic(3, 2, 1, 2, 1);
        auto forward = [&] {
            return sum(tanh_act(conv3d_transpose(x, w, b, spec, {4, 4, 4})));
        };
        auto forward_double = [&] {
            auto pre = oracles::naive_tconv3d_double(x.values(), 2, {2, 2, 2}, w.values(), 1,
                                                     spec.kernel, spec.stride, spec.padding,
                                                     b.values(), {4, 4, 4});
            return sum_tanh(pre);
        };
        check_param(x, forward, forward_double);
        check_param(w, forward, forward_double);
        check_param(b, forward, forward_double);
    }
}

TEST_CASE("forward is deterministic within a build") {
    std::mt19937_64 rng(43);
    Tensor x = random_tensor({1, 5, 5, 5}, rng);
    Tensor w = random_tensor({2, 1, 3, 3, 3}, rng);
    ConvSpec spec = ConvSpec::cubic(3, 2, 1, 1, 2, false);
    Tensor a = conv3d(x, w, Tensor(), spec);
    Tensor b = conv3d(x, w, Tensor(), spec);
    CHECK(a.values() == b.values());
}

TEST_CASE("gradient accumulates when a tensor is used twice") {
    Tensor x = Tensor::from_data({2}, {1.0f, 2.0f}, true);
    backward(sum(add(x, x)));
    for (float g : x.grad()) CHECK(g == 2.0f);
}
