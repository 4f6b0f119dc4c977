#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fi/gradcheck.hpp"
#include "fi/layers.hpp"

using namespace fi;

namespace {

Tensor delta_kernel_3x3() {
    Tensor w = Tensor::zeros({1, 1, 3, 3});
    w.data()[4] = 1;  // center tap
    return w;
}

// Flow values bounded away from integers so bilinear sampling is smooth at
// the finite-difference step.
Tensor random_noninteger_flow(int h, int w, Rng& rng, double lo, double hi) {
    Tensor f = Tensor::zeros({2, h, w});
    for (int i = 0; i < f.size(); ++i) {
        double v;
        do {
            v = rng.uniform(lo, hi);
        } while (std::abs(v - std::round(v)) < 1e-3);
        f.data()[i] = static_cast<real>(v);
    }
    return f;
}

double dot(const Tensor& a, const Tensor& b) {
    double acc = 0;
    for (int i = 0; i < a.size(); ++i)
        acc += static_cast<double>(a.data()[i]) * static_cast<double>(b.data()[i]);
    return acc;
}

}  // namespace

TEST_CASE("conv2d identity kernel", "[layers]") {
    Rng rng(1);
    Tensor x = Tensor::uniform({1, 3, 3}, rng);
    ConvParams p{delta_kernel_3x3(), Tensor::zeros({1}), 1, 1};
    Tensor y = conv2d_forward(x, p);
    REQUIRE(y.shape() == x.shape());
    for (int i = 0; i < x.size(); ++i) REQUIRE(y.data()[i] == x.data()[i]);
}

TEST_CASE("conv2d delta input with ones kernel", "[layers]") {
    Tensor x = Tensor::zeros({1, 3, 3});
    x.at(0, 1, 1) = 1;
    ConvParams p{Tensor::full({1, 1, 3, 3}, 1), Tensor::zeros({1}), 1, 1};
    Tensor y = conv2d_forward(x, p);
    for (int i = 0; i < 9; ++i) REQUIRE(y.data()[i] == 1.0);  // window always covers the delta
}

TEST_CASE("conv2d rejects channel mismatch and even kernels", "[layers]") {
    Rng rng(2);
    Tensor x = Tensor::uniform({2, 4, 4}, rng);
    ConvParams wrong_ch{Tensor::zeros({1, 3, 3, 3}), Tensor::zeros({1}), 1, 1};
    REQUIRE_THROWS_AS(conv2d_forward(x, wrong_ch), ValueError);
    ConvParams even{Tensor::zeros({1, 2, 2, 2}), Tensor::zeros({1}), 1, 0};
    REQUIRE_THROWS_AS(conv2d_forward(x, even), ValueError);
}

TEST_CASE("conv2d output extent", "[layers]") {
    Rng rng(3);
    Tensor x = Tensor::uniform({3, 7, 9}, rng);
    ConvParams p{Tensor::uniform({4, 3, 3, 3}, rng, -0.5, 0.5), Tensor::uniform({4}, rng), 2, 1};
    Tensor y = conv2d_forward(x, p);
    REQUIRE(y.shape() == std::vector<int>{4, 4, 5});
}

TEST_CASE("conv2d backward bias and identity cases", "[layers]") {
    Rng rng(4);
    Tensor x = Tensor::uniform({1, 3, 3}, rng);
    ConvParams p{delta_kernel_3x3(), Tensor::zeros({1}), 1, 1};
    Tensor up = Tensor::uniform({1, 3, 3}, rng);
    ConvGrads g = conv2d_backward(up, x, p);
    double sum = 0;
    for (int i = 0; i < up.size(); ++i) sum += up.data()[i];
    REQUIRE(g.bias.data()[0] == Catch::Approx(sum).margin(1e-12));
    for (int i = 0; i < up.size(); ++i)
        REQUIRE(g.input.data()[i] == Catch::Approx(up.data()[i]).margin(1e-12));
}

TEST_CASE("conv2d gradients match finite differences", "[layers]") {
    Rng rng(5);
    Tensor x = Tensor::uniform({1, 4, 4}, rng).set_requires_grad();
    Tensor w = Tensor::uniform({2, 1, 3, 3}, rng, -0.6, 0.6).set_requires_grad();
    Tensor b = Tensor::uniform({2}, rng, -0.2, 0.2).set_requires_grad();
    Tensor proj = Tensor::uniform({2, 4, 4}, rng);

    auto forward = [&]() { return reduce_sum(mul(conv2d(x, w, b, 1, 1), proj)); };
    {
        Tape tape;
        tape.backward(forward());
    }
    auto loss = [&]() { return static_cast<double>(forward().item()); };
    REQUIRE(fd_max_rel_error(x, x.grad(), loss) < 1e-5);
    REQUIRE(fd_max_rel_error(w, w.grad(), loss) < 1e-5);
    REQUIRE(fd_max_rel_error(b, b.grad(), loss) < 1e-5);
}

TEST_CASE("strided conv2d gradients match finite differences", "[layers]") {
    Rng rng(6);
    Tensor x = Tensor::uniform({2, 6, 6}, rng).set_requires_grad();
    Tensor w = Tensor::uniform({3, 2, 3, 3}, rng, -0.6, 0.6).set_requires_grad();
    Tensor b = Tensor::zeros({3}).set_requires_grad();
    Tensor proj = Tensor::uniform({3, 3, 3}, rng);
    auto forward = [&]() { return reduce_sum(mul(conv2d(x, w, b, 2, 1), proj)); };
    {
        Tape tape;
        tape.backward(forward());
    }
    auto loss = [&]() { return static_cast<double>(forward().item()); };
    REQUIRE(fd_max_rel_error(x, x.grad(), loss) < 1e-5);
    REQUIRE(fd_max_rel_error(w, w.grad(), loss) < 1e-5);
}

TEST_CASE("transposed conv shape arithmetic", "[layers]") {
    Rng rng(7);
    Tensor u = Tensor::uniform({1, 2, 2}, rng);
    ConvParams p{Tensor::uniform({1, 1, 2, 2}, rng), Tensor::zeros({1}), 2, 0};
    Tensor z = transposed_conv2d_forward(u, p);
    REQUIRE(z.shape() == std::vector<int>{1, 4, 4});
}

TEST_CASE("transposed conv is the adjoint of conv", "[layers]") {
    Rng rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        int H = 5 + static_cast<int>(rng.below(6));
        int W = 5 + static_cast<int>(rng.below(6));
        int s = 1 + static_cast<int>(rng.below(2));
        Tensor x = Tensor::uniform({2, H, W}, rng);
        ConvParams p{Tensor::uniform({3, 2, 3, 3}, rng, -1, 1), Tensor::zeros({3}), s, 1};
        Tensor y = Tensor::uniform({3, conv_out_extent(H, 3, s, 1), conv_out_extent(W, 3, s, 1)}, rng);
        double lhs = dot(conv2d_forward(x, p), y);
        double rhs = dot(x, transposed_conv2d_forward(y, p, H, W));
        REQUIRE(std::abs(lhs - rhs) < 1e-10 * std::max(1.0, std::abs(lhs)));
    }
}

TEST_CASE("transposed conv stamps the kernel at a delta", "[layers]") {
    Rng rng(9);
    Tensor u = Tensor::zeros({1, 3, 3});
    u.at(0, 1, 1) = 1;
    Tensor w = Tensor::uniform({1, 1, 3, 3}, rng);
    ConvParams p{w, Tensor::zeros({1}), 2, 0};
    Tensor z = transposed_conv2d_forward(u, p);  // 7x7
    REQUIRE(z.shape() == std::vector<int>{1, 7, 7});
    // the delta at output position (1,1) touches input rows 2..4 via the kernel
    for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx)
            REQUIRE(z.at(0, 2 + ky, 2 + kx) == w.data()[ky * 3 + kx]);
    REQUIRE(z.at(0, 0, 0) == 0.0);
}

TEST_CASE("transposed conv gradients match finite differences", "[layers]") {
    Rng rng(10);
    Tensor x = Tensor::uniform({2, 3, 3}, rng).set_requires_grad();
    Tensor w = Tensor::uniform({2, 1, 3, 3}, rng, -0.7, 0.7).set_requires_grad();
    Tensor b = Tensor::uniform({1}, rng).set_requires_grad();
    Tensor proj = Tensor::uniform({1, 5, 5}, rng);
    auto forward = [&]() { return reduce_sum(mul(transposed_conv2d(x, w, b, 2, 1, 5, 5), proj)); };
    {
        Tape tape;
        tape.backward(forward());
    }
    auto loss = [&]() { return static_cast<double>(forward().item()); };
    REQUIRE(fd_max_rel_error(x, x.grad(), loss) < 1e-5);
    REQUIRE(fd_max_rel_error(w, w.grad(), loss) < 1e-5);
    REQUIRE(fd_max_rel_error(b, b.grad(), loss) < 1e-5);
}

TEST_CASE("displacement conv with zero flow equals conv2d", "[layers]") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        int H = 4 + static_cast<int>(rng.below(5));
        int W = 4 + static_cast<int>(rng.below(5));
        Tensor x = Tensor::uniform({2, H, W}, rng);
        DispConvParams p{ConvParams{Tensor::uniform({3, 2, 3, 3}, rng, -1, 1),
                                    Tensor::uniform({3}, rng), 1, 1}};
        Tensor zero_flow = Tensor::zeros({2, H, W});
        Tensor a = disp_conv2d_forward(x, p, zero_flow);
        Tensor b = conv2d_forward(x, p.conv);
        REQUIRE(a.same_shape(b));
        for (int i = 0; i < a.size(); ++i)
            REQUIRE(std::abs(a.data()[i] - b.data()[i]) < 1e-12);
    }
}

TEST_CASE("displacement conv shifts by constant integer flow", "[layers]") {
    // dx = 1 with a delta kernel reads one column to the right; the last
    // column clamps onto itself.
    Tensor x = Tensor::from({1, 2, 3}, {1, 2, 3, 4, 5, 6});
    DispConvParams p{ConvParams{delta_kernel_3x3(), Tensor::zeros({1}), 1, 1}};
    Tensor flow = Tensor::zeros({2, 2, 3});
    for (int i = 0; i < 6; ++i) flow.data()[i] = 1;  // dx plane
    Tensor y = disp_conv2d_forward(x, p, flow);
    REQUIRE(y.at(0, 0, 0) == 2.0);
    REQUIRE(y.at(0, 0, 1) == 3.0);
    REQUIRE(y.at(0, 0, 2) == 3.0);  // clamped border column
    REQUIRE(y.at(0, 1, 0) == 5.0);
    REQUIRE(y.at(0, 1, 2) == 6.0);
}

TEST_CASE("displacement conv samples bilinearly at half-pixel flow", "[layers]") {
    // ramp image, dx = 0.5, delta kernel: each interior pixel becomes the
    // mean of itself and its right neighbor
    Tensor x = Tensor::from({1, 1, 5}, {0, 1, 2, 3, 4});
    DispConvParams p{ConvParams{Tensor::from({1, 1, 1, 1}, {1}), Tensor::zeros({1}), 1, 0}};
    Tensor flow = Tensor::zeros({2, 1, 5});
    for (int i = 0; i < 5; ++i) flow.data()[i] = 0.5;
    Tensor y = disp_conv2d_forward(x, p, flow);
    for (int j = 0; j + 1 < 5; ++j)
        REQUIRE(y.at(0, 0, j) == Catch::Approx(0.5 * (x.at(0, 0, j) + x.at(0, 0, j + 1))).margin(1e-12));
    REQUIRE(y.at(0, 0, 4) == 4.0);  // clamped center
}

TEST_CASE("displacement conv weight grads match conv at zero flow", "[layers]") {
    Rng rng(12);
    Tensor x = Tensor::uniform({2, 5, 5}, rng);
    DispConvParams p{ConvParams{Tensor::uniform({2, 2, 3, 3}, rng, -1, 1), Tensor::zeros({2}), 1, 1}};
    Tensor up = Tensor::uniform({2, 5, 5}, rng);
    DispConvGrads dg = disp_conv2d_backward(up, x, p, Tensor::zeros({2, 5, 5}));
    ConvGrads cg = conv2d_backward(up, x, p.conv);
    for (int i = 0; i < dg.weights.size(); ++i)
        REQUIRE(dg.weights.data()[i] == Catch::Approx(cg.weights.data()[i]).margin(1e-12));
    for (int i = 0; i < dg.bias.size(); ++i)
        REQUIRE(dg.bias.data()[i] == Catch::Approx(cg.bias.data()[i]).margin(1e-12));
}

TEST_CASE("displacement conv flow gradient vanishes on constant images", "[layers]") {
    // Sampling a constant is displacement-invariant wherever the window stays
    // inside the image; at the border band the zero padding enters the window
    // and the output genuinely depends on the displacement.
    Rng rng(13);
    Tensor x = Tensor::full({1, 8, 8}, 0.37);
    DispConvParams p{ConvParams{Tensor::uniform({2, 1, 3, 3}, rng, -1, 1),
                                Tensor::uniform({2}, rng), 1, 1}};
    Tensor flow = random_noninteger_flow(8, 8, rng, -1.2, 1.2);
    Tensor up = Tensor::uniform({2, 8, 8}, rng);
    DispConvGrads g = disp_conv2d_backward(up, x, p, flow);
    int margin = 1 + 2 + 1;  // kernel half-width + max displacement + bilinear support
    for (int y = margin; y < 8 - margin; ++y)
        for (int x2 = margin; x2 < 8 - margin; ++x2) {
            REQUIRE(std::abs(g.flow.at(0, y, x2)) < 1e-12);
            REQUIRE(std::abs(g.flow.at(1, y, x2)) < 1e-12);
        }
}

TEST_CASE("displacement conv flow gradient is zero in clamped axes", "[layers]") {
    Rng rng(17);
    Tensor x = Tensor::uniform({1, 6, 6}, rng).set_requires_grad();
    DispConvParams p{ConvParams{Tensor::uniform({1, 1, 3, 3}, rng, -1, 1), Tensor::zeros({1}), 1, 1}};
    Tensor flow = Tensor::zeros({2, 6, 6});
    for (int i = 0; i < 36; ++i) flow.data()[i] = -9.5;  // dx far out of range everywhere
    for (int i = 36; i < 72; ++i) flow.data()[i] = 0.25;
    Tensor up = Tensor::full({1, 6, 6}, 1);
    DispConvGrads g = disp_conv2d_backward(up, x, p, flow);
    for (int i = 0; i < 36; ++i) REQUIRE(g.flow.data()[i] == 0.0);  // clamped axis
}

TEST_CASE("displacement conv all four gradients match finite differences", "[layers]") {
    Rng rng(14);
    Tensor x = Tensor::uniform({1, 5, 5}, rng).set_requires_grad();
    Tensor w = Tensor::uniform({2, 1, 3, 3}, rng, -0.8, 0.8).set_requires_grad();
    Tensor b = Tensor::uniform({2}, rng, -0.1, 0.1).set_requires_grad();
    Tensor flow = random_noninteger_flow(5, 5, rng, -1.4, 1.4).set_requires_grad();
    Tensor proj = Tensor::uniform({2, 5, 5}, rng);

    auto forward = [&]() { return reduce_sum(mul(disp_conv2d(x, w, b, flow), proj)); };
    {
        Tape tape;
        tape.backward(forward());
    }
    auto loss = [&]() { return static_cast<double>(forward().item()); };
    REQUIRE(fd_max_rel_error(x, x.grad(), loss) < 1e-4);
    REQUIRE(fd_max_rel_error(w, w.grad(), loss) < 1e-4);
    REQUIRE(fd_max_rel_error(b, b.grad(), loss) < 1e-4);
    REQUIRE(fd_max_rel_error(flow, flow.grad(), loss) < 1e-4);
}

TEST_CASE("maxpool basics and backward", "[layers]") {
    Tensor x = Tensor::from({1, 2, 2}, {1, 2, 3, 4});
    Tensor y = maxpool2d_forward(x);
    REQUIRE(y.size() == 1);
    REQUIRE(y.item() == 4.0);

    Tensor xx = Tensor::from({1, 2, 2}, {1, 2, 3, 4}).set_requires_grad();
    {
        Tape tape;
        tape.backward(reduce_sum(scale(maxpool2d(xx), 3)));
    }
    REQUIRE(xx.grad()[0] == 0.0);
    REQUIRE(xx.grad()[3] == 3.0);

    REQUIRE_THROWS_AS(maxpool2d_forward(Tensor::zeros({1, 3, 3})), ValueError);
}

TEST_CASE("dense identity and gradient check", "[layers]") {
    Tensor id = Tensor::zeros({3, 3});
    for (int i = 0; i < 3; ++i) id.data()[i * 3 + i] = 1;
    Tensor x = Tensor::from({3}, {1, 2, 3});
    Tensor y = dense_forward(x, id, Tensor::zeros({3}));
    for (int i = 0; i < 3; ++i) REQUIRE(y.data()[i] == x.data()[i]);

    Rng rng(15);
    Tensor xx = Tensor::uniform({2, 2, 2}, rng).set_requires_grad();
    Tensor w = Tensor::uniform({3, 8}, rng, -0.7, 0.7).set_requires_grad();
    Tensor b = Tensor::uniform({3}, rng).set_requires_grad();
    Tensor proj = Tensor::uniform({3}, rng);
    auto forward = [&]() { return reduce_sum(mul(dense(xx, w, b), proj)); };
    {
        Tape tape;
        tape.backward(forward());
    }
    auto loss = [&]() { return static_cast<double>(forward().item()); };
    REQUIRE(fd_max_rel_error(xx, xx.grad(), loss) < 1e-5);
    REQUIRE(fd_max_rel_error(w, w.grad(), loss) < 1e-5);
    REQUIRE(fd_max_rel_error(b, b.grad(), loss) < 1e-5);
}

TEST_CASE("pooled composite gradient check", "[layers]") {
    Rng rng(16);
    Tensor x = Tensor::uniform({1, 4, 4}, rng).set_requires_grad();
    Tensor w = Tensor::uniform({2, 1, 3, 3}, rng, -0.8, 0.8).set_requires_grad();
    Tensor b = Tensor::zeros({2}).set_requires_grad();
    Tensor dw = Tensor::uniform({1, 8}, rng, -1, 1).set_requires_grad();
    Tensor db = Tensor::zeros({1}).set_requires_grad();
    auto forward = [&]() {
        Tensor h = relu(conv2d(x, w, b, 1, 1));
        Tensor pooled = maxpool2d(h);
        return reduce_sum(square(dense(pooled, dw, db)));
    };
    {
        Tape tape;
        tape.backward(forward());
    }
    auto loss = [&]() { return static_cast<double>(forward().item()); };
    REQUIRE(fd_max_rel_error(w, w.grad(), loss) < 1e-4);
    REQUIRE(fd_max_rel_error(dw, dw.grad(), loss) < 1e-4);
}
