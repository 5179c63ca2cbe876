#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "svrnn/layers.hpp"
#include "svrnn/rng.hpp"

using namespace svrnn;

namespace {

void expect_close(const Tensor& a, const Tensor& b, double tol) {
    ASSERT_EQ(a.shape(), b.shape());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "at " << i;
}

}  // namespace

TEST(Conv, MatchesNaiveLoops) {
    RngStream r(3);
    for (const ad::ConvGeometry g : {ad::ConvGeometry{3, 2, 1, 0}, ad::ConvGeometry{3, 1, 0, 0},
                                     ad::ConvGeometry{2, 2, 0, 0}, ad::ConvGeometry{3, 1, 1, 0}}) {
        const Tensor x = rng_normal(r, {3, 7, 7}), k = rng_normal(r, {4, 3, g.kernel, g.kernel});
        ad::Tape t;
        const auto y = ad::conv2d(t.constant(x), t.constant(k), g);
        expect_close(y.value(), oracle::naive_conv2d(x, k, g.stride, g.padding), 1e-12);
    }
}

TEST(ConvTranspose, MatchesNaiveLoops) {
    RngStream r(4);
    for (const ad::ConvGeometry g : {ad::ConvGeometry{3, 2, 1, 1}, ad::ConvGeometry{3, 2, 1, 0},
                                     ad::ConvGeometry{3, 1, 1, 0}}) {
        const Tensor x = rng_normal(r, {3, 4, 4}), k = rng_normal(r, {3, 2, 3, 3});
        ad::Tape t;
        const auto y = ad::conv_transpose2d(t.constant(x), t.constant(k), g);
        expect_close(y.value(), oracle::naive_conv_transpose2d(x, k, g.stride, g.padding, g.output_padding), 1e-12);
    }
}

TEST(ConvTranspose, IsAdjointOfConv) {
    // <conv(x), y> == <x, conv_T(y)> when the kernel layouts are swapped.
    RngStream r(5);
    const ad::ConvGeometry g{3, 2, 1, 0};
    const Tensor x = rng_normal(r, {2, 8, 8}), k = rng_normal(r, {3, 2, 3, 3});
    ad::Tape t;
    const Tensor cx = ad::conv2d(t.constant(x), t.constant(k), g).value();
    const Tensor y = rng_normal(r, cx.shape());
    // conv2d kernel (F,C,k,k) doubles as conv_transpose2d kernel (Cin=F, Cout=C).
    const ad::ConvGeometry gt{3, 2, 1, 1};
    const Tensor ty = ad::conv_transpose2d(t.constant(y), t.constant(k), gt).value();
    EXPECT_NEAR(dot(cx.reshaped({cx.size()}), y.reshaped({y.size()})),
                dot(x.reshaped({x.size()}), ty.reshaped({ty.size()})), 1e-10);
}

TEST(Conv, OutputExtents) {
    const ad::ConvGeometry g{3, 2, 1, 0};
    EXPECT_EQ(ad::conv_output_extent(100, g), 50u);
    EXPECT_EQ(ad::conv_output_extent(25, g), 13u);
    EXPECT_EQ(ad::conv_output_extent(13, g), 7u);
    const ad::ConvGeometry d{3, 2, 1, 1};
    EXPECT_EQ(ad::conv_transpose_output_extent(7, d), 14u);
    EXPECT_EQ(ad::conv_transpose_output_extent(28, d), 56u);
    EXPECT_THROW(ad::conv_output_extent(1, ad::ConvGeometry{5, 1, 0, 0}), ShapeError);
    EXPECT_THROW(ad::conv_transpose_output_extent(4, ad::ConvGeometry{3, 2, 1, 2}), ShapeError);
}

TEST(Conv, ShapeErrors) {
    ad::Tape t;
    const auto x = t.constant(Tensor({2, 5, 5}));
    EXPECT_THROW(ad::conv2d(x, t.constant(Tensor({3, 4, 3, 3})), {}), ShapeError);
    EXPECT_THROW(ad::conv2d(t.constant(Tensor({5, 5})), t.constant(Tensor({3, 2, 3, 3})), {}), ShapeError);
    EXPECT_THROW(ad::conv_transpose2d(x, t.constant(Tensor({3, 2, 3, 3})), {}), ShapeError);
    EXPECT_THROW(ad::channel_bias(x, t.constant(Tensor({3}))), ShapeError);
}

TEST(CenterCrop, TakesMiddleWindow) {
    Tensor x({1, 4, 5});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
    ad::Tape t;
    const Tensor y = ad::center_crop(t.constant(x), 2, 3).value();
    EXPECT_EQ(y, Tensor({1, 2, 3}, std::vector<double>{6, 7, 8, 11, 12, 13}));
    // Odd margin: the extra row and column go to the end.
    const Tensor z = ad::center_crop(t.constant(x), 3, 2).value();
    EXPECT_EQ(z, Tensor({1, 3, 2}, std::vector<double>{1, 2, 6, 7, 11, 12}));
    EXPECT_THROW(ad::center_crop(t.constant(x), 5, 5), ShapeError);
}

TEST(LayerNorm, ZeroMeanUnitVariance) {
    RngStream r(8);
    const Tensor x = rng_normal(r, {10}, 3.0, 2.0);
    ad::Tape t;
    const Tensor y = ad::layer_norm(t.constant(x), t.constant(Tensor({10}, 1.0)), t.constant(Tensor({10})), 0.0).value();
    double m = 0.0, v = 0.0;
    for (double e : y.data()) m += e;
    m /= 10.0;
    for (double e : y.data()) v += (e - m) * (e - m);
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v / 10.0, 1.0, 1e-12);
}

TEST(Dense, MatchesHandComputation) {
    ad::Tape t;
    const auto x = t.constant(Tensor::vector({1.0, -2.0}));
    const auto w = t.constant(Tensor::matrix({{0.5, 1.0}, {-1.0, 0.25}, {2.0, 2.0}}));
    const auto b = t.constant(Tensor::vector({0.1, 0.2, 0.3}));
    const Tensor y = ad::dense(x, w, b, ad::Activation::relu).value();
    EXPECT_DOUBLE_EQ(y[0], 0.0);
    EXPECT_DOUBLE_EQ(y[1], 0.0);
    EXPECT_DOUBLE_EQ(y[2], 0.0);
    const Tensor z = ad::dense(x, w, b, ad::Activation::none).value();
    EXPECT_DOUBLE_EQ(z[0], -1.4);
    EXPECT_DOUBLE_EQ(z[1], -1.3);
    EXPECT_DOUBLE_EQ(z[2], -1.7);
    EXPECT_THROW(ad::dense(t.constant(Tensor({3})), w, b, ad::Activation::none), ShapeError);
}

TEST(Kl, ClosedFormValues) {
    ad::Tape t;
    const auto zero = t.constant(Tensor({3}));
    EXPECT_EQ(ad::kl_to_standard_normal({zero, zero}).value().item(), 0.0);
    const auto mu = t.constant(Tensor::vector({1.0, 0.0}));
    const auto lv = t.constant(Tensor::vector({0.0, std::log(2.0)}));
    EXPECT_NEAR(ad::kl_to_standard_normal({mu, lv}).value().item(), 0.5 * (1.0 + (2.0 - std::log(2.0) - 1.0)), 1e-15);
}

TEST(Kl, MatchesMonteCarlo) {
    RngStream r(21);
    for (int trial = 0; trial < 3; ++trial) {
        const std::size_t d = 1 + r.below(8);
        const Tensor mu = rng_normal(r, {d}, 0.0, 0.7), lv = rng_normal(r, {d}, 0.0, 0.5);
        ad::Tape t;
        const double kl = ad::kl_to_standard_normal({t.constant(mu), t.constant(lv)}).value().item();
        // E_q[log q(z) - log p(z)], constants cancel.
        double acc = 0.0;
        const int n = 200000;
        for (int s = 0; s < n; ++s) {
            double lq = 0.0, lp = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double e = r.normal();
                const double z = mu[j] + std::exp(0.5 * lv[j]) * e;
                lq += -0.5 * lv[j] - 0.5 * e * e;
                lp += -0.5 * z * z;
            }
            acc += lq - lp;
        }
        EXPECT_NEAR(acc / n, kl, 2e-2);
    }
}

TEST(Reparameterize, ShiftsAndScales) {
    ad::Tape t;
    const auto mu = t.constant(Tensor::vector({1.0, -1.0}));
    const auto lv = t.constant(Tensor::vector({0.0, std::log(4.0)}));
    const Tensor z = ad::reparameterize({mu, lv}, Tensor::vector({0.5, 0.5})).value();
    EXPECT_DOUBLE_EQ(z[0], 1.5);
    EXPECT_DOUBLE_EQ(z[1], 0.0);
}

TEST(SquaredError, MeanAndSum) {
    ad::Tape t;
    const auto x = t.constant(Tensor::vector({1.0, 2.0, 4.0}));
    const Tensor y = Tensor::vector({1.0, 0.0, 1.0});
    EXPECT_DOUBLE_EQ(ad::sse(x, y).value().item(), 13.0);
    EXPECT_DOUBLE_EQ(ad::mse(x, y).value().item(), 13.0 / 3.0);
    EXPECT_THROW(ad::mse(x, Tensor({2})), ShapeError);
}
