#include <gtest/gtest.h>

#include "hinas/data.hpp"
#include "hinas/gradcheck.hpp"
#include "hinas/loss.hpp"
#include "test_util.hpp"

using namespace hinas;
using hinas::testing::random_tensor;
using hinas::testing::reference_ssim;
using T64 = Tensor<double>;

namespace {

T64 checkerboard(int size, int cell) {
    auto t = T64::zeros(Shape{1, 3, size, size});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) t.at(0, c, y, x) = ((y / cell + x / cell) % 2) ? 1.0 : 0.0;
    return t;
}

T64 one_minus(const T64& x) {
    auto y = x.detach();
    for (auto& v : y.values()) v = 1.0 - v;
    return y;
}

}  // namespace

TEST(Ssim, WindowIsNormalizedGaussian) {
    const SsimConfig cfg;
    const auto g = cfg.kernel_1d();
    ASSERT_EQ(g.size(), 11u);
    double s = 0;
    for (double v : g) s += v;
    EXPECT_NEAR(s, 1.0, 1e-15);
    EXPECT_NEAR(g[5] / g[6], std::exp(1.0 / (2 * 1.5 * 1.5)), 1e-12);
    EXPECT_GT(cfg.c1(), 0.0);
    EXPECT_NEAR(cfg.c2(), 9e-4, 1e-18);
}

TEST(Ssim, IdenticalInputsGiveExactlyOne) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto x = random_tensor<double>(Shape{2, 3, 16, 13}, seed, 0, 1);
        EXPECT_EQ(ssim(x, x).item(), 1.0);
        EXPECT_EQ(l_ssim(x, x).item(), 0.0);
        EXPECT_EQ(psnr(x, x), 100.0);
    }
}

TEST(Ssim, CheckerboardAgainstReference) {
    const auto x = checkerboard(24, 3);
    const auto y = one_minus(x);
    const double got = ssim(x, y).item();
    EXPECT_NEAR(got, reference_ssim(x, y), 1e-6);
    EXPECT_LT(got, 0.1);
}

TEST(Ssim, RandomPairsAgainstReference) {
    for (std::uint64_t seed = 10; seed < 14; ++seed) {
        auto x = random_tensor<double>(Shape{1, 3, 17, 15}, seed, 0, 1);
        auto y = add_gaussian_noise(x, 40.0, seed + 100);
        EXPECT_NEAR(ssim(x, y).item(), reference_ssim(x, y), 1e-10);
    }
}

TEST(Ssim, Symmetric) {
    for (std::uint64_t seed = 20; seed < 30; ++seed) {
        auto x = random_tensor<double>(Shape{1, 3, 16, 16}, seed, 0, 1);
        auto y = random_tensor<double>(Shape{1, 3, 16, 16}, seed + 50, 0, 1);
        EXPECT_LT(std::abs(ssim(x, y).item() - ssim(y, x).item()), 1e-9);
    }
}

TEST(Ssim, GradientMatchesFiniteDifferences) {
    auto x = random_tensor<double>(Shape{1, 2, 13, 14}, 31, 0.1, 0.9, true);
    auto y = random_tensor<double>(Shape{1, 2, 13, 14}, 32, 0.1, 0.9, true);
    auto r = grad_check<double>([](const std::vector<T64>& v) { return ssim(v[0], v[1]); }, {x, y}, 1e-6);
    EXPECT_LT(r.rel_error, 1e-4);
}

TEST(Ssim, Errors) {
    auto x = random_tensor<double>(Shape{1, 3, 16, 16}, 1);
    EXPECT_THROW(ssim(x, random_tensor<double>(Shape{1, 3, 16, 15}, 2)), ShapeError);
    auto small = random_tensor<double>(Shape{1, 3, 10, 16}, 3);
    EXPECT_THROW(ssim(small, small), ShapeError);
}

TEST(LSsim, IsLogOfInverseSsim) {
    auto x = random_tensor<double>(Shape{1, 3, 16, 16}, 4, 0, 1);
    auto y = add_gaussian_noise(x, 60.0, 5);
    const double s = ssim(x, y).item();
    EXPECT_NEAR(l_ssim(x, y).item(), std::log10(1.0 / s), 1e-12);
    EXPECT_NEAR(std::log10(1.0 / 0.1), 1.0, 1e-15);
}

TEST(LSsim, ValueAtOneTenthIsOne) {
    // Bisect a blend toward the inverted board until SSIM reaches 0.1.
    auto x = checkerboard(16, 2);
    auto y = x.detach();
    auto noisy = one_minus(x);
    double lo = 0, hi = 1;
    for (int it = 0; it < 60; ++it) {
        const double t = 0.5 * (lo + hi);
        auto z = x.detach();
        for (std::size_t i = 0; i < z.numel(); ++i) z.values()[i] = (1 - t) * x.values()[i] + t * noisy.values()[i];
        (ssim(x, z).item() > 0.1 ? lo : hi) = t;
        y = z;
    }
    EXPECT_NEAR(ssim(x, y).item(), 0.1, 1e-6);
    EXPECT_NEAR(l_ssim(x, y).item(), 1.0, 1e-5);
}

TEST(LSsim, MonotoneInNoiseLevel) {
    const auto clean = synth_dataset<double>(SynthKind::Mixed, 1, 32, 6)[0];
    double prev = -1;
    for (int step = 0; step < 10; ++step) {
        const double sigma = 5.0 + 10.0 * step;
        auto noisy = add_gaussian_noise(clean, sigma, 77);
        const double v = l_ssim(noisy, clean).item();
        EXPECT_GE(v, prev) << "sigma " << sigma;
        prev = v;
    }
}

TEST(LSsim, RejectsNonPositiveSsim) {
    auto x = checkerboard(16, 1);
    auto y = one_minus(x);
    ASSERT_LE(ssim(x, y).item(), 0.0);
    EXPECT_THROW(l_ssim(x, y), std::domain_error);
}

TEST(RestorationLoss, ZeroForIdenticalInputs) {
    auto x = random_tensor<double>(Shape{2, 3, 16, 16}, 7, 0, 1);
    EXPECT_EQ(restoration_loss(x, x).item(), 0.0);
}

TEST(RestorationLoss, LambdaZeroIsMse) {
    auto x = random_tensor<double>(Shape{1, 3, 16, 16}, 8, 0, 1);
    auto y = random_tensor<double>(Shape{1, 3, 16, 16}, 9, 0, 1);
    EXPECT_EQ(restoration_loss(x, y, LossConfig{0.0, true}).item(), mse(x, y).item());
    EXPECT_EQ(restoration_loss(x, y, LossConfig{0.6, false}).item(), mse(x, y).item());
    EXPECT_THROW(restoration_loss(x, y, LossConfig{-0.1, true}), std::invalid_argument);
    EXPECT_THROW(restoration_loss(x, random_tensor<double>(Shape{1, 3, 16, 15}, 1)), ShapeError);
}

TEST(RestorationLoss, RecomposesFromParts) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto y = random_tensor<double>(Shape{1, 3, 16, 16}, seed, 0, 1);
        auto x = add_gaussian_noise(y, 25.0, seed + 1);
        double m = 0;
        for (std::size_t i = 0; i < x.numel(); ++i) m += std::pow(x.data()[i] - y.data()[i], 2);
        m /= static_cast<double>(x.numel());
        const double want = m + 0.6 * std::log10(1.0 / reference_ssim(x, y));
        EXPECT_LT(std::abs(restoration_loss(x, y).item() - want), 1e-7);
    }
}

TEST(RestorationLoss, NonNegative) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto x = random_tensor<double>(Shape{1, 3, 12, 12}, seed, -0.5, 1.5);
        auto y = random_tensor<double>(Shape{1, 3, 12, 12}, seed + 99, 0, 1);
        EXPECT_GE(restoration_loss(x, y).item(), 0.0);
    }
}

TEST(RestorationLoss, MseOnlyGradientEqualsMseGradient) {
    auto y = random_tensor<double>(Shape{1, 3, 12, 12}, 40, 0, 1);
    auto a = random_tensor<double>(Shape{1, 3, 12, 12}, 41, 0, 1, true);
    auto b = a.detach();
    b.set_requires_grad(true);
    backward(restoration_loss(a, y, LossConfig{0.6, false}));
    backward(mse(b, y));
    for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a.grad()[i], b.grad()[i]);
}

TEST(RestorationLoss, CompositeGradient) {
    auto x = random_tensor<double>(Shape{1, 3, 12, 12}, 42, 0.2, 0.8, true);
    auto y = random_tensor<double>(Shape{1, 3, 12, 12}, 43, 0.2, 0.8);
    auto r = grad_check<double>([&](const std::vector<T64>& v) { return restoration_loss(v[0], y); }, {x}, 1e-6);
    EXPECT_LT(r.rel_error, 1e-4);
}

TEST(RestorationLoss, SsimFloorKeepsLossFinite) {
    auto x = checkerboard(16, 1);
    auto y = one_minus(x);
    const double v = restoration_loss(x, y).item();
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_NEAR(v, 1.0 + 0.6 * 3.0, 1e-9);  // mse 1, floor 1e-3
}

TEST(Psnr, Values) {
    auto zero = T64::zeros(Shape{1, 3, 8, 8});
    auto one = T64::full(Shape{1, 3, 8, 8}, 1.0);
    EXPECT_NEAR(psnr(zero, one, 1.0), 0.0, 1e-12);
    EXPECT_NEAR(psnr(zero, one, 255.0), 20 * std::log10(255.0), 1e-9);
    auto x = random_tensor<double>(Shape{1, 3, 9, 7}, 50, 0, 1);
    auto y = random_tensor<double>(Shape{1, 3, 9, 7}, 51, 0, 1);
    double m = 0;
    for (std::size_t i = 0; i < x.numel(); ++i) m += (x.data()[i] - y.data()[i]) * (x.data()[i] - y.data()[i]);
    EXPECT_NEAR(psnr(x, y), 10 * std::log10(1.0 / (m / x.numel())), 1e-9);
    EXPECT_THROW(psnr(x, zero), ShapeError);
    EXPECT_THROW(psnr(x, x, 0.0), std::invalid_argument);
}
