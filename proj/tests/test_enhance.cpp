#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "ropkit/detect.hpp"
#include "ropkit/enhance.hpp"
#include "ropkit/filter.hpp"
#include "ropkit/phantom.hpp"

using namespace ropkit;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double variance(const RasterImage& img) {
  const double m = mean_intensity(img);
  double acc = 0;
  for (double v : img.data()) acc += (v - m) * (v - m);
  return acc / double(img.data().size());
}

// Pixels within `r` px (square) of the mask but outside it.
Bitmap ring(const Bitmap& mask, int r) {
  Bitmap inv(mask.width(), mask.height());
  for (std::size_t i = 0; i < mask.size(); ++i) inv.data()[i] = mask.data()[i] ? 0 : 1;
  const Bitmap far = erode(inv, r);
  Bitmap out(mask.width(), mask.height());
  for (std::size_t i = 0; i < mask.size(); ++i) out.data()[i] = inv.data()[i] && !far.data()[i];
  return out;
}

// Standard deviation of the plane over the ridge and its 8-px surround.
double rms_contrast(const RasterImage& plane, const Bitmap& ridge) {
  const Bitmap around = ring(ridge, 8);
  double sum = 0, sq = 0;
  long n = 0;
  for (std::size_t i = 0; i < ridge.size(); ++i) {
    if (!ridge.data()[i] && !around.data()[i]) continue;
    const double v = plane.data()[i];
    sum += v;
    sq += v * v;
    ++n;
  }
  const double m = sum / double(n);
  return std::sqrt(sq / double(n) - m * m);
}

}  // namespace

TEST(Clahe, ConstantPlaneStaysConstant) {
  const RasterImage plane(64, 48, 1, 0.3);
  const auto out = clahe(plane, {8, 8}, 2.0, 256);
  for (double v : out.data()) EXPECT_EQ(v, out.data()[0]);
}

TEST(Clahe, SingleTileUnclippedIsGlobalEqualization) {
  Xoshiro256 rng(21);
  for (int k = 0; k < 5; ++k) {
    const auto plane = oracle::random_plane(rng, 33 + 5 * k, 20 + 3 * k);
    const auto out = clahe(plane, {1, 1}, kInf, 256);
    const auto ref = oracle::global_he({plane.data().begin(), plane.data().end()}, 256);
    for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(out.data()[i], ref[i], 1.0 / 256);
  }
}

TEST(Clahe, OutputInRange) {
  Xoshiro256 rng(22);
  const auto plane = oracle::random_plane(rng, 100, 80);
  for (double clip : {0.5, 2.0, 4.0, kInf}) {
    for (double v : clahe(plane, {8, 8}, clip, 256).data()) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
  }
}

TEST(Clahe, OversizedTileGridIsReduced) {
  Xoshiro256 rng(23);
  const auto plane = oracle::random_plane(rng, 10, 6);
  RasterImage out;
  ASSERT_NO_THROW(out = clahe(plane, {64, 64}, 2.0, 256));
  EXPECT_EQ(out.width(), 10);
  EXPECT_EQ(out.height(), 6);
}

TEST(Clahe, ClipBoundAfterOnePass) {
  Xoshiro256 rng(24);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> hist(64);
    double total = 0;
    for (double& h : hist) {
      h = std::floor(std::pow(rng.uniform(), 4) * 400);
      total += h;
    }
    const double limit = 2.0 * total / 64;
    double excess = 0;
    for (double h : hist) excess += std::max(0.0, h - limit);
    const auto clipped = clip_histogram(hist, limit);
    double sum = 0;
    for (double h : clipped) {
      EXPECT_LE(h, limit + excess / 64 + 1e-9);
      sum += h;
    }
    EXPECT_NEAR(sum, total, 1e-6);
  }
}

TEST(Sigmoid, EndpointsAreExact) {
  const RasterImage plane(3, 1, 1, std::vector<double>{0.0, 0.05, 1.0});
  const auto out = sigmoid_stretch(plane, 2.5, 0.05);
  EXPECT_EQ(out.at(0, 0), 0.0);
  EXPECT_EQ(out.at(2, 0), 1.0);
}

TEST(Sigmoid, SpotValueMatchesEquationOne) {
  const RasterImage plane(3, 1, 1, std::vector<double>{0.0, 0.05, 1.0});
  const auto out = sigmoid_stretch(plane, 2.5, 0.05);
  const double psi0 = 1 / (1 + std::exp(0.125)), psi1 = 1 / (1 + std::exp(-2.375));
  EXPECT_NEAR(out.at(1, 0), (0.5 - psi0) / (psi1 - psi0), 1e-9);
  EXPECT_NEAR(out.at(1, 0), oracle::eq1(0.05, 0, 1, 2.5, 0.05), 1e-9);
  EXPECT_NEAR(out.at(1, 0), 0.0699588675, 1e-9);
}

TEST(Sigmoid, ConstantPlaneUnchanged) {
  const RasterImage plane(4, 4, 1, 0.7);
  EXPECT_EQ(sigmoid_stretch(plane, 2.5, 0.05), plane);
}

TEST(Sigmoid, MonotoneWithExactExtremes) {
  Xoshiro256 rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const auto plane = oracle::random_plane(rng, 20, 10);
    const double c = rng.uniform(0.1, 25.0), offset = rng.uniform();
    const auto out = sigmoid_stretch(plane, c, offset);
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t i = 0; i < plane.data().size(); ++i) pairs.emplace_back(plane.data()[i], out.data()[i]);
    std::sort(pairs.begin(), pairs.end());
    EXPECT_EQ(pairs.front().second, 0.0);
    EXPECT_EQ(pairs.back().second, 1.0);
    for (std::size_t i = 1; i < pairs.size(); ++i) ASSERT_LE(pairs[i - 1].second, pairs[i].second);
  }
}

TEST(Ambe, Definition) {
  const RasterImage a(4, 4, 1, 0.5), b(4, 4, 1, 0.6);
  EXPECT_EQ(ambe(a, a), 0.0);
  EXPECT_NEAR(ambe(a, b), 0.1, 1e-12);
  EXPECT_EQ(ambe(a, b), ambe(b, a));
  EXPECT_THROW(ambe(a, RasterImage(4, 5, 1, 0.5)), InvalidInput);
}

TEST(FitSigmoid, MatchesDenseGrid) {
  Xoshiro256 rng(41);
  for (int trial = 0; trial < 6; ++trial) {
    const double gamma = 0.5 + trial * 0.6;
    std::vector<double> v(48 * 32);
    for (double& x : v) x = std::pow(rng.uniform(), gamma);
    const RasterImage plane(48, 32, 1, v);
    const auto fit = fit_sigmoid_c(plane, 0.5, 20.0);
    EXPECT_FALSE(fit.degenerate);
    double best_c = 0.5, best = kInf;
    for (int k = 0; k < 10000; ++k) {
      const double c = 0.5 + (20.0 - 0.5) * k / 9999.0;
      const double val = ambe(plane, sigmoid_stretch(plane, c, 0.05));
      if (val < best) {
        best = val;
        best_c = c;
      }
    }
    EXPECT_NEAR(fit.c, best_c, 1e-3) << "gamma " << gamma;
    EXPECT_GE(fit.c, 0.5);
    EXPECT_LE(fit.c, 20.0);
  }
}

TEST(FitSigmoid, PinnedRange) {
  Xoshiro256 rng(42);
  const auto plane = oracle::random_plane(rng, 16, 16);
  const auto fit = fit_sigmoid_c(plane, 2.5, 2.5 + 1e-6);
  EXPECT_NEAR(fit.c, 2.5, 1e-6);
}

TEST(FitSigmoid, ConstantPlaneFallsBack) {
  const auto fit = fit_sigmoid_c(RasterImage(8, 8, 1, 0.4), 0.5, 20.0);
  EXPECT_TRUE(fit.degenerate);
  EXPECT_EQ(fit.c, 2.5);
  EXPECT_THROW(fit_sigmoid_c(RasterImage(8, 8, 1, 0.4), 3.0, 1.0), InvalidInput);
}

TEST(Psf, NormalizedIsotropicAndHandValue) {
  for (double sigma : {0.5, 1.0, 2.3}) {
    for (int size : {1, 3, 9, 15}) {
      const auto k = gaussian_psf(sigma, size);
      double sum = 0;
      for (double v : k.data()) sum += v;
      EXPECT_NEAR(sum, 1.0, 1e-9);
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) EXPECT_NEAR(k(x, y), k(size - 1 - y, x), 1e-15);
      }
    }
  }
  const double centre = 1.0 / (1 + 4 * std::exp(-0.5) + 4 * std::exp(-1.0));
  EXPECT_NEAR(gaussian_psf(1.0, 3)(1, 1), centre, 1e-12);
  EXPECT_NEAR(gaussian_psf(1.0, 3)(1, 1), 0.2042, 5e-5);
  EXPECT_THROW(gaussian_psf(1.0, 4), InvalidInput);
  EXPECT_THROW(gaussian_psf(0.0, 3), InvalidInput);
}

TEST(Wiener, IdentityKernel) {
  Xoshiro256 rng(51);
  const auto plane = oracle::random_plane(rng, 37, 29);
  const auto out = wiener_deconvolve(plane, gaussian_psf(1.0, 1), 0.0);
  for (std::size_t i = 0; i < plane.data().size(); ++i) ASSERT_NEAR(out.data()[i], plane.data()[i], 1e-6);
}

TEST(Wiener, InvertsKnownBlur) {
  PhantomSpec spec;
  spec.width = 256;
  spec.height = 200;
  spec.ridge.width = 3;
  const auto clean = luma(generate_phantom(spec).clean);
  const auto psf = gaussian_psf(1.0, 9);
  const auto blurred = RasterImage::from_grid(convolve2d(clean.to_grid(), psf));
  const auto restored = wiener_deconvolve(blurred, psf, 0.0);
  EXPECT_LT(oracle::psnr(clean, blurred, 8), 40.0);
  EXPECT_GE(oracle::psnr(clean, restored, 8), 40.0);
}

TEST(Wiener, LargeNsrReducesVariance) {
  Xoshiro256 rng(52);
  const auto plane = oracle::random_plane(rng, 64, 64);
  const auto out = wiener_deconvolve(plane, gaussian_psf(1.0, 9), 10.0);
  EXPECT_LT(variance(out), variance(plane));
}

TEST(Pipeline, ShapeRangeChromaAndDeterminism) {
  PhantomSpec spec;
  spec.width = 160;
  spec.height = 128;
  spec.degrade = {0.2, 1.5, 0.02, 0.4};
  const auto img = generate_phantom(spec).image;
  const EnhanceConfig cfg;
  const auto st = enhance_stages(img, cfg);
  EXPECT_EQ(st.rgb.width(), img.width());
  EXPECT_EQ(st.rgb.height(), img.height());
  EXPECT_EQ(st.rgb.channels(), 3);
  for (double v : st.rgb.data()) {
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
  const auto yiq = rgb_to_yiq(img);
  EXPECT_EQ(st.output.i, yiq.i);
  EXPECT_EQ(st.output.q, yiq.q);
  EXPECT_EQ(enhance_pipeline(img, cfg), st.rgb);
}

TEST(Pipeline, FitCPathRecordsFittedValue) {
  PhantomSpec spec;
  spec.width = 96;
  spec.height = 80;
  EnhanceConfig cfg;
  cfg.fit_c = true;
  const auto st = enhance_stages(generate_phantom(spec).image, cfg);
  EXPECT_FALSE(st.fit_degenerate);
  EXPECT_GE(st.sigmoid_c, cfg.c_lo);
  EXPECT_LE(st.sigmoid_c, cfg.c_hi);
}

TEST(Pipeline, RaisesRidgeContrast) {
  PhantomSpec spec;
  spec.degrade.blur_sigma = 1.5;
  spec.degrade.contrast_factor = 0.3;
  const auto ph = generate_phantom(spec);
  const auto raw_y = rgb_to_yiq(ph.image).y;
  const auto enhanced_y = enhance_stages(ph.image, EnhanceConfig{}).deblurred;
  EXPECT_GT(rms_contrast(enhanced_y, ph.ridge_mask), rms_contrast(raw_y, ph.ridge_mask));
}

TEST(EnhanceConfig, Validation) {
  EnhanceConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.clahe_clip = 0;
  EXPECT_THROW(cfg.validate(), InvalidInput);
  cfg = {};
  cfg.hist_bins = 1;
  EXPECT_THROW(cfg.validate(), InvalidInput);
  cfg = {};
  cfg.wiener_nsr = -1;
  EXPECT_THROW(cfg.validate(), InvalidInput);
  cfg = {};
  cfg.c_lo = 5;
  cfg.c_hi = 5;
  EXPECT_THROW(cfg.validate(), InvalidInput);
}
