#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "icmr/recon/recon.hpp"

using namespace icmr;
using cf = std::complex<float>;

namespace {

// Brute-force centered unitary DFT in double precision. sign -1 forward,
// +1 inverse; origins at N/2.
std::vector<std::complex<double>> dft_oracle(const std::vector<cf>& in, std::size_t rows, std::size_t cols,
                                             int sign) {
  std::vector<std::complex<double>> out(rows * cols);
  const double scale = 1.0 / std::sqrt(double(rows * cols));
  const long r0 = long(rows / 2), c0 = long(cols / 2);
  for (std::size_t u = 0; u < rows; ++u) {
    for (std::size_t v = 0; v < cols; ++v) {
      std::complex<double> acc = 0.0;
      for (std::size_t x = 0; x < rows; ++x) {
        for (std::size_t y = 0; y < cols; ++y) {
          double phase = sign * 2.0 * std::numbers::pi *
                         (double((long(u) - r0) * (long(x) - r0)) / double(rows) +
                          double((long(v) - c0) * (long(y) - c0)) / double(cols));
          acc += std::complex<double>(in[x * cols + y]) * std::polar(1.0, phase);
        }
      }
      out[u * cols + v] = acc * scale;
    }
  }
  return out;
}

std::vector<cf> random_grid(std::mt19937& rng, std::size_t n) {
  std::normal_distribution<float> g;
  std::vector<cf> v(n);
  for (auto& x : v) x = {g(rng), g(rng)};
  return v;
}

double energy(const std::vector<cf>& v) {
  double e = 0.0;
  for (auto x : v) e += std::norm(std::complex<double>(x));
  return e;
}

// Builds a fully sampled single-slice bucket from per-coil images.
stages::KSpaceBucket bucket_from_images(const std::vector<std::vector<cf>>& coil_images, std::size_t rows,
                                        std::size_t cols, std::uint16_t phase = 0) {
  const std::size_t coils = coil_images.size();
  std::vector<std::vector<cf>> kspace = coil_images;
  for (auto& k : kspace) recon::centered_fft2(k, rows, cols);
  stages::KSpaceBucket bucket;
  for (std::size_t line = 0; line < rows; ++line) {
    wire::KSpaceReadout r;
    r.header.kline_idx = static_cast<std::uint16_t>(line);
    r.header.phase_idx = phase;
    r.header.slice_idx = 3;
    r.header.num_samples = static_cast<std::uint16_t>(cols);
    r.header.num_coils = static_cast<std::uint16_t>(coils);
    r.header.position_mm = {10.0f, -5.0f, 7.0f};
    r.header.read_dir = {1.0f, 0.0f, 0.0f};
    r.header.phase_dir = {0.0f, 0.0f, 1.0f};
    r.header.slice_dir = {0.0f, 1.0f, 0.0f};
    for (std::size_t c = 0; c < coils; ++c) {
      r.samples.insert(r.samples.end(), kspace[c].begin() + long(line * cols),
                       kspace[c].begin() + long((line + 1) * cols));
    }
    bucket.readouts.push_back(std::move(r));
  }
  return bucket;
}

}  // namespace

TEST(CenteredFft, MatchesBruteForceDft) {
  std::mt19937 rng(5);
  const std::pair<std::size_t, std::size_t> shapes[] = {{4, 4}, {8, 6}, {5, 7}, {1, 9}, {16, 16}};
  for (auto [rows, cols] : shapes) {
    auto data = random_grid(rng, rows * cols);
    for (int sign : {-1, +1}) {
      auto expected = dft_oracle(data, rows, cols, sign);
      auto got = data;
      if (sign < 0) {
        recon::centered_fft2(got, rows, cols);
      } else {
        recon::centered_ifft2(got, rows, cols);
      }
      for (std::size_t i = 0; i < got.size(); ++i) {
        ASSERT_NEAR(got[i].real(), expected[i].real(), 1e-4) << rows << "x" << cols << " i=" << i;
        ASSERT_NEAR(got[i].imag(), expected[i].imag(), 1e-4) << rows << "x" << cols << " i=" << i;
      }
    }
  }
}

TEST(CenteredFft, CentreImpulseGivesFlatImage) {
  std::vector<cf> k(16, cf{});
  k[2 * 4 + 2] = 1.0f;
  recon::centered_ifft2(k, 4, 4);
  for (auto v : k) {
    EXPECT_NEAR(v.real(), 0.25, 1e-7);
    EXPECT_NEAR(v.imag(), 0.0, 1e-7);
  }
}

TEST(CenteredFft, RoundTripAndEnergy) {
  std::mt19937 rng(9);
  for (std::size_t n : {32u, 64u, 192u}) {
    auto original = random_grid(rng, n * n);
    auto k = original;
    recon::centered_fft2(k, n, n);
    EXPECT_NEAR(energy(k) / energy(original), 1.0, 1e-5);
    recon::centered_ifft2(k, n, n);
    double err = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) err += std::norm(std::complex<double>(k[i] - original[i]));
    EXPECT_LT(std::sqrt(err / double(k.size())), 1e-5) << n;
  }
}

TEST(CenteredFft, RejectsBadShapes) {
  std::vector<cf> v(6);
  EXPECT_THROW(recon::centered_fft2(v, 2, 4), recon::ReconError);
  EXPECT_THROW(recon::centered_fft2(v, 0, 6), recon::ReconError);
}

TEST(ReconBucket, RssOverCoilsRecoversMagnitude) {
  std::mt19937 rng(1);
  const std::size_t rows = 12, cols = 10, coils = 4;
  std::uniform_real_distribution<float> u(0.0f, 2.0f), ph(-3.0f, 3.0f);
  std::vector<float> truth(rows * cols);
  for (auto& t : truth) t = u(rng);
  // Sensitivities with unit sum of squares at every pixel.
  std::vector<std::vector<cf>> images(coils, std::vector<cf>(rows * cols));
  for (std::size_t i = 0; i < rows * cols; ++i) {
    std::vector<float> w(coils);
    float s = 0.0f;
    for (auto& x : w) s += (x = u(rng) + 0.1f) * x;
    for (std::size_t c = 0; c < coils; ++c) images[c][i] = std::polar(truth[i] * w[c] / std::sqrt(s), ph(rng));
  }
  auto bucket = bucket_from_images(images, rows, cols, 2);
  recon::GeometryDefaults geo;
  geo.fov_read_mm = 20.0;
  geo.fov_phase_mm = 36.0;
  geo.phase_interval_ms = 40.0;
  recon::ReconStats stats;
  auto frames = recon::recon_bucket(bucket, geo, &stats);
  ASSERT_EQ(frames.size(), 1u);
  EXPECT_EQ(stats.duplicate_cells, 0u);
  const auto& f = frames[0];
  EXPECT_EQ(f.header.rows, rows);
  EXPECT_EQ(f.header.cols, cols);
  EXPECT_EQ(f.header.slice_idx, 3);
  EXPECT_EQ(f.header.phase_idx, 2);
  EXPECT_FLOAT_EQ(f.header.trigger_time_ms, 80.0f);
  EXPECT_FLOAT_EQ(f.header.pixel_spacing_mm[0], 3.0f);
  EXPECT_FLOAT_EQ(f.header.pixel_spacing_mm[1], 2.0f);
  // Rows follow the phase direction, columns the read direction, and the
  // readout position sits at pixel (rows/2, cols/2).
  EXPECT_EQ(f.header.row_dir, (wire::Vec3f{0.0f, 0.0f, 1.0f}));
  EXPECT_EQ(f.header.col_dir, (wire::Vec3f{1.0f, 0.0f, 0.0f}));
  EXPECT_FLOAT_EQ(f.header.position_mm[0], 10.0f - 5 * 2.0f);
  EXPECT_FLOAT_EQ(f.header.position_mm[1], -5.0f);
  EXPECT_FLOAT_EQ(f.header.position_mm[2], 7.0f - 6 * 3.0f);
  for (std::size_t i = 0; i < truth.size(); ++i) ASSERT_NEAR(f.magnitude()[i], truth[i], 1e-4);
}

TEST(ReconBucket, MissingLinesAreReported) {
  std::vector<std::vector<cf>> images{std::vector<cf>(16, cf{1.0f, 0.0f})};
  auto bucket = bucket_from_images(images, 4, 4);
  bucket.readouts.erase(bucket.readouts.begin() + 1);
  try {
    recon::recon_bucket(bucket, {});
    FAIL();
  } catch (const recon::ReconError& e) {
    EXPECT_NE(std::string(e.what()).find("kline 1"), std::string::npos) << e.what();
  }
}

TEST(ReconBucket, DuplicateLinesAreCounted) {
  std::vector<std::vector<cf>> images{std::vector<cf>(16, cf{1.0f, 0.0f})};
  auto bucket = bucket_from_images(images, 4, 4);
  bucket.readouts.push_back(bucket.readouts[0]);
  recon::ReconStats stats;
  auto frames = recon::recon_bucket(bucket, {}, &stats);
  EXPECT_EQ(stats.duplicate_cells, 1u);
  EXPECT_EQ(frames.size(), 1u);
}

TEST(ReconBucket, OneFramePerPhaseInOrder) {
  std::vector<std::vector<cf>> images{std::vector<cf>(16, cf{1.0f, 0.0f})};
  stages::KSpaceBucket bucket;
  for (std::uint16_t p : {1, 0, 2}) {
    auto b = bucket_from_images(images, 4, 4, p);
    bucket.readouts.insert(bucket.readouts.end(), b.readouts.begin(), b.readouts.end());
  }
  auto frames = recon::recon_bucket(bucket, {});
  ASSERT_EQ(frames.size(), 3u);
  for (std::uint16_t p = 0; p < 3; ++p) EXPECT_EQ(frames[p].header.phase_idx, p);
}

TEST(GeometryDefaultsTest, PhaseIntervalFromHeartRate) {
  wire::MetaAttributes h{{"heart_rate_bpm", "60"}, {"n_phases", "25"}, {"fov_read_mm", "300"}};
  auto g = recon::GeometryDefaults::from_session_header(h);
  EXPECT_DOUBLE_EQ(g.phase_interval_ms, 40.0);
  EXPECT_DOUBLE_EQ(g.fov_read_mm, 300.0);
  h.add("phase_interval_ms", "33");
  EXPECT_DOUBLE_EQ(recon::GeometryDefaults::from_session_header(h).phase_interval_ms, 33.0);
}

TEST(LabelFromProbability, ArgmaxWithThreshold) {
  auto plane = [](std::vector<float> v) {
    wire::ImageFrame f;
    f.header.rows = 1;
    f.header.cols = static_cast<std::uint16_t>(v.size());
    f.pixels = std::move(v);
    return f;
  };
  std::vector<wire::ImageFrame> planes{plane({0.9f, 0.1f, 0.2f}), plane({0.05f, 0.8f, 0.3f}),
                                       plane({0.05f, 0.1f, 0.4f})};
  auto mask = recon::label_from_probability(planes, 0.5);
  EXPECT_EQ(mask.labels, (std::vector<std::uint16_t>{0, 1, 0}));
  mask = recon::label_from_probability(planes, 0.0);
  EXPECT_EQ(mask.labels, (std::vector<std::uint16_t>{0, 1, 2}));
}
