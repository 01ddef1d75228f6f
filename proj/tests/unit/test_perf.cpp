#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "icmr/cmr/perfusion.hpp"

using namespace icmr;
using namespace icmr::cmr;

namespace {

constexpr std::size_t kN = 96;
constexpr double kC = 48.0;

double angle_of(double r, double c) {
  double a = std::atan2(-(r - kC), c - kC) * 180.0 / std::numbers::pi;
  return a < 0 ? a + 360.0 : a;
}

// Annulus r in (20, 30] about the grid centre; RV blood on r in (30, 37]
// within the angular arc [from, to] (degrees, may wrap).
SegmentationMask annulus(std::optional<std::pair<double, double>> rv_arc = std::nullopt) {
  SegmentationMask m;
  m.header.rows = m.header.cols = kN;
  m.header.data_type = wire::PixelType::kLabel;
  m.labels.assign(kN * kN, label::kBackground);
  for (std::size_t r = 0; r < kN; ++r) {
    for (std::size_t c = 0; c < kN; ++c) {
      double d = std::hypot(double(r) - kC, double(c) - kC);
      auto& l = m.labels[r * kN + c];
      if (d <= 20) {
        l = label::kLvBlood;
      } else if (d <= 30) {
        l = label::kLvMyocardium;
      } else if (rv_arc && d <= 37) {
        double a = angle_of(double(r), double(c));
        auto [from, to] = *rv_arc;
        bool in = from <= to ? (a >= from && a <= to) : (a >= from || a <= to);
        if (in) l = label::kRvBlood;
      }
    }
  }
  return m;
}

// Random blob-like shell: blood and outer boundaries with wobbly radii.
SegmentationMask random_shell(std::mt19937& rng) {
  std::uniform_real_distribution<double> amp(0.0, 3.0), ph(0.0, 6.3), rb(10, 18), th(4, 12);
  const double r_blood = rb(rng), thick = th(rng);
  const double a1 = amp(rng), p1 = ph(rng), a2 = amp(rng), p2 = ph(rng);
  SegmentationMask m = annulus();
  for (std::size_t r = 0; r < kN; ++r) {
    for (std::size_t c = 0; c < kN; ++c) {
      double d = std::hypot(double(r) - kC, double(c) - kC);
      double t = std::atan2(double(r) - kC, double(c) - kC);
      double inner = r_blood + a1 * std::sin(3 * t + p1);
      double outer = inner + thick + a2 * std::cos(2 * t + p2);
      m.labels[r * kN + c] = d <= inner ? label::kLvBlood : d <= outer ? label::kLvMyocardium : label::kBackground;
    }
  }
  return m;
}

double circular_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), 360.0);
  return std::min(d, 360.0 - d);
}

double gamma_variate(double t, double t0, double alpha, double beta) {
  if (t <= t0) return 0.0;
  double x = (t - t0) / beta;
  return std::pow(x, alpha) * std::exp(-x);
}

// Independent implementation of the documented PTT rule.
double oracle_centroid(const std::vector<double>& t_ms, const std::vector<double>& raw) {
  double base = (raw[0] + raw[1] + raw[2]) / 3.0;
  std::vector<double> s(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) s[i] = std::max(0.0, raw[i] - base);
  std::size_t peak = static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
  std::size_t begin = 0;
  while (begin < s.size() && !(s[begin] > 0.2 * s[peak])) ++begin;
  std::size_t end = peak + 1;
  while (end < s.size() && !(s[end] < 0.1 * s[peak])) ++end;
  double num = 0, den = 0;
  for (std::size_t i = begin; i < end; ++i) {
    num += t_ms[i] / 1000.0 * s[i];
    den += s[i];
  }
  return num / den;
}

}  // namespace

TEST(PixelAngle, Convention) {
  EXPECT_DOUBLE_EQ(pixel_angle_deg(10, 20, 10, 10), 0.0);   // right
  EXPECT_DOUBLE_EQ(pixel_angle_deg(0, 10, 10, 10), 90.0);   // up
  EXPECT_DOUBLE_EQ(pixel_angle_deg(10, 0, 10, 10), 180.0);  // left
  EXPECT_DOUBLE_EQ(pixel_angle_deg(20, 10, 10, 10), 270.0); // down
}

TEST(RvInsertion, ArcEndpointCounterclockwise) {
  auto ins = find_rv_insertion(annulus(std::pair{90.0, 150.0}));
  EXPECT_LT(circular_distance(ins.angle_deg, 150.0), 3.0) << ins.angle_deg;
}

TEST(RvInsertion, WrappingArc) {
  auto ins = find_rv_insertion(annulus(std::pair{330.0, 30.0}));
  EXPECT_LT(circular_distance(ins.angle_deg, 30.0), 3.0) << ins.angle_deg;
}

TEST(RvInsertion, MissingRvIsAnError) {
  EXPECT_THROW(find_rv_insertion(annulus()), PerfusionError);
}

TEST(Sectors, PartitionMatchesBruteForceAngles) {
  auto m = annulus();
  for (auto cls : {SliceClass::kBasal, SliceClass::kMid, SliceClass::kApical}) {
    for (auto rot : {Rotation::kCcw, Rotation::kCw}) {
      for (double ins : {0.0, 37.5, 200.0}) {
        auto map = split_sectors(m, ins, cls, rot);
        const int count = cls == SliceClass::kApical ? 4 : 6;
        const int base = cls == SliceClass::kBasal ? 0 : cls == SliceClass::kMid ? 6 : 12;
        std::vector<std::size_t> sizes(17, 0);
        std::size_t myo = 0;
        for (std::size_t r = 0; r < kN; ++r) {
          for (std::size_t c = 0; c < kN; ++c) {
            const auto s = map.sector[r * kN + c];
            if (m.at(r, c) != label::kLvMyocardium) {
              ASSERT_EQ(s, 0);
              continue;
            }
            ++myo;
            ASSERT_GE(s, base + 1);
            ASSERT_LE(s, base + count);
            ++sizes[s];
            // Brute-force angle oracle, away from sector boundaries.
            double a = angle_of(double(r), double(c));
            double rel = rot == Rotation::kCcw ? a - ins : ins - a;
            rel = std::fmod(std::fmod(rel, 360.0) + 360.0, 360.0);
            double w = 360.0 / count;
            double frac = rel / w - std::floor(rel / w);
            if (frac > 1e-6 && frac < 1 - 1e-6) {
              ASSERT_EQ(s, base + 1 + int(rel / w));
            }
          }
        }
        std::size_t total = 0;
        for (auto n : sizes) total += n;
        EXPECT_EQ(total, myo);
        if (cls == SliceClass::kBasal && ins == 0.0) {
          // Full annulus: equal counts up to the pixels on boundary rays.
          auto [lo, hi] = std::minmax_element(sizes.begin() + 1, sizes.begin() + 7);
          EXPECT_LE(*hi - *lo, 2u * 11u);
        }
      }
    }
  }
}

TEST(Sectors, RotationCovarianceOnGrid) {
  // Rotating the mask by 90 degrees counterclockwise and the insertion with
  // it leaves every pixel's sector unchanged.
  std::mt19937 rng(1);
  auto m = random_shell(rng);
  SegmentationMask rot = m;
  for (std::size_t r = 0; r < kN; ++r) {
    for (std::size_t c = 0; c < kN; ++c) {
      // (r, c) -> (N-1-c, r) is a 90 degree ccw turn about the grid centre
      rot.labels[(kN - 1 - c) * kN + r] = m.labels[r * kN + c];
    }
  }
  auto a = split_sectors(m, 10.0, SliceClass::kMid);
  auto b = split_sectors(rot, 100.0, SliceClass::kMid);
  std::size_t mismatches = 0, total = 0;
  for (std::size_t r = 0; r < kN; ++r) {
    for (std::size_t c = 0; c < kN; ++c) {
      if (a.sector[r * kN + c] == 0) continue;
      ++total;
      mismatches += a.sector[r * kN + c] != b.sector[(kN - 1 - c) * kN + r];
    }
  }
  // Centroid of a 95x95-reflected grid shifts by half a pixel at most; only
  // pixels straddling a boundary ray may move.
  EXPECT_LT(double(mismatches) / double(total), 0.03);
}

TEST(EndoEpi, AnnulusRadialLayers) {
  auto layers = split_endo_epi(annulus());
  EXPECT_EQ(layers[48 * kN + 48 + 22], kLayerEndo);
  EXPECT_EQ(layers[48 * kN + 48 + 28], kLayerEpi);
  EXPECT_EQ(layers[48 * kN + 48], 0);
}

TEST(EndoEpi, RandomShellsMatchBruteForceDistances) {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    auto m = random_shell(rng);
    auto layers = split_endo_epi(m);
    std::vector<std::pair<int, int>> endo, epi;
    auto lab = [&](int r, int c) {
      if (r < 0 || c < 0 || r >= int(kN) || c >= int(kN)) return label::kBackground;
      return m.at(std::size_t(r), std::size_t(c));
    };
    for (int r = 0; r < int(kN); ++r) {
      for (int c = 0; c < int(kN); ++c) {
        if (lab(r, c) != label::kLvMyocardium) continue;
        const int nb[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
        for (auto& q : nb) {
          auto l = lab(q[0], q[1]);
          if (l == label::kLvBlood) endo.push_back({r, c});
          if (l == label::kBackground || l == label::kRvBlood) epi.push_back({r, c});
        }
      }
    }
    auto nearest = [](const std::vector<std::pair<int, int>>& set, int r, int c) {
      long best = std::numeric_limits<long>::max();
      for (auto [a, b] : set) best = std::min<long>(best, long(a - r) * (a - r) + long(b - c) * (b - c));
      return best;
    };
    std::size_t myo = 0, endo_n = 0, epi_n = 0;
    for (int r = 0; r < int(kN); ++r) {
      for (int c = 0; c < int(kN); ++c) {
        auto got = layers[std::size_t(r) * kN + std::size_t(c)];
        if (lab(r, c) != label::kLvMyocardium) {
          ASSERT_EQ(got, 0);
          continue;
        }
        ++myo;
        auto expect = nearest(endo, r, c) < nearest(epi, r, c) ? kLayerEndo : kLayerEpi;
        ASSERT_EQ(got, expect) << "trial " << trial << " at " << r << "," << c;
        (got == kLayerEndo ? endo_n : epi_n)++;
      }
    }
    EXPECT_EQ(endo_n + epi_n, myo);
  }
}

TEST(EndoEpi, MissingBoundaryIsAnError) {
  auto m = annulus();
  for (auto& l : m.labels) {
    if (l == label::kLvBlood) l = label::kLvMyocardium;
  }
  EXPECT_THROW(split_endo_epi(m), PerfusionError);
}

TEST(SectorStatsTest, RandomMapsMatchBruteForce) {
  std::mt19937 rng(33);
  std::uniform_real_distribution<float> flow_value(0.0f, 5.0f);
  std::uniform_real_distribution<double> ins(0, 360);
  for (int trial = 0; trial < 100; ++trial) {
    auto m = random_shell(rng);
    const auto cls = static_cast<SliceClass>(trial % 3);
    auto map = split_sectors(m, ins(rng), cls);
    auto layers = split_endo_epi(m);
    std::vector<float> flow(kN * kN);
    for (auto& f : flow) f = flow_value(rng);
    auto stats = sector_stats(flow, map, layers);

    std::array<double, 16> sum{}, endo{}, epi{};
    std::array<std::size_t, 16> n{}, ne{}, np{};
    double total = 0.0;
    for (std::size_t i = 0; i < flow.size(); ++i) {
      if (m.labels[i] != label::kLvMyocardium) continue;
      total += flow[i];
      std::size_t k = map.sector[i] - 1u;
      sum[k] += flow[i];
      ++n[k];
      if (layers[i] == kLayerEndo) {
        endo[k] += flow[i];
        ++ne[k];
      } else {
        epi[k] += flow[i];
        ++np[k];
      }
    }
    double weighted = 0.0;
    for (std::size_t k = 0; k < 16; ++k) {
      EXPECT_EQ(stats.pixels[k], n[k]);
      if (n[k] == 0) {
        EXPECT_FALSE(stats.mean[k]);
        continue;
      }
      ASSERT_TRUE(stats.mean[k]);
      const double expect = sum[k] / double(n[k]);
      EXPECT_NEAR(*stats.mean[k], expect, 1e-9 * expect);
      if (ne[k]) EXPECT_NEAR(*stats.endo[k], endo[k] / double(ne[k]), 1e-9 * (1 + endo[k]));
      if (np[k]) EXPECT_NEAR(*stats.epi[k], epi[k] / double(np[k]), 1e-9 * (1 + epi[k]));
      weighted += *stats.mean[k] * double(stats.pixels[k]);
    }
    EXPECT_NEAR(weighted, total, 1e-9 * total);
  }
}

TEST(SectorStatsTest, ConstructedMaps) {
  auto m = annulus();
  auto map = split_sectors(m, 0.0, SliceClass::kBasal);
  auto layers = split_endo_epi(m);
  std::vector<float> uniform(kN * kN, 2.0f), by_id(kN * kN, 0.0f);
  for (std::size_t i = 0; i < by_id.size(); ++i) by_id[i] = float(map.sector[i]);
  auto a = sector_stats(uniform, map, layers);
  auto b = sector_stats(by_id, map, layers);
  for (std::size_t k = 0; k < 6; ++k) {
    EXPECT_EQ(*a.mean[k], 2.0);
    EXPECT_EQ(*b.mean[k], double(k + 1));
  }
  EXPECT_FALSE(a.mean[6]);
  EXPECT_THROW(sector_stats(std::vector<float>(3), map, layers), PerfusionError);
}

TEST(Reserve, RatiosGuardAndIdentity) {
  SectorValues rest, stress;
  for (std::size_t k = 0; k < 16; ++k) {
    rest[k] = 0.5 + 0.1 * double(k);
    stress[k] = rest[k];
  }
  auto same = perfusion_reserve(stress, rest);
  for (auto v : same) EXPECT_EQ(*v, 1.0);

  stress[0] = 2.4;
  rest[0] = 0.8;
  rest[1] = 0.0;
  rest[2] = 0.04;
  stress[3].reset();
  auto r = perfusion_reserve(stress, rest);
  EXPECT_DOUBLE_EQ(*r[0], 3.0);
  EXPECT_FALSE(r[1]);
  EXPECT_FALSE(r[2]);
  EXPECT_FALSE(r[3]);

  // Scaling stress scales every ratio.
  SectorValues scaled;
  for (std::size_t k = 0; k < 16; ++k) scaled[k] = stress[k] ? std::optional(*stress[k] * 1.7) : std::nullopt;
  auto s = perfusion_reserve(scaled, rest);
  for (std::size_t k = 0; k < 16; ++k) {
    if (r[k]) EXPECT_NEAR(*s[k], 1.7 * *r[k], 1e-12);
  }
}

TEST(Ptt, ShiftedIdenticalCurves) {
  std::vector<double> t_rv, t_lv, rv;
  for (int i = 0; i < 60; ++i) {
    double t = i * 0.9;
    t_rv.push_back(t * 1000.0);
    t_lv.push_back((t + 4.0) * 1000.0);
    rv.push_back(0.2 + 4.0 * gamma_variate(t, 6.0, 3.0, 1.5));
  }
  auto res = ptt_from_curves(t_rv, rv, t_lv, rv);
  EXPECT_NEAR(res.ptt_s, 4.0, 1e-6);
  auto same = ptt_from_curves(t_rv, rv, t_rv, rv);
  EXPECT_EQ(same.ptt_s, 0.0);
  auto peak = ptt_from_curves(t_rv, rv, t_lv, rv, PttMethod::kPeak);
  EXPECT_NEAR(peak.ptt_s, 4.0, 1e-6);
}

TEST(Ptt, DifferingShapesMatchIndependentOracle) {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> t0(3, 8), alpha(2, 4), beta(1, 2.5), delay(2, 6), dt(0.6, 1.2);
  for (int trial = 0; trial < 100; ++trial) {
    const double step = dt(rng), d = delay(rng);
    const double r0 = t0(rng), ra = alpha(rng), rb = beta(rng);
    const double la = alpha(rng), lb = beta(rng);
    std::vector<double> t, rv, lv;
    for (int i = 0; i < 60; ++i) {
      double s = i * step;
      t.push_back(s * 1000.0);
      rv.push_back(0.1 + 3.0 * gamma_variate(s, r0, ra, rb));
      lv.push_back(0.3 + 2.0 * gamma_variate(s, r0 + d, la, lb));
    }
    auto res = ptt_from_curves(t, rv, t, lv);
    EXPECT_NEAR(res.ptt_s, oracle_centroid(t, lv) - oracle_centroid(t, rv), 1e-9) << trial;
    // Shifting every LV time adds the shift.
    std::vector<double> t_shift = t;
    for (auto& x : t_shift) x += 1500.0;
    EXPECT_NEAR(ptt_from_curves(t, rv, t_shift, lv).ptt_s, res.ptt_s + 1.5, 1e-9);
  }
}

TEST(Ptt, ErrorsAndWindow) {
  std::vector<double> t{0, 1, 2, 3, 4, 5, 6, 7}, flat(8, 1.0);
  EXPECT_THROW(ptt_from_curves(t, flat, t, flat), PerfusionError);
  std::vector<double> short_t{0, 1, 2}, short_v{0, 1, 0};
  EXPECT_THROW(ptt_from_curves(short_t, short_v, short_t, short_v), PerfusionError);
  auto w = first_pass_window({0, 0, 0, 1, 5, 10, 4, 0.5, 0, 0});
  EXPECT_EQ(w.begin, 4u);
  EXPECT_EQ(w.end, 7u);
  auto b = baseline_corrected({1, 2, 3, 10, 0});
  EXPECT_EQ(b, (std::vector<double>{0, 0, 1, 8, 0}));
}

TEST(AifCurves, MaskMeansPerFrame) {
  SegmentationMask mask;
  mask.header.rows = 2;
  mask.header.cols = 2;
  mask.labels = {label::kRvBlood, label::kRvBlood, label::kLvBlood, 0};
  std::vector<std::vector<float>> frames{{1, 3, 5, 7}, {2, 4, 6, 8}};
  EXPECT_EQ(mask_mean_curve(frames, mask, label::kRvBlood), (std::vector<double>{2, 3}));
  EXPECT_EQ(mask_mean_curve(frames, mask, label::kLvBlood), (std::vector<double>{5, 6}));
}
