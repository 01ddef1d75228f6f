#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "icmr/cmr/sax.hpp"
#include "icmr/sim/phantom.hpp"

using namespace icmr;
using namespace icmr::cmr;

namespace {

SegmentationMask blank(std::size_t n, double spacing = 1.0) {
  SegmentationMask m;
  m.header.rows = static_cast<std::uint16_t>(n);
  m.header.cols = static_cast<std::uint16_t>(n);
  m.header.data_type = wire::PixelType::kLabel;
  m.header.pixel_spacing_mm = {static_cast<float>(spacing), static_cast<float>(spacing)};
  m.header.slice_thickness_mm = 8.0f;
  m.header.slice_spacing_mm = 10.0f;
  m.labels.assign(n * n, label::kBackground);
  return m;
}

// Blood disc radius rb about (c, c); myocardium out to ro about (c, c + shift).
SegmentationMask shell(std::size_t n, double rb, double ro, double shift = 0.0) {
  auto m = blank(n);
  const double c = double(n / 2);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < n; ++k) {
      double dr = double(r) - c, dc = double(k) - c;
      if (std::hypot(dr, dc) <= rb) {
        m.labels[r * n + k] = label::kLvBlood;
      } else if (std::hypot(dr, dc - shift) <= ro) {
        m.labels[r * n + k] = label::kLvMyocardium;
      }
    }
  }
  return m;
}

}  // namespace

TEST(SaxFunction, ReferenceTableRegression) {
  auto f = sax_function(126.5, 28.6, 103.1, 68.0);
  EXPECT_NEAR(f.sv_ml, 98.0, 0.15);
  EXPECT_NEAR(f.ef_percent, 77.4, 0.15);
  EXPECT_NEAR(f.mcf_percent, 99.7, 0.2);
  ASSERT_TRUE(f.co_l_min);
  EXPECT_NEAR(*f.co_l_min, 6.8, 0.2);
  // Exact arithmetic behind the table.
  EXPECT_DOUBLE_EQ(f.sv_ml, 126.5 - 28.6);
  EXPECT_DOUBLE_EQ(f.ef_percent, 100.0 * (126.5 - 28.6) / 126.5);
  EXPECT_DOUBLE_EQ(f.mcf_percent, 100.0 * (126.5 - 28.6) / (103.1 / 1.05));
  EXPECT_DOUBLE_EQ(*f.co_l_min, (126.5 - 28.6) * 68.0 / 1000.0);
  EXPECT_FALSE(sax_function(126.5, 28.6, 103.1, std::nullopt).co_l_min);
}

TEST(SaxFunction, EfScaleInvariant) {
  auto a = sax_function(150.0, 60.0, 120.0, 70.0);
  auto b = sax_function(300.0, 120.0, 240.0, 70.0);
  EXPECT_DOUBLE_EQ(a.ef_percent, b.ef_percent);
}

TEST(SaxVolume, PixelArithmetic) {
  auto m = blank(100, 1.5);
  for (std::size_t i = 0; i < 1000; ++i) m.labels[i] = label::kLvBlood;
  EXPECT_DOUBLE_EQ(label_volume_ml(m, label::kLvBlood), 22.5);
  EXPECT_DOUBLE_EQ(blood_volume({m}).total_ml, 22.5);
  EXPECT_DOUBLE_EQ(blood_volume({blank(10)}).total_ml, 0.0);
  EXPECT_DOUBLE_EQ(blood_volume({m, m}, {false, true}).total_ml, 22.5);
  EXPECT_DOUBLE_EQ(blood_volume({m, m}, {false, false}).total_ml, 0.0);
}

TEST(SaxVolume, AdditivityAndMonotonicity) {
  std::mt19937 rng(6);
  std::uniform_int_distribution<int> lab(0, 3);
  std::bernoulli_distribution inc(0.7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<SegmentationMask> stack;
    std::vector<bool> included;
    for (int s = 0; s < 9; ++s) {
      auto m = blank(24, 1.3);
      for (auto& l : m.labels) l = static_cast<std::uint16_t>(lab(rng));
      stack.push_back(m);
      included.push_back(inc(rng));
    }
    auto v = blood_volume(stack, included);
    double sum = 0.0;
    for (std::size_t i = 0; i < v.per_slice_ml.size(); ++i) {
      if (!included[i]) EXPECT_EQ(v.per_slice_ml[i], 0.0);
      sum += v.per_slice_ml[i];
    }
    EXPECT_EQ(sum, v.total_ml);
    // Adding a blood pixel to an included slice never lowers the total.
    for (std::size_t s = 0; s < stack.size(); ++s) {
      if (!included[s]) continue;
      for (auto& l : stack[s].labels) {
        if (l != label::kLvBlood) {
          l = label::kLvBlood;
          break;
        }
      }
      break;
    }
    EXPECT_GE(blood_volume(stack, included).total_ml, v.total_ml);
  }
}

TEST(SaxEdEs, ArgmaxArgminWithTies) {
  EXPECT_EQ(find_ed_es({120, 80, 60, 90}), (std::pair<std::size_t, std::size_t>{0, 2}));
  EXPECT_EQ(find_ed_es({5, 5, 5}), (std::pair<std::size_t, std::size_t>{0, 0}));
  EXPECT_THROW(find_ed_es({1.0}), SaxError);
}

TEST(SaxEdEs, PhantomCosineCycle) {
  sim::PhantomParams p;
  p.matrix = 96;
  p.pixel_spacing_mm = 1.5625 * 2;
  p.n_phases = 20;
  std::vector<double> volumes;
  for (std::size_t ph = 0; ph < p.n_phases; ++ph) {
    std::vector<SegmentationMask> stack;
    for (std::size_t s = 0; s < p.n_slices; ++s) stack.push_back(sim::sax_mask(p, s, ph));
    volumes.push_back(blood_volume(stack).total_ml);
  }
  auto [ed, es] = find_ed_es(volumes);
  EXPECT_EQ(ed, 0u);
  EXPECT_EQ(es, p.n_phases / 2);
}

TEST(ValvePlaneFit, CoplanarAndOrientation) {
  std::vector<Vec3> pts{{0, 0, 10}, {10, 0, 10}, {0, 10, 10}, {10, 10, 10}};
  auto up = fit_valve_plane(pts, {5, 5, 50});
  EXPECT_NEAR(up.normal[2], 1.0, 1e-12);
  EXPECT_NEAR(up.signed_distance({0, 0, 10}), 0.0, 1e-12);
  auto down = fit_valve_plane(pts, {5, 5, -50});
  EXPECT_NEAR(down.normal[2], -1.0, 1e-12);
  EXPECT_NEAR(norm(down.normal), 1.0, 1e-9);
}

TEST(ValvePlaneFit, NoisyPointsRecoverNormal) {
  std::mt19937 rng(12);
  std::normal_distribution<double> g(0.0, 1.0), noise(0.0, 0.001);
  std::uniform_real_distribution<double> u(-20, 20);
  for (int trial = 0; trial < 100; ++trial) {
    Vec3 n{g(rng), g(rng), g(rng)};
    n = (1.0 / norm(n)) * n;
    Vec3 a = cross(n, Vec3{1, 0, 0});
    if (norm(a) < 0.1) a = cross(n, Vec3{0, 1, 0});
    a = (1.0 / norm(a)) * a;
    Vec3 b = cross(n, a);
    Vec3 origin{u(rng), u(rng), u(rng)};
    std::vector<Vec3> pts;
    for (int i = 0; i < 12; ++i) {
      pts.push_back(origin + u(rng) * a + u(rng) * b + noise(rng) * n);
    }
    auto plane = fit_valve_plane(pts, origin + 40.0 * n);
    double angle = std::acos(std::min(1.0, dot(plane.normal, n)));
    EXPECT_LT(angle, 1e-3);
  }
}

TEST(ValvePlaneFit, DegenerateInputs) {
  EXPECT_THROW(fit_valve_plane({{0, 0, 0}, {1, 1, 1}, {2, 2, 2}}, {0, 5, 0}), SaxError);
  EXPECT_THROW(fit_valve_plane({{0, 0, 0}, {1, 0, 0}}, {0, 0, 5}), SaxError);
  EXPECT_THROW(fit_valve_plane({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {3, 3, 0}), SaxError);
}

TEST(SliceInclusion, StrictApicalSide) {
  ValvePlane plane{{0, 0, 10}, {0, 0, 1}};
  wire::ImageHeader h;
  h.rows = h.cols = 4;
  h.row_dir = {1, 0, 0};
  h.col_dir = {0, 1, 0};
  h.position_mm = {-2, -2, 30};
  EXPECT_TRUE(slice_included(plane, h));
  h.position_mm[2] = 10;
  EXPECT_FALSE(slice_included(plane, h));
}

TEST(SliceInclusion, ElevenSlicesPlaneBetweenOneAndTwo) {
  sim::PhantomParams p;
  p.matrix = 32;
  // Slices at z = -50..50; plane at z = -35 facing +z.
  ValvePlane plane{{0, 0, -35}, {0, 0, 1}};
  std::vector<bool> included;
  for (std::size_t s = 0; s < 11; ++s) included.push_back(slice_included(plane, sim::sax_mask(p, s, 0).header));
  for (std::size_t s = 0; s < 11; ++s) EXPECT_EQ(included[s], s >= 2) << s;
}

TEST(WallThickness, AnnulusTenMillimetres) {
  auto m = shell(128, 20, 30);
  EXPECT_NEAR(max_wall_thickness(m), 10.0, 0.5);
  // Spacing scales the answer.
  m.header.pixel_spacing_mm = {2.0f, 2.0f};
  EXPECT_NEAR(max_wall_thickness(m), 20.0, 1.0);
}

TEST(WallThickness, EccentricShellMaxSide) {
  // Outer circle shifted 3 px along +col: 12 px thick there, 6 px opposite.
  auto m = shell(128, 20, 29, 3.0);
  // Pixel-distance oracle: myocardium run along the centre row on the thick
  // side, and the longest run along any row/column through the centre.
  const std::size_t c = 64;
  std::size_t run_right = 0, run_left = 0;
  for (std::size_t k = c; k < 128; ++k) run_right += m.at(c, k) == label::kLvMyocardium;
  for (std::size_t k = 0; k < c; ++k) run_left += m.at(c, k) == label::kLvMyocardium;
  ASSERT_EQ(run_right, 12u);
  ASSERT_EQ(run_left, 6u);
  EXPECT_NEAR(max_wall_thickness(m), double(run_right), 0.5);
}

TEST(WallThickness, NoMyocardiumIsAnError) {
  auto m = shell(64, 20, 20);
  EXPECT_THROW(max_wall_thickness(m), SaxError);
}

TEST(SaxBiomarkers, PhantomStackWithinThreePercent) {
  sim::PhantomParams p;
  p.n_phases = 10;
  SaxInputs in;
  for (std::size_t ph = 0; ph < p.n_phases; ++ph) {
    std::vector<SegmentationMask> stack;
    for (std::size_t s = 0; s < p.n_slices; ++s) stack.push_back(sim::sax_mask(p, s, ph));
    in.stacks.push_back(std::move(stack));
  }
  in.heart_rate_bpm = 68.0;
  in.bsa_m2 = 1.9;
  auto r = sax_biomarkers(in);
  const double edv = 4.0 / 3.0 * std::numbers::pi * 27 * 27 * 45 / 1000.0;
  const double esv = 4.0 / 3.0 * std::numbers::pi * 18 * 18 * 38 / 1000.0;
  EXPECT_EQ(r.ed_phase, 0u);
  EXPECT_EQ(r.es_phase, 5u);
  EXPECT_NEAR(r.edv_ml / edv, 1.0, 0.03);
  EXPECT_NEAR(r.esv_ml / esv, 1.0, 0.03);
  EXPECT_NEAR(r.ef_percent, 100.0 * (edv - esv) / edv, 1.0);
  EXPECT_TRUE(r.uncorrected_extent);
  // Report identities on unrounded values.
  EXPECT_EQ(r.sv_ml, r.edv_ml - r.esv_ml);
  EXPECT_EQ(r.ef_percent, 100.0 * r.sv_ml / r.edv_ml);
  ASSERT_TRUE(r.edvi && r.ci && r.co_l_min);
  EXPECT_EQ(*r.edvi, r.edv_ml / 1.9);
  EXPECT_EQ(*r.ci, *r.co_l_min / 1.9);
  double sum = 0.0;
  for (double v : r.ed_blood.per_slice_ml) sum += v;
  EXPECT_EQ(sum, r.edv_ml);
  EXPECT_EQ(r.wall_thickness_mm.size(), p.n_slices);
}

TEST(SaxBiomarkers, MissingHeartRateOmitsCardiacOutput) {
  sim::PhantomParams p;
  p.matrix = 64;
  p.pixel_spacing_mm = 4.0;
  p.n_phases = 4;
  SaxInputs in;
  for (std::size_t ph = 0; ph < p.n_phases; ++ph) {
    std::vector<SegmentationMask> stack;
    for (std::size_t s = 0; s < p.n_slices; ++s) stack.push_back(sim::sax_mask(p, s, ph));
    in.stacks.push_back(std::move(stack));
  }
  auto r = sax_biomarkers(in);
  EXPECT_FALSE(r.co_l_min);
  EXPECT_FALSE(r.edvi);
  EXPECT_FALSE(r.flags.empty());
  ReportDocument doc;
  add_sax_to_report(r, doc);
  EXPECT_NO_THROW(doc.table("sax_function"));
  EXPECT_NO_THROW(doc.table("sax_slices"));
}

TEST(SaxBiomarkers, EmptyBloodIsAnError) {
  SaxInputs in;
  in.stacks = {{blank(8)}, {blank(8)}};
  EXPECT_THROW(sax_biomarkers(in), SaxError);
}
