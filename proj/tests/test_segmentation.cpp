#include <cmath>
#include <numbers>
#include <random>

#include "irisswap/segmentation.hpp"
#include "irisswap/synth.hpp"
#include "test_util.hpp"

using namespace irisswap;

namespace {

PolarTexture constant_texture(float v, int R = 64, int A = 512) {
  PolarTexture t(R, A);
  for (int r = 0; r < R; ++r)
    for (int a = 0; a < A; ++a) t.value(r, a) = v;
  return t;
}

IrisGeometry geom(double cx, double cy, double rp, double rl, int w = 320, int h = 240) {
  return {{{cx, cy}, rp}, {{cx, cy}, rl}, w, h};
}

GrayImage render(const IrisGeometry& g, std::uint64_t seed = 1, double noise = 2.0) {
  return render_eye(g, generate_subject_texture(seed), {200.0, 30.0, noise}, seed);
}

void fill_disk(GrayImage& img, double cx, double cy, double r, std::uint8_t v) {
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (std::hypot(x - cx, y - cy) < r) img.at(x, y) = v;
}

}  // namespace

TEST(DetectPupil, RenderedDiskAt160x120) {
  const IrisGeometry g = geom(160, 120, 30, 75);
  const Circle c = detect_pupil(render(g));
  EXPECT_LE(distance(c.center, g.pupil.center), 1.0);
  EXPECT_LE(std::abs(c.radius - 30.0), 1.0);
}

TEST(DetectPupil, UniformGrayHasNoPupil) { EXPECT_THROW_CODE(detect_pupil(GrayImage(320, 240, 128)), NoPupilFound); }

TEST(DetectPupil, LargestComponentWins) {
  GrayImage img(320, 240, 200);
  const double r_big = std::sqrt(900.0 / std::numbers::pi), r_small = std::sqrt(100.0 / std::numbers::pi);
  fill_disk(img, 80, 60, r_big, 20);
  fill_disk(img, 240, 180, r_small, 20);
  const Circle c = detect_pupil(img);
  EXPECT_LE(distance(c.center, {80, 60}), 1.0);
  EXPECT_NEAR(c.radius, r_big, 1.0);
}

TEST(DetectPupil, TranslationEquivariant) {
  const IrisGeometry g = geom(150, 118, 27, 66);
  const Circle base = detect_pupil(render(g, 5));
  for (auto [dx, dy] : std::vector<std::pair<int, int>>{{7, 0}, {0, -9}, {-12, 5}, {20, 14}}) {
    const Circle c = detect_pupil(render(geom(150 + dx, 118 + dy, 27, 66), 5));
    EXPECT_NEAR(c.center.x - base.center.x, dx, 1.0);
    EXPECT_NEAR(c.center.y - base.center.y, dy, 1.0);
  }
}

TEST(DetectLimbus, RenderedRadius75) {
  const IrisGeometry g = geom(160, 120, 30, 75);
  const GrayImage img = render(g);
  const Circle c = detect_limbus(img, detect_pupil(img));
  EXPECT_LE(std::abs(c.radius - 75.0), 2.0);
  EXPECT_LE(distance(c.center, g.limbus.center), 2.0);
}

TEST(DetectLimbus, ZeroContrastHasNoLimbus) {
  const IrisGeometry g = geom(160, 120, 30, 75);
  const GrayImage img = render_eye(g, constant_texture(200.0f), {200.0, 30.0, 0.0}, 1);
  EXPECT_THROW_CODE(detect_limbus(img, detect_pupil(img)), NoLimbusFound);
}

TEST(DetectLimbus, PartlyClippedLimbus) {
  // limbus leaves the right edge over about 21% of its circumference
  const IrisGeometry g = geom(260, 120, 30, 75);
  const GrayImage img = render(g, 3);
  const Circle c = detect_limbus(img, detect_pupil(img));
  EXPECT_LE(std::abs(c.radius - 75.0), 3.0);
  EXPECT_LE(distance(c.center, g.limbus.center), 3.0);
}

TEST(Mask, DegeneratePupilGivesFullDisk) {
  const BinaryMask m = geometry_to_mask(geom(100, 100, 1e-4, 40, 200, 200));
  const double area = std::numbers::pi * 40 * 40;
  EXPECT_LE(std::abs(double(m.count()) - area), 2.0 * std::numbers::pi * 40);
}

TEST(Mask, EqualRadiiIsEmpty) {
  IrisGeometry g = geom(100, 100, 40, 40, 200, 200);
  EXPECT_EQ(geometry_to_mask(g).count(), 0u);
}

TEST(Mask, AnnulusArea) {
  const BinaryMask m = geometry_to_mask(geom(160, 120, 30, 75));
  const double area = std::numbers::pi * (75.0 * 75.0 - 30.0 * 30.0);
  EXPECT_LE(std::abs(double(m.count()) - area) / area, 0.02);
}

TEST(Mask, PgmRoundTrip) {
  const BinaryMask m = geometry_to_mask(geom(160, 120, 30, 75));
  EXPECT_EQ(image_to_mask(mask_to_image(m)), m);
}

TEST(Dice, Table) {
  BinaryMask a(20, 20), b(20, 20);
  EXPECT_DOUBLE_EQ(dice_score(a, b), 1.0);  // both empty
  for (int x = 0; x < 10; ++x)
    for (int y = 0; y < 10; ++y) a.set(x, y, true);
  EXPECT_DOUBLE_EQ(dice_score(a, a), 1.0);
  for (int x = 10; x < 20; ++x)
    for (int y = 10; y < 20; ++y) b.set(x, y, true);
  EXPECT_DOUBLE_EQ(dice_score(a, b), 0.0);
  // |A| = |B| = 100, overlap 50
  BinaryMask c(20, 20);
  for (int x = 5; x < 15; ++x)
    for (int y = 0; y < 10; ++y) c.set(x, y, true);
  EXPECT_DOUBLE_EQ(dice_score(a, c), 0.5);
  EXPECT_THROW_CODE(dice_score(a, BinaryMask(10, 20)), DimensionMismatch);
}

TEST(Dice, SymmetricAndEqualsF1) {
  std::mt19937 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    BinaryMask p(16, 16), t(16, 16);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        p.set(x, y, rng() % 3 == 0);
        t.set(x, y, rng() % 2 == 0);
      }
    int tp = 0, fp = 0, fn = 0;
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        tp += p.at(x, y) && t.at(x, y);
        fp += p.at(x, y) && !t.at(x, y);
        fn += !p.at(x, y) && t.at(x, y);
      }
    const double prec = double(tp) / (tp + fp), rec = double(tp) / (tp + fn);
    EXPECT_NEAR(dice_score(p, t), 2 * prec * rec / (prec + rec), 1e-12);
    EXPECT_DOUBLE_EQ(dice_score(p, t), dice_score(t, p));
  }
}

TEST(Segment, RenderThenDetectDice) {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> gh(-6.0, 6.0), gv(-4.0, 4.0);
  double total = 0.0;
  const int n = 100;
  for (int i = 0; i < n; ++i) {
    const SubjectProfile prof = make_profile(1000 + i);
    const PolarTexture tex = generate_subject_texture(1000 + i, 64, 512, &prof);
    const RenderedFrame f = render_frame(gh(rng), gv(rng), prof, tex, 77 + i);
    total += dice_score(geometry_to_mask(segment(f.image)), f.mask);
  }
  EXPECT_GE(total / n, 0.95);
}

TEST(Geometry, Validation) {
  EXPECT_THROW_CODE(validate_geometry(geom(100, 100, 50, 40)), InvalidGeometry);
  IrisGeometry g = geom(100, 100, 20, 60);
  g.pupil.center = {140, 100};
  EXPECT_THROW_CODE(validate_geometry(g), InvalidGeometry);
}
