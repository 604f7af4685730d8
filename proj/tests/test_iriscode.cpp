#include <random>

#include "irisswap/iriscode.hpp"
#include "irisswap/synth.hpp"
#include "test_util.hpp"

using namespace irisswap;

namespace {

IrisTemplate random_template(std::uint32_t seed, double usable = 1.0, int bands = 8, int positions = 128) {
  std::mt19937 rng(seed);
  std::bernoulli_distribution coin(0.5), keep(usable);
  IrisTemplate t;
  t.bands = bands;
  t.angular_positions = positions;
  t.code = BitVector(t.bit_count());
  t.mask = BitVector(t.bit_count());
  for (std::size_t i = 0; i < t.bit_count(); i += 2) {
    t.code.set(i, coin(rng));
    t.code.set(i + 1, coin(rng));
    const bool k = keep(rng);
    t.mask.set(i, k);
    t.mask.set(i + 1, k);
  }
  return t;
}

// Straight from the definition, one bit at a time.
double reference_hd(const IrisTemplate& a, const IrisTemplate& b, int max_shift) {
  double best = 2.0;
  const int P = a.angular_positions;
  for (int s = -max_shift; s <= max_shift; ++s) {
    std::size_t diff = 0, joint = 0;
    for (int band = 0; band < a.bands; ++band)
      for (int k = 0; k < P; ++k)
        for (int q = 0; q < 2; ++q) {
          const std::size_t ia = 2u * (std::size_t(band) * P + k) + q;
          const int kb = ((k - s) % P + P) % P;
          const std::size_t ib = 2u * (std::size_t(band) * P + kb) + q;
          if (!a.mask.get(ia) || !b.mask.get(ib)) continue;
          ++joint;
          diff += a.code.get(ia) != b.code.get(ib);
        }
    if (joint >= 0.25 * a.bit_count()) best = std::min(best, double(diff) / joint);
  }
  return best;
}

IrisTemplate template_of_render(const SubjectProfile& prof, const PolarTexture& tex, double h, double v,
                                std::uint64_t noise) {
  const RenderedFrame f = render_frame(h, v, prof, tex, noise);
  return encode(unwrap(f.image, segment(f.image)));
}

}  // namespace

TEST(Encode, ConstantTextureFullyMasked) {
  PolarTexture t(64, 512);
  for (int r = 0; r < 64; ++r)
    for (int a = 0; a < 512; ++a) t.value(r, a) = 120.0f;
  const IrisTemplate c = encode(t);
  EXPECT_EQ(c.bit_count(), 2048u);
  EXPECT_EQ(c.mask.popcount(), 0u);
}

TEST(Encode, Deterministic) {
  const PolarTexture t = generate_subject_texture(3);
  EXPECT_EQ(encode(t), encode(t));
}

TEST(Encode, ColumnRotationRotatesCode) {
  const PolarTexture t = generate_subject_texture(21);
  const int A = t.angular_res(), step = A / 128;
  for (int k : {1, 5, -3}) {
    PolarTexture rot(t.radial_res(), A);
    for (int r = 0; r < t.radial_res(); ++r)
      for (int a = 0; a < A; ++a) rot.value(r, ((a + k * step) % A + A) % A) = t.value(r, a);
    const IrisTemplate e0 = encode(t), e1 = encode(rot);
    const BitVector code = rotate_bits(e0.code, 8, 128, k), mask = rotate_bits(e0.mask, 8, 128, k);
    std::size_t compared = 0;
    for (std::size_t i = 0; i < code.size(); ++i) {
      if (!mask.get(i) || !e1.mask.get(i)) continue;
      ++compared;
      EXPECT_EQ(code.get(i), e1.code.get(i)) << "shift " << k << " bit " << i;
    }
    EXPECT_GT(compared, 1500u);
  }
}

TEST(Encode, InvalidCellsMaskBits) {
  PolarTexture t = generate_subject_texture(8);
  for (int r = 0; r < t.radial_res(); ++r)
    for (int a = 0; a < 100; ++a) t.set_valid(r, a, false);
  const IrisTemplate c = encode(t);
  EXPECT_LT(c.usable_fraction(), 0.85);
  EXPECT_GT(c.usable_fraction(), 0.25);
}

TEST(Encode, TextureTooSmall) { EXPECT_THROW_CODE(encode(PolarTexture(4, 16)), TextureTooSmall); }

TEST(Hamming, SelfIsZeroComplementIsOne) {
  const IrisTemplate a = random_template(1);
  EXPECT_EQ(hamming_distance(a, a), 0.0);
  IrisTemplate c = a;
  for (std::size_t i = 0; i < c.bit_count(); ++i) c.code.set(i, !a.code.get(i));
  EXPECT_EQ(hamming_distance(a, c, 0), 1.0);
}

TEST(Hamming, MatchesReferenceSymmetricMonotone) {
  for (std::uint32_t s = 0; s < 20; ++s) {
    const IrisTemplate a = random_template(100 + s, 0.8), b = random_template(200 + s, 0.7);
    for (int shift : {0, 2, 8}) EXPECT_NEAR(hamming_distance(a, b, shift), reference_hd(a, b, shift), 1e-12);
    EXPECT_EQ(hamming_distance(a, b), hamming_distance(b, a));
    double prev = 2.0;
    for (int shift = 0; shift <= 10; ++shift) {
      const double hd = hamming_distance(a, b, shift);
      EXPECT_LE(hd, prev);
      prev = hd;
    }
  }
}

TEST(Hamming, Errors) {
  EXPECT_THROW_CODE(hamming_distance(random_template(1), random_template(2, 1.0, 4, 128)), GeometryMismatch);
  EXPECT_THROW_CODE(hamming_distance(random_template(1), random_template(2, 0.1)), InsufficientMask);
}

TEST(Hamming, ImpostorDistribution) {
  double sum = 0.0;
  for (int i = 0; i < 200; ++i)
    sum += hamming_distance(encode(generate_subject_texture(10000 + 2 * i)), encode(generate_subject_texture(10001 + 2 * i)));
  const double mean = sum / 200;
  EXPECT_GE(mean, 0.45);
  EXPECT_LE(mean, 0.55);
}

TEST(Hamming, GenuineAndImpostorRenders) {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> gh(-5, 5), gv(-3, 3);
  int genuine_ok = 0, impostor_ok = 0;
  for (int i = 0; i < 100; ++i) {
    const SubjectProfile p = make_profile(300 + i), q = make_profile(700 + i);
    const PolarTexture tp = generate_subject_texture(300 + i, 64, 512, &p);
    const PolarTexture tq = generate_subject_texture(700 + i, 64, 512, &q);
    const IrisTemplate a = template_of_render(p, tp, gh(rng), gv(rng), 2 * i);
    const IrisTemplate b = template_of_render(p, tp, gh(rng), gv(rng), 2 * i + 1);
    const IrisTemplate c = template_of_render(q, tq, gh(rng), gv(rng), 5000 + i);
    genuine_ok += hamming_distance(a, b) < 0.37;
    impostor_ok += hamming_distance(a, c) >= 0.37;
  }
  EXPECT_GE(genuine_ok, 90);
  EXPECT_GE(impostor_ok, 95);
}

TEST(Authenticate, ThresholdIsStrict) {
  EXPECT_EQ(decide(0.36), AuthDecision::Accept);
  EXPECT_EQ(decide(0.37), AuthDecision::Reject);
  EXPECT_EQ(decide(0.39), AuthDecision::Reject);
  const IrisTemplate a = random_template(5);
  const AuthResult r = authenticate(a, a);
  EXPECT_TRUE(r.accepted());
  EXPECT_EQ(r.hd, 0.0);
}

TEST(TemplateFile, RoundTripAndCorruption) {
  testutil::TempDir dir;
  const IrisTemplate t = random_template(44, 0.6);
  save_template(t, dir / "t.irtc");
  EXPECT_EQ(load_template(dir / "t.irtc"), t);
  auto bytes = encode_template_file(t);
  bytes[1] ^= 0x5a;
  EXPECT_THROW_CODE(decode_template_file(bytes), MalformedFile);
  bytes = encode_template_file(t);
  bytes.pop_back();
  EXPECT_THROW_CODE(decode_template_file(bytes), MalformedFile);
}
