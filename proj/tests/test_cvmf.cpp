#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mogeo/cvmf.hpp"
#include "testutil.hpp"

using namespace mogeo;

namespace {
// independent per-location cosine, no shared normalization code path
double cosine_oracle(const Tensor& v, const Tensor& v_r, int row) {
  double vv = 0, rr = 0, vr = 0;
  for (int i = 0; i < v.dim(0); ++i) {
    vv += v[i] * v[i];
    rr += v_r.at2(row, i) * v_r.at2(row, i);
    vr += v[i] * v_r.at2(row, i);
  }
  if (vv == 0 || rr == 0) return 0;
  return vr / (std::sqrt(vv) * std::sqrt(rr));
}
}  // namespace

TEST_CASE("attention equals the cosine oracle and stays in [-1,1]") {
  Rng rng(61);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 6, gh = 3, gw = 4;
    Tensor v({d}), v_r({gh * gw, d});
    testutil::fill_random(v, rng, -2, 2);
    testutil::fill_random(v_r, rng, -2, 2);
    const AttentionMap att = attention(v, v_r, gh, gw, 0);
    for (int l = 0; l < gh * gw; ++l) {
      CHECK(att.values[l] >= -1.0);
      CHECK(att.values[l] <= 1.0);
      CHECK(std::abs(att.values[l] - cosine_oracle(v, v_r, l)) <= 1e-12);
    }
  }
}

TEST_CASE("attention special cases") {
  const int d = 4;
  Tensor v({d}), v_r({2, d});
  v[0] = 0.6;
  v[2] = -1.2;
  for (int i = 0; i < d; ++i) v_r.at2(0, i) = 3.0 * v[i];  // parallel row
  v_r.at2(1, 1) = 5.0;                                     // orthogonal row
  const AttentionMap att = attention(v, v_r, 1, 2, 3);
  CHECK(att.values[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(att.values[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(att.object_index == 3);

  // zero query vector: defined as all-zero attention
  Tensor zero({d});
  const AttentionMap z = attention(zero, v_r, 1, 2, 0);
  CHECK(z.values[0] == 0.0);
  CHECK(z.values[1] == 0.0);

  CHECK_THROWS(attention(v, v_r, 2, 2, 0));
  Tensor bad({3});
  CHECK_THROWS(attention(bad, v_r, 1, 2, 0));
}

TEST_CASE("modulate broadcasts the map over channels") {
  Rng rng(67);
  FeatureMap fr;
  fr.values = Tensor({3, 2, 2});
  fr.frame = Frame::reference;
  testutil::fill_random(fr.values, rng);
  AttentionMap fa;
  fa.values = Tensor({2, 2});

  SUBCASE("all-ones map is the identity") {
    fa.values.fill(1.0);
    const FeatureMap out = modulate(fa, fr);
    for (int64_t i = 0; i < out.values.size(); ++i) CHECK(out.values[i] == fr.values[i]);
  }
  SUBCASE("all-zeros map annihilates") {
    const FeatureMap out = modulate(fa, fr);
    for (int64_t i = 0; i < out.values.size(); ++i) CHECK(out.values[i] == 0.0);
  }
  SUBCASE("single live cell") {
    fa.values.at2(1, 0) = 0.5;
    const FeatureMap out = modulate(fa, fr);
    for (int c = 0; c < 3; ++c)
      for (int h = 0; h < 2; ++h)
        for (int w = 0; w < 2; ++w) {
          if (h == 1 && w == 0)
            CHECK(out.values.at(c, h, w) == 0.5 * fr.values.at(c, h, w));
          else
            CHECK(out.values.at(c, h, w) == 0.0);
        }
  }
  SUBCASE("grid mismatch") {
    AttentionMap wrong;
    wrong.values = Tensor({3, 2});
    CHECK_THROWS(modulate(wrong, fr));
  }
}

TEST_CASE("fuse_and_concat appends exactly one channel") {
  Rng rng(71);
  FeatureMap fr;
  fr.values = Tensor({3, 2, 2});
  testutil::fill_random(fr.values, rng);
  AttentionMap fa;
  fa.values = Tensor({2, 2});
  testutil::fill_random(fa.values, rng);

  const FeatureMap out = fuse_and_concat(fr, fa);
  CHECK(out.channels() == 4);
  for (int c = 0; c < 3; ++c)
    for (int h = 0; h < 2; ++h)
      for (int w = 0; w < 2; ++w) CHECK(out.values.at(c, h, w) == fr.values.at(c, h, w));
  for (int h = 0; h < 2; ++h)
    for (int w = 0; w < 2; ++w) CHECK(out.values.at(3, h, w) == fa.values.at2(h, w));
}

TEST_CASE("detection head preserves the grid and zeroes through zero") {
  Rng rng(73);
  DetectionHead head(5, 6);
  head.init(rng);
  FeatureMap in;
  in.values = Tensor({5, 4, 3});
  in.stride = 16;
  testutil::fill_random(in.values, rng);

  const GridPrediction pred = head.forward(in, 24, 24);
  CHECK(pred.grid_h() == 4);
  CHECK(pred.grid_w() == 3);
  CHECK(pred.raw.dim(0) == 5);

  in.values.zero();  // biases are zero after init
  const GridPrediction zero = head.forward(in, 24, 24);
  for (int64_t i = 0; i < zero.raw.size(); ++i) CHECK(zero.raw[i] == 0.0);

  CHECK_THROWS(head.forward(in, 0.0, 24));
  FeatureMap wrong;
  wrong.values = Tensor({4, 4, 3});
  CHECK_THROWS(head.forward(wrong, 24, 24));
}

TEST_CASE("decode_box formulas") {
  GridPrediction pred;
  pred.raw = Tensor({5, 8, 8});
  pred.anchor_w = 32;
  pred.anchor_h = 32;
  pred.stride = 16;

  // all-zero parameters: center of cell (3,5), anchor-sized box
  const BBox b = decode_box(pred, 3, 5);
  CHECK(b.cx == doctest::Approx(88.0));
  CHECK(b.cy == doctest::Approx(56.0));
  CHECK(b.w == doctest::Approx(32.0));
  CHECK(b.h == doctest::Approx(32.0));

  pred.raw.at(3, 3, 5) = std::log(2.0);  // tw
  const BBox b2 = decode_box(pred, 3, 5);
  CHECK(b2.w == doctest::Approx(64.0).epsilon(1e-12));

  // decoded center stays inside the cell's pixel extent
  Rng rng(79);
  for (int trial = 0; trial < 50; ++trial) {
    const int h = static_cast<int>(rng.uniform_int(0, 7));
    const int w = static_cast<int>(rng.uniform_int(0, 7));
    pred.raw.at(1, h, w) = rng.uniform(-6, 6);
    pred.raw.at(2, h, w) = rng.uniform(-6, 6);
    const BBox bb = decode_box(pred, h, w);
    CHECK(bb.cx > w * 16.0);
    CHECK(bb.cx < (w + 1) * 16.0);
    CHECK(bb.cy > h * 16.0);
    CHECK(bb.cy < (h + 1) * 16.0);
  }
  CHECK_THROWS(decode_box(pred, 8, 0));
}

TEST_CASE("select takes the highest-confidence cell with row-major ties") {
  GridPrediction pred;
  pred.raw = Tensor({5, 3, 3});
  pred.anchor_w = pred.anchor_h = 16;
  pred.stride = 16;

  SUBCASE("single spike") {
    for (int h = 0; h < 3; ++h)
      for (int w = 0; w < 3; ++w) pred.raw.at(0, h, w) = -5;
    pred.raw.at(0, 1, 2) = 5;
    const Detection det = select(pred, 4);
    CHECK(det.object_index == 4);
    CHECK(det.confidence == doctest::Approx(0.9933071491).epsilon(1e-9));
    CHECK(det.box.cx == doctest::Approx((2 + 0.5) * 16));
    CHECK(det.box.cy == doctest::Approx((1 + 0.5) * 16));
  }
  SUBCASE("all equal goes to cell (0,0)") {
    for (int h = 0; h < 3; ++h)
      for (int w = 0; w < 3; ++w) pred.raw.at(0, h, w) = 0.7;
    const Detection det = select(pred, 0);
    CHECK(det.box.cx == doctest::Approx(0.5 * 16));
    CHECK(det.box.cy == doctest::Approx(0.5 * 16));
  }
  SUBCASE("invariant under adding a constant and under monotone transforms") {
    Rng rng(83);
    testutil::fill_random(pred.raw, rng);
    const Detection a = select(pred, 0);
    GridPrediction shifted = pred;
    for (int h = 0; h < 3; ++h)
      for (int w = 0; w < 3; ++w) shifted.raw.at(0, h, w) += 11.5;
    const Detection b = select(shifted, 0);
    CHECK(a.box.cx == b.box.cx);
    CHECK(a.box.cy == b.box.cy);
    GridPrediction cubed = pred;
    for (int h = 0; h < 3; ++h)
      for (int w = 0; w < 3; ++w) {
        const double z = pred.conf(h, w);
        cubed.raw.at(0, h, w) = z * z * z + 2 * z;  // strictly increasing
      }
    const Detection c = select(cubed, 0);
    CHECK(a.box.cx == c.box.cx);
    CHECK(a.box.cy == c.box.cy);
  }
}

TEST_CASE("attention backward matches finite differences") {
  Rng rng(89);
  const int d = 5, gh = 2, gw = 3;
  Tensor v({d}), v_r({gh * gw, d}), upstream({gh * gw});
  testutil::fill_random(v, rng);
  testutil::fill_random(v_r, rng);
  testutil::fill_random(upstream, rng);

  auto loss = [&]() {
    const AttentionMap att = attention(v, v_r, gh, gw, 0);
    double s = 0;
    for (int64_t i = 0; i < att.values.size(); ++i) s += att.values[i] * upstream[i];
    return s;
  };

  AttentionTrace tr;
  (void)attention(v, v_r, gh, gw, 0, &tr);
  Tensor dv, dvr(v_r.shape());
  attention_backward(tr, upstream, dv, dvr);

  const Tensor nv = testutil::numeric_grad(loss, v);
  for (int i = 0; i < d; ++i) CHECK(std::abs(dv[i] - nv[i]) < 1e-7);
  const Tensor nr = testutil::numeric_grad(loss, v_r);
  for (int64_t i = 0; i < v_r.size(); ++i) CHECK(std::abs(dvr[i] - nr[i]) < 1e-7);
}

TEST_CASE("detection head gradients match finite differences") {
  kernels::set_parallel(false);
  Rng rng(97);
  DetectionHead head(4, 5);
  head.init(rng);
  FeatureMap in;
  in.values = Tensor({4, 3, 3});
  in.stride = 16;
  testutil::fill_random(in.values, rng);
  Tensor upstream({5, 3, 3});
  testutil::fill_random(upstream, rng);

  auto loss = [&]() {
    const GridPrediction pred = head.forward(in, 16, 16);
    double s = 0;
    for (int64_t i = 0; i < pred.raw.size(); ++i) s += pred.raw[i] * upstream[i];
    return s;
  };

  head.zero_grad();
  DetectionHead::Trace tr;
  (void)head.forward(in, 16, 16, &tr);
  const Tensor din = head.backward(tr, upstream);

  double worst = 0;
  auto compare = [&](Tensor& param, const Tensor& analytic) {
    const Tensor numeric = testutil::numeric_grad(loss, param, 1e-5);
    for (int64_t i = 0; i < param.size(); ++i)
      worst = std::max(worst, std::abs(analytic[i] - numeric[i]) /
                                  std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-2}));
  };
  compare(head.c1.w, head.c1.gw);
  compare(head.c1.b, head.c1.gb);
  compare(head.c2.w, head.c2.gw);
  compare(head.c3.w, head.c3.gw);
  compare(in.values, din);
  CHECK(worst <= 1e-4);
  kernels::set_parallel(true);
}
