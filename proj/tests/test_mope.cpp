#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mogeo/mope.hpp"
#include "testutil.hpp"

using namespace mogeo;

namespace {
FeatureMap random_fq(int c, int h, int w, Rng& rng) {
  FeatureMap fm;
  fm.values = Tensor({c, h, w});
  fm.stride = 16;
  fm.frame = Frame::query;
  testutil::fill_random(fm.values, rng);
  return fm;
}
}  // namespace

TEST_CASE("build_mask floor/clamp arithmetic") {
  const ImpulseMask a = build_mask({35, 250}, 16, 16, 16);
  CHECK(a.hot_h == 15);  // floor(250/16)
  CHECK(a.hot_w == 2);   // floor(35/16)
  const ImpulseMask b = build_mask({0, 0}, 16, 16, 16);
  CHECK(b.hot_h == 0);
  CHECK(b.hot_w == 0);
  const ImpulseMask c = build_mask({255.9, 255.9}, 16, 16, 16);
  CHECK(c.hot_h == 15);
  CHECK(c.hot_w == 15);
  // coordinates past the grid clamp instead of overflowing
  const ImpulseMask d = build_mask({400.0, -3.0}, 16, 16, 16);
  CHECK(d.hot_h == 0);
  CHECK(d.hot_w == 15);
}

TEST_CASE("masks are exactly one-hot over 1000 random draws") {
  Rng rng(17);
  const int strides[] = {2, 4, 8, 16, 32};
  for (int trial = 0; trial < 1000; ++trial) {
    const int stride = strides[rng.uniform_int(0, 4)];
    const int gh = static_cast<int>(rng.uniform_int(1, 24));
    const int gw = static_cast<int>(rng.uniform_int(1, 24));
    const ClickPoint p{rng.uniform(0, gw * stride), rng.uniform(0, gh * stride)};
    const ImpulseMask m = build_mask(p, gh, gw, stride);
    const Tensor vals = m.values();
    int64_t ones = 0, nonzeros = 0;
    for (int64_t i = 0; i < vals.size(); ++i) {
      if (vals[i] == 1.0) ++ones;
      if (vals[i] != 0.0) ++nonzeros;
    }
    CHECK(ones == 1);
    CHECK(nonzeros == 1);
    CHECK(m.hot_h == std::min(gh - 1, static_cast<int>(std::floor(p.y / stride))));
    CHECK(m.hot_w == std::min(gw - 1, static_cast<int>(std::floor(p.x / stride))));
  }
}

TEST_CASE("fuse_position is linear in its inputs") {
  Rng rng(23);
  Mope mope(6, 8);
  mope.init(rng);
  FeatureMap fq = random_fq(6, 4, 4, rng);
  const ImpulseMask mask = build_mask({20, 36}, 4, 4, 16);

  SUBCASE("zero features, zero bias: only the hot cell responds") {
    fq.values.zero();
    mope.fuse.b.zero();
    const FeatureMap out = mope.fuse_position(fq, mask);
    for (int c = 0; c < out.channels(); ++c)
      for (int h = 0; h < 4; ++h)
        for (int w = 0; w < 4; ++w) {
          if (h == mask.hot_h && w == mask.hot_w)
            CHECK(out.values.at(c, h, w) == mope.fuse.w.at4(c, 6, 0, 0));
          else
            CHECK(out.values.at(c, h, w) == 0.0);
        }
  }

  SUBCASE("identity weights ignoring the mask channel reproduce F_q") {
    mope.fuse.w.zero();
    mope.fuse.b.zero();
    for (int c = 0; c < 6; ++c) mope.fuse.w.at4(c, c, 0, 0) = 1.0;
    const FeatureMap out = mope.fuse_position(fq, mask);
    for (int64_t i = 0; i < fq.values.size(); ++i) CHECK(out.values[i] == fq.values[i]);
  }

  SUBCASE("grid mismatch is rejected") {
    const ImpulseMask wrong = build_mask({0, 0}, 5, 4, 16);
    CHECK_THROWS(mope.fuse_position(fq, wrong));
  }
}

TEST_CASE("sharpen keeps exactly the hot column") {
  Rng rng(29);
  FeatureMap f = random_fq(5, 6, 7, rng);
  const ImpulseMask mask = build_mask({50, 30}, 6, 7, 16);
  const FeatureMap out = sharpen(f, mask);
  double column_sum_direct = 0, column_sum_total = 0;
  for (int c = 0; c < 5; ++c) {
    column_sum_direct += f.values.at(c, mask.hot_h, mask.hot_w);
    for (int h = 0; h < 6; ++h)
      for (int w = 0; w < 7; ++w) {
        column_sum_total += out.values.at(c, h, w);
        if (h == mask.hot_h && w == mask.hot_w)
          CHECK(out.values.at(c, h, w) == f.values.at(c, h, w));
        else
          CHECK(out.values.at(c, h, w) == 0.0);
      }
  }
  // sifting: summing over the grid recovers the hot column
  CHECK(column_sum_total == column_sum_direct);
}

TEST_CASE("pool_to_vector equals the projected hot-cell column (sifting)") {
  Rng rng(31);
  Mope mope(6, 9);
  mope.init(rng);
  testutil::fill_random(mope.proj.b, rng);  // nonzero bias, added once

  for (int trial = 0; trial < 200; ++trial) {
    FeatureMap f = random_fq(6, 5, 5, rng);
    const ImpulseMask mask =
        build_mask({rng.uniform(0, 80), rng.uniform(0, 80)}, 5, 5, 16);
    const FeatureMap sharp = sharpen(f, mask);
    const Tensor v = pool_to_vector(sharp, mope.proj);

    Tensor column({6});
    for (int c = 0; c < 6; ++c) column[c] = f.values.at(c, mask.hot_h, mask.hot_w);
    const Tensor direct = mope.proj.forward(column);
    for (int i = 0; i < 9; ++i) CHECK(std::abs(v[i] - direct[i]) <= 1e-12);
  }
}

TEST_CASE("zero input with zero-bias projection pools to the zero vector") {
  Rng rng(37);
  Mope mope(4, 5);
  mope.init(rng);  // biases zero
  FeatureMap f;
  f.values = Tensor({4, 3, 3});
  f.stride = 16;
  const ImpulseMask mask = build_mask({0, 0}, 3, 3, 16);
  const Tensor v = pool_to_vector(sharpen(f, mask), mope.proj);
  for (int i = 0; i < 5; ++i) CHECK(v[i] == 0.0);
}

TEST_CASE("clicks in the same cell produce identical vectors") {
  Rng rng(41);
  Mope mope(6, 8);
  mope.init(rng);
  const FeatureMap fq = random_fq(6, 4, 4, rng);
  // distinct points, same floor cell (stride 16)
  const Tensor a = mope.encode_one(fq, {33.2, 17.9}, nullptr);
  const Tensor b = mope.encode_one(fq, {47.9, 31.1}, nullptr);
  for (int i = 0; i < 8; ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("encode_objects composes the sub-operations and is order-equivariant") {
  Rng rng(43);
  Mope mope(6, 8);
  mope.init(rng);
  const FeatureMap fq = random_fq(6, 4, 4, rng);
  const std::vector<ClickPoint> clicks = {{5, 5}, {40, 20}, {60, 60}};

  const std::vector<Tensor> vs = mope.encode_objects(fq, clicks);
  REQUIRE(vs.size() == 3);
  for (size_t j = 0; j < clicks.size(); ++j) {
    const Tensor manual = mope.encode_one(fq, clicks[j], nullptr);
    for (int i = 0; i < 8; ++i) CHECK(vs[j][i] == manual[i]);
    CHECK(vs[j].all_finite());
    CHECK(vs[j].dim(0) == 8);
  }

  const std::vector<ClickPoint> permuted = {clicks[2], clicks[0], clicks[1]};
  const std::vector<Tensor> vp = mope.encode_objects(fq, permuted);
  for (int i = 0; i < 8; ++i) {
    CHECK(vp[0][i] == vs[2][i]);
    CHECK(vp[1][i] == vs[0][i]);
    CHECK(vp[2][i] == vs[1][i]);
  }
  CHECK_THROWS(mope.encode_objects(fq, {}));
}

TEST_CASE("locality: cells other than the hot cell cannot influence the vector") {
  Rng rng(47);
  Mope mope(6, 8);
  mope.init(rng);
  FeatureMap fq = random_fq(6, 4, 4, rng);
  const ClickPoint click{20, 36};  // cell (2,1)
  const Tensor before = mope.encode_one(fq, click, nullptr);

  for (int c = 0; c < 6; ++c)
    for (int h = 0; h < 4; ++h)
      for (int w = 0; w < 4; ++w) {
        if (h == 2 && w == 1) continue;
        fq.values.at(c, h, w) += 3.7;
      }
  const Tensor after = mope.encode_one(fq, click, nullptr);
  for (int i = 0; i < 8; ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("per-object parameter sharing: m=2 gradient is the sum of m=1 gradients") {
  Rng rng(53);
  Mope mope(5, 7);
  mope.init(rng);
  const FeatureMap fq = random_fq(5, 4, 4, rng);
  const std::vector<ClickPoint> clicks = {{10, 10}, {50, 30}};
  Tensor upstream({7});
  testutil::fill_random(upstream, rng);

  auto run = [&](const std::vector<ClickPoint>& pts) {
    mope.zero_grad();
    std::vector<Mope::ObjectTrace> traces;
    (void)mope.encode_objects(fq, pts, &traces);
    Tensor dfq(fq.values.shape());
    for (const auto& tr : traces) mope.backward_one(tr, upstream, dfq);
    std::vector<double> g;
    mope.visit([&g](const std::string&, Tensor&, Tensor& grad) {
      for (int64_t i = 0; i < grad.size(); ++i) g.push_back(grad[i]);
    });
    return g;
  };

  const std::vector<double> g_both = run(clicks);
  const std::vector<double> g_first = run({clicks[0]});
  const std::vector<double> g_second = run({clicks[1]});
  REQUIRE(g_both.size() == g_first.size());
  for (size_t i = 0; i < g_both.size(); ++i)
    CHECK(g_both[i] == doctest::Approx(g_first[i] + g_second[i]).epsilon(1e-12));
}

TEST_CASE("mope chain gradients match finite differences") {
  kernels::set_parallel(false);
  Rng rng(59);
  Mope mope(5, 6);
  mope.init(rng);
  FeatureMap fq = random_fq(5, 3, 3, rng);
  const ClickPoint click{20, 20};
  Tensor upstream({6});
  testutil::fill_random(upstream, rng);

  auto loss = [&]() {
    const Tensor v = mope.encode_one(fq, click, nullptr);
    double s = 0;
    for (int i = 0; i < 6; ++i) s += v[i] * upstream[i];
    return s;
  };

  mope.zero_grad();
  Mope::ObjectTrace tr;
  (void)mope.encode_one(fq, click, &tr);
  Tensor dfq(fq.values.shape());
  mope.backward_one(tr, upstream, dfq);

  double worst = 0;
  auto compare = [&](Tensor& param, const Tensor& analytic) {
    const Tensor numeric = testutil::numeric_grad(loss, param, 1e-5);
    for (int64_t i = 0; i < param.size(); ++i)
      worst = std::max(worst, std::abs(analytic[i] - numeric[i]) /
                                  std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-2}));
  };
  compare(mope.fuse.w, mope.fuse.gw);
  compare(mope.fuse.b, mope.fuse.gb);
  compare(mope.proj.w, mope.proj.gw);
  compare(mope.proj.b, mope.proj.gb);
  compare(fq.values, dfq);
  CHECK(worst <= 1e-4);
  kernels::set_parallel(true);
}
