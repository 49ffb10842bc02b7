#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mogeo/encoders.hpp"
#include "testutil.hpp"

using namespace mogeo;
using testutil::random_image;

TEST_CASE("stride arithmetic and divisibility errors") {
  EncoderConfig cfg = EncoderConfig::tiny();
  DualEncoder enc(cfg);
  Rng rng(1);
  enc.query_stack.init(rng);
  enc.reference_stack.init(rng);
  enc.reference_proj.init(rng);

  Rng img_rng(2);
  const FeatureMap fq = enc.encode_query(random_image(256, 256, img_rng));
  CHECK(fq.height() == 16);
  CHECK(fq.width() == 16);
  CHECK(fq.channels() == cfg.query_channels);
  CHECK(fq.stride == 16);
  CHECK(fq.frame == Frame::query);

  const FeatureMap fr = enc.encode_reference(random_image(256, 256, img_rng));
  CHECK(fr.height() == 16);
  CHECK(fr.channels() == cfg.embed_dim);
  CHECK(fr.frame == Frame::reference);

  CHECK_THROWS(enc.encode_query(random_image(250, 256, img_rng)));
  CHECK_THROWS(enc.encode_reference(random_image(256, 250, img_rng)));
}

TEST_CASE("zero image through a zero-bias network gives zero features") {
  DualEncoder enc(EncoderConfig::tiny());
  Rng rng(3);
  enc.query_stack.init(rng);  // init zeroes biases
  const Image zero(64, 64);
  const FeatureMap fq = enc.encode_query(zero);
  for (int64_t i = 0; i < fq.values.size(); ++i) CHECK(fq.values[i] == 0.0);
}

TEST_CASE("two calls with the same weights and input are identical") {
  DualEncoder enc(EncoderConfig::tiny());
  Rng rng(4);
  enc.query_stack.init(rng);
  Rng img_rng(5);
  const Image img = random_image(64, 64, img_rng);
  const FeatureMap a = enc.encode_query(img);
  const FeatureMap b = enc.encode_query(img);
  for (int64_t i = 0; i < a.values.size(); ++i) CHECK(a.values[i] == b.values[i]);
}

TEST_CASE("reference grid at published scale: 1024px, stride 16, d=512") {
  EncoderConfig cfg;
  cfg.stride = 16;
  cfg.query_stage_channels = {2, 2, 2, 2};
  cfg.reference_stage_channels = {2, 2, 2, 2};
  cfg.query_channels = 2;
  cfg.embed_dim = 512;
  DualEncoder enc(cfg);
  Rng rng(6);
  enc.reference_stack.init(rng);
  enc.reference_proj.init(rng);
  Rng img_rng(7);
  const FeatureMap fr = enc.encode_reference(random_image(1024, 1024, img_rng));
  CHECK(fr.height() == 64);
  CHECK(fr.width() == 64);
  CHECK(fr.channels() == 512);
  const Tensor v_r = flatten_reference(fr);
  CHECK(v_r.dim(0) == 4096);
  CHECK(v_r.dim(1) == 512);
}

TEST_CASE("flatten_reference row-major contract and exact inverse") {
  FeatureMap fm;
  fm.frame = Frame::reference;
  fm.values = Tensor({3, 2, 2});
  for (int64_t i = 0; i < fm.values.size(); ++i) fm.values[i] = static_cast<double>(i);
  const Tensor rows = flatten_reference(fm);
  REQUIRE(rows.dim(0) == 4);
  REQUIRE(rows.dim(1) == 3);
  // row order (0,0), (0,1), (1,0), (1,1)
  for (int ch = 0; ch < 3; ++ch) {
    CHECK(rows.at2(0, ch) == fm.values.at(ch, 0, 0));
    CHECK(rows.at2(1, ch) == fm.values.at(ch, 0, 1));
    CHECK(rows.at2(2, ch) == fm.values.at(ch, 1, 0));
    CHECK(rows.at2(3, ch) == fm.values.at(ch, 1, 1));
  }
  const Tensor back = unflatten_reference(rows, 2, 2);
  for (int64_t i = 0; i < back.size(); ++i) CHECK(back[i] == fm.values[i]);

  FeatureMap wrong = fm;
  wrong.frame = Frame::query;
  CHECK_THROWS(flatten_reference(wrong));
}

TEST_CASE("encoder config invariants") {
  EncoderConfig cfg = EncoderConfig::tiny();
  CHECK(cfg.num_stages() == 4);
  cfg.stride = 12;
  CHECK_THROWS(cfg.validate());
  cfg = EncoderConfig::tiny();
  cfg.query_stage_channels = {4, 4};
  CHECK_THROWS(cfg.validate());
  cfg = EncoderConfig::tiny();
  cfg.query_channels = 99;
  CHECK_THROWS(cfg.validate());
  cfg = EncoderConfig::tiny();
  cfg.embed_dim = 0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("encoder gradients match finite differences through a scalar readout") {
  kernels::set_parallel(false);
  DualEncoder enc(EncoderConfig::tiny());
  Rng rng(8);
  enc.query_stack.init(rng);
  Rng img_rng(9);
  const Image img = random_image(32, 32, img_rng);

  // fixed random readout to make the output a scalar
  Tensor readout_w;
  {
    const FeatureMap fq = enc.encode_query(img);
    readout_w = Tensor(fq.values.shape());
    testutil::fill_random(readout_w, rng);
  }
  auto loss = [&]() {
    const FeatureMap fq = enc.encode_query(img);
    double s = 0;
    for (int64_t i = 0; i < fq.values.size(); ++i) s += fq.values[i] * readout_w[i];
    return s;
  };

  DualEncoder::QueryTrace tr;
  const FeatureMap fq = enc.encode_query(img, &tr);
  (void)fq;
  enc.query_stack.zero_grad();
  enc.backward_query(tr, readout_w);

  double worst = 0;
  int64_t params = 0;
  for (ConvLayer& layer : enc.query_stack.stages) {
    for (Tensor* t : {&layer.w, &layer.b}) {
      Tensor& g = t == &layer.w ? layer.gw : layer.gb;
      const Tensor numeric = testutil::numeric_grad(loss, *t, 1e-5);
      for (int64_t i = 0; i < t->size(); ++i) {
        const double rel = std::abs(g[i] - numeric[i]) /
                           std::max({std::abs(g[i]), std::abs(numeric[i]), 1e-2});
        worst = std::max(worst, rel);
      }
      params += t->size();
    }
  }
  CHECK(params < 5000);
  CHECK(worst <= 1e-4);
  kernels::set_parallel(true);
}
