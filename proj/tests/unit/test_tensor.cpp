#include <random>

#include "artdet/layers.hpp"
#include "artdet/loss.hpp"
#include "artdet/network.hpp"
#include "artdet/trainer.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "gradcheck.hpp"

using namespace artdet;

namespace {

TensorD forward(const LayerSpec& spec, const TensorD& in, const LayerParams<double>& p = {},
                bool training = false, LayerCache<double>* cache = nullptr) {
  std::mt19937_64 rng(1);
  return layer_forward<double>(spec, p, in, training, cache, &rng);
}

template <typename T>
std::vector<T> values(const BasicTensor<T>& t) {
  return t.vec();
}

}  // namespace

TEST_CASE("tensor rejects mismatched data and bad reshapes") {
  CHECK_THROWS_AS(Tensor({1, 1, 2, 2}, std::vector<float>(3)), ConfigError);
  Tensor t({1, 2, 2, 2});
  CHECK_THROWS_AS(t.reshape({1, 1, 1, 7}), ConfigError);
  t.reshape({1, 8, 1, 1});
  CHECK(t.shape() == Shape{1, 8, 1, 1});
}

TEST_CASE("relu clamps negatives") {
  const TensorD in({1, 1, 1, 3}, std::vector<double>{-1, 0, 2});
  CHECK(values(forward(LayerSpec::relu("r"), in)) == std::vector<double>{0, 0, 2});
}

TEST_CASE("relu backward passes gradient only on the positive side") {
  const LayerSpec relu = LayerSpec::relu("r");
  LayerCache<double> cache;
  forward(relu, TensorD({1, 1, 1, 2}, std::vector<double>{-1, 2}), {}, true, &cache);
  const TensorD up({1, 1, 1, 2}, std::vector<double>{1, 3});
  const TensorD g = layer_backward<double>(relu, {}, cache, up, nullptr);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 3.0);
}

TEST_CASE("identity 1x1 convolution") {
  const LayerSpec conv = LayerSpec::conv("c", 1, 1);
  std::mt19937_64 rng(4);
  const TensorD in = gradcheck::random_tensor({2, 1, 5, 3}, rng);
  LayerParams<double> p{TensorD({1, 1, 1, 1}, 1.0), TensorD({1, 1, 1, 1}, 0.0)};
  CHECK(values(forward(conv, in, p)) == values(in));
}

TEST_CASE("maxpool 2x2 stride 2 on the ramp") {
  const TensorD out = forward(LayerSpec::maxpool("p", 2, 2), fixture::ramp4x4<double>());
  CHECK(out.shape() == Shape{1, 1, 2, 2});
  CHECK(values(out) == std::vector<double>{6, 8, 14, 16});
}

TEST_CASE("conv output extents follow the usual arithmetic") {
  const LayerSpec conv = LayerSpec::conv("c", 4, 3, 2, 1);
  CHECK(conv.output_shape({2, 3, 9, 7}) == Shape{2, 4, 5, 4});
  CHECK(LayerSpec::maxpool("p", 2, 2).output_shape({1, 3, 9, 9}) == Shape{1, 3, 4, 4});
}

TEST_CASE("bad hyperparameters and shapes name the layer") {
  CHECK_THROWS_AS(LayerSpec::conv("c", 1, 0).validate(), ConfigError);
  CHECK_THROWS_AS(LayerSpec::maxpool("p", 2, 0).validate(), ConfigError);
  CHECK_THROWS_AS(LayerSpec::dropout("d", 0.0).validate(), ConfigError);
  CHECK_THROWS_AS(LayerSpec::dropout("d", 1.5).validate(), ConfigError);
  CHECK_THROWS_AS(LayerSpec::conv("c", 1, 3, 1, -1).validate(), ConfigError);
  try {
    (void)LayerSpec::conv("conv_big", 1, 7).output_shape({1, 1, 3, 3});
    FAIL("expected a shape error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("conv_big") != std::string::npos);
  }
  LayerParams<double> wrong{TensorD({1, 2, 1, 1}), TensorD({1, 1, 1, 1})};
  CHECK_THROWS_AS(forward(LayerSpec::conv("c", 1, 1), TensorD({1, 1, 2, 2}), wrong), ConfigError);
}

TEST_CASE("backward before forward is a usage error") {
  LayerCache<double> cache;
  CHECK_THROWS_AS(layer_backward<double>(LayerSpec::relu("r"), {}, cache, TensorD({1, 1, 1, 1}),
                                         nullptr),
                  UsageError);
}

TEST_CASE("dropout with keep probability 1 is the identity in both modes") {
  std::mt19937_64 rng(2);
  const TensorD in = gradcheck::random_tensor({2, 3, 2, 2}, rng);
  const LayerSpec d = LayerSpec::dropout("d", 1.0);
  CHECK(values(forward(d, in, {}, true)) == values(in));
  CHECK(values(forward(d, in, {}, false)) == values(in));
}

TEST_CASE("dropout is inert at inference and scales kept units when training") {
  const LayerSpec d = LayerSpec::dropout("d", 0.5);
  const TensorD in({1, 1, 1, 200}, 1.0);
  CHECK(values(forward(d, in, {}, false)) == values(in));
  const TensorD out = forward(d, in, {}, true);
  for (const double v : out.vec()) {
    CHECK((v == 0.0 || v == 2.0));
  }
}

TEST_CASE("gradient checks on a few random instances of every kind") {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 5; ++i) {
    CHECK(gradcheck::random_conv(rng) < 1e-4);
    CHECK(gradcheck::random_relu(rng) < 1e-4);
    CHECK(gradcheck::random_maxpool(rng) < 1e-4);
    CHECK(gradcheck::random_fc(rng) < 1e-4);
    CHECK(gradcheck::random_dropout(rng) < 1e-4);
    CHECK(gradcheck::random_loss(rng) < 1e-4);
  }
}

TEST_CASE("conv backward on a 1x1x5x5 input with a 3x3 kernel") {
  std::mt19937_64 rng(8);
  const LayerSpec conv = LayerSpec::conv("c", 1, 3);
  const Shape in{1, 1, 5, 5};
  LayerParams<double> p{gradcheck::random_tensor(conv.weight_shape(in), rng),
                        gradcheck::random_tensor(conv.bias_shape(), rng)};
  CHECK(gradcheck::check_layer(conv, gradcheck::random_tensor(in, rng), p, rng) < 1e-4);
}

TEST_CASE("smooth L1") {
  CHECK(smooth_l1(0.0) == 0.0);
  CHECK(smooth_l1(0.5) == doctest::Approx(0.125));
  CHECK(smooth_l1(2.0) == doctest::Approx(1.5));
  CHECK(smooth_l1(-2.0) == doctest::Approx(1.5));
}

TEST_CASE("loss vanishes for confident correct logits and exact boxes") {
  const TensorD logits({2, 2, 1, 1}, std::vector<double>{-30, 30, 30, -30});
  const TensorD boxes({2, 4, 1, 1}, std::vector<double>{0.1, 0.2, 0.3, 0.4, 9, 9, 9, 9});
  const std::vector<RoiLabel> labels{RoiLabel::positive, RoiLabel::negative};
  const std::vector<BBoxDelta> targets{{0.1, 0.2, 0.3, 0.4}, {}};
  const auto l = detection_loss<double>(logits, boxes, labels, targets);
  CHECK(l.total < 1e-12);
  CHECK(l.regression == 0.0);
}

TEST_CASE("loss combines mean log loss with the positive-only box term") {
  const TensorD logits({2, 2, 1, 1}, 0.0);
  const TensorD boxes({2, 4, 1, 1}, std::vector<double>{0.5, 0, 0, 0, 5, 5, 5, 5});
  const std::vector<RoiLabel> labels{RoiLabel::positive, RoiLabel::negative};
  const std::vector<BBoxDelta> targets(2);
  const auto l = detection_loss<double>(logits, boxes, labels, targets, 2.0);
  CHECK(l.classification == doctest::Approx(std::log(2.0)));
  CHECK(l.regression == doctest::Approx(0.125));
  CHECK(l.total == doctest::Approx(std::log(2.0) + 0.25));
}

TEST_CASE("loss rejects labels outside positive and negative") {
  const TensorD logits({1, 2, 1, 1});
  const TensorD boxes({1, 4, 1, 1});
  const std::vector<RoiLabel> labels{static_cast<RoiLabel>(7)};
  const std::vector<BBoxDelta> targets(1);
  CHECK_THROWS_AS(detection_loss<double>(logits, boxes, labels, targets), DataError);
}

TEST_CASE("sgd update rule") {
  SUBCASE("plain step") {
    LayerParams<double> w{TensorD({1, 1, 1, 1}, 1.0), TensorD({1, 1, 1, 1}, 0.0)};
    LayerParams<double> g{TensorD({1, 1, 1, 1}, 1.0), TensorD({1, 1, 1, 1}, 0.0)};
    LayerParams<double> v{TensorD({1, 1, 1, 1}, 0.0), TensorD({1, 1, 1, 1}, 0.0)};
    sgd_update(w, g, v, 0.1, 0.0);
    CHECK(w.weight[0] == doctest::Approx(0.9));
  }
  SUBCASE("two momentum steps") {
    LayerParams<double> w{TensorD({1, 1, 1, 1}, 0.0), TensorD({1, 1, 1, 1}, 0.0)};
    LayerParams<double> g{TensorD({1, 1, 1, 1}, 1.0), TensorD({1, 1, 1, 1}, 0.0)};
    LayerParams<double> v{TensorD({1, 1, 1, 1}, 0.0), TensorD({1, 1, 1, 1}, 0.0)};
    sgd_update(w, g, v, 0.1, 0.9);
    sgd_update(w, g, v, 0.1, 0.9);
    CHECK(w.weight[0] == doctest::Approx(-0.29).epsilon(1e-12));
  }
  SUBCASE("shape mismatch") {
    LayerParams<double> w{TensorD({1, 1, 1, 2}), TensorD({1, 1, 1, 1})};
    LayerParams<double> g{TensorD({1, 1, 1, 1}), TensorD({1, 1, 1, 1})};
    LayerParams<double> v = w;
    CHECK_THROWS_AS(sgd_update(w, g, v, 0.1, 0.9), ConfigError);
  }
}

TEST_CASE("frozen layers are skipped by the optimizer") {
  Network<double> net(NetworkSpec::toy(), 3);
  net.freeze_conv_layers(1);
  const auto before = net.backbone_params()[0].weight.vec();
  for (auto& s : net.param_slots()) {
    s.grads->weight.fill(1.0);
    s.grads->bias.fill(1.0);
  }
  net.sgd_step(0.1, 0.9);
  CHECK(net.backbone_params()[0].weight.vec() == before);
  CHECK(net.backbone_params()[3].weight.vec() != Network<double>(NetworkSpec::toy(), 3)
                                                      .backbone_params()[3]
                                                      .weight.vec());
  CHECK_THROWS_AS(net.freeze_conv_layers(3), ConfigError);
}

TEST_CASE("network spec validation") {
  NetworkSpec s = NetworkSpec::toy();
  s.backbone.push_back(LayerSpec::fc("fc_in_backbone", 3));
  CHECK_THROWS_AS(s.validate(), ConfigError);
  NetworkSpec h = NetworkSpec::toy();
  h.head.push_back(LayerSpec::conv("conv_in_head", 3, 1));
  CHECK_THROWS_AS(h.validate(), ConfigError);
  CHECK(NetworkSpec::toy().num_conv_layers() == 2);
  CHECK(NetworkSpec::toy().feature_stride() == 4);
  CHECK_THROWS_AS(NetworkSpec::from_profile("huge"), ConfigError);
}

TEST_CASE("sgd config validation") {
  SgdConfig c;
  c.fixed_layers = 3;
  CHECK_THROWS_AS(c.validate(2), ConfigError);
  c.fixed_layers = 0;
  c.momentum = 1.0;
  CHECK_THROWS_AS(c.validate(2), ConfigError);
  c.momentum = 0.9;
  c.learning_rate = 0;
  CHECK_THROWS_AS(c.validate(2), ConfigError);
}

TEST_CASE("training is deterministic, freezes as asked and lowers the loss") {
  const auto data = fixture::tiny_training_set(6);
  TrainerConfig cfg;
  cfg.sgd.iterations = 60;
  cfg.sgd.seed = 4;

  Network<float> a(NetworkSpec::toy(), 9);
  Network<float> b(NetworkSpec::toy(), 9);
  train_network(a, data, cfg);
  train_network(b, data, cfg);
  for (std::size_t i = 0; i < a.param_slots().size(); ++i) {
    CHECK(a.param_slots()[i].params->weight.vec() == b.param_slots()[i].params->weight.vec());
  }

  Network<float> frozen(NetworkSpec::toy(), 9);
  const Network<float> init(NetworkSpec::toy(), 9);
  cfg.sgd.fixed_layers = 2;
  train_network(frozen, data, cfg);
  CHECK(frozen.backbone_params()[0].weight.vec() == init.backbone_params()[0].weight.vec());
  CHECK(frozen.backbone_params()[3].bias.vec() == init.backbone_params()[3].bias.vec());
  CHECK(frozen.head_params()[0].weight.vec() != init.head_params()[0].weight.vec());
}

TEST_CASE("zero iterations leave the initialization untouched") {
  const auto data = fixture::tiny_training_set(2);
  TrainerConfig cfg;
  cfg.sgd.iterations = 0;
  Network<float> net(NetworkSpec::toy(), 5);
  const auto r = train_network(net, data, cfg);
  CHECK(r.log.empty());
  const Network<float> init(NetworkSpec::toy(), 5);
  for (std::size_t i = 0; i < net.param_slots().size(); ++i) {
    CHECK(net.param_slots()[i].params->weight.vec() == init.param_slots()[i].params->weight.vec());
  }
}

TEST_CASE("a diverging run is reported as a numeric failure") {
  const auto data = fixture::tiny_training_set(2);
  TrainerConfig cfg;
  cfg.sgd.iterations = 200;
  cfg.sgd.learning_rate = 1e6;
  Network<float> net(NetworkSpec::toy(), 5);
  CHECK_THROWS_AS(train_network(net, data, cfg), NumericError);
}

TEST_CASE("images without eligible ROIs abort training with a diagnosis") {
  auto data = fixture::tiny_training_set(1);
  data[0].gts.clear();
  data[0].proposals.clear();
  TrainerConfig cfg;
  cfg.sgd.iterations = 10;
  Network<float> net(NetworkSpec::toy(), 5);
  CHECK_THROWS_AS(train_network(net, data, cfg), DataError);
}

TEST_CASE("learning rate is constant unless a step is set") {
  SgdConfig c;
  c.learning_rate = 0.01;
  CHECK(c.rate_at(0) == 0.01);
  CHECK(c.rate_at(100000) == 0.01);
  c.lr_step = 100;
  c.lr_gamma = 0.5;
  CHECK(c.rate_at(99) == 0.01);
  CHECK(c.rate_at(100) == doctest::Approx(0.005));
  CHECK(c.rate_at(250) == doctest::Approx(0.0025));
  c.lr_step = -1;
  CHECK_THROWS_AS(c.validate(2), ConfigError);
}
