/*
 * Copyright 2026 The Stormnet Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "stormnet/errors.hpp"
#include "stormnet/model.hpp"

namespace stormnet {
namespace {

ModelSpec small_cnn(bool batchnorm, double dropout) {
  ModelSpec s = default_spec(ModelKind::cnn, {8, 8, 2}, OutputKind::sigmoid_scalar);
  s.conv_blocks = {{3, 1}, {4, 2}};
  s.hidden_layers = {5};
  s.activation = ActivationKind::softplus;
  s.pool = PoolMode::average;
  s.use_batchnorm = batchnorm;
  s.dropout_rate = dropout;
  s.seed = 3;
  return s;
}

ModelSpec small_unet(OutputKind out) {
  ModelSpec s = default_spec(ModelKind::unet, {12, 12, 2}, out);
  s.depth = 2;
  s.base_filters = 2;
  s.activation = ActivationKind::softplus;
  s.pool = PoolMode::average;
  s.seed = 5;
  return s;
}

TEST(ModelSpec, ParameterCountMatchesInstantiatedModel) {
  std::vector<ModelSpec> specs = {
      default_spec(ModelKind::perceptron, {36}, OutputKind::sigmoid_scalar),
      default_spec(ModelKind::mlp, {36}, OutputKind::linear_scalar),
      default_spec(ModelKind::mlp, {48, 48, 4}, OutputKind::sigmoid_scalar),
      default_spec(ModelKind::cnn, {48, 48, 4}, OutputKind::sigmoid_scalar),
      default_spec(ModelKind::unet, {48, 48, 4}, OutputKind::sigmoid_map),
      small_cnn(true, 0.2),
      small_unet(OutputKind::linear_map),
  };
  auto bn = default_spec(ModelKind::unet, {48, 48, 4}, OutputKind::linear_map);
  bn.use_batchnorm = true;
  specs.push_back(bn);
  for (const auto& s : specs) {
    Model m(s);
    EXPECT_EQ(parameter_count(s), m.num_parameters()) << to_json(s).dump();
  }
}

TEST(ModelSpec, PerceptronParameterCountByHand) {
  EXPECT_EQ(parameter_count(default_spec(ModelKind::perceptron, {36}, OutputKind::sigmoid_scalar)), 37u);
}

TEST(ModelSpec, ValidationErrors) {
  auto unet = default_spec(ModelKind::unet, {48, 48, 4}, OutputKind::sigmoid_map);
  unet.depth = 5;
  EXPECT_THROW(validate(unet), ConfigError);
  unet.depth = 3;
  unet.output = OutputKind::sigmoid_scalar;
  EXPECT_THROW(validate(unet), ConfigError);

  auto cnn = default_spec(ModelKind::cnn, {48, 48, 4}, OutputKind::sigmoid_scalar);
  cnn.kernel_size = 4;
  EXPECT_THROW(validate(cnn), ConfigError);
  cnn.kernel_size = 3;
  cnn.conv_blocks.assign(5, ConvBlock{});  // 48 is not divisible by 32
  EXPECT_THROW(validate(cnn), ConfigError);
  cnn.conv_blocks.clear();
  EXPECT_THROW(validate(cnn), ConfigError);

  auto mlp = default_spec(ModelKind::mlp, {36}, OutputKind::sigmoid_scalar);
  mlp.dropout_rate = 1.0;
  EXPECT_THROW(validate(mlp), ConfigError);
  mlp.dropout_rate = 0.0;
  mlp.ignored_channels = {40};
  EXPECT_THROW(validate(mlp), ConfigError);
  EXPECT_THROW(Model{unet}, ConfigError);
}

TEST(Model, OutputShapes) {
  Rng rng(1);
  const Tensor x = oracle::random_tensor(rng, {3, 48, 48, 4}, 0, 1);
  Model cnn(default_spec(ModelKind::cnn, {48, 48, 4}, OutputKind::sigmoid_scalar));
  EXPECT_EQ(cnn.forward(x).shape(), (Shape{3, 1}));
  Model unet(default_spec(ModelKind::unet, {48, 48, 4}, OutputKind::linear_map));
  const Tensor y = unet.forward(x);
  EXPECT_EQ(y.shape(), (Shape{3, 48, 48, 1}));
  for (double v : y.data()) EXPECT_GE(v, 0.0);
  EXPECT_THROW(cnn.forward(Tensor({1, 48, 48, 3})), ShapeError);
}

TEST(Model, NodeNamesAreStable) {
  Model m(default_spec(ModelKind::perceptron, {36}, OutputKind::sigmoid_scalar));
  auto refs = m.param_refs();
  ASSERT_FALSE(refs.empty());
  EXPECT_NE(refs[0].name.find(".dense."), std::string::npos);
}

TEST(Model, SameSeedSameWeights) {
  const auto s = small_cnn(false, 0.0);
  Model a(s), b(s);
  EXPECT_EQ(serialize(a), serialize(b));
  auto s2 = s;
  s2.seed = 4;
  Model c(s2);
  EXPECT_NE(serialize(a), serialize(c));
}

TEST(Model, SerializeRoundTripIsBitwise) {
  Rng rng(2);
  auto spec = small_cnn(true, 0.1);
  Model m(spec);
  // Move the batch-norm running statistics away from their initial values.
  m.set_mode(Mode::train);
  for (int i = 0; i < 3; ++i) m.forward(oracle::random_tensor(rng, {4, 8, 8, 2}));
  m.set_mode(Mode::inference);
  const auto bytes = serialize(m);
  Model back = deserialize(bytes);
  EXPECT_EQ(back.spec(), m.spec());
  EXPECT_EQ(serialize(back), bytes);
  const Tensor x = oracle::random_tensor(rng, {5, 8, 8, 2});
  EXPECT_EQ(back.predict(x), m.predict(x));

  const auto dir = oracle::temp_dir("model");
  save_model(m, dir / "m.stormnet");
  Model loaded = load_model(dir / "m.stormnet");
  EXPECT_EQ(loaded.predict(x), m.predict(x));
}

TEST(Model, CorruptBundleIsRejected) {
  Model m(small_cnn(false, 0.0));
  auto bytes = serialize(m);
  bytes[bytes.size() - 3] ^= 0x40;
  EXPECT_THROW(deserialize(bytes), ChecksumError);
  bytes.resize(bytes.size() / 2);
  EXPECT_THROW(deserialize(bytes), FormatError);
}

TEST(Model, CopyIsIndependent) {
  Model a(small_cnn(false, 0.0));
  Model b = a;
  *b.param_refs()[0].value = Tensor(b.param_refs()[0].value->shape(), 0.5);
  EXPECT_NE(*a.param_refs()[0].value, *b.param_refs()[0].value);
}

TEST(Model, PredictRestoresMode) {
  Model m(small_cnn(false, 0.5));
  m.set_mode(Mode::train);
  Rng rng(9);
  const Tensor x = oracle::random_tensor(rng, {3, 8, 8, 2});
  const Tensor p1 = m.predict(x, 2), p2 = m.predict(x);
  EXPECT_EQ(p1, p2);  // dropout is off in inference
  EXPECT_EQ(m.mode(), Mode::train);
}

TEST(Model, SkipConnectionAblationChangesOutput) {
  Rng rng(4);
  Model m(small_unet(OutputKind::sigmoid_map));
  const Tensor x = oracle::random_tensor(rng, {2, 12, 12, 2});
  const Tensor with = m.predict(x);
  m.set_skip_connections(false);
  const Tensor without = m.predict(x);
  EXPECT_NE(with, without);
  m.set_skip_connections(true);
  EXPECT_EQ(m.predict(x), with);
}

TEST(Model, IgnoredChannelHasNoInfluence) {
  Rng rng(5);
  auto spec = small_cnn(false, 0.0);
  spec.ignored_channels = {1};
  Model m(spec);
  Tensor x = oracle::random_tensor(rng, {2, 8, 8, 2});
  const Tensor before = m.predict(x);
  for (std::size_t i = 1; i < x.size(); i += 2) x[i] = rng.uniform(-5, 5);
  EXPECT_EQ(m.predict(x), before);
}

TEST(ModelGradient, SmoothCnnInference) {
  Rng rng(6);
  Model m(small_cnn(false, 0.0));
  EXPECT_LT(oracle::model_gradient_error(m, oracle::random_tensor(rng, {2, 8, 8, 2}), rng), 1e-4);
}

TEST(ModelGradient, SmoothCnnTrainingWithBatchNormAndDropout) {
  Rng rng(7);
  Model m(small_cnn(true, 0.25));
  m.set_mode(Mode::train);
  // A bias feeding a batch norm has an exactly zero gradient, which central
  // differences only reproduce to about 1e-10; a larger floor absorbs that.
  EXPECT_LT(oracle::model_gradient_error(m, oracle::random_tensor(rng, {3, 8, 8, 2}), rng, 1e-5), 1e-4);
}

TEST(ModelGradient, InputGradient) {
  Rng rng(10);
  Model m(small_cnn(false, 0.0));
  // Input gradients are small here, so roundoff in f needs the larger floor.
  EXPECT_LT(oracle::model_gradient_error(m, oracle::random_tensor(rng, {2, 8, 8, 2}), rng, 1e-6, true), 1e-4);
}

TEST(ModelGradient, SmoothUnet) {
  Rng rng(8);
  for (auto out : {OutputKind::sigmoid_map, OutputKind::linear_map}) {
    Model m(small_unet(out));
    EXPECT_LT(oracle::model_gradient_error(m, oracle::random_tensor(rng, {2, 12, 12, 2}), rng), 1e-4);
  }
}

TEST(ModelGradient, Mlp) {
  Rng rng(9);
  auto s = default_spec(ModelKind::mlp, {6}, OutputKind::linear_scalar);
  s.hidden_layers = {5, 4};
  s.activation = ActivationKind::sigmoid;
  Model m(s);
  EXPECT_LT(oracle::model_gradient_error(m, oracle::random_tensor(rng, {4, 6}), rng), 1e-4);
}

}  // namespace
}  // namespace stormnet
