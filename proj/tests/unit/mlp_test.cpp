/*
 * Copyright 2026 The APDO Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "apdo/mlp.hpp"
#include "gradient_check.hpp"

namespace apdo {
namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = 2.0 * uniform01(rng) - 1.0;
  return m;
}

TEST(Mlp, ZeroParametersGiveZeroOutput) {
  Mlp net({3, 5, 2});
  Rng rng(1);
  EXPECT_TRUE(net.predict(random_matrix(3, 4, rng)).isZero(0.0));
}

TEST(Mlp, IdentityLayer) {
  Mlp net({3, 3});
  Eigen::VectorXd p = Eigen::VectorXd::Zero(12);
  p(0) = p(4) = p(8) = 1.0;  // column-major identity weight, zero bias
  net.set_parameters(p);
  Rng rng(2);
  const Eigen::MatrixXd x = random_matrix(3, 5, rng);
  EXPECT_EQ(net.predict(x), x);
}

TEST(Mlp, ParameterLayout) {
  Mlp net({2, 3, 1});
  EXPECT_EQ(net.num_parameters(), 2u * 3u + 3u + 3u * 1u + 1u);
  Eigen::VectorXd p = Eigen::VectorXd::LinSpaced(13, 0.0, 12.0);
  net.set_parameters(p);
  EXPECT_EQ(net.weight(0)(1, 0), 1.0);
  EXPECT_EQ(net.weight(0)(0, 1), 3.0);
  EXPECT_EQ(net.bias(0)(2), 8.0);
  EXPECT_EQ(net.describe_parameter(4), "layer 0 weight (1, 1)");
  EXPECT_EQ(net.describe_parameter(9), "layer 1 weight (0, 0)");
  EXPECT_EQ(net.describe_parameter(12), "layer 1 bias (0)");
}

TEST(Mlp, InitializationIsReproducible) {
  Mlp a({4, 8, 3});
  Mlp b({4, 8, 3});
  Rng ra(99);
  Rng rb(99);
  a.initialize(ra);
  b.initialize(rb);
  EXPECT_EQ(a.parameters(), b.parameters());
  Rng rx(5);
  const Eigen::MatrixXd x = random_matrix(4, 6, rx);
  EXPECT_EQ(a.predict(x), b.predict(x));
  for (std::size_t l = 0; l < a.num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(a.layer_sizes()[l]));
    EXPECT_LE(a.weight(l).cwiseAbs().maxCoeff(), bound);
  }
}

TEST(Mlp, ForwardMatchesPredict) {
  Mlp net({4, 8, 3});
  Rng rng(3);
  net.initialize(rng);
  const Eigen::MatrixXd x = random_matrix(4, 7, rng);
  EXPECT_TRUE(net.forward(x).isApprox(net.predict(x), 1e-15));
  EXPECT_TRUE(net.predict_one(x.col(2)).isApprox(net.predict(x).col(2), 1e-15));
}

TEST(Mlp, TanhMatchesLibm) {
  Mlp net({1, 1, 1});
  Eigen::VectorXd p(4);
  p << 1.0, 0.0, 1.0, 0.0;
  net.set_parameters(p);
  for (double v : {-30.0, -3.0, -0.5, -1e-8, 0.0, 1e-8, 0.7, 2.5, 30.0, 800.0}) {
    Eigen::MatrixXd x(1, 1);
    x << v;
    EXPECT_NEAR(net.predict(x)(0, 0), std::tanh(v), 1e-15) << v;
  }
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  Rng rng(7);
  Mlp net({4, 8, 3});
  net.initialize(rng);
  const Eigen::MatrixXd x = random_matrix(4, 5, rng);
  const Eigen::MatrixXd w = random_matrix(3, 5, rng);
  const testing::GradientCheck check = testing::check_mlp_gradient(net, x, w);
  EXPECT_LE(check.max_relative_error, 1e-4);
  EXPECT_LE(check.max_input_relative_error, 1e-4);
}

TEST(Mlp, ZeroUpstreamGivesZeroGradient) {
  Rng rng(8);
  Mlp net({3, 6, 2});
  net.initialize(rng);
  net.forward(random_matrix(3, 4, rng));
  Eigen::VectorXd grad;
  const Eigen::MatrixXd dx = net.backward(Eigen::MatrixXd::Zero(2, 4), grad);
  EXPECT_TRUE(grad.isZero(0.0));
  EXPECT_TRUE(dx.isZero(0.0));
}

TEST(Mlp, LinearGradientIsInput) {
  Mlp net({3, 1}, Activation::kIdentity);
  Rng rng(9);
  net.initialize(rng);
  Eigen::MatrixXd x(3, 1);
  x << 0.5, -2.0, 3.0;
  net.forward(x);
  Eigen::VectorXd grad;
  net.backward(Eigen::MatrixXd::Ones(1, 1), grad);
  EXPECT_EQ(grad.head(3), Eigen::VectorXd(x.col(0)));
  EXPECT_EQ(grad(3), 1.0);
}

TEST(Mlp, BackwardAccumulates) {
  Rng rng(10);
  Mlp net({2, 4, 1});
  net.initialize(rng);
  const Eigen::MatrixXd x = random_matrix(2, 3, rng);
  net.forward(x);
  Eigen::VectorXd once;
  net.backward(Eigen::MatrixXd::Ones(1, 3), once);
  Eigen::VectorXd twice = once;
  net.backward(Eigen::MatrixXd::Ones(1, 3), twice);
  EXPECT_TRUE(twice.isApprox(2.0 * once, 1e-15));
}

TEST(Mlp, StaleCacheIsRejected) {
  Rng rng(11);
  Mlp net({2, 4, 1});
  net.initialize(rng);
  Eigen::VectorXd grad;
  EXPECT_THROW(net.backward(Eigen::MatrixXd::Ones(1, 1), grad), std::logic_error);
  net.forward(random_matrix(2, 1, rng));
  net.mutable_parameters()(0) += 1.0;
  EXPECT_THROW(net.backward(Eigen::MatrixXd::Ones(1, 1), grad), std::logic_error);
}

TEST(Mlp, ShapeErrors) {
  EXPECT_THROW(Mlp({3}), std::invalid_argument);
  EXPECT_THROW(Mlp({3, 0, 1}), std::invalid_argument);
  Mlp net({3, 2});
  EXPECT_THROW(net.predict(Eigen::MatrixXd::Zero(2, 1)), std::invalid_argument);
  EXPECT_THROW(net.set_parameters(Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST(Mlp, JsonRoundTrip) {
  Rng rng(12);
  Mlp net({3, 5, 2});
  net.initialize(rng);
  const Mlp back = Mlp::from_json(net.to_json());
  EXPECT_EQ(back.layer_sizes(), net.layer_sizes());
  EXPECT_EQ(back.parameters(), net.parameters());
  EXPECT_THROW(Mlp::from_json("{"), std::invalid_argument);
}

TEST(Adam, ZeroGradientLeavesParametersAndDecaysMoments) {
  Eigen::VectorXd p(2);
  p << 1.0, -1.0;
  AdamState s(2);
  s.m << 0.5, 0.5;
  s.v << 0.25, 0.25;
  const Eigen::VectorXd before = p;
  adam_step(p, Eigen::VectorXd::Zero(2), s);
  EXPECT_NEAR(s.m(0), 0.45, 1e-15);
  EXPECT_NEAR(s.v(0), 0.25 * 0.999, 1e-15);
  // Stale moments still move the parameters; a fresh state does not.
  AdamState fresh(2);
  Eigen::VectorXd q = before;
  adam_step(q, Eigen::VectorXd::Zero(2), fresh);
  EXPECT_EQ(q, before);
}

TEST(Adam, ConstantGradientStepApproachesLearningRate) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd g(3);
  g << 2.0, -0.01, 50.0;
  AdamState s(3, 1e-3);
  Eigen::VectorXd prev = p;
  for (int i = 0; i < 2000; ++i) {
    prev = p;
    adam_step(p, g, s);
  }
  const Eigen::VectorXd delta = p - prev;
  EXPECT_NEAR(delta(0), -1e-3, 1e-8);
  EXPECT_NEAR(delta(1), 1e-3, 1e-8);
  EXPECT_NEAR(delta(2), -1e-3, 1e-8);
}

TEST(Adam, NonFiniteGradientNamesTheParameter) {
  Mlp net({2, 3, 1});
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.num_parameters()));
  g(7) = std::numeric_limits<double>::quiet_NaN();
  AdamState s(net.num_parameters());
  const Eigen::VectorXd before = net.parameters();
  try {
    adam_step(net, g, s);
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 0 bias (1)"), std::string::npos) << e.what();
  }
  EXPECT_EQ(net.parameters(), before);
}

TEST(SoftUpdate, Examples) {
  Mlp source({1, 1});
  Mlp target({1, 1});
  source.set_parameters(Eigen::VectorXd::Ones(2));
  soft_update(target, source, 0.001);
  EXPECT_NEAR(target.parameters()(0), 0.001, 1e-15);

  soft_update(target, source, 1.0);
  EXPECT_EQ(target.parameters(), source.parameters());

  Mlp same = source;
  soft_update(same, source, 0.3);
  EXPECT_EQ(same.parameters(), source.parameters());

  EXPECT_THROW(soft_update(target, source, 1.5), std::invalid_argument);
  Mlp other({2, 1});
  EXPECT_THROW(soft_update(other, source, 0.1), std::invalid_argument);
}

}  // namespace
}  // namespace apdo
