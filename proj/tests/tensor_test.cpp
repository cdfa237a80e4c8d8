/* Copyright 2026 The LEAT Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <gtest/gtest.h>

#include "leat/tensor.hpp"

using namespace leat;

TEST(TensorTest, ShapeMustMatchData) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  EXPECT_THROW(Tensor(Shape{0}), DimensionError);
  EXPECT_THROW(Tensor(Shape{}), DimensionError);
  const Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.rank(), 2u);
}

TEST(TensorTest, SignOfZeroIsZero) {
  EXPECT_EQ(sign(Tensor::vector({-2, 0, 3})), Tensor::vector({-1, 0, 1}));
}

TEST(TensorTest, L2Norm) { EXPECT_DOUBLE_EQ(l2_norm(Tensor::vector({3, 4})), 5.0); }

TEST(TensorTest, ClipRange) {
  EXPECT_EQ(clip_range(Tensor::vector({0.58}), Tensor::vector({0.45}), Tensor::vector({0.55})),
            Tensor::vector({0.55}));
  EXPECT_EQ(clip_range(Tensor::vector({0.5, -1.0}), Tensor::vector({0.0, 0.0}),
                       Tensor::vector({1.0, 1.0})),
            Tensor::vector({0.5, 0.0}));
  EXPECT_THROW(clip_range(Tensor::vector({0.5}), Tensor::vector({0.0, 0.0}),
                          Tensor::vector({1.0, 1.0})),
               DimensionError);
  EXPECT_THROW(clip_range(Tensor::vector({0.5}), Tensor::vector({0.6}), Tensor::vector({0.4})),
               DimensionError);
}

TEST(TensorTest, CosineOfZeroVectorIsZero) {
  EXPECT_EQ(cosine_similarity(Tensor::vector({0, 0}), Tensor::vector({1, 0})), 0.0);
  EXPECT_NEAR(cosine_similarity(Tensor::vector({1, 1}), Tensor::vector({2, 2})), 1.0, 1e-15);
}

TEST(RandomTest, StreamsAreReproducible) {
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.uniform(), b.uniform());
  EXPECT_NE(derive_seed(1, 2), derive_seed(1, 3));
  EXPECT_NE(derive_seed(1, 2), derive_seed(2, 2));
}

TEST(RandomTest, UniformStaysInRange) {
  Rng rng(17);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform(-0.05, 0.05);
    ASSERT_GE(u, -0.05);
    ASSERT_LT(u, 0.05);
  }
}
