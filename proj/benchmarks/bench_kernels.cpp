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

#include <benchmark/benchmark.h>

#include "stormnet/layers.hpp"
#include "stormnet/rng.hpp"
#include "stormnet/tensor.hpp"

namespace {

using namespace stormnet;

Tensor random(Rng& rng, Shape shape) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.normal();
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = random(rng, {n, n}), b = random(rng, {n, n});
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(32, 256);

void BM_Conv2DForward(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  Conv2D conv(4, 16, k, ActivationKind::relu);
  conv.initialize(rng);
  const Tensor x = random(rng, {32, 48, 48, 4});
  for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x, Mode::inference));
}
BENCHMARK(BM_Conv2DForward)->Arg(1)->Arg(3)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_Conv2DBackward(benchmark::State& state) {
  Rng rng(3);
  Conv2D conv(4, 16, 3, ActivationKind::relu);
  conv.initialize(rng);
  const Tensor x = random(rng, {32, 48, 48, 4});
  const Tensor g = random(rng, conv.forward(x, Mode::train).shape());
  for (auto _ : state) {
    // Backward consumes the forward cache.
    state.PauseTiming();
    conv.forward(x, Mode::train);
    state.ResumeTiming();
    benchmark::DoNotOptimize(conv.backward(g));
  }
}
BENCHMARK(BM_Conv2DBackward)->Unit(benchmark::kMillisecond);

}  // namespace
