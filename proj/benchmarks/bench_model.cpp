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

#include "stormnet/model.hpp"
#include "stormnet/rng.hpp"

namespace {

using namespace stormnet;

Tensor images(std::size_t batch, std::size_t side) {
  Rng rng(4);
  Tensor t({batch, side, side, 4});
  for (auto& v : t.data()) v = rng.uniform();
  return t;
}

void BM_CnnForward(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  Model m(default_spec(ModelKind::cnn, {48, 48, 4}, OutputKind::sigmoid_scalar));
  m.set_mode(Mode::inference);
  const Tensor x = images(batch, 48);
  for (auto _ : state) benchmark::DoNotOptimize(m.forward(x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CnnForward)->Arg(1)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_UnetForward(benchmark::State& state) {
  Model m(default_spec(ModelKind::unet, {48, 48, 4}, OutputKind::sigmoid_map));
  m.set_mode(Mode::inference);
  const Tensor x = images(8, 48);
  for (auto _ : state) benchmark::DoNotOptimize(m.forward(x));
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_UnetForward)->Unit(benchmark::kMillisecond);

}  // namespace
