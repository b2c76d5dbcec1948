// Copyright 2026 The weakfb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace weakfb {

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Child seed for substream `stream` of `seed`. Every random consumer in the
/// library derives its seed this way (scenario -> trial -> step), so a run's
/// draws do not depend on how trials are scheduled across threads.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Seedable, splittable generator over mt19937_64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

  std::uint64_t seed() const { return seed_; }
  Rng split(std::uint64_t stream) const { return Rng(derive_seed(seed_, stream)); }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  /// Index drawn with probability proportional to weights[i].
  std::size_t categorical(std::span<const double> weights);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace weakfb
