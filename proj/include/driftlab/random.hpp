// Copyright 2026 The driftlab Authors.
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

#ifndef DRIFTLAB_RANDOM_HPP
#define DRIFTLAB_RANDOM_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace driftlab {

// Deterministic random source. The engine is the standard Mersenne Twister;
// the transforms below are written out so that streams are identical across
// standard library implementations (std:: distributions are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  // Standard normal draw (Box-Muller, no cached second value).
  double normal();

 private:
  std::mt19937_64 engine_;
};

// Derives an independent seed for a named subsystem from a master seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

// Same, with an additional integer index (epoch, slice, ...).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream,
                          std::uint64_t index);

}  // namespace driftlab

#endif  // DRIFTLAB_RANDOM_HPP
