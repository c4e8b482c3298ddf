// Copyright 2026 The dpnash Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPNASH_RANDOM_H_
#define DPNASH_RANDOM_H_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dpnash {

using RandomEngine = std::mt19937_64;

// Independent stream families derived from one master seed.
enum class StreamChannel : uint64_t {
  kInitialization = 1,
  kPrivacyNoise = 2,
  kOracleNoise = 3,
  kInstance = 4,
  kGraph = 5,
  kProbe = 6,
};

// SplitMix64 finalizer.
constexpr uint64_t Mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Folds the parts left to right: h <- Mix64(h ^ Mix64(part)), h0 = 0.
// Stream seeds are MixSeed({master_seed, run_seed, channel, player}).
constexpr uint64_t MixSeed(std::initializer_list<uint64_t> parts) {
  uint64_t h = 0;
  for (uint64_t part : parts) h = Mix64(h ^ Mix64(part));
  return h;
}

inline RandomEngine MakeStream(std::initializer_list<uint64_t> parts) {
  return RandomEngine(MixSeed(parts));
}

inline uint64_t ChannelId(StreamChannel channel) {
  return static_cast<uint64_t>(channel);
}

// Uniform on [0, 1) with 53 random bits.
inline double UniformUnit(RandomEngine& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

// Uniform on the open interval (-1/2, 1/2).
inline double UniformCentered(RandomEngine& engine) {
  return (static_cast<double>(engine() >> 11) + 0.5) * 0x1.0p-53 - 0.5;
}

}  // namespace dpnash

#endif  // DPNASH_RANDOM_H_
