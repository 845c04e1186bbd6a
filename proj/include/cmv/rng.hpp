// Copyright 2026 The cmv Authors
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

#ifndef CMV_RNG_HPP
#define CMV_RNG_HPP

#include <cstdint>
#include <random>

namespace cmv {

enum class StreamTag : std::uint64_t {
  kObservation = 1,
  kSignal = 2,
  kInitial = 3,
  kBootstrap = 4,
  kMass = 5,
  kProbe = 6,
};

/// Identifies one reproducible family of substreams. Particles are grouped
/// into fixed blocks and each block owns its engine, so the numbers a
/// particle sees never depend on how blocks are scheduled.
struct StreamId {
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;
  std::uint64_t nu_index = 0;
  std::uint64_t epoch = 0;
};

inline constexpr std::size_t kParticleBlock = 256;

std::mt19937_64 make_engine(const StreamId& id, StreamTag tag,
                            std::uint64_t block = 0);

}  // namespace cmv

#endif  // CMV_RNG_HPP
