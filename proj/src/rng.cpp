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

#include "cmv/rng.hpp"

#include <initializer_list>

namespace cmv {

std::mt19937_64 make_engine(const StreamId& id, StreamTag tag,
                            std::uint64_t block) {
  const auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v); };
  const auto hi = [](std::uint64_t v) {
    return static_cast<std::uint32_t>(v >> 32);
  };
  const auto t = static_cast<std::uint64_t>(tag);
  std::seed_seq seq{lo(id.seed),     hi(id.seed),     lo(id.replica),
                    hi(id.replica),  lo(id.nu_index), hi(id.nu_index),
                    lo(id.epoch),    hi(id.epoch),    lo(t),
                    lo(block),       hi(block)};
  return std::mt19937_64(seq);
}

}  // namespace cmv
