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

#ifndef CMV_HASH_HPP
#define CMV_HASH_HPP

#include <string>
#include <string_view>

namespace cmv {

/// SHA-1 of "blob <len>\0<content>" as lowercase hex, same as `git hash-object`.
std::string git_blob_sha1(std::string_view content);

}  // namespace cmv

#endif  // CMV_HASH_HPP
