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

#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "cmv/cmv.h"

namespace fs = std::filesystem;

namespace {

const char* kSmall = R"({"seed": 5, "family": "common_noise", "N": 200, "T": 0.2,
  "dt": 0.01, "M_Y": 30, "record_stride": 1, "basis": {"count": 10},
  "checks": ["ks", "martingale"], "bootstrap": 20})";

struct Config {
  cmv_config* p = nullptr;
  ~Config() { cmv_config_free(p); }
};

}  // namespace

TEST_CASE("version and exit codes") {
  CHECK(std::string(cmv_version()) == "0.1.0");
  CHECK(cmv_exit_code(CMV_OK) == 0);
  CHECK(cmv_exit_code(CMV_CHECK_FAILED) == 1);
  CHECK(cmv_exit_code(CMV_ERR_CONFIG) == 2);
  CHECK(cmv_exit_code(CMV_ERR_IO) == 2);
  CHECK(cmv_exit_code(CMV_ERR_NUMERICAL) == 3);
}

TEST_CASE("config errors come back as status and message") {
  Config c;
  CHECK(cmv_config_from_string("{\"seed\": 1, \"bogus\": 2}", &c.p) == CMV_ERR_CONFIG);
  CHECK(c.p == nullptr);
  CHECK(std::string(cmv_last_error()).find("bogus") != std::string::npos);
  CHECK(cmv_config_from_file("/nonexistent/x.json", &c.p) == CMV_ERR_IO);
  CHECK(cmv_config_from_string(nullptr, &c.p) == CMV_ERR_INVALID_ARGUMENT);
  CHECK(cmv_config_from_string("{}", nullptr) == CMV_ERR_INVALID_ARGUMENT);
}

TEST_CASE("config handle accessors") {
  Config c;
  REQUIRE(cmv_config_from_string(kSmall, &c.p) == CMV_OK);
  char hash[41];
  REQUIRE(cmv_config_hash(c.p, hash) == CMV_OK);
  CHECK(std::strlen(hash) == 40);
  const std::string before(hash);
  CHECK(cmv_config_set_workers(c.p, 3) == CMV_OK);
  CHECK(cmv_config_set_output(c.p, "elsewhere") == CMV_OK);
  CHECK(std::string(cmv_config_output(c.p)) == "elsewhere");
  cmv_config_hash(c.p, hash);
  CHECK(before == hash);
  CHECK(cmv_config_set_seed(c.p, 6) == CMV_OK);
  cmv_config_hash(c.p, hash);
  CHECK(before != hash);
  CHECK(cmv_config_set_checks(c.p, "ks,nope") == CMV_ERR_CONFIG);
  CHECK(cmv_config_set_checks(c.p, "ks,rinf") == CMV_OK);
  cmv_config_hash(c.p, hash);

  std::size_t needed = 0;
  CHECK(cmv_config_serialize(c.p, nullptr, 0, &needed) == CMV_ERR_INVALID_ARGUMENT);
  REQUIRE(needed > 1);
  std::vector<char> buf(needed);
  CHECK(cmv_config_serialize(c.p, buf.data(), buf.size(), &needed) == CMV_OK);
  CHECK(std::strlen(buf.data()) + 1 == needed);
  Config back;
  REQUIRE(cmv_config_from_string(buf.data(), &back.p) == CMV_OK);
  char hash2[41];
  cmv_config_hash(back.p, hash2);
  CHECK(std::string(hash) == hash2);
}

TEST_CASE("simulate through handles") {
  Config c;
  REQUIRE(cmv_config_from_string(kSmall, &c.p) == CMV_OK);
  cmv_trajectory* t = nullptr;
  REQUIRE(cmv_simulate(c.p, 0, 0, &t) == CMV_OK);
  CHECK(cmv_trajectory_particles(t) == 200);
  CHECK(cmv_trajectory_dim(t) == 1);
  CHECK(cmv_trajectory_snapshots(t) == 21);
  CHECK(cmv_trajectory_time(t, 20) == doctest::Approx(0.2));
  CHECK(cmv_trajectory_mass(t, 20) == 1.0);
  std::vector<double> pos(200), w(200);
  CHECK(cmv_trajectory_atoms(t, 20, pos.data(), w.data()) == CMV_OK);
  CHECK(w[0] == 1.0 / 200);
  CHECK(cmv_trajectory_atoms(t, 21, pos.data(), w.data()) == CMV_ERR_INVALID_ARGUMENT);
  cmv_trajectory_free(t);
}

TEST_CASE("run verify into a directory") {
  const fs::path dir = fs::temp_directory_path() / "cmv_capi_verify";
  fs::remove_all(dir);
  Config c;
  REQUIRE(cmv_config_from_string(kSmall, &c.p) == CMV_OK);
  cmv_config_set_output(c.p, dir.c_str());
  cmv_result* r = nullptr;
  REQUIRE(cmv_run(c.p, "verify", &r) == CMV_OK);
  CHECK(cmv_result_pass(r) == 1);
  CHECK(cmv_result_failure_count(r) == 0);
  CHECK(cmv_result_file_count(r) > 0);
  CHECK(fs::exists(dir / "summary.json"));
  cmv_result_free(r);
  CHECK(cmv_run(c.p, "dance", &r) == CMV_ERR_INVALID_ARGUMENT);
  fs::remove_all(dir);
}
