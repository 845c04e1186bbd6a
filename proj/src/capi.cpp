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

#include "cmv/cmv.h"

#include <cstring>
#include <new>
#include <string>

#include "cmv/config.hpp"
#include "cmv/errors.hpp"
#include "cmv/runner.hpp"

struct cmv_config {
  cmv::RunConfig config;
  std::string hash_cache;
};

struct cmv_result {
  cmv::RunResult result;
};

struct cmv_trajectory {
  cmv::Trajectory traj;
};

namespace {

thread_local std::string g_last_error;

cmv_status fail(cmv_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

// Maps the in-flight exception to a status and records its message.
cmv_status translate() {
  try {
    throw;
  } catch (const cmv::IoError& e) {
    return fail(CMV_ERR_IO, e.what());
  } catch (const cmv::ConfigError& e) {
    return fail(CMV_ERR_CONFIG, e.what());
  } catch (const cmv::Error& e) {
    const int code = cmv::exit_code_for(std::current_exception());
    return fail(code == 2 ? CMV_ERR_CONFIG : CMV_ERR_NUMERICAL, e.what());
  } catch (const std::bad_alloc&) {
    return fail(CMV_ERR_NUMERICAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(CMV_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(CMV_ERR_INTERNAL, "unknown error");
  }
}

template <class F>
cmv_status guarded(F&& f) {
  try {
    g_last_error.clear();
    return f();
  } catch (...) {
    return translate();
  }
}

}  // namespace

extern "C" {

const char* cmv_last_error(void) { return g_last_error.c_str(); }

const char* cmv_version(void) { return "0.1.0"; }

int cmv_exit_code(cmv_status status) {
  switch (status) {
    case CMV_OK:
      return 0;
    case CMV_CHECK_FAILED:
      return 1;
    case CMV_ERR_CONFIG:
    case CMV_ERR_IO:
    case CMV_ERR_INVALID_ARGUMENT:
      return 2;
    default:
      return 3;
  }
}

cmv_status cmv_config_from_file(const char* path, cmv_config** out) {
  if (!path || !out) return fail(CMV_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out = new cmv_config{cmv::load_config(path), {}};
    return CMV_OK;
  });
}

cmv_status cmv_config_from_string(const char* json, cmv_config** out) {
  if (!json || !out) return fail(CMV_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out = new cmv_config{cmv::parse_config(json), {}};
    return CMV_OK;
  });
}

void cmv_config_free(cmv_config* config) { delete config; }

cmv_status cmv_config_set_seed(cmv_config* config, uint64_t seed) {
  if (!config) return fail(CMV_ERR_INVALID_ARGUMENT, "null config");
  config->config.seed = seed;
  return CMV_OK;
}

cmv_status cmv_config_set_checks(cmv_config* config, const char* comma_list) {
  if (!config || !comma_list) return fail(CMV_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    std::vector<std::string> checks;
    std::string item;
    for (const char* p = comma_list;; ++p) {
      if (*p == ',' || *p == '\0') {
        if (!item.empty()) checks.push_back(item);
        item.clear();
        if (*p == '\0') break;
      } else if (*p != ' ') {
        item.push_back(*p);
      }
    }
    cmv::RunConfig next = config->config;
    next.checks = checks;
    cmv::validate_config(next);
    config->config = std::move(next);
    return CMV_OK;
  });
}

cmv_status cmv_config_set_output(cmv_config* config, const char* dir) {
  if (!config || !dir) return fail(CMV_ERR_INVALID_ARGUMENT, "null argument");
  config->config.output = dir;
  return CMV_OK;
}

cmv_status cmv_config_set_workers(cmv_config* config, int workers) {
  if (!config) return fail(CMV_ERR_INVALID_ARGUMENT, "null config");
  if (workers < 0) return fail(CMV_ERR_INVALID_ARGUMENT, "workers must be >= 0");
  config->config.workers = workers;
  return CMV_OK;
}

cmv_status cmv_config_serialize(const cmv_config* config, char* buffer,
                                size_t size, size_t* needed) {
  if (!config) return fail(CMV_ERR_INVALID_ARGUMENT, "null config");
  return guarded([&] {
    const std::string s = cmv::serialize_config(config->config);
    if (needed) *needed = s.size() + 1;
    if (!buffer || size < s.size() + 1) {
      return fail(CMV_ERR_INVALID_ARGUMENT, "buffer too small");
    }
    std::memcpy(buffer, s.c_str(), s.size() + 1);
    return CMV_OK;
  });
}

cmv_status cmv_config_hash(const cmv_config* config, char out[41]) {
  if (!config || !out) return fail(CMV_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const std::string h = cmv::config_hash(config->config);
    std::memcpy(out, h.c_str(), 41);
    return CMV_OK;
  });
}

const char* cmv_config_output(const cmv_config* config) {
  return config ? config->config.output.c_str() : "";
}

cmv_status cmv_run(const cmv_config* config, const char* command,
                   cmv_result** result) {
  if (!config || !command || !result) return fail(CMV_ERR_INVALID_ARGUMENT, "null argument");
  const std::string name(command);
  if (name != "simulate" && name != "verify" && name != "oracle" && name != "sweep") {
    return fail(CMV_ERR_INVALID_ARGUMENT, "unknown command '" + name + "'");
  }
  return guarded([&] {
    cmv::set_workers(config->config.workers);
    auto* r = new cmv_result{cmv::run_command(command, config->config, config->config.output)};
    *result = r;
    return r->result.pass ? CMV_OK : CMV_CHECK_FAILED;
  });
}

int cmv_result_pass(const cmv_result* result) { return result && result->result.pass ? 1 : 0; }

size_t cmv_result_failure_count(const cmv_result* result) {
  return result ? result->result.failures.size() : 0;
}

const char* cmv_result_failure(const cmv_result* result, size_t i) {
  if (!result || i >= result->result.failures.size()) return nullptr;
  return result->result.failures[i].c_str();
}

size_t cmv_result_file_count(const cmv_result* result) {
  return result ? result->result.files.size() : 0;
}

const char* cmv_result_file(const cmv_result* result, size_t i) {
  if (!result || i >= result->result.files.size()) return nullptr;
  return result->result.files[i].c_str();
}

void cmv_result_free(cmv_result* result) { delete result; }

cmv_status cmv_simulate(const cmv_config* config, uint64_t replica,
                        uint64_t nu_index, cmv_trajectory** out) {
  if (!config || !out) return fail(CMV_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    cmv::set_workers(config->config.workers);
    const auto coeffs = cmv::build_coefficients(config->config);
    *out = new cmv_trajectory{cmv::simulate_canonical(
        cmv::simulation_config(config->config, coeffs, replica, nu_index))};
    return CMV_OK;
  });
}

size_t cmv_trajectory_snapshots(const cmv_trajectory* traj) {
  return traj ? traj->traj.nu.size() : 0;
}

size_t cmv_trajectory_particles(const cmv_trajectory* traj) {
  return traj ? traj->traj.final_state.size() : 0;
}

int cmv_trajectory_dim(const cmv_trajectory* traj) {
  return traj ? traj->traj.final_state.dim : 0;
}

double cmv_trajectory_time(const cmv_trajectory* traj, size_t snapshot) {
  if (!traj || snapshot >= traj->traj.nu.size()) return -1.0;
  return traj->traj.time(traj->traj.recorded_steps[snapshot]);
}

double cmv_trajectory_mass(const cmv_trajectory* traj, size_t snapshot) {
  if (!traj || snapshot >= traj->traj.nu.size()) return -1.0;
  return traj->traj.nu[snapshot].total_mass();
}

cmv_status cmv_trajectory_atoms(const cmv_trajectory* traj, size_t snapshot,
                                double* positions, double* weights) {
  if (!traj || !positions || !weights) return fail(CMV_ERR_INVALID_ARGUMENT, "null argument");
  if (snapshot >= traj->traj.nu.size()) return fail(CMV_ERR_INVALID_ARGUMENT, "snapshot out of range");
  const auto& nu = traj->traj.nu[snapshot];
  std::memcpy(positions, nu.positions().data(), nu.positions().size() * sizeof(double));
  std::memcpy(weights, nu.weights().data(), nu.weights().size() * sizeof(double));
  return CMV_OK;
}

void cmv_trajectory_free(cmv_trajectory* traj) { delete traj; }

}  // extern "C"
