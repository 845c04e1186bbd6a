/* Copyright 2026 The cmv Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef CMV_CMV_H
#define CMV_CMV_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(CMV_BUILDING_LIBRARY)
#define CMV_API __declspec(dllexport)
#else
#define CMV_API __declspec(dllimport)
#endif
#else
#define CMV_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cmv_status {
  CMV_OK = 0,
  CMV_CHECK_FAILED = 1,
  CMV_ERR_CONFIG = 2,
  CMV_ERR_NUMERICAL = 3,
  CMV_ERR_IO = 4,
  CMV_ERR_INVALID_ARGUMENT = 5,
  CMV_ERR_INTERNAL = 6
} cmv_status;

typedef struct cmv_config cmv_config;
typedef struct cmv_result cmv_result;
typedef struct cmv_trajectory cmv_trajectory;

/* Message for the last failing call on this thread; never NULL. */
CMV_API const char* cmv_last_error(void);
CMV_API const char* cmv_version(void);
/* Process exit code for a status: 0, 1, 2 (config/IO) or 3 (numerical). */
CMV_API int cmv_exit_code(cmv_status status);

CMV_API cmv_status cmv_config_from_file(const char* path, cmv_config** out);
CMV_API cmv_status cmv_config_from_string(const char* json, cmv_config** out);
CMV_API void cmv_config_free(cmv_config* config);
CMV_API cmv_status cmv_config_set_seed(cmv_config* config, uint64_t seed);
CMV_API cmv_status cmv_config_set_checks(cmv_config* config, const char* comma_list);
CMV_API cmv_status cmv_config_set_output(cmv_config* config, const char* dir);
CMV_API cmv_status cmv_config_set_workers(cmv_config* config, int workers);
/* Writes the serialized config (NUL-terminated) if it fits; `needed` gets
 * the required buffer size including the terminator. */
CMV_API cmv_status cmv_config_serialize(const cmv_config* config, char* buffer,
                                        size_t size, size_t* needed);
CMV_API cmv_status cmv_config_hash(const cmv_config* config, char out[41]);
CMV_API const char* cmv_config_output(const cmv_config* config);

/* command: "simulate" | "verify" | "oracle" | "sweep". Returns CMV_OK or
 * CMV_CHECK_FAILED on completion; *result is set in both cases. */
CMV_API cmv_status cmv_run(const cmv_config* config, const char* command,
                           cmv_result** result);
CMV_API int cmv_result_pass(const cmv_result* result);
CMV_API size_t cmv_result_failure_count(const cmv_result* result);
CMV_API const char* cmv_result_failure(const cmv_result* result, size_t i);
CMV_API size_t cmv_result_file_count(const cmv_result* result);
CMV_API const char* cmv_result_file(const cmv_result* result, size_t i);
CMV_API void cmv_result_free(cmv_result* result);

/* Single canonical run for replica/nu index of the config. */
CMV_API cmv_status cmv_simulate(const cmv_config* config, uint64_t replica,
                                uint64_t nu_index, cmv_trajectory** out);
CMV_API size_t cmv_trajectory_snapshots(const cmv_trajectory* traj);
CMV_API size_t cmv_trajectory_particles(const cmv_trajectory* traj);
CMV_API int cmv_trajectory_dim(const cmv_trajectory* traj);
CMV_API double cmv_trajectory_time(const cmv_trajectory* traj, size_t snapshot);
CMV_API double cmv_trajectory_mass(const cmv_trajectory* traj, size_t snapshot);
/* Copies N*dim positions and N weights of one snapshot. */
CMV_API cmv_status cmv_trajectory_atoms(const cmv_trajectory* traj, size_t snapshot,
                                        double* positions, double* weights);
CMV_API void cmv_trajectory_free(cmv_trajectory* traj);

#ifdef __cplusplus
}
#endif

#endif /* CMV_CMV_H */
