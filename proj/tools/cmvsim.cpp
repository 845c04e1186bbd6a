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

// cmvsim: command-line front end over the cmv C API.

#include <CLI11.hpp>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>

#include "cmv/cmv.h"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> workers;
  std::optional<std::string> checks;
};

int report_error(cmv_status s) {
  std::fprintf(stderr, "cmvsim: error: %s\n", cmv_last_error());
  return cmv_exit_code(s);
}

std::string quoted(const char* s) {
  std::string out = "\"";
  for (const char* p = s; *p; ++p) {
    if (*p == '"' || *p == '\\') out.push_back('\\');
    out.push_back(*p);
  }
  return out + "\"";
}

int run(const std::string& command, const Flags& f) {
  cmv_config* cfg = nullptr;
  cmv_status s = cmv_config_from_file(f.config.c_str(), &cfg);
  if (s != CMV_OK) return report_error(s);
  struct Free {
    cmv_config* c;
    ~Free() { cmv_config_free(c); }
  } guard{cfg};
  if (f.seed) cmv_config_set_seed(cfg, *f.seed);
  if (f.out) cmv_config_set_output(cfg, f.out->c_str());
  if (f.workers && (s = cmv_config_set_workers(cfg, *f.workers)) != CMV_OK) return report_error(s);
  if (f.checks && (s = cmv_config_set_checks(cfg, f.checks->c_str())) != CMV_OK) {
    return report_error(s);
  }
  cmv_result* result = nullptr;
  s = cmv_run(cfg, command.c_str(), &result);
  if (s != CMV_OK && s != CMV_CHECK_FAILED) return report_error(s);
  std::string line = "{\"command\":" + quoted(command.c_str()) +
                     ",\"pass\":" + (cmv_result_pass(result) ? "true" : "false") +
                     ",\"output\":" + quoted(cmv_config_output(cfg)) + ",\"failures\":[";
  for (size_t i = 0; i < cmv_result_failure_count(result); ++i) {
    line += (i ? "," : "") + quoted(cmv_result_failure(result, i));
  }
  line += "]}";
  std::printf("%s\n", line.c_str());
  cmv_result_free(result);
  return cmv_exit_code(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle simulation and verification for conditional McKean-Vlasov SDEs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cmv_version()));

  Flags flags;
  std::string command;
  for (const char* name : {"simulate", "verify", "oracle", "sweep"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", flags.config, "Run config (JSON)")->required();
    sub->add_option("--seed", flags.seed, "Override the config seed");
    sub->add_option("--out", flags.out, "Output directory");
    sub->add_option("--workers", flags.workers, "Worker threads")->check(CLI::NonNegativeNumber);
    sub->add_option("--check", flags.checks, "Comma-separated checks (verify)");
    sub->callback([&command, name] { command = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  return run(command, flags);
}
