// Copyright 2026 The dhist Authors
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

// dhist: evaluate decoherence, records and classicality measures for a
// history set given as a JSON config or a named model.

#include <iostream>

#include "CLI11.hpp"
#include "dhist/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Decoherence functional, records and classicality measures for sets of histories"};
  app.set_version_flag("--version", dhist::cli::kVersion);
  dhist::cli::Options opts;
  std::string config, model, out;
  double tol = 0.0, solver_tol = 0.0;
  std::uint64_t seed = 0;

  auto* config_opt = app.add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
  auto* model_opt = app.add_option("--model", model, "named model: measurement, environment, random, qubit");
  app.add_option("--param", opts.params, "model parameters as k=v,k=v")->needs(model_opt);
  app.add_option("--out", out, "also write the JSON report to this path");
  app.add_option("--format", opts.format, "stdout format")->check(CLI::IsMember({"json", "text"}));
  auto* tol_opt = app.add_option("--tol", tol, "decoherence tolerance")->check(CLI::PositiveNumber);
  auto* solver_opt = app.add_option("--solver-tol", solver_tol, "max-entropy residual tolerance")
                         ->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "seed for the random model");
  config_opt->excludes(model_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : dhist::cli::ExitCode::io_error;
  }
  if (*config_opt) opts.config_path = config;
  if (*model_opt) opts.model = model;
  if (!out.empty()) opts.out_path = out;
  if (*tol_opt) opts.tolerance = tol;
  if (*solver_opt) opts.solver_tolerance = solver_tol;
  if (*seed_opt) opts.seed = seed;
  return dhist::cli::run(opts, std::cout, std::cerr);
}
