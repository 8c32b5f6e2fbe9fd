// Copyright 2026 The epi-smc Authors
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

#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "epismc/errors.hpp"
#include "epismc/harness.hpp"
#include "epismc/simd/kernels.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Particle filtering for individual-based epidemic models"};
  std::string command;
  epismc::HarnessOptions options;
  std::string out = "out";
  std::uint64_t seed = 0;
  std::size_t workers = 0;

  app.add_option("command", command, "simulate | filter | ess | stddev | grid | qsens | pmmh | exact-check")
      ->required()
      ->check(CLI::IsMember(epismc::command_names()));
  app.add_option("--config", options.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "master seed (overrides the config)");
  app.add_option("--out", out, "output directory")->capture_default_str();
  app.add_flag("--paper-scale", options.paper_scale, "apply the config's paper_scale block");
  auto* workers_opt = app.add_option("--workers", workers, "worker threads (overrides the config)")
                          ->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  if (*seed_opt) options.seed = seed;
  if (*workers_opt) options.workers = workers;
  options.out = out;
  try {
    std::clog << "simd: " << epismc::simd::isa_name(epismc::simd::active_isa()) << '\n';
    const auto paths = epismc::run_command(command, options, std::clog);
    for (const auto& path : paths) std::cout << path.string() << '\n';
  } catch (const epismc::StateSpaceTooLarge& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
