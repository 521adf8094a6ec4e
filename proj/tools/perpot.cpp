// Copyright 2026 The perpot Authors
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

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "perpot/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Periodic layer potentials"};
  app.require_subcommand(1);
  std::string config, out = "out";
  unsigned workers = 1;
  bool verbose = false;
  std::vector<CLI::Option*> worker_opts;
  for (const auto& name : perpot::cli::commands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config,-c", config, "JSON configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out,-o", out, "output directory");
    worker_opts.push_back(
        sub->add_option("--workers,-j", workers, "worker threads (overrides the config)")->check(CLI::Range(1u, 1024u)));
    sub->add_flag("--verbose,-v", verbose, "print every check");
  }
  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  std::ifstream is(config);
  std::stringstream ss;
  ss << is.rdbuf();
  const auto parsed = perpot::cli::parse_config(ss.str(), command);
  if (!parsed.ok()) {
    for (const auto& e : parsed.errors) std::cerr << "config error: " << e << "\n";
    return 2;
  }
  perpot::cli::RunOptions ro;
  ro.out_dir = out;
  bool flag = false;
  for (auto* o : worker_opts) flag = flag || o->count() > 0;
  ro.workers = flag ? workers : parsed.config.workers;
  ro.verbose = verbose;
  try {
    return perpot::cli::run(parsed.config, ro, std::cerr).status;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
