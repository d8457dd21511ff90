#include "copabc/cli/commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{"copabc: copula approximate Bayesian computation experiments"};
  app.require_subcommand(1);
  copabc::cli::RunOptions run;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  std::string command;
  for (const std::string& name : copabc::cli::command_names()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", run.config_path, "INI configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "random seed (overrides [run] seed)");
    sub->add_option("--threads", threads, "worker threads (default: hardware concurrency)")->check(CLI::PositiveNumber);
    sub->add_option("--out", run.out_dir, "output directory")->capture_default_str();
    sub->callback([&command, name] { command = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  for (CLI::App* sub : app.get_subcommands()) {
    if (sub->count("--seed")) run.seed = seed;
    if (sub->count("--threads")) run.threads = threads;
  }
  return copabc::cli::run_command(command, run);
}
