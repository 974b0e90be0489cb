#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fkai/cli.hpp"

int main(int argc, char** argv)
{
  CLI::App app{"Equilibria of Frenkel-Kontorova chains near the anti-integrable limit"};
  app.require_subcommand(1);
  std::string config;
  std::string out;
  unsigned workers = 1;
  std::uint64_t seed = 0;

  for (const char* verb : {"certify", "solve", "hyperbolicity", "sweep"}) {
    auto* sub = app.add_subcommand(verb);
    sub->add_option("--config", config, "experiment config (JSON)")->required();
    sub->add_option("--out", out, "output directory (overrides the config)");
    sub->add_option("--workers", workers, "parallel sweep jobs")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "seed for sampled checks (overrides the config)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : fkai::cli::exit_code::usage;
  }

  fkai::cli::RunOptions opts;
  opts.workers = workers;
  const CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--out")) opts.out = out;
  if (sub->count("--seed")) opts.seed = seed;
  return fkai::cli::run(sub->get_name(), config, opts, std::cout, std::cerr);
}
