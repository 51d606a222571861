#include <CLI11.hpp>
#include <cstring>

#include "homlab/run.hpp"

namespace {

// --out as given on the command line, for the manifest of a rejected call.
std::string scan_out(int argc, char** argv) {
  for (int k = 1; k < argc; ++k) {
    if (std::strcmp(argv[k], "--out") == 0 && k + 1 < argc) return argv[k + 1];
    if (std::strncmp(argv[k], "--out=", 6) == 0) return argv[k] + 6;
  }
  return "run";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"homlab: periodic homogenization runs (cell, solve, sweep, eig, report)"};
  std::string config;
  std::string out;
  int jobs = 0;
  std::uint64_t seed = 0;
  bool strict = false;
  app.add_option("--config", config, "run configuration (JSON)")->required();
  auto* out_opt = app.add_option("--out", out, "output directory");
  auto* jobs_opt = app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "seed for randomized start vectors");
  app.add_flag("--strict", strict, "exit 4 when a graded verdict is fail or inconclusive");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    homlab::write_failure_manifest(scan_out(argc, argv), homlab::exit_validation, e.what());
    return homlab::exit_validation;
  }
  homlab::RunOverrides ov;
  if (*out_opt) ov.out = out;
  if (*jobs_opt) ov.jobs = jobs;
  if (*seed_opt) ov.seed = seed;
  ov.strict = strict;
  return homlab::execute(config, ov);
}
