#include <malloc.h>

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "cli/commands.hpp"

using namespace andikit::cli;

int main(int argc, char** argv) {
  // keep large activation buffers off mmap; repeated page faults dominate otherwise
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);

  CLI::App app{"andikit: anomalous diffusion trajectories, ResAnDi classifier and Grad-CAM analysis"};
  std::string command, config_path, out_dir = "run";
  unsigned workers = 1;
  std::vector<std::string> overrides;
  std::string names;
  for (const auto& n : command_names()) names += (names.empty() ? "" : ", ") + n;
  app.add_option("command", command, "one of: " + names)->required();
  app.add_option("overrides", overrides, "key=value settings applied after the config file");
  app.add_option("-c,--config", config_path, "flat key = value config file");
  app.add_option("-o,--out", out_dir, "output directory")->capture_default_str();
  app.add_option("-j,--workers", workers, "worker threads")->capture_default_str();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig config = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
    if (const char* s = std::getenv("ANDIKIT_SEED")) config.set("seed", s);
    for (const auto& o : overrides) config.apply_override(o);
    run_command(command, config, out_dir, workers);
  } catch (const std::exception& e) {
    std::cerr << "andikit " << command << ": " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitOk;
}
