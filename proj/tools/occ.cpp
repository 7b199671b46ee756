// occ <stage> --config <file> [key=value ...]
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "occ/cli.hpp"
#include "occ/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Optimal control of distributed systems: batch stage runner"};
  app.require_subcommand(1);
  std::string config;
  std::vector<std::string> overrides;
  for (const auto& stage : occ::stage_names()) {
    auto* sub = app.add_subcommand(stage, "run the " + stage + " stage");
    sub->add_option("--config,-c", config, "flat key = value config file");
    sub->add_option("overrides", overrides, "key=value overrides");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? occ::kExitOk : occ::kExitConfig;
  }
  const std::string stage = app.get_subcommands().front()->get_name();
  occ::RunConfig cfg;
  try {
    cfg = occ::RunConfig::load(stage, config, overrides);
  } catch (const occ::Error& e) {
    std::cerr << "occ " << stage << ": config error: " << e.what() << '\n';
    return occ::kExitConfig;
  }
  return occ::run(cfg, std::cout, std::cerr);
}
