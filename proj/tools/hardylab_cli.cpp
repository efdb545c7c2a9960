#include <iostream>

#include "CLI11.hpp"
#include "hardylab/experiments.hpp"

using namespace hardylab;

int main(int argc, char** argv) {
  CLI::App app{"hardylab: weighted composition operator experiments"};
  app.require_subcommand(1);

  auto* list = app.add_subcommand("list", "list experiments and config keys");
  bool keys = false;
  list->add_flag("--keys", keys, "also print the config keys");

  auto* run = app.add_subcommand("run", "run one experiment");
  std::string name, config, out;
  run->add_option("experiment", name, "experiment name")->required();
  run->add_option("--config", config, "config file (key = value lines)")->required();
  run->add_option("--out", out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 3;
  }

  if (list->parsed()) {
    for (const auto& e : registry()) std::cout << e.name << "\t" << e.tag << "\t" << e.summary << "\n";
    if (keys) {
      std::cout << "\n";
      for (const auto& k : config_schema())
        std::cout << k.key << "\t" << (*k.fallback ? k.fallback : "-") << "\t" << k.doc << "\n";
    }
    return 0;
  }

  try {
    Config cfg = Config::load(config);
    if (out.empty()) out = cfg.str("out", "out/" + name);
    auto rep = run_experiment(name, cfg);
    auto files = emit(rep, out);
    for (const auto& c : rep.checks) std::cout << to_string(c.status) << "  " << c.name << "\n";
    std::cout << "wrote " << files.size() << " files to " << out << "\n";
    return rep.exit_code();
  } catch (const LabError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return (e.kind() == ErrorKind::config || e.kind() == ErrorKind::io) ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
