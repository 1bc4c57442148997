#include "cbvi/commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{"Asynchronous and synchronous variational integrators for linearized complex bodies"};
  app.require_subcommand(1);

  std::string config;
  std::string mesh;
  std::optional<int> levels;

  auto* run = app.add_subcommand("run", "Integrate a configured problem; writes trajectory.csv and summary.txt");
  run->add_option("config", config, "INI configuration")->required();

  auto* converge = app.add_subcommand("converge", "Refinement study; writes convergence.csv");
  converge->add_option("config", config, "INI configuration")->required();
  converge->add_option("--levels", levels, "Number of refinement levels (at least 3)");

  auto* validate = app.add_subcommand("validate", "Check material hypotheses, mesh and time set");
  validate->add_option("config", config, "INI configuration")->required();

  auto* info = app.add_subcommand("mesh-info", "Summarize a mesh file");
  info->add_option("meshfile", mesh, "Mesh file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cbvi::kExitConfig;
  }

  if (*run) return cbvi::cmd_run(config, std::cout, std::cerr);
  if (*converge) return cbvi::cmd_converge(config, levels, std::cout, std::cerr);
  if (*validate) return cbvi::cmd_validate(config, std::cout, std::cerr);
  return cbvi::cmd_mesh_info(mesh, std::cout, std::cerr);
}
