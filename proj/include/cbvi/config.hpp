#pragma once

#include "cbvi/diagnostics.hpp"
#include "cbvi/material.hpp"
#include "cbvi/mesh.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cbvi {

/// Malformed or inconsistent configuration; the message starts with the key path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat section.key -> value map of an INI text. Later duplicates are errors.
using IniMap = std::map<std::string, std::string>;
IniMap parse_ini(std::string_view text);

struct MaterialSpec {
  bool q_isotropic = true;
  std::vector<double> Q{1.0, 1.0, 1.0, 1.0};  // lambda mu kappa beta, or the full row-major matrix
  std::vector<double> W;                      // row-major (d+k)^2; empty means zero
  std::vector<double> g;                      // d+k; empty means zero
  std::optional<double> w0;                   // unset: smallest sampled offset making w >= 0
  double rho = 1.0;
  double rho_bar = 1.0;
  double eta = 0.0;
  std::string chi = "scalar";                 // scalar | matrix | tanh
  std::vector<double> omega;                  // k^2, for chi = matrix
  double chi_a = 1.0;
  double chi_b = 0.0;
  double chi_c = 0.0;
  double chi_gamma = 1.0;
  double chi_xi = 1.0;
  double chi_box = 2.0;
  int chi_samples = 200;
  std::vector<double> traction;               // uniform on every traction facet
  std::map<int, std::vector<double>> traction_facets;

  bool operator==(const MaterialSpec&) const = default;
};

struct TimesetSpec {
  std::string policy = "uniform";  // uniform | per_element | jittered
  int n = 100;
  std::vector<int> n_per_element;
  std::optional<std::uint64_t> seed;  // falls back to run.seed
  TimeSetMode mode = TimeSetMode::Strict;
  double max_ratio = 2.0;

  bool operator==(const TimesetSpec&) const = default;
};

struct NodeOverride {
  std::vector<double> u, nu, u_rate, nu_rate;  // empty entries keep the field value
  bool operator==(const NodeOverride&) const = default;
};

/// Initial data: constant fields, then per-node overrides, then the optional static
/// equilibrium shift and modal excitation. Constant fields are zeroed on constrained channels.
struct InitSpec {
  std::vector<double> u, nu, u_rate, nu_rate;
  std::map<int, NodeOverride> nodes;
  bool equilibrium = false;
  std::string mode = "none";  // none | lowest
  double mode_amplitude = 0.0;
  std::string mode_target = "rate";  // rate | value

  bool operator==(const InitSpec&) const = default;
};

struct RunConfig {
  std::filesystem::path mesh_path;
  std::filesystem::path output_dir = "out";
  MaterialSpec material;
  TimesetSpec timeset;
  IntegratorKind integrator = IntegratorKind::Avi;
  double t0 = 0.0;
  double tf = 1.0;
  std::uint64_t seed = 1;
  double max_T = 0.0;
  Quadrature quadrature = Quadrature::Vertex;
  double sync_tol = 1e-10;
  int sync_max_iters = 50;
  InitSpec init;
  bool write_trajectory = true;
  bool energy = true;
  int levels = 3;
  Reference reference = Reference::Auto;

  bool operator==(const RunConfig&) const = default;
};

/// Relative paths are resolved against base_dir.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
std::string write_config(const RunConfig& config);

Material build_material(const MaterialSpec& spec, const Mesh& mesh, std::uint64_t seed);
InitialData build_initial(const InitSpec& spec, const Model& model);
TimeSetPolicy build_policy(const RunConfig& config);
RunSettings build_settings(const RunConfig& config);

/// Loads the mesh and assembles the model and initial data. Integrator/chi
/// compatibility is checked here.
Problem build_problem(const RunConfig& config);

}  // namespace cbvi
