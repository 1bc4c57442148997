#include "cbvi/config.hpp"

#include "cbvi/oracle.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace cbvi {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& key, const std::string& msg) { throw ConfigError(key + ": " + msg); }

double to_double(const std::string& key, std::string_view v) {
  const std::string s(trim(v));
  char* end = nullptr;
  errno = 0;
  const double x = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) fail(key, "expected a number, got '" + s + "'");
  return x;
}

long long to_integer(const std::string& key, std::string_view v) {
  const std::string s(trim(v));
  long long x = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) fail(key, "expected an integer, got '" + s + "'");
  return x;
}

int to_int(const std::string& key, std::string_view v) {
  const long long x = to_integer(key, v);
  if (x < -2147483647LL || x > 2147483647LL) fail(key, "integer out of range");
  return static_cast<int>(x);
}

std::uint64_t to_u64(const std::string& key, std::string_view v) {
  const std::string s(trim(v));
  std::uint64_t x = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) fail(key, "expected a nonnegative integer");
  return x;
}

bool to_bool(const std::string& key, std::string_view v) {
  const auto s = trim(v);
  if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
  if (s == "false" || s == "no" || s == "0" || s == "off") return false;
  fail(key, "expected true or false");
}

std::vector<std::string_view> split(std::string_view v) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < v.size()) {
    while (i < v.size() && (v[i] == ' ' || v[i] == '\t' || v[i] == ',')) ++i;
    std::size_t j = i;
    while (j < v.size() && v[j] != ' ' && v[j] != '\t' && v[j] != ',') ++j;
    if (j > i) out.push_back(v.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<double> to_list(const std::string& key, std::string_view v) {
  std::vector<double> out;
  for (auto t : split(v)) out.push_back(to_double(key, t));
  return out;
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i]);
  return s;
}

Eigen::VectorXd as_vector(const std::string& key, const std::vector<double>& v, std::size_t n) {
  if (v.size() != n) fail(key, "expected " + std::to_string(n) + " entries, got " + std::to_string(v.size()));
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(n));
}

Eigen::MatrixXd as_matrix(const std::string& key, const std::vector<double>& v, int n) {
  if (v.size() != static_cast<std::size_t>(n) * n) {
    fail(key, "expected " + std::to_string(n * n) + " entries (row-major " + std::to_string(n) + "x" +
                  std::to_string(n) + "), got " + std::to_string(v.size()));
  }
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(v.data(), n, n);
}

}  // namespace

IniMap parse_ini(std::string_view text) {
  IniMap map;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto h = line.find('#'); h != std::string_view::npos) line = line.substr(0, h);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) throw ConfigError(where + ": malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
    if (section.empty()) throw ConfigError(where + ": key outside of a section");
    const std::string key = section + "." + std::string(trim(line.substr(0, eq)));
    if (!map.emplace(key, std::string(trim(line.substr(eq + 1)))).second) {
      throw ConfigError(where + ": duplicate key " + key);
    }
  }
  return map;
}

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  RunConfig c;
  MaterialSpec& m = c.material;
  for (const auto& [key, value] : parse_ini(text)) {
    auto starts = [&](std::string_view p) { return key.rfind(p, 0) == 0; };
    if (key == "mesh.path") {
      std::filesystem::path p(value);
      c.mesh_path = (p.is_absolute() || base_dir.empty() ? p : base_dir / p).lexically_normal();
    } else if (key == "output.dir") {
      std::filesystem::path p(value);
      c.output_dir = (p.is_absolute() || base_dir.empty() ? p : base_dir / p).lexically_normal();
    } else if (key == "output.trajectory") {
      c.write_trajectory = to_bool(key, value);
    } else if (key == "output.energy") {
      c.energy = to_bool(key, value);
    } else if (key == "material.Q") {
      auto parts = split(value);
      if (!parts.empty() && parts.front() == "iso") {
        m.q_isotropic = true;
        m.Q = to_list(key, value.substr(value.find("iso") + 3));
        if (m.Q.size() != 4) fail(key, "iso form takes lambda mu kappa beta");
      } else {
        m.q_isotropic = false;
        m.Q = to_list(key, value);
      }
    } else if (key == "material.W") {
      m.W = to_list(key, value);
    } else if (key == "material.g") {
      m.g = to_list(key, value);
    } else if (key == "material.w0") {
      if (trim(value) == "auto") {
        m.w0.reset();
      } else {
        m.w0 = to_double(key, value);
      }
    } else if (key == "material.rho") {
      m.rho = to_double(key, value);
    } else if (key == "material.rho_bar") {
      m.rho_bar = to_double(key, value);
    } else if (key == "material.eta") {
      m.eta = to_double(key, value);
    } else if (key == "material.chi") {
      m.chi = std::string(trim(value));
      if (m.chi != "scalar" && m.chi != "matrix" && m.chi != "tanh") fail(key, "expected scalar, matrix or tanh");
    } else if (key == "material.Omega") {
      m.omega = to_list(key, value);
    } else if (key == "material.chi.a") {
      m.chi_a = to_double(key, value);
    } else if (key == "material.chi.b") {
      m.chi_b = to_double(key, value);
    } else if (key == "material.chi.c") {
      m.chi_c = to_double(key, value);
    } else if (key == "material.chi.gamma") {
      m.chi_gamma = to_double(key, value);
    } else if (key == "material.chi.Xi") {
      m.chi_xi = to_double(key, value);
    } else if (key == "material.chi.box") {
      m.chi_box = to_double(key, value);
    } else if (key == "material.chi.samples") {
      m.chi_samples = to_int(key, value);
    } else if (key == "material.traction") {
      m.traction = to_list(key, value);
    } else if (starts("material.traction.")) {
      m.traction_facets[to_int(key, key.substr(18))] = to_list(key, value);
    } else if (key == "timeset.policy") {
      c.timeset.policy = std::string(trim(value));
      if (c.timeset.policy != "uniform" && c.timeset.policy != "per_element" && c.timeset.policy != "jittered") {
        fail(key, "expected uniform, per_element or jittered");
      }
    } else if (key == "timeset.n") {
      c.timeset.n = to_int(key, value);
    } else if (key == "timeset.n_per_element") {
      c.timeset.n_per_element.clear();
      for (auto t : split(value)) c.timeset.n_per_element.push_back(to_int(key, t));
    } else if (key == "timeset.seed") {
      c.timeset.seed = to_u64(key, value);
    } else if (key == "timeset.mode") {
      try {
        c.timeset.mode = parse_mode(trim(value));
      } catch (const std::invalid_argument& e) {
        fail(key, e.what());
      }
    } else if (key == "timeset.max_ratio") {
      c.timeset.max_ratio = to_double(key, value);
    } else if (key == "run.integrator") {
      try {
        c.integrator = parse_integrator(trim(value));
      } catch (const std::invalid_argument& e) {
        fail(key, e.what());
      }
    } else if (key == "run.t0") {
      c.t0 = to_double(key, value);
    } else if (key == "run.tf") {
      c.tf = to_double(key, value);
    } else if (key == "run.seed") {
      c.seed = to_u64(key, value);
    } else if (key == "run.max_T") {
      c.max_T = to_double(key, value);
    } else if (key == "sync.quadrature") {
      try {
        c.quadrature = parse_quadrature(trim(value));
      } catch (const std::invalid_argument& e) {
        fail(key, e.what());
      }
    } else if (key == "sync.tol") {
      c.sync_tol = to_double(key, value);
    } else if (key == "sync.max_iters") {
      c.sync_max_iters = to_int(key, value);
    } else if (key == "init.u") {
      c.init.u = to_list(key, value);
    } else if (key == "init.nu") {
      c.init.nu = to_list(key, value);
    } else if (key == "init.u_rate") {
      c.init.u_rate = to_list(key, value);
    } else if (key == "init.nu_rate") {
      c.init.nu_rate = to_list(key, value);
    } else if (key == "init.equilibrium") {
      c.init.equilibrium = to_bool(key, value);
    } else if (key == "init.mode") {
      c.init.mode = std::string(trim(value));
      if (c.init.mode != "none" && c.init.mode != "lowest") fail(key, "expected none or lowest");
    } else if (key == "init.mode.amplitude") {
      c.init.mode_amplitude = to_double(key, value);
    } else if (key == "init.mode.target") {
      c.init.mode_target = std::string(trim(value));
      if (c.init.mode_target != "rate" && c.init.mode_target != "value") fail(key, "expected rate or value");
    } else if (starts("init.node.")) {
      const std::string rest = key.substr(10);
      const auto dot = rest.find('.');
      if (dot == std::string::npos) fail(key, "expected init.node.<index>.<field>");
      const int node = to_int(key, rest.substr(0, dot));
      if (node < 0) fail(key, "negative node index");
      const std::string field = rest.substr(dot + 1);
      NodeOverride& o = c.init.nodes[node];
      if (field == "u") {
        o.u = to_list(key, value);
      } else if (field == "nu") {
        o.nu = to_list(key, value);
      } else if (field == "u_rate") {
        o.u_rate = to_list(key, value);
      } else if (field == "nu_rate") {
        o.nu_rate = to_list(key, value);
      } else {
        fail(key, "unknown field " + field);
      }
    } else if (key == "converge.levels") {
      c.levels = to_int(key, value);
    } else if (key == "converge.reference") {
      const auto v = trim(value);
      if (v == "auto") {
        c.reference = Reference::Auto;
      } else if (v == "oracle") {
        c.reference = Reference::Oracle;
      } else if (v == "finest") {
        c.reference = Reference::Finest;
      } else {
        fail(key, "expected auto, oracle or finest");
      }
    } else {
      fail(key, "unknown key");
    }
  }

  if (!(c.t0 < c.tf)) fail("run.tf", "interval must satisfy t0 < tf");
  if (c.timeset.n < 1) fail("timeset.n", "must be >= 1");
  if (c.timeset.policy == "per_element" && c.timeset.n_per_element.empty()) {
    fail("timeset.n_per_element", "required for the per_element policy");
  }
  if (!(c.timeset.max_ratio >= 1.0)) fail("timeset.max_ratio", "must be >= 1");
  if (!(c.sync_tol > 0.0)) fail("sync.tol", "must be positive");
  if (c.sync_max_iters < 1) fail("sync.max_iters", "must be >= 1");
  if (c.integrator == IntegratorKind::Avi && m.chi != "scalar") {
    fail("run.integrator", "avi requires material.chi = scalar");
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::filesystem::absolute(path).parent_path());
}

std::string write_config(const RunConfig& c) {
  std::ostringstream o;
  const MaterialSpec& m = c.material;
  o << "[mesh]\npath = " << c.mesh_path.string() << "\n\n";
  o << "[output]\ndir = " << c.output_dir.string() << "\ntrajectory = " << (c.write_trajectory ? "true" : "false")
    << "\nenergy = " << (c.energy ? "true" : "false") << "\n\n";
  o << "[material]\n";
  o << "Q = " << (m.q_isotropic ? "iso " : "") << fmt_list(m.Q) << "\n";
  if (!m.W.empty()) o << "W = " << fmt_list(m.W) << "\n";
  if (!m.g.empty()) o << "g = " << fmt_list(m.g) << "\n";
  o << "w0 = " << (m.w0 ? fmt(*m.w0) : std::string("auto")) << "\n";
  o << "rho = " << fmt(m.rho) << "\nrho_bar = " << fmt(m.rho_bar) << "\neta = " << fmt(m.eta) << "\n";
  o << "chi = " << m.chi << "\n";
  if (!m.omega.empty()) o << "Omega = " << fmt_list(m.omega) << "\n";
  o << "chi.a = " << fmt(m.chi_a) << "\nchi.b = " << fmt(m.chi_b) << "\nchi.c = " << fmt(m.chi_c) << "\n";
  o << "chi.gamma = " << fmt(m.chi_gamma) << "\nchi.Xi = " << fmt(m.chi_xi) << "\nchi.box = " << fmt(m.chi_box)
    << "\nchi.samples = " << m.chi_samples << "\n";
  if (!m.traction.empty()) o << "traction = " << fmt_list(m.traction) << "\n";
  for (const auto& [f, t] : m.traction_facets) o << "traction." << f << " = " << fmt_list(t) << "\n";
  o << "\n[timeset]\npolicy = " << c.timeset.policy << "\nn = " << c.timeset.n << "\n";
  if (!c.timeset.n_per_element.empty()) {
    o << "n_per_element =";
    for (int n : c.timeset.n_per_element) o << " " << n;
    o << "\n";
  }
  if (c.timeset.seed) o << "seed = " << *c.timeset.seed << "\n";
  o << "mode = " << to_string(c.timeset.mode) << "\nmax_ratio = " << fmt(c.timeset.max_ratio) << "\n\n";
  o << "[run]\nintegrator = " << to_string(c.integrator) << "\nt0 = " << fmt(c.t0) << "\ntf = " << fmt(c.tf)
    << "\nseed = " << c.seed << "\nmax_T = " << fmt(c.max_T) << "\n\n";
  o << "[sync]\nquadrature = " << to_string(c.quadrature) << "\ntol = " << fmt(c.sync_tol)
    << "\nmax_iters = " << c.sync_max_iters << "\n\n";
  o << "[init]\n";
  if (!c.init.u.empty()) o << "u = " << fmt_list(c.init.u) << "\n";
  if (!c.init.nu.empty()) o << "nu = " << fmt_list(c.init.nu) << "\n";
  if (!c.init.u_rate.empty()) o << "u_rate = " << fmt_list(c.init.u_rate) << "\n";
  if (!c.init.nu_rate.empty()) o << "nu_rate = " << fmt_list(c.init.nu_rate) << "\n";
  o << "equilibrium = " << (c.init.equilibrium ? "true" : "false") << "\nmode = " << c.init.mode
    << "\nmode.amplitude = " << fmt(c.init.mode_amplitude) << "\nmode.target = " << c.init.mode_target << "\n";
  for (const auto& [a, n] : c.init.nodes) {
    if (!n.u.empty()) o << "node." << a << ".u = " << fmt_list(n.u) << "\n";
    if (!n.nu.empty()) o << "node." << a << ".nu = " << fmt_list(n.nu) << "\n";
    if (!n.u_rate.empty()) o << "node." << a << ".u_rate = " << fmt_list(n.u_rate) << "\n";
    if (!n.nu_rate.empty()) o << "node." << a << ".nu_rate = " << fmt_list(n.nu_rate) << "\n";
  }
  o << "\n[converge]\nlevels = " << c.levels << "\nreference = "
    << (c.reference == Reference::Auto ? "auto" : c.reference == Reference::Oracle ? "oracle" : "finest") << "\n";
  return o.str();
}

Material build_material(const MaterialSpec& s, const Mesh& mesh, std::uint64_t seed) {
  const int d = mesh.dim();
  const int k = mesh.descriptor_dim();
  const int n = d + k;
  const int nxi = d * d + k + k * d;
  try {
    if (s.q_isotropic && s.Q.size() != 4) fail("material.Q", "iso form takes lambda mu kappa beta");
    ElasticForm elastic = s.q_isotropic ? ElasticForm::isotropic(d, k, s.Q[0], s.Q[1], s.Q[2], s.Q[3])
                                        : ElasticForm(d, k, as_matrix("material.Q", s.Q, nxi));
    const Eigen::MatrixXd W = s.W.empty() ? Eigen::MatrixXd::Zero(n, n) : as_matrix("material.W", s.W, n);
    const Eigen::VectorXd g = s.g.empty() ? Eigen::VectorXd::Zero(n) : as_vector("material.g", s.g, n);
    ExternalPotential external = s.w0 ? ExternalPotential(W, g, *s.w0)
                                      : ExternalPotential::with_nonnegative_offset(W, g, 2.0, seed);
    TractionField traction;
    if (!s.traction.empty()) traction = TractionField::uniform(mesh, as_vector("material.traction", s.traction, d));
    for (const auto& [f, t] : s.traction_facets) {
      traction.values[f] = as_vector("material.traction." + std::to_string(f), t, d);
    }
    ChiModel chi = ScalarQuadratic{s.rho_bar};
    if (s.chi == "matrix") {
      chi = MatrixQuadratic{as_matrix("material.Omega", s.omega, k)};
    } else if (s.chi == "tanh") {
      GeneralChi g2 = tanh_chi(k, s.chi_a, s.chi_b, s.chi_c, s.chi_gamma, s.chi_xi);
      g2.box = s.chi_box;
      g2.samples = s.chi_samples;
      chi = std::move(g2);
    }
    return Material{std::move(elastic), std::move(external), std::move(traction), s.rho, s.rho_bar, s.eta,
                    std::move(chi)};
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("material: ") + e.what());
  }
}

InitialData build_initial(const InitSpec& s, const Model& model) {
  const int d = model.dim();
  const int k = model.descriptor_dim();
  InitialData init = InitialData::zero(model.num_dofs());
  auto fill = [&](const std::string& key, const std::vector<double>& field, int offset, int width,
                  Eigen::VectorXd& target) {
    if (field.empty()) return;
    const Eigen::VectorXd v = as_vector(key, field, width);
    for (int a = 0; a < model.num_nodes(); ++a) target.segment(model.dof(a, offset), width) = v;
  };
  fill("init.u", s.u, 0, d, init.values);
  fill("init.nu", s.nu, d, k, init.values);
  fill("init.u_rate", s.u_rate, 0, d, init.rates);
  fill("init.nu_rate", s.nu_rate, d, k, init.rates);
  model.apply_constraints(init.values);
  model.apply_constraints(init.rates);

  for (const auto& [a, o] : s.nodes) {
    const std::string key = "init.node." + std::to_string(a);
    if (a >= model.num_nodes()) fail(key, "node index out of range");
    auto set = [&](const std::string& field, const std::vector<double>& v, int offset, int width,
                   Eigen::VectorXd& target) {
      if (v.empty()) return;
      target.segment(model.dof(a, offset), width) = as_vector(key + "." + field, v, width);
      for (int c = 0; c < width; ++c) {
        if (!model.is_free(model.dof(a, offset + c)) && v[c] != 0.0) {
          fail(key + "." + field, "nonzero value on a constrained channel");
        }
      }
    };
    set("u", o.u, 0, d, init.values);
    set("nu", o.nu, d, k, init.values);
    set("u_rate", o.u_rate, 0, d, init.rates);
    set("nu_rate", o.nu_rate, d, k, init.rates);
  }

  if (s.equilibrium || s.mode == "lowest") {
    if (!is_quadratic(model.material().chi)) {
      fail(s.equilibrium ? "init.equilibrium" : "init.mode", "requires a quadratic chi");
    }
    const LinearSystem sys = assemble_linear_system(model);
    if (s.equilibrium) init.values += static_equilibrium(sys);
    if (s.mode == "lowest") {
      const Modes modes = normal_modes(sys);
      if (modes.vectors.cols() == 0) fail("init.mode", "no free channels");
      Eigen::VectorXd phi = modes.vectors.col(0);
      Eigen::Index imax = 0;
      phi.cwiseAbs().maxCoeff(&imax);
      phi /= phi(imax);
      (s.mode_target == "rate" ? init.rates : init.values) += s.mode_amplitude * phi;
    }
  }
  return init;
}

TimeSetPolicy build_policy(const RunConfig& c) {
  if (c.timeset.policy == "uniform") return UniformPolicy{c.timeset.n};
  if (c.timeset.policy == "per_element") return PerElementUniformPolicy{c.timeset.n_per_element};
  return JitteredPolicy{c.timeset.n, c.timeset.seed.value_or(c.seed), c.timeset.max_ratio};
}

RunSettings build_settings(const RunConfig& c) {
  RunSettings s;
  s.integrator = c.integrator;
  s.policy = build_policy(c);
  s.mode = c.timeset.mode;
  s.sync = SyncOptions{c.quadrature, c.sync_tol, c.sync_max_iters};
  s.max_T = c.max_T;
  return s;
}

Problem build_problem(const RunConfig& c) {
  if (c.mesh_path.empty()) fail("mesh.path", "required");
  if (!std::filesystem::exists(c.mesh_path)) fail("mesh.path", "file not found: " + c.mesh_path.string());
  Mesh mesh = [&] {
    try {
      return load_mesh_file(c.mesh_path);
    } catch (const MeshError& e) {
      fail("mesh.path", e.what());
    } catch (const std::invalid_argument& e) {
      fail("mesh.path", e.what());
    }
  }();
  Material material = build_material(c.material, mesh, c.seed);
  if (c.integrator == IntegratorKind::Avi && !is_scalar_quadratic(material.chi)) {
    fail("run.integrator", "avi requires material.chi = scalar");
  }
  std::shared_ptr<const Model> model;
  try {
    model = std::make_shared<const Model>(std::move(mesh), std::move(material));
  } catch (const std::invalid_argument& e) {
    fail("material", e.what());
  }
  Problem p;
  p.model = model;
  p.init = build_initial(c.init, *model);
  p.t0 = c.t0;
  p.tf = c.tf;
  return p;
}

}  // namespace cbvi
