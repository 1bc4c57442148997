#include "cbvi/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

namespace cbvi {

std::string_view to_string(BoundaryMarker marker) {
  switch (marker) {
    case BoundaryMarker::Traction: return "traction";
    case BoundaryMarker::FixedU: return "fixed_u";
    case BoundaryMarker::FixedNu: return "fixed_nu";
    case BoundaryMarker::Free: return "free";
  }
  return "free";
}

BoundaryMarker parse_marker(std::string_view token) {
  if (token == "traction") return BoundaryMarker::Traction;
  if (token == "fixed_u") return BoundaryMarker::FixedU;
  if (token == "fixed_nu") return BoundaryMarker::FixedNu;
  if (token == "free") return BoundaryMarker::Free;
  throw std::invalid_argument("unknown boundary marker '" + std::string(token) + "'");
}

MeshError::MeshError(int line, const std::string& message)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message),
      line_(line) {}

namespace {

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

double facet_measure(const Mesh& mesh, const std::vector<int>& nodes) {
  if (mesh.dim() == 2) return (mesh.node(nodes[1]) - mesh.node(nodes[0])).norm();
  const Eigen::Vector3d p0 = mesh.node(nodes[0]);
  const Eigen::Vector3d e1 = Eigen::Vector3d(mesh.node(nodes[1])) - p0;
  const Eigen::Vector3d e2 = Eigen::Vector3d(mesh.node(nodes[2])) - p0;
  return 0.5 * e1.cross(e2).norm();
}

}  // namespace

Mesh::Mesh(int dim, int descriptor_dim, Eigen::MatrixXd nodes, std::vector<int> elements,
           std::vector<BoundaryFacet> facets)
    : dim_(dim),
      k_(descriptor_dim),
      nodes_(std::move(nodes)),
      elements_(std::move(elements)),
      facets_(std::move(facets)) {
  validate_and_derive();
}

void Mesh::validate_and_derive() {
  if (dim_ != 2 && dim_ != 3) throw MeshError(0, "dimension must be 2 or 3");
  if (k_ < 1) throw MeshError(0, "descriptor dimension must be >= 1");
  if (nodes_.cols() != dim_) throw MeshError(0, "node coordinates do not match dimension");
  const int npe = dim_ + 1;
  if (elements_.size() % npe != 0) throw MeshError(0, "element connectivity has wrong stride");
  const int n = num_nodes();
  for (int idx : elements_) {
    if (idx < 0 || idx >= n) {
      throw MeshError(0, "element references node " + std::to_string(idx) + " but mesh has " +
                             std::to_string(n) + " nodes");
    }
  }

  const int ne = num_elements();
  volumes_.resize(ne);
  gradients_.resize(ne);
  node_elements_.assign(n, {});
  for (int K = 0; K < ne; ++K) {
    auto conn = element(K);
    Eigen::MatrixXd J(dim_, dim_);
    for (int j = 0; j < dim_; ++j) J.col(j) = node(conn[j + 1]) - node(conn[0]);
    const double det = J.determinant();
    const double vol = det / factorial(dim_);
    if (!(vol > 0.0)) {
      throw MeshError(0, "element " + std::to_string(K) + " has nonpositive signed volume " +
                             std::to_string(vol));
    }
    volumes_[K] = vol;
    // Rows of J^{-1} are the gradients of the barycentric coordinates 1..d.
    const Eigen::MatrixXd Jinv = J.inverse();
    Eigen::MatrixXd G(npe, dim_);
    for (int j = 0; j < dim_; ++j) G.row(j + 1) = Jinv.row(j);
    G.row(0) = -Jinv.colwise().sum();
    gradients_[K] = std::move(G);
    for (int a : conn) node_elements_[a].push_back(K);
  }
  for (int a = 0; a < n; ++a) {
    auto& list = node_elements_[a];
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  for (int K = 0; K < ne; ++K) {
    auto conn = element(K);
    std::vector<int> sorted(conn.begin(), conn.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw MeshError(0, "element " + std::to_string(K) + " repeats a node");
    }
  }

  fixed_u_.assign(n, false);
  fixed_nu_.assign(n, false);
  std::map<std::vector<int>, std::vector<BoundaryMarker>> seen;
  for (std::size_t f = 0; f < facets_.size(); ++f) {
    auto& facet = facets_[f];
    const std::string tag = "boundary facet " + std::to_string(f);
    if (static_cast<int>(facet.nodes.size()) != dim_) {
      throw MeshError(0, tag + " must list " + std::to_string(dim_) + " nodes");
    }
    for (int idx : facet.nodes) {
      if (idx < 0 || idx >= n) throw MeshError(0, tag + " references missing node " + std::to_string(idx));
    }
    std::vector<int> key = facet.nodes;
    std::sort(key.begin(), key.end());
    if (std::adjacent_find(key.begin(), key.end()) != key.end()) {
      throw MeshError(0, tag + " repeats a node");
    }
    auto& markers = seen[key];
    for (BoundaryMarker m : markers) {
      if (m == facet.marker) throw MeshError(0, tag + " is listed twice with the same marker");
      const bool clash = (m == BoundaryMarker::FixedU && facet.marker == BoundaryMarker::Traction) ||
                         (m == BoundaryMarker::Traction && facet.marker == BoundaryMarker::FixedU);
      if (clash) throw MeshError(0, tag + " is marked both fixed_u and traction");
    }
    markers.push_back(facet.marker);

    // Owning elements: those containing every facet node.
    std::vector<int> owners = node_elements_[facet.nodes[0]];
    for (std::size_t i = 1; i < facet.nodes.size(); ++i) {
      const auto& other = node_elements_[facet.nodes[i]];
      std::vector<int> merged;
      std::set_intersection(owners.begin(), owners.end(), other.begin(), other.end(),
                            std::back_inserter(merged));
      owners = std::move(merged);
    }
    if (owners.size() != 1) {
      throw MeshError(0, tag + " belongs to " + std::to_string(owners.size()) +
                             " elements (expected exactly one)");
    }
    facet.element = owners.front();
    facet.measure = facet_measure(*this, facet.nodes);

    if (facet.marker == BoundaryMarker::FixedU) {
      for (int a : facet.nodes) fixed_u_[a] = true;
    } else if (facet.marker == BoundaryMarker::FixedNu) {
      for (int a : facet.nodes) fixed_nu_[a] = true;
    }
  }
}

std::span<const int> Mesh::element(int K) const {
  const int npe = dim_ + 1;
  return std::span<const int>(elements_.data() + static_cast<std::size_t>(K) * npe, npe);
}

double Mesh::total_volume() const {
  return std::accumulate(volumes_.begin(), volumes_.end(), 0.0);
}

int Mesh::local_index(int K, int a) const {
  auto conn = element(K);
  for (int i = 0; i < static_cast<int>(conn.size()); ++i) {
    if (conn[i] == a) return i;
  }
  return -1;
}

Eigen::VectorXd Mesh::barycenter(int K) const {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(dim_);
  for (int a : element(K)) c += node(a);
  return c / static_cast<double>(dim_ + 1);
}

Mesh Mesh::scaled(double s) const {
  return Mesh(dim_, k_, nodes_ * s, elements_, facets_);
}

// ---------------------------------------------------------------------------
// Text format

namespace {

struct LineReader {
  std::istringstream in;
  int line_no = 0;

  explicit LineReader(std::string_view text) : in(std::string(text)) {}

  // Next non-empty, comment-stripped line split into tokens; empty at EOF.
  std::vector<std::string> next() {
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
      std::istringstream ls(line);
      std::vector<std::string> tokens;
      for (std::string tok; ls >> tok;) tokens.push_back(tok);
      if (!tokens.empty()) return tokens;
    }
    return {};
  }
};

template <class T>
T parse_number(const std::string& token, int line) {
  std::istringstream s(token);
  T value{};
  s >> value;
  if (s.fail() || !s.eof()) throw MeshError(line, "expected a number, got '" + token + "'");
  return value;
}

int parse_count(const std::vector<std::string>& tokens, const std::string& keyword, int line) {
  if (tokens.size() != 2 || tokens[0] != keyword) {
    throw MeshError(line, "expected '" + keyword + " <count>'");
  }
  const int count = parse_number<int>(tokens[1], line);
  if (count < 0) throw MeshError(line, "negative count");
  return count;
}

}  // namespace

Mesh load_mesh(std::string_view text) {
  LineReader reader(text);
  auto header = reader.next();
  if (header.size() != 3 || header[0] != "dim") {
    throw MeshError(reader.line_no, "expected header 'dim <d> <k>'");
  }
  const int line_header = reader.line_no;
  const int d = parse_number<int>(header[1], line_header);
  const int k = parse_number<int>(header[2], line_header);
  if (d != 2 && d != 3) throw MeshError(line_header, "dimension must be 2 or 3");
  if (k < 1) throw MeshError(line_header, "descriptor dimension must be >= 1");

  const int n = parse_count(reader.next(), "nodes", reader.line_no);
  Eigen::MatrixXd nodes(n, d);
  for (int i = 0; i < n; ++i) {
    auto tok = reader.next();
    if (static_cast<int>(tok.size()) != d) {
      throw MeshError(reader.line_no, "node line needs " + std::to_string(d) + " coordinates");
    }
    for (int j = 0; j < d; ++j) nodes(i, j) = parse_number<double>(tok[j], reader.line_no);
  }

  const int m = parse_count(reader.next(), "elements", reader.line_no);
  std::vector<int> elements;
  elements.reserve(static_cast<std::size_t>(m) * (d + 1));
  for (int e = 0; e < m; ++e) {
    auto tok = reader.next();
    if (static_cast<int>(tok.size()) != d + 1) {
      throw MeshError(reader.line_no, "element line needs " + std::to_string(d + 1) + " indices");
    }
    for (const auto& t : tok) {
      const int idx = parse_number<int>(t, reader.line_no);
      if (idx < 0 || idx >= n) {
        throw MeshError(reader.line_no, "dangling node index " + std::to_string(idx) + " (mesh has " +
                                            std::to_string(n) + " nodes)");
      }
      elements.push_back(idx);
    }
  }

  std::vector<BoundaryFacet> facets;
  if (auto tok = reader.next(); !tok.empty()) {
    const int b = parse_count(tok, "boundary", reader.line_no);
    for (int f = 0; f < b; ++f) {
      auto line = reader.next();
      if (static_cast<int>(line.size()) != d + 1) {
        throw MeshError(reader.line_no, "boundary line needs " + std::to_string(d) + " indices and a marker");
      }
      BoundaryFacet facet;
      for (int j = 0; j < d; ++j) {
        const int idx = parse_number<int>(line[j], reader.line_no);
        if (idx < 0 || idx >= n) {
          throw MeshError(reader.line_no, "dangling node index " + std::to_string(idx));
        }
        facet.nodes.push_back(idx);
      }
      try {
        facet.marker = parse_marker(line[d]);
      } catch (const std::invalid_argument& e) {
        throw MeshError(reader.line_no, e.what());
      }
      facets.push_back(std::move(facet));
    }
    if (auto extra = reader.next(); !extra.empty()) {
      throw MeshError(reader.line_no, "unexpected content after boundary block");
    }
  }
  return Mesh(d, k, std::move(nodes), std::move(elements), std::move(facets));
}

Mesh load_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MeshError(0, "cannot open mesh file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return load_mesh(buffer.str());
}

std::string write_mesh(const Mesh& mesh) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "dim " << mesh.dim() << ' ' << mesh.descriptor_dim() << '\n';
  out << "nodes " << mesh.num_nodes() << '\n';
  for (int a = 0; a < mesh.num_nodes(); ++a) {
    for (int j = 0; j < mesh.dim(); ++j) out << (j ? " " : "") << mesh.nodes()(a, j);
    out << '\n';
  }
  out << "elements " << mesh.num_elements() << '\n';
  for (int K = 0; K < mesh.num_elements(); ++K) {
    auto conn = mesh.element(K);
    for (std::size_t j = 0; j < conn.size(); ++j) out << (j ? " " : "") << conn[j];
    out << '\n';
  }
  out << "boundary " << mesh.facets().size() << '\n';
  for (const auto& f : mesh.facets()) {
    for (int a : f.nodes) out << a << ' ';
    out << to_string(f.marker) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------

Eigen::VectorXd shape_gradient(const Mesh& mesh, int K, int a) {
  const int local = mesh.local_index(K, a);
  if (local < 0) {
    throw std::invalid_argument("node " + std::to_string(a) + " is not a vertex of element " +
                                std::to_string(K));
  }
  return mesh.gradients(K).row(local).transpose();
}

ShapeFunction shape_function(const Mesh& mesh, int K, int a) {
  ShapeFunction f;
  f.element = K;
  f.node = a;
  f.gradient = shape_gradient(mesh, K, a);
  // N_a(x_0) = delta_{a, first vertex}.
  const int first = mesh.element(K)[0];
  f.constant = (a == first ? 1.0 : 0.0) - f.gradient.dot(mesh.node(first));
  return f;
}

NodalCoefficients lumped_coefficients(const Mesh& mesh, double rho, double rho_bar, double eta) {
  if (!(rho > 0.0)) throw std::invalid_argument("density rho must be positive");
  if (!(rho_bar > 0.0)) throw std::invalid_argument("substructural inertia rho_bar must be positive");
  if (!(eta >= 0.0)) throw std::invalid_argument("dissipation eta must be nonnegative");
  const int n = mesh.num_nodes();
  const int npe = mesh.nodes_per_element();
  NodalCoefficients c;
  c.mass.assign(n, 0.0);
  c.inertia.assign(n, 0.0);
  c.dissipation.assign(n, 0.0);
  c.weight.assign(n, 0.0);
  c.element_mass.resize(static_cast<std::size_t>(mesh.num_elements()) * npe);
  c.element_inertia.resize(c.element_mass.size());
  c.element_dissipation.resize(c.element_mass.size());
  for (int K = 0; K < mesh.num_elements(); ++K) {
    const double share = mesh.volume(K) / npe;
    auto conn = mesh.element(K);
    for (int i = 0; i < npe; ++i) {
      const std::size_t slot = static_cast<std::size_t>(K) * npe + i;
      c.element_mass[slot] = rho * share;
      c.element_inertia[slot] = rho_bar * share;
      c.element_dissipation[slot] = eta * share;
      const int a = conn[i];
      c.mass[a] += rho * share;
      c.inertia[a] += rho_bar * share;
      c.dissipation[a] += eta * share;
      c.weight[a] += share;
    }
  }
  return c;
}

double grad_bound_constant(const Mesh& mesh) {
  double c = 0.0;
  for (int K = 0; K < mesh.num_elements(); ++K) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(mesh.gradients(K));
    c = std::max(c, svd.singularValues()(0));
  }
  return c;
}

SimplexRule vertex_rule(int dim) {
  SimplexRule rule;
  for (int i = 0; i <= dim; ++i) {
    rule.points.push_back(Eigen::VectorXd::Unit(dim + 1, i));
    rule.weights.push_back(1.0 / (dim + 1));
  }
  return rule;
}

SimplexRule degree2_rule(int dim) {
  SimplexRule rule;
  if (dim == 2) {
    for (int i = 0; i < 3; ++i) {
      Eigen::VectorXd p = Eigen::VectorXd::Constant(3, 1.0 / 6.0);
      p(i) = 2.0 / 3.0;
      rule.points.push_back(p);
      rule.weights.push_back(1.0 / 3.0);
    }
  } else if (dim == 3) {
    const double alpha = 0.5854101966249685;
    const double beta = 0.1381966011250105;
    for (int i = 0; i < 4; ++i) {
      Eigen::VectorXd p = Eigen::VectorXd::Constant(4, beta);
      p(i) = alpha;
      rule.points.push_back(p);
      rule.weights.push_back(0.25);
    }
  } else {
    throw std::invalid_argument("degree2_rule: dimension must be 2 or 3");
  }
  return rule;
}

}  // namespace cbvi
