#include "cbvi/material.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace cbvi {

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

void require_symmetric(const Eigen::MatrixXd& A, const char* what) {
  if (A.rows() != A.cols()) throw std::invalid_argument(std::string(what) + " must be square");
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument(std::string(what) + " must be symmetric");
  }
}

Eigen::VectorXd uniform_vector(std::mt19937_64& rng, int n, double box) {
  std::uniform_real_distribution<double> dist(-box, box);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = dist(rng);
  return v;
}

}  // namespace

ElasticForm::ElasticForm(int dim, int descriptor_dim, Eigen::MatrixXd Q)
    : dim_(dim), k_(descriptor_dim), Q_(std::move(Q)) {
  const int n = dim * dim + descriptor_dim + descriptor_dim * dim;
  if (Q_.rows() != n || Q_.cols() != n) {
    throw std::invalid_argument("elastic matrix Q must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  require_symmetric(Q_, "elastic matrix Q");
  Q_ = 0.5 * (Q_ + Q_.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Q_, Eigen::EigenvaluesOnly);
  lambda_ = eig.eigenvalues().minCoeff();
  Lambda_ = eig.eigenvalues().maxCoeff();
}

ElasticForm ElasticForm::isotropic(int dim, int descriptor_dim, double lambda, double mu, double kappa,
                                   double beta) {
  const int d2 = dim * dim;
  const int n = d2 + descriptor_dim + descriptor_dim * dim;
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n);
  Q.topLeftCorner(d2, d2).diagonal().setConstant(mu);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) Q(i * dim + i, j * dim + j) += 0.5 * lambda;
  }
  Q.block(d2, d2, descriptor_dim, descriptor_dim).diagonal().setConstant(kappa);
  Q.bottomRightCorner(descriptor_dim * dim, descriptor_dim * dim).diagonal().setConstant(beta);
  return ElasticForm(dim, descriptor_dim, std::move(Q));
}

Eigen::VectorXd pack_strain(const Eigen::MatrixXd& U, const Eigen::VectorXd& nu, const Eigen::MatrixXd& N) {
  const int d = static_cast<int>(U.rows());
  const int k = static_cast<int>(nu.size());
  Eigen::VectorXd xi(d * d + k + k * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) xi(i * d + j) = U(i, j);
  xi.segment(d * d, k) = nu;
  for (int a = 0; a < k; ++a)
    for (int j = 0; j < d; ++j) xi(d * d + k + a * d + j) = N(a, j);
  return xi;
}

ElasticPartials elastic_partials(const ElasticForm& e, const Eigen::MatrixXd& U, const Eigen::VectorXd& nu,
                                 const Eigen::MatrixXd& N) {
  const int d = e.dim();
  const int k = e.descriptor_dim();
  if (U.rows() != d || U.cols() != d || nu.size() != k || N.rows() != k || N.cols() != d) {
    throw std::invalid_argument("elastic_partials: argument dimensions do not match (d, k)");
  }
  const Eigen::VectorXd grad = 2.0 * (e.matrix() * pack_strain(U, nu, N));
  ElasticPartials p;
  p.d_F.resize(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) p.d_F(i, j) = grad(i * d + j);
  p.d_nu = grad.segment(d * d, k);
  p.d_N.resize(k, d);
  for (int a = 0; a < k; ++a)
    for (int j = 0; j < d; ++j) p.d_N(a, j) = grad(d * d + k + a * d + j);
  return p;
}

// ---------------------------------------------------------------------------

ExternalPotential::ExternalPotential(Eigen::MatrixXd W, Eigen::VectorXd g, double offset)
    : W_(std::move(W)), g_(std::move(g)), w0_(offset) {
  if (W_.rows() != g_.size()) throw std::invalid_argument("external potential: W and g sizes differ");
  require_symmetric(W_, "external potential W");
  if (!std::isfinite(w0_)) throw std::invalid_argument("external potential offset must be finite");
}

ExternalPotential ExternalPotential::zero(int n) {
  return ExternalPotential(Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n), 0.0);
}

ExternalPotential ExternalPotential::with_nonnegative_offset(Eigen::MatrixXd W, Eigen::VectorXd g, double box,
                                                             std::uint64_t seed, int samples) {
  ExternalPotential trial(W, g, 0.0);
  const int n = trial.size();
  double lowest = 0.0;
  auto visit = [&](const Eigen::VectorXd& z) { lowest = std::min(lowest, trial(z)); };
  std::mt19937_64 rng(seed);
  for (int s = 0; s < samples; ++s) visit(uniform_vector(rng, n, box));
  if (n <= 12) {
    for (long mask = 0; mask < (1L << n); ++mask) {
      Eigen::VectorXd z(n);
      for (int i = 0; i < n; ++i) z(i) = (mask >> i) & 1 ? box : -box;
      visit(z);
    }
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(trial.hessian());
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() && n > 0) {
    const Eigen::VectorXd z = ldlt.solve(-trial.linear());
    if (z.allFinite() && z.cwiseAbs().maxCoeff() <= box) visit(z);
  }
  return ExternalPotential(std::move(W), std::move(g), -lowest);
}

double ExternalPotential::growth_constant() const {
  double wnorm = 0.0;
  if (W_.size() > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(W_, Eigen::EigenvaluesOnly);
    wnorm = eig.eigenvalues().cwiseAbs().maxCoeff();
  }
  return std::max(wnorm, g_.norm());
}

TractionField TractionField::uniform(const Mesh& mesh, const Eigen::VectorXd& t) {
  TractionField field;
  for (std::size_t f = 0; f < mesh.facets().size(); ++f) {
    if (mesh.facets()[f].marker == BoundaryMarker::Traction) field.values[static_cast<int>(f)] = t;
  }
  return field;
}

Eigen::VectorXd TractionField::on(int facet, int dim) const {
  auto it = values.find(facet);
  return it == values.end() ? Eigen::VectorXd::Zero(dim) : it->second;
}

// ---------------------------------------------------------------------------

GeneralChi tanh_chi(int k, double a, double b, double c, double gamma, double xi) {
  GeneralChi chi;
  chi.value = [a, b, c, k](const Eigen::VectorXd& nu, const Eigen::VectorXd& z) {
    double v = 0.5 * a * z.squaredNorm() + c * k;
    for (int i = 0; i < z.size(); ++i) {
      v += b * std::log(std::cosh(z(i))) + c * std::sin(nu(i)) * std::tanh(z(i));
    }
    return v;
  };
  chi.d_nu = [c](const Eigen::VectorXd& nu, const Eigen::VectorXd& z) {
    Eigen::VectorXd g(z.size());
    for (int i = 0; i < z.size(); ++i) g(i) = c * std::cos(nu(i)) * std::tanh(z(i));
    return g;
  };
  chi.d_rate = [a, b, c](const Eigen::VectorXd& nu, const Eigen::VectorXd& z) {
    Eigen::VectorXd g(z.size());
    for (int i = 0; i < z.size(); ++i) {
      const double sech = 1.0 / std::cosh(z(i));
      g(i) = a * z(i) + b * std::tanh(z(i)) + c * std::sin(nu(i)) * sech * sech;
    }
    return g;
  };
  chi.gamma = gamma;
  chi.xi = xi;
  chi.form = "tanh";
  chi.params = {a, b, c};
  return chi;
}

bool is_scalar_quadratic(const ChiModel& chi) { return std::holds_alternative<ScalarQuadratic>(chi); }

bool is_quadratic(const ChiModel& chi) { return !std::holds_alternative<GeneralChi>(chi); }

std::string_view chi_kind(const ChiModel& chi) {
  if (std::holds_alternative<ScalarQuadratic>(chi)) return "scalar";
  if (std::holds_alternative<MatrixQuadratic>(chi)) return "matrix";
  return "general";
}

ChiConstants chi_constants(const ChiModel& chi) {
  if (const auto* s = std::get_if<ScalarQuadratic>(&chi)) return {s->rho_bar, s->rho_bar};
  if (const auto* m = std::get_if<MatrixQuadratic>(&chi)) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m->omega + m->omega.transpose()), Eigen::EigenvaluesOnly);
    return {eig.eigenvalues().minCoeff(), eig.eigenvalues().cwiseAbs().maxCoeff()};
  }
  const auto& g = std::get<GeneralChi>(chi);
  return {g.gamma, g.xi};
}

ChiPartials chi_partials(const ChiModel& chi, const Eigen::VectorXd& nu, const Eigen::VectorXd& rate) {
  if (nu.size() != rate.size()) throw std::invalid_argument("chi_partials: nu and rate sizes differ");
  ChiPartials p;
  const Eigen::Index k = nu.size();
  if (const auto* s = std::get_if<ScalarQuadratic>(&chi)) {
    p.value = 0.5 * s->rho_bar * rate.squaredNorm();
    p.d_nu = Eigen::VectorXd::Zero(k);
    p.d_rate = s->rho_bar * rate;
  } else if (const auto* m = std::get_if<MatrixQuadratic>(&chi)) {
    if (m->omega.rows() != k) throw std::invalid_argument("chi_partials: Omega does not match k");
    p.d_rate = m->omega * rate;
    p.value = 0.5 * rate.dot(p.d_rate);
    p.d_nu = Eigen::VectorXd::Zero(k);
  } else {
    const auto& g = std::get<GeneralChi>(chi);
    p.value = g.value(nu, rate);
    p.d_nu = g.d_nu(nu, rate);
    p.d_rate = g.d_rate(nu, rate);
    if (p.d_nu.size() != k || p.d_rate.size() != k) {
      throw std::invalid_argument("chi_partials: general chi returned wrong dimension");
    }
  }
  return p;
}

Eigen::MatrixXd chi_hessian(const ChiModel& chi, const Eigen::VectorXd& nu, const Eigen::VectorXd& rate) {
  const int k = static_cast<int>(nu.size());
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(2 * k, 2 * k);
  if (const auto* s = std::get_if<ScalarQuadratic>(&chi)) {
    H.bottomRightCorner(k, k).diagonal().setConstant(s->rho_bar);
    return H;
  }
  if (const auto* m = std::get_if<MatrixQuadratic>(&chi)) {
    H.bottomRightCorner(k, k) = m->omega;
    return H;
  }
  const double h = 1e-5;
  for (int j = 0; j < 2 * k; ++j) {
    Eigen::VectorXd n1 = nu, n2 = nu, r1 = rate, r2 = rate;
    if (j < k) {
      n1(j) += h;
      n2(j) -= h;
    } else {
      r1(j - k) += h;
      r2(j - k) -= h;
    }
    const auto p1 = chi_partials(chi, n1, r1);
    const auto p2 = chi_partials(chi, n2, r2);
    H.col(j).head(k) = (p1.d_nu - p2.d_nu) / (2 * h);
    H.col(j).tail(k) = (p1.d_rate - p2.d_rate) / (2 * h);
  }
  return 0.5 * (H + H.transpose());
}

// ---------------------------------------------------------------------------

bool AssumptionReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const AssumptionCheck& c) { return c.pass; });
}

const AssumptionCheck* AssumptionReport::find(std::string_view name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

double monotonicity_window(double gamma, double xi) { return 2.0 * gamma / (2.0 * xi + gamma); }

double growth_constant_xi2(double chi0, double grad0, double gamma, double xi) {
  const double derivative = std::sqrt(2.0) * std::max(grad0, xi);
  const double upper = std::max(chi0 + grad0, 0.5 * (grad0 + xi));
  double lower = 0.0;
  if (gamma > 0.0) {
    lower = std::max(2.0 * grad0 * grad0 / gamma + 0.5 * grad0 + std::abs(chi0),
                     2.0 * xi * xi / gamma + 0.5 * grad0 + 0.5 * xi);
  }
  return std::max({derivative, upper, lower});
}

AssumptionReport validate_assumptions(const Material& material, const Mesh* mesh,
                                      const ValidationOptions& options) {
  AssumptionReport report;
  std::mt19937_64 rng(options.seed);
  const int d = material.dim();
  const int k = material.descriptor_dim();
  const auto& e = material.elastic;

  // (A1)
  report.lambda = e.lower_bound();
  report.Lambda = e.upper_bound();
  {
    AssumptionCheck c{"A1 coercivity", report.lambda > 0.0,
                      "lambda=" + fmt(report.lambda) + " Lambda=" + fmt(report.Lambda)};
    report.checks.push_back(c);
    bool sandwich = true;
    for (int s = 0; s < options.samples; ++s) {
      const Eigen::VectorXd xi = uniform_vector(rng, e.size(), options.box);
      const double val = e(xi);
      const double n2 = xi.squaredNorm();
      const double tol = 1e-9 * (1.0 + std::abs(report.Lambda) * n2);
      if (val < report.lambda * n2 - tol || val > report.Lambda * n2 + tol) sandwich = false;
    }
    report.checks.push_back({"A1 bounds", sandwich, "lambda|xi|^2 <= e(xi) <= Lambda|xi|^2 on samples"});
  }

  // (A2)
  {
    const auto& w = material.external;
    report.xi1 = w.growth_constant();
    bool growth = w.size() == d + k;
    bool nonneg = true;
    for (int s = 0; s < options.samples && growth; ++s) {
      const Eigen::VectorXd z = uniform_vector(rng, d + k, options.box);
      const double bound = report.xi1 * (1.0 + z.head(d).norm() + z.tail(k).norm());
      if (w.gradient(z).norm() > bound + 1e-9) growth = false;
      if (w(z) < -1e-12) nonneg = false;
    }
    report.checks.push_back({"A2 growth", growth, "Xi1=" + fmt(report.xi1)});
    report.checks.push_back({"A2 nonnegativity", nonneg, "w >= 0 on the sampled box, w0=" + fmt(w.offset())});
  }

  // (A3)
  {
    bool finite = true;
    bool placed = true;
    for (const auto& [facet, t] : material.traction.values) {
      if (t.size() != d || !t.allFinite()) finite = false;
      if (mesh) {
        if (facet < 0 || facet >= static_cast<int>(mesh->facets().size()) ||
            mesh->facets()[facet].marker != BoundaryMarker::Traction) {
          placed = false;
        }
      }
    }
    report.checks.push_back({"A3 traction", finite && placed,
                             finite ? (placed ? "finite, on traction facets" : "traction on a non-traction facet")
                                    : "non-finite or misdimensioned traction"});
  }

  report.checks.push_back({"dissipativity", material.eta >= 0.0, "eta=" + fmt(material.eta)});

  // (A4), (A5) and the derived properties of chi.
  const ChiModel& chi = material.chi;
  bool a4 = true;
  bool a5 = true;
  if (const auto* s = std::get_if<ScalarQuadratic>(&chi)) {
    report.gamma = s->rho_bar;
    report.xi = s->rho_bar;
    a5 = s->rho_bar > 0.0;
  } else if (const auto* m = std::get_if<MatrixQuadratic>(&chi)) {
    bool symmetric = m->omega.rows() == k && m->omega.cols() == k &&
                     (m->omega - m->omega.transpose()).cwiseAbs().maxCoeff() <= 1e-12;
    if (symmetric) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m->omega, Eigen::EigenvaluesOnly);
      report.gamma = eig.eigenvalues().minCoeff();
      report.xi = eig.eigenvalues().cwiseAbs().maxCoeff();
    }
    a5 = symmetric && report.gamma > 0.0;
  } else {
    const auto& g = std::get<GeneralChi>(chi);
    report.gamma = g.gamma;
    report.xi = g.xi;
    for (int s = 0; s < g.samples; ++s) {
      const Eigen::VectorXd nu = uniform_vector(rng, k, g.box);
      const Eigen::VectorXd z = uniform_vector(rng, k, g.box);
      const Eigen::MatrixXd H = chi_hessian(chi, nu, z);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> full(H, Eigen::EigenvaluesOnly);
      if (full.eigenvalues().cwiseAbs().maxCoeff() > g.xi + 1e-6) a4 = false;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> rate_block(H.bottomRightCorner(k, k), Eigen::EigenvaluesOnly);
      if (rate_block.eigenvalues().minCoeff() < g.gamma - 1e-6) a5 = false;
      if (g.value(nu, z) < -1e-12) a4 = false;
    }
  }
  report.checks.push_back({"A4 bounded Hessian", a4, "Xi=" + fmt(report.xi)});
  report.checks.push_back({"A5 uniform convexity", a5, "gamma=" + fmt(report.gamma)});

  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(k);
  const auto at0 = chi_partials(chi, zero, zero);
  const double grad0 = std::sqrt(at0.d_nu.squaredNorm() + at0.d_rate.squaredNorm());
  report.xi2 = growth_constant_xi2(at0.value, grad0, report.gamma, report.xi);
  report.t0 = report.gamma > 0.0 ? monotonicity_window(report.gamma, report.xi) : 0.0;

  // Sampled checks of the monotonicity, Lipschitz and growth properties of chi.
  {
    const double box = std::holds_alternative<GeneralChi>(chi) ? std::get<GeneralChi>(chi).box : options.box;
    bool monotone = true;
    bool lipschitz = true;
    bool growth = true;
    for (int s = 0; s < options.samples; ++s) {
      const Eigen::VectorXd nu1 = uniform_vector(rng, k, box);
      const Eigen::VectorXd nu2 = uniform_vector(rng, k, box);
      const Eigen::VectorXd z1 = uniform_vector(rng, k, box);
      const Eigen::VectorXd z2 = uniform_vector(rng, k, box);
      const auto p11 = chi_partials(chi, nu1, z1);
      const auto p12 = chi_partials(chi, nu1, z2);
      const auto p21 = chi_partials(chi, nu2, z1);
      if ((p11.d_rate - p12.d_rate).dot(z1 - z2) < report.gamma * (z1 - z2).squaredNorm() - 1e-9) monotone = false;
      if ((p11.d_rate - p21.d_rate).norm() > report.xi * (nu1 - nu2).norm() + 1e-9) lipschitz = false;
      if ((p11.d_nu - p12.d_nu).norm() > report.xi * (z1 - z2).norm() + 1e-9) lipschitz = false;
      const double n2 = nu1.squaredNorm();
      const double r2 = z1.squaredNorm();
      if (p11.d_nu.norm() + p11.d_rate.norm() > report.xi2 * (1.0 + nu1.norm() + z1.norm()) + 1e-9) growth = false;
      if (p11.value > report.xi2 * (1.0 + n2 + r2) + 1e-9) growth = false;
      if (p11.value < 0.25 * report.gamma * r2 - report.xi2 * (1.0 + n2) - 1e-9) growth = false;
    }
    report.checks.push_back({"chi monotonicity", monotone, "<d_rate chi(nu,z1)-d_rate chi(nu,z2), z1-z2> >= gamma|z1-z2|^2"});
    report.checks.push_back({"chi Lipschitz", lipschitz, "d_rate chi in nu and d_nu chi in rate, constant Xi"});
    report.checks.push_back({"chi growth", growth, "Xi2=" + fmt(report.xi2)});
  }
  return report;
}

}  // namespace cbvi
