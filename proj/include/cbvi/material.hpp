#pragma once

#include "cbvi/mesh.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace cbvi {

/// Quadratic elastic density e(xi) = xi . Q xi over xi = (vec U, nu, vec N).
/// vec is row-major: U(i, j) sits at i*d + j and N(alpha, j) at alpha*d + j.
class ElasticForm {
 public:
  ElasticForm(int dim, int descriptor_dim, Eigen::MatrixXd Q);

  /// e = mu |U|^2 + lambda/2 (tr U)^2 + kappa |nu|^2 + beta |N|^2
  static ElasticForm isotropic(int dim, int descriptor_dim, double lambda, double mu, double kappa,
                               double beta);

  int dim() const { return dim_; }
  int descriptor_dim() const { return k_; }
  int size() const { return static_cast<int>(Q_.rows()); }
  const Eigen::MatrixXd& matrix() const { return Q_; }

  double operator()(const Eigen::VectorXd& xi) const { return xi.dot(Q_ * xi); }

  double lower_bound() const { return lambda_; }
  double upper_bound() const { return Lambda_; }

 private:
  int dim_;
  int k_;
  Eigen::MatrixXd Q_;
  double lambda_ = 0.0;
  double Lambda_ = 0.0;
};

Eigen::VectorXd pack_strain(const Eigen::MatrixXd& U, const Eigen::VectorXd& nu, const Eigen::MatrixXd& N);

struct ElasticPartials {
  Eigen::MatrixXd d_F;   // d x d
  Eigen::VectorXd d_nu;  // k
  Eigen::MatrixXd d_N;   // k x d
};

ElasticPartials elastic_partials(const ElasticForm& e, const Eigen::MatrixXd& U, const Eigen::VectorXd& nu,
                                 const Eigen::MatrixXd& N);

/// w(z) = 1/2 z.Wz + g.z + w0 with z = (u, nu).
class ExternalPotential {
 public:
  ExternalPotential(Eigen::MatrixXd W, Eigen::VectorXd g, double offset);
  static ExternalPotential zero(int n);
  /// Offset picked so that w >= 0 at the sampled points of [-box, box]^n.
  static ExternalPotential with_nonnegative_offset(Eigen::MatrixXd W, Eigen::VectorXd g, double box,
                                                   std::uint64_t seed, int samples = 2000);

  int size() const { return static_cast<int>(g_.size()); }
  const Eigen::MatrixXd& hessian() const { return W_; }
  const Eigen::VectorXd& linear() const { return g_; }
  double offset() const { return w0_; }

  double operator()(const Eigen::VectorXd& z) const { return 0.5 * z.dot(W_ * z) + g_.dot(z) + w0_; }
  Eigen::VectorXd gradient(const Eigen::VectorXd& z) const { return W_ * z + g_; }
  /// Xi_1 with |grad w(u, nu)| <= Xi_1 (1 + |u| + |nu|).
  double growth_constant() const;

 private:
  Eigen::MatrixXd W_;
  Eigen::VectorXd g_;
  double w0_;
};

/// Constant traction per traction-marked facet, keyed by facet index.
struct TractionField {
  std::map<int, Eigen::VectorXd> values;

  /// The same vector on every traction facet of the mesh.
  static TractionField uniform(const Mesh& mesh, const Eigen::VectorXd& t);
  Eigen::VectorXd on(int facet, int dim) const;
};

struct ScalarQuadratic {
  double rho_bar = 1.0;
};

struct MatrixQuadratic {
  Eigen::MatrixXd omega;
};

/// User-supplied co-energy with declared constants, verified by sampling on [-box, box].
struct GeneralChi {
  using Scalar = std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>;
  using Vector = std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

  Scalar value;
  Vector d_nu;
  Vector d_rate;
  double gamma = 1.0;
  double xi = 1.0;
  double box = 2.0;
  int samples = 200;
  // Named built-in form and its parameters, used for config round-trips.
  std::string form;
  std::vector<double> params;
};

/// chi = a/2 |z|^2 + b sum log cosh z_i + c sum sin(nu_i) tanh(z_i) + c k.
/// Convex in z when a - 0.77 c > 0; Hessian bounded for all arguments.
GeneralChi tanh_chi(int k, double a, double b, double c, double gamma, double xi);

using ChiModel = std::variant<ScalarQuadratic, MatrixQuadratic, GeneralChi>;

bool is_scalar_quadratic(const ChiModel& chi);
bool is_quadratic(const ChiModel& chi);
std::string_view chi_kind(const ChiModel& chi);

struct ChiConstants {
  double gamma = 0.0;  // convexity modulus in the rate
  double xi = 0.0;     // Hessian bound
};

/// Closed form for the quadratic variants, declared values for GeneralChi.
ChiConstants chi_constants(const ChiModel& chi);

struct ChiPartials {
  double value = 0.0;
  Eigen::VectorXd d_nu;
  Eigen::VectorXd d_rate;
};

ChiPartials chi_partials(const ChiModel& chi, const Eigen::VectorXd& nu, const Eigen::VectorXd& rate);

/// Full 2k x 2k Hessian in (nu, rate); finite differences of the gradients for GeneralChi.
Eigen::MatrixXd chi_hessian(const ChiModel& chi, const Eigen::VectorXd& nu, const Eigen::VectorXd& rate);

struct Material {
  ElasticForm elastic;
  ExternalPotential external;
  TractionField traction;
  double rho = 1.0;
  double rho_bar = 1.0;
  double eta = 0.0;
  ChiModel chi = ScalarQuadratic{1.0};

  int dim() const { return elastic.dim(); }
  int descriptor_dim() const { return elastic.descriptor_dim(); }
};

struct AssumptionCheck {
  std::string name;
  bool pass = true;
  std::string detail;
};

struct AssumptionReport {
  double lambda = 0.0;
  double Lambda = 0.0;
  double xi1 = 0.0;
  double gamma = 0.0;
  double xi = 0.0;
  double xi2 = 0.0;
  double t0 = 0.0;  // 2 gamma / (2 Xi + gamma)
  std::vector<AssumptionCheck> checks;

  bool ok() const;
  const AssumptionCheck* find(std::string_view name) const;
};

struct ValidationOptions {
  std::uint64_t seed = 1;
  int samples = 200;
  double box = 2.0;
};

/// Constants of the material model and sampled checks of the standing hypotheses.
/// Never throws on a failed hypothesis; failures are report entries. A mesh, when
/// given, is used to check that traction sits on traction-marked facets.
AssumptionReport validate_assumptions(const Material& material, const Mesh* mesh = nullptr,
                                      const ValidationOptions& options = {});

double monotonicity_window(double gamma, double xi);

/// Xi_2 from Xi and the value and gradient of chi at the origin (Taylor bounds).
double growth_constant_xi2(double chi0, double grad0, double gamma, double xi);

}  // namespace cbvi
