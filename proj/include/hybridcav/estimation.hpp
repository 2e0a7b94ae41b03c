#ifndef HYBRIDCAV_ESTIMATION_HPP
#define HYBRIDCAV_ESTIMATION_HPP

// Shared fitting kernel: bounded Levenberg-Marquardt, closed-form linear
// regression, peak/decay model fits, and a grid-then-simplex global search.

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hybridcav {

enum class ModelId {
  lorentzian,
  exponential,
  biexponential,
  linear,
  two_pulse_echo,
  three_pulse_echo,
  joint_diffusion,
  saturation,
  geometry,
  detuning,
};

std::string to_string(ModelId id);

struct FitResult {
  ModelId model_id = ModelId::linear;
  std::vector<std::string> names;
  Eigen::VectorXd parameters;
  Eigen::VectorXd uncertainties;  // one standard error per parameter
  Eigen::MatrixXd covariance;
  double residual_rms = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<bool> boundary_flags;
  // fit-specific diagnostics
  bool low_confidence = false;  // e.g. Lorentzian span narrower than the line
  bool degenerate = false;      // e.g. biexponential rates indistinguishable
  std::string message;

  double value(const std::string& name) const;
  double error(const std::string& name) const;
  int index_of(const std::string& name) const;
};

// ---------------------------------------------------------------------------
// Bounded nonlinear least squares

using ResidualFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct LeastSquaresOptions {
  int max_iterations = 500;
  double relative_tolerance = 1e-14;  // on the sum of squares
  double gradient_tolerance = 1e-12;  // scaled gradient infinity norm
  double jacobian_step = 1e-7;        // relative central-difference step
  double covariance_step = 1e-5;      // relative step for the final Hessian
  // typical magnitude per parameter for finite-difference steps; empty means |x0| (or 1 where x0 is 0)
  Eigen::VectorXd scale;
};

struct LeastSquaresResult {
  Eigen::VectorXd x;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd covariance;  // s^2 (J^T J)^-1 at the optimum
  double sum_of_squares = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<bool> at_bound;
};

// Minimises ||residual(x)||^2 inside [lower, upper] (componentwise; use
// +/-infinity for unbounded). Steps are projected onto the box.
LeastSquaresResult least_squares(const ResidualFunction& residual, Eigen::VectorXd x0,
                                 const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                 const LeastSquaresOptions& options = {});

// Central-difference Jacobian with per-component step relative_step * max(|x_j|, scale_j).
Eigen::MatrixXd numeric_jacobian(const ResidualFunction& residual, const Eigen::VectorXd& x,
                                 double relative_step, const Eigen::VectorXd& scale);

// s^2 (J^T J)^+ with s^2 = SSR / (m - p); pseudo-inverse for rank-deficient J.
Eigen::MatrixXd gauss_newton_covariance(const Eigen::MatrixXd& jacobian, double sum_of_squares);

// ---------------------------------------------------------------------------
// Model fits

// f(x) = A (G/2)^2 / ((x - x0)^2 + (G/2)^2) + c ; parameters center, fwhm, amplitude, offset.
double lorentzian(double x, double center, double fwhm, double amplitude, double offset);
FitResult fit_lorentzian(std::span<const double> x, std::span<const double> y,
                         std::span<const double> weights = {});

// y = A exp(-r t) ; parameters amplitude, rate.
FitResult fit_exponential(std::span<const double> t, std::span<const double> y,
                          std::span<const double> weights = {});

// y = A1 exp(-r1 t) + A2 exp(-r2 t) with r1 > r2 ; parameters A1, r1, A2, r2.
FitResult fit_biexponential(std::span<const double> t, std::span<const double> y,
                            std::span<const double> weights = {});

// Ordinary least squares y = slope x + intercept with standard errors.
FitResult fit_linear(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------------------------
// Derivative-free search

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::Index size() const { return lower.size(); }
  bool contains(const Eigen::VectorXd& x) const;
  Eigen::VectorXd clamp(Eigen::VectorXd x) const;
};

struct SimplexOptions {
  double relative_tolerance = 1e-10;  // spread of objective values over the simplex
  double absolute_tolerance = 0.0;
  int max_iterations = 500;
  double size_tolerance = 1e-13;  // simplex extent relative to the box width
};

struct SearchResult {
  Eigen::VectorXd argmin;
  double value = std::numeric_limits<double>::infinity();
  std::vector<double> trace;  // best value after each simplex iteration
  Eigen::VectorXd grid_argmin;
  double grid_value = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  std::vector<bool> at_bound;
};

// Nelder-Mead (reflect/expand/contract/shrink) confined to the box.
SearchResult nelder_mead(const Objective& objective, const Eigen::VectorXd& start,
                         const Eigen::VectorXd& step, const Box& box, const SimplexOptions& options = {});

// Exhaustive grid over the box (counts per axis; count 1 evaluates the
// midpoint), deterministic argmin with lexicographic tie-break, then
// Nelder-Mead from the best node with a one-cell initial simplex. The grid
// stage may be split over `workers` threads; the result does not depend on it.
SearchResult grid_then_local(const Objective& objective, const Box& box,
                             const std::vector<int>& grid_counts, const SimplexOptions& options = {},
                             int workers = 1);

} // namespace hybridcav

#endif // HYBRIDCAV_ESTIMATION_HPP
