#ifndef HYBRIDCAV_QUADRATURE_HPP
#define HYBRIDCAV_QUADRATURE_HPP

// Globally adaptive Gauss-Kronrod (7/15) quadrature.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace hybridcav {

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  int evaluations = 0;
  int intervals = 0;
  bool converged = false;
};

class QuadratureError : public std::runtime_error {
public:
  QuadratureError(const std::string& what, QuadratureResult partial)
      : std::runtime_error(what), partial_(partial) {}
  const QuadratureResult& partial() const { return partial_; }

private:
  QuadratureResult partial_;
};

namespace detail {

inline constexpr std::array<double, 8> kronrod_nodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kronrod_weights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> gauss_weights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& other) const { return error < other.error; }
};

template <typename F>
Segment gk15(F&& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = fc * kronrod_weights[7];
  double gauss = fc * gauss_weights[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kronrod_nodes[j];
    const double sum = f(center - dx) + f(center + dx);
    kronrod += kronrod_weights[j] * sum;
    if (j % 2 == 1) gauss += gauss_weights[j / 2] * sum;
  }
  kronrod *= half;
  gauss *= half;
  return {a, b, kronrod, std::abs(kronrod - gauss)};
}

} // namespace detail

// Integrates f over [a, b] until the summed error estimate drops below
// max(abs_tol, rel_tol * |I|). Throws QuadratureError when max_intervals is
// exhausted without meeting the tolerance.
template <typename F>
QuadratureResult integrate(F&& f, double a, double b, double rel_tol = 1e-8,
                           double abs_tol = 0.0, int max_intervals = 2000) {
  QuadratureResult result;
  if (a == b) {
    result.converged = true;
    return result;
  }
  std::priority_queue<detail::Segment> heap;
  heap.push(detail::gk15(f, a, b));
  result.evaluations = 15;
  double total = heap.top().value;
  double error = heap.top().error;
  while (true) {
    const double target = std::max(abs_tol, rel_tol * std::abs(total));
    if (error <= target || (error <= 50.0 * std::numeric_limits<double>::epsilon() * std::abs(total))) {
      result.converged = true;
      break;
    }
    if (static_cast<int>(heap.size()) >= max_intervals) break;
    const detail::Segment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      // interval cannot be split further in floating point
      heap.push(worst);
      break;
    }
    const detail::Segment left = detail::gk15(f, worst.a, mid);
    const detail::Segment right = detail::gk15(f, mid, worst.b);
    result.evaluations += 30;
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  // re-sum to avoid drift from the incremental updates
  total = 0.0;
  error = 0.0;
  result.intervals = static_cast<int>(heap.size());
  while (!heap.empty()) {
    total += heap.top().value;
    error += heap.top().error;
    heap.pop();
  }
  result.value = total;
  result.error_estimate = error;
  if (!result.converged) {
    throw QuadratureError("adaptive quadrature did not converge: error estimate " +
                              std::to_string(error) + " for value " + std::to_string(total),
                          result);
  }
  return result;
}

} // namespace hybridcav

#endif // HYBRIDCAV_QUADRATURE_HPP
