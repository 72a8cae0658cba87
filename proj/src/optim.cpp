#include "vrgen/optim.hpp"

#include <cmath>
#include <deque>

namespace vrgen {

LbfgsResult minimize_lbfgs(const Objective& objective, Vector x0, const LbfgsOptions& options) {
  const std::size_t n = x0.size();
  LbfgsResult result;
  result.x = std::move(x0);
  Vector g(n, 0.0);
  double f = objective(result.x, g);
  result.initial_value = f;

  std::deque<Vector> s_hist, y_hist;
  std::deque<double> rho_hist;
  Vector d(n), x_new(n), g_new(n);
  std::vector<double> alpha(options.memory);

  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    result.gradient_norm = norm2(g);
    if (result.gradient_norm < options.gradient_tolerance) {
      result.converged = true;
      break;
    }
    // Two-loop recursion: d = -H g.
    d = g;
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * dot(s_hist[k], d);
      axpy(-alpha[k], y_hist[k], d);
    }
    if (!s_hist.empty()) {
      const double gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
      for (double& v : d) v *= gamma;
    } else {
      const double scale = 1.0 / std::max(1.0, result.gradient_norm);
      for (double& v : d) v *= scale;
    }
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * dot(y_hist[k], d);
      axpy(alpha[k] - beta, s_hist[k], d);
    }
    for (double& v : d) v = -v;

    double slope = dot(g, d);
    if (slope >= 0.0) {
      // Not a descent direction; restart from steepest descent.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
      slope = -result.gradient_norm * result.gradient_norm;
    }

    double step = 1.0;
    bool accepted = false;
    double f_new = f;
    for (std::size_t ls = 0; ls < options.max_line_search; ++ls) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = result.x[i] + step * d[i];
      f_new = objective(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    Vector s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - result.x[i];
      y[i] = g_new[i] - g[i];
    }
    const double sy = dot(s, y);
    if (sy > 1e-12) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > options.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    result.x.swap(x_new);
    g.swap(g_new);
    f = f_new;
    result.iterations = iter + 1;
  }
  result.value = f;
  result.gradient_norm = norm2(g);
  if (result.gradient_norm < options.gradient_tolerance) result.converged = true;
  return result;
}

}  // namespace vrgen
