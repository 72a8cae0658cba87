#pragma once

#include <cstddef>
#include <functional>

#include "vrgen/linalg.hpp"

namespace vrgen {

// Objective callback: returns f(x) and writes the gradient into g (pre-sized).
using Objective = std::function<double(const Vector& x, Vector& g)>;

struct LbfgsOptions {
  std::size_t max_iterations = 70;
  std::size_t memory = 10;
  double gradient_tolerance = 1e-6;
  std::size_t max_line_search = 40;
};

struct LbfgsResult {
  Vector x;
  double initial_value = 0.0;
  double value = 0.0;
  double gradient_norm = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

// Limited-memory BFGS with a backtracking Armijo line search. Never accepts a
// step that increases the objective, so value <= initial_value.
LbfgsResult minimize_lbfgs(const Objective& objective, Vector x0, const LbfgsOptions& options = {});

}  // namespace vrgen
