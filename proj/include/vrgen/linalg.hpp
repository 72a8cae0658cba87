#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace vrgen {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
double squared_distance(std::span<const double> a, std::span<const double> b);
// Cosine similarity; 0 when either vector is zero.
double cosine(std::span<const double> a, std::span<const double> b);

// Numerically stable softmax; writes into out (may alias logits).
void softmax(std::span<const double> logits, std::span<double> out);
Vector softmax(std::span<const double> logits);
double log_sum_exp(std::span<const double> logits);

// out = m * x  (m: rows x cols, x: cols)
void matvec(const Matrix& m, std::span<const double> x, std::span<double> out);
// out += m^T * x  (x: rows, out: cols)
void matvec_transpose_add(const Matrix& m, std::span<const double> x, std::span<double> out);

bool all_finite(std::span<const double> values);

// Deterministic helpers over a 64-bit engine. The standard distributions are
// implementation-defined, so these keep seeded results stable across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next();
  double uniform();                        // [0, 1)
  double uniform(double lo, double hi);    // [lo, hi)
  std::size_t below(std::size_t n);        // [0, n)
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace vrgen
