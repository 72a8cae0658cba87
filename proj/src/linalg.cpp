#include "vrgen/linalg.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

#include "vrgen/error.hpp"

namespace vrgen {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnreadableFile: return "UnreadableFile";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::UnknownTag: return "UnknownTag";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::DegenerateCorpus: return "DegenerateCorpus";
    case ErrorCode::FormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptySentence: return "EmptySentence";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::EmptyValue: return "EmptyValue";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::UnbalancedParens: return "UnbalancedParens";
    case ErrorCode::RangeRestrictionViolation: return "RangeRestrictionViolation";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::MissingCoreEntity: return "MissingCoreEntity";
    case ErrorCode::UnmappableCluster: return "UnmappableCluster";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::TooFewRules: return "TooFewRules";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double na = norm2(a);
  double nb = norm2(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

void softmax(std::span<const double> logits, std::span<double> out) {
  assert(logits.size() == out.size());
  if (logits.empty()) return;
  double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
}

Vector softmax(std::span<const double> logits) {
  Vector out(logits.size());
  softmax(logits, out);
  return out;
}

double log_sum_exp(std::span<const double> logits) {
  if (logits.empty()) return -std::numeric_limits<double>::infinity();
  double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  return mx + std::log(sum);
}

void matvec(const Matrix& m, std::span<const double> x, std::span<double> out) {
  assert(x.size() == m.cols && out.size() == m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) out[r] = dot(m.row(r), x);
}

void matvec_transpose_add(const Matrix& m, std::span<const double> x, std::span<double> out) {
  assert(x.size() == m.rows && out.size() == m.cols);
  for (std::size_t r = 0; r < m.rows; ++r) axpy(x[r], m.row(r), out);
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

// splitmix64
Rng::Rng(std::uint64_t seed) : state_(seed) {}

std::uint64_t Rng::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::size_t Rng::below(std::size_t n) {
  assert(n > 0);
  return static_cast<std::size_t>(next() % n);
}

double Rng::normal() {
  // Box-Muller; 1 - uniform() keeps the log argument in (0, 1].
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace vrgen
