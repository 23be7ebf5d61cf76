#include "shiftlab/signal.hpp"

#include <cmath>
#include <cstdlib>
#include <numeric>
#include <stdexcept>

#include "shiftlab/tensor.hpp"

namespace shiftlab {

namespace {

bool all_zero(const Signal1D& s) {
  for (double v : s)
    if (v != 0.0) return false;
  return true;
}

double dot(const Signal1D& a, const Signal1D& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

Rational make_rational(long long num, long long den) {
  if (den == 0) throw std::invalid_argument("make_rational: zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const long long g = std::gcd(std::llabs(num), den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  return Rational{num, den};
}

Signal1D correlate1d(const Signal1D& input, const Signal1D& kernel, std::size_t stride) {
  if (kernel.empty()) throw std::invalid_argument("correlate1d: empty kernel");
  if (kernel.size() > input.size())
    throw std::invalid_argument("correlate1d: kernel longer than input");
  if (stride < 1) throw std::invalid_argument("correlate1d: stride must be >= 1");
  const std::size_t out_len = (input.size() - kernel.size()) / stride + 1;
  Signal1D out(out_len, 0.0);
  for (std::size_t j = 0; j < out_len; ++j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < kernel.size(); ++k) acc += input[j * stride + k] * kernel[k];
    out[j] = acc;
  }
  return out;
}

Signal1D subsample1d(const Signal1D& input, std::size_t s, std::size_t offset) {
  if (s < 1) throw std::invalid_argument("subsample1d: factor must be >= 1");
  if (offset >= s) throw std::invalid_argument("subsample1d: offset must be < factor");
  Signal1D out;
  for (std::size_t i = offset; i < input.size(); i += s) out.push_back(input[i]);
  return out;
}

bool check_equivariance(const Signal1D& input, const Signal1D& kernel, int shift) {
  const Signal1D filtered_then_shifted = translate1d(correlate1d(input, kernel, 1), shift);
  const Signal1D shifted_then_filtered = correlate1d(translate1d(input, shift), kernel, 1);
  return filtered_then_shifted == shifted_then_filtered;
}

ShiftabilityVerdict check_shiftability(const Signal1D& input, std::size_t s, int u) {
  ShiftabilityVerdict verdict;
  verdict.scaled_shift = make_rational(u, static_cast<long long>(s));
  verdict.observed_output = subsample1d(translate1d(input, u), s, 0);
  if (verdict.scaled_shift.is_integer()) {
    verdict.expected_output =
        translate1d(subsample1d(input, s, 0), static_cast<int>(verdict.scaled_shift.num));
    verdict.holds = verdict.observed_output == verdict.expected_output;
  }
  return verdict;
}

double local_homogeneity(const Signal1D& input, std::size_t window) {
  if (window < 1) throw std::invalid_argument("local_homogeneity: window must be >= 1");
  if (window > input.size())
    throw std::invalid_argument("local_homogeneity: window larger than signal");
  const std::size_t blocks = input.size() / window;
  double total = 0.0;
  for (std::size_t b = 0; b < blocks; ++b) {
    double mean = 0.0;
    for (std::size_t i = 0; i < window; ++i) mean += input[b * window + i];
    mean /= static_cast<double>(window);
    double var = 0.0;
    for (std::size_t i = 0; i < window; ++i) {
      const double d = input[b * window + i] - mean;
      var += d * d;
    }
    total += var / static_cast<double>(window);
  }
  return total / static_cast<double>(blocks);
}

namespace {

struct BestLag {
  bool found = false;
  double similarity = 0.0;
  int lag = 0;
};

// Scans lags in the order 0, -1, +1, -2, +2, ... so that strict improvement
// implements the smallest-|L|-then-negative tie break.
BestLag best_lag(const Signal1D& a, const Signal1D& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("signal_similarity: signals must have equal lengths");
  BestLag best;
  if (all_zero(a) || all_zero(b)) return best;
  const double norm_b = std::sqrt(dot(b, b));
  const int n = static_cast<int>(a.size());
  for (int mag = 0; mag < n; ++mag) {
    for (int sign : {-1, +1}) {
      if (mag == 0 && sign > 0) continue;
      const int lag = sign * mag;
      const Signal1D shifted = translate1d(a, lag);
      if (all_zero(shifted)) continue;
      const double cosine = dot(shifted, b) / (std::sqrt(dot(shifted, shifted)) * norm_b);
      if (!best.found || cosine > best.similarity) {
        best.found = true;
        best.similarity = cosine;
        best.lag = lag;
      }
    }
  }
  return best;
}

}  // namespace

std::optional<double> signal_similarity(const Signal1D& a, const Signal1D& b) {
  const BestLag best = best_lag(a, b);
  if (!best.found) return std::nullopt;
  return best.similarity;
}

std::optional<int> signal_movement(const Signal1D& a, const Signal1D& b) {
  const BestLag best = best_lag(a, b);
  if (!best.found) return std::nullopt;
  return best.lag;
}

}  // namespace shiftlab
