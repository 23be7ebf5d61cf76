#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace shiftlab {

using Signal1D = std::vector<double>;

// Reduced fraction with positive denominator.
struct Rational {
  long long num = 0;
  long long den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool is_integer() const { return den == 1; }
};

Rational make_rational(long long num, long long den);

struct ShiftabilityVerdict {
  bool holds = false;
  Rational scaled_shift;     // u/s
  Signal1D observed_output;  // subsample(translate(input, u), s)
  Signal1D expected_output;  // translate(subsample(input, s), u/s); empty when s does not divide u
};

// Valid-mode sliding cross-correlation:
//   out[j] = sum_k input[j*stride + k] * kernel[k]
// Rejects an empty kernel, a kernel longer than the input, and stride < 1.
Signal1D correlate1d(const Signal1D& input, const Signal1D& kernel, std::size_t stride);

// Keeps input[offset], input[offset+s], ... ; rejects offset >= s.
Signal1D subsample1d(const Signal1D& input, std::size_t s, std::size_t offset);

// True iff filtering commutes with the shift: correlate(translate(I)) equals
// translate(correlate(I)) elementwise at stride 1.
bool check_equivariance(const Signal1D& input, const Signal1D& kernel, int shift);

// Scaled equivariance under subsampling: holds iff s divides u and the
// subsampled translated signal equals the translated subsampled signal.
ShiftabilityVerdict check_shiftability(const Signal1D& input, std::size_t s, int u);

// Mean population variance over aligned non-overlapping windows; a trailing
// partial window is ignored. Zero means fully locally homogeneous at that
// window size. Rejects window < 1 or window > length.
double local_homogeneity(const Signal1D& input, std::size_t window);

// Maximum over integer lags of the cosine similarity between translate(a, L)
// and b. Rejects mismatched lengths; nullopt when either signal is all-zero.
std::optional<double> signal_similarity(const Signal1D& a, const Signal1D& b);

// The lag attaining signal_similarity; ties break toward smallest |L|, then
// the negative lag.
std::optional<int> signal_movement(const Signal1D& a, const Signal1D& b);

}  // namespace shiftlab
