#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "shiftlab/autodiff.hpp"
#include "shiftlab/data.hpp"
#include "shiftlab/layers.hpp"

namespace shiftlab {

struct EvalProtocol {
  std::size_t max_shift_range = 8;   // dy, dx drawn uniformly from [-R, R]
  std::size_t sample_count = 1000;   // first N eligible test samples
  std::size_t per_sample_draws = 1;
  std::uint64_t eval_seed = 9001;
  bool probe_probabilities = false;  // default: pre-softmax logits
};

struct SeedMetrics {
  std::uint64_t seed = 0;
  double mcs = 0.0;
  double ptop1 = 0.0;
  std::size_t pairs = 0;     // (sample, draw) pairs aggregated
  std::size_t excluded = 0;  // undefined cosines (zero vectors)
};

struct InvarianceReport {
  std::vector<SeedMetrics> per_seed;
  double mcs_mean = 0.0, mcs_stderr = 0.0;
  double ptop1_mean = 0.0, ptop1_stderr = 0.0;
  std::size_t sample_count = 0;
  bool untrained_probe = false;
};

// cos(theta) = a.b / (|a| |b|); nullopt when either vector has zero norm.
std::optional<double> mean_cosine_similarity(const std::vector<double>& a,
                                             const std::vector<double>& b);

// Fraction of rows whose argmax class differs (ties -> lowest class index).
double ptop1(const Tensor& original_outputs, const Tensor& translated_outputs);

// One trained model: an architecture plus a parameter snapshot.
struct Model {
  const NetworkSpec* spec = nullptr;
  const ParameterSet* params = nullptr;
  std::uint64_t seed = 0;
  std::string id;
};

// Indices of untranslated test samples classified correctly by every model.
std::vector<std::size_t> common_correct_filter(const std::vector<Model>& models,
                                               const LabeledImages& test);

// Mean and standard error over per-seed metric values.
struct Aggregate {
  double mean = 0.0;
  double stderr_ = 0.0;
};
Aggregate aggregate_over_seeds(const std::vector<double>& per_seed_values);

// Runs the randomized-translation protocol for one architecture over its
// per-seed parameter snapshots. `sample_indices` selects test samples (from
// common_correct_filter); draws are deterministic per eval_seed and shared
// across models so comparisons see identical translations.
InvarianceReport evaluate_invariance(const NetworkSpec& spec,
                                     const std::vector<Model>& seed_models,
                                     const LabeledImages& test,
                                     const std::vector<std::size_t>& sample_indices,
                                     const EvalProtocol& protocol, std::size_t canvas_margin);

}  // namespace shiftlab
