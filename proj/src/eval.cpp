#include "shiftlab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "shiftlab/rng.hpp"
#include "shiftlab/train.hpp"

namespace shiftlab {

std::optional<double> mean_cosine_similarity(const std::vector<double>& a,
                                             const std::vector<double>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("mean_cosine_similarity: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return std::nullopt;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

std::size_t argmax_row(const Tensor& t, std::size_t row) {
  const std::size_t C = t.dim(1);
  std::size_t best = 0;
  for (std::size_t c = 1; c < C; ++c) {
    if (t.at2(row, c) > t.at2(row, best)) best = c;
  }
  return best;
}

}  // namespace

double ptop1(const Tensor& original_outputs, const Tensor& translated_outputs) {
  if (original_outputs.shape() != translated_outputs.shape())
    throw std::invalid_argument("ptop1: output shapes must match");
  const std::size_t n = original_outputs.dim(0);
  if (n == 0) return 0.0;
  std::size_t changed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (argmax_row(original_outputs, i) != argmax_row(translated_outputs, i)) ++changed;
  }
  return static_cast<double>(changed) / static_cast<double>(n);
}

std::vector<std::size_t> common_correct_filter(const std::vector<Model>& models,
                                               const LabeledImages& test) {
  std::vector<bool> keep(test.count(), true);
  for (const Model& m : models) {
    const Tensor logits = batched_logits(*m.spec, *m.params, test, 64);
    for (std::size_t i = 0; i < test.count(); ++i) {
      if (argmax_row(logits, i) != static_cast<std::size_t>(test.labels[i])) keep[i] = false;
    }
  }
  std::vector<std::size_t> indices;
  for (std::size_t i = 0; i < test.count(); ++i) {
    if (keep[i]) indices.push_back(i);
  }
  return indices;
}

namespace {

// Forward in fixed sub-batches so large sample sets keep a bounded footprint.
Tensor forward_in_chunks(const NetworkSpec& spec, const ParameterSet& params, const Tensor& x) {
  constexpr std::size_t kChunk = 128;
  const std::size_t n = x.dim(0);
  const std::size_t plane = x.dim(1) * x.dim(2) * x.dim(3);
  Tensor logits({n, spec.class_count});
  for (std::size_t begin = 0; begin < n; begin += kChunk) {
    const std::size_t end = std::min(n, begin + kChunk);
    Tensor chunk({end - begin, x.dim(1), x.dim(2), x.dim(3)},
                 std::vector<double>(x.data() + begin * plane, x.data() + end * plane));
    const Tensor out = forward(spec, params, chunk);
    std::copy_n(out.data(), out.size(), logits.data() + begin * spec.class_count);
  }
  return logits;
}

Tensor softmax_rows(const Tensor& logits) {
  const std::size_t n = logits.dim(0), C = logits.dim(1);
  Tensor out({n, C});
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = logits.data() + i * C;
    double m = row[0];
    for (std::size_t c = 1; c < C; ++c) m = std::max(m, row[c]);
    double z = 0.0;
    for (std::size_t c = 0; c < C; ++c) z += std::exp(row[c] - m);
    for (std::size_t c = 0; c < C; ++c) out.at2(i, c) = std::exp(row[c] - m) / z;
  }
  return out;
}

}  // namespace

Aggregate aggregate_over_seeds(const std::vector<double>& per_seed_values) {
  Aggregate agg;
  const std::size_t n = per_seed_values.size();
  if (n == 0) return agg;
  agg.mean = std::accumulate(per_seed_values.begin(), per_seed_values.end(), 0.0) /
             static_cast<double>(n);
  if (n > 1) {
    double ss = 0.0;
    for (double v : per_seed_values) ss += (v - agg.mean) * (v - agg.mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    agg.stderr_ = sd / std::sqrt(static_cast<double>(n));
  }
  return agg;
}

InvarianceReport evaluate_invariance(const NetworkSpec& spec,
                                     const std::vector<Model>& seed_models,
                                     const LabeledImages& test,
                                     const std::vector<std::size_t>& sample_indices,
                                     const EvalProtocol& protocol, std::size_t canvas_margin) {
  if (protocol.max_shift_range > canvas_margin)
    throw std::invalid_argument("evaluate_invariance: shift range exceeds the canvas margin");
  const std::size_t C = test.images.dim(1), H = test.images.dim(2), W = test.images.dim(3);
  const std::size_t plane = C * H * W;

  std::vector<std::size_t> selected = sample_indices;
  if (selected.size() > protocol.sample_count) selected.resize(protocol.sample_count);

  InvarianceReport report;
  report.sample_count = selected.size();
  if (selected.empty()) return report;

  // originals once: (n, C, H, W) batch of the selected samples
  Tensor originals({selected.size(), C, H, W});
  for (std::size_t i = 0; i < selected.size(); ++i) {
    std::copy_n(test.images.data() + selected[i] * plane, plane, originals.data() + i * plane);
  }

  // one translated batch per draw round; draws are deterministic per
  // (eval_seed, pair index) and identical for every model
  const std::size_t draws = std::max<std::size_t>(1, protocol.per_sample_draws);
  std::vector<Tensor> translated;
  translated.reserve(draws);
  for (std::size_t d = 0; d < draws; ++d) {
    Tensor batch({selected.size(), C, H, W});
    for (std::size_t i = 0; i < selected.size(); ++i) {
      Tensor one({1, C, H, W}, std::vector<double>(test.images.data() + selected[i] * plane,
                                                   test.images.data() + (selected[i] + 1) * plane));
      const Translation u = translation_draw(protocol.eval_seed, d * selected.size() + i,
                                             protocol.max_shift_range);
      const Tensor moved = translate2d(one, u);
      std::copy_n(moved.data(), plane, batch.data() + i * plane);
    }
    translated.push_back(std::move(batch));
  }

  std::vector<double> mcs_values, ptop1_values;
  for (const Model& model : seed_models) {
    Tensor logits_orig = forward_in_chunks(spec, *model.params, originals);
    if (protocol.probe_probabilities) logits_orig = softmax_rows(logits_orig);
    double mcs_sum = 0.0;
    std::size_t mcs_n = 0, excluded = 0, changed = 0, total = 0;
    for (std::size_t d = 0; d < draws; ++d) {
      Tensor logits_tr = forward_in_chunks(spec, *model.params, translated[d]);
      if (protocol.probe_probabilities) logits_tr = softmax_rows(logits_tr);
      const std::size_t Cc = logits_orig.dim(1);
      for (std::size_t i = 0; i < selected.size(); ++i) {
        std::vector<double> a(logits_orig.data() + i * Cc, logits_orig.data() + (i + 1) * Cc);
        std::vector<double> b(logits_tr.data() + i * Cc, logits_tr.data() + (i + 1) * Cc);
        const std::optional<double> cosine = mean_cosine_similarity(a, b);
        if (cosine) {
          mcs_sum += *cosine;
          ++mcs_n;
        } else {
          ++excluded;
        }
        if (argmax_row(logits_orig, i) != argmax_row(logits_tr, i)) ++changed;
        ++total;
      }
    }
    SeedMetrics sm;
    sm.seed = model.seed;
    sm.mcs = mcs_n > 0 ? mcs_sum / static_cast<double>(mcs_n) : 0.0;
    sm.ptop1 = total > 0 ? static_cast<double>(changed) / static_cast<double>(total) : 0.0;
    sm.pairs = total;
    sm.excluded = excluded;
    report.per_seed.push_back(sm);
    mcs_values.push_back(sm.mcs);
    ptop1_values.push_back(sm.ptop1);
  }

  const Aggregate mcs_agg = aggregate_over_seeds(mcs_values);
  const Aggregate pt_agg = aggregate_over_seeds(ptop1_values);
  report.mcs_mean = mcs_agg.mean;
  report.mcs_stderr = mcs_agg.stderr_;
  report.ptop1_mean = pt_agg.mean;
  report.ptop1_stderr = pt_agg.stderr_;
  return report;
}

}  // namespace shiftlab
