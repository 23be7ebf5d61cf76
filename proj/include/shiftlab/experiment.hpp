#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shiftlab/data.hpp"
#include "shiftlab/eval.hpp"
#include "shiftlab/layers.hpp"
#include "shiftlab/signal.hpp"
#include "shiftlab/train.hpp"

namespace shiftlab {

// ---------------------------------------------------------------------------
// Flat dotted-key configuration ("train.batch_size=128"). Lines starting with
// '#' are comments; later assignments win; canonical form is sorted.
// ---------------------------------------------------------------------------
class KeyValueConfig {
 public:
  static KeyValueConfig parse_text(const std::string& text);
  static KeyValueConfig parse_file(const std::string& path);

  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::uint64_t> get_u64_list(const std::string& key,
                                          const std::vector<std::uint64_t>& fallback) const;
  std::vector<std::size_t> get_size_list(const std::string& key,
                                         const std::vector<std::size_t>& fallback) const;

  // "key=value" strings, e.g. from command-line overrides.
  void apply_override(const std::string& assignment);

  std::string canonical_text() const;
  std::uint64_t hash() const;  // FNV-1a over the canonical text
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

// ---------------------------------------------------------------------------
// Architecture description: three (or more) conv blocks, each
// conv(3x3, stride 1) + ReLU + optional pooling, optionally anti-aliased
// (dense pool + strided blur), then either GAP + dense or flatten + dense.
// Pool grammar: "max:2x2:s2", "avg:3x3:s1", "none".
// ---------------------------------------------------------------------------
struct PoolSetting {
  enum class Kind { None, Max, Avg };
  Kind kind = Kind::None;
  std::size_t k = 2;
  std::size_t s = 1;
};

PoolSetting parse_pool(const std::string& text);
std::string pool_to_string(const PoolSetting& pool);

struct ArchitectureConfig {
  std::vector<std::size_t> conv_channels = {2, 4, 8};
  std::size_t conv_kernel = 3;
  std::vector<PoolSetting> pools;   // one per conv block
  std::vector<bool> antialias;      // one per conv block
  bool gap = false;
  std::string tag;                  // extra id suffix (e.g. "aug")

  std::size_t subsampling_factor() const;  // product of strides > 1
  std::string id() const;
};

ArchitectureConfig arch_from_config(const KeyValueConfig& cfg);
void arch_to_config(const ArchitectureConfig& arch, KeyValueConfig& cfg);

NetworkSpec build_network(const ArchitectureConfig& arch, std::size_t in_channels,
                          std::size_t canvas, std::size_t class_count);

// The reference three-block architecture with 2x2 max pooling whose stride-2
// layers are switched on one by one, starting at the first block.
ArchitectureConfig pooled_architecture(std::size_t subsampling, std::size_t pool_kernel,
                                       bool antialias, bool gap,
                                       const std::vector<std::size_t>& channels);

// ---------------------------------------------------------------------------
// 1-D analysis: regenerates the worked example tables and diff-checks them
// against embedded expected rows.
// ---------------------------------------------------------------------------
struct AnalyzeExpected {
  Signal1D conv_input;                        // [0,0,0,0,1,2,0,0,0,0]
  Signal1D conv_kernel;                       // [1,0,1]
  std::vector<Signal1D> conv_dense;           // shifts 0..2
  std::vector<Signal1D> conv_strided;         // shifts 0..2, stride 2
  Signal1D subsample_input;                   // 30-sample signal
  std::vector<Signal1D> subsample_rows;       // shifts 0..8, factor 4
  Signal1D homogeneous_input;                 // 20-sample pairwise-constant signal
  std::vector<Signal1D> homogeneous_rows;     // shifts 0..4, factor 2 (printed prefixes)
};

AnalyzeExpected canonical_analyze_expected();

struct AnalyzeResult {
  bool ok = true;
  std::string report;          // stable, byte-identical between runs
  std::string first_mismatch;  // "" when ok
};

AnalyzeResult analyze_1d_against(const AnalyzeExpected& expected);
AnalyzeResult analyze_1d();

// ---------------------------------------------------------------------------
// CSV emission: every file carries '#' provenance comments (resolved config
// and seed list) before the header row.
// ---------------------------------------------------------------------------
void write_csv(const std::string& path, const std::vector<std::string>& comments,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// ---------------------------------------------------------------------------
// Experiment pipeline.
// ---------------------------------------------------------------------------
struct TrainedModel {
  ArchitectureConfig arch;
  NetworkSpec spec;
  std::uint64_t seed = 0;
  ParameterSet params;
  double test_accuracy = 0.0;
  double best_validation_accuracy = 0.0;
  std::size_t epochs_run = 0;
};

struct ExperimentData {
  DatasetSplit split;
  std::string source;
};

// Loads (and pads / limits / augments) the dataset named by the config.
ExperimentData load_experiment_data(const KeyValueConfig& cfg, const std::string& data_dir);

TrainConfig train_config_from(const KeyValueConfig& cfg, std::uint64_t seed);
EvalProtocol eval_protocol_from(const KeyValueConfig& cfg, std::size_t range);

// Trains one architecture for each seed; optionally writes checkpoints and
// per-epoch CSVs under out_dir.
std::vector<TrainedModel> train_grid(const KeyValueConfig& cfg, const ExperimentData& data,
                                     const std::vector<ArchitectureConfig>& archs,
                                     const std::vector<std::uint64_t>& seeds,
                                     const std::string& out_dir, std::ostream& log);

struct RangeReport {
  std::string network_id;
  std::size_t range = 0;
  InvarianceReport report;
};

// Common-correct filtering across every model, then the randomized
// translation protocol per architecture and range.
std::vector<RangeReport> evaluate_grid(const KeyValueConfig& cfg,
                                       const std::vector<TrainedModel>& models,
                                       const ExperimentData& data,
                                       const std::vector<std::size_t>& ranges, std::ostream& log);

// CLI entry points; return a process exit code.
int run_analyze_1d(const std::string& out_dir, std::ostream& out);
int run_train(const KeyValueConfig& cfg, const std::string& data_dir, const std::string& out_dir,
              std::ostream& log);
int run_evaluate(const KeyValueConfig& cfg, const std::string& data_dir,
                 const std::string& out_dir, std::ostream& log);
int run_reproduce(const std::string& table, const std::string& scale,
                  const KeyValueConfig& overrides, const std::string& data_dir,
                  const std::string& out_dir, std::ostream& log);

// Desk/full preset grids used by `reproduce` (exposed for tests).
KeyValueConfig reproduce_config(const std::string& table, const std::string& scale);

}  // namespace shiftlab
