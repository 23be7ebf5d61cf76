#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shiftlab/autodiff.hpp"
#include "shiftlab/data.hpp"
#include "shiftlab/layers.hpp"

namespace shiftlab {

struct TrainConfig {
  std::size_t batch_size = 128;
  double base_lr = 0.001;          // starting LR, chosen in [0.0001, 0.001] for faithful runs
  double lr_decay_factor = 0.1;    // step-wise decay multiplier
  std::size_t lr_decay_every = 40; // epochs between decay steps
  std::size_t min_epochs = 100;
  std::size_t patience_window = 10;  // improvement lookback after the minimum
  std::size_t extension = 15;        // epochs added per observed improvement
  std::size_t max_epochs = 400;      // hard cap on repeated extensions
  std::uint64_t seed = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

struct EpochStats {
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
  double learning_rate = 0.0;
};

struct TrainRecord {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;  // maximizes validation accuracy, ties -> earliest
  ParameterSet best_parameters;
};

struct AdamState {
  ParameterSet m;  // first-moment accumulators
  ParameterSet v;  // second-moment accumulators
};

// Standard bias-corrected update; t is the 1-based step counter.
void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state, double lr,
               double beta1, double beta2, double epsilon, std::size_t t);

// Uniform in +-sqrt(6 / fan_in), biases zero, deterministic per seed.
ParameterSet init_parameters(const NetworkSpec& spec, std::uint64_t seed);

// The full protocol: at least min_epochs, repeatable extension while the
// validation accuracy improved within the last patience_window epochs,
// step-wise LR decay, best-validation snapshot. Bit-reproducible per seed.
TrainRecord train(const NetworkSpec& spec, const DatasetSplit& data, const TrainConfig& cfg);

// Batched argmax-accuracy evaluation.
double accuracy(const NetworkSpec& spec, const ParameterSet& params, const LabeledImages& data,
                std::size_t batch_size);

// Forward a whole labeled set in batches; returns (N, classes) logits.
Tensor batched_logits(const NetworkSpec& spec, const ParameterSet& params,
                      const LabeledImages& data, std::size_t batch_size);

// Self-describing binary checkpoint: magic, version, the TrainConfig, and
// little-endian 64-bit-float parameter tensors. Layout documented in the
// README.
void save_checkpoint(const std::string& path, const ParameterSet& params, const TrainConfig& cfg);

struct Checkpoint {
  ParameterSet parameters;
  TrainConfig config;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace shiftlab
