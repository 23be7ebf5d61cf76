#include "shiftlab/train.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "shiftlab/rng.hpp"

namespace shiftlab {

void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state, double lr,
               double beta1, double beta2, double epsilon, std::size_t t) {
  if (t < 1) throw std::invalid_argument("adam_step: t must be >= 1");
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (const std::string& name : params.order()) {
    Tensor& p = params.at(name);
    const Tensor& g = grads.at(name);
    Tensor& m = state.m.at(name);
    Tensor& v = state.v.at(name);
    const std::size_t n = p.size();
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + epsilon);
    }
  }
}

ParameterSet init_parameters(const NetworkSpec& spec, std::uint64_t seed) {
  const std::vector<StageShape> chain = spec.shape_chain();
  ParameterSet params;
  Rng rng(mix_seed(seed, 0x696e6974ull));
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    if (l.kind == LayerKind::Conv2D) {
      const std::size_t fan_in = chain[i].channels * l.kernel * l.kernel;
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      Tensor w({l.out_channels, chain[i].channels, l.kernel, l.kernel});
      for (std::size_t j = 0; j < w.size(); ++j) w[j] = rng.uniform_real(-bound, bound);
      params.add(weight_name(i), std::move(w));
      params.add(bias_name(i), Tensor({l.out_channels}));
    } else if (l.kind == LayerKind::Dense) {
      const std::size_t fan_in = chain[i].features();
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      Tensor w({fan_in, l.out_channels});
      for (std::size_t j = 0; j < w.size(); ++j) w[j] = rng.uniform_real(-bound, bound);
      params.add(weight_name(i), std::move(w));
      params.add(bias_name(i), Tensor({l.out_channels}));
    }
  }
  return params;
}

namespace {

Tensor gather_batch(const LabeledImages& data, const std::vector<std::size_t>& order,
                    std::size_t begin, std::size_t end, std::vector<int>& labels_out) {
  const std::size_t C = data.images.dim(1), H = data.images.dim(2), W = data.images.dim(3);
  const std::size_t plane = C * H * W;
  Tensor batch({end - begin, C, H, W});
  labels_out.resize(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    std::copy_n(data.images.data() + order[i] * plane, plane,
                batch.data() + (i - begin) * plane);
    labels_out[i - begin] = data.labels[order[i]];
  }
  return batch;
}

}  // namespace

Tensor batched_logits(const NetworkSpec& spec, const ParameterSet& params,
                      const LabeledImages& data, std::size_t batch_size) {
  const std::size_t n = data.count();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Tensor logits({n, spec.class_count});
  std::vector<int> labels;
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    const std::size_t end = std::min(n, begin + batch_size);
    const Tensor batch = gather_batch(data, order, begin, end, labels);
    const Tensor out = forward(spec, params, batch);
    std::copy_n(out.data(), out.size(), logits.data() + begin * spec.class_count);
  }
  return logits;
}

namespace {

std::size_t argmax_row(const Tensor& logits, std::size_t row) {
  const std::size_t C = logits.dim(1);
  std::size_t best = 0;
  for (std::size_t c = 1; c < C; ++c) {
    if (logits.at2(row, c) > logits.at2(row, best)) best = c;
  }
  return best;
}

}  // namespace

double accuracy(const NetworkSpec& spec, const ParameterSet& params, const LabeledImages& data,
                std::size_t batch_size) {
  if (data.count() == 0) return 0.0;
  const Tensor logits = batched_logits(spec, params, data, batch_size);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.count(); ++i) {
    if (argmax_row(logits, i) == static_cast<std::size_t>(data.labels[i])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.count());
}

TrainRecord train(const NetworkSpec& spec, const DatasetSplit& data, const TrainConfig& cfg) {
  spec.validate();
  if (data.train.count() == 0) throw std::invalid_argument("train: empty training set");
  if (data.validation.count() == 0) throw std::invalid_argument("train: empty validation set");

  ParameterSet params = init_parameters(spec, cfg.seed);
  AdamState state{ParameterSet::zeros_like(params), ParameterSet::zeros_like(params)};
  std::size_t adam_t = 0;

  TrainRecord record;
  record.best_parameters = params;
  double best_val = -1.0;

  std::vector<std::size_t> order(data.train.count());
  std::iota(order.begin(), order.end(), 0);

  std::size_t planned_end = cfg.min_epochs;
  std::size_t last_improvement_epoch = 0;  // 1-based; 0 = never

  for (std::size_t epoch = 0; epoch < planned_end && epoch < cfg.max_epochs; ++epoch) {
    const double lr =
        cfg.base_lr * std::pow(cfg.lr_decay_factor,
                               static_cast<double>(epoch / std::max<std::size_t>(
                                                               1, cfg.lr_decay_every)));

    Rng shuffle_rng(mix_seed(cfg.seed, 0x65706f6368ull + epoch));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      std::vector<int> labels;
      const Tensor batch = gather_batch(data.train, order, begin, end, labels);
      BackwardResult result = backward(spec, params, batch, labels);
      if (!std::isfinite(result.loss)) {
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch + 1) +
                                 ", batch starting at " + std::to_string(begin));
      }
      loss_sum += result.loss * static_cast<double>(end - begin);
      for (std::size_t i = 0; i < end - begin; ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < spec.class_count; ++c) {
          if (result.probabilities.at2(i, c) > result.probabilities.at2(i, best)) best = c;
        }
        if (best == static_cast<std::size_t>(labels[i])) ++correct;
      }
      ++adam_t;
      adam_step(params, result.gradients, state, lr, cfg.adam_beta1, cfg.adam_beta2,
                cfg.adam_epsilon, adam_t);
    }

    EpochStats stats;
    stats.learning_rate = lr;
    stats.train_loss = loss_sum / static_cast<double>(order.size());
    stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    stats.validation_accuracy = accuracy(spec, params, data.validation, cfg.batch_size);
    record.epochs.push_back(stats);

    if (stats.validation_accuracy > best_val) {
      best_val = stats.validation_accuracy;
      record.best_epoch = epoch;
      record.best_parameters = params;
      last_improvement_epoch = epoch + 1;
    }

    // After the minimum, keep extending while an improvement happened within
    // the trailing patience window (capped by max_epochs).
    if (epoch + 1 == planned_end && planned_end < cfg.max_epochs) {
      const bool improved_recently =
          last_improvement_epoch > 0 &&
          last_improvement_epoch + cfg.patience_window > epoch + 1;
      if (improved_recently) {
        planned_end = std::min(cfg.max_epochs, planned_end + cfg.extension);
      }
    }
  }
  return record;
}

namespace {

constexpr char kCheckpointMagic[8] = {'S', 'L', 'C', 'K', 'P', 'T', '0', '1'};

void write_u32(std::ofstream& f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ofstream& f, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  f.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ofstream& f, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(f, bits);
}

std::uint32_t read_u32(std::ifstream& f, const std::string& path) {
  unsigned char b[4];
  if (!f.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error("truncated checkpoint: " + path);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t read_u64(std::ifstream& f, const std::string& path) {
  unsigned char b[8];
  if (!f.read(reinterpret_cast<char*>(b), 8))
    throw std::runtime_error("truncated checkpoint: " + path);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double read_f64(std::ifstream& f, const std::string& path) {
  const std::uint64_t bits = read_u64(f, path);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParameterSet& params,
                     const TrainConfig& cfg) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
  f.write(kCheckpointMagic, 8);
  write_u64(f, cfg.batch_size);
  write_f64(f, cfg.base_lr);
  write_f64(f, cfg.lr_decay_factor);
  write_u64(f, cfg.lr_decay_every);
  write_u64(f, cfg.min_epochs);
  write_u64(f, cfg.patience_window);
  write_u64(f, cfg.extension);
  write_u64(f, cfg.max_epochs);
  write_u64(f, cfg.seed);
  write_f64(f, cfg.adam_beta1);
  write_f64(f, cfg.adam_beta2);
  write_f64(f, cfg.adam_epsilon);
  write_u32(f, static_cast<std::uint32_t>(params.count()));
  for (const std::string& name : params.order()) {
    const Tensor& t = params.at(name);
    write_u32(f, static_cast<std::uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(f, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) write_u64(f, d);
    for (std::size_t i = 0; i < t.size(); ++i) write_f64(f, t[i]);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  if (!f.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw std::runtime_error("bad checkpoint magic: " + path);
  Checkpoint ck;
  ck.config.batch_size = read_u64(f, path);
  ck.config.base_lr = read_f64(f, path);
  ck.config.lr_decay_factor = read_f64(f, path);
  ck.config.lr_decay_every = read_u64(f, path);
  ck.config.min_epochs = read_u64(f, path);
  ck.config.patience_window = read_u64(f, path);
  ck.config.extension = read_u64(f, path);
  ck.config.max_epochs = read_u64(f, path);
  ck.config.seed = read_u64(f, path);
  ck.config.adam_beta1 = read_f64(f, path);
  ck.config.adam_beta2 = read_f64(f, path);
  ck.config.adam_epsilon = read_f64(f, path);
  const std::uint32_t count = read_u32(f, path);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = read_u32(f, path);
    std::string name(name_len, '\0');
    if (!f.read(name.data(), name_len)) throw std::runtime_error("truncated checkpoint: " + path);
    const std::uint32_t rank = read_u32(f, path);
    std::vector<std::size_t> shape(rank);
    for (std::uint32_t d = 0; d < rank; ++d) shape[d] = read_u64(f, path);
    Tensor t(shape);
    for (std::size_t j = 0; j < t.size(); ++j) t[j] = read_f64(f, path);
    ck.parameters.add(name, std::move(t));
  }
  return ck;
}

}  // namespace shiftlab
