#include "shiftlab/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "shiftlab/rng.hpp"

namespace shiftlab {

namespace {

std::vector<unsigned char> read_file_bytes(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open file: " + path);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(file), {});
}

bool is_gzip(const std::vector<unsigned char>& bytes) {
  return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

std::vector<unsigned char> gunzip(const std::vector<unsigned char>& bytes,
                                  const std::string& path) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK)
    throw std::runtime_error("zlib init failed for " + path);
  std::vector<unsigned char> out;
  std::vector<unsigned char> buf(1 << 16);
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  int rc = Z_OK;
  do {
    zs.next_out = buf.data();
    zs.avail_out = static_cast<uInt>(buf.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw std::runtime_error("gzip decompression failed for " + path);
    }
    out.insert(out.end(), buf.data(), buf.data() + (buf.size() - zs.avail_out));
  } while (rc != Z_STREAM_END);
  inflateEnd(&zs);
  return out;
}

std::vector<unsigned char> read_maybe_gzip(const std::string& path) {
  std::vector<unsigned char> bytes = read_file_bytes(path);
  if (is_gzip(bytes)) return gunzip(bytes, path);
  return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::string& path) {
  if (offset + 4 > bytes.size()) throw std::runtime_error("truncated IDX header in " + path);
  return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
         (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
         (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
         static_cast<std::uint32_t>(bytes[offset + 3]);
}

constexpr std::uint32_t kIdxImagesMagic = 2051;  // 0x00000803
constexpr std::uint32_t kIdxLabelsMagic = 2049;  // 0x00000801

}  // namespace

LabeledImages load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
  const std::vector<unsigned char> ib = read_maybe_gzip(images_path);
  const std::uint32_t imagic = read_be32(ib, 0, images_path);
  if (imagic != kIdxImagesMagic)
    throw std::runtime_error("wrong IDX magic in " + images_path + ": expected 2051, got " +
                             std::to_string(imagic));
  const std::size_t n = read_be32(ib, 4, images_path);
  const std::size_t rows = read_be32(ib, 8, images_path);
  const std::size_t cols = read_be32(ib, 12, images_path);
  if (ib.size() < 16 + n * rows * cols)
    throw std::runtime_error("truncated IDX image payload in " + images_path);

  const std::vector<unsigned char> lb = read_maybe_gzip(labels_path);
  const std::uint32_t lmagic = read_be32(lb, 0, labels_path);
  if (lmagic != kIdxLabelsMagic)
    throw std::runtime_error("wrong IDX magic in " + labels_path + ": expected 2049, got " +
                             std::to_string(lmagic));
  const std::size_t ln = read_be32(lb, 4, labels_path);
  if (lb.size() < 8 + ln) throw std::runtime_error("truncated IDX label payload in " + labels_path);
  if (ln != n)
    throw std::runtime_error("IDX image/label count mismatch: " + std::to_string(n) +
                             " images vs " + std::to_string(ln) + " labels");

  LabeledImages out;
  out.images = Tensor({n, 1, rows, cols});
  out.labels.resize(n);
  double* dst = out.images.data();
  for (std::size_t i = 0; i < n * rows * cols; ++i) {
    dst[i] = static_cast<double>(ib[16 + i]) / 255.0;
  }
  for (std::size_t i = 0; i < n; ++i) out.labels[i] = static_cast<int>(lb[8 + i]);
  return out;
}

LabeledImages load_cifar10(const std::vector<std::string>& batch_paths) {
  constexpr std::size_t kRecord = 3073;  // 1 label byte + 3 * 32 * 32 pixels
  std::vector<std::vector<unsigned char>> batches;
  std::size_t total = 0;
  for (const std::string& path : batch_paths) {
    std::vector<unsigned char> bytes = read_file_bytes(path);
    if (bytes.empty() || bytes.size() % kRecord != 0)
      throw std::runtime_error("CIFAR-10 batch size not a multiple of 3073: " + path);
    total += bytes.size() / kRecord;
    batches.push_back(std::move(bytes));
  }
  LabeledImages out;
  out.images = Tensor({total, 3, 32, 32});
  out.labels.resize(total);
  double* dst = out.images.data();
  std::size_t img = 0;
  for (std::size_t bi = 0; bi < batches.size(); ++bi) {
    const std::vector<unsigned char>& bytes = batches[bi];
    for (std::size_t r = 0; r < bytes.size() / kRecord; ++r, ++img) {
      const unsigned char* rec = bytes.data() + r * kRecord;
      if (rec[0] > 9)
        throw std::runtime_error("CIFAR-10 label byte out of range in " + batch_paths[bi]);
      out.labels[img] = static_cast<int>(rec[0]);
      for (std::size_t i = 0; i < 3072; ++i) {
        dst[img * 3072 + i] = static_cast<double>(rec[1 + i]) / 255.0;
      }
    }
  }
  return out;
}

namespace {

LabeledImages select(const LabeledImages& data, const std::vector<std::size_t>& indices) {
  const std::size_t C = data.images.dim(1), H = data.images.dim(2), W = data.images.dim(3);
  LabeledImages out;
  out.images = Tensor({indices.size(), C, H, W});
  out.labels.resize(indices.size());
  const std::size_t plane = C * H * W;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(data.images.data() + indices[i] * plane, plane, out.images.data() + i * plane);
    out.labels[i] = data.labels[indices[i]];
  }
  return out;
}

}  // namespace

LabeledImages head(const LabeledImages& data, std::size_t limit) {
  if (limit == 0 || limit >= data.count()) return data;
  std::vector<std::size_t> indices(limit);
  std::iota(indices.begin(), indices.end(), 0);
  return select(data, indices);
}

DatasetSplit prepare(const LabeledImages& train, const LabeledImages& test,
                     std::size_t pad_margin, std::size_t validation_count, std::uint64_t seed,
                     const std::string& source_name) {
  if (validation_count >= train.count())
    throw std::invalid_argument("prepare: validation count must be smaller than the train set");

  std::vector<std::size_t> indices(train.count());
  std::iota(indices.begin(), indices.end(), 0);
  Rng rng(mix_seed(seed, 0x73706c6974ull));
  rng.shuffle(indices);

  std::vector<std::size_t> val_idx(indices.begin(),
                                   indices.begin() + static_cast<long>(validation_count));
  std::vector<std::size_t> train_idx(indices.begin() + static_cast<long>(validation_count),
                                     indices.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  DatasetSplit split;
  LabeledImages train_part = select(train, train_idx);
  LabeledImages val_part = select(train, val_idx);
  split.train.images = zero_pad2d(train_part.images, pad_margin);
  split.train.labels = std::move(train_part.labels);
  split.validation.images = zero_pad2d(val_part.images, pad_margin);
  split.validation.labels = std::move(val_part.labels);
  split.test.images = zero_pad2d(test.images, pad_margin);
  split.test.labels = test.labels;
  split.metadata.source = source_name;
  split.metadata.margin = pad_margin;
  split.metadata.canvas = split.train.images.dim(2);
  split.class_count = 10;
  return split;
}

Translation translation_draw(std::uint64_t seed, std::uint64_t index, std::size_t max_shift) {
  Rng rng(mix_seed(seed, index));
  const int m = static_cast<int>(max_shift);
  Translation t;
  t.dy = rng.uniform_int(-m, m);
  t.dx = rng.uniform_int(-m, m);
  return t;
}

namespace {

LabeledImages translate_all(const LabeledImages& part, std::size_t max_shift, std::uint64_t seed,
                            std::uint64_t stream_tag) {
  LabeledImages out;
  out.images = Tensor(part.images.shape());
  out.labels = part.labels;
  const std::size_t plane = part.images.dim(1) * part.images.dim(2) * part.images.dim(3);
  for (std::size_t i = 0; i < part.count(); ++i) {
    Tensor one({1, part.images.dim(1), part.images.dim(2), part.images.dim(3)},
               std::vector<double>(part.images.data() + i * plane,
                                   part.images.data() + (i + 1) * plane));
    const Tensor moved = translate2d(one, translation_draw(seed ^ stream_tag, i, max_shift));
    std::copy_n(moved.data(), plane, out.images.data() + i * plane);
  }
  return out;
}

}  // namespace

DatasetSplit augment_translate(const DatasetSplit& split, std::size_t max_shift,
                               std::uint64_t seed) {
  if (max_shift > split.metadata.margin)
    throw std::invalid_argument("augment_translate: max shift exceeds the canvas margin");
  if (max_shift == 0) return split;
  DatasetSplit out = split;
  out.train = translate_all(split.train, max_shift, seed, 0x7261696eull);
  out.validation = translate_all(split.validation, max_shift, seed, 0x76616c69ull);
  return out;
}

namespace {

bool file_exists(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return f.good();
}

std::string pick_variant(const std::string& dir, const std::string& name) {
  const std::string raw = dir + "/" + name;
  if (file_exists(raw)) return raw;
  if (file_exists(raw + ".gz")) return raw + ".gz";
  throw std::runtime_error("dataset file not found: " + raw + "[.gz]");
}

}  // namespace

MnistPaths mnist_file_paths(const std::string& data_dir) {
  MnistPaths p;
  p.train_images = pick_variant(data_dir, "train-images-idx3-ubyte");
  p.train_labels = pick_variant(data_dir, "train-labels-idx1-ubyte");
  p.test_images = pick_variant(data_dir, "t10k-images-idx3-ubyte");
  p.test_labels = pick_variant(data_dir, "t10k-labels-idx1-ubyte");
  return p;
}

bool mnist_files_present(const std::string& data_dir) {
  try {
    mnist_file_paths(data_dir);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

Cifar10Paths cifar10_file_paths(const std::string& data_dir) {
  Cifar10Paths p;
  for (int i = 1; i <= 5; ++i) {
    p.train_batches.push_back(
        pick_variant(data_dir, "data_batch_" + std::to_string(i) + ".bin"));
  }
  p.test_batch = pick_variant(data_dir, "test_batch.bin");
  return p;
}

bool cifar10_files_present(const std::string& data_dir) {
  try {
    cifar10_file_paths(data_dir);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace shiftlab
