#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shiftlab/tensor.hpp"

namespace shiftlab {

struct LabeledImages {
  Tensor images;            // (N, C, H, W), values in [0, 1]
  std::vector<int> labels;  // one per image
  std::size_t count() const { return labels.size(); }
};

struct DatasetMeta {
  std::string source;        // "mnist" / "cifar10" / generator tag
  std::size_t canvas = 0;    // padded height == width
  std::size_t margin = 0;    // zero border added around the content
  double normalization = 1.0 / 255.0;
};

struct DatasetSplit {
  LabeledImages train;
  LabeledImages validation;
  LabeledImages test;
  DatasetMeta metadata;
  std::size_t class_count = 10;
};

// IDX parser (raw or gzip): big-endian magic 2051 for images / 2049 for
// labels, unsigned-byte pixels scaled to [0, 1]. Output (N, 1, rows, cols).
// Wrong magic, truncation, and image/label count mismatch are distinct errors.
LabeledImages load_mnist_idx(const std::string& images_path, const std::string& labels_path);

// CIFAR-10 binary batches: records of 1 label byte + 3072 channel-major
// pixel bytes. Rejects sizes not divisible by 3073 and label bytes > 9.
LabeledImages load_cifar10(const std::vector<std::string>& batch_paths);

// Pads every image with a zero margin, carves a seeded uniform validation
// subset out of the training images, and leaves the test set untouched
// except for padding.
DatasetSplit prepare(const LabeledImages& train, const LabeledImages& test,
                     std::size_t pad_margin, std::size_t validation_count, std::uint64_t seed,
                     const std::string& source_name);

// Per-image translation used by augment_translate: dy, dx independent
// uniform integers in [-max_shift, max_shift], deterministic per (seed, index).
Translation translation_draw(std::uint64_t seed, std::uint64_t index, std::size_t max_shift);

// Replaces each train and validation image with a randomly translated copy;
// the test set stays untranslated and all sizes are unchanged. Requires
// max_shift <= pad margin.
DatasetSplit augment_translate(const DatasetSplit& split, std::size_t max_shift,
                               std::uint64_t seed);

// Keeps the first train_limit / test_limit images (0 = keep all); applied
// before prepare() for desk-scale runs.
LabeledImages head(const LabeledImages& data, std::size_t limit);

struct MnistPaths {
  std::string train_images, train_labels, test_images, test_labels;
};

// Standard file names under data_dir ("train-images-idx3-ubyte" etc.),
// picking the .gz variant when only that exists. Throws if neither is found.
MnistPaths mnist_file_paths(const std::string& data_dir);
bool mnist_files_present(const std::string& data_dir);

struct Cifar10Paths {
  std::vector<std::string> train_batches;  // data_batch_1.bin .. data_batch_5.bin
  std::string test_batch;                  // test_batch.bin
};

Cifar10Paths cifar10_file_paths(const std::string& data_dir);
bool cifar10_files_present(const std::string& data_dir);

}  // namespace shiftlab
