#pragma once

#include <cstdint>
#include <string>

#include "shiftlab/data.hpp"

namespace shiftlab::synth {

// Procedural stand-in datasets for offline runs, written in the exact file
// formats the loaders consume. Ten glyph classes rendered at 28x28 grayscale
// (smooth strokes on a zero background, like handwritten digits); ten classes
// of 32x32 RGB shapes over textured, noisy backgrounds (high inter-pixel
// variance, like natural images).

LabeledImages make_glyphs(std::size_t count, std::uint64_t seed);
LabeledImages make_textures(std::size_t count, std::uint64_t seed);

// IDX writer (magic 2051/2049, big-endian dims, bytes = round(v * 255)).
void write_mnist_idx(const LabeledImages& data, const std::string& images_path,
                     const std::string& labels_path);

// CIFAR-10 binary batch writer (3073-byte records).
void write_cifar10(const LabeledImages& data, const std::string& path);

// Ensures data_dir contains a loadable dataset for the given source
// ("mnist" or "cifar10"); generates synthetic files if absent. Returns true
// when files were generated.
bool ensure_dataset(const std::string& data_dir, const std::string& source,
                    std::size_t train_count, std::size_t test_count, std::uint64_t seed);

}  // namespace shiftlab::synth
