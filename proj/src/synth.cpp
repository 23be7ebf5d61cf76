#include "shiftlab/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "shiftlab/rng.hpp"

namespace shiftlab::synth {

namespace {

// 7x5 digit bitmaps, row-major, one string per glyph row.
const std::array<std::array<const char*, 7>, 10> kGlyphs = {{
    {"01110", "10001", "10011", "10101", "11001", "10001", "01110"},  // 0
    {"00100", "01100", "00100", "00100", "00100", "00100", "01110"},  // 1
    {"01110", "10001", "00001", "00010", "00100", "01000", "11111"},  // 2
    {"11111", "00010", "00100", "00010", "00001", "10001", "01110"},  // 3
    {"00010", "00110", "01010", "10010", "11111", "00010", "00010"},  // 4
    {"11111", "10000", "11110", "00001", "00001", "10001", "01110"},  // 5
    {"00110", "01000", "10000", "11110", "10001", "10001", "01110"},  // 6
    {"11111", "00001", "00010", "00100", "01000", "01000", "01000"},  // 7
    {"01110", "10001", "10001", "01110", "10001", "10001", "01110"},  // 8
    {"01110", "10001", "10001", "01111", "00001", "00010", "01100"},  // 9
}};

double quantize(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return std::round(v * 255.0) / 255.0;
}

// Upscaled glyph mask with a one-pass 3x3 box smoothing, giving soft stroke
// edges on an exactly-zero background.
std::vector<double> render_glyph(int digit, int scale, int canvas, int off_y, int off_x,
                                 double intensity, Rng& rng) {
  std::vector<double> img(static_cast<std::size_t>(canvas) * canvas, 0.0);
  std::vector<double> mask(static_cast<std::size_t>(canvas) * canvas, 0.0);
  for (int gy = 0; gy < 7; ++gy) {
    for (int gx = 0; gx < 5; ++gx) {
      if (kGlyphs[digit][gy][gx] != '1') continue;
      for (int sy = 0; sy < scale; ++sy) {
        for (int sx = 0; sx < scale; ++sx) {
          const int y = off_y + gy * scale + sy;
          const int x = off_x + gx * scale + sx;
          if (y >= 0 && y < canvas && x >= 0 && x < canvas)
            mask[static_cast<std::size_t>(y) * canvas + x] = 1.0;
        }
      }
    }
  }
  for (int y = 0; y < canvas; ++y) {
    for (int x = 0; x < canvas; ++x) {
      double acc = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy >= 0 && yy < canvas && xx >= 0 && xx < canvas)
            acc += mask[static_cast<std::size_t>(yy) * canvas + xx];
        }
      }
      const double soft = acc / 9.0;
      if (soft > 0.0) {
        const double wobble = 1.0 + 0.15 * (rng.uniform01() - 0.5);
        img[static_cast<std::size_t>(y) * canvas + x] = quantize(soft * intensity * wobble);
      }
    }
  }
  return img;
}

}  // namespace

LabeledImages make_glyphs(std::size_t count, std::uint64_t seed) {
  constexpr int kCanvas = 28;
  LabeledImages out;
  out.images = Tensor({count, 1, kCanvas, kCanvas});
  out.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(mix_seed(seed, i));
    const int digit = rng.uniform_int(0, 9);
    const int scale = rng.uniform_int(2, 3);
    const int gw = 5 * scale, gh = 7 * scale;
    const int off_y = (kCanvas - gh) / 2 + rng.uniform_int(-2, 2);
    const int off_x = (kCanvas - gw) / 2 + rng.uniform_int(-2, 2);
    const double intensity = rng.uniform_real(0.75, 1.0);
    const std::vector<double> img =
        render_glyph(digit, scale, kCanvas, off_y, off_x, intensity, rng);
    std::copy(img.begin(), img.end(),
              out.images.data() + i * static_cast<std::size_t>(kCanvas) * kCanvas);
    out.labels[i] = digit;
  }
  return out;
}

LabeledImages make_textures(std::size_t count, std::uint64_t seed) {
  constexpr int kCanvas = 32;
  LabeledImages out;
  out.images = Tensor({count, 3, kCanvas, kCanvas});
  out.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(mix_seed(seed, i));
    const int cls = rng.uniform_int(0, 9);

    // the class is carried by the glyph shape alone; colors are drawn per
    // image so the nets must read high-frequency structure, not a hue
    std::array<double, 3> fg, bg0, bg1;
    for (int c = 0; c < 3; ++c) {
      fg[c] = rng.uniform_real(0.0, 1.0);
      // background phases contrast with the glyph and with each other
      const double away = fg[c] > 0.5 ? rng.uniform_real(0.0, fg[c] - 0.4)
                                      : rng.uniform_real(fg[c] + 0.4, 1.0);
      bg0[c] = away;
      bg1[c] = std::clamp(bg0[c] + (bg0[c] > 0.5 ? -1.0 : 1.0) * rng.uniform_real(0.3, 0.4),
                          0.0, 1.0);
    }
    const int period = rng.uniform_int(1, 2);
    const int phase_y = rng.uniform_int(0, 3), phase_x = rng.uniform_int(0, 3);

    // class glyph as the foreground shape
    const int scale = 3;
    const int gw = 5 * scale, gh = 7 * scale;
    const int off_y = (kCanvas - gh) / 2 + rng.uniform_int(-3, 3);
    const int off_x = (kCanvas - gw) / 2 + rng.uniform_int(-3, 3);
    std::vector<double> mask(static_cast<std::size_t>(kCanvas) * kCanvas, 0.0);
    for (int gy = 0; gy < 7; ++gy)
      for (int gx = 0; gx < 5; ++gx) {
        if (kGlyphs[cls][gy][gx] != '1') continue;
        for (int sy = 0; sy < scale; ++sy)
          for (int sx = 0; sx < scale; ++sx) {
            const int y = off_y + gy * scale + sy;
            const int x = off_x + gx * scale + sx;
            if (y >= 0 && y < kCanvas && x >= 0 && x < kCanvas)
              mask[static_cast<std::size_t>(y) * kCanvas + x] = 1.0;
          }
      }

    double* base = out.images.data() + i * 3 * static_cast<std::size_t>(kCanvas) * kCanvas;
    for (int y = 0; y < kCanvas; ++y) {
      for (int x = 0; x < kCanvas; ++x) {
        const bool even = (((y + phase_y) / period) + ((x + phase_x) / period)) % 2 == 0;
        const double m = mask[static_cast<std::size_t>(y) * kCanvas + x];
        for (int c = 0; c < 3; ++c) {
          const double bgv = even ? bg0[c] : bg1[c];
          const double fgv = fg[c] * (even ? 1.0 : 0.8);
          const double noise = rng.uniform_real(-0.16, 0.16);
          base[(static_cast<std::size_t>(c) * kCanvas + y) * kCanvas + x] =
              quantize((1.0 - m) * bgv + m * fgv + noise);
        }
      }
    }
    out.labels[i] = cls;
  }
  return out;
}

namespace {

void write_be32(std::ofstream& f, std::uint32_t v) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(v >> 24),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v)};
  f.write(reinterpret_cast<const char*>(bytes), 4);
}

unsigned char to_byte(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

void write_mnist_idx(const LabeledImages& data, const std::string& images_path,
                     const std::string& labels_path) {
  const std::size_t n = data.count();
  const std::size_t rows = data.images.dim(2), cols = data.images.dim(3);
  if (data.images.dim(1) != 1)
    throw std::invalid_argument("write_mnist_idx: images must have one channel");
  std::ofstream fi(images_path, std::ios::binary);
  if (!fi) throw std::runtime_error("cannot write " + images_path);
  write_be32(fi, 2051);
  write_be32(fi, static_cast<std::uint32_t>(n));
  write_be32(fi, static_cast<std::uint32_t>(rows));
  write_be32(fi, static_cast<std::uint32_t>(cols));
  for (std::size_t i = 0; i < n * rows * cols; ++i) {
    const unsigned char b = to_byte(data.images[i]);
    fi.write(reinterpret_cast<const char*>(&b), 1);
  }
  std::ofstream fl(labels_path, std::ios::binary);
  if (!fl) throw std::runtime_error("cannot write " + labels_path);
  write_be32(fl, 2049);
  write_be32(fl, static_cast<std::uint32_t>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char b = static_cast<unsigned char>(data.labels[i]);
    fl.write(reinterpret_cast<const char*>(&b), 1);
  }
}

void write_cifar10(const LabeledImages& data, const std::string& path) {
  if (data.images.dim(1) != 3 || data.images.dim(2) != 32 || data.images.dim(3) != 32)
    throw std::invalid_argument("write_cifar10: images must be (N,3,32,32)");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  for (std::size_t i = 0; i < data.count(); ++i) {
    const unsigned char label = static_cast<unsigned char>(data.labels[i]);
    f.write(reinterpret_cast<const char*>(&label), 1);
    for (std::size_t j = 0; j < 3072; ++j) {
      const unsigned char b = to_byte(data.images[i * 3072 + j]);
      f.write(reinterpret_cast<const char*>(&b), 1);
    }
  }
}

bool ensure_dataset(const std::string& data_dir, const std::string& source,
                    std::size_t train_count, std::size_t test_count, std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(data_dir);
  if (source == "mnist") {
    if (mnist_files_present(data_dir)) return false;
    const LabeledImages train = make_glyphs(train_count, seed);
    const LabeledImages test = make_glyphs(test_count, mix_seed(seed, 0x7465737455ull));
    write_mnist_idx(train, data_dir + "/train-images-idx3-ubyte",
                    data_dir + "/train-labels-idx1-ubyte");
    write_mnist_idx(test, data_dir + "/t10k-images-idx3-ubyte",
                    data_dir + "/t10k-labels-idx1-ubyte");
  } else if (source == "cifar10") {
    if (cifar10_files_present(data_dir)) return false;
    const std::size_t per_batch = (train_count + 4) / 5;
    std::size_t written = 0;
    for (int b = 1; b <= 5; ++b) {
      const std::size_t n = std::min(per_batch, train_count - written);
      const LabeledImages batch = make_textures(std::max<std::size_t>(n, 1),
                                                mix_seed(seed, static_cast<std::uint64_t>(b)));
      write_cifar10(batch, data_dir + "/data_batch_" + std::to_string(b) + ".bin");
      written += batch.count();
    }
    const LabeledImages test = make_textures(test_count, mix_seed(seed, 0x7465737455ull));
    write_cifar10(test, data_dir + "/test_batch.bin");
  } else {
    throw std::invalid_argument("ensure_dataset: unknown source " + source);
  }
  std::ofstream marker(data_dir + "/SYNTHETIC.txt");
  marker << "generated stand-in dataset (source=" << source << ", seed=" << seed << ")\n";
  return true;
}

}  // namespace shiftlab::synth
