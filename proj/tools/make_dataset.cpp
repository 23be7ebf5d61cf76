// Writes procedurally generated stand-in datasets in the MNIST IDX and
// CIFAR-10 binary formats, for machines without the real files.

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "shiftlab/synth.hpp"

int main(int argc, char** argv) {
  CLI::App app{"synthetic dataset generator (IDX / CIFAR-10 binary)"};

  std::string kind = "mnist";
  std::string out_dir = "data";
  std::size_t train_count = 12000;
  std::size_t test_count = 2000;
  std::uint64_t seed = 4242;
  app.add_option("--kind", kind, "mnist or cifar10")->check(CLI::IsMember({"mnist", "cifar10"}));
  app.add_option("--out-dir", out_dir, "target directory");
  app.add_option("--train-count", train_count, "training images to generate");
  app.add_option("--test-count", test_count, "test images to generate");
  app.add_option("--seed", seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    const bool generated =
        shiftlab::synth::ensure_dataset(out_dir, kind, train_count, test_count, seed);
    if (generated) {
      std::cout << "wrote synthetic " << kind << " files under " << out_dir << "\n";
    } else {
      std::cout << kind << " files already present under " << out_dir << "; nothing to do\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
