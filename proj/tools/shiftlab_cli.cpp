#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "shiftlab/experiment.hpp"

namespace {

std::string default_data_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("SHIFTLAB_DATA_DIR")) return env;
  return "data";
}

shiftlab::KeyValueConfig load_config(const std::string& config_path,
                                     const std::vector<std::string>& overrides,
                                     const std::string& seeds) {
  shiftlab::KeyValueConfig cfg;
  if (!config_path.empty()) cfg = shiftlab::KeyValueConfig::parse_file(config_path);
  for (const std::string& kv : overrides) cfg.apply_override(kv);
  if (!seeds.empty()) cfg.set("seeds", seeds);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"translation-invariance experiment runner"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir = "runs", seeds, scale = "desk", table;
  std::vector<std::string> overrides;

  CLI::App* analyze = app.add_subcommand("analyze-1d", "regenerate the 1-d worked-example "
                                                       "tables and check them exactly");
  std::string analyze_out;
  analyze->add_option("--out-dir", analyze_out, "also write the tables as CSV");

  CLI::App* train = app.add_subcommand("train", "train all (architecture x seed) combinations");
  train->add_option("--config", config_path, "flat key=value config file");
  train->add_option("--data-dir", data_dir, "dataset directory (or SHIFTLAB_DATA_DIR)");
  train->add_option("--out-dir", out_dir, "output directory");
  train->add_option("--seeds", seeds, "comma-separated training seeds");
  train->add_option("--set", overrides, "config override key=value (repeatable)");

  CLI::App* evaluate = app.add_subcommand("evaluate", "invariance metrics from checkpoints");
  evaluate->add_option("--config", config_path, "flat key=value config file");
  evaluate->add_option("--data-dir", data_dir, "dataset directory (or SHIFTLAB_DATA_DIR)");
  evaluate->add_option("--out-dir", out_dir, "directory holding checkpoints/; receives CSVs");
  evaluate->add_option("--seeds", seeds, "comma-separated training seeds");
  evaluate->add_option("--set", overrides, "config override key=value (repeatable)");

  CLI::App* reproduce = app.add_subcommand("reproduce", "run a full experiment grid "
                                                        "(t4|t5|t6|t7|fig1|fig2)");
  reproduce->add_option("table", table, "t4|t5|t6|t7|fig1|fig2")->required();
  reproduce->add_option("--scale", scale, "desk (default) or full");
  reproduce->add_option("--config", config_path, "extra overrides as a config file");
  reproduce->add_option("--data-dir", data_dir, "dataset directory (or SHIFTLAB_DATA_DIR)");
  reproduce->add_option("--out-dir", out_dir, "output directory");
  reproduce->add_option("--seeds", seeds, "comma-separated training seeds");
  reproduce->add_option("--set", overrides, "config override key=value (repeatable)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (analyze->parsed()) {
      return shiftlab::run_analyze_1d(analyze_out, std::cout);
    }
    const shiftlab::KeyValueConfig cfg = load_config(config_path, overrides, seeds);
    const std::string resolved_data = default_data_dir(data_dir);
    if (train->parsed()) {
      return shiftlab::run_train(cfg, resolved_data, out_dir, std::cout);
    }
    if (evaluate->parsed()) {
      return shiftlab::run_evaluate(cfg, resolved_data, out_dir, std::cout);
    }
    if (reproduce->parsed()) {
      return shiftlab::run_reproduce(table, scale, cfg, resolved_data, out_dir, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
