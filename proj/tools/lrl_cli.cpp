// Command-line front end: gen, train, eval, ablate, dump-regions.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "lrl/train.hpp"

namespace {

std::string read_text(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void print_lines(const std::string& s) { std::cout << s << '\n' << std::flush; }

/// Config stored beside a checkpoint by `train`, unless overridden.
lrl::RunConfig config_for_checkpoint(const std::string& checkpoint, const std::string& override_path) {
  const std::string path = override_path.empty()
                               ? (std::filesystem::path(checkpoint).parent_path() / "config.txt").string()
                               : override_path;
  return lrl::load_config(path);
}

lrl::Dataset data_for(const lrl::RunConfig& cfg, const std::string& data_path) {
  std::vector<std::string> warnings;
  lrl::Dataset ds = data_path.empty() ? lrl::dataset_for(cfg, &warnings)
                                      : lrl::load_dataset(data_path, cfg.points, cfg.seed, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  return ds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learnable local regions for point cloud classification"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset file");
  lrl::SynthSpec spec;
  std::string clutter = "off";
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  gen->add_option("--classes", spec.classes, "Number of shape classes")->capture_default_str();
  gen->add_option("--per-class", spec.per_class, "Clouds per class")->capture_default_str();
  gen->add_option("--points", spec.points, "Points per cloud")->capture_default_str();
  gen->add_option("--noise", spec.noise, "Gaussian noise sigma")->capture_default_str();
  gen->add_option("--clutter", clutter, "Background clutter")->check(CLI::IsMember({"on", "off"}))->capture_default_str();
  gen->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Output dataset file")->required();

  auto* tr = app.add_subcommand("train", "Train a classifier");
  std::string tr_config, tr_out;
  tr->add_option("--config", tr_config, "Run configuration")->required()->check(CLI::ExistingFile);
  tr->add_option("--out", tr_out, "Output directory")->required();

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string ev_ckpt, ev_data, ev_split = "test", ev_config;
  ev->add_option("--checkpoint", ev_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", ev_data, "Dataset file (default: the run's dataset)");
  ev->add_option("--split", ev_split, "Split to score")->check(CLI::IsMember({"test", "train", "all"}))->capture_default_str();
  ev->add_option("--config", ev_config, "Run configuration (default: config.txt beside the checkpoint)");

  auto* ab = app.add_subcommand("ablate", "Run an ablation grid");
  std::string ab_config, ab_grid, ab_out;
  ab->add_option("--config", ab_config, "Base run configuration")->required()->check(CLI::ExistingFile);
  ab->add_option("--grid", ab_grid, "Grid file")->required()->check(CLI::ExistingFile);
  ab->add_option("--out", ab_out, "Output directory")->required();

  auto* dr = app.add_subcommand("dump-regions", "Write the regions formed for one cloud");
  std::string dr_ckpt, dr_out, dr_data, dr_config;
  std::size_t dr_cloud = 0;
  dr->add_option("--checkpoint", dr_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  dr->add_option("--cloud", dr_cloud, "Cloud index in the dataset")->required();
  dr->add_option("--out", dr_out, "Output text file")->required();
  dr->add_option("--data", dr_data, "Dataset file (default: the run's dataset)");
  dr->add_option("--config", dr_config, "Run configuration (default: config.txt beside the checkpoint)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      spec.clutter = clutter == "on";
      const lrl::Dataset ds = lrl::generate_synthetic(spec, gen_seed);
      lrl::save_dataset(gen_out, ds);
      std::cout << "wrote " << ds.size() << " clouds to " << gen_out << '\n';
    } else if (*tr) {
      const lrl::RunConfig cfg = lrl::load_config(tr_config);
      const lrl::Dataset ds = data_for(cfg, "");
      const lrl::Split split = lrl::stratified_split(ds, cfg.test_fraction, cfg.seed);
      const auto res = lrl::train(cfg, ds, split, tr_out, print_lines);
      std::printf("final test acc %.4f macc %.4f\n", res.final_test.acc, res.final_test.macc);
    } else if (*ev) {
      const lrl::RunConfig cfg = config_for_checkpoint(ev_ckpt, ev_config);
      const lrl::Dataset ds = data_for(cfg, ev_data);
      const lrl::Split split = lrl::stratified_split(ds, cfg.test_fraction, cfg.seed);
      std::vector<std::size_t> idx;
      if (ev_split == "test") idx = split.test;
      else if (ev_split == "train") idx = split.train;
      else
        for (std::size_t i = 0; i < ds.size(); ++i) idx.push_back(i);
      const auto model = lrl::load_model(cfg, ds.num_classes(), ev_ckpt);
      const lrl::EvalResult r = lrl::evaluate(*model, ds, idx, cfg.seed, cfg.threads);
      std::printf("acc %.4f\nmacc %.4f\nconfusion (rows true, columns predicted)\n", r.acc, r.macc);
      for (const auto& row : r.confusion) {
        for (std::size_t c = 0; c < row.size(); ++c) std::printf(c ? " %zu" : "%zu", row[c]);
        std::printf("\n");
      }
    } else if (*ab) {
      const lrl::RunConfig cfg = lrl::load_config(ab_config);
      const auto entries = lrl::parse_grid(read_text(ab_grid));
      const lrl::Dataset ds = data_for(cfg, "");
      const lrl::Split split = lrl::stratified_split(ds, cfg.test_fraction, cfg.seed);
      const auto rows = lrl::ablation_grid(cfg, entries, ds, split, ab_out, print_lines);
      const std::string table = lrl::ablation_table(rows);
      std::filesystem::create_directories(ab_out);
      std::ofstream(ab_out + "/table.csv") << table;
      std::cout << table;
    } else if (*dr) {
      const lrl::RunConfig cfg = config_for_checkpoint(dr_ckpt, dr_config);
      const lrl::Dataset ds = data_for(cfg, dr_data);
      if (dr_cloud >= ds.size()) throw lrl::ArgumentError("cloud index out of range");
      const auto model = lrl::load_model(cfg, ds.num_classes(), dr_ckpt);
      lrl::Tape tape;
      const auto out = lrl::classify(tape, ds.clouds[dr_cloud], *model, lrl::eval_sample_seed(cfg.seed, dr_cloud));
      std::ofstream os(dr_out);
      if (!os) throw std::runtime_error("cannot write " + dr_out);
      os << lrl::region_dump(out.records);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
