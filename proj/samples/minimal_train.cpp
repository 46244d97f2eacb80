// Trains a small classifier on generated shapes and prints the regions one
// cloud ends up with. Runs in a few seconds.

#include <cstdio>
#include <iostream>

#include "lrl/train.hpp"

int main() {
  lrl::RunConfig cfg = lrl::parse_config(R"(
    seed = 3
    epochs = 5
    points = 256
    synth.classes = 3
    synth.per_class = 12
    layer1.centers = 32
    layer1.mlp = 16
    layer2.centers = 8
    layer2.mlp = 32
    layer2.csm = csm1
    layer2.rum = rum1
    global.mlp = 32
    head.mlp = 16
  )");

  const lrl::Dataset ds = lrl::dataset_for(cfg);
  const lrl::Split split = lrl::stratified_split(ds, cfg.test_fraction, cfg.seed);
  lrl::TrainResult run = lrl::train(cfg, ds, split, "", [](const std::string& row) { std::cout << row << '\n'; });
  std::printf("test acc %.3f, macc %.3f\n", run.final_test.acc, run.final_test.macc);

  lrl::Tape tape;
  const auto out = lrl::classify(tape, ds.clouds[split.test.front()], *run.model,
                                 lrl::eval_sample_seed(cfg.seed, split.test.front()));
  std::cout << lrl::region_dump(out.records);
}
