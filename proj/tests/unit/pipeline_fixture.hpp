#pragma once

// Tiny dataset and config shared by the pipeline-level tests.

#include "sigcl/pipeline.hpp"

namespace testing {

// 4 classes x 21 frames; with base_fraction 16/21 and 5 shots this gives a
// 64-frame base and a 20-frame support set.
inline sigcl::sigdata::Dataset tiny_train(std::uint64_t seed = 100) {
  using sigcl::sigdata::Modulation;
  sigcl::sigdata::DatasetSpec spec{{Modulation::bpsk, Modulation::qpsk, Modulation::psk8, Modulation::qam16},
                                   7, {10, 14, 18}, 128, seed};
  return sigcl::sigdata::generate_dataset(spec);
}

inline sigcl::sigdata::Dataset tiny_test(std::uint64_t seed = 200) {
  using sigcl::sigdata::Modulation;
  sigcl::sigdata::DatasetSpec spec{{Modulation::bpsk, Modulation::qpsk, Modulation::psk8, Modulation::qam16},
                                   4, {10, 18}, 128, seed};
  return sigcl::sigdata::generate_dataset(spec);
}

inline sigcl::pipeline::RunConfig smoke_config(std::uint64_t seed = 0) {
  sigcl::pipeline::RunConfig cfg;
  cfg.seed = seed;
  cfg.e_rl = 3;
  cfg.e_cl = 2;
  cfg.base_fraction = 16.0 / 21.0;
  cfg.finetune_epochs = 3;
  return cfg;
}

}  // namespace testing
