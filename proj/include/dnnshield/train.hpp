#pragma once

#include <cstddef>
#include <cstdint>

#include "dnnshield/model.hpp"

namespace dnnshield {

struct TrainOptions {
  std::size_t epochs = 10;
  double learning_rate = 0.05;
  std::uint64_t seed = 1;
  std::size_t batch_size = 16;
};

/// Fills every conv/fc weight and bias with Uniform(-r, r), r = 1/sqrt(fan_in),
/// drawn from a stream fixed by `seed`.
Model initialize(const Model& arch, std::uint64_t seed);

/// Mini-batch SGD on cross-entropy from a seeded initialisation. Deterministic for a
/// given seed. Records the final training accuracy on the returned model. Throws
/// DivergenceError if the loss becomes non-finite.
Model train_fixture(const LabeledDataset& dataset, const Model& arch, const TrainOptions& options);

double accuracy(const Model& model, const LabeledDataset& dataset);

}  // namespace dnnshield
