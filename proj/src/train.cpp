#include "dnnshield/train.hpp"

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "dnnshield/engine.hpp"
#include "dnnshield/error.hpp"
#include "dnnshield/rng.hpp"

namespace dnnshield {

Model initialize(const Model& arch, std::uint64_t seed) {
  arch.validate();
  Model model = arch;
  CounterRng rng(seed, StreamDomain::Initialization);
  for (Layer& layer : model.layers) {
    for (Filter& filter : layer.filters) {
      const double r = 1.0 / std::sqrt(static_cast<double>(filter.weight_count()));
      for (float& w : filter.weights.data) w = static_cast<float>(rng.uniform(-r, r));
      filter.bias = static_cast<float>(rng.uniform(-r, r));
    }
  }
  model.train_accuracy.reset();
  return model;
}

double accuracy(const Model& model, const LabeledDataset& dataset) {
  if (dataset.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (argmax(forward(model, dataset.inputs[i]).logits) == dataset.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

Model train_fixture(const LabeledDataset& dataset, const Model& arch, const TrainOptions& options) {
  require(dataset.size() > 0, ErrorKind::EmptyCorpus, "training set is empty");
  require(options.learning_rate > 0.0, ErrorKind::InvalidArgument, "learning rate must be > 0");
  require(options.batch_size >= 1, ErrorKind::InvalidArgument, "batch size must be >= 1");
  dataset.validate(arch.num_classes);

  Model model = initialize(arch, options.seed);
  ParameterGradients grads(model);
  std::vector<std::size_t> order(dataset.size());

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng shuffle(options.seed, StreamDomain::Shuffle, static_cast<std::uint32_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle.below(i)]);
    }
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      grads.clear();
      double batch_loss = 0.0;
      try {
        for (std::size_t j = start; j < end; ++j) {
          batch_loss += accumulate_cross_entropy_gradients(model, dataset.inputs[order[j]],
                                                           dataset.labels[order[j]], grads);
        }
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::NumericalError) {
          fail(ErrorKind::DivergenceError, "epoch " + std::to_string(epoch) + ": " + e.what());
        }
        throw;
      }
      if (!std::isfinite(batch_loss)) {
        fail(ErrorKind::DivergenceError, "loss became non-finite in epoch " + std::to_string(epoch));
      }
      const float step = static_cast<float>(options.learning_rate / static_cast<double>(end - start));
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        for (std::size_t f = 0; f < model.layers[l].filters.size(); ++f) {
          Filter& filter = model.layers[l].filters[f];
          const auto& gw = grads.weights[l][f];
          for (std::size_t w = 0; w < gw.size(); ++w) filter.weights.data[w] -= step * gw[w];
          filter.bias -= step * grads.biases[l][f];
        }
      }
    }
  }
  try {
    model.train_accuracy = accuracy(model, dataset);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::NumericalError) fail(ErrorKind::DivergenceError, e.what());
    throw;
  }
  return model;
}

}  // namespace dnnshield
