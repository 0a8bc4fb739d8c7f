#include "dnnshield/fixture.hpp"

#include <algorithm>

#include "dnnshield/rng.hpp"

namespace dnnshield::fixture {

namespace {

constexpr std::size_t N = kImageSize;

void put(Tensor& img, std::size_t y, std::size_t x, float v) {
  if (y < N && x < N) img.data[y * N + x] = std::max(img.data[y * N + x], v);
}

}  // namespace

LabeledDataset synthetic_dataset(std::size_t count, std::uint64_t seed) {
  LabeledDataset ds;
  ds.inputs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    CounterRng rng(seed, StreamDomain::Dataset, static_cast<std::uint32_t>(i));
    const std::size_t label = i % kClasses;
    Tensor img({1, N, N});
    for (float& v : img.data) v = static_cast<float>(rng.uniform(0.0, 0.25));
    const auto intensity = static_cast<float>(rng.uniform(0.55, 1.0));
    const std::size_t a = 2 + rng.below(N - 4);  // stroke offset
    const std::size_t lo = rng.below(3);
    const std::size_t len = N - 2 - rng.below(4);
    switch (label) {
      case 0:  // horizontal bar
        for (std::size_t x = lo; x < lo + len; ++x) put(img, a, x, intensity);
        break;
      case 1:  // vertical bar
        for (std::size_t y = lo; y < lo + len; ++y) put(img, y, a, intensity);
        break;
      case 2: {  // diagonal stroke
        const std::size_t shift = rng.below(5);
        for (std::size_t t = 0; t + shift < N; ++t) put(img, t, t + shift, intensity);
        break;
      }
      default: {  // square ring
        const std::size_t side = 4 + rng.below(3);
        const std::size_t oy = rng.below(N - side), ox = rng.below(N - side);
        for (std::size_t t = 0; t < side; ++t) {
          put(img, oy, ox + t, intensity);
          put(img, oy + side - 1, ox + t, intensity);
          put(img, oy + t, ox, intensity);
          put(img, oy + t, ox + side - 1, intensity);
        }
        break;
      }
    }
    for (float& v : img.data) {
      v = std::clamp(v + static_cast<float>(0.08 * rng.normal()), 0.0f, 1.0f);
    }
    ds.inputs.push_back(std::move(img));
    ds.labels.push_back(label);
  }
  return ds;
}

Model architecture() {
  Model model;
  model.input_shape = {1, N, N};
  model.num_classes = kClasses;
  model.layers = {Layer::conv2d(8, 1, 3),
                  Layer::relu(),
                  Layer::max_pool(2, 2),
                  Layer::flatten(),
                  Layer::fully_connected(32, 8 * 5 * 5),
                  Layer::relu(),
                  Layer::fully_connected(kClasses, 32),
                  Layer::softmax()};
  return model;
}

TrainOptions training(std::uint64_t seed) {
  TrainOptions options;
  options.epochs = 100;
  options.learning_rate = 0.1;
  options.seed = seed;
  return options;
}

SparsifierParams sparsifier() {
  SparsifierParams params;
  params.lambda = 0.2;
  params.gamma = 64.0;
  return params;
}

}  // namespace dnnshield::fixture
