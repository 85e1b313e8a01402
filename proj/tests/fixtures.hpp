#pragma once

// Hand-written fixture networks. All weights are dyadic (multiples of 1/32) so they
// survive a float32 round trip through the model format unchanged.

#include <random>
#include <string>
#include <vector>

#include "riskq/network.hpp"

namespace fixtures {

using riskq::LayerKind;
using riskq::Network;
using riskq::Vector;

struct DenseSpec {
  std::vector<std::vector<double>> weights; // out x in
  std::vector<double> bias;
};

enum class Act { Relu, Tanh };

inline riskq::Dense dense(const DenseSpec& s) {
  riskq::Dense d;
  d.out = s.weights.size();
  d.in = s.weights.front().size();
  for (const auto& row : s.weights)
    d.weights.insert(d.weights.end(), row.begin(), row.end());
  d.bias = s.bias;
  return d;
}

inline Network mlp(const std::vector<DenseSpec>& layers, Act act, bool softmax = true) {
  std::vector<LayerKind> kinds;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    kinds.emplace_back(dense(layers[i]));
    if (i + 1 < layers.size()) {
      if (act == Act::Relu)
        kinds.emplace_back(riskq::ReLU{});
      else
        kinds.emplace_back(riskq::Tanh{});
    }
  }
  if (softmax)
    kinds.emplace_back(riskq::Softmax{});
  return Network(riskq::Shape::flat(layers.front().weights.front().size()), std::move(kinds));
}

// 2 -> 2 ReLU -> 2, no softmax. Hand-computed forward values:
//   (0.3, 0.7) -> hidden (0, 0.55)  -> (-0.55, 1.05)
//   (1.0, 0.0) -> hidden (1.25, 0)  -> (2.5, -0.75)
inline Network tiny_relu() {
  return mlp({{{{1.0, -1.0}, {0.5, 2.0}}, {0.25, -1.0}}, {{{2.0, -1.0}, {-1.0, 1.0}}, {0.0, 0.5}}},
             Act::Relu, false);
}

inline Network relu_a() {
  return mlp({{{{1.375, -3.5}, {-5.125, -1.75}, {-0.125, 0.625}, {0.5, 0.625}}, {0.75, 1.625, 0.75, 2.625}},
              {{{-0.5, -4.5, -6.5, 0.25}, {-2.25, -1.0, 0.5, 1.0}}, {12.0, 2.25}}},
             Act::Relu);
}

inline Network relu_b() {
  return mlp({{{{1.625, -1.25}, {-1.625, -0.5}, {-1.5, -0.125}, {-3.5, -5.0}, {2.5, 2.125}, {0.75, 0.625}},
               {-0.125, 0.375, 1.125, 1.0, -1.25, 0.125}},
              {{{3.125, -1.875, -1.125, -2.25, 2.0, -0.875},
                {1.125, 0.125, -0.25, -4.0, -2.75, 0.5},
                {0.125, -2.0, -0.375, 1.25, 0.75, -2.625},
                {-0.375, 1.25, 0.25, -1.125, -1.875, 1.375},
                {-0.625, -1.625, -0.75, 0.75, -1.125, -1.375},
                {1.0, -1.0, 1.875, -0.25, 2.25, 1.5}},
               {0.0, -0.125, -0.875, -1.25, 1.75, -0.375}},
              {{{-0.625, -0.625, 0.75, 0.625, -1.125, 0.375},
                {0.5, -0.25, 0.75, 1.625, -1.0, -0.25},
                {1.25, 0.75, 0.125, 0.25, -1.125, -0.375}},
               {-2.0, -0.25, -1.25}}},
             Act::Relu);
}

inline Network relu_c() {
  return mlp({{{{1.125, -0.875}, {-4.0, -3.5}, {-3.125, 3.125}, {-3.0, -0.25},
                {2.0, 0.875}, {-7.0, -2.625}, {3.375, -0.5}, {5.25, 5.0}},
               {2.25, 2.0, -0.25, -0.75, 1.25, -0.125, 1.0, -0.625}},
              {{{0.375, 0.125, -0.5, -0.09375, -0.09375, -0.21875, 0.375, 0.15625},
                {-0.9375, 0.5, 0.0625, -0.0625, -0.09375, 0.34375, -0.40625, -0.03125}},
               {-6.0625, -0.28125}}},
             Act::Relu);
}

inline Network tanh_a() {
  return mlp({{{{3.625, 4.625}, {-4.875, -6.625}, {-6.75, 3.5}, {-4.875, 1.0}}, {0.25, -2.0, 1.5, -3.125}},
              {{{8.5, -1.5, 5.5, 2.5}, {0.5, -9.5, 2.0, -8.0}}, {10.25, -1.0}}},
             Act::Tanh);
}

inline Network tanh_b() {
  return mlp({{{{-1.0, -3.375}, {0.75, -3.5}, {4.75, -3.125}, {-6.0, 2.125}, {3.75, 1.625}},
               {-0.125, 2.75, 0.75, -0.875, -1.0}},
              {{{-1.625, 0.0, 0.75, 0.25, -1.75},
                {-0.375, -1.5, 0.5, -0.125, 0.625},
                {0.375, -0.125, 2.125, -1.875, -0.5}},
               {-0.125, 1.375, 0.75}}},
             Act::Tanh);
}

inline Network tanh_c() {
  return mlp({{{{-0.375, 1.625}, {0.625, 1.0}, {0.125, 0.75}, {-1.75, -1.25}, {-2.25, -0.125}, {-4.625, -3.125}},
               {1.25, -0.625, -0.75, 0.0, 3.75, -1.125}},
              {{{0.875, -0.625, -0.875, 0.0, -0.75, 1.0},
                {0.75, -0.375, 2.125, 1.0, 0.375, 0.375},
                {0.5, -0.125, -0.75, 1.875, 1.875, -1.0},
                {-0.125, -0.875, 1.875, 0.0, 0.875, 0.875},
                {-0.875, 0.125, -1.25, 0.625, -1.375, 0.0},
                {-2.25, 0.0, 0.875, 0.25, 0.5, 0.5}},
               {-0.5, 0.875, -1.375, 2.625, -2.25, -1.0}},
              {{{1.375, -1.0, -3.875, 0.875, 0.625, 0.25}, {-0.75, -0.375, 1.5, 1.125, -1.25, -0.5}},
               {9.25, 2.5}}},
             Act::Tanh);
}

// 3 classes whose logits all vanish at (0.5, 0.5): the softmax output is
// uniform there. Rows of the weight matrix sum to zero.
inline Network triple_point() {
  return mlp({{{{0.0, 4.0}, {-3.5, -2.0}, {3.5, -2.0}}, {-2.0, 2.75, -0.75}}}, Act::Relu);
}

inline Network constant_classifier(std::size_t n = 2, std::size_t m = 3) {
  riskq::Dense d;
  d.in = n;
  d.out = m;
  d.weights.assign(n * m, 0.0);
  d.bias.assign(m, 0.0);
  return Network(riskq::Shape::flat(n), {d, riskq::Softmax{}});
}

struct Named {
  std::string name;
  Network net;
};

inline std::vector<Named> two_input_nets() {
  return {{"relu_a", relu_a()}, {"relu_b", relu_b()}, {"relu_c", relu_c()},
          {"tanh_a", tanh_a()}, {"tanh_b", tanh_b()}, {"tanh_c", tanh_c()}};
}

// Seeded dense network n -> hidden -> m (ReLU, softmax) for higher-dimensional
// runs; weights are dyadic like the hand-written ones.
inline Network random_mlp(std::size_t n, std::size_t hidden, std::size_t m, std::uint64_t seed,
                          double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  auto layer = [&](std::size_t in, std::size_t out, double s) {
    riskq::Dense d;
    d.in = in;
    d.out = out;
    d.weights.resize(in * out);
    d.bias.resize(out);
    const double w_scale = s / std::sqrt(static_cast<double>(in));
    for (double& w : d.weights)
      w = std::round(g(rng) * w_scale * 64.0) / 64.0;
    for (double& b : d.bias)
      b = std::round(g(rng) * 0.5 * 64.0) / 64.0;
    return d;
  };
  return Network(riskq::Shape::flat(n),
                 {layer(n, hidden, 4.0 * scale), riskq::ReLU{}, layer(hidden, m, 2.0 * scale), riskq::Softmax{}});
}

} // namespace fixtures
