#pragma once

// Central finite-difference check of backward() on one random draw of
// shape, parameters and batch.

#include "lesionkit/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace lesionkit::test {

inline constexpr double kFiniteDifferenceStep = 1e-5;
// Components smaller than this are compared on an absolute scale; central
// differences on an O(1) loss carry ~1e-10 of truncation and roundoff.
inline constexpr double kRelativeFloor = 1e-6;

struct GradientDraw
{
  ModelParams params;
  Eigen::MatrixXd x;
  std::vector<int> labels;
  std::vector<double> annotation;
  std::vector<std::uint8_t> available;
  LossOptions options;

  BatchTargets targets() const { return { labels, annotation, available }; }
};

//! Smallest |pre-activation| over both hidden layers and the batch.
inline double
kink_distance(const ModelParams& p, const Eigen::MatrixXd& x)
{
  const Eigen::MatrixXd z1 = (p.w1() * x.transpose()).colwise() + p.b1();
  const Eigen::MatrixXd z2 = (p.w2() * z1.cwiseMax(0.0)).colwise() + p.b2();
  return std::min(z1.cwiseAbs().minCoeff(), z2.cwiseAbs().minCoeff());
}

//! Draws until no ReLU sits within 1e-3 of its kink.
inline GradientDraw
random_draw(std::mt19937_64& rng)
{
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(0.2, 2.0);
  for (;;) {
    GradientDraw d;
    const NetworkShape shape{ 2 + rng() % 7, 2 + rng() % 6, 2 + rng() % 5 };
    d.params = ModelParams::random(shape, rng());
    for (Eigen::Index i = 0; i < d.params.data().size(); ++i)
      d.params.data()[i] += 0.1 * n(rng); // biases away from zero too
    const std::size_t batch = 1 + rng() % 8;
    d.x.resize(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(shape.input));
    for (Eigen::Index i = 0; i < d.x.size(); ++i)
      d.x.data()[i] = n(rng);
    for (std::size_t i = 0; i < batch; ++i) {
      d.labels.push_back(static_cast<int>(rng() % 2));
      d.annotation.push_back(n(rng));
      d.available.push_back(static_cast<std::uint8_t>(rng() % 3 != 0));
    }
    d.options.class_weights = { u(rng), u(rng) };
    d.options.weights = { u(rng), u(rng) };
    d.options.auxiliary = rng() % 4 != 0;
    if (kink_distance(d.params, d.x) > 1e-3)
      return d;
  }
}

//! Max over parameters of |a - n| / max(|a|, |n|, floor).
inline double
max_relative_error(const GradientDraw& d)
{
  const auto targets = d.targets();
  const Eigen::VectorXd analytic = backward(d.params, d.x, targets, d.options).gradient;
  ModelParams probe = d.params;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < probe.data().size(); ++i) {
    const double saved = probe.data()[i];
    probe.data()[i] = saved + kFiniteDifferenceStep;
    const double up = loss(probe, d.x, targets, d.options).total;
    probe.data()[i] = saved - kFiniteDifferenceStep;
    const double down = loss(probe, d.x, targets, d.options).total;
    probe.data()[i] = saved;
    const double numeric = (up - down) / (2 * kFiniteDifferenceStep);
    const double scale =
      std::max({ std::abs(analytic[i]), std::abs(numeric), kRelativeFloor });
    worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
  }
  return worst;
}

} // namespace lesionkit::test
