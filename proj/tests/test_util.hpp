#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "multiexit/numcore/tensor.hpp"

namespace multiexit::testutil {

// Central-difference gradient of a scalar-valued function with respect to
// one parameter tensor. The loss function must rebuild its graph from the
// current parameter values on every call; this keeps the oracle
// independent of the reverse-mode path it checks.
inline std::vector<double> finite_difference_gradient(const std::function<double()>& loss,
                                                      const numcore::TensorPtr& param,
                                                      double eps = 1e-5) {
  std::vector<double> grad(param->size());
  for (std::size_t i = 0; i < param->size(); ++i) {
    const double saved = param->data()[i];
    param->data()[i] = saved + eps;
    const double up = loss();
    param->data()[i] = saved - eps;
    const double down = loss();
    param->data()[i] = saved;
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

// Norm-relative error between an analytic and a numeric gradient.
inline double gradient_relative_error(const std::vector<double>& analytic,
                                      const std::vector<double>& numeric) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nb += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / (std::sqrt(na) + std::sqrt(nb) + 1e-12);
}

inline numcore::TensorPtr random_tensor(std::vector<int> shape, std::mt19937_64& rng, double lo,
                                        double hi, bool requires_grad = false) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  std::vector<double> data(n);
  for (auto& v : data) v = dist(rng);
  return numcore::Tensor::make(std::move(shape), std::move(data), requires_grad);
}

inline std::vector<int> random_labels(int n, int classes, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dist(0, classes - 1);
  std::vector<int> y(n);
  for (auto& v : y) v = dist(rng);
  return y;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace multiexit::testutil
