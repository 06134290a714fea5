#include "multiexit/numcore/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace multiexit::numcore::kernels {

void dense(const double* x, int n, int in_dim, int out_dim, const double* w, const double* b,
           double* y) {
  for (int r = 0; r < n; ++r) {
    double* yr = y + static_cast<std::size_t>(r) * out_dim;
    for (int j = 0; j < out_dim; ++j) yr[j] = b[j];
    const double* xr = x + static_cast<std::size_t>(r) * in_dim;
    for (int k = 0; k < in_dim; ++k) {
      const double xv = xr[k];
      const double* wk = w + static_cast<std::size_t>(k) * out_dim;
      for (int j = 0; j < out_dim; ++j) yr[j] += xv * wk[j];
    }
  }
}

void relu(const double* x, std::size_t n, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void sigmoid(const double* x, std::size_t n, double* y) {
  for (std::size_t i = 0; i < n; ++i) {
    // Split on sign so exp never overflows.
    if (x[i] >= 0.0) {
      y[i] = 1.0 / (1.0 + std::exp(-x[i]));
    } else {
      const double e = std::exp(x[i]);
      y[i] = e / (1.0 + e);
    }
  }
}

void softmax(const double* x, int n, int cols, double* y) {
  for (int r = 0; r < n; ++r) {
    const double* xr = x + static_cast<std::size_t>(r) * cols;
    double* yr = y + static_cast<std::size_t>(r) * cols;
    double mx = xr[0];
    for (int j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
    double sum = 0.0;
    for (int j = 0; j < cols; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      sum += yr[j];
    }
    const double inv = 1.0 / sum;
    for (int j = 0; j < cols; ++j) yr[j] *= inv;
  }
}

}  // namespace multiexit::numcore::kernels
