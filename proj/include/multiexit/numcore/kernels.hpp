#pragma once

#include <cstddef>

namespace multiexit::numcore::kernels {

// Shared forward kernels. The graph ops and the no-graph eval path both
// call these, so the two paths produce bit-identical values.

// y[n,:] = x[n,:] * W + b, W is [in x out] row-major.
void dense(const double* x, int n, int in_dim, int out_dim, const double* w, const double* b,
           double* y);

void relu(const double* x, std::size_t n, double* y);

void sigmoid(const double* x, std::size_t n, double* y);

// Row-wise softmax with max-subtraction.
void softmax(const double* x, int n, int cols, double* y);

}  // namespace multiexit::numcore::kernels
