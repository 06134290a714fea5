#pragma once

#include <vector>

#include "multiexit/numcore/tensor.hpp"

namespace multiexit::numcore::ops {

// Graph-recording operations. Inputs of rank 0/1 are treated as a single
// row where a 2-D operand is expected; output rank follows the input.

// x [N,in] (or [in]) -> [N,out]: x*W + b as one node.
TensorPtr dense(const TensorPtr& x, const TensorPtr& weight, const TensorPtr& bias);

TensorPtr relu(const TensorPtr& x);
TensorPtr sigmoid(const TensorPtr& x);
TensorPtr softmax_rows(const TensorPtr& x);
TensorPtr identity(const TensorPtr& x);

// Elementwise add; also accepts scalar + scalar.
TensorPtr add(const TensorPtr& a, const TensorPtr& b);

// Elementwise multiply with three accepted layouts:
//   same shape, scalar * tensor, or [N,C] * [N,1] (column broadcast).
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);

// k*a + c with plain-number coefficients.
TensorPtr affine(const TensorPtr& a, double k, double c);
inline TensorPtr scale(const TensorPtr& a, double k) { return affine(a, k, 0.0); }
inline TensorPtr one_minus(const TensorPtr& a) { return affine(a, -1.0, 1.0); }

TensorPtr sum(const TensorPtr& a);
TensorPtr mean(const TensorPtr& a);

TensorPtr concat_cols(const TensorPtr& a, const TensorPtr& b);

// Scalar node holding a[flat_index]; gradient scatters back one-hot.
TensorPtr select(const TensorPtr& a, int flat_index);

// Mean over `groups` contiguous column groups; cols must divide evenly.
TensorPtr avg_pool_cols(const TensorPtr& a, int groups);

// Mean over rows of -log(p[row, target]) with p clamped to [1e-12, 1].
// Targets must lie in [0, cols).
TensorPtr cross_entropy(const TensorPtr& probs, const std::vector<int>& targets);

constexpr double kProbClamp = 1e-12;

}  // namespace multiexit::numcore::ops
