#include "multiexit/numcore/ops.hpp"

#include <cmath>
#include <string>

#include "multiexit/numcore/kernels.hpp"

namespace multiexit::numcore::ops {

namespace {

std::vector<int> with_last_dim(const std::vector<int>& shape, int last) {
  std::vector<int> out = shape;
  if (out.empty()) {
    out.push_back(last);
  } else {
    out.back() = last;
  }
  return out;
}

bool is_scalar_like(const Tensor& t) { return t.size() == 1 && t.rank() <= 1; }

}  // namespace

TensorPtr dense(const TensorPtr& x, const TensorPtr& weight, const TensorPtr& bias) {
  if (weight->rank() != 2) throw DimensionError("dense weight must be rank 2");
  const int in_dim = weight->shape()[0];
  const int out_dim = weight->shape()[1];
  if (x->cols() != in_dim) {
    throw DimensionError("dense input has " + std::to_string(x->cols()) + " columns, expected " +
                         std::to_string(in_dim));
  }
  if (bias->size() != static_cast<std::size_t>(out_dim)) {
    throw DimensionError("dense bias size mismatch");
  }
  const int n = x->rows();
  auto out = Tensor::zeros(with_last_dim(x->shape(), out_dim));
  kernels::dense(x->data().data(), n, in_dim, out_dim, weight->data().data(), bias->data().data(),
                 out->data().data());
  out->set_parents({x, weight, bias}, [x, weight, bias, n, in_dim, out_dim](Tensor& self) {
    const auto& dy = self.grad();
    if (x->requires_grad()) {
      std::vector<double> dx(x->size(), 0.0);
      for (int r = 0; r < n; ++r) {
        const double* dyr = dy.data() + static_cast<std::size_t>(r) * out_dim;
        double* dxr = dx.data() + static_cast<std::size_t>(r) * in_dim;
        for (int k = 0; k < in_dim; ++k) {
          const double* wk = weight->data().data() + static_cast<std::size_t>(k) * out_dim;
          double s = 0.0;
          for (int j = 0; j < out_dim; ++j) s += dyr[j] * wk[j];
          dxr[k] = s;
        }
      }
      x->accumulate_grad(dx);
    }
    if (weight->requires_grad()) {
      std::vector<double> dw(weight->size(), 0.0);
      for (int r = 0; r < n; ++r) {
        const double* xr = x->data().data() + static_cast<std::size_t>(r) * in_dim;
        const double* dyr = dy.data() + static_cast<std::size_t>(r) * out_dim;
        for (int k = 0; k < in_dim; ++k) {
          double* dwk = dw.data() + static_cast<std::size_t>(k) * out_dim;
          const double xv = xr[k];
          for (int j = 0; j < out_dim; ++j) dwk[j] += xv * dyr[j];
        }
      }
      weight->accumulate_grad(dw);
    }
    if (bias->requires_grad()) {
      std::vector<double> db(bias->size(), 0.0);
      for (int r = 0; r < n; ++r) {
        const double* dyr = dy.data() + static_cast<std::size_t>(r) * out_dim;
        for (int j = 0; j < out_dim; ++j) db[j] += dyr[j];
      }
      bias->accumulate_grad(db);
    }
  });
  return out;
}

TensorPtr relu(const TensorPtr& x) {
  auto out = Tensor::zeros(x->shape());
  kernels::relu(x->data().data(), x->size(), out->data().data());
  out->set_parents({x}, [x](Tensor& self) {
    if (!x->requires_grad()) return;
    const auto& dy = self.grad();
    std::vector<double> dx(x->size());
    for (std::size_t i = 0; i < dx.size(); ++i) {
      dx[i] = x->data()[i] > 0.0 ? dy[i] : 0.0;
    }
    x->accumulate_grad(dx);
  });
  return out;
}

TensorPtr sigmoid(const TensorPtr& x) {
  auto out = Tensor::zeros(x->shape());
  kernels::sigmoid(x->data().data(), x->size(), out->data().data());
  out->set_parents({x}, [x](Tensor& self) {
    if (!x->requires_grad()) return;
    const auto& dy = self.grad();
    std::vector<double> dx(x->size());
    for (std::size_t i = 0; i < dx.size(); ++i) {
      const double y = self.data()[i];
      dx[i] = dy[i] * y * (1.0 - y);
    }
    x->accumulate_grad(dx);
  });
  return out;
}

TensorPtr softmax_rows(const TensorPtr& x) {
  const int n = x->rows();
  const int c = x->cols();
  auto out = Tensor::zeros(x->shape());
  kernels::softmax(x->data().data(), n, c, out->data().data());
  out->set_parents({x}, [x, n, c](Tensor& self) {
    if (!x->requires_grad()) return;
    const auto& dy = self.grad();
    std::vector<double> dx(x->size());
    for (int r = 0; r < n; ++r) {
      const double* yr = self.data().data() + static_cast<std::size_t>(r) * c;
      const double* dyr = dy.data() + static_cast<std::size_t>(r) * c;
      double dot = 0.0;
      for (int j = 0; j < c; ++j) dot += dyr[j] * yr[j];
      double* dxr = dx.data() + static_cast<std::size_t>(r) * c;
      for (int j = 0; j < c; ++j) dxr[j] = yr[j] * (dyr[j] - dot);
    }
    x->accumulate_grad(dx);
  });
  return out;
}

TensorPtr identity(const TensorPtr& x) {
  auto out = Tensor::make(x->shape(), x->data());
  out->set_parents({x}, [x](Tensor& self) {
    if (x->requires_grad()) x->accumulate_grad(self.grad());
  });
  return out;
}

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
  if (!a->same_shape(*b)) {
    if (!(is_scalar_like(*a) && is_scalar_like(*b))) {
      throw DimensionError("add requires matching shapes");
    }
  }
  std::vector<double> d(a->size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a->data()[i] + b->data()[i];
  auto out = Tensor::make(a->shape(), std::move(d));
  out->set_parents({a, b}, [a, b](Tensor& self) {
    if (a->requires_grad()) a->accumulate_grad(self.grad());
    if (b->requires_grad()) b->accumulate_grad(self.grad());
  });
  return out;
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
  // Scalar broadcast (either side).
  if (is_scalar_like(*b) && !is_scalar_like(*a)) {
    const double s = b->data()[0];
    std::vector<double> d(a->size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = a->data()[i] * s;
    auto out = Tensor::make(a->shape(), std::move(d));
    out->set_parents({a, b}, [a, b](Tensor& self) {
      const auto& dy = self.grad();
      if (a->requires_grad()) {
        std::vector<double> da(a->size());
        for (std::size_t i = 0; i < da.size(); ++i) da[i] = dy[i] * b->data()[0];
        a->accumulate_grad(da);
      }
      if (b->requires_grad()) {
        double s = 0.0;
        for (std::size_t i = 0; i < dy.size(); ++i) s += dy[i] * a->data()[i];
        b->accumulate_grad({s});
      }
    });
    return out;
  }
  if (is_scalar_like(*a) && !is_scalar_like(*b)) return mul(b, a);

  if (a->same_shape(*b) || (is_scalar_like(*a) && is_scalar_like(*b))) {
    std::vector<double> d(a->size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = a->data()[i] * b->data()[i];
    auto out = Tensor::make(a->shape(), std::move(d));
    out->set_parents({a, b}, [a, b](Tensor& self) {
      const auto& dy = self.grad();
      if (a->requires_grad()) {
        std::vector<double> da(a->size());
        for (std::size_t i = 0; i < da.size(); ++i) da[i] = dy[i] * b->data()[i];
        a->accumulate_grad(da);
      }
      if (b->requires_grad()) {
        std::vector<double> db(b->size());
        for (std::size_t i = 0; i < db.size(); ++i) db[i] = dy[i] * a->data()[i];
        b->accumulate_grad(db);
      }
    });
    return out;
  }

  // Column broadcast: a [N,C] * b [N,1].
  if (a->rank() == 2 && b->rank() == 2 && b->shape()[1] == 1 && a->shape()[0] == b->shape()[0]) {
    const int n = a->shape()[0];
    const int c = a->shape()[1];
    std::vector<double> d(a->size());
    for (int r = 0; r < n; ++r) {
      const double v = b->data()[r];
      for (int j = 0; j < c; ++j) {
        d[static_cast<std::size_t>(r) * c + j] = a->data()[static_cast<std::size_t>(r) * c + j] * v;
      }
    }
    auto out = Tensor::make(a->shape(), std::move(d));
    out->set_parents({a, b}, [a, b, n, c](Tensor& self) {
      const auto& dy = self.grad();
      if (a->requires_grad()) {
        std::vector<double> da(a->size());
        for (int r = 0; r < n; ++r) {
          const double v = b->data()[r];
          for (int j = 0; j < c; ++j) {
            da[static_cast<std::size_t>(r) * c + j] = dy[static_cast<std::size_t>(r) * c + j] * v;
          }
        }
        a->accumulate_grad(da);
      }
      if (b->requires_grad()) {
        std::vector<double> db(static_cast<std::size_t>(n), 0.0);
        for (int r = 0; r < n; ++r) {
          double s = 0.0;
          for (int j = 0; j < c; ++j) {
            s += dy[static_cast<std::size_t>(r) * c + j] * a->data()[static_cast<std::size_t>(r) * c + j];
          }
          db[r] = s;
        }
        b->accumulate_grad(db);
      }
    });
    return out;
  }

  throw DimensionError("mul: unsupported shape combination");
}

TensorPtr affine(const TensorPtr& a, double k, double c) {
  std::vector<double> d(a->size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = k * a->data()[i] + c;
  auto out = Tensor::make(a->shape(), std::move(d));
  out->set_parents({a}, [a, k](Tensor& self) {
    if (!a->requires_grad()) return;
    const auto& dy = self.grad();
    std::vector<double> da(a->size());
    for (std::size_t i = 0; i < da.size(); ++i) da[i] = k * dy[i];
    a->accumulate_grad(da);
  });
  return out;
}

TensorPtr sum(const TensorPtr& a) {
  double s = 0.0;
  for (double v : a->data()) s += v;
  auto out = Tensor::scalar(s);
  out->set_parents({a}, [a](Tensor& self) {
    if (!a->requires_grad()) return;
    a->accumulate_grad(std::vector<double>(a->size(), self.grad()[0]));
  });
  return out;
}

TensorPtr mean(const TensorPtr& a) {
  double s = 0.0;
  for (double v : a->data()) s += v;
  const double inv = 1.0 / static_cast<double>(a->size());
  auto out = Tensor::scalar(s * inv);
  out->set_parents({a}, [a, inv](Tensor& self) {
    if (!a->requires_grad()) return;
    a->accumulate_grad(std::vector<double>(a->size(), self.grad()[0] * inv));
  });
  return out;
}

TensorPtr concat_cols(const TensorPtr& a, const TensorPtr& b) {
  if (a->rows() != b->rows()) throw DimensionError("concat_cols: row count mismatch");
  const int n = a->rows();
  const int ca = a->cols();
  const int cb = b->cols();
  const bool rank2 = a->rank() == 2 || b->rank() == 2;
  std::vector<double> d(static_cast<std::size_t>(n) * (ca + cb));
  for (int r = 0; r < n; ++r) {
    for (int j = 0; j < ca; ++j) {
      d[static_cast<std::size_t>(r) * (ca + cb) + j] = a->data()[static_cast<std::size_t>(r) * ca + j];
    }
    for (int j = 0; j < cb; ++j) {
      d[static_cast<std::size_t>(r) * (ca + cb) + ca + j] = b->data()[static_cast<std::size_t>(r) * cb + j];
    }
  }
  std::vector<int> shape = rank2 ? std::vector<int>{n, ca + cb} : std::vector<int>{ca + cb};
  auto out = Tensor::make(std::move(shape), std::move(d));
  out->set_parents({a, b}, [a, b, n, ca, cb](Tensor& self) {
    const auto& dy = self.grad();
    if (a->requires_grad()) {
      std::vector<double> da(a->size());
      for (int r = 0; r < n; ++r) {
        for (int j = 0; j < ca; ++j) {
          da[static_cast<std::size_t>(r) * ca + j] = dy[static_cast<std::size_t>(r) * (ca + cb) + j];
        }
      }
      a->accumulate_grad(da);
    }
    if (b->requires_grad()) {
      std::vector<double> db(b->size());
      for (int r = 0; r < n; ++r) {
        for (int j = 0; j < cb; ++j) {
          db[static_cast<std::size_t>(r) * cb + j] = dy[static_cast<std::size_t>(r) * (ca + cb) + ca + j];
        }
      }
      b->accumulate_grad(db);
    }
  });
  return out;
}

TensorPtr select(const TensorPtr& a, int flat_index) {
  if (flat_index < 0 || static_cast<std::size_t>(flat_index) >= a->size()) {
    throw IndexError("select index out of range");
  }
  auto out = Tensor::scalar(a->data()[flat_index]);
  out->set_parents({a}, [a, flat_index](Tensor& self) {
    if (!a->requires_grad()) return;
    std::vector<double> da(a->size(), 0.0);
    da[flat_index] = self.grad()[0];
    a->accumulate_grad(da);
  });
  return out;
}

TensorPtr avg_pool_cols(const TensorPtr& a, int groups) {
  const int n = a->rows();
  const int c = a->cols();
  if (groups <= 0 || c % groups != 0) {
    throw DimensionError("avg_pool_cols: columns must divide evenly into groups");
  }
  const int width = c / groups;
  const double inv = 1.0 / width;
  std::vector<double> d(static_cast<std::size_t>(n) * groups);
  for (int r = 0; r < n; ++r) {
    for (int g = 0; g < groups; ++g) {
      double s = 0.0;
      for (int k = 0; k < width; ++k) {
        s += a->data()[static_cast<std::size_t>(r) * c + g * width + k];
      }
      d[static_cast<std::size_t>(r) * groups + g] = s * inv;
    }
  }
  std::vector<int> shape = a->rank() == 2 ? std::vector<int>{n, groups} : std::vector<int>{groups};
  auto out = Tensor::make(std::move(shape), std::move(d));
  out->set_parents({a}, [a, n, c, groups, width, inv](Tensor& self) {
    if (!a->requires_grad()) return;
    const auto& dy = self.grad();
    std::vector<double> da(a->size());
    for (int r = 0; r < n; ++r) {
      for (int g = 0; g < groups; ++g) {
        const double v = dy[static_cast<std::size_t>(r) * groups + g] * inv;
        for (int k = 0; k < width; ++k) {
          da[static_cast<std::size_t>(r) * c + g * width + k] = v;
        }
      }
    }
    a->accumulate_grad(da);
  });
  return out;
}

TensorPtr cross_entropy(const TensorPtr& probs, const std::vector<int>& targets) {
  const int n = probs->rows();
  const int c = probs->cols();
  if (static_cast<std::size_t>(n) != targets.size()) {
    throw DimensionError("cross_entropy: one target per row required");
  }
  for (int t : targets) {
    if (t < 0 || t >= c) {
      throw IndexError("cross_entropy target " + std::to_string(t) + " out of range for " +
                       std::to_string(c) + " classes");
    }
  }
  double loss = 0.0;
  for (int r = 0; r < n; ++r) {
    double p = probs->data()[static_cast<std::size_t>(r) * c + targets[r]];
    p = std::min(1.0, std::max(kProbClamp, p));
    loss -= std::log(p);
  }
  loss /= static_cast<double>(n);
  auto out = Tensor::scalar(loss);
  out->set_parents({probs}, [probs, targets, n, c](Tensor& self) {
    if (!probs->requires_grad()) return;
    const double g = self.grad()[0];
    std::vector<double> dp(probs->size(), 0.0);
    for (int r = 0; r < n; ++r) {
      const std::size_t idx = static_cast<std::size_t>(r) * c + targets[r];
      const double p = probs->data()[idx];
      // Clamp boundaries kill the derivative.
      if (p >= kProbClamp && p <= 1.0) {
        dp[idx] = -g / (static_cast<double>(n) * p);
      }
    }
    probs->accumulate_grad(dp);
  });
  return out;
}

}  // namespace multiexit::numcore::ops
