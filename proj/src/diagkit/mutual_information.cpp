#include "multiexit/diagkit/mutual_information.hpp"

#include <algorithm>
#include <cmath>

namespace multiexit::diagkit {

Samples Samples::column(const std::vector<double>& v) {
  Samples s;
  s.rows = static_cast<int>(v.size());
  s.cols = 1;
  s.values = v;
  return s;
}

Samples Samples::column(const std::vector<int>& v) {
  Samples s;
  s.rows = static_cast<int>(v.size());
  s.cols = 1;
  s.values.assign(v.begin(), v.end());
  return s;
}

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major).
// Returns eigenvalues and fills `vectors` with the corresponding columns.
std::vector<double> jacobi_symmetric(std::vector<double> m, int d, std::vector<double>& vectors) {
  vectors.assign(static_cast<std::size_t>(d) * d, 0.0);
  for (int i = 0; i < d; ++i) vectors[static_cast<std::size_t>(i) * d + i] = 1.0;
  auto at = [&](std::vector<double>& a, int r, int c) -> double& {
    return a[static_cast<std::size_t>(r) * d + c];
  };
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < d; ++p) {
      for (int q = p + 1; q < d; ++q) off += std::abs(at(m, p, q));
    }
    if (off < 1e-14) break;
    for (int p = 0; p < d; ++p) {
      for (int q = p + 1; q < d; ++q) {
        const double apq = at(m, p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (at(m, q, q) - at(m, p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int i = 0; i < d; ++i) {
          const double mip = at(m, i, p);
          const double miq = at(m, i, q);
          at(m, i, p) = c * mip - s * miq;
          at(m, i, q) = s * mip + c * miq;
        }
        for (int i = 0; i < d; ++i) {
          const double mpi = at(m, p, i);
          const double mqi = at(m, q, i);
          at(m, p, i) = c * mpi - s * mqi;
          at(m, q, i) = s * mpi + c * mqi;
        }
        for (int i = 0; i < d; ++i) {
          const double vip = at(vectors, i, p);
          const double viq = at(vectors, i, q);
          at(vectors, i, p) = c * vip - s * viq;
          at(vectors, i, q) = s * vip + c * viq;
        }
      }
    }
  }
  std::vector<double> eigenvalues(d);
  for (int i = 0; i < d; ++i) eigenvalues[i] = at(m, i, i);
  return eigenvalues;
}

std::vector<int> bin_indices(const Samples& x, int bins) {
  // Per-dimension equal-width bins, combined into one cell id per sample.
  std::vector<int> cells(x.rows, 0);
  for (int c = 0; c < x.cols; ++c) {
    double lo = x.at(0, c);
    double hi = lo;
    for (int r = 1; r < x.rows; ++r) {
      lo = std::min(lo, x.at(r, c));
      hi = std::max(hi, x.at(r, c));
    }
    const double width = hi - lo;
    for (int r = 0; r < x.rows; ++r) {
      int b = 0;
      if (width > 0.0) {
        b = static_cast<int>((x.at(r, c) - lo) / width * bins);
        b = std::min(bins - 1, std::max(0, b));
      }
      cells[r] = cells[r] * bins + b;
    }
  }
  return cells;
}

}  // namespace

Samples principal_projection(const Samples& x, int count) {
  const int d = x.cols;
  if (count >= d) return x;
  std::vector<double> mean(d, 0.0);
  for (int r = 0; r < x.rows; ++r) {
    for (int c = 0; c < d; ++c) mean[c] += x.at(r, c);
  }
  for (auto& m : mean) m /= x.rows;
  std::vector<double> cov(static_cast<std::size_t>(d) * d, 0.0);
  for (int r = 0; r < x.rows; ++r) {
    for (int i = 0; i < d; ++i) {
      const double a = x.at(r, i) - mean[i];
      for (int j = i; j < d; ++j) {
        cov[static_cast<std::size_t>(i) * d + j] += a * (x.at(r, j) - mean[j]);
      }
    }
  }
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < i; ++j) {
      cov[static_cast<std::size_t>(i) * d + j] = cov[static_cast<std::size_t>(j) * d + i];
    }
  }
  const double inv = x.rows > 1 ? 1.0 / (x.rows - 1) : 1.0;
  for (auto& v : cov) v *= inv;

  std::vector<double> vectors;
  const auto eigenvalues = jacobi_symmetric(cov, d, vectors);
  std::vector<int> order(d);
  for (int i = 0; i < d; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return eigenvalues[a] > eigenvalues[b]; });

  Samples out;
  out.rows = x.rows;
  out.cols = count;
  out.values.assign(static_cast<std::size_t>(x.rows) * count, 0.0);
  for (int r = 0; r < x.rows; ++r) {
    for (int k = 0; k < count; ++k) {
      const int col = order[k];
      double acc = 0.0;
      for (int i = 0; i < d; ++i) {
        acc += (x.at(r, i) - mean[i]) * vectors[static_cast<std::size_t>(i) * d + col];
      }
      out.values[static_cast<std::size_t>(r) * count + k] = acc;
    }
  }
  return out;
}

double estimate_mutual_information(const Samples& a, const Samples& b, int bins) {
  if (a.rows != b.rows) throw ContractError("mutual information needs equal sample counts");
  if (bins < 2) throw ContractError("mutual information needs at least 2 bins");
  if (a.rows == 0) return 0.0;

  const Samples ar = a.cols > 2 ? principal_projection(a, 2) : a;
  const Samples br = b.cols > 2 ? principal_projection(b, 2) : b;

  const auto ca = bin_indices(ar, bins);
  const auto cb = bin_indices(br, bins);
  const int cells_a = static_cast<int>(std::pow(bins, ar.cols));
  const int cells_b = static_cast<int>(std::pow(bins, br.cols));

  std::vector<double> pa(cells_a, 0.0);
  std::vector<double> pb(cells_b, 0.0);
  std::vector<double> joint(static_cast<std::size_t>(cells_a) * cells_b, 0.0);
  const double w = 1.0 / a.rows;
  for (int r = 0; r < a.rows; ++r) {
    pa[ca[r]] += w;
    pb[cb[r]] += w;
    joint[static_cast<std::size_t>(ca[r]) * cells_b + cb[r]] += w;
  }

  double mi = 0.0;
  for (int i = 0; i < cells_a; ++i) {
    if (pa[i] == 0.0) continue;
    for (int j = 0; j < cells_b; ++j) {
      const double pij = joint[static_cast<std::size_t>(i) * cells_b + j];
      if (pij == 0.0 || pb[j] == 0.0) continue;
      mi += pij * std::log2(pij / (pa[i] * pb[j]));
    }
  }
  return std::max(0.0, mi);
}

}  // namespace multiexit::diagkit
