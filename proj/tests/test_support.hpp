#pragma once

#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "ertn/tensor.hpp"

namespace ertn::test {

inline DenseTensor random_tensor(const std::vector<int>& dims, std::mt19937_64& rng) {
  DenseTensor t(dims);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& v : t.elements()) v = cplx(gauss(rng), gauss(rng));
  return t;
}

// Index-loop contraction oracle, independent of the production path.
inline DenseTensor naive_contract(const DenseTensor& a, const DenseTensor& b,
                                  const std::vector<std::pair<int, int>>& pairs) {
  std::vector<char> used_a(a.rank(), 0), used_b(b.rank(), 0);
  for (auto [pa, pb] : pairs) {
    used_a[pa] = 1;
    used_b[pb] = 1;
  }
  std::vector<int> free_a, free_b;
  for (int k = 0; k < a.rank(); ++k)
    if (!used_a[k]) free_a.push_back(k);
  for (int k = 0; k < b.rank(); ++k)
    if (!used_b[k]) free_b.push_back(k);

  std::vector<int> out_dims;
  for (int k : free_a) out_dims.push_back(a.dim(k));
  for (int k : free_b) out_dims.push_back(b.dim(k));
  DenseTensor out(out_dims.empty() ? std::vector<int>{} : out_dims);

  std::vector<int> ia(a.rank(), 0), ib(b.rank(), 0), io(out_dims.size(), 0);
  std::vector<int> sum_dims;
  for (auto [pa, pb] : pairs) {
    (void)pb;
    sum_dims.push_back(a.dim(pa));
  }
  std::vector<int> is(pairs.size(), 0);

  auto advance = [](std::vector<int>& idx, const std::vector<int>& dims) {
    for (int k = static_cast<int>(idx.size()) - 1; k >= 0; --k) {
      if (++idx[k] < dims[k]) return true;
      idx[k] = 0;
    }
    return false;
  };

  do {
    for (std::size_t k = 0; k < free_a.size(); ++k) ia[free_a[k]] = io[k];
    for (std::size_t k = 0; k < free_b.size(); ++k) ib[free_b[k]] = io[free_a.size() + k];
    cplx acc{0.0, 0.0};
    std::fill(is.begin(), is.end(), 0);
    do {
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        ia[pairs[k].first] = is[k];
        ib[pairs[k].second] = is[k];
      }
      acc += a.at(ia) * b.at(ib);
    } while (advance(is, sum_dims));
    out.at(io) = acc;
  } while (advance(io, out_dims));
  return out;
}

inline double max_abs_diff(const DenseTensor& a, const DenseTensor& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

}  // namespace ertn::test
