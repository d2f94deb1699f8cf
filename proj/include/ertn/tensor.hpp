#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace ertn {

using cplx = std::complex<double>;

/// Dense complex tensor with positional legs. Elements are stored row-major
/// over the declared leg order (last leg fastest); this is the canonical
/// linearization used by every file format and oracle in the project.
class DenseTensor {
 public:
  DenseTensor() = default;  // rank-0, single zero element
  explicit DenseTensor(std::vector<int> dims);

  static DenseTensor scalar(cplx value);

  int rank() const { return static_cast<int>(dims_.size()); }
  const std::vector<int>& dims() const { return dims_; }
  int dim(int axis) const { return dims_.at(axis); }
  std::size_t size() const { return data_.size(); }

  std::span<cplx> elements() { return data_; }
  std::span<const cplx> elements() const { return data_; }
  cplx& operator[](std::size_t i) { return data_[i]; }
  const cplx& operator[](std::size_t i) const { return data_[i]; }

  cplx& at(std::span<const int> index);
  const cplx& at(std::span<const int> index) const;

  /// New tensor whose axis k is this tensor's axis order[k].
  DenseTensor permuted(std::span<const int> order) const;
  DenseTensor conjugated() const;
  double norm() const;
  bool all_finite() const;

  DenseTensor& operator*=(cplx factor);
  DenseTensor& operator+=(const DenseTensor& other);  // same dims

 private:
  std::vector<int> dims_;
  std::vector<cplx> data_{cplx{0.0, 0.0}};
};

/// Bipartition of a tensor's legs into matrix rows and columns. For isometric
/// network tensors the rows are the "in" legs (toward the physical sites) and
/// the columns the "out" legs, so the isometric condition reads M^dag M = I.
struct MatrixView {
  std::vector<int> row_axes;
  std::vector<int> col_axes;
};

void check_view(const DenseTensor& t, const MatrixView& view);

/// Matrix of shape (prod row dims) x (prod col dims) under the view.
Eigen::MatrixXcd matrixize(const DenseTensor& t, const MatrixView& view);

/// Inverse of matrixize: scatter matrix entries back into tensor layout.
DenseTensor dematrixize(const Eigen::MatrixXcd& m, const std::vector<int>& dims,
                        const MatrixView& view);

/// Pairwise contraction over the given (axis-of-a, axis-of-b) pairs. Result
/// legs are the unpaired legs of a followed by the unpaired legs of b, in
/// declaration order. An empty pair list is an outer product.
DenseTensor contract(const DenseTensor& a, const DenseTensor& b,
                     std::span<const std::pair<int, int>> pairs);

struct SvdResult {
  DenseTensor u;          // legs: view.row legs then the new bond leg
  std::vector<double> s;  // nonnegative, descending
  DenseTensor w;          // legs: the new bond leg then view.col legs
};

/// SVD of the matrixized tensor. u has orthonormal columns, w orthonormal
/// rows; u . diag(s) . w reconstructs t under the view.
SvdResult svd(const DenseTensor& t, const MatrixView& view);

/// Haar-like random isometry: complex Gaussian matrix followed by thin QR
/// with the R diagonal phase-fixed. Requires prod(row dims) >= prod(col dims).
DenseTensor random_isometry(const std::vector<int>& dims, const MatrixView& view,
                            std::mt19937_64& rng);

/// max-abs deviation of M^dag M from the identity under the view.
double isometry_deviation(const DenseTensor& t, const MatrixView& view);

/// max-abs deviation of M M^dag from the identity (second disentangler condition).
double coisometry_deviation(const DenseTensor& t, const MatrixView& view);

}  // namespace ertn
