#include "ertn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ertn/errors.hpp"

namespace ertn {

namespace {

std::size_t checked_volume(const std::vector<int>& dims) {
  std::size_t n = 1;
  for (int d : dims) {
    if (d <= 0) throw ConfigError("tensor dimensions must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

// Row-major strides (last axis fastest).
std::vector<std::size_t> strides_of(const std::vector<int>& dims) {
  std::vector<std::size_t> s(dims.size(), 1);
  for (int k = static_cast<int>(dims.size()) - 2; k >= 0; --k)
    s[k] = s[k + 1] * static_cast<std::size_t>(dims[k + 1]);
  return s;
}

}  // namespace

DenseTensor::DenseTensor(std::vector<int> dims) : dims_(std::move(dims)) {
  data_.assign(checked_volume(dims_), cplx{0.0, 0.0});
}

DenseTensor DenseTensor::scalar(cplx value) {
  DenseTensor t;
  t.data_[0] = value;
  return t;
}

cplx& DenseTensor::at(std::span<const int> index) {
  return const_cast<cplx&>(std::as_const(*this).at(index));
}

const cplx& DenseTensor::at(std::span<const int> index) const {
  if (index.size() != dims_.size()) throw ConfigError("index rank mismatch");
  std::size_t off = 0;
  for (std::size_t k = 0; k < dims_.size(); ++k) {
    if (index[k] < 0 || index[k] >= dims_[k]) throw ConfigError("index out of range");
    off = off * static_cast<std::size_t>(dims_[k]) + static_cast<std::size_t>(index[k]);
  }
  return data_[off];
}

DenseTensor DenseTensor::permuted(std::span<const int> order) const {
  if (order.size() != dims_.size()) throw ConfigError("permutation rank mismatch");
  std::vector<char> seen(dims_.size(), 0);
  std::vector<int> out_dims(dims_.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (order[k] < 0 || order[k] >= rank() || seen[order[k]])
      throw ConfigError("invalid permutation");
    seen[order[k]] = 1;
    out_dims[k] = dims_[order[k]];
  }
  DenseTensor out(out_dims);
  if (dims_.empty()) {
    out.data_[0] = data_[0];
    return out;
  }
  const auto in_strides = strides_of(dims_);
  // stride of input corresponding to each output axis
  std::vector<std::size_t> step(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) step[k] = in_strides[order[k]];

  const int last = static_cast<int>(out_dims.size()) - 1;
  std::vector<int> idx(out_dims.size(), 0);
  std::size_t src = 0;
  const std::size_t n = data_.size();
  for (std::size_t dst = 0; dst < n; ++dst) {
    out.data_[dst] = data_[src];
    // odometer increment over the output index
    for (int k = last; k >= 0; --k) {
      src += step[k];
      if (++idx[k] < out_dims[k]) break;
      src -= step[k] * static_cast<std::size_t>(out_dims[k]);
      idx[k] = 0;
    }
  }
  return out;
}

DenseTensor DenseTensor::conjugated() const {
  DenseTensor out = *this;
  for (auto& v : out.data_) v = std::conj(v);
  return out;
}

double DenseTensor::norm() const {
  double s = 0.0;
  for (const auto& v : data_) s += std::norm(v);
  return std::sqrt(s);
}

bool DenseTensor::all_finite() const {
  for (const auto& v : data_)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  return true;
}

DenseTensor& DenseTensor::operator*=(cplx factor) {
  for (auto& v : data_) v *= factor;
  return *this;
}

DenseTensor& DenseTensor::operator+=(const DenseTensor& other) {
  if (dims_ != other.dims_) throw ConfigError("tensor shape mismatch in +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

void check_view(const DenseTensor& t, const MatrixView& view) {
  std::vector<char> seen(t.rank(), 0);
  for (int a : view.row_axes) {
    if (a < 0 || a >= t.rank() || seen[a]) throw ConfigError("invalid matrix view");
    seen[a] = 1;
  }
  for (int a : view.col_axes) {
    if (a < 0 || a >= t.rank() || seen[a]) throw ConfigError("invalid matrix view");
    seen[a] = 1;
  }
  for (char c : seen)
    if (!c) throw ConfigError("matrix view must cover all legs");
}

Eigen::MatrixXcd matrixize(const DenseTensor& t, const MatrixView& view) {
  check_view(t, view);
  std::vector<int> order = view.row_axes;
  order.insert(order.end(), view.col_axes.begin(), view.col_axes.end());
  DenseTensor p = t.permuted(order);
  Eigen::Index rows = 1, cols = 1;
  for (int a : view.row_axes) rows *= t.dim(a);
  for (int a : view.col_axes) cols *= t.dim(a);
  Eigen::MatrixXcd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = p[static_cast<std::size_t>(r) * cols + c];
  return m;
}

DenseTensor dematrixize(const Eigen::MatrixXcd& m, const std::vector<int>& dims,
                        const MatrixView& view) {
  std::vector<int> perm_dims;
  perm_dims.reserve(dims.size());
  std::vector<int> order = view.row_axes;
  order.insert(order.end(), view.col_axes.begin(), view.col_axes.end());
  for (int a : order) perm_dims.push_back(dims.at(a));
  DenseTensor p(perm_dims);
  const Eigen::Index cols = m.cols();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      p[static_cast<std::size_t>(r) * cols + c] = m(r, c);
  // invert the permutation
  std::vector<int> inv(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) inv[order[k]] = static_cast<int>(k);
  return p.permuted(inv);
}

DenseTensor contract(const DenseTensor& a, const DenseTensor& b,
                     std::span<const std::pair<int, int>> pairs) {
  std::vector<char> used_a(a.rank(), 0), used_b(b.rank(), 0);
  for (const auto& [pa, pb] : pairs) {
    if (pa < 0 || pa >= a.rank() || pb < 0 || pb >= b.rank())
      throw ConfigError("contraction axis out of range");
    if (used_a[pa] || used_b[pb]) throw ConfigError("axis paired twice");
    if (a.dim(pa) != b.dim(pb)) throw ConfigError("contraction dimension mismatch");
    used_a[pa] = 1;
    used_b[pb] = 1;
  }

  std::vector<int> free_a, free_b, order_a, order_b;
  for (int k = 0; k < a.rank(); ++k)
    if (!used_a[k]) free_a.push_back(k);
  for (int k = 0; k < b.rank(); ++k)
    if (!used_b[k]) free_b.push_back(k);
  order_a = free_a;
  order_b.reserve(b.rank());
  for (const auto& [pa, pb] : pairs) {
    order_a.push_back(pa);
    order_b.push_back(pb);
  }
  order_b.insert(order_b.end(), free_b.begin(), free_b.end());

  DenseTensor pa = a.permuted(order_a);
  DenseTensor pb = b.permuted(order_b);

  std::size_t m = 1, k = 1, n = 1;
  for (int ax : free_a) m *= a.dim(ax);
  for (const auto& [xa, xb] : pairs) {
    (void)xb;
    k *= a.dim(xa);
  }
  for (int ax : free_b) n *= b.dim(ax);

  std::vector<int> out_dims;
  out_dims.reserve(free_a.size() + free_b.size());
  for (int ax : free_a) out_dims.push_back(a.dim(ax));
  for (int ax : free_b) out_dims.push_back(b.dim(ax));
  DenseTensor out(out_dims);

  using RowMat =
      Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMat> A(pa.elements().data(), static_cast<Eigen::Index>(m),
                             static_cast<Eigen::Index>(k));
  Eigen::Map<const RowMat> B(pb.elements().data(), static_cast<Eigen::Index>(k),
                             static_cast<Eigen::Index>(n));
  Eigen::Map<RowMat> C(out.elements().data(), static_cast<Eigen::Index>(m),
                       static_cast<Eigen::Index>(n));
  C.noalias() = A * B;
  return out;
}

SvdResult svd(const DenseTensor& t, const MatrixView& view) {
  if (!t.all_finite()) throw NumericError("svd: non-finite tensor elements");
  Eigen::MatrixXcd m = matrixize(t, view);
  Eigen::JacobiSVD<Eigen::MatrixXcd> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::Index kk = std::min(m.rows(), m.cols());

  std::vector<int> u_dims, w_dims;
  for (int a : view.row_axes) u_dims.push_back(t.dim(a));
  u_dims.push_back(static_cast<int>(kk));
  w_dims.push_back(static_cast<int>(kk));
  for (int a : view.col_axes) w_dims.push_back(t.dim(a));

  MatrixView u_view, w_view;
  for (int k = 0; k < static_cast<int>(view.row_axes.size()); ++k)
    u_view.row_axes.push_back(k);
  u_view.col_axes = {static_cast<int>(view.row_axes.size())};
  w_view.row_axes = {0};
  for (int k = 0; k < static_cast<int>(view.col_axes.size()); ++k)
    w_view.col_axes.push_back(k + 1);

  SvdResult out;
  MatrixView u_natural{u_view.row_axes, u_view.col_axes};
  out.u = dematrixize(solver.matrixU(), u_dims, u_natural);
  out.w = dematrixize(solver.matrixV().adjoint(), w_dims, w_view);
  out.s.assign(solver.singularValues().data(), solver.singularValues().data() + kk);
  return out;
}

DenseTensor random_isometry(const std::vector<int>& dims, const MatrixView& view,
                            std::mt19937_64& rng) {
  std::size_t n = 1, p = 1;
  for (int a : view.row_axes) n *= static_cast<std::size_t>(dims.at(a));
  for (int a : view.col_axes) p *= static_cast<std::size_t>(dims.at(a));
  if (n < p) throw ConfigError("random_isometry: fewer rows than columns");

  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXcd g(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (Eigen::Index r = 0; r < g.rows(); ++r)
    for (Eigen::Index c = 0; c < g.cols(); ++c) g(r, c) = cplx(gauss(rng), gauss(rng));

  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
  Eigen::MatrixXcd q = qr.householderQ() *
                       Eigen::MatrixXcd::Identity(static_cast<Eigen::Index>(n),
                                                  static_cast<Eigen::Index>(p));
  Eigen::MatrixXcd r = qr.matrixQR().topRows(static_cast<Eigen::Index>(p))
                           .triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < q.cols(); ++c) {
    cplx d = r(c, c);
    double ad = std::abs(d);
    if (ad > 0) q.col(c) *= d / ad;
  }
  return dematrixize(q, dims, view);
}

double isometry_deviation(const DenseTensor& t, const MatrixView& view) {
  Eigen::MatrixXcd m = matrixize(t, view);
  Eigen::MatrixXcd g = m.adjoint() * m;
  g -= Eigen::MatrixXcd::Identity(g.rows(), g.cols());
  return g.cwiseAbs().maxCoeff();
}

double coisometry_deviation(const DenseTensor& t, const MatrixView& view) {
  Eigen::MatrixXcd m = matrixize(t, view);
  Eigen::MatrixXcd g = m * m.adjoint();
  g -= Eigen::MatrixXcd::Identity(g.rows(), g.cols());
  return g.cwiseAbs().maxCoeff();
}

}  // namespace ertn
