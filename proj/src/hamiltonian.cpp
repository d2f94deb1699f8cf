#include "ertn/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "ertn/errors.hpp"
#include "ertn/hash.hpp"

namespace ertn {

namespace {

constexpr int kSiteCap = 20;

void check_site_cap(int n) {
  if (n > kSiteCap) throw CapExceeded("dense state space capped at 20 sites");
}

}  // namespace

std::string Fnv1a64::hex() const { return to_hex(state_); }

std::string to_hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int k = 15; k >= 0; --k) {
    out[k] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

TwoSiteHamiltonian::TwoSiteHamiltonian(int n_sites, std::vector<HamTerm> terms)
    : n_sites_(n_sites), terms_(std::move(terms)) {
  if (n_sites_ < 2) throw ConfigError("Hamiltonian needs at least 2 sites");
  for (const auto& t : terms_) {
    if (t.i < 0 || t.j >= n_sites_ || t.i >= t.j)
      throw ConfigError("Hamiltonian term sites out of order or range");
    if ((t.block - t.block.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
      throw ConfigError("Hamiltonian term block is not Hermitian");
  }
}

void TwoSiteHamiltonian::apply(std::span<const cplx> x, std::span<cplx> y) const {
  check_site_cap(n_sites_);
  const std::size_t dim = std::size_t{1} << n_sites_;
  if (x.size() != dim || y.size() != dim) throw ConfigError("state vector length mismatch");
  std::fill(y.begin(), y.end(), cplx{0.0, 0.0});
  for (const auto& t : terms_) {
    const int si = n_sites_ - 1 - t.i;
    const int sj = n_sites_ - 1 - t.j;
    const std::size_t mask = ~((std::size_t{1} << si) | (std::size_t{1} << sj));
    for (std::size_t b = 0; b < dim; ++b) {
      const int bi = static_cast<int>((b >> si) & 1);
      const int bj = static_cast<int>((b >> sj) & 1);
      const int col = (bi << 1) | bj;
      const cplx xv = x[b];
      if (xv == cplx{0.0, 0.0}) continue;
      const std::size_t base = b & mask;
      for (int row = 0; row < 4; ++row) {
        const cplx hv = t.block(row, col);
        if (hv == cplx{0.0, 0.0}) continue;
        const std::size_t b2 = base | (static_cast<std::size_t>(row >> 1) << si) |
                               (static_cast<std::size_t>(row & 1) << sj);
        y[b2] += hv * xv;
      }
    }
  }
}

Eigen::MatrixXcd TwoSiteHamiltonian::dense_matrix() const {
  if (n_sites_ > 14) throw CapExceeded("dense Hamiltonian matrix capped at 14 sites");
  const std::size_t dim = std::size_t{1} << n_sites_;
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(dim),
                                              static_cast<Eigen::Index>(dim));
  std::vector<cplx> x(dim, cplx{0.0, 0.0}), y(dim);
  for (std::size_t c = 0; c < dim; ++c) {
    x[c] = 1.0;
    apply(x, y);
    for (std::size_t r = 0; r < dim; ++r) h(static_cast<Eigen::Index>(r),
                                            static_cast<Eigen::Index>(c)) = y[r];
    x[c] = 0.0;
  }
  return h;
}

double TwoSiteHamiltonian::coupling_scale() const {
  double s = 0.0;
  for (const auto& t : terms_) {
    Eigen::JacobiSVD<Eigen::Matrix4cd> svd(t.block);
    s += svd.singularValues()(0);
  }
  return s;
}

std::uint64_t TwoSiteHamiltonian::content_hash() const {
  Fnv1a64 h;
  h.update_pod(n_sites_);
  for (const auto& t : terms_) {
    h.update_pod(t.i);
    h.update_pod(t.j);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) {
        h.update_pod(t.block(r, c).real());
        h.update_pod(t.block(r, c).imag());
      }
  }
  return h.digest();
}

Eigen::Matrix4cd heisenberg_block(double coupling) {
  // basis (uu, ud, du, dd); s.s = diag(1/4,-1/4,-1/4,1/4) + flip-flop 1/2
  Eigen::Matrix4cd b = Eigen::Matrix4cd::Zero();
  b(0, 0) = b(3, 3) = 0.25 * coupling;
  b(1, 1) = b(2, 2) = -0.25 * coupling;
  b(1, 2) = b(2, 1) = 0.5 * coupling;
  return b;
}

Eigen::Matrix4cd xy_block(double coupling) {
  Eigen::Matrix4cd b = Eigen::Matrix4cd::Zero();
  b(1, 2) = b(2, 1) = 0.5 * coupling;
  return b;
}

TwoSiteHamiltonian build_tetramer(int rings, double J, double Jp) {
  if (rings < 2) throw ConfigError("tetramer ladder needs at least 2 rings");
  const int n = 4 * rings;
  std::vector<HamTerm> terms;
  terms.reserve(20 * static_cast<std::size_t>(rings));
  auto site = [&](int x, int y) { return 4 * (x % rings) + (y % 4); };
  for (int x = 0; x < rings; ++x) {
    for (int y = 0; y < 4; ++y) {
      int a = site(x, y), b = site(x, y + 1);
      if (a > b) std::swap(a, b);
      terms.push_back({a, b, heisenberg_block(J)});
    }
    for (int y = 0; y < 4; ++y)
      for (int yp = 0; yp < 4; ++yp) {
        int a = site(x, y), b = site(x + 1, yp);
        if (a > b) std::swap(a, b);
        terms.push_back({a, b, heisenberg_block(Jp)});
      }
  }
  return TwoSiteHamiltonian(n, std::move(terms));
}

TwoSiteHamiltonian xy_from_couplings(int n_sites, const std::vector<double>& couplings) {
  if (n_sites < 2 || n_sites % 2 != 0)
    throw ConfigError("XY chain needs an even site count >= 2");
  if (static_cast<int>(couplings.size()) != n_sites)
    throw ConfigError("XY chain needs one coupling per bond");
  std::vector<HamTerm> terms;
  terms.reserve(couplings.size());
  for (int i = 0; i < n_sites; ++i) {
    int a = i, b = (i + 1) % n_sites;
    if (a > b) std::swap(a, b);
    terms.push_back({a, b, xy_block(couplings[i])});
  }
  return TwoSiteHamiltonian(n_sites, std::move(terms));
}

std::pair<TwoSiteHamiltonian, DisorderInstance> build_random_xy(int n_sites,
                                                                std::uint64_t seed) {
  if (n_sites < 2 || n_sites % 2 != 0)
    throw ConfigError("random XY chain needs an even site count");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  DisorderInstance inst;
  inst.n_sites = n_sites;
  inst.seed = seed;
  inst.couplings.resize(n_sites);
  for (auto& j : inst.couplings) j = uni(rng);
  return {xy_from_couplings(n_sites, inst.couplings), inst};
}

namespace {

using Vec = Eigen::VectorXcd;

Vec to_eigen(std::span<const cplx> x) {
  return Eigen::Map<const Vec>(x.data(), static_cast<Eigen::Index>(x.size()));
}

GroundTruth lanczos_lowest(const TwoSiteHamiltonian& h, const LanczosOptions& opt,
                           bool want_state) {
  const std::size_t dim = std::size_t{1} << h.sites();
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec v0(static_cast<Eigen::Index>(dim));
  for (Eigen::Index k = 0; k < v0.size(); ++k) v0(k) = cplx(gauss(rng), gauss(rng));
  v0.normalize();

  const double scale = h.coupling_scale() + 1.0;
  std::vector<cplx> xbuf(dim), ybuf(dim);
  auto matvec = [&](const Vec& x) {
    Eigen::Map<Vec>(xbuf.data(), x.size()) = x;
    h.apply(xbuf, ybuf);
    return Eigen::Map<Vec>(ybuf.data(), x.size()).eval();
  };

  double theta = 0.0;
  Vec ritz = v0;
  double residual = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < opt.max_restarts; ++restart) {
    std::vector<Vec> basis;
    basis.push_back(v0);
    std::vector<double> alpha, beta;
    const int kmax = std::min<int>(opt.max_krylov, static_cast<int>(dim));
    for (int k = 0; k < kmax; ++k) {
      Vec w = matvec(basis[k]);
      double a = std::real(basis[k].dot(w));
      alpha.push_back(a);
      w -= a * basis[k];
      if (k > 0) w -= beta[k - 1] * basis[k - 1];
      // full reorthogonalization, twice
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& q : basis) w -= q.dot(w) * q;
      double b = w.norm();
      if (k + 1 >= kmax || b < 1e-13 * scale) break;
      beta.push_back(b);
      basis.push_back(w / b);
    }
    const int m = static_cast<int>(alpha.size());
    Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(m, m);
    for (int k = 0; k < m; ++k) {
      tri(k, k) = alpha[k];
      if (k + 1 < m) tri(k, k + 1) = tri(k + 1, k) = beta[k];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tri);
    theta = es.eigenvalues()(0);
    Vec x = Vec::Zero(static_cast<Eigen::Index>(dim));
    for (int k = 0; k < m; ++k) x += es.eigenvectors()(k, 0) * basis[k];
    x.normalize();
    ritz = x;
    residual = (matvec(x) - theta * x).norm();
    if (residual <= opt.tol * scale) break;
    v0 = ritz;
  }
  if (residual > opt.tol * scale * 10.0)
    throw NumericError("Lanczos failed to converge to the requested residual");

  GroundTruth out;
  out.energy = theta;
  out.residual = residual;
  if (want_state) out.state.assign(ritz.data(), ritz.data() + ritz.size());
  return out;
}

}  // namespace

GroundTruth exact_ground(const TwoSiteHamiltonian& h, const LanczosOptions& opt,
                         bool want_state) {
  check_site_cap(h.sites());
  return lanczos_lowest(h, opt, want_state);
}

double relative_error(double energy, double ground_energy) {
  if (ground_energy == 0.0) throw ConfigError("relative error undefined for zero ground energy");
  return (energy - ground_energy) / ground_energy;
}

double infidelity_per_site(std::span<const cplx> psi, std::span<const cplx> psi_gs,
                           int n_sites) {
  if (psi.size() != psi_gs.size()) throw ConfigError("state vector length mismatch");
  cplx overlap{0.0, 0.0};
  for (std::size_t k = 0; k < psi.size(); ++k) overlap += std::conj(psi[k]) * psi_gs[k];
  return 1.0 - std::pow(std::abs(overlap), 1.0 / n_sites);
}

std::vector<double> entanglement_profile(std::span<const cplx> psi, int n_sites) {
  if (n_sites > 16) throw CapExceeded("entanglement profile capped at 16 sites");
  const std::size_t dim = std::size_t{1} << n_sites;
  if (psi.size() != dim) throw ConfigError("state vector length mismatch");

  DenseTensor t(std::vector<int>(n_sites, 2));
  std::copy(psi.begin(), psi.end(), t.elements().begin());

  std::vector<double> profile(static_cast<std::size_t>(n_sites - 1), 0.0);
  for (int len = 1; len < n_sites; ++len) {
    double acc = 0.0;
    for (int start = 0; start < n_sites; ++start) {
      std::vector<int> order;
      order.reserve(n_sites);
      std::vector<char> used(n_sites, 0);
      for (int k = 0; k < len; ++k) {
        int ax = (start + k) % n_sites;
        order.push_back(ax);
        used[ax] = 1;
      }
      for (int ax = 0; ax < n_sites; ++ax)
        if (!used[ax]) order.push_back(ax);
      DenseTensor p = t.permuted(order);

      const std::size_t rows = std::size_t{1} << len;
      const std::size_t cols = dim / rows;
      // Gram matrix on the smaller side
      const bool rows_small = rows <= cols;
      const std::size_t small = rows_small ? rows : cols;
      Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(small),
                                                  static_cast<Eigen::Index>(small));
      const cplx* d = p.elements().data();
      if (rows_small) {
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t r2 = r; r2 < rows; ++r2) {
            cplx s{0.0, 0.0};
            const cplx* a = d + r * cols;
            const cplx* b = d + r2 * cols;
            for (std::size_t c = 0; c < cols; ++c) s += a[c] * std::conj(b[c]);
            g(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r2)) = s;
            g(static_cast<Eigen::Index>(r2), static_cast<Eigen::Index>(r)) = std::conj(s);
          }
      } else {
        for (std::size_t r = 0; r < rows; ++r) {
          const cplx* a = d + r * cols;
          for (std::size_t c = 0; c < cols; ++c)
            for (std::size_t c2 = 0; c2 < cols; ++c2)
              g(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c2)) +=
                  std::conj(a[c]) * a[c2];
        }
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(g, Eigen::EigenvaluesOnly);
      double entropy = 0.0;
      for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
        double lam = es.eigenvalues()(k);
        if (lam > 1e-14) entropy -= lam * std::log2(lam);
      }
      acc += entropy;
    }
    profile[static_cast<std::size_t>(len - 1)] = acc / n_sites;
  }
  return profile;
}

double decrease_ratio(double delta_before, double delta_after) {
  if (delta_before == 0.0) throw ConfigError("decrease ratio undefined for zero baseline");
  return (1.0 - delta_after / delta_before) * 100.0;
}

}  // namespace ertn
