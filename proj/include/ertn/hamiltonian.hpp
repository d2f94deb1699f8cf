#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ertn/tensor.hpp"

namespace ertn {

struct HamTerm {
  int i = 0;  // 0-based sites, i < j
  int j = 0;
  Eigen::Matrix4cd block;  // acts on (site i x site j); Hermitian
};

/// Sum of two-site interactions on an N-site spin-1/2 system. Basis index
/// convention: site 0 is the most significant bit, bit value 0 = spin up.
class TwoSiteHamiltonian {
 public:
  TwoSiteHamiltonian(int n_sites, std::vector<HamTerm> terms);

  int sites() const { return n_sites_; }
  const std::vector<HamTerm>& terms() const { return terms_; }

  /// y = H x over the full 2^N dimensional space.
  void apply(std::span<const cplx> x, std::span<cplx> y) const;
  Eigen::MatrixXcd dense_matrix() const;  // small N only

  /// Sum of per-term operator norms; rigorous bound on |H|.
  double coupling_scale() const;
  std::uint64_t content_hash() const;

 private:
  int n_sites_;
  std::vector<HamTerm> terms_;
};

Eigen::Matrix4cd heisenberg_block(double coupling);
Eigen::Matrix4cd xy_block(double coupling);

/// Four-leg spin ladder of L rings of four spins: intra-ring Heisenberg
/// bonds J plus all 16 inter-ring Heisenberg pairs with coupling Jp, torus
/// boundary. Sites ordered lexicographically, ring index slow.
TwoSiteHamiltonian build_tetramer(int rings, double J, double Jp);

struct DisorderInstance {
  int n_sites = 0;
  std::uint64_t seed = 0;
  std::vector<double> couplings;  // couplings[i] bonds sites i and i+1 mod N
};

TwoSiteHamiltonian xy_from_couplings(int n_sites, const std::vector<double>& couplings);

/// Periodic random XY chain with couplings drawn uniformly from [0,1).
std::pair<TwoSiteHamiltonian, DisorderInstance> build_random_xy(int n_sites,
                                                                std::uint64_t seed);

struct GroundTruth {
  double energy = 0.0;
  double residual = 0.0;
  std::vector<cplx> state;  // empty when not requested
};

struct LanczosOptions {
  int max_krylov = 200;
  int max_restarts = 60;
  double tol = 1e-10;
  std::uint64_t seed = 7;
};

/// Lowest eigenpair via Lanczos with full reorthogonalization (N <= 20).
GroundTruth exact_ground(const TwoSiteHamiltonian& h, const LanczosOptions& opt = {},
                         bool want_state = true);

double relative_error(double energy, double ground_energy);
double infidelity_per_site(std::span<const cplx> psi, std::span<const cplx> psi_gs,
                           int n_sites);

/// Mean entanglement entropy (log base 2) of contiguous periodic blocks of
/// each length 1..N-1, averaged over all N starting positions.
std::vector<double> entanglement_profile(std::span<const cplx> psi, int n_sites);

double decrease_ratio(double delta_before, double delta_after);

}  // namespace ertn
