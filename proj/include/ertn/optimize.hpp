#pragma once

#include <map>
#include <optional>
#include <vector>

#include "ertn/hamiltonian.hpp"
#include "ertn/network.hpp"

namespace ertn {

/// Linear learning-rate ramp with early stopping on |E_l - E_{l-1}| < delta.
struct Schedule {
  int total_iters = 1;  // N_L
  double eta_init = 0.1;
  double eta_end = 0.0001;
  double delta = 0.0;
};

double schedule_eta(const Schedule& s, int iter);  // iter in [1, N_L]

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment accumulators stored in the ambient space and projected each step.
struct AdamState {
  AdamParams params;
  int step = 0;
  std::map<int, DenseTensor> first;
  std::map<int, std::vector<double>> second;
  void reset() {
    step = 0;
    first.clear();
    second.clear();
  }
};

enum class StopReason { Converged, Exhausted };

struct TracePoint {
  int iter = 0;
  double energy = 0.0;
  double eta = 0.0;
};

struct Trace {
  std::vector<TracePoint> points;  // iter 0 carries the initial energy
  StopReason reason = StopReason::Exhausted;
};

/// Shift making H - gamma*I negative definite: sum of block norms + 1.
double ev_shift(const TwoSiteHamiltonian& h);

/// Algebraic single-node update: polar-align the node against its shifted
/// environment. Returns false (node untouched) for an all-zero environment.
bool ev_update(EnergyEngine& engine, TensorNetwork& net, int node, double gamma);
bool ev_update(TensorNetwork& net, int node, const TwoSiteHamiltonian& h, double gamma);

/// Tangent projection xi = d - v herm(v^dag d) under the node view.
DenseTensor riemannian_grad(const DenseTensor& v, const DenseTensor& grad,
                            const MatrixView& view);

/// Nearest isometry under the view (polar factor via SVD).
DenseTensor polar_retract(const DenseTensor& t, const MatrixView& view);

struct OptimizeOptions {
  bool cone_only_gradients = false;  // restrict environments to each node's cone
};

/// One simultaneous Riemannian-Adam step over the targets; eta = 0 leaves
/// every tensor bit-exactly unchanged.
void adam_step(TensorNetwork& net, EnergyEngine& engine, AdamState& state,
               const std::vector<int>& targets, double eta,
               const OptimizeOptions& opts = {});

struct OptimizeResult {
  TensorNetwork net;  // best-energy network seen
  Trace trace;
  double best_energy = 0.0;
};

/// Riemannian-Adam descent over the targets with the linear eta ramp. When
/// e_ref is given, {eta_init, eta_end} become {(E0-e_ref)*1e-1, (E0-e_ref)*1e-4},
/// falling back to {1e-3, 1e-5} when the gap is not positive.
OptimizeResult optimize(const TensorNetwork& net, const TwoSiteHamiltonian& h,
                        Schedule schedule, const std::vector<int>& targets,
                        std::optional<double> e_ref = {},
                        const OptimizeOptions& opts = {});

std::vector<int> all_tensor_nodes(const TensorNetwork& net);

}  // namespace ertn
