#include "ertn/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/SVD>

#include "ertn/errors.hpp"

namespace ertn {

double schedule_eta(const Schedule& s, int iter) {
  if (s.total_iters < 1) throw ConfigError("schedule needs at least one iteration");
  if (s.eta_init < s.eta_end || s.eta_end <= 0.0)
    throw ConfigError("schedule requires eta_init >= eta_end > 0");
  if (s.total_iters == 1) return s.eta_init;
  return s.eta_init - (iter - 1) * (s.eta_init - s.eta_end) / (s.total_iters - 1);
}

double ev_shift(const TwoSiteHamiltonian& h) { return h.coupling_scale() + 1.0; }

namespace {

Eigen::MatrixXcd polar_factor(const Eigen::MatrixXcd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

}  // namespace

bool ev_update(EnergyEngine& engine, TensorNetwork& net, int node, double gamma) {
  DenseTensor upsilon = engine.environment(node);
  DenseTensor upsilon_norm = engine.environment_identity(node);
  upsilon_norm *= cplx{-gamma, 0.0};
  upsilon += upsilon_norm;
  if (!upsilon.all_finite()) throw NumericError("non-finite environment");

  const MatrixView view = net.node_view(node);
  // Wirtinger gradient of the shifted energy; polar-align against it.
  Eigen::MatrixXcd g = matrixize(upsilon.conjugated(), view);
  if (g.cwiseAbs().maxCoeff() == 0.0) return false;  // degenerate: leave unchanged
  Eigen::MatrixXcd updated = -polar_factor(g);
  net.set_tensor(node, dematrixize(updated, net.node(node).tensor.dims(), view));
  return true;
}

bool ev_update(TensorNetwork& net, int node, const TwoSiteHamiltonian& h, double gamma) {
  EnergyEngine engine(net, h);
  return ev_update(engine, net, node, gamma);
}

DenseTensor riemannian_grad(const DenseTensor& v, const DenseTensor& grad,
                            const MatrixView& view) {
  if (v.dims() != grad.dims()) throw ConfigError("gradient shape mismatch");
  Eigen::MatrixXcd vm = matrixize(v, view);
  Eigen::MatrixXcd dm = matrixize(grad, view);
  Eigen::MatrixXcd vd = vm.adjoint() * dm;
  Eigen::MatrixXcd herm = 0.5 * (vd + vd.adjoint());
  Eigen::MatrixXcd xi = dm - vm * herm;
  return dematrixize(xi, v.dims(), view);
}

DenseTensor polar_retract(const DenseTensor& t, const MatrixView& view) {
  Eigen::MatrixXcd m = matrixize(t, view);
  return dematrixize(polar_factor(m), t.dims(), view);
}

void adam_step(TensorNetwork& net, EnergyEngine& engine, AdamState& state,
               const std::vector<int>& targets, double eta,
               const OptimizeOptions& opts) {
  if (targets.empty()) throw ConfigError("adam_step needs a nonempty target set");

  // gradients of every target first, then the simultaneous move
  std::vector<DenseTensor> xi(targets.size());
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const int node = targets[k];
    DenseTensor upsilon = opts.cone_only_gradients
                              ? engine.environment(node, engine.cone_terms(node))
                              : engine.environment(node);
    if (!upsilon.all_finite()) throw NumericError("non-finite gradient");
    DenseTensor g = upsilon.conjugated();
    g *= cplx{2.0, 0.0};
    xi[k] = riemannian_grad(net.node(node).tensor, g, net.node_view(node));
  }

  ++state.step;
  const double b1 = state.params.beta1, b2 = state.params.beta2;
  const double bc1 = 1.0 - std::pow(b1, state.step);
  const double bc2 = 1.0 - std::pow(b2, state.step);

  for (std::size_t k = 0; k < targets.size(); ++k) {
    const int node = targets[k];
    auto& m = state.first[node];
    auto& v2 = state.second[node];
    if (m.size() != xi[k].size()) m = DenseTensor(xi[k].dims());
    if (v2.size() != xi[k].size()) v2.assign(xi[k].size(), 0.0);

    for (std::size_t i = 0; i < xi[k].size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * xi[k][i];
      v2[i] = b2 * v2[i] + (1.0 - b2) * std::norm(xi[k][i]);
    }
    if (eta == 0.0) continue;

    DenseTensor dir(xi[k].dims());
    for (std::size_t i = 0; i < dir.size(); ++i)
      dir[i] = (m[i] / bc1) / (std::sqrt(v2[i] / bc2) + state.params.epsilon);

    const MatrixView view = net.node_view(node);
    DenseTensor tangent = riemannian_grad(net.node(node).tensor, dir, view);
    double step_norm = tangent.norm();
    if (step_norm == 0.0) continue;

    DenseTensor moved = net.node(node).tensor;
    tangent *= cplx{-eta, 0.0};
    moved += tangent;
    net.set_tensor(node, polar_retract(moved, view));
  }
}

std::vector<int> all_tensor_nodes(const TensorNetwork& net) {
  std::vector<int> out;
  for (int id = 0; id < net.node_count(); ++id)
    if (net.node(id).kind != NodeKind::Site) out.push_back(id);
  return out;
}

OptimizeResult optimize(const TensorNetwork& net, const TwoSiteHamiltonian& h,
                        Schedule schedule, const std::vector<int>& targets,
                        std::optional<double> e_ref, const OptimizeOptions& opts) {
  if (targets.empty()) throw ConfigError("optimize needs a nonempty target set");
  OptimizeResult result;
  result.net = net;
  TensorNetwork work = net;
  EnergyEngine engine(work, h);

  // terms whose cone touches any target change during the run; the rest are
  // a constant offset computed once
  std::vector<char> active(h.terms().size(), 0);
  for (int node : targets)
    for (int t : engine.cone_terms(node)) active[t] = 1;
  std::vector<int> active_terms, constant_terms;
  for (std::size_t t = 0; t < active.size(); ++t)
    (active[t] ? active_terms : constant_terms).push_back(static_cast<int>(t));
  const double e_const = engine.energy_of_terms(constant_terms);
  auto current_energy = [&]() { return e_const + engine.energy_of_terms(active_terms); };

  double e0 = current_energy();
  if (e_ref) {
    const double gap = e0 - *e_ref;
    if (gap > 0.0) {
      schedule.eta_init = gap * 1e-1;
      schedule.eta_end = gap * 1e-4;
    } else {
      schedule.eta_init = 1e-3;
      schedule.eta_end = 1e-5;
    }
  }

  result.trace.points.push_back({0, e0, 0.0});
  result.best_energy = e0;
  result.trace.reason = StopReason::Exhausted;

  AdamState state;
  double prev = e0;
  for (int l = 1; l <= schedule.total_iters; ++l) {
    const double eta = schedule_eta(schedule, l);
    adam_step(work, engine, state, targets, eta, opts);
    const double e = current_energy();
    result.trace.points.push_back({l, e, eta});
    if (e < result.best_energy) {
      result.best_energy = e;
      result.net = work;
    }
    if (l >= 2 && std::abs(e - prev) < schedule.delta) {
      result.trace.reason = StopReason::Converged;
      break;
    }
    prev = e;
  }
  return result;
}

}  // namespace ertn
