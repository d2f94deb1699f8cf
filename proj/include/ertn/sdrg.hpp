#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "ertn/hamiltonian.hpp"
#include "ertn/network.hpp"

namespace ertn {

/// Second-order effective coupling across a decimated bond.
double effective_coupling(double j_left, double j_mid, double j_right);

struct DecimationEvent {
  int left_site = -1;   // the decimated pair, original site indices
  int right_site = -1;
  double coupling = 0.0;
  std::optional<double> effective;  // absent for the final two-site event
  int neighbor_left = -1;
  int neighbor_right = -1;
  bool tie_broken = false;
};

struct SdrgTrace {
  std::vector<DecimationEvent> events;
  int disentangler_count = 0;
  int top_count = 0;
};

/// Strongest-bond decimation of the periodic chain into an isometric network:
/// each event caps the pair with a top tensor behind a triple of
/// disentanglers binding it to both neighbours; the final two sites get a
/// bare top. Tensors carry the identity-like seeds.
std::pair<TensorNetwork, SdrgTrace> build_er_sdrg(const DisorderInstance& instance);

}  // namespace ertn
