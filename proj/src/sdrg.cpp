#include "ertn/sdrg.hpp"

#include <algorithm>

#include "ertn/errors.hpp"

namespace ertn {

double effective_coupling(double j_left, double j_mid, double j_right) {
  if (j_mid <= 0.0) throw ConfigError("decimated coupling must be positive");
  return j_left * j_right / j_mid;
}

std::pair<TensorNetwork, SdrgTrace> build_er_sdrg(const DisorderInstance& instance) {
  const int n = instance.n_sites;
  if (n < 2 || n % 2 != 0) throw ConfigError("SDRG construction needs an even chain");
  if (static_cast<int>(instance.couplings.size()) != n)
    throw ConfigError("one coupling per bond required");
  for (double j : instance.couplings)
    if (j <= 0.0) throw ConfigError("SDRG construction needs strictly positive couplings");

  TensorNetwork net;
  SdrgTrace trace;
  std::vector<int> sites(n);
  for (int k = 0; k < n; ++k) sites[k] = net.add_site();

  struct Leg {
    int node;
    int slot;
  };
  std::vector<Leg> eff_leg(n);
  for (int k = 0; k < n; ++k) eff_leg[k] = {sites[k], 0};

  // effective periodic chain: ring[k] adjacent to ring[k+1] through bond[k]
  std::vector<int> ring(n);
  std::vector<double> bond = instance.couplings;
  for (int k = 0; k < n; ++k) ring[k] = k;

  auto add_u = [&](Leg a, Leg b) {
    int u = net.add_node(NodeKind::Disentangler, seed_tensor(NodeKind::Disentangler));
    net.add_edge(a.node, a.slot, u, 0);
    net.add_edge(b.node, b.slot, u, 1);
    ++trace.disentangler_count;
    return u;
  };
  auto add_top = [&](Leg a, Leg b) {
    int t = net.add_node(NodeKind::Top, seed_tensor(NodeKind::Top));
    net.add_edge(a.node, a.slot, t, 0);
    net.add_edge(b.node, b.slot, t, 1);
    ++trace.top_count;
  };

  while (!ring.empty()) {
    const int m = static_cast<int>(ring.size());
    // strongest bond, ties broken toward the lowest original site index
    const double j_max = *std::max_element(bond.begin(), bond.end());
    int k_best = -1;
    int n_max = 0;
    for (int k = 0; k < m; ++k) {
      if (bond[k] != j_max) continue;
      ++n_max;
      if (k_best < 0 || ring[k] < ring[k_best]) k_best = k;
    }
    const bool tie = n_max > 1;

    const int sa = ring[k_best];
    const int sb = ring[(k_best + 1) % m];

    if (m == 2) {
      add_top(eff_leg[sa], eff_leg[sb]);
      trace.events.push_back({sa, sb, bond[k_best], std::nullopt, -1, -1, tie});
      break;
    }

    const int kl = (k_best - 1 + m) % m;
    const int kr = (k_best + 1) % m;
    const int left = ring[kl];
    const int right = ring[(k_best + 2) % m];

    const int u_left = add_u(eff_leg[left], eff_leg[sa]);
    const int u_right = add_u(eff_leg[sb], eff_leg[right]);
    const int u_center = add_u({u_left, 1}, {u_right, 0});
    add_top({u_center, 0}, {u_center, 1});
    eff_leg[left] = {u_left, 0};
    eff_leg[right] = {u_right, 1};

    const double j_new = effective_coupling(bond[kl], bond[k_best], bond[kr]);
    trace.events.push_back({sa, sb, bond[k_best], j_new, left, right, tie});

    // shrink the ring: remove sites sa, sb; bonds (kl, k, kr) collapse to j_new
    std::vector<int> new_ring;
    std::vector<double> new_bond;
    new_ring.reserve(m - 2);
    new_bond.reserve(m - 2);
    int k = (k_best + 2) % m;  // start at the right neighbour
    while (true) {
      new_ring.push_back(ring[k]);
      const int kb = k;
      k = (k + 1) % m;
      if (ring[k] == left) {
        new_ring.push_back(ring[k]);
        new_bond.push_back(bond[kb]);
        new_bond.push_back(j_new);  // closes left -> right
        break;
      }
      new_bond.push_back(bond[kb]);
    }
    ring = std::move(new_ring);
    bond = std::move(new_bond);
  }

  net.set_leaves(sites);
  net.reset_flags();
  net.structural_check();
  return {std::move(net), std::move(trace)};
}

}  // namespace ertn
