#include "ertn/moves.hpp"

#include <algorithm>

#include "ertn/errors.hpp"

namespace ertn {

bool same_candidate(const CandidateStructure& a, const CandidateStructure& b) {
  return a.lower == b.lower && a.upper == b.upper && a.in_assign == b.in_assign &&
         a.out_assign == b.out_assign;
}

PairSignature classify_pair(const TensorNetwork& net, int edge) {
  if (edge < 0 || edge >= net.edge_count()) throw ConfigError("edge id out of range");
  if (net.flags().at(edge)) throw ConfigError("edge is flagged as completed or excluded");
  const Edge& e = net.edge(edge);
  if (net.node(e.src).kind == NodeKind::Site || net.node(e.dst).kind == NodeKind::Site)
    throw ConfigError("pair must not touch a site");
  if (net.edges_between(e.src, e.dst) != 1)
    throw ConfigError("parallel-edge pairs cannot be reconnected");

  PairSignature sig;
  sig.edge = edge;
  sig.lower = e.src;
  sig.upper = e.dst;

  auto leg_dim = [&](int host_edge, bool in_side) {
    const Edge& he = net.edge(host_edge);
    if (in_side) {
      const Node& dst = net.node(he.dst);
      return dst.tensor.dim(he.dst_slot);
    }
    const Node& src = net.node(he.src);
    return src.kind == NodeKind::Site ? 2 : src.tensor.dim(in_count(src.kind) + he.src_slot);
  };

  for (int p : net.in_edge_ids(sig.lower)) sig.ins.push_back({p, leg_dim(p, true)});
  for (int p : net.in_edge_ids(sig.upper))
    if (p != edge) sig.ins.push_back({p, leg_dim(p, true)});
  for (int p : net.out_edge_ids(sig.lower))
    if (p != edge) sig.outs.push_back({p, leg_dim(p, false)});
  for (int p : net.out_edge_ids(sig.upper)) sig.outs.push_back({p, leg_dim(p, false)});

  for (const auto& leg : sig.ins)
    if (leg.dim != 2) throw ConfigError("local moves are defined for bond dimension 2");
  for (const auto& leg : sig.outs)
    if (leg.dim != 2) throw ConfigError("local moves are defined for bond dimension 2");
  return sig;
}

namespace {

int external_out_slots(NodeKind lower, NodeKind upper) {
  return (lower == NodeKind::Disentangler ? 1 : 0) + out_count(upper);
}

void push_candidates(std::vector<CandidateStructure>& out, NodeKind lower, NodeKind upper,
                     int n_outs) {
  // external in slots are always [lower.in0, lower.in1, upper.in1]; the lower
  // pair is symmetric, so fix it in ascending order and only choose which
  // signature leg feeds the upper tensor
  std::vector<std::vector<int>> in_assignments;
  for (int up = 0; up < 3; ++up) {
    std::vector<int> rest;
    for (int k = 0; k < 3; ++k)
      if (k != up) rest.push_back(k);
    in_assignments.push_back({rest[0], rest[1], up});
  }

  std::vector<std::vector<int>> out_assignments;
  std::vector<int> perm(n_outs);
  for (int k = 0; k < n_outs; ++k) perm[k] = k;
  const bool upper_sym = upper == NodeKind::Disentangler;
  const int upper_first = lower == NodeKind::Disentangler ? 1 : 0;
  do {
    if (upper_sym && perm[upper_first] > perm[upper_first + 1]) continue;
    out_assignments.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  if (out_assignments.empty()) out_assignments.push_back({});

  for (const auto& ia : in_assignments)
    for (const auto& oa : out_assignments) out.push_back({lower, upper, ia, oa});
}

}  // namespace

std::vector<CandidateStructure> enumerate_candidates(const PairSignature& sig) {
  if (sig.ins.size() != 3) throw ConfigError("pair signature must expose three in legs");
  std::vector<CandidateStructure> out;
  const NodeKind lowers[] = {NodeKind::Disentangler, NodeKind::Isometry};
  const NodeKind uppers[] = {NodeKind::Disentangler, NodeKind::Isometry, NodeKind::Top};
  for (NodeKind lo : lowers)
    for (NodeKind up : uppers)
      if (external_out_slots(lo, up) == static_cast<int>(sig.outs.size()))
        push_candidates(out, lo, up, static_cast<int>(sig.outs.size()));
  return out;
}

CandidateStructure incumbent_candidate(const TensorNetwork& net, const PairSignature& sig) {
  // classify_pair lists host legs in exactly the canonical slot order, so the
  // incumbent is the identity assignment (already canonical: lower in pair
  // ascending, upper disentangler outs ascending)
  CandidateStructure c;
  c.lower = net.node(sig.lower).kind;
  c.upper = net.node(sig.upper).kind;
  c.in_assign = {0, 1, 2};
  c.out_assign.resize(sig.outs.size());
  for (std::size_t k = 0; k < sig.outs.size(); ++k) c.out_assign[k] = static_cast<int>(k);
  return c;
}

SpliceResult splice(const TensorNetwork& net, int edge, const CandidateStructure& cand) {
  PairSignature sig = classify_pair(net, edge);
  if (cand.in_assign.size() != 3 || cand.out_assign.size() != sig.outs.size())
    throw ConfigError("candidate does not match the pair signature");

  SpliceResult result;
  result.net = net;
  result.lower = sig.lower;
  result.upper = sig.upper;
  result.bond_edge = sig.edge;

  result.net.set_kind(sig.lower, cand.lower, seed_tensor(cand.lower));
  result.net.set_kind(sig.upper, cand.upper, seed_tensor(cand.upper));

  // internal bond: lower.out0 -> upper.in0
  result.net.rewire_edge(sig.edge, Edge{sig.lower, 0, sig.upper, 0});

  // external in slots: [lower.in0, lower.in1, upper.in1]
  for (int slot = 0; slot < 3; ++slot) {
    const int host = sig.ins.at(cand.in_assign[slot]).host_edge;
    Edge he = net.edge(host);
    if (slot < 2) {
      he.dst = sig.lower;
      he.dst_slot = slot;
    } else {
      he.dst = sig.upper;
      he.dst_slot = 1;
    }
    result.net.rewire_edge(host, he);
  }

  // external out slots: [lower.out1 when the lower node is a disentangler,
  // then upper.out0, upper.out1, ...]
  const int lower_spare = cand.lower == NodeKind::Disentangler ? 1 : 0;
  for (std::size_t slot = 0; slot < cand.out_assign.size(); ++slot) {
    const int host = sig.outs.at(cand.out_assign[slot]).host_edge;
    Edge he = net.edge(host);
    if (lower_spare && slot == 0) {
      he.src = sig.lower;
      he.src_slot = 1;
    } else {
      he.src = sig.upper;
      he.src_slot = static_cast<int>(slot) - lower_spare;
    }
    result.net.rewire_edge(host, he);
  }

  result.net.flag_parallel_edges();
  result.net.structural_check();
  return result;
}

void refresh_exclusions(TensorNetwork& net) { net.flag_parallel_edges(); }

int select_edge(TensorNetwork& net, SelectionState& state, std::mt19937_64& rng) {
  const std::vector<int> dist = net.distances();
  auto& flags = net.flags();

  auto restrict_max_distance = [&](const std::vector<int>& candidates) {
    int dmax = -1;
    for (int p : candidates) dmax = std::max(dmax, dist[p]);
    std::vector<int> out;
    for (int p : candidates)
      if (dist[p] == dmax) out.push_back(p);
    return out;
  };
  auto global_pool = [&]() {
    std::vector<int> pool;
    for (int p = 0; p < net.edge_count(); ++p)
      if (!flags[p]) pool.push_back(p);
    if (pool.empty()) throw NumericError("no unflagged edge to select");
    return restrict_max_distance(pool);
  };

  std::vector<int> pool;
  if (!state.previous) {
    pool = global_pool();
  } else {
    const int j = *state.previous;
    flags[j] = 1;
    const Edge& ej = net.edge(j);
    std::vector<int> adjacent;
    for (int p = 0; p < net.edge_count(); ++p) {
      if (p == j) continue;
      const Edge& e = net.edge(p);
      if (e.src == ej.src || e.src == ej.dst || e.dst == ej.src || e.dst == ej.dst)
        adjacent.push_back(p);
    }
    std::vector<int> unflagged;
    for (int p : adjacent)
      if (!flags[p]) unflagged.push_back(p);
    pool = unflagged.empty() ? global_pool() : restrict_max_distance(unflagged);
  }

  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  const int chosen = pool[pick(rng)];
  state.previous = chosen;
  return chosen;
}

}  // namespace ertn
