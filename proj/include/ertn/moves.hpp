#pragma once

#include <optional>
#include <random>
#include <vector>

#include "ertn/network.hpp"

namespace ertn {

/// External leg of a two-tensor region, identified by the host edge carrying it.
struct ExternalLeg {
  int host_edge = -1;
  int dim = 2;
};

/// Classification of the pair joined by one edge. Leg order conventions:
/// ins = [lower.in0, lower.in1, upper's non-bond in], outs = [lower's spare
/// out (disentangler only), upper outs in slot order].
struct PairSignature {
  int edge = -1;
  int lower = -1;  // node feeding the bond
  int upper = -1;  // node consuming the bond
  std::vector<ExternalLeg> ins;
  std::vector<ExternalLeg> outs;
};

/// A two-tensor replacement: kinds, stacking order (lower feeds upper through
/// the single internal bond lower.out0 -> upper.in0), and the assignment of
/// signature legs to the new external slots.
struct CandidateStructure {
  NodeKind lower = NodeKind::Isometry;
  NodeKind upper = NodeKind::Top;
  std::vector<int> in_assign;   // external in slot -> index into sig.ins
  std::vector<int> out_assign;  // external out slot -> index into sig.outs
};

bool same_candidate(const CandidateStructure& a, const CandidateStructure& b);

PairSignature classify_pair(const TensorNetwork& net, int edge);

/// Exhaustive signature-matching two-tensor structures over kinds {u, v, t},
/// deduplicated under each tensor's symmetric leg exchanges. The incumbent
/// wiring is always a member.
std::vector<CandidateStructure> enumerate_candidates(const PairSignature& sig);

/// The incumbent wiring in the candidates' canonical form.
CandidateStructure incumbent_candidate(const TensorNetwork& net, const PairSignature& sig);

struct SpliceResult {
  TensorNetwork net;
  int bond_edge = -1;
  int lower = -1;
  int upper = -1;
};

/// Replace the pair with the candidate, tensors reset to the identity-like
/// seeds; external edges keep their ids and flags.
SpliceResult splice(const TensorNetwork& net, int edge, const CandidateStructure& cand);

/// Flag every edge whose endpoints share two or more edges; idempotent.
void refresh_exclusions(TensorNetwork& net);

struct SelectionState {
  std::optional<int> previous;
};

/// Edge selection: flags the previously selected edge, prefers unflagged
/// edges adjacent to it, restricts to maximal distance-from-top, samples
/// uniformly. Throws NumericError when no unflagged edge remains.
int select_edge(TensorNetwork& net, SelectionState& state, std::mt19937_64& rng);

}  // namespace ertn
