#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ertn/tensor.hpp"

namespace ertn {

class TwoSiteHamiltonian;

/// Node kinds of the isometric network. Leg counts are fixed per kind:
/// Disentangler 2 in / 2 out, Isometry 2 in / 1 out, Top 2 in / 0 out,
/// Site is a physical leaf supplying one leg of dimension 2. "in" legs face
/// the physical sites, "out" legs face the tops (renormalization direction).
enum class NodeKind { Disentangler, Isometry, Top, Site };

int in_count(NodeKind k);
int out_count(NodeKind k);
const char* kind_name(NodeKind k);

struct Node {
  NodeKind kind;
  DenseTensor tensor;  // legs [in..., out...]; empty for Site nodes
};

/// Directed along the renormalization flow: src's out slot feeds dst's in slot.
struct Edge {
  int src = -1;
  int src_slot = 0;
  int dst = -1;
  int dst_slot = 0;
};

struct NodeDeviation {
  int node = -1;
  double deviation = 0.0;
};

struct ValidationReport {
  std::vector<NodeDeviation> deviations;  // every non-site node
  double worst = 0.0;
  std::optional<double> norm_deviation;  // | <psi|psi> - 1 |, when computable
  std::vector<int> failing(double tol) const;
  bool passed(double tol) const { return worst <= tol; }
};

class TensorNetwork {
 public:
  int add_site();
  int add_node(NodeKind kind, DenseTensor tensor);
  int add_edge(int src, int src_slot, int dst, int dst_slot);
  void set_leaves(std::vector<int> site_ids);

  int node_count() const { return static_cast<int>(nodes_.size()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  int tensor_count() const;  // non-site nodes
  const Node& node(int id) const { return nodes_.at(id); }
  const Edge& edge(int p) const { return edges_.at(p); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<int>& leaves() const { return leaves_; }

  std::vector<std::uint8_t>& flags() { return flags_; }
  const std::vector<std::uint8_t>& flags() const { return flags_; }

  void set_tensor(int id, DenseTensor t);
  void set_kind(int id, NodeKind kind, DenseTensor t);
  void rewire_edge(int p, Edge e);

  /// Hard structural errors: wrong arity, dangling or doubly-used slots,
  /// cycles, missing Top in a component, leaf bookkeeping mismatches.
  void structural_check() const;

  /// Isometric-condition deviations per node plus the global norm deviation
  /// (computed from the contracted state when the site count permits).
  ValidationReport validate(double tol = 1e-10, bool with_norm = true) const;

  /// Full amplitude vector; leaf 0 is the most significant bit.
  std::vector<cplx> to_state_vector(int site_cap = 20) const;

  /// d_p per edge: tensors passed from the nearest Top to reach the edge.
  std::vector<int> distances() const;

  /// f_p init: 1 for leaf-incident edges and parallel-pair edges, else 0.
  std::vector<std::uint8_t> initial_flags() const;
  void reset_flags();

  /// Marks every edge whose endpoints share >= 2 edges; idempotent.
  void flag_parallel_edges();

  /// Real manifold dimension summed over nodes (complex Stiefel 2np - p^2).
  int dof_count() const;

  std::string serialize() const;
  static TensorNetwork deserialize(const std::string& text);

  // wiring helpers
  std::vector<int> edges_at(int node) const;
  int edges_between(int a, int b) const;
  std::vector<int> in_edge_ids(int node) const;   // indexed by in slot
  std::vector<int> out_edge_ids(int node) const;  // indexed by out slot
  MatrixView node_view(int id) const;             // rows = in legs, cols = out legs

 private:
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<int> leaves_;
  std::vector<std::uint8_t> flags_;
};

/// Identity-like initial tensors: the disentangler is the 4x4 identity, the
/// isometry embeds the out basis as (0, c), the top is the (0,0) unit vector.
DenseTensor seed_tensor(NodeKind kind);

/// Haar-like random tensors for every non-site node, in node-id order.
void randomize_tensors(TensorNetwork& net, std::mt19937_64& rng);

/// Binary MERA on an even number of sites (>= 2); odd intermediate layers
/// pass one leg through. Tensors seeded with identity-like values.
TensorNetwork mera_network(int n_sites);

/// One single-layer periodic MERA block (2 disentanglers, 2 isometries, one
/// top) per ring of four consecutive sites; components are disconnected.
TensorNetwork tetramer_singlet_network(int rings);

/// Contraction engine bound to one network structure and Hamiltonian. Tensor
/// values may change between calls; the wiring must not. Causal-cone
/// reduction plus cached greedy pairwise contraction plans.
class EnergyEngine {
 public:
  EnergyEngine(const TensorNetwork& net, const TwoSiteHamiltonian& h);
  ~EnergyEngine();
  EnergyEngine(EnergyEngine&&) noexcept;
  EnergyEngine& operator=(EnergyEngine&&) noexcept;

  double energy();
  double energy_of_terms(const std::vector<int>& term_ids);
  cplx energy_complex();  // diagnostic: includes the imaginary residue

  /// Environment tensor (hole contraction) summed over the given terms;
  /// legs match the node tensor's legs.
  DenseTensor environment(int node);
  DenseTensor environment(int node, const std::vector<int>& term_ids);

  /// Hole contraction of <psi|psi> (no Hamiltonian insertion).
  DenseTensor environment_identity(int node);

  /// Term indices whose causal cone contains the node.
  std::vector<int> cone_terms(int node) const;
  bool term_is_zero(int term) const;

  const TensorNetwork& network() const;
  const TwoSiteHamiltonian& hamiltonian() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

double energy(const TensorNetwork& net, const TwoSiteHamiltonian& h);
DenseTensor environment(const TensorNetwork& net, int node, const TwoSiteHamiltonian& h);
DenseTensor environment_identity(const TensorNetwork& net, int node);

}  // namespace ertn
