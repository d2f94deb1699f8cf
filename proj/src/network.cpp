#include "ertn/network.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>

#include <json.hpp>

#include "ertn/errors.hpp"
#include "ertn/hamiltonian.hpp"
#include "ertn/hash.hpp"

namespace ertn {

int in_count(NodeKind k) {
  switch (k) {
    case NodeKind::Disentangler: return 2;
    case NodeKind::Isometry: return 2;
    case NodeKind::Top: return 2;
    case NodeKind::Site: return 0;
  }
  throw ConfigError("unknown node kind");
}

int out_count(NodeKind k) {
  switch (k) {
    case NodeKind::Disentangler: return 2;
    case NodeKind::Isometry: return 1;
    case NodeKind::Top: return 0;
    case NodeKind::Site: return 1;
  }
  throw ConfigError("unknown node kind");
}

const char* kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::Disentangler: return "u";
    case NodeKind::Isometry: return "v";
    case NodeKind::Top: return "t";
    case NodeKind::Site: return "site";
  }
  throw ConfigError("unknown node kind");
}

std::vector<int> ValidationReport::failing(double tol) const {
  std::vector<int> out;
  for (const auto& d : deviations)
    if (d.deviation > tol) out.push_back(d.node);
  return out;
}

int TensorNetwork::add_site() {
  nodes_.push_back({NodeKind::Site, DenseTensor{}});
  return node_count() - 1;
}

int TensorNetwork::add_node(NodeKind kind, DenseTensor tensor) {
  if (kind == NodeKind::Site) throw ConfigError("use add_site for leaves");
  if (tensor.rank() != in_count(kind) + out_count(kind))
    throw ConfigError("tensor rank does not match node kind");
  nodes_.push_back({kind, std::move(tensor)});
  return node_count() - 1;
}

int TensorNetwork::add_edge(int src, int src_slot, int dst, int dst_slot) {
  edges_.push_back({src, src_slot, dst, dst_slot});
  flags_.push_back(0);
  return edge_count() - 1;
}

void TensorNetwork::set_leaves(std::vector<int> site_ids) { leaves_ = std::move(site_ids); }

int TensorNetwork::tensor_count() const {
  int n = 0;
  for (const auto& nd : nodes_)
    if (nd.kind != NodeKind::Site) ++n;
  return n;
}

void TensorNetwork::set_tensor(int id, DenseTensor t) {
  Node& n = nodes_.at(id);
  if (n.kind == NodeKind::Site) throw ConfigError("sites carry no tensor");
  if (t.rank() != n.tensor.rank()) throw ConfigError("tensor rank change not allowed");
  n.tensor = std::move(t);
}

void TensorNetwork::set_kind(int id, NodeKind kind, DenseTensor t) {
  if (kind == NodeKind::Site) throw ConfigError("cannot turn a node into a site");
  if (t.rank() != in_count(kind) + out_count(kind))
    throw ConfigError("tensor rank does not match node kind");
  nodes_.at(id) = {kind, std::move(t)};
}

void TensorNetwork::rewire_edge(int p, Edge e) { edges_.at(p) = e; }

std::vector<int> TensorNetwork::edges_at(int node) const {
  std::vector<int> out;
  for (int p = 0; p < edge_count(); ++p)
    if (edges_[p].src == node || edges_[p].dst == node) out.push_back(p);
  return out;
}

int TensorNetwork::edges_between(int a, int b) const {
  int n = 0;
  for (const auto& e : edges_)
    if ((e.src == a && e.dst == b) || (e.src == b && e.dst == a)) ++n;
  return n;
}

std::vector<int> TensorNetwork::in_edge_ids(int node) const {
  std::vector<int> out(in_count(nodes_.at(node).kind), -1);
  for (int p = 0; p < edge_count(); ++p)
    if (edges_[p].dst == node) out.at(edges_[p].dst_slot) = p;
  return out;
}

std::vector<int> TensorNetwork::out_edge_ids(int node) const {
  std::vector<int> out(out_count(nodes_.at(node).kind), -1);
  for (int p = 0; p < edge_count(); ++p)
    if (edges_[p].src == node) out.at(edges_[p].src_slot) = p;
  return out;
}

MatrixView TensorNetwork::node_view(int id) const {
  const Node& n = nodes_.at(id);
  MatrixView v;
  for (int k = 0; k < in_count(n.kind); ++k) v.row_axes.push_back(k);
  for (int k = 0; k < out_count(n.kind); ++k) v.col_axes.push_back(in_count(n.kind) + k);
  return v;
}

void TensorNetwork::structural_check() const {
  std::vector<std::vector<int>> in_used(nodes_.size()), out_used(nodes_.size());
  for (std::size_t n = 0; n < nodes_.size(); ++n) {
    in_used[n].assign(in_count(nodes_[n].kind), 0);
    out_used[n].assign(out_count(nodes_[n].kind), 0);
    if (nodes_[n].kind != NodeKind::Site &&
        nodes_[n].tensor.rank() != in_count(nodes_[n].kind) + out_count(nodes_[n].kind))
      throw ConfigError("node tensor rank mismatch");
  }
  for (const auto& e : edges_) {
    if (e.src < 0 || e.src >= node_count() || e.dst < 0 || e.dst >= node_count())
      throw ConfigError("edge endpoint out of range");
    if (nodes_[e.src].kind == NodeKind::Top) throw ConfigError("top tensors have no outputs");
    if (nodes_[e.dst].kind == NodeKind::Site) throw ConfigError("sites have no inputs");
    if (e.src_slot < 0 || e.src_slot >= out_count(nodes_[e.src].kind))
      throw ConfigError("edge source slot out of range");
    if (e.dst_slot < 0 || e.dst_slot >= in_count(nodes_[e.dst].kind))
      throw ConfigError("edge destination slot out of range");
    if (++out_used[e.src][e.src_slot] > 1) throw ConfigError("output leg consumed twice");
    if (++in_used[e.dst][e.dst_slot] > 1) throw ConfigError("input leg fed twice");
    const int dst_dim = nodes_[e.dst].tensor.dim(e.dst_slot);
    const int src_dim = nodes_[e.src].kind == NodeKind::Site
                            ? 2
                            : nodes_[e.src].tensor.dim(in_count(nodes_[e.src].kind) +
                                                        e.src_slot);
    if (src_dim != dst_dim) throw ConfigError("edge connects legs of different dimension");
  }
  for (std::size_t n = 0; n < nodes_.size(); ++n) {
    for (int c : in_used[n])
      if (c != 1) throw ConfigError("dangling input leg");
    for (int c : out_used[n])
      if (c != 1) throw ConfigError("dangling output leg");
  }

  // leaf bookkeeping
  int site_total = 0;
  for (const auto& nd : nodes_)
    if (nd.kind == NodeKind::Site) ++site_total;
  if (static_cast<int>(leaves_.size()) != site_total)
    throw ConfigError("leaf list does not cover all sites");
  std::vector<char> leaf_seen(nodes_.size(), 0);
  for (int id : leaves_) {
    if (id < 0 || id >= node_count() || nodes_[id].kind != NodeKind::Site)
      throw ConfigError("leaf list entry is not a site");
    if (leaf_seen[id]++) throw ConfigError("duplicate leaf entry");
  }
  if (flags_.size() != edges_.size()) throw ConfigError("flag array size mismatch");

  // acyclicity along the renormalization direction
  std::vector<int> indeg(nodes_.size(), 0);
  for (const auto& e : edges_) ++indeg[e.dst];
  std::deque<int> queue;
  for (int n = 0; n < node_count(); ++n)
    if (indeg[n] == 0) queue.push_back(n);
  int visited = 0;
  std::vector<std::vector<int>> outs(nodes_.size());
  for (const auto& e : edges_) outs[e.src].push_back(e.dst);
  while (!queue.empty()) {
    int n = queue.front();
    queue.pop_front();
    ++visited;
    for (int m : outs[n])
      if (--indeg[m] == 0) queue.push_back(m);
  }
  if (visited != node_count()) throw ConfigError("network contains a directed loop");

  // every connected component must close on at least one top
  std::vector<int> comp(nodes_.size(), -1);
  int ncomp = 0;
  for (int n = 0; n < node_count(); ++n) {
    if (comp[n] != -1) continue;
    std::deque<int> bfs{n};
    comp[n] = ncomp;
    while (!bfs.empty()) {
      int a = bfs.front();
      bfs.pop_front();
      for (const auto& e : edges_) {
        int b = -1;
        if (e.src == a) b = e.dst;
        if (e.dst == a) b = e.src;
        if (b >= 0 && comp[b] == -1) {
          comp[b] = ncomp;
          bfs.push_back(b);
        }
      }
    }
    ++ncomp;
  }
  std::vector<char> has_top(ncomp, 0);
  for (int n = 0; n < node_count(); ++n)
    if (nodes_[n].kind == NodeKind::Top) has_top[comp[n]] = 1;
  for (char c : has_top)
    if (!c) throw ConfigError("component without a top tensor");
}

ValidationReport TensorNetwork::validate(double tol, bool with_norm) const {
  structural_check();
  ValidationReport report;
  for (int id = 0; id < node_count(); ++id) {
    const Node& n = nodes_[id];
    if (n.kind == NodeKind::Site) continue;
    MatrixView view = node_view(id);
    double dev = isometry_deviation(n.tensor, view);
    if (n.kind == NodeKind::Disentangler)
      dev = std::max(dev, coisometry_deviation(n.tensor, view));
    report.deviations.push_back({id, dev});
    report.worst = std::max(report.worst, dev);
  }
  if (with_norm && static_cast<int>(leaves_.size()) <= 20 && !leaves_.empty()) {
    auto psi = to_state_vector();
    double n2 = 0.0;
    for (const auto& a : psi) n2 += std::norm(a);
    report.norm_deviation = std::abs(n2 - 1.0);
  }
  (void)tol;
  return report;
}

std::vector<int> TensorNetwork::distances() const {
  std::vector<int> depth(nodes_.size(), -1);
  std::deque<int> queue;
  for (int n = 0; n < node_count(); ++n)
    if (nodes_[n].kind == NodeKind::Top) {
      depth[n] = 1;
      queue.push_back(n);
    }
  if (queue.empty()) throw ConfigError("network has no top tensor");
  std::vector<std::vector<int>> adj(nodes_.size());
  for (const auto& e : edges_) {
    adj[e.src].push_back(e.dst);
    adj[e.dst].push_back(e.src);
  }
  while (!queue.empty()) {
    int n = queue.front();
    queue.pop_front();
    for (int m : adj[n])
      if (depth[m] == -1) {
        depth[m] = depth[n] + 1;
        queue.push_back(m);
      }
  }
  std::vector<int> d(edges_.size());
  for (std::size_t p = 0; p < edges_.size(); ++p) {
    int a = depth[edges_[p].src], b = depth[edges_[p].dst];
    if (a == -1 || b == -1) throw ConfigError("edge disconnected from every top");
    d[p] = std::min(a, b);
  }
  return d;
}

std::vector<std::uint8_t> TensorNetwork::initial_flags() const {
  std::vector<std::uint8_t> f(edges_.size(), 0);
  for (std::size_t p = 0; p < edges_.size(); ++p) {
    const Edge& e = edges_[p];
    if (nodes_[e.src].kind == NodeKind::Site || nodes_[e.dst].kind == NodeKind::Site)
      f[p] = 1;
  }
  // parallel-edge pairs cannot be reconnected by the local moves
  for (std::size_t p = 0; p < edges_.size(); ++p)
    if (edges_between(edges_[p].src, edges_[p].dst) >= 2) f[p] = 1;
  return f;
}

void TensorNetwork::reset_flags() { flags_ = initial_flags(); }

void TensorNetwork::flag_parallel_edges() {
  for (std::size_t p = 0; p < edges_.size(); ++p)
    if (edges_between(edges_[p].src, edges_[p].dst) >= 2) flags_[p] = 1;
}

int TensorNetwork::dof_count() const {
  int total = 0;
  for (const auto& nd : nodes_) {
    if (nd.kind == NodeKind::Site) continue;
    long n = 1, p = 1;
    for (int k = 0; k < in_count(nd.kind); ++k) n *= nd.tensor.dim(k);
    for (int k = 0; k < out_count(nd.kind); ++k)
      p *= nd.tensor.dim(in_count(nd.kind) + k);
    total += static_cast<int>(2 * n * p - p * p);
  }
  return total;
}

// ---------------------------------------------------------------------------
// builders

DenseTensor seed_tensor(NodeKind kind) {
  switch (kind) {
    case NodeKind::Disentangler: {
      DenseTensor t(std::vector<int>{2, 2, 2, 2});
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          const int idx[4] = {a, b, a, b};
          t.at(std::span<const int>(idx, 4)) = 1.0;
        }
      return t;
    }
    case NodeKind::Isometry: {
      DenseTensor t(std::vector<int>{2, 2, 2});
      for (int c = 0; c < 2; ++c) {
        const int idx[3] = {0, c, c};
        t.at(std::span<const int>(idx, 3)) = 1.0;
      }
      return t;
    }
    case NodeKind::Top: {
      DenseTensor t(std::vector<int>{2, 2});
      const int idx[2] = {0, 0};
      t.at(std::span<const int>(idx, 2)) = 1.0;
      return t;
    }
    case NodeKind::Site: break;
  }
  throw ConfigError("no seed tensor for sites");
}

void randomize_tensors(TensorNetwork& net, std::mt19937_64& rng) {
  for (int id = 0; id < net.node_count(); ++id) {
    if (net.node(id).kind == NodeKind::Site) continue;
    net.set_tensor(id, random_isometry(net.node(id).tensor.dims(), net.node_view(id), rng));
  }
}

namespace {

struct Leg {
  int node;
  int slot;  // out slot of node
};

// One coarse-graining layer; consumes `legs`, returns the renormalized legs.
std::vector<Leg> mera_layer(TensorNetwork& net, const std::vector<Leg>& legs) {
  const int m = static_cast<int>(legs.size());
  std::vector<Leg> next;
  if (m % 2 == 0) {
    const int half = m / 2;
    std::vector<int> us(half);
    for (int k = 0; k < half; ++k) {
      us[k] = net.add_node(NodeKind::Disentangler, seed_tensor(NodeKind::Disentangler));
      const Leg& a = legs[(2 * k + 1) % m];
      const Leg& b = legs[(2 * k + 2) % m];
      net.add_edge(a.node, a.slot, us[k], 0);
      net.add_edge(b.node, b.slot, us[k], 1);
    }
    for (int k = 0; k < half; ++k) {
      int v = net.add_node(NodeKind::Isometry, seed_tensor(NodeKind::Isometry));
      net.add_edge(us[(k - 1 + half) % half], 1, v, 0);
      net.add_edge(us[k], 0, v, 1);
      next.push_back({v, 0});
    }
    return next;
  }
  const int half = (m - 1) / 2;
  std::vector<int> us(half);
  for (int k = 0; k < half; ++k) {
    us[k] = net.add_node(NodeKind::Disentangler, seed_tensor(NodeKind::Disentangler));
    net.add_edge(legs[2 * k].node, legs[2 * k].slot, us[k], 0);
    net.add_edge(legs[2 * k + 1].node, legs[2 * k + 1].slot, us[k], 1);
  }
  if (half == 1) {
    int v = net.add_node(NodeKind::Isometry, seed_tensor(NodeKind::Isometry));
    net.add_edge(us[0], 1, v, 0);
    net.add_edge(legs[m - 1].node, legs[m - 1].slot, v, 1);
    next.push_back({us[0], 0});
    next.push_back({v, 0});
    return next;
  }
  for (int k = 0; k < half; ++k) {
    int v = net.add_node(NodeKind::Isometry, seed_tensor(NodeKind::Isometry));
    net.add_edge(us[k], 1, v, 0);
    net.add_edge(us[(k + 1) % half], 0, v, 1);
    next.push_back({v, 0});
  }
  next.push_back(legs[m - 1]);
  return next;
}

}  // namespace

TensorNetwork mera_network(int n_sites) {
  if (n_sites < 2 || n_sites % 2 != 0)
    throw ConfigError("binary MERA needs an even site count >= 2");
  TensorNetwork net;
  std::vector<int> sites(n_sites);
  std::vector<Leg> legs;
  for (int k = 0; k < n_sites; ++k) {
    sites[k] = net.add_site();
    legs.push_back({sites[k], 0});
  }
  while (legs.size() > 2) legs = mera_layer(net, legs);
  int top = net.add_node(NodeKind::Top, seed_tensor(NodeKind::Top));
  net.add_edge(legs[0].node, legs[0].slot, top, 0);
  net.add_edge(legs[1].node, legs[1].slot, top, 1);
  net.set_leaves(sites);
  net.reset_flags();
  return net;
}

TensorNetwork tetramer_singlet_network(int rings) {
  if (rings < 1) throw ConfigError("need at least one ring of four sites");
  TensorNetwork net;
  std::vector<int> sites(4 * rings);
  for (int k = 0; k < 4 * rings; ++k) sites[k] = net.add_site();
  for (int r = 0; r < rings; ++r) {
    std::vector<Leg> legs;
    for (int y = 0; y < 4; ++y) legs.push_back({sites[4 * r + y], 0});
    legs = mera_layer(net, legs);
    int top = net.add_node(NodeKind::Top, seed_tensor(NodeKind::Top));
    net.add_edge(legs[0].node, legs[0].slot, top, 0);
    net.add_edge(legs[1].node, legs[1].slot, top, 1);
  }
  net.set_leaves(sites);
  net.reset_flags();
  return net;
}

// ---------------------------------------------------------------------------
// serialization

namespace {

NodeKind kind_from_name(const std::string& s) {
  if (s == "u") return NodeKind::Disentangler;
  if (s == "v") return NodeKind::Isometry;
  if (s == "t") return NodeKind::Top;
  if (s == "site") return NodeKind::Site;
  throw ConfigError("unknown node kind in network file: " + s);
}

}  // namespace

std::string TensorNetwork::serialize() const {
  nlohmann::json payload;
  payload["nodes"] = nlohmann::json::array();
  for (const auto& n : nodes_) {
    nlohmann::json jn;
    jn["kind"] = kind_name(n.kind);
    jn["dims"] = n.kind == NodeKind::Site ? std::vector<int>{} : n.tensor.dims();
    nlohmann::json elems = nlohmann::json::array();
    if (n.kind != NodeKind::Site)
      for (const auto& v : n.tensor.elements()) {
        elems.push_back(v.real());
        elems.push_back(v.imag());
      }
    jn["elements"] = std::move(elems);
    payload["nodes"].push_back(std::move(jn));
  }
  payload["edges"] = nlohmann::json::array();
  for (const auto& e : edges_)
    payload["edges"].push_back({e.src, e.src_slot, e.dst, e.dst_slot});
  payload["leaves"] = leaves_;
  payload["flags"] = std::vector<int>(flags_.begin(), flags_.end());

  nlohmann::json doc;
  doc["format"] = "ertn-network";
  doc["schema_version"] = 1;
  Fnv1a64 h;
  h.update(payload.dump());
  doc["checksum"] = h.hex();
  doc["payload"] = std::move(payload);
  return doc.dump(1);
}

TensorNetwork TensorNetwork::deserialize(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("network file is not valid JSON: ") + e.what());
  }
  if (!doc.contains("format") || doc["format"] != "ertn-network")
    throw ConfigError("not an ertn network file");
  if (!doc.contains("schema_version") || doc["schema_version"].get<int>() != 1)
    throw ConfigError("unsupported network schema version");
  Fnv1a64 h;
  h.update(doc["payload"].dump());
  if (doc["checksum"].get<std::string>() != h.hex())
    throw ConfigError("network file checksum mismatch");

  const auto& payload = doc["payload"];
  TensorNetwork net;
  for (const auto& jn : payload["nodes"]) {
    NodeKind kind = kind_from_name(jn["kind"].get<std::string>());
    if (kind == NodeKind::Site) {
      net.add_site();
      continue;
    }
    DenseTensor t(jn["dims"].get<std::vector<int>>());
    const auto& elems = jn["elements"];
    if (elems.size() != 2 * t.size())
      throw ConfigError("element count does not match tensor dims");
    for (std::size_t k = 0; k < t.size(); ++k)
      t[k] = cplx(elems[2 * k].get<double>(), elems[2 * k + 1].get<double>());
    net.nodes_.push_back({kind, std::move(t)});
  }
  for (const auto& je : payload["edges"]) {
    net.edges_.push_back({je[0].get<int>(), je[1].get<int>(), je[2].get<int>(),
                          je[3].get<int>()});
  }
  net.leaves_ = payload["leaves"].get<std::vector<int>>();
  auto flag_ints = payload["flags"].get<std::vector<int>>();
  net.flags_.assign(flag_ints.begin(), flag_ints.end());
  net.structural_check();
  return net;
}

// ---------------------------------------------------------------------------
// contraction programs

namespace {

struct ProtoFactor {
  // node >= 0: network tensor (conjugated for the bra layer);
  // node == -1: the Hamiltonian block; node == -2: a cached static part.
  int node = -1;
  bool conj = false;
  std::vector<int> wires;
  std::vector<int> dims;
  std::size_t size() const {
    std::size_t s = 1;
    for (int d : dims) s *= static_cast<std::size_t>(d);
    return s;
  }
};

struct PlanStep {
  int a = 0, b = 0;
  std::vector<std::pair<int, int>> pairs;
  // execution cache
  bool a_identity = false, b_identity = false;
  std::vector<std::size_t> a_stride, b_stride;  // source strides in permuted order
  std::vector<int> a_dims, b_dims;              // permuted shapes
  std::size_t m = 1, k = 1, n = 1;
  std::vector<int> out_dims;
  DenseTensor a_buf, b_buf, out_buf;
};

struct Program {
  std::vector<ProtoFactor> factors;
  std::vector<int> open_wires;
  std::vector<PlanStep> steps;
  std::vector<int> final_perm;
  std::vector<DenseTensor> conj_bufs;  // per factor, used by bra copies
};

std::vector<std::size_t> row_major_strides(const std::vector<int>& dims) {
  std::vector<std::size_t> s(dims.size(), 1);
  for (int k = static_cast<int>(dims.size()) - 2; k >= 0; --k)
    s[k] = s[k + 1] * static_cast<std::size_t>(dims[k + 1]);
  return s;
}

// Greedy pairwise ordering: prefer the connected pair with the smallest
// result, fall back to the smallest outer product. Execution strides and
// buffers are precomputed so replays allocate nothing.
void make_plan(Program& prog) {
  std::vector<ProtoFactor> live = prog.factors;
  while (live.size() > 1) {
    int best_a = -1, best_b = -1;
    std::size_t best_size = 0;
    bool best_connected = false;
    for (std::size_t i = 0; i < live.size(); ++i)
      for (std::size_t j = i + 1; j < live.size(); ++j) {
        std::size_t shared = 1;
        for (std::size_t ai = 0; ai < live[i].wires.size(); ++ai)
          for (std::size_t bj = 0; bj < live[j].wires.size(); ++bj)
            if (live[i].wires[ai] == live[j].wires[bj])
              shared *= static_cast<std::size_t>(live[i].dims[ai]);
        const bool connected = shared > 1;
        const std::size_t result = live[i].size() / shared * (live[j].size() / shared);
        if (best_a < 0 || (connected && !best_connected) ||
            (connected == best_connected && result < best_size)) {
          best_a = static_cast<int>(i);
          best_b = static_cast<int>(j);
          best_size = result;
          best_connected = connected;
        }
      }
    PlanStep step;
    step.a = best_a;
    step.b = best_b;
    ProtoFactor& fa = live[best_a];
    ProtoFactor& fb = live[best_b];
    ProtoFactor merged;
    std::vector<char> bused(fb.wires.size(), 0);
    std::vector<int> a_free, b_free, a_paired, b_paired;
    for (std::size_t ai = 0; ai < fa.wires.size(); ++ai) {
      bool paired = false;
      for (std::size_t bj = 0; bj < fb.wires.size(); ++bj)
        if (fa.wires[ai] == fb.wires[bj]) {
          step.pairs.push_back({static_cast<int>(ai), static_cast<int>(bj)});
          a_paired.push_back(static_cast<int>(ai));
          b_paired.push_back(static_cast<int>(bj));
          bused[bj] = 1;
          paired = true;
          break;
        }
      if (!paired) {
        a_free.push_back(static_cast<int>(ai));
        merged.wires.push_back(fa.wires[ai]);
        merged.dims.push_back(fa.dims[ai]);
      }
    }
    for (std::size_t bj = 0; bj < fb.wires.size(); ++bj)
      if (!bused[bj]) {
        b_free.push_back(static_cast<int>(bj));
        merged.wires.push_back(fb.wires[bj]);
        merged.dims.push_back(fb.dims[bj]);
      }

    // permutation specs: A -> [free..., paired...], B -> [paired..., free...]
    std::vector<int> a_order = a_free, b_order = b_paired;
    a_order.insert(a_order.end(), a_paired.begin(), a_paired.end());
    b_order.insert(b_order.end(), b_free.begin(), b_free.end());
    const auto a_str = row_major_strides(fa.dims);
    const auto b_str = row_major_strides(fb.dims);
    step.a_identity = step.b_identity = true;
    for (std::size_t q = 0; q < a_order.size(); ++q) {
      if (a_order[q] != static_cast<int>(q)) step.a_identity = false;
      step.a_stride.push_back(a_str[a_order[q]]);
      step.a_dims.push_back(fa.dims[a_order[q]]);
    }
    for (std::size_t q = 0; q < b_order.size(); ++q) {
      if (b_order[q] != static_cast<int>(q)) step.b_identity = false;
      step.b_stride.push_back(b_str[b_order[q]]);
      step.b_dims.push_back(fb.dims[b_order[q]]);
    }
    step.m = 1;
    step.k = 1;
    step.n = 1;
    for (int ax : a_free) step.m *= static_cast<std::size_t>(fa.dims[ax]);
    for (int ax : a_paired) step.k *= static_cast<std::size_t>(fa.dims[ax]);
    for (int ax : b_free) step.n *= static_cast<std::size_t>(fb.dims[ax]);
    step.out_dims = merged.dims;
    if (!step.a_identity) step.a_buf = DenseTensor(step.a_dims);
    if (!step.b_identity) step.b_buf = DenseTensor(step.b_dims);
    step.out_buf = DenseTensor(step.out_dims.empty() ? std::vector<int>{}
                                                     : step.out_dims);

    prog.steps.push_back(std::move(step));
    live.erase(live.begin() + best_b);
    live.erase(live.begin() + best_a);
    live.push_back(std::move(merged));
  }
  prog.final_perm.clear();
  if (!live.empty()) {
    const auto& wires = live[0].wires;
    if (wires.size() != prog.open_wires.size())
      throw NumericError("contraction left unexpected open legs");
    for (int w : prog.open_wires) {
      auto it = std::find(wires.begin(), wires.end(), w);
      if (it == wires.end()) throw NumericError("contraction lost an open leg");
      prog.final_perm.push_back(static_cast<int>(it - wires.begin()));
    }
  }
  prog.conj_bufs.resize(prog.factors.size());
  for (std::size_t f = 0; f < prog.factors.size(); ++f)
    if (prog.factors[f].node >= 0 && prog.factors[f].conj)
      prog.conj_bufs[f] = DenseTensor(prog.factors[f].dims);
}

void permute_into(const cplx* src, const std::vector<std::size_t>& stride,
                  const std::vector<int>& dims, cplx* dst) {
  if (dims.empty()) {
    dst[0] = src[0];
    return;
  }
  std::size_t total = 1;
  for (int d : dims) total *= static_cast<std::size_t>(d);
  const int last = static_cast<int>(dims.size()) - 1;
  std::vector<int> idx(dims.size(), 0);
  std::size_t off = 0;
  for (std::size_t out = 0; out < total; ++out) {
    dst[out] = src[off];
    for (int q = last; q >= 0; --q) {
      off += stride[q];
      if (++idx[q] < dims[q]) break;
      off -= stride[q] * static_cast<std::size_t>(dims[q]);
      idx[q] = 0;
    }
  }
}

DenseTensor h_block_tensor(const Eigen::Matrix4cd& block) {
  DenseTensor t(std::vector<int>{2, 2, 2, 2});  // legs [bra_i, bra_j, ket_i, ket_j]
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) t[static_cast<std::size_t>(r) * 4 + c] = block(r, c);
  return t;
}

}  // namespace

struct EnergyEngine::Impl {
  const TensorNetwork* net;
  const TwoSiteHamiltonian* ham;
  std::vector<char> zero_term;
  std::vector<DenseTensor> h_blocks;
  std::map<std::pair<int, int>, Program> programs;
  std::vector<std::vector<int>> node_in_edges, node_out_edges;

  // frozen mode: only `targets` change between calls; everything else is
  // pre-contracted into cached static parts
  bool frozen = false;
  std::vector<char> is_target;
  std::map<std::pair<int, int>, Program> frozen_programs;
  std::map<std::pair<int, int>, DenseTensor> static_parts;

  std::vector<char> ancestors(std::vector<int> seeds) const {
    std::vector<char> mark(net->node_count(), 0);
    std::deque<int> queue;
    for (int s : seeds)
      if (!mark[s]) {
        mark[s] = 1;
        queue.push_back(s);
      }
    while (!queue.empty()) {
      int n = queue.front();
      queue.pop_front();
      for (const auto& e : net->edges())
        if (e.src == n && !mark[e.dst]) {
          mark[e.dst] = 1;
          queue.push_back(e.dst);
        }
    }
    return mark;
  }

  // term >= 0: <psi| h_term |psi> network; term == -1: <psi|psi> network.
  // hole >= 0: remove that node's ket copy, leaving its legs open.
  Program build_program(int term, int hole) const {
    std::vector<char> dirty(net->node_count(), 0);
    std::vector<int> seeds;
    int site_a = -1, site_b = -1;
    if (term >= 0) {
      const auto& t = ham->terms()[term];
      site_a = net->leaves().at(t.i);
      site_b = net->leaves().at(t.j);
      seeds.push_back(site_a);
      seeds.push_back(site_b);
    }
    if (hole >= 0) seeds.push_back(hole);
    dirty = ancestors(seeds);

    const int ne = net->edge_count();
    std::vector<int> ket_wire(ne, -1), bra_wire(ne, -1);
    int next = 0;
    for (int p = 0; p < ne; ++p) {
      const Edge& e = net->edge(p);
      if (!dirty[e.dst]) continue;
      const bool src_site = net->node(e.src).kind == NodeKind::Site;
      const bool src_active = src_site ? (e.src == site_a || e.src == site_b)
                                       : dirty[e.src] != 0;
      if (src_active) {
        ket_wire[p] = next++;
        bra_wire[p] = next++;
      } else {
        ket_wire[p] = bra_wire[p] = next++;
      }
    }

    Program prog;
    for (int n = 0; n < net->node_count(); ++n) {
      if (!dirty[n] || net->node(n).kind == NodeKind::Site) continue;
      auto wires_for = [&](const std::vector<int>& wire_of) {
        std::vector<int> w;
        for (int p : node_in_edges[n]) w.push_back(wire_of[p]);
        for (int p : node_out_edges[n]) w.push_back(wire_of[p]);
        return w;
      };
      if (n != hole) {
        ProtoFactor f;
        f.node = n;
        f.conj = false;
        f.wires = wires_for(ket_wire);
        f.dims = net->node(n).tensor.dims();
        prog.factors.push_back(std::move(f));
      }
      ProtoFactor f;
      f.node = n;
      f.conj = true;
      f.wires = wires_for(bra_wire);
      f.dims = net->node(n).tensor.dims();
      prog.factors.push_back(std::move(f));
    }
    if (term >= 0) {
      int edge_a = -1, edge_b = -1;
      for (int p = 0; p < ne; ++p) {
        if (net->edge(p).src == site_a) edge_a = p;
        if (net->edge(p).src == site_b) edge_b = p;
      }
      ProtoFactor f;
      f.node = -1;
      f.wires = {bra_wire[edge_a], bra_wire[edge_b], ket_wire[edge_a], ket_wire[edge_b]};
      f.dims = {2, 2, 2, 2};
      prog.factors.push_back(std::move(f));
    }
    if (hole >= 0) {
      for (int p : node_in_edges[hole]) prog.open_wires.push_back(ket_wire[p]);
      for (int p : node_out_edges[hole]) prog.open_wires.push_back(ket_wire[p]);
    }
    make_plan(prog);
    return prog;
  }

  // Split the base program into a static part (contracted once, cached) and
  // the dynamic factors touching the frozen targets.
  Program build_frozen_program(int term, int hole) {
    Program base;
    {
      std::vector<char> dirty(net->node_count(), 0);
      std::vector<int> seeds;
      int site_a = -1, site_b = -1;
      if (term >= 0) {
        const auto& t = ham->terms()[term];
        site_a = net->leaves().at(t.i);
        site_b = net->leaves().at(t.j);
        seeds.push_back(site_a);
        seeds.push_back(site_b);
      }
      if (hole >= 0) seeds.push_back(hole);
      dirty = ancestors(seeds);

      const int ne = net->edge_count();
      std::vector<int> ket_wire(ne, -1), bra_wire(ne, -1);
      int next = 0;
      for (int p = 0; p < ne; ++p) {
        const Edge& e = net->edge(p);
        if (!dirty[e.dst]) continue;
        const bool src_site = net->node(e.src).kind == NodeKind::Site;
        const bool src_active = src_site ? (e.src == site_a || e.src == site_b)
                                         : dirty[e.src] != 0;
        if (src_active) {
          ket_wire[p] = next++;
          bra_wire[p] = next++;
        } else {
          ket_wire[p] = bra_wire[p] = next++;
        }
      }
      for (int n = 0; n < net->node_count(); ++n) {
        if (!dirty[n] || net->node(n).kind == NodeKind::Site) continue;
        auto wires_for = [&](const std::vector<int>& wire_of) {
          std::vector<int> w;
          for (int p : node_in_edges[n]) w.push_back(wire_of[p]);
          for (int p : node_out_edges[n]) w.push_back(wire_of[p]);
          return w;
        };
        if (n != hole) {
          ProtoFactor f;
          f.node = n;
          f.conj = false;
          f.wires = wires_for(ket_wire);
          f.dims = net->node(n).tensor.dims();
          base.factors.push_back(std::move(f));
        }
        ProtoFactor f;
        f.node = n;
        f.conj = true;
        f.wires = wires_for(bra_wire);
        f.dims = net->node(n).tensor.dims();
        base.factors.push_back(std::move(f));
      }
      if (term >= 0) {
        int edge_a = -1, edge_b = -1;
        for (int p = 0; p < ne; ++p) {
          if (net->edge(p).src == site_a) edge_a = p;
          if (net->edge(p).src == site_b) edge_b = p;
        }
        ProtoFactor f;
        f.node = -1;
        f.wires = {bra_wire[edge_a], bra_wire[edge_b], ket_wire[edge_a],
                   ket_wire[edge_b]};
        f.dims = {2, 2, 2, 2};
        base.factors.push_back(std::move(f));
      }
      if (hole >= 0) {
        for (int p : node_in_edges[hole]) base.open_wires.push_back(ket_wire[p]);
        for (int p : node_out_edges[hole]) base.open_wires.push_back(ket_wire[p]);
      }
    }

    std::vector<ProtoFactor> statics, dynamics;
    for (auto& f : base.factors) {
      const bool dynamic = f.node >= 0 && is_target[f.node];
      (dynamic ? dynamics : statics).push_back(f);
    }

    Program frozen;
    frozen.open_wires = base.open_wires;
    if (!statics.empty()) {
      // wires the static part must keep open
      std::vector<int> keep;
      auto present_in = [](const std::vector<ProtoFactor>& fs, int w) {
        for (const auto& f : fs)
          for (int fw : f.wires)
            if (fw == w) return true;
        return false;
      };
      Program spart;
      spart.factors = statics;
      for (const auto& f : statics)
        for (std::size_t q = 0; q < f.wires.size(); ++q) {
          const int w = f.wires[q];
          const bool open_here =
              present_in(dynamics, w) ||
              std::count(base.open_wires.begin(), base.open_wires.end(), w) > 0;
          if (open_here && !std::count(keep.begin(), keep.end(), w)) keep.push_back(w);
        }
      spart.open_wires = keep;
      make_plan(spart);
      DenseTensor value = run(spart, term);
      ProtoFactor eff;
      eff.node = -2;
      eff.wires = keep;
      eff.dims = value.dims();
      static_parts[{term, hole}] = std::move(value);
      frozen.factors.push_back(std::move(eff));
    }
    for (auto& f : dynamics) frozen.factors.push_back(std::move(f));
    make_plan(frozen);
    return frozen;
  }

  Program& program(int term, int hole) {
    auto& store = frozen ? frozen_programs : programs;
    auto key = std::make_pair(term, hole);
    auto it = store.find(key);
    if (it == store.end()) {
      Program p = frozen ? build_frozen_program(term, hole) : build_program(term, hole);
      it = store.emplace(key, std::move(p)).first;
    }
    return it->second;
  }

  DenseTensor run(Program& prog, int term) {
    std::vector<const DenseTensor*> live;
    live.reserve(prog.factors.size());
    for (std::size_t f = 0; f < prog.factors.size(); ++f) {
      const ProtoFactor& pf = prog.factors[f];
      if (pf.node == -1) {
        live.push_back(&h_blocks[term]);
      } else if (pf.node == -2) {
        live.push_back(&static_parts.at({term, -2 == pf.node ? current_hole : 0}));
      } else if (pf.conj) {
        DenseTensor& buf = prog.conj_bufs[f];
        const DenseTensor& src = net->node(pf.node).tensor;
        for (std::size_t k = 0; k < src.size(); ++k) buf[k] = std::conj(src[k]);
        live.push_back(&buf);
      } else {
        live.push_back(&net->node(pf.node).tensor);
      }
    }
    for (auto& step : prog.steps) {
      const DenseTensor* ta = live[step.a];
      const DenseTensor* tb = live[step.b];
      const cplx* pa = ta->elements().data();
      const cplx* pb = tb->elements().data();
      if (!step.a_identity) {
        permute_into(pa, step.a_stride, step.a_dims, step.a_buf.elements().data());
        pa = step.a_buf.elements().data();
      }
      if (!step.b_identity) {
        permute_into(pb, step.b_stride, step.b_dims, step.b_buf.elements().data());
        pb = step.b_buf.elements().data();
      }
      using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
      Eigen::Map<const RowMat> A(pa, static_cast<Eigen::Index>(step.m),
                                 static_cast<Eigen::Index>(step.k));
      Eigen::Map<const RowMat> B(pb, static_cast<Eigen::Index>(step.k),
                                 static_cast<Eigen::Index>(step.n));
      Eigen::Map<RowMat> C(step.out_buf.elements().data(),
                           static_cast<Eigen::Index>(step.m),
                           static_cast<Eigen::Index>(step.n));
      C.noalias() = A * B;
      live.erase(live.begin() + step.b);
      live.erase(live.begin() + step.a);
      live.push_back(&step.out_buf);
    }
    if (live.empty()) return DenseTensor::scalar(1.0);
    return live[0]->permuted(prog.final_perm);
  }

  int current_hole = 0;  // routes -2 factors to their cached static part

  DenseTensor execute(int term, int hole) {
    current_hole = hole;
    return run(program(term, hole), term);
  }

  cplx term_value(int term) {
    if (term >= 0 && zero_term[term]) return {0.0, 0.0};
    current_hole = -1;
    DenseTensor r = run(program(term, -1), term);
    return r[0];
  }
};

EnergyEngine::EnergyEngine(const TensorNetwork& net, const TwoSiteHamiltonian& h)
    : impl_(std::make_unique<Impl>()) {
  impl_->net = &net;
  impl_->ham = &h;
  if (static_cast<int>(net.leaves().size()) != h.sites())
    throw ConfigError("Hamiltonian site count does not match network leaves");
  const int nt = static_cast<int>(h.terms().size());
  impl_->zero_term.resize(nt, 0);
  impl_->h_blocks.reserve(nt);
  for (int t = 0; t < nt; ++t) {
    impl_->h_blocks.push_back(h_block_tensor(h.terms()[t].block));
    if (h.terms()[t].block.cwiseAbs().maxCoeff() == 0.0) impl_->zero_term[t] = 1;
  }
  impl_->node_in_edges.resize(net.node_count());
  impl_->node_out_edges.resize(net.node_count());
  for (int n = 0; n < net.node_count(); ++n) {
    if (net.node(n).kind == NodeKind::Site) continue;
    impl_->node_in_edges[n] = net.in_edge_ids(n);
    impl_->node_out_edges[n] = net.out_edge_ids(n);
  }
}

EnergyEngine::~EnergyEngine() = default;
EnergyEngine::EnergyEngine(EnergyEngine&&) noexcept = default;
EnergyEngine& EnergyEngine::operator=(EnergyEngine&&) noexcept = default;

const TensorNetwork& EnergyEngine::network() const { return *impl_->net; }
const TwoSiteHamiltonian& EnergyEngine::hamiltonian() const { return *impl_->ham; }
bool EnergyEngine::term_is_zero(int term) const { return impl_->zero_term[term] != 0; }

void EnergyEngine::freeze_targets(const std::vector<int>& targets) {
  impl_->frozen = true;
  impl_->is_target.assign(impl_->net->node_count(), 0);
  for (int n : targets) impl_->is_target.at(n) = 1;
  impl_->frozen_programs.clear();
  impl_->static_parts.clear();
}

cplx EnergyEngine::energy_complex() {
  cplx total{0.0, 0.0};
  for (int t = 0; t < static_cast<int>(impl_->ham->terms().size()); ++t)
    total += impl_->term_value(t);
  return total;
}

double EnergyEngine::energy() {
  cplx total = energy_complex();
  const double scale = 1.0 + std::abs(total.real());
  if (std::abs(total.imag()) > 1e-8 * scale)
    throw NumericError("energy has a non-Hermitian imaginary residue");
  return total.real();
}

double EnergyEngine::energy_of_terms(const std::vector<int>& term_ids) {
  cplx total{0.0, 0.0};
  for (int t : term_ids) total += impl_->term_value(t);
  return total.real();
}

DenseTensor EnergyEngine::environment(int node) {
  std::vector<int> all(impl_->ham->terms().size());
  std::iota(all.begin(), all.end(), 0);
  return environment(node, all);
}

DenseTensor EnergyEngine::environment(int node, const std::vector<int>& term_ids) {
  if (node < 0 || node >= impl_->net->node_count() ||
      impl_->net->node(node).kind == NodeKind::Site)
    throw ConfigError("environment target must be a non-site node");
  if (impl_->frozen && !impl_->is_target[node])
    throw ConfigError("environment of a non-target node on a frozen engine");
  DenseTensor acc(impl_->net->node(node).tensor.dims());
  for (int t : term_ids) {
    if (impl_->zero_term[t]) continue;
    acc += impl_->execute(t, node);
  }
  return acc;
}

DenseTensor EnergyEngine::environment_identity(int node) {
  if (node < 0 || node >= impl_->net->node_count() ||
      impl_->net->node(node).kind == NodeKind::Site)
    throw ConfigError("environment target must be a non-site node");
  return impl_->execute(-1, node);
}

std::vector<int> EnergyEngine::cone_terms(int node) const {
  std::vector<int> out;
  for (int t = 0; t < static_cast<int>(impl_->ham->terms().size()); ++t) {
    const auto& term = impl_->ham->terms()[t];
    auto mark = impl_->ancestors(
        {impl_->net->leaves().at(term.i), impl_->net->leaves().at(term.j)});
    if (mark[node]) out.push_back(t);
  }
  return out;
}

double energy(const TensorNetwork& net, const TwoSiteHamiltonian& h) {
  EnergyEngine engine(net, h);
  return engine.energy();
}

DenseTensor environment(const TensorNetwork& net, int node, const TwoSiteHamiltonian& h) {
  EnergyEngine engine(net, h);
  return engine.environment(node);
}

DenseTensor environment_identity(const TensorNetwork& net, int node) {
  // a trivial Hamiltonian just to host the engine; not used by the identity program
  std::vector<HamTerm> terms;
  terms.push_back({0, 1, Eigen::Matrix4cd::Zero()});
  TwoSiteHamiltonian dummy(static_cast<int>(net.leaves().size()), std::move(terms));
  EnergyEngine engine(net, dummy);
  return engine.environment_identity(node);
}

// ---------------------------------------------------------------------------
// full contraction to the amplitude vector

std::vector<cplx> TensorNetwork::to_state_vector(int site_cap) const {
  const int n_sites = static_cast<int>(leaves_.size());
  if (n_sites == 0) throw ConfigError("network has no leaves");
  if (n_sites > site_cap) throw CapExceeded("site count exceeds the dense state cap");

  Program prog;
  std::vector<int> wire_of(edges_.size());
  for (std::size_t p = 0; p < edges_.size(); ++p) wire_of[p] = static_cast<int>(p);
  for (int n = 0; n < node_count(); ++n) {
    if (nodes_[n].kind == NodeKind::Site) continue;
    ProtoFactor f;
    f.node = n;
    for (int p : in_edge_ids(n)) f.wires.push_back(wire_of[p]);
    for (int p : out_edge_ids(n)) f.wires.push_back(wire_of[p]);
    f.dims = nodes_[n].tensor.dims();
    prog.factors.push_back(std::move(f));
  }
  for (int leaf : leaves_) {
    for (std::size_t p = 0; p < edges_.size(); ++p)
      if (edges_[p].src == leaf) prog.open_wires.push_back(wire_of[p]);
  }
  if (static_cast<int>(prog.open_wires.size()) != n_sites)
    throw ConfigError("leaf legs are not all wired");
  make_plan(prog);

  std::vector<DenseTensor> live;
  for (const auto& f : prog.factors) live.push_back(nodes_[f.node].tensor);
  for (const auto& step : prog.steps) {
    DenseTensor merged = contract(live[step.a], live[step.b], step.pairs);
    live.erase(live.begin() + step.b);
    live.erase(live.begin() + step.a);
    live.push_back(std::move(merged));
  }
  DenseTensor result = live[0].permuted(prog.final_perm);
  std::vector<cplx> out(result.elements().begin(), result.elements().end());
  return out;
}

}  // namespace ertn
