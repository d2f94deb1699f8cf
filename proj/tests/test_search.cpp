#include "ertn/search.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

#include "ertn/errors.hpp"
#include "ertn/sdrg.hpp"

using namespace ertn;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

SearchConfig tiny_config(std::uint64_t seed) {
  SearchConfig cfg;
  cfg.replicas = 1;
  cfg.beta_infinite = true;
  cfg.repetitions = 1;
  cfg.init = {40, 0.1, 0.0001, 1e-14};
  cfg.step2 = {40, 1e-3, 1e-5, 1e-12};
  cfg.step5 = {40, 1e-3, 1e-5, 1e-14};
  cfg.master_seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("gibbs probabilities: direct softmax evaluation") {
  auto p = gibbs_probabilities({0.0, std::log(2.0)}, 1.0);
  REQUIRE(p.size() == 2);
  CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK_THROWS_AS(gibbs_probabilities({}, 1.0), ConfigError);
}

TEST_CASE("heat bath selection: argmin limit and pruning gap") {
  std::mt19937_64 rng(1);
  CHECK(heat_bath_select({-1.0, -0.5}, kInf, rng, 0.1) == 0);
  // gap 0.5 > 0.1 forces the argmin even at finite beta
  CHECK(heat_bath_select({-2.0, -1.5, -1.4}, 6.0, rng, 0.1) == 0);
  // the sampled branch follows the softmax frequencies
  int first = 0;
  const int draws = 20000;
  for (int k = 0; k < draws; ++k)
    if (heat_bath_select({0.0, std::log(2.0)}, 1.0, rng, 1e9) == 0) ++first;
  CHECK(std::abs(first / static_cast<double>(draws) - 2.0 / 3.0) < 0.02);
}

TEST_CASE("replica exchange: guaranteed swaps and energy-order effects") {
  auto [h, inst] = build_random_xy(2, 1);
  TensorNetwork net = mera_network(2);

  // beta ascending with the hotter replica lower in energy: delta_s < 0
  std::vector<ReplicaState> reps(2);
  reps[0].net = net;
  reps[0].beta = 1.0;
  reps[0].energy = -0.5;
  reps[1].net = net;
  reps[1].beta = 2.0;
  reps[1].energy = -1.0;
  std::mt19937_64 rng(7);
  std::vector<ExchangeRecord> ex;
  std::vector<PruneRecord> prunes;
  replica_exchange(reps, rng, 1e9, 0, ex, prunes);
  REQUIRE(ex.size() == 1);
  CHECK(ex[0].delta_s < 0.0);
  CHECK(ex[0].accepted);
  CHECK(reps[0].energy == -1.0);
  CHECK(reps[1].energy == -0.5);

  // equal energies: delta_s = 0, acceptance probability 1
  reps[0].energy = reps[1].energy = -0.7;
  ex.clear();
  replica_exchange(reps, rng, 1e9, 0, ex, prunes);
  CHECK(ex[0].accepted);
}

TEST_CASE("replica exchange preserves the energy multiset without pruning") {
  TensorNetwork net = mera_network(2);
  std::vector<ReplicaState> reps(4);
  std::vector<double> energies{-0.9, -0.4, -0.6, -0.1};
  for (int r = 0; r < 4; ++r) {
    reps[r].net = net;
    reps[r].beta = 1.0 + r;
    reps[r].energy = energies[r];
  }
  std::mt19937_64 rng(3);
  std::vector<ExchangeRecord> ex;
  std::vector<PruneRecord> prunes;
  replica_exchange(reps, rng, 1e9, 0, ex, prunes);  // pruning disabled by huge delta
  CHECK(prunes.empty());
  std::multiset<double> before(energies.begin(), energies.end());
  std::multiset<double> after;
  for (const auto& r : reps) after.insert(r.energy);
  CHECK(before == after);
}

TEST_CASE("broadcast pruning copies the leader into every replica") {
  TensorNetwork net = mera_network(2);
  std::vector<ReplicaState> reps(3);
  std::vector<double> energies{-8.0, -7.5, -7.49};
  for (int r = 0; r < 3; ++r) {
    reps[r].net = net;
    reps[r].beta = 1.0;  // equal betas: every swap accepted, order preserved
    reps[r].energy = energies[r];
  }
  std::mt19937_64 rng(5);
  std::vector<ExchangeRecord> ex;
  std::vector<PruneRecord> prunes;
  replica_exchange(reps, rng, 1e-2, 0, ex, prunes);
  REQUIRE(prunes.size() == 1);
  CHECK(prunes[0].gap == doctest::Approx(0.5).epsilon(1e-9));
  for (const auto& r : reps) CHECK(r.energy == doctest::Approx(-8.0));
}

TEST_CASE("sweep on a fully flagged network is the identity") {
  auto [h, inst] = build_random_xy(2, 2);
  ReplicaState replica;
  replica.net = mera_network(2);  // both edges touch sites: nothing selectable
  std::mt19937_64 seed_rng(11);
  randomize_tensors(replica.net, seed_rng);
  TensorNetwork before = replica.net;
  replica.beta = kInf;
  replica.rng.seed(13);
  SearchConfig cfg = tiny_config(0);
  sweep(replica, h, cfg, 0);
  CHECK(replica.ballots.empty());
  for (int id = 0; id < replica.net.node_count(); ++id) {
    if (replica.net.node(id).kind == NodeKind::Site) continue;
    const auto& a = before.node(id).tensor;
    const auto& b = replica.net.node(id).tensor;
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);
  }
}

TEST_CASE("sweep terminates with all flags raised and distinct ballots") {
  auto [h, inst] = build_random_xy(8, 3);
  ReplicaState replica;
  replica.net = mera_network(8);
  std::mt19937_64 seed_rng(17);
  randomize_tensors(replica.net, seed_rng);
  replica.energy = energy(replica.net, h);
  replica.beta = kInf;
  replica.rng.seed(19);
  SearchConfig cfg = tiny_config(0);
  sweep(replica, h, cfg, 0);

  for (auto f : replica.net.flags()) CHECK(f == 1);
  CHECK(!replica.ballots.empty());
  std::set<int> edges;
  for (const auto& b : replica.ballots) {
    CHECK(b.candidate_count > 0);
    CHECK(b.adopted >= 0);
    CHECK(b.adopted_is_argmin);  // beta = infinity
    edges.insert(b.edge);
  }
  CHECK(edges.size() == replica.ballots.size());
  CHECK(replica.net.validate().worst < 1e-10);
  CHECK(replica.energy ==
        doctest::Approx(energy(replica.net, h)).epsilon(1e-10));
}

TEST_CASE("run_search with zero repetitions returns only the warmup state") {
  auto [h, inst] = build_random_xy(4, 5);
  SearchConfig cfg = tiny_config(21);
  cfg.repetitions = 0;
  TensorNetwork init = mera_network(4);
  std::mt19937_64 rng(23);
  randomize_tensors(init, rng);
  SearchResult res = run_search(h, {init}, cfg);
  CHECK(res.step5_traces.empty());
  CHECK(res.ballots[0].empty());
  CHECK(res.best_energy == res.initial_energy);
}

TEST_CASE("run_search is deterministic and thread-count independent") {
  auto [h, inst] = build_random_xy(8, 6);
  auto [base, trace] = build_er_sdrg(inst);

  auto run_once = [&](int threads) {
    SearchConfig cfg = tiny_config(77);
    cfg.replicas = 2;
    cfg.beta_infinite = false;
    cfg.beta_min = 6.0;
    cfg.beta_max = 16.0;
    cfg.repetitions = 2;
    cfg.threads = threads;
    std::vector<TensorNetwork> inits;
    for (int r = 0; r < 2; ++r) {
      TensorNetwork net = base;
      std::mt19937_64 rng(mix_seed(99, "init" + std::to_string(r)));
      randomize_tensors(net, rng);
      inits.push_back(std::move(net));
    }
    return run_search(h, inits, cfg);
  };

  SearchResult a = run_once(1);
  SearchResult b = run_once(2);
  CHECK(a.best_energy == b.best_energy);
  REQUIRE(a.barrier_energies.size() == b.barrier_energies.size());
  for (std::size_t rep = 0; rep < a.barrier_energies.size(); ++rep)
    CHECK(a.barrier_energies[rep] == b.barrier_energies[rep]);
  REQUIRE(a.ballots.size() == b.ballots.size());
  for (std::size_t r = 0; r < a.ballots.size(); ++r) {
    REQUIRE(a.ballots[r].size() == b.ballots[r].size());
    for (std::size_t k = 0; k < a.ballots[r].size(); ++k) {
      CHECK(a.ballots[r][k].edge == b.ballots[r][k].edge);
      CHECK(a.ballots[r][k].adopted == b.ballots[r][k].adopted);
      CHECK(a.ballots[r][k].energies == b.ballots[r][k].energies);
    }
  }
  CHECK(a.best_net.serialize() == b.best_net.serialize());
}

TEST_CASE("search lowers or keeps the energy on a small disordered chain") {
  auto [h, inst] = build_random_xy(8, 9);
  auto [base, trace] = build_er_sdrg(inst);
  std::mt19937_64 rng(31);
  randomize_tensors(base, rng);

  SearchConfig cfg = tiny_config(5);
  cfg.init = {120, 0.1, 0.0001, 1e-12};
  cfg.step2 = {60, 1e-3, 1e-5, 1e-10};
  cfg.step5 = {120, 1e-3, 1e-5, 1e-12};
  cfg.repetitions = 2;
  GroundTruth gt = exact_ground(h, {}, false);
  cfg.e_ref = gt.energy;

  SearchResult res = run_search(h, {base}, cfg);
  CHECK(res.best_energy <= res.initial_energy + 1e-12);
  CHECK(res.best_energy >= gt.energy - 1e-9);  // variational bound
  CHECK(res.best_net.validate().worst < 1e-10);

  // every adoption at beta = infinity is the ballot argmin
  for (const auto& b : res.ballots[0]) {
    int lowest = 0;
    for (std::size_t k = 1; k < b.energies.size(); ++k)
      if (b.energies[k] < b.energies[lowest]) lowest = static_cast<int>(k);
    CHECK(b.adopted == lowest);
  }
}

TEST_CASE("config validation") {
  auto [h, inst] = build_random_xy(4, 7);
  SearchConfig cfg = tiny_config(1);
  cfg.replicas = 0;
  CHECK_THROWS_AS(run_search(h, {}, cfg), ConfigError);
  cfg.replicas = 2;
  CHECK_THROWS_AS(run_search(h, {mera_network(4)}, cfg), ConfigError);
}
