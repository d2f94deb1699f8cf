#include "ertn/search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <thread>

#include "ertn/errors.hpp"
#include "ertn/hash.hpp"

namespace ertn {

std::uint64_t mix_seed(std::uint64_t master, std::string_view tag) {
  Fnv1a64 h;
  h.update_pod(master);
  h.update(tag);
  return h.digest();
}

std::vector<double> gibbs_probabilities(const std::vector<double>& energies, double beta) {
  if (energies.empty()) throw ConfigError("empty candidate energy list");
  const double emin = *std::min_element(energies.begin(), energies.end());
  std::vector<double> p(energies.size());
  double z = 0.0;
  for (std::size_t k = 0; k < energies.size(); ++k) {
    p[k] = std::exp(-beta * (energies[k] - emin));
    z += p[k];
  }
  for (auto& v : p) v /= z;
  return p;
}

int heat_bath_select(const std::vector<double>& energies, double beta,
                     std::mt19937_64& rng, double delta_structure) {
  if (energies.empty()) throw ConfigError("empty candidate energy list");
  int lowest = 0;
  for (std::size_t k = 1; k < energies.size(); ++k)
    if (energies[k] < energies[lowest]) lowest = static_cast<int>(k);
  if (std::isinf(beta) || energies.size() == 1) return lowest;

  double second = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < energies.size(); ++k)
    if (static_cast<int>(k) != lowest) second = std::min(second, energies[k]);
  if (second - energies[lowest] > delta_structure) return lowest;

  const std::vector<double> p = gibbs_probabilities(energies, beta);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double u = uni(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    acc += p[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(p.size()) - 1;
}

void sweep(ReplicaState& replica, const TwoSiteHamiltonian& h, const SearchConfig& cfg,
           int repetition) {
  TensorNetwork& net = replica.net;
  net.reset_flags();
  SelectionState state;
  OptimizeOptions opts;
  opts.cone_only_gradients = cfg.cone_only;

  while (true) {
    refresh_exclusions(net);
    int remaining = 0;
    for (int p = 0; p < net.edge_count(); ++p)
      if (!net.flags()[p] && (!state.previous || p != *state.previous)) ++remaining;
    if (remaining == 0) {
      if (state.previous) net.flags()[*state.previous] = 1;
      break;
    }

    const int edge = select_edge(net, state, replica.rng);
    const PairSignature sig = classify_pair(net, edge);
    const auto candidates = enumerate_candidates(sig);

    BallotRecord record;
    record.repetition = repetition;
    record.edge = edge;
    record.pair_kinds = std::string(kind_name(net.node(sig.lower).kind)) + "-" +
                        kind_name(net.node(sig.upper).kind);
    record.candidate_count = static_cast<int>(candidates.size());

    std::vector<TensorNetwork> trained;
    std::vector<double> energies;
    for (const auto& cand : candidates) {
      TensorNetwork cand_net;
      int lower = -1, upper = -1;
      try {
        SpliceResult spl = splice(net, edge, cand);
        cand_net = std::move(spl.net);
        lower = spl.lower;
        upper = spl.upper;
      } catch (const ConfigError&) {
        // a rewiring that would loop the surrounding graph is not a possible
        // structure at this edge
        ++record.rejected_count;
        continue;
      }
      try {
        OptimizeResult res = optimize(cand_net, h, cfg.step2, {lower, upper},
                                      cfg.e_ref, opts);
        if (!std::isfinite(res.best_energy)) throw NumericError("non-finite energy");
        trained.push_back(std::move(res.net));
        energies.push_back(res.best_energy);
      } catch (const NumericError&) {
        // failed candidate drops off the ballot
        ++record.failed_count;
      }
    }
    if (trained.empty()) throw NumericError("every candidate failed to train");

    int lowest = 0;
    for (std::size_t k = 1; k < energies.size(); ++k)
      if (energies[k] < energies[lowest]) lowest = static_cast<int>(k);
    double second = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < energies.size(); ++k)
      if (static_cast<int>(k) != lowest) second = std::min(second, energies[k]);

    const int adopted = heat_bath_select(energies, replica.beta, replica.rng,
                                         cfg.delta_structure);
    record.energies = energies;
    record.adopted = adopted;
    record.adopted_is_argmin = adopted == lowest;
    record.deterministic = std::isinf(replica.beta) ||
                           (second - energies[lowest] > cfg.delta_structure);
    replica.ballots.push_back(std::move(record));

    net = std::move(trained[adopted]);
    replica.energy = energies[adopted];
    // the spliced bond keeps the selected edge id, so the selection state
    // still points at the adopted pair
  }
}

void replica_exchange(std::vector<ReplicaState>& replicas, std::mt19937_64& rng,
                      double delta_replica, int repetition,
                      std::vector<ExchangeRecord>& exchanges,
                      std::vector<PruneRecord>& prunes) {
  if (replicas.size() < 2) return;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (std::size_t r = 0; r + 1 < replicas.size(); ++r) {
    const double ds = (replicas[r + 1].beta - replicas[r].beta) *
                      (replicas[r + 1].energy - replicas[r].energy);
    const double accept = std::min(1.0, std::exp(-ds));
    const bool swap = uni(rng) < accept;
    exchanges.push_back({repetition, static_cast<int>(r), ds, swap});
    if (swap) {
      std::swap(replicas[r].net, replicas[r + 1].net);
      std::swap(replicas[r].energy, replicas[r + 1].energy);
    }
  }

  std::size_t best = 0;
  for (std::size_t r = 1; r < replicas.size(); ++r)
    if (replicas[r].energy < replicas[best].energy) best = r;
  double second = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < replicas.size(); ++r)
    if (r != best) second = std::min(second, replicas[r].energy);
  if (second - replicas[best].energy > delta_replica) {
    prunes.push_back({repetition, static_cast<int>(best),
                      second - replicas[best].energy});
    for (std::size_t r = 0; r < replicas.size(); ++r) {
      if (r == best) continue;
      replicas[r].net = replicas[best].net;
      replicas[r].energy = replicas[best].energy;
    }
  }
}

void parallel_for_indexed(int count, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int k = 0; k < count; ++k) fn(k);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(threads);
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&, t]() {
      try {
        while (true) {
          int k = next.fetch_add(1);
          if (k >= count) break;
          fn(k);
        }
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

SearchResult run_search(const TwoSiteHamiltonian& h,
                        const std::vector<TensorNetwork>& init_nets,
                        const SearchConfig& cfg) {
  if (cfg.replicas < 1) throw ConfigError("need at least one replica");
  if (static_cast<int>(init_nets.size()) != cfg.replicas)
    throw ConfigError("need one initial network per replica");
  if (cfg.beta_min > cfg.beta_max) throw ConfigError("beta range is inverted");

  std::vector<ReplicaState> replicas(cfg.replicas);
  for (int r = 0; r < cfg.replicas; ++r) {
    replicas[r].net = init_nets[r];
    if (cfg.beta_infinite)
      replicas[r].beta = std::numeric_limits<double>::infinity();
    else if (cfg.replicas == 1)
      replicas[r].beta = cfg.beta_min;
    else
      replicas[r].beta = cfg.beta_min +
                         (cfg.beta_max - cfg.beta_min) * r / (cfg.replicas - 1);
    replicas[r].rng.seed(mix_seed(cfg.master_seed, "replica-" + std::to_string(r)));
  }
  std::mt19937_64 exchange_rng(mix_seed(cfg.master_seed, "exchange"));

  SearchResult result;
  result.init_traces.resize(cfg.replicas);
  result.init_energies.resize(cfg.replicas);

  OptimizeOptions opts;
  opts.cone_only_gradients = cfg.cone_only;

  // warmup: fixed-eta global optimization of every replica
  parallel_for_indexed(cfg.replicas, cfg.threads, [&](int r) {
    OptimizeResult res = optimize(replicas[r].net, h, cfg.init,
                                  all_tensor_nodes(replicas[r].net), std::nullopt, opts);
    replicas[r].net = std::move(res.net);
    replicas[r].energy = res.best_energy;
    result.init_traces[r] = std::move(res.trace);
    result.init_energies[r] = replicas[r].energy;
  });

  int best_replica = 0;
  for (int r = 1; r < cfg.replicas; ++r)
    if (replicas[r].energy < replicas[best_replica].energy) best_replica = r;
  result.initial_net = replicas[best_replica].net;
  result.initial_energy = replicas[best_replica].energy;
  result.best_net = result.initial_net;
  result.best_energy = result.initial_energy;

  const bool exchange_enabled = cfg.replicas >= 2 && !cfg.beta_infinite;
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    std::vector<Trace> step5_traces(cfg.replicas);
    parallel_for_indexed(cfg.replicas, cfg.threads, [&](int r) {
      sweep(replicas[r], h, cfg, rep);
      OptimizeResult res = optimize(replicas[r].net, h, cfg.step5,
                                    all_tensor_nodes(replicas[r].net), cfg.e_ref, opts);
      replicas[r].net = std::move(res.net);
      replicas[r].energy = res.best_energy;
      step5_traces[r] = std::move(res.trace);
    });
    if (exchange_enabled)
      replica_exchange(replicas, exchange_rng, cfg.delta_replica, rep,
                       result.exchanges, result.prunes);

    std::vector<double> energies(cfg.replicas);
    for (int r = 0; r < cfg.replicas; ++r) {
      energies[r] = replicas[r].energy;
      if (replicas[r].energy < result.best_energy) {
        result.best_energy = replicas[r].energy;
        result.best_net = replicas[r].net;
      }
    }
    result.step5_traces.push_back(std::move(step5_traces));
    result.barrier_energies.push_back(std::move(energies));
  }

  result.ballots.resize(cfg.replicas);
  for (int r = 0; r < cfg.replicas; ++r) result.ballots[r] = std::move(replicas[r].ballots);
  return result;
}

}  // namespace ertn
