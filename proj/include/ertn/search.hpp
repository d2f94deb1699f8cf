#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "ertn/hamiltonian.hpp"
#include "ertn/moves.hpp"
#include "ertn/network.hpp"
#include "ertn/optimize.hpp"

namespace ertn {

struct SearchConfig {
  int replicas = 1;
  double beta_min = 6.0;
  double beta_max = 16.0;
  bool beta_infinite = false;  // every replica at beta -> infinity
  int repetitions = 5;
  Schedule init{2500, 0.1, 1e-4, 1e-14};   // fixed-eta warmup per replica
  Schedule step2{2500, 1e-3, 1e-5, 1e-12};  // local pair training
  Schedule step5{2500, 1e-3, 1e-5, 1e-14};  // global retraining
  double delta_structure = 1e-1;
  double delta_replica = 1e-2;
  std::optional<double> e_ref;  // reference energy scaling eta in steps 2 and 5
  bool cone_only = false;
  int threads = 1;
  std::uint64_t master_seed = 0;
};

/// Gibbs weights over candidate energies, computed in shifted form.
std::vector<double> gibbs_probabilities(const std::vector<double>& energies, double beta);

/// Candidate adoption: argmin at beta = infinity or when the winner clears
/// the runner-up by more than delta_structure, Boltzmann-sampled otherwise.
int heat_bath_select(const std::vector<double>& energies, double beta,
                     std::mt19937_64& rng, double delta_structure);

struct BallotRecord {
  int repetition = 0;
  int edge = -1;
  std::string pair_kinds;  // incumbent kinds, e.g. "u-v"
  int candidate_count = 0;  // enumerated for the signature
  int rejected_count = 0;   // rewirings the surrounding graph cannot host
  int failed_count = 0;     // candidates dropped for numeric failures
  std::vector<double> energies;
  int adopted = -1;
  bool adopted_is_argmin = false;
  bool deterministic = false;  // argmin forced by beta or the pruning gap
};

struct ExchangeRecord {
  int repetition = 0;
  int pair_index = 0;  // r: between replicas r and r+1
  double delta_s = 0.0;
  bool accepted = false;
};

struct PruneRecord {
  int repetition = 0;
  int source_replica = -1;
  double gap = 0.0;
};

struct ReplicaState {
  TensorNetwork net;
  double beta = std::numeric_limits<double>::infinity();
  double energy = 0.0;
  AdamState adam;
  std::mt19937_64 rng;
  std::vector<BallotRecord> ballots;
};

struct SearchResult {
  std::vector<Trace> init_traces;                 // per replica
  std::vector<std::vector<Trace>> step5_traces;   // [repetition][replica]
  std::vector<std::vector<double>> barrier_energies;  // [repetition][replica]
  std::vector<double> init_energies;
  std::vector<std::vector<BallotRecord>> ballots;  // per replica
  std::vector<ExchangeRecord> exchanges;
  std::vector<PruneRecord> prunes;
  TensorNetwork best_net;
  double best_energy = 0.0;
  TensorNetwork initial_net;  // best replica right after the warmup
  double initial_energy = 0.0;
};

/// Steps 1-4: repeatedly select an edge, train every candidate structure from
/// the identity-like seeds, adopt one by heat bath; runs until every flag is 1.
void sweep(ReplicaState& replica, const TwoSiteHamiltonian& h, const SearchConfig& cfg,
           int repetition);

/// Metropolis exchange of neighbouring replicas plus best-structure broadcast
/// when the leader clears the field by more than delta_replica.
void replica_exchange(std::vector<ReplicaState>& replicas, std::mt19937_64& rng,
                      double delta_replica, int repetition,
                      std::vector<ExchangeRecord>& exchanges,
                      std::vector<PruneRecord>& prunes);

SearchResult run_search(const TwoSiteHamiltonian& h,
                        const std::vector<TensorNetwork>& init_nets,
                        const SearchConfig& cfg);

std::uint64_t mix_seed(std::uint64_t master, std::string_view tag);

/// Deterministic work distribution: fn(k) for k in [0, count), results joined
/// regardless of the thread count.
void parallel_for_indexed(int count, int threads, const std::function<void(int)>& fn);

}  // namespace ertn
