#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ertn/hamiltonian.hpp"
#include "ertn/network.hpp"
#include "ertn/search.hpp"

namespace ertn {

struct ModelSpec {
  std::string type = "random_xy";  // random_xy | tetramer
  // tetramer
  int rings = 4;
  double j = 1.0;
  double jp = 0.0;
  // random_xy
  int n_sites = 8;
  std::vector<std::uint64_t> seeds{1};
};

struct InitSpec {
  std::string structure = "mera";  // mera | er_sdrg | tetramer_singlet | file
  std::string path;                // for structure == file
  bool randomize = true;
};

struct MetricToggles {
  bool delta = true;
  bool infidelity = true;
  bool entropy = false;
  bool decrease = true;
};

struct ExperimentConfig {
  ModelSpec model;
  InitSpec init;
  Schedule initial_opt{2500, 0.1, 1e-4, 1e-14};
  SearchConfig search;
  std::string eref_policy = "oracle";  // oracle | constant
  MetricToggles metrics;
  std::uint64_t seed = 1;
  std::string out_dir = "runs/out";
  std::string format = "csv";  // csv | jsonl
  int threads = 1;
  bool rerandomize_eval = false;
  bool store_oracle_state = true;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

/// One solvable instance of the configured model.
struct Instance {
  std::string tag;
  std::uint64_t seed = 0;
  TwoSiteHamiltonian hamiltonian;
  std::optional<DisorderInstance> disorder;
};

std::vector<Instance> instances_of(const ExperimentConfig& cfg);

/// Content-addressed ground-truth cache entry.
struct OracleEntry {
  double energy = 0.0;
  double residual = 0.0;
  std::vector<cplx> state;
  std::string path;
  bool from_cache = false;
};

OracleEntry oracle_for(const TwoSiteHamiltonian& h, const std::string& out_dir,
                       bool want_state, bool store);

TensorNetwork build_initial_network(const ExperimentConfig& cfg, const Instance& inst);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);
void write_trace(const std::string& path, const Trace& trace, const std::string& format);

// subcommand entry points; return process exit codes
int cmd_oracle(const ExperimentConfig& cfg);
int cmd_optimize(const ExperimentConfig& cfg);
int cmd_search(const ExperimentConfig& cfg);
int cmd_metrics(const ExperimentConfig& cfg, const std::string& net_path);
int cmd_sdrg_init(const ExperimentConfig& cfg);
int cmd_enumerate_moves(const ExperimentConfig& cfg, const std::string& net_path);
int cmd_verify(const ExperimentConfig& cfg, const std::string& summary_path);

int run_cli(const std::vector<std::string>& args);

}  // namespace ertn
