#include "ertn/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ertn/errors.hpp"
#include "ertn/hash.hpp"
#include "ertn/moves.hpp"
#include "ertn/optimize.hpp"
#include "ertn/sdrg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ertn {

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Schedule schedule_from_json(const json& j, Schedule base) {
  if (j.contains("iters")) base.total_iters = j["iters"].get<int>();
  if (j.contains("eta_init")) base.eta_init = j["eta_init"].get<double>();
  if (j.contains("eta_end")) base.eta_end = j["eta_end"].get<double>();
  if (j.contains("delta")) base.delta = j["delta"].get<double>();
  return base;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    if (j.contains("model")) {
      const auto& m = j["model"];
      cfg.model.type = m.value("type", cfg.model.type);
      cfg.model.rings = m.value("rings", cfg.model.rings);
      cfg.model.j = m.value("J", cfg.model.j);
      cfg.model.jp = m.value("Jp", cfg.model.jp);
      cfg.model.n_sites = m.value("n_sites", cfg.model.n_sites);
      if (m.contains("seeds")) cfg.model.seeds = m["seeds"].get<std::vector<std::uint64_t>>();
    }
    if (j.contains("init")) {
      const auto& i = j["init"];
      cfg.init.structure = i.value("structure", cfg.init.structure);
      cfg.init.path = i.value("path", cfg.init.path);
      cfg.init.randomize = i.value("randomize", cfg.init.randomize);
    }
    if (j.contains("initial_opt"))
      cfg.initial_opt = schedule_from_json(j["initial_opt"], cfg.initial_opt);
    if (j.contains("search")) {
      const auto& s = j["search"];
      cfg.search.replicas = s.value("replicas", cfg.search.replicas);
      cfg.search.beta_min = s.value("beta_min", cfg.search.beta_min);
      cfg.search.beta_max = s.value("beta_max", cfg.search.beta_max);
      cfg.search.beta_infinite = s.value("beta_infinite", cfg.search.beta_infinite);
      cfg.search.repetitions = s.value("repetitions", cfg.search.repetitions);
      if (s.contains("step2")) cfg.search.step2 = schedule_from_json(s["step2"], cfg.search.step2);
      if (s.contains("step5")) cfg.search.step5 = schedule_from_json(s["step5"], cfg.search.step5);
      cfg.search.delta_structure = s.value("delta_structure", cfg.search.delta_structure);
      cfg.search.delta_replica = s.value("delta_replica", cfg.search.delta_replica);
      cfg.search.cone_only = s.value("cone_only", cfg.search.cone_only);
    }
    cfg.eref_policy = j.value("eref_policy", cfg.eref_policy);
    if (j.contains("metrics")) {
      const auto& m = j["metrics"];
      cfg.metrics.delta = m.value("delta", cfg.metrics.delta);
      cfg.metrics.infidelity = m.value("infidelity", cfg.metrics.infidelity);
      cfg.metrics.entropy = m.value("entropy", cfg.metrics.entropy);
      cfg.metrics.decrease = m.value("decrease", cfg.metrics.decrease);
    }
    cfg.seed = j.value("seed", cfg.seed);
    cfg.out_dir = j.value("out", cfg.out_dir);
    cfg.format = j.value("format", cfg.format);
    cfg.threads = j.value("threads", cfg.threads);
    cfg.rerandomize_eval = j.value("rerandomize_eval", cfg.rerandomize_eval);
    cfg.store_oracle_state = j.value("store_oracle_state", cfg.store_oracle_state);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field has the wrong type: ") + e.what());
  }
  if (cfg.model.type != "tetramer" && cfg.model.type != "random_xy")
    throw ConfigError("model.type must be tetramer or random_xy");
  if (cfg.init.structure == "er_sdrg" && cfg.model.type != "random_xy")
    throw ConfigError("er_sdrg initial structure requires the random_xy model");
  if (cfg.init.structure == "tetramer_singlet" && cfg.model.type != "tetramer")
    throw ConfigError("tetramer_singlet initial structure requires the tetramer model");
  if (cfg.format != "csv" && cfg.format != "jsonl")
    throw ConfigError("format must be csv or jsonl");
  if (cfg.eref_policy != "oracle" && cfg.eref_policy != "constant")
    throw ConfigError("eref_policy must be oracle or constant");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  return parse_config(read_text_file(path));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write file: " + path);
    out << content;
  }
  fs::rename(tmp, path);
}

std::vector<Instance> instances_of(const ExperimentConfig& cfg) {
  std::vector<Instance> out;
  if (cfg.model.type == "tetramer") {
    std::ostringstream tag;
    tag << "tetramer_L" << cfg.model.rings << "_J" << cfg.model.j << "_Jp" << cfg.model.jp;
    out.push_back(
        {tag.str(), 0, build_tetramer(cfg.model.rings, cfg.model.j, cfg.model.jp), {}});
    return out;
  }
  for (std::uint64_t seed : cfg.model.seeds) {
    auto [h, inst] = build_random_xy(cfg.model.n_sites, seed);
    std::ostringstream tag;
    tag << "xy_N" << cfg.model.n_sites << "_seed" << seed;
    out.push_back({tag.str(), seed, std::move(h), std::move(inst)});
  }
  return out;
}

OracleEntry oracle_for(const TwoSiteHamiltonian& h, const std::string& out_dir,
                       bool want_state, bool store) {
  const std::string hash = to_hex(h.content_hash());
  const fs::path path = fs::path(out_dir) / "oracle" / (hash + ".json");
  OracleEntry entry;
  entry.path = path.string();
  if (fs::exists(path)) {
    json doc = json::parse(read_text_file(path.string()));
    entry.energy = doc["energy"].get<double>();
    entry.residual = doc["residual"].get<double>();
    entry.from_cache = true;
    if (doc.contains("state") && !doc["state"].empty()) {
      const auto& st = doc["state"];
      entry.state.resize(st.size() / 2);
      for (std::size_t k = 0; k < entry.state.size(); ++k)
        entry.state[k] = cplx(st[2 * k].get<double>(), st[2 * k + 1].get<double>());
    }
    if (!want_state || !entry.state.empty()) return entry;
  }

  GroundTruth gt = exact_ground(h, {}, want_state || store);
  entry.energy = gt.energy;
  entry.residual = gt.residual;
  entry.state = std::move(gt.state);
  entry.from_cache = false;
  if (store) {
    json doc;
    doc["hamiltonian_hash"] = hash;
    doc["energy"] = entry.energy;
    doc["residual"] = entry.residual;
    json st = json::array();
    for (const auto& v : entry.state) {
      st.push_back(v.real());
      st.push_back(v.imag());
    }
    doc["state"] = std::move(st);
    write_text_file(path.string(), doc.dump(1));
  }
  if (!want_state) entry.state.clear();
  return entry;
}

TensorNetwork build_initial_network(const ExperimentConfig& cfg, const Instance& inst) {
  const int n = inst.hamiltonian.sites();
  if (cfg.init.structure == "mera") return mera_network(n);
  if (cfg.init.structure == "er_sdrg") {
    if (!inst.disorder) throw ConfigError("er_sdrg needs a disorder instance");
    return build_er_sdrg(*inst.disorder).first;
  }
  if (cfg.init.structure == "tetramer_singlet") {
    if (cfg.model.type != "tetramer") throw ConfigError("tetramer_singlet needs the tetramer model");
    return tetramer_singlet_network(cfg.model.rings);
  }
  if (cfg.init.structure == "file") {
    TensorNetwork net = TensorNetwork::deserialize(read_text_file(cfg.init.path));
    if (static_cast<int>(net.leaves().size()) != n)
      throw ConfigError("network file has the wrong site count");
    return net;
  }
  throw ConfigError("unknown initial structure: " + cfg.init.structure);
}

void write_trace(const std::string& path, const Trace& trace, const std::string& format) {
  std::ostringstream ss;
  const char* reason = trace.reason == StopReason::Converged ? "converged" : "exhausted";
  if (format == "csv") {
    ss << "iter,energy,eta,stop_reason\n";
    for (std::size_t k = 0; k < trace.points.size(); ++k) {
      const auto& p = trace.points[k];
      ss << p.iter << ',' << fmt17(p.energy) << ',' << fmt17(p.eta) << ','
         << (k + 1 == trace.points.size() ? reason : "") << '\n';
    }
  } else {
    for (std::size_t k = 0; k < trace.points.size(); ++k) {
      const auto& p = trace.points[k];
      json row;
      row["iter"] = p.iter;
      row["energy"] = p.energy;
      row["eta"] = p.eta;
      row["stop_reason"] = k + 1 == trace.points.size() ? reason : "";
      ss << row.dump() << '\n';
    }
  }
  write_text_file(path, ss.str());
}

namespace {

struct NetMetrics {
  double energy = 0.0;
  double delta = 0.0;
  std::optional<double> infidelity;
  std::vector<double> entropy;
};

NetMetrics metrics_for(const TensorNetwork& net, const TwoSiteHamiltonian& h,
                       const OracleEntry& oracle, const MetricToggles& toggles) {
  NetMetrics m;
  m.energy = energy(net, h);
  m.delta = relative_error(m.energy, oracle.energy);
  if ((toggles.infidelity || toggles.entropy) && h.sites() <= 20) {
    auto psi = net.to_state_vector();
    if (toggles.infidelity && !oracle.state.empty())
      m.infidelity = infidelity_per_site(psi, oracle.state, h.sites());
    if (toggles.entropy && h.sites() <= 16) m.entropy = entanglement_profile(psi, h.sites());
  }
  return m;
}

json metrics_to_json(const NetMetrics& m) {
  json j;
  j["energy"] = m.energy;
  j["delta"] = m.delta;
  j["abs_delta"] = std::abs(m.delta);
  if (m.infidelity) j["infidelity_per_site"] = *m.infidelity;
  if (!m.entropy.empty()) j["entropy_profile"] = m.entropy;
  return j;
}

json ballots_to_json(const BallotRecord& b) {
  json j;
  j["repetition"] = b.repetition;
  j["edge"] = b.edge;
  j["pair"] = b.pair_kinds;
  j["candidates"] = b.candidate_count;
  j["energies"] = b.energies;
  j["adopted"] = b.adopted;
  j["argmin"] = b.adopted_is_argmin;
  j["deterministic"] = b.deterministic;
  return j;
}

std::string instance_dir(const ExperimentConfig& cfg, const Instance& inst) {
  return (fs::path(cfg.out_dir) / inst.tag).string();
}

double wall_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_timing(const std::string& dir, double seconds) {
  json j;
  j["wall_seconds"] = seconds;
  write_text_file((fs::path(dir) / "timing.json").string(), j.dump(1));
}

}  // namespace

int cmd_oracle(const ExperimentConfig& cfg) {
  for (const auto& inst : instances_of(cfg)) {
    OracleEntry entry = oracle_for(inst.hamiltonian, cfg.out_dir, cfg.store_oracle_state,
                                   true);
    std::cout << inst.tag << ": E_gs = " << fmt17(entry.energy)
              << " residual = " << fmt17(entry.residual)
              << (entry.from_cache ? " (cache)" : "") << "\n";
  }
  return 0;
}

int cmd_optimize(const ExperimentConfig& cfg) {
  auto instances = instances_of(cfg);
  json summary;
  summary["command"] = "optimize";
  summary["instances"] = json::array();
  std::vector<json> entries(instances.size());

  parallel_for_indexed(static_cast<int>(instances.size()),
                       std::min<int>(cfg.threads, static_cast<int>(instances.size())),
                       [&](int idx) {
    const auto t0 = std::chrono::steady_clock::now();
    const Instance& inst = instances[idx];
    const std::string dir = instance_dir(cfg, inst);
    OracleEntry oracle = oracle_for(inst.hamiltonian, cfg.out_dir,
                                    cfg.metrics.infidelity || cfg.metrics.entropy, true);

    TensorNetwork net = build_initial_network(cfg, inst);
    if (cfg.init.randomize) {
      std::mt19937_64 rng(mix_seed(cfg.seed, inst.tag + "-init"));
      randomize_tensors(net, rng);
    }

    json entry;
    entry["tag"] = inst.tag;
    entry["seed"] = inst.seed;
    entry["e_gs"] = oracle.energy;
    entry["oracle_residual"] = oracle.residual;
    entry["oracle_file"] = oracle.path;
    entry["dof"] = net.dof_count();
    entry["structure"] = cfg.init.structure;

    NetMetrics before = metrics_for(net, inst.hamiltonian, oracle, cfg.metrics);
    entry["before"] = metrics_to_json(before);

    const std::string ext = cfg.format == "csv" ? ".csv" : ".jsonl";
    if (cfg.initial_opt.total_iters == 0) {
      Trace trace;
      trace.points.push_back({0, before.energy, 0.0});
      write_trace((fs::path(dir) / ("trace" + ext)).string(), trace, cfg.format);
      entry["after"] = entry["before"];
    } else {
      OptimizeResult res = optimize(net, inst.hamiltonian, cfg.initial_opt,
                                    all_tensor_nodes(net));
      write_trace((fs::path(dir) / ("trace" + ext)).string(), res.trace, cfg.format);
      NetMetrics after = metrics_for(res.net, inst.hamiltonian, oracle, cfg.metrics);
      entry["after"] = metrics_to_json(after);
      if (cfg.metrics.decrease && before.delta != 0.0)
        entry["decrease_ratio_percent"] = decrease_ratio(before.delta, after.delta);
      write_text_file((fs::path(dir) / "final.tnet.json").string(), res.net.serialize());
      entry["files"] = {{"final_net", (fs::path(dir) / "final.tnet.json").string()},
                        {"trace", (fs::path(dir) / ("trace" + ext)).string()}};
    }
    write_timing(dir, wall_since(t0));
    entries[idx] = std::move(entry);
  });

  for (auto& e : entries) summary["instances"].push_back(std::move(e));
  write_text_file((fs::path(cfg.out_dir) / "summary.json").string(), summary.dump(1));
  std::cout << "optimize: " << instances.size() << " instance(s) -> " << cfg.out_dir
            << "\n";
  return 0;
}

int cmd_search(const ExperimentConfig& cfg) {
  auto instances = instances_of(cfg);
  json summary;
  summary["command"] = "search";
  summary["instances"] = json::array();
  std::vector<json> entries(instances.size());

  const int outer_threads = std::min<int>(cfg.threads, static_cast<int>(instances.size()));
  const int inner_threads = instances.size() == 1 ? cfg.threads : 1;

  parallel_for_indexed(static_cast<int>(instances.size()), outer_threads, [&](int idx) {
    const auto t0 = std::chrono::steady_clock::now();
    const Instance& inst = instances[idx];
    const std::string dir = instance_dir(cfg, inst);
    OracleEntry oracle = oracle_for(inst.hamiltonian, cfg.out_dir,
                                    cfg.metrics.infidelity || cfg.metrics.entropy, true);

    SearchConfig scfg = cfg.search;
    scfg.init = cfg.initial_opt;
    scfg.master_seed = mix_seed(cfg.seed, inst.tag);
    scfg.threads = inner_threads;
    if (cfg.eref_policy == "oracle") scfg.e_ref = oracle.energy;

    TensorNetwork base = build_initial_network(cfg, inst);
    std::vector<TensorNetwork> init_nets;
    for (int r = 0; r < scfg.replicas; ++r) {
      TensorNetwork net = base;
      if (cfg.init.randomize) {
        std::mt19937_64 rng(
            mix_seed(cfg.seed, inst.tag + "-init-r" + std::to_string(r)));
        randomize_tensors(net, rng);
      }
      init_nets.push_back(std::move(net));
    }

    SearchResult result = run_search(inst.hamiltonian, init_nets, scfg);

    const std::string ext = cfg.format == "csv" ? ".csv" : ".jsonl";
    for (int r = 0; r < scfg.replicas; ++r)
      write_trace((fs::path(dir) / ("trace_init_r" + std::to_string(r) + ext)).string(),
                  result.init_traces[r], cfg.format);
    for (std::size_t rep = 0; rep < result.step5_traces.size(); ++rep)
      for (int r = 0; r < scfg.replicas; ++r)
        write_trace((fs::path(dir) / ("trace_rep" + std::to_string(rep) + "_r" +
                                      std::to_string(r) + ext)).string(),
                    result.step5_traces[rep][r], cfg.format);

    for (int r = 0; r < scfg.replicas; ++r) {
      std::ostringstream moves;
      for (const auto& b : result.ballots[r]) moves << ballots_to_json(b).dump() << '\n';
      write_text_file((fs::path(dir) / ("moves_r" + std::to_string(r) + ".jsonl")).string(),
                      moves.str());
    }
    {
      std::ostringstream ex;
      for (const auto& e : result.exchanges) {
        json row;
        row["repetition"] = e.repetition;
        row["pair"] = e.pair_index;
        row["delta_s"] = e.delta_s;
        row["accepted"] = e.accepted;
        ex << row.dump() << '\n';
      }
      for (const auto& p : result.prunes) {
        json row;
        row["repetition"] = p.repetition;
        row["broadcast_from"] = p.source_replica;
        row["gap"] = p.gap;
        ex << row.dump() << '\n';
      }
      write_text_file((fs::path(dir) / "exchange.jsonl").string(), ex.str());
    }

    write_text_file((fs::path(dir) / "initial.tnet.json").string(),
                    result.initial_net.serialize());
    write_text_file((fs::path(dir) / "best.tnet.json").string(),
                    result.best_net.serialize());

    json entry;
    entry["tag"] = inst.tag;
    entry["seed"] = inst.seed;
    entry["e_gs"] = oracle.energy;
    entry["oracle_residual"] = oracle.residual;
    entry["oracle_file"] = oracle.path;
    entry["structure"] = cfg.init.structure;
    entry["dof_initial"] = result.initial_net.dof_count();
    entry["dof_best"] = result.best_net.dof_count();

    NetMetrics before = metrics_for(result.initial_net, inst.hamiltonian, oracle,
                                    cfg.metrics);
    NetMetrics after = metrics_for(result.best_net, inst.hamiltonian, oracle, cfg.metrics);
    entry["before"] = metrics_to_json(before);
    entry["after"] = metrics_to_json(after);
    if (cfg.metrics.decrease && before.delta != 0.0)
      entry["decrease_ratio_percent"] = decrease_ratio(before.delta, after.delta);

    int argmin_ballots = 0, total_ballots = 0;
    for (const auto& per_replica : result.ballots)
      for (const auto& b : per_replica) {
        ++total_ballots;
        if (b.adopted_is_argmin) ++argmin_ballots;
      }
    entry["ballots_total"] = total_ballots;
    entry["ballots_argmin"] = argmin_ballots;
    entry["exchange_events"] = result.exchanges.size();
    entry["prune_events"] = result.prunes.size();
    if (!oracle.state.empty() && cfg.metrics.entropy && inst.hamiltonian.sites() <= 16)
      entry["entropy_profile_exact"] =
          entanglement_profile(oracle.state, inst.hamiltonian.sites());

    entry["files"] = {{"initial_net", (fs::path(dir) / "initial.tnet.json").string()},
                      {"best_net", (fs::path(dir) / "best.tnet.json").string()}};

    if (cfg.rerandomize_eval) {
      TensorNetwork eval_net = result.best_net;
      std::mt19937_64 rng(mix_seed(cfg.seed, inst.tag + "-eval"));
      randomize_tensors(eval_net, rng);
      OptimizeResult res = optimize(eval_net, inst.hamiltonian, cfg.initial_opt,
                                    all_tensor_nodes(eval_net));
      write_trace((fs::path(dir) / ("trace_eval" + ext)).string(), res.trace, cfg.format);
      NetMetrics eval = metrics_for(res.net, inst.hamiltonian, oracle, cfg.metrics);
      entry["rerandomized_eval"] = metrics_to_json(eval);
    }

    write_timing(dir, wall_since(t0));
    entries[idx] = std::move(entry);
  });

  for (auto& e : entries) summary["instances"].push_back(std::move(e));

  // batch aggregates
  double sum_r = 0.0;
  int n_r = 0;
  for (const auto& e : summary["instances"])
    if (e.contains("decrease_ratio_percent")) {
      sum_r += e["decrease_ratio_percent"].get<double>();
      ++n_r;
    }
  if (n_r > 0) summary["aggregate"]["mean_decrease_ratio_percent"] = sum_r / n_r;

  write_text_file((fs::path(cfg.out_dir) / "summary.json").string(), summary.dump(1));
  std::cout << "search: " << instances.size() << " instance(s) -> " << cfg.out_dir << "\n";
  return 0;
}

int cmd_metrics(const ExperimentConfig& cfg, const std::string& net_path) {
  auto instances = instances_of(cfg);
  if (instances.size() != 1)
    throw ConfigError("metrics needs a config with exactly one instance");
  const Instance& inst = instances[0];
  OracleEntry oracle = oracle_for(inst.hamiltonian, cfg.out_dir, true, true);
  if (oracle.state.empty()) throw NumericError("oracle state vector unavailable");

  TensorNetwork net = TensorNetwork::deserialize(read_text_file(net_path));
  MetricToggles toggles = cfg.metrics;
  toggles.entropy = toggles.entropy && inst.hamiltonian.sites() <= 16;
  NetMetrics m = metrics_for(net, inst.hamiltonian, oracle, toggles);

  std::cout << "energy = " << fmt17(m.energy) << "\n";
  std::cout << "delta = " << fmt17(m.delta) << "  |delta| = " << fmt17(std::abs(m.delta))
            << "\n";
  if (m.infidelity) std::cout << "infidelity_per_site = " << fmt17(*m.infidelity) << "\n";

  if (!m.entropy.empty()) {
    std::vector<double> exact = entanglement_profile(oracle.state, inst.hamiltonian.sites());
    std::ostringstream ss;
    ss << "L,entropy_network,entropy_exact\n";
    for (std::size_t k = 0; k < m.entropy.size(); ++k)
      ss << (k + 1) << ',' << fmt17(m.entropy[k]) << ',' << fmt17(exact[k]) << '\n';
    const std::string path =
        (fs::path(cfg.out_dir) / (inst.tag + "_entropy.csv")).string();
    write_text_file(path, ss.str());
    std::cout << "entropy profile -> " << path << "\n";
  }
  return 0;
}

int cmd_sdrg_init(const ExperimentConfig& cfg) {
  if (cfg.model.type != "random_xy") throw ConfigError("sdrg-init needs the random_xy model");
  for (const auto& inst : instances_of(cfg)) {
    auto [net, trace] = build_er_sdrg(*inst.disorder);
    const std::string dir = instance_dir(cfg, inst);
    write_text_file((fs::path(dir) / "sdrg.tnet.json").string(), net.serialize());
    std::ostringstream ss;
    for (const auto& ev : trace.events) {
      json row;
      row["pair"] = {ev.left_site, ev.right_site};
      row["coupling"] = ev.coupling;
      if (ev.effective) row["effective"] = *ev.effective;
      row["neighbors"] = {ev.neighbor_left, ev.neighbor_right};
      row["tie_broken"] = ev.tie_broken;
      ss << row.dump() << '\n';
    }
    write_text_file((fs::path(dir) / "sdrg_events.jsonl").string(), ss.str());
    std::cout << inst.tag << ": " << trace.disentangler_count << " disentanglers, "
              << trace.top_count << " tops, dof = " << net.dof_count() << "\n";
  }
  return 0;
}

int cmd_enumerate_moves(const ExperimentConfig& cfg, const std::string& net_path) {
  TensorNetwork net = TensorNetwork::deserialize(read_text_file(net_path));
  net.reset_flags();
  refresh_exclusions(net);
  std::ostringstream ss;
  int eligible = 0;
  for (int p = 0; p < net.edge_count(); ++p) {
    if (net.flags()[p]) continue;
    PairSignature sig = classify_pair(net, p);
    auto cands = enumerate_candidates(sig);
    CandidateStructure incumbent = incumbent_candidate(net, sig);
    int incumbent_index = -1;
    for (std::size_t k = 0; k < cands.size(); ++k)
      if (same_candidate(cands[k], incumbent)) incumbent_index = static_cast<int>(k);
    json row;
    row["edge"] = p;
    row["pair"] = std::string(kind_name(net.node(sig.lower).kind)) + "-" +
                  kind_name(net.node(sig.upper).kind);
    row["external_ins"] = sig.ins.size();
    row["external_outs"] = sig.outs.size();
    row["candidates"] = cands.size();
    row["incumbent_index"] = incumbent_index;
    json kinds = json::array();
    for (const auto& c : cands)
      kinds.push_back(std::string(kind_name(c.lower)) + ">" + kind_name(c.upper));
    row["candidate_kinds"] = std::move(kinds);
    ss << row.dump() << '\n';
    ++eligible;
  }
  const std::string path = (fs::path(cfg.out_dir) / "moves.jsonl").string();
  write_text_file(path, ss.str());
  std::cout << "eligible edges: " << eligible << " -> " << path << "\n";
  return 0;
}

int cmd_verify(const ExperimentConfig& cfg, const std::string& summary_path) {
  json summary = json::parse(read_text_file(summary_path));
  auto instances = instances_of(cfg);
  const double tol = 1e-10;
  bool ok = true;

  for (const auto& entry : summary["instances"]) {
    const std::string tag = entry["tag"].get<std::string>();
    const Instance* inst = nullptr;
    for (const auto& i : instances)
      if (i.tag == tag) inst = &i;
    if (!inst) {
      std::cout << tag << ": no matching instance in config FAIL\n";
      ok = false;
      continue;
    }
    OracleEntry oracle = oracle_for(inst->hamiltonian, cfg.out_dir,
                                    entry["after"].contains("infidelity_per_site"), true);
    auto check_net = [&](const std::string& file_key, const json& stored) {
      if (!entry.contains("files") || !entry["files"].contains(file_key)) return;
      TensorNetwork net =
          TensorNetwork::deserialize(read_text_file(entry["files"][file_key]));
      const double e = energy(net, inst->hamiltonian);
      const double d = relative_error(e, oracle.energy);
      bool pass = std::abs(e - stored["energy"].get<double>()) <= tol &&
                  std::abs(d - stored["delta"].get<double>()) <= tol;
      if (stored.contains("infidelity_per_site") && !oracle.state.empty()) {
        auto psi = net.to_state_vector();
        const double f = infidelity_per_site(psi, oracle.state, inst->hamiltonian.sites());
        pass = pass && std::abs(f - stored["infidelity_per_site"].get<double>()) <= tol;
      }
      std::cout << tag << " [" << file_key << "]: " << (pass ? "ok" : "MISMATCH") << "\n";
      if (!pass) ok = false;
    };
    if (entry.contains("before")) check_net("initial_net", entry["before"]);
    if (entry.contains("after")) check_net("best_net", entry["after"]);
    if (entry.contains("after")) check_net("final_net", entry["after"]);
  }
  if (!ok) throw NumericError("summary does not match recomputed artifacts");
  std::cout << "verify: all recomputed values within 1e-10\n";
  return 0;
}

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"isometric tensor-network ground-state toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_override, format_override, net_path, summary_path;
  std::optional<std::uint64_t> seed_override;
  std::optional<int> threads_override;

  auto add_common = [&](CLI::App* sub, bool need_config = true) {
    auto* opt = sub->add_option("--config", config_path, "experiment config (JSON)");
    if (need_config) opt->required();
    sub->add_option("--out", out_override, "output directory override");
    sub->add_option("--seed", seed_override, "master seed override");
    sub->add_option("--threads", threads_override, "worker thread count");
    sub->add_option("--format", format_override, "trace format: csv or jsonl");
  };

  auto* c_oracle = app.add_subcommand("oracle", "compute and cache exact ground truths");
  add_common(c_oracle);
  auto* c_opt = app.add_subcommand("optimize", "fixed-structure variational optimization");
  add_common(c_opt);
  auto* c_search = app.add_subcommand("search", "full structural search");
  add_common(c_search);
  auto* c_metrics = app.add_subcommand("metrics", "metrics for a stored network");
  add_common(c_metrics);
  c_metrics->add_option("--net", net_path, "network file")->required();
  auto* c_sdrg = app.add_subcommand("sdrg-init", "build the disorder-adapted network");
  add_common(c_sdrg);
  auto* c_moves = app.add_subcommand("enumerate-moves", "list candidate rewirings");
  add_common(c_moves);
  c_moves->add_option("--net", net_path, "network file")->required();
  auto* c_verify = app.add_subcommand("verify", "recompute a run summary from artifacts");
  add_common(c_verify);
  c_verify->add_option("--summary", summary_path, "summary file")->required();

  std::vector<const char*> argv;
  argv.push_back("ertn");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    ExperimentConfig cfg = load_config(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (!format_override.empty()) cfg.format = format_override;
    if (seed_override) cfg.seed = *seed_override;
    if (threads_override) cfg.threads = *threads_override;
    if (cfg.format != "csv" && cfg.format != "jsonl")
      throw ConfigError("format must be csv or jsonl");

    if (c_oracle->parsed()) return cmd_oracle(cfg);
    if (c_opt->parsed()) return cmd_optimize(cfg);
    if (c_search->parsed()) return cmd_search(cfg);
    if (c_metrics->parsed()) return cmd_metrics(cfg, net_path);
    if (c_sdrg->parsed()) return cmd_sdrg_init(cfg);
    if (c_moves->parsed()) return cmd_enumerate_moves(cfg, net_path);
    if (c_verify->parsed()) return cmd_verify(cfg, summary_path);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const CapExceeded& e) {
    std::cerr << "cap exceeded: " << e.what() << "\n";
    return 4;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace ertn
