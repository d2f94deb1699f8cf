#include "ertn/sdrg.hpp"

#include <doctest.h>

#include "ertn/errors.hpp"
#include "ertn/moves.hpp"

using namespace ertn;

namespace {

DisorderInstance instance_from(std::vector<double> couplings) {
  DisorderInstance inst;
  inst.n_sites = static_cast<int>(couplings.size());
  inst.seed = 0;
  inst.couplings = std::move(couplings);
  return inst;
}

}  // namespace

TEST_CASE("effective coupling formula") {
  CHECK(effective_coupling(0.2, 0.9, 0.4) == doctest::Approx(0.2 * 0.4 / 0.9).epsilon(1e-15));
  CHECK(effective_coupling(0.7, 0.7, 0.7) == doctest::Approx(0.7));
  CHECK(effective_coupling(0.0, 0.5, 0.9) == 0.0);
  CHECK_THROWS_AS(effective_coupling(0.1, 0.0, 0.2), ConfigError);
}

TEST_CASE("decimation order starts at the strongest bond") {
  auto [net, trace] =
      build_er_sdrg(instance_from({0.9, 0.1, 0.8, 0.2, 0.7, 0.3, 0.6, 0.4}));
  REQUIRE(!trace.events.empty());
  CHECK(trace.events[0].left_site == 0);
  CHECK(trace.events[0].right_site == 1);
  CHECK(trace.events[0].coupling == doctest::Approx(0.9));
  REQUIRE(trace.events[0].effective.has_value());
  CHECK(*trace.events[0].effective ==
        doctest::Approx(effective_coupling(0.4, 0.9, 0.1)));
}

TEST_CASE("degrees-of-freedom regression for generic instances") {
  auto [h8, i8] = build_random_xy(8, 11);
  auto [net8, tr8] = build_er_sdrg(i8);
  CHECK(net8.dof_count() == 172);
  CHECK(tr8.disentangler_count == 9);
  CHECK(tr8.top_count == 4);

  auto [h16, i16] = build_random_xy(16, 12);
  auto [net16, tr16] = build_er_sdrg(i16);
  CHECK(net16.dof_count() == 392);
  CHECK(tr16.disentangler_count == 21);
  CHECK(tr16.top_count == 8);
}

TEST_CASE("output network: N/2 tops, no isometries, ordered leaves, validates") {
  auto [h, inst] = build_random_xy(12, 5);
  auto [net, trace] = build_er_sdrg(inst);
  int tops = 0, isos = 0;
  for (int id = 0; id < net.node_count(); ++id) {
    if (net.node(id).kind == NodeKind::Top) ++tops;
    if (net.node(id).kind == NodeKind::Isometry) ++isos;
  }
  CHECK(tops == 6);
  CHECK(isos == 0);
  CHECK(static_cast<int>(trace.events.size()) == 6);
  REQUIRE(net.leaves().size() == 12);
  for (int k = 0; k < 12; ++k) CHECK(net.node(net.leaves()[k]).kind == NodeKind::Site);
  auto report = net.validate();
  CHECK(report.worst == 0.0);
  REQUIRE(report.norm_deviation.has_value());
  CHECK(*report.norm_deviation < 1e-12);
}

TEST_CASE("local pair types are only u-u and u-t") {
  auto [h, inst] = build_random_xy(8, 21);
  auto [net, trace] = build_er_sdrg(inst);
  net.reset_flags();
  refresh_exclusions(net);
  for (int p = 0; p < net.edge_count(); ++p) {
    const Edge& e = net.edge(p);
    if (net.node(e.src).kind == NodeKind::Site) continue;
    const NodeKind a = net.node(e.src).kind;
    const NodeKind b = net.node(e.dst).kind;
    const bool uu = a == NodeKind::Disentangler && b == NodeKind::Disentangler;
    const bool ut = a == NodeKind::Disentangler && b == NodeKind::Top;
    CHECK((uu || ut));
  }
}

TEST_CASE("created couplings respect the anti-monotone property") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
    auto [h, inst] = build_random_xy(16, seed);
    auto [net, trace] = build_er_sdrg(inst);
    for (const auto& ev : trace.events) {
      if (!ev.effective) continue;
      // the decimated bond was maximal, so both factors are <= it
      CHECK(*ev.effective <= ev.coupling + 1e-15);
    }
  }
}

TEST_CASE("minimal chain: a single bare top for two sites") {
  auto [net, trace] = build_er_sdrg(instance_from({1.0, 0.5}));
  CHECK(net.dof_count() == 7);
  CHECK(trace.disentangler_count == 0);
  CHECK(trace.top_count == 1);
  CHECK(trace.events.size() == 1);
  CHECK_FALSE(trace.events[0].effective.has_value());
}

TEST_CASE("ties break toward the lowest site index and are logged") {
  auto [net, trace] = build_er_sdrg(instance_from({0.5, 0.5, 0.5, 0.5}));
  REQUIRE(!trace.events.empty());
  CHECK(trace.events[0].left_site == 0);
  CHECK(trace.events[0].tie_broken);
}

TEST_CASE("input validation: odd chains and dead couplings") {
  CHECK_THROWS_AS(build_er_sdrg(instance_from({0.5, 0.5, 0.5})), ConfigError);
  CHECK_THROWS_AS(build_er_sdrg(instance_from({0.5, 0.0, 0.5, 0.5})), ConfigError);
}

TEST_CASE("identity seeds make the SDRG network the all-up product state") {
  auto [h, inst] = build_random_xy(8, 31);
  auto [net, trace] = build_er_sdrg(inst);
  auto psi = net.to_state_vector();
  CHECK(std::abs(psi[0] - cplx{1.0, 0.0}) < 1e-14);
  for (std::size_t k = 1; k < psi.size(); ++k) CHECK(std::abs(psi[k]) < 1e-14);
}
