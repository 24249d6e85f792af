#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "sepeff/graph.hpp"
#include "sepeff/rng.hpp"

using namespace sepeff;

namespace {

// ---------------------------------------------------------------------------
// Exhaustive path-enumeration d-separation oracle (slow, for cross-checking).

struct OracleGraph {
  int n = 0;
  std::set<std::pair<int, int>> edges;
  std::vector<bool> fixed;  // empty = none

  bool has(int u, int v) const { return edges.count({u, v}) > 0; }
  bool is_fixed(int v) const { return !fixed.empty() && fixed[v]; }
};

OracleGraph oracle_of(const Dag& g) {
  OracleGraph o;
  o.n = g.num_nodes();
  for (auto [u, v] : g.edges()) o.edges.insert({u, v});
  return o;
}

OracleGraph oracle_of(const Swig& s) {
  OracleGraph o = oracle_of(s.graph);
  o.fixed = s.fixed;
  return o;
}

// Descendant closure of each node (for collider opening).
std::vector<std::vector<bool>> descendants(const OracleGraph& g) {
  std::vector<std::vector<bool>> desc(g.n, std::vector<bool>(g.n, false));
  for (int v = 0; v < g.n; ++v) desc[v][v] = true;
  // Repeat-to-fixpoint transitive closure; graphs here are tiny.
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto [u, v] : g.edges)
      for (int w = 0; w < g.n; ++w)
        if (desc[v][w] && !desc[u][w]) {
          desc[u][w] = true;
          changed = true;
        }
  }
  return desc;
}

bool path_open(const OracleGraph& g, const std::vector<int>& path,
               const std::vector<bool>& in_cond,
               const std::vector<std::vector<bool>>& desc) {
  for (std::size_t i = 1; i + 1 < path.size(); ++i) {
    int a = path[i - 1], b = path[i], c = path[i + 1];
    bool collider = g.has(a, b) && g.has(c, b);
    if (collider) {
      bool opened = false;
      for (int w = 0; w < g.n; ++w)
        if (in_cond[w] && desc[b][w]) opened = true;
      if (!opened) return false;
    } else {
      if (in_cond[b]) return false;
    }
  }
  return true;
}

bool oracle_connected(const OracleGraph& g, const std::vector<int>& x,
                      const std::vector<int>& y, const std::vector<int>& cond) {
  std::vector<bool> in_cond(g.n, false);
  for (int v : cond) in_cond[v] = true;
  std::vector<bool> target(g.n, false);
  for (int v : y) target[v] = true;
  auto desc = descendants(g);

  // Undirected adjacency.
  std::vector<std::vector<int>> nbr(g.n);
  for (auto [u, v] : g.edges) {
    nbr[u].push_back(v);
    nbr[v].push_back(u);
  }
  std::vector<int> path;
  std::vector<bool> used(g.n, false);
  bool found = false;
  auto dfs = [&](auto&& self, int v) -> void {
    if (found) return;
    path.push_back(v);
    used[v] = true;
    if (target[v] && path.size() > 1 && path_open(g, path, in_cond, desc)) {
      found = true;
    } else {
      for (int w : nbr[v])
        if (!used[w] && !g.is_fixed(w)) self(self, w);
    }
    if (!found) {
      path.pop_back();
      used[v] = false;
    }
  };
  for (int s : x) {
    if (found) break;
    std::fill(used.begin(), used.end(), false);
    path.clear();
    if (!g.is_fixed(s)) dfs(dfs, s);
  }
  return found;
}

bool oracle_d_separated(const OracleGraph& g, const std::vector<int>& x,
                        const std::vector<int>& y,
                        const std::vector<int>& cond) {
  return !oracle_connected(g, x, y, cond);
}

// A witness trail is a valid certificate when consecutive nodes are adjacent,
// no fixed nodes appear, and every interior node passes the local rule.
bool trail_is_open(const OracleGraph& g, const std::vector<int>& trail,
                   const std::vector<int>& cond) {
  if (trail.size() < 2) return false;
  std::vector<bool> in_cond(g.n, false);
  for (int v : cond) in_cond[v] = true;
  auto desc = descendants(g);
  for (int v : trail)
    if (g.is_fixed(v)) return false;
  for (std::size_t i = 1; i < trail.size(); ++i)
    if (!g.has(trail[i - 1], trail[i]) && !g.has(trail[i], trail[i - 1]))
      return false;
  return path_open(g, trail, in_cond, desc);
}

// ---------------------------------------------------------------------------
// Fixtures and random generators

Dag fig1_treatment() {
  std::vector<NodeLabel> nodes = {
      {NodeRole::A_Y, 1}, {NodeRole::A_D, 1}, {NodeRole::A_Y, 2},
      {NodeRole::A_D, 2}, {NodeRole::D, 2},   {NodeRole::Y, 2},
  };
  std::vector<std::pair<int, int>> edges = {
      {0, 2}, {1, 3}, {2, 5}, {3, 4}, {4, 5}};
  return Dag(std::move(nodes), std::move(edges), {}, 1);
}

std::set<std::string> edge_names(const Dag& g) {
  std::set<std::string> out;
  for (auto [u, v] : g.edges())
    out.insert(g.label(u).display() + "->" + g.label(v).display());
  return out;
}

// Arbitrary DAG with anonymous (L-role) nodes, edges forward in index order.
Dag random_plain_dag(Rng& rng, int n, double p) {
  std::vector<NodeLabel> nodes;
  for (int i = 0; i < n; ++i) nodes.push_back({NodeRole::L, i});
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (rng.bernoulli(p)) edges.emplace_back(u, v);
  return Dag(std::move(nodes), std::move(edges), {}, 0);
}

// Trial-shaped treatment-centered DAG. Temporal order within interval k:
// C_k, A_{Y,k}, A_{D,k}, D_k, Y_k, L_k. Edges only run forward in time.
// `trial_form` enforces randomized baseline treatment (A_1 parentless) and
// measured adherence determinants (U never points at treatment nodes) — the
// structure under which the two encodings' dismissible-component readings
// coincide.
Dag random_trial_dag(Rng& rng, int K, double p, bool u_node,
                     bool all_l_to_d_block, bool trial_form = false) {
  std::vector<NodeLabel> nodes;
  std::vector<int> order;  // temporal rank per node
  auto add = [&](NodeRole role, int t, int rank) {
    nodes.push_back({role, t});
    order.push_back(rank);
    return static_cast<int>(nodes.size()) - 1;
  };
  int rank = 0;
  if (u_node) add(NodeRole::U, -1, rank);
  ++rank;
  if (rng.bernoulli(0.7)) add(NodeRole::L, 0, rank);
  ++rank;
  for (int k = 1; k <= K + 1; ++k) {
    if (rng.bernoulli(0.5)) add(NodeRole::C, k, rank);
    ++rank;
    add(NodeRole::A_Y, k, rank);
    add(NodeRole::A_D, k, rank);
    ++rank;
    add(NodeRole::D, k, rank);
    ++rank;
    add(NodeRole::Y, k, rank);
    ++rank;
    if (k <= K && rng.bernoulli(0.6)) {
      NodeRole role = all_l_to_d_block
                          ? NodeRole::L_D
                          : (rng.bernoulli(0.5) ? NodeRole::L_D : NodeRole::L_Y);
      add(role, k, rank);
    }
    ++rank;
  }
  const int n = static_cast<int>(nodes.size());
  std::vector<std::pair<int, int>> edges;
  auto role_at = [&](int v) { return nodes[v].role; };
  auto is_treatment = [&](int v) {
    return role_at(v) == NodeRole::A_Y || role_at(v) == NodeRole::A_D;
  };
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v) {
      if (order[u] >= order[v]) continue;
      if (trial_form && is_treatment(v) &&
          (nodes[v].t == 1 || role_at(u) == NodeRole::U))
        continue;
      bool forced =
          // treatment carry-over backbone keeps conversions non-trivial
          (role_at(u) == NodeRole::A_Y && role_at(v) == NodeRole::A_Y &&
           nodes[v].t == nodes[u].t + 1) ||
          (role_at(u) == NodeRole::A_D && role_at(v) == NodeRole::A_D &&
           nodes[v].t == nodes[u].t + 1);
      if (forced || rng.bernoulli(p)) edges.emplace_back(u, v);
    }
  return Dag(std::move(nodes), std::move(edges), {}, K);
}

std::vector<int> random_subset(Rng& rng, int n, double p,
                               const std::vector<int>& exclude) {
  std::vector<bool> out_of_bounds(n, false);
  for (int v : exclude) out_of_bounds[v] = true;
  std::vector<int> out;
  for (int v = 0; v < n; ++v)
    if (!out_of_bounds[v] && rng.bernoulli(p)) out.push_back(v);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST_CASE("node labels display and parse") {
  CHECK(NodeLabel{NodeRole::A_Y, 2}.display() == "A_Y2");
  CHECK(NodeLabel{NodeRole::Z_D, -1}.display() == "Z_D");
  CHECK(role_from_name("L_Y") == NodeRole::L_Y);
  CHECK_THROWS_AS(role_from_name("Q"), config_error);
  CHECK(role_carries_time(NodeRole::Y));
  CHECK(!role_carries_time(NodeRole::Z_Y));
}

TEST_CASE("dag constructor enforces invariants") {
  // Cycle.
  CHECK_THROWS_AS(Dag({{NodeRole::L, 0}, {NodeRole::L, 1}}, {{0, 1}, {1, 0}},
                      {}, 0),
                  config_error);
  // Duplicate node label.
  CHECK_THROWS_AS(Dag({{NodeRole::L, 0}, {NodeRole::L, 0}}, {}, {}, 0),
                  config_error);
  // Duplicate edge.
  CHECK_THROWS_AS(Dag({{NodeRole::L, 0}, {NodeRole::L, 1}}, {{0, 1}, {0, 1}},
                      {}, 0),
                  config_error);
  // Deterministic edge not in the edge set.
  CHECK_THROWS_AS(Dag({{NodeRole::L, 0}, {NodeRole::L, 1}}, {}, {{0, 1}}, 0),
                  config_error);
  // Timed role without time index.
  CHECK_THROWS_AS(Dag({{NodeRole::Y, -1}}, {}, {}, 0), config_error);
  // Untimed role with time index.
  CHECK_THROWS_AS(Dag({{NodeRole::Z_Y, 3}}, {}, {}, 0), config_error);
}

TEST_CASE("dag json round trip and lookups") {
  Dag g = fig1_treatment();
  auto text = g.to_json_text();
  Dag h = Dag::from_json_text(text);
  CHECK(h.num_nodes() == 6);
  CHECK(h.K() == 1);
  CHECK(edge_names(h) == edge_names(g));
  CHECK(h.find(NodeRole::A_Y, 2) >= 0);
  CHECK(h.find(NodeRole::A_Y, 3) == -1);
  CHECK(h.find_by_name("Y2") == h.find(NodeRole::Y, 2));
  CHECK(h.find_by_name("nope") == -1);
  CHECK(h.to_dot().find("A_D1") != std::string::npos);
}

TEST_CASE("figure-1 conversion produces the exact edge set") {
  Dag g = fig1_treatment();
  Dag s = convert_to_strategy_centered(g);
  std::set<std::string> expected = {
      "Z_Y->R1", "Z_Y->R2", "Z_Y->Y2", "Z_D->R1", "Z_D->R2",
      "Z_D->D2", "R1->R2",  "R2->Y2",  "R2->D2",  "D2->Y2",
  };
  CHECK(edge_names(s) == expected);
  CHECK(s.num_nodes() == 6);  // D2, Y2, Z_Y, Z_D, R1, R2
  CHECK(s.is_acyclic());
}

TEST_CASE("conversion rejects strategy-centered and unsplit input") {
  Dag s = convert_to_strategy_centered(fig1_treatment());
  CHECK_THROWS_AS(convert_to_strategy_centered(s), config_error);
  Dag plain({{NodeRole::A, 1}, {NodeRole::Y, 1}}, {{0, 1}}, {}, 0);
  CHECK_THROWS_AS(convert_to_strategy_centered(plain), config_error);
  // Time gap.
  Dag gap({{NodeRole::A_Y, 1}, {NodeRole::A_Y, 3}, {NodeRole::A_D, 1}},
          {}, {}, 2);
  CHECK_THROWS_AS(convert_to_strategy_centered(gap), config_error);
}

TEST_CASE("treatments with no children or parents give only Z->R edges") {
  Dag g({{NodeRole::A_Y, 1}, {NodeRole::A_D, 1}, {NodeRole::Y, 1}}, {}, {}, 0);
  Dag s = convert_to_strategy_centered(g);
  std::set<std::string> expected = {"Z_Y->R1", "Z_D->R1"};
  CHECK(edge_names(s) == expected);
}

TEST_CASE("split of unsplit treatment duplicates edges") {
  Dag g({{NodeRole::L, 0}, {NodeRole::A, 1}, {NodeRole::A, 2},
         {NodeRole::Y, 2}},
        {{0, 1}, {1, 2}, {1, 3}, {2, 3}}, {}, 1);
  Dag s = split_plain_treatment(g);
  CHECK(s.find_all(NodeRole::A_Y).size() == 2);
  CHECK(s.find_all(NodeRole::A_D).size() == 2);
  auto names = edge_names(s);
  CHECK(names.count("L0->A_Y1"));
  CHECK(names.count("L0->A_D1"));
  CHECK(names.count("A_Y1->A_D2"));
  CHECK(names.count("A_D1->A_Y2"));
  CHECK(names.count("A_Y2->Y2"));
  CHECK(names.size() == 2 + 4 + 2 + 2);
  // Converting the split graph works end to end.
  CHECK_NOTHROW(convert_to_strategy_centered(s));
  // Mixed graphs are ambiguous.
  Dag mixed({{NodeRole::A, 1}, {NodeRole::A_Y, 2}}, {}, {}, 1);
  CHECK_THROWS_AS(split_plain_treatment(mixed), config_error);
}

TEST_CASE("conversion postconditions hold on random graphs") {
  Rng rng(2024, 11);
  for (int rep = 0; rep < 100; ++rep) {
    int K = 1 + static_cast<int>(rng.below(2));
    Dag g = random_trial_dag(rng, K, 0.15, rep % 2 == 0, false);
    Dag s = convert_to_strategy_centered(g);
    REQUIRE(s.is_acyclic());

    int zy = s.find(NodeRole::Z_Y);
    int zd = s.find(NodeRole::Z_D);
    REQUIRE(zy >= 0);
    REQUIRE(zd >= 0);
    // Node set: retained originals plus Z components plus R per time.
    for (int v = 0; v < g.num_nodes(); ++v) {
      NodeRole role = g.label(v).role;
      if (role == NodeRole::A_Y || role == NodeRole::A_D)
        CHECK(s.find(role, g.label(v).t) == -1);
      else
        CHECK(s.find(role, g.label(v).t) >= 0);
    }
    for (int v : g.find_all(NodeRole::A_Y))
      CHECK(s.find(NodeRole::R, g.label(v).t) >= 0);

    auto gamma = [&](int v) {
      NodeRole role = g.label(v).role;
      if (role == NodeRole::A_Y || role == NodeRole::A_D)
        return s.find(NodeRole::R, g.label(v).t);
      return s.find(role, g.label(v).t);
    };
    // Forward direction: every clause-licensed edge exists.
    std::set<std::pair<int, int>> licensed;
    for (int w = 0; w < 2; ++w) {
      NodeRole role = w == 0 ? NodeRole::A_Y : NodeRole::A_D;
      int zw = w == 0 ? zy : zd;
      for (int v : g.find_all(role)) {
        int rk = s.find(NodeRole::R, g.label(v).t);
        for (int child : g.children(v)) {
          licensed.insert({zw, gamma(child)});
          if (gamma(child) != rk) licensed.insert({rk, gamma(child)});
        }
        for (int parent : g.parents(v)) licensed.insert({gamma(parent), rk});
        licensed.insert({zw, rk});
      }
    }
    for (auto [u, v] : g.edges()) {
      NodeRole ru = g.label(u).role, rv = g.label(v).role;
      if (ru == NodeRole::A_Y || ru == NodeRole::A_D) continue;
      if (rv == NodeRole::A_Y || rv == NodeRole::A_D) continue;
      licensed.insert({gamma(u), gamma(v)});
    }
    std::set<std::pair<int, int>> actual(s.edges().begin(), s.edges().end());
    CHECK(actual == licensed);
  }
}

TEST_CASE("swig with empty interventions behaves like the dag") {
  Dag g = convert_to_strategy_centered(fig1_treatment());
  Swig s = build_swig(g, {});
  CHECK(s.graph.num_nodes() == g.num_nodes());
  Rng rng(5, 2);
  for (int rep = 0; rep < 50; ++rep) {
    auto x = random_subset(rng, g.num_nodes(), 0.3, {});
    auto y = random_subset(rng, g.num_nodes(), 0.3, x);
    std::vector<int> xy = x;
    xy.insert(xy.end(), y.begin(), y.end());
    auto cond = random_subset(rng, g.num_nodes(), 0.3, xy);
    if (x.empty() || y.empty()) continue;
    CHECK(d_separated(g, x, y, cond) == d_separated(s, x, y, cond));
  }
}

TEST_CASE("swig d-separation equals edge-deleted d-separation") {
  Rng rng(31, 4);
  for (int rep = 0; rep < 60; ++rep) {
    Dag g = random_plain_dag(rng, 9, 0.25);
    auto intervened = random_subset(rng, 9, 0.3, {});
    std::vector<std::pair<int, int>> iv;
    for (int v : intervened) iv.push_back({v, 0});
    Swig s = build_swig(g, iv);

    // Same graph with outgoing edges of intervened nodes removed.
    std::vector<bool> cut(9, false);
    for (int v : intervened) cut[v] = true;
    std::vector<std::pair<int, int>> kept;
    for (auto [u, v] : g.edges())
      if (!cut[u]) kept.push_back({u, v});
    Dag deleted(g.nodes(), kept, {}, 0);

    for (int q = 0; q < 20; ++q) {
      auto x = random_subset(rng, 9, 0.25, {});
      auto y = random_subset(rng, 9, 0.25, x);
      std::vector<int> xy = x;
      xy.insert(xy.end(), y.begin(), y.end());
      auto cond = random_subset(rng, 9, 0.25, xy);
      if (x.empty() || y.empty()) continue;
      CHECK(d_separated(s, x, y, cond) == d_separated(deleted, x, y, cond));
    }
  }
}

TEST_CASE("figure-1 d-separation facts") {
  Dag s = convert_to_strategy_centered(fig1_treatment());
  int zy = s.find(NodeRole::Z_Y), zd = s.find(NodeRole::Z_D);
  int y2 = s.find(NodeRole::Y, 2), d2 = s.find(NodeRole::D, 2);
  int r2 = s.find(NodeRole::R, 2);
  CHECK(d_separated(s, {zy}, {zd}, {}));
  CHECK(d_separated(s, {y2}, {zd}, {zy, d2, r2}));
  CHECK(oracle_d_separated(oracle_of(s), {y2}, {zd}, {zy, d2, r2}));
  // Conditioning on the collider R2 alone opens Z_Y ~ Z_D.
  CHECK(!d_separated(s, {zy}, {zd}, {r2}));

  Dag chain({{NodeRole::Z_D, -1}, {NodeRole::D, 1}, {NodeRole::Y, 1}},
            {{0, 1}, {1, 2}}, {}, 0);
  CHECK(!d_separated(chain, {0}, {2}, {}));
  CHECK(d_separated(chain, {0}, {2}, {1}));
}

TEST_CASE("d-separation matches the path-enumeration oracle") {
  Rng rng(777, 1);
  int connected = 0, separated = 0;
  for (int rep = 0; rep < 80; ++rep) {
    Dag g = random_plain_dag(rng, 8 + static_cast<int>(rng.below(3)), 0.25);
    OracleGraph og = oracle_of(g);
    for (int q = 0; q < 15; ++q) {
      auto x = random_subset(rng, g.num_nodes(), 0.2, {});
      auto y = random_subset(rng, g.num_nodes(), 0.2, x);
      std::vector<int> xy = x;
      xy.insert(xy.end(), y.begin(), y.end());
      auto cond = random_subset(rng, g.num_nodes(), 0.25, xy);
      if (x.empty() || y.empty()) continue;
      bool fast = d_separated(g, x, y, cond);
      bool slow = oracle_d_separated(og, x, y, cond);
      CHECK(fast == slow);
      fast ? ++separated : ++connected;
      // Any witness must be a verifiably open trail.
      auto trail = find_open_trail(g, x, y, cond);
      CHECK(trail.has_value() == !fast);
      if (trail) {
        CHECK(trail_is_open(og, *trail, cond));
        CHECK(std::find(x.begin(), x.end(), trail->front()) != x.end());
        CHECK(std::find(y.begin(), y.end(), trail->back()) != y.end());
      }
    }
  }
  // Both outcomes actually exercised.
  CHECK(connected > 100);
  CHECK(separated > 100);
}

TEST_CASE("d-separation on swigs matches the oracle") {
  Rng rng(778, 1);
  for (int rep = 0; rep < 40; ++rep) {
    Dag g = random_plain_dag(rng, 8, 0.3);
    auto intervened = random_subset(rng, 8, 0.3, {});
    std::vector<std::pair<int, int>> iv;
    for (int v : intervened) iv.push_back({v, 1});
    Swig s = build_swig(g, iv);
    OracleGraph og = oracle_of(s);
    for (int q = 0; q < 10; ++q) {
      auto x = random_subset(rng, 8, 0.25, {});
      auto y = random_subset(rng, 8, 0.25, x);
      std::vector<int> xy = x;
      xy.insert(xy.end(), y.begin(), y.end());
      auto cond = random_subset(rng, 8, 0.25, xy);
      if (x.empty() || y.empty()) continue;
      CHECK(d_separated(s, x, y, cond) == oracle_d_separated(og, x, y, cond));
    }
  }
}

TEST_CASE("d-separation is symmetric and monotone in x") {
  Rng rng(779, 2);
  for (int rep = 0; rep < 60; ++rep) {
    Dag g = random_plain_dag(rng, 9, 0.25);
    auto x = random_subset(rng, 9, 0.3, {});
    auto y = random_subset(rng, 9, 0.3, x);
    std::vector<int> xy = x;
    xy.insert(xy.end(), y.begin(), y.end());
    auto cond = random_subset(rng, 9, 0.25, xy);
    if (x.empty() || y.empty()) continue;
    bool sep = d_separated(g, x, y, cond);
    CHECK(sep == d_separated(g, y, x, cond));
    if (sep && x.size() > 1) {
      std::vector<int> smaller(x.begin() + 1, x.end());
      CHECK(d_separated(g, smaller, y, cond));
    }
  }
}

TEST_CASE("query validation") {
  Rng rng(1);
  Dag g = random_plain_dag(rng, 4, 0.5);
  CHECK_THROWS_AS(d_separated(g, {0}, {0}, {}), config_error);
  CHECK_THROWS_AS(d_separated(g, {0}, {1}, {1}), config_error);
  CHECK_THROWS_AS(d_separated(g, {0}, {99}, {}), config_error);
  Swig s = build_swig(g, {{0, 1}});
  int fixed_half = 4;
  CHECK_THROWS_AS(d_separated(s, {fixed_half}, {1}, {}), config_error);
  CHECK_THROWS_AS(d_separated(s, {1}, {2}, {fixed_half}), config_error);
}

// ---------------------------------------------------------------------------
// Dismissible component conditions

TEST_CASE("figure-1 strategy graph passes all dcc") {
  Dag s = convert_to_strategy_centered(fig1_treatment());
  auto report = check_dcc(s, DccPartition::from_roles(s), s.K());
  CHECK(report.all_pass);
  CHECK(report.items.size() == 8);  // k in {0,1} x 4 conditions
  int vacuous = 0;
  for (const auto& item : report.items) {
    CHECK(item.pass);
    vacuous += item.vacuous;
  }
  // No L nodes and no Y1/D1 at k=0: several conditions are vacuous, but the
  // substantive k=1 outcome/competing conditions are not.
  CHECK(vacuous >= 2);
  CHECK(!report.items[4].vacuous);  // k=1, condition 1 (Y2 vs Z_D)
  CHECK(!report.items[5].vacuous);  // k=1, condition 2 (D2 vs Z_Y)
}

TEST_CASE("direct Z_D -> Y edge fails condition 1 with a witness") {
  Dag s = convert_to_strategy_centered(fig1_treatment());
  // Rebuild with the offending edge added.
  auto nodes = s.nodes();
  auto edges = s.edges();
  edges.push_back({s.find(NodeRole::Z_D), s.find(NodeRole::Y, 2)});
  Dag bad(nodes, edges, s.deterministic_edges(), s.K());
  auto report = check_dcc(bad, DccPartition::from_roles(bad), bad.K());
  CHECK(!report.all_pass);
  bool seen = false;
  for (const auto& item : report.items) {
    if (item.k == 1 && item.condition == 1) {
      seen = true;
      CHECK(!item.pass);
      REQUIRE(item.witness.size() == 2);
      CHECK(item.witness.front() == bad.find(NodeRole::Y, 2));
      CHECK(item.witness.back() == bad.find(NodeRole::Z_D));
    }
  }
  CHECK(seen);
}

TEST_CASE("dcc validates inputs") {
  Dag s = convert_to_strategy_centered(fig1_treatment());
  DccPartition bad;
  bad.block.assign(2, 0);  // wrong size
  CHECK_THROWS_AS(check_dcc(s, bad, s.K()), config_error);
  Dag g = fig1_treatment();
  CHECK_THROWS_AS(check_dcc(g, DccPartition::from_roles(g), g.K()),
                  config_error);
  CHECK_THROWS_AS(
      check_dcc_treatment(s, DccPartition::from_roles(s), s.K()),
      config_error);
}

TEST_CASE("dcc equivalence across encodings on random graphs") {
  Rng rng(4242, 9);
  int agree_pass = 0, agree_fail = 0;
  for (int rep = 0; rep < 50; ++rep) {
    int K = 1 + static_cast<int>(rng.below(2));
    Dag g = random_trial_dag(rng, K, 0.12, rep % 3 == 0, false,
                             /*trial_form=*/true);
    Dag s = convert_to_strategy_centered(g);
    auto treatment_report = check_dcc_treatment(g, DccPartition::from_roles(g), K);
    auto strategy_report = check_dcc(s, DccPartition::from_roles(s), K);
    CHECK(treatment_report.all_pass == strategy_report.all_pass);
    (treatment_report.all_pass ? agree_pass : agree_fail) += 1;
  }
  CHECK(agree_pass >= 5);
  CHECK(agree_fail >= 5);
}

TEST_CASE("dcc witnesses are open trails") {
  Rng rng(4243, 3);
  int witnessed = 0;
  for (int rep = 0; rep < 30; ++rep) {
    int K = 1 + static_cast<int>(rng.below(2));
    Dag g = random_trial_dag(rng, K, 0.2, false, false);
    Dag s = convert_to_strategy_centered(g);
    auto report = check_dcc(s, DccPartition::from_roles(s), K);
    if (report.all_pass) continue;
    std::vector<std::pair<int, int>> iv;
    for (int v : s.find_all(NodeRole::C)) iv.push_back({v, 0});
    for (int v : s.find_all(NodeRole::R)) iv.push_back({v, 1});
    Swig swig = build_swig(s, iv);
    OracleGraph og = oracle_of(swig);
    for (const auto& item : report.items) {
      if (item.pass) continue;
      ++witnessed;
      // Reconstruct this item's conditioning set from the description is
      // fragile; instead verify the trail is open given the nodes it must
      // avoid: recompute via the public query. The trail certificate checks
      // adjacency, fixedness and collider openings for the actual cond set,
      // which we rebuild from the item description by name lookup.
      std::vector<int> cond;
      auto bar = item.description.find("| {");
      REQUIRE(bar != std::string::npos);
      std::string names = item.description.substr(bar + 3);
      names.pop_back();  // trailing '}'
      std::string cur;
      auto flush = [&] {
        if (!cur.empty()) {
          int v = s.find_by_name(cur);
          REQUIRE(v >= 0);
          cond.push_back(v);
          cur.clear();
        }
      };
      for (char ch : names) {
        if (ch == ',') flush();
        else if (ch != ' ') cur.push_back(ch);
      }
      flush();
      CHECK(trail_is_open(og, item.witness, cond));
    }
  }
  CHECK(witnessed >= 10);
}

// ---------------------------------------------------------------------------
// Partial isolation

TEST_CASE("figure-1 satisfies both partial isolations") {
  Dag s = convert_to_strategy_centered(fig1_treatment());
  CHECK(check_partial_isolation(s, NodeRole::Z_Y).holds);
  CHECK(check_partial_isolation(s, NodeRole::Z_D).holds);
}

TEST_CASE("direct Z_Y -> D edge violates Z_Y isolation with witness") {
  Dag s = convert_to_strategy_centered(fig1_treatment());
  auto nodes = s.nodes();
  auto edges = s.edges();
  edges.push_back({s.find(NodeRole::Z_Y), s.find(NodeRole::D, 2)});
  Dag bad(nodes, edges, s.deterministic_edges(), s.K());
  auto result = check_partial_isolation(bad, NodeRole::Z_Y);
  CHECK(!result.holds);
  REQUIRE(result.witness.size() == 2);
  CHECK(result.witness.front() == bad.find(NodeRole::Z_Y));
  CHECK(result.witness.back() == bad.find(NodeRole::D, 2));
  // Z_D isolation is unaffected.
  CHECK(check_partial_isolation(bad, NodeRole::Z_D).holds);
}

TEST_CASE("isolation goes through mediating covariates but not R/C/Y") {
  // Z_Y -> L1 -> D2 violates; Z_Y -> Y1 -> D2 does not (Y blocks).
  std::vector<NodeLabel> nodes = {{NodeRole::Z_Y, -1},
                                  {NodeRole::Z_D, -1},
                                  {NodeRole::Y, 1},
                                  {NodeRole::L_D, 1},
                                  {NodeRole::D, 2}};
  Dag via_y({nodes}, {{0, 2}, {2, 4}}, {}, 1);
  CHECK(check_partial_isolation(via_y, NodeRole::Z_Y).holds);
  Dag via_l({nodes}, {{0, 3}, {3, 4}}, {}, 1);
  auto res = check_partial_isolation(via_l, NodeRole::Z_Y);
  CHECK(!res.holds);
  REQUIRE(res.witness.size() == 3);
  CHECK(res.witness[1] == 3);
}

TEST_CASE("paths through the competing event do not violate Z_D isolation") {
  // Z_D -> D -> Y intersects the D history: exactly the mediation Z_D
  // isolation permits.
  std::vector<NodeLabel> nodes = {
      {NodeRole::Z_Y, -1}, {NodeRole::Z_D, -1}, {NodeRole::D, 1},
      {NodeRole::Y, 2}};
  Dag g({nodes}, {{1, 2}, {2, 3}}, {}, 1);
  CHECK(check_partial_isolation(g, NodeRole::Z_D).holds);
  // A direct Z_D -> Y edge has no intermediates and violates.
  Dag bad({nodes}, {{1, 2}, {2, 3}, {1, 3}}, {}, 1);
  auto res = check_partial_isolation(bad, NodeRole::Z_D);
  CHECK(!res.holds);
  REQUIRE(res.witness.size() == 2);
}

TEST_CASE("deterministic edges are not causal pathways") {
  std::vector<NodeLabel> nodes = {{NodeRole::Z, -1},
                                  {NodeRole::Z_Y, -1},
                                  {NodeRole::Z_D, -1},
                                  {NodeRole::D, 1},
                                  {NodeRole::Y, 1}};
  // Bold Z -> Z_Y, Z -> Z_D; a deterministic Z_Y -> D and a deterministic
  // Z_D -> Y must both be ignored.
  Dag g({nodes}, {{0, 1}, {0, 2}, {1, 3}, {2, 4}},
        {{0, 1}, {0, 2}, {1, 3}, {2, 4}}, 0);
  CHECK(check_partial_isolation(g, NodeRole::Z_Y).holds);
  CHECK(check_partial_isolation(g, NodeRole::Z_D).holds);
  // The same edges as causal pathways violate.
  Dag bad({nodes}, {{0, 1}, {0, 2}, {1, 3}, {2, 4}}, {{0, 1}, {0, 2}}, 0);
  CHECK(!check_partial_isolation(bad, NodeRole::Z_Y).holds);
  CHECK(!check_partial_isolation(bad, NodeRole::Z_D).holds);
}

TEST_CASE("dcc with empty L_Y implies Z_Y isolation on random graphs") {
  Rng rng(991, 8);
  int passed_dcc = 0;
  for (int rep = 0; rep < 50; ++rep) {
    int K = 1 + static_cast<int>(rng.below(2));
    Dag g = random_trial_dag(rng, K, 0.12, rep % 2 == 0, true);
    Dag s = convert_to_strategy_centered(g);
    auto report = check_dcc(s, DccPartition::from_roles(s), K);
    if (!report.all_pass) continue;
    ++passed_dcc;
    CHECK(check_partial_isolation(s, NodeRole::Z_Y).holds);
  }
  CHECK(passed_dcc >= 5);
}
