// Causal DAG machinery: encoding conversion, SWIGs, d-separation (Bayes-ball
// with witness reconstruction), dismissible-component checks under both
// encodings, and partial-isolation path checks.
#include "sepeff/graph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sepeff {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Roles

namespace {
struct RoleEntry {
  NodeRole role;
  const char* name;
  bool timed;
};
constexpr RoleEntry kRoles[] = {
    {NodeRole::A_Y, "A_Y", true}, {NodeRole::A_D, "A_D", true},
    {NodeRole::A, "A", true},     {NodeRole::Z, "Z", false},
    {NodeRole::Z_Y, "Z_Y", false}, {NodeRole::Z_D, "Z_D", false},
    {NodeRole::R, "R", true},     {NodeRole::C, "C", true},
    {NodeRole::D, "D", true},     {NodeRole::Y, "Y", true},
    {NodeRole::L_D, "L_D", true}, {NodeRole::L_Y, "L_Y", true},
    {NodeRole::L, "L", true},     {NodeRole::U, "U", false},
};
}  // namespace

const char* role_name(NodeRole role) {
  for (const auto& e : kRoles)
    if (e.role == role) return e.name;
  return "?";
}

NodeRole role_from_name(const std::string& name) {
  for (const auto& e : kRoles)
    if (name == e.name) return e.role;
  throw config_error("unknown node role '" + name + "'");
}

bool role_carries_time(NodeRole role) {
  for (const auto& e : kRoles)
    if (e.role == role) return e.timed;
  return false;
}

std::string NodeLabel::display() const {
  std::string s = role_name(role);
  if (t >= 0) s += std::to_string(t);
  return s;
}

// ---------------------------------------------------------------------------
// Dag

Dag::Dag(std::vector<NodeLabel> nodes, std::vector<std::pair<int, int>> edges,
         std::vector<std::pair<int, int>> deterministic, int K)
    : nodes_(std::move(nodes)),
      edges_(std::move(edges)),
      deterministic_(std::move(deterministic)),
      K_(K) {
  const int n = num_nodes();
  std::set<std::pair<NodeRole, int>> labels;
  for (const auto& lab : nodes_) {
    if (role_carries_time(lab.role) && lab.t < 0)
      throw config_error("node " + std::string(role_name(lab.role)) +
                         " requires a time index");
    if (!role_carries_time(lab.role) && lab.role != NodeRole::U && lab.t >= 0)
      throw config_error("node " + std::string(role_name(lab.role)) +
                         " must not carry a time index");
    if (!labels.insert({lab.role, lab.t}).second)
      throw config_error("duplicate node " + lab.display());
  }
  parents_.assign(n, {});
  children_.assign(n, {});
  std::set<std::pair<int, int>> seen;
  for (auto [u, v] : edges_) {
    if (u < 0 || u >= n || v < 0 || v >= n)
      throw config_error("edge endpoint out of range");
    if (u == v) throw config_error("self loop on " + nodes_[u].display());
    if (!seen.insert({u, v}).second)
      throw config_error("duplicate edge " + nodes_[u].display() + " -> " +
                         nodes_[v].display());
    children_[u].push_back(v);
    parents_[v].push_back(u);
  }
  for (auto [u, v] : deterministic_)
    if (!seen.count({u, v}))
      throw config_error("deterministic edge not in edge set");
  if (!is_acyclic()) throw config_error("graph has a cycle");
}

Dag Dag::unchecked(std::vector<NodeLabel> nodes,
                   std::vector<std::pair<int, int>> edges,
                   std::vector<std::pair<int, int>> deterministic, int K) {
  Dag g;
  g.nodes_ = std::move(nodes);
  g.edges_ = std::move(edges);
  g.deterministic_ = std::move(deterministic);
  g.K_ = K;
  const int n = g.num_nodes();
  g.parents_.assign(n, {});
  g.children_.assign(n, {});
  for (auto [u, v] : g.edges_) {
    g.children_[u].push_back(v);
    g.parents_[v].push_back(u);
  }
  if (!g.is_acyclic()) throw config_error("graph has a cycle");
  return g;
}

bool Dag::has_edge(int from, int to) const {
  const auto& ch = children_[from];
  return std::find(ch.begin(), ch.end(), to) != ch.end();
}

int Dag::find(NodeRole role, int t) const {
  for (int v = 0; v < num_nodes(); ++v)
    if (nodes_[v].role == role && nodes_[v].t == t) return v;
  return -1;
}

std::vector<int> Dag::find_all(NodeRole role) const {
  std::vector<int> out;
  for (int v = 0; v < num_nodes(); ++v)
    if (nodes_[v].role == role) out.push_back(v);
  std::sort(out.begin(), out.end(),
            [&](int a, int b) { return nodes_[a].t < nodes_[b].t; });
  return out;
}

int Dag::find_by_name(const std::string& name) const {
  for (int v = 0; v < num_nodes(); ++v)
    if (nodes_[v].display() == name) return v;
  return -1;
}

bool Dag::is_acyclic() const {
  std::vector<int> indeg(num_nodes(), 0);
  for (auto [u, v] : edges_) {
    (void)u;
    ++indeg[v];
  }
  std::deque<int> q;
  for (int v = 0; v < num_nodes(); ++v)
    if (indeg[v] == 0) q.push_back(v);
  int seen = 0;
  while (!q.empty()) {
    int v = q.front();
    q.pop_front();
    ++seen;
    for (int c : children_[v])
      if (--indeg[c] == 0) q.push_back(c);
  }
  return seen == num_nodes();
}

std::string Dag::to_dot() const {
  std::ostringstream out;
  out << "digraph g {\n  rankdir=LR;\n";
  for (int v = 0; v < num_nodes(); ++v)
    out << "  n" << v << " [label=\"" << nodes_[v].display() << "\"];\n";
  std::set<std::pair<int, int>> det(deterministic_.begin(),
                                    deterministic_.end());
  for (auto [u, v] : edges_) {
    out << "  n" << u << " -> n" << v;
    if (det.count({u, v})) out << " [penwidth=2]";
    out << ";\n";
  }
  out << "}\n";
  return out.str();
}

std::string Dag::to_json_text() const {
  json j;
  j["K"] = K_;
  j["nodes"] = json::array();
  for (const auto& lab : nodes_) {
    json n;
    n["role"] = role_name(lab.role);
    if (lab.t >= 0) n["t"] = lab.t;
    j["nodes"].push_back(n);
  }
  j["edges"] = json::array();
  for (auto [u, v] : edges_) j["edges"].push_back({u, v});
  j["deterministic"] = json::array();
  for (auto [u, v] : deterministic_) j["deterministic"].push_back({u, v});
  return j.dump(2);
}

Dag Dag::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw config_error(std::string("graph JSON parse error: ") + e.what());
  }
  std::vector<NodeLabel> nodes;
  for (const auto& n : j.at("nodes")) {
    NodeLabel lab;
    lab.role = role_from_name(n.at("role").get<std::string>());
    lab.t = n.value("t", -1);
    nodes.push_back(lab);
  }
  auto read_edges = [&](const char* key) {
    std::vector<std::pair<int, int>> out;
    for (const auto& e : j.value(key, json::array()))
      out.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    return out;
  };
  return Dag(std::move(nodes), read_edges("edges"), read_edges("deterministic"),
             j.value("K", 0));
}

Dag Dag::from_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

// ---------------------------------------------------------------------------
// SWIG

Swig build_swig(const Dag& g,
                const std::vector<std::pair<int, int>>& interventions) {
  const int n = g.num_nodes();
  std::vector<int> fixed_half(n, -1);
  std::vector<NodeLabel> nodes = g.nodes();
  std::vector<int> origin(n, -1);
  std::vector<int> values(n, -1);
  for (auto [v, value] : interventions) {
    if (v < 0 || v >= n) throw config_error("intervened node out of range");
    if (fixed_half[v] >= 0)
      throw config_error("node intervened twice: " + g.label(v).display());
    fixed_half[v] = static_cast<int>(nodes.size());
    nodes.push_back(g.label(v));  // same label; flagged via Swig::fixed
    origin.push_back(v);
    values.push_back(value);
  }
  std::vector<std::pair<int, int>> edges;
  std::set<std::pair<int, int>> det_in(g.deterministic_edges().begin(),
                                       g.deterministic_edges().end());
  std::vector<std::pair<int, int>> det_out;
  for (auto [u, v] : g.edges()) {
    int src = fixed_half[u] >= 0 ? fixed_half[u] : u;
    edges.emplace_back(src, v);
    if (det_in.count({u, v})) det_out.emplace_back(src, v);
  }
  Swig s;
  s.graph = Dag::unchecked(std::move(nodes), std::move(edges),
                           std::move(det_out), g.K());
  s.fixed.assign(s.graph.num_nodes(), false);
  for (int v : fixed_half)
    if (v >= 0) s.fixed[v] = true;
  s.origin = std::move(origin);
  s.values = std::move(values);
  return s;
}

// ---------------------------------------------------------------------------
// d-separation (Bayes-ball with predecessor tracking)

namespace {

struct BallQuery {
  const std::vector<std::vector<int>>* parents;
  const std::vector<std::vector<int>>* children;
  const std::vector<bool>* fixed;  // may be null
  int n = 0;

  bool is_fixed(int v) const { return fixed && (*fixed)[v]; }
};

std::optional<std::vector<int>> ball_trail(const BallQuery& q,
                                           const std::vector<int>& x,
                                           const std::vector<int>& y,
                                           const std::vector<int>& cond) {
  auto check_range = [&](const std::vector<int>& set) {
    for (int v : set)
      if (v < 0 || v >= q.n) throw config_error("unknown node in query set");
  };
  check_range(x);
  check_range(y);
  check_range(cond);
  if (x.empty() || y.empty())
    throw config_error("d-separation query sets x and y must be non-empty");
  std::vector<bool> in_cond(q.n, false);
  for (int v : cond) in_cond[v] = true;
  std::vector<bool> is_target(q.n, false);
  for (int v : y) is_target[v] = true;
  for (int v : x)
    if (is_target[v] || in_cond[v])
      throw config_error("d-separation query sets must be disjoint");
  for (int v : y)
    if (in_cond[v]) throw config_error("d-separation query sets must be disjoint");

  // Ancestors of the conditioning set (for collider opening).
  std::vector<bool> anc(q.n, false);
  {
    std::deque<int> stack(cond.begin(), cond.end());
    for (int v : cond) anc[v] = true;
    while (!stack.empty()) {
      int v = stack.front();
      stack.pop_front();
      for (int p : (*q.parents)[v])
        if (!anc[p]) {
          anc[p] = true;
          stack.push_back(p);
        }
    }
  }

  // States: (node, arrived-from). 0 = from a child (ball moving up),
  // 1 = from a parent (ball moving down).
  auto sid = [&](int v, int dir) { return 2 * v + dir; };
  std::vector<int> pred(2 * q.n, -2);  // -2 unvisited, -1 start
  std::deque<int> queue;
  auto visit = [&](int v, int dir, int from_state) {
    if (q.is_fixed(v)) return;
    int s = sid(v, dir);
    if (pred[s] != -2) return;
    pred[s] = from_state;
    queue.push_back(s);
  };
  for (int v : x) visit(v, 0, -1);

  int hit_state = -1;
  while (!queue.empty() && hit_state < 0) {
    int s = queue.front();
    queue.pop_front();
    int v = s / 2, dir = s % 2;
    if (is_target[v]) {
      hit_state = s;
      break;
    }
    if (dir == 0) {
      // Arrived from a child: pass up and down unless conditioned on.
      if (!in_cond[v]) {
        for (int p : (*q.parents)[v]) visit(p, 0, s);
        for (int c : (*q.children)[v]) visit(c, 1, s);
      }
    } else {
      // Arrived from a parent: chain through when unconditioned; bounce off
      // an (opened) collider when v has the conditioning set below it.
      if (!in_cond[v])
        for (int c : (*q.children)[v]) visit(c, 1, s);
      if (anc[v])
        for (int p : (*q.parents)[v]) visit(p, 0, s);
    }
  }
  if (hit_state < 0) return std::nullopt;
  std::vector<int> trail;
  for (int s = hit_state; s != -1; s = pred[s]) trail.push_back(s / 2);
  std::reverse(trail.begin(), trail.end());
  return trail;
}

}  // namespace

std::optional<std::vector<int>> find_open_trail(const Dag& g,
                                                const std::vector<int>& x,
                                                const std::vector<int>& y,
                                                const std::vector<int>& cond) {
  BallQuery q;
  // Adjacency is private; rebuild it here (graphs are small).
  std::vector<std::vector<int>> parents(g.num_nodes()), children(g.num_nodes());
  for (auto [u, v] : g.edges()) {
    children[u].push_back(v);
    parents[v].push_back(u);
  }
  q.parents = &parents;
  q.children = &children;
  q.fixed = nullptr;
  q.n = g.num_nodes();
  return ball_trail(q, x, y, cond);
}

std::optional<std::vector<int>> find_open_trail(const Swig& g,
                                                const std::vector<int>& x,
                                                const std::vector<int>& y,
                                                const std::vector<int>& cond) {
  for (int v : x)
    if (g.fixed[v]) throw config_error("fixed node in d-separation query");
  for (int v : y)
    if (g.fixed[v]) throw config_error("fixed node in d-separation query");
  for (int v : cond)
    if (g.fixed[v]) throw config_error("fixed node in conditioning set");
  BallQuery q;
  std::vector<std::vector<int>> parents(g.graph.num_nodes()),
      children(g.graph.num_nodes());
  for (auto [u, v] : g.graph.edges()) {
    children[u].push_back(v);
    parents[v].push_back(u);
  }
  q.parents = &parents;
  q.children = &children;
  q.fixed = &g.fixed;
  q.n = g.graph.num_nodes();
  return ball_trail(q, x, y, cond);
}

bool d_separated(const Dag& g, const std::vector<int>& x,
                 const std::vector<int>& y, const std::vector<int>& cond) {
  return !find_open_trail(g, x, y, cond).has_value();
}

bool d_separated(const Swig& g, const std::vector<int>& x,
                 const std::vector<int>& y, const std::vector<int>& cond) {
  return !find_open_trail(g, x, y, cond).has_value();
}

// ---------------------------------------------------------------------------
// Encoding conversion

Dag convert_to_strategy_centered(const Dag& g) {
  for (const auto& lab : g.nodes()) {
    if (lab.role == NodeRole::Z || lab.role == NodeRole::Z_Y ||
        lab.role == NodeRole::Z_D || lab.role == NodeRole::R)
      throw config_error(
          "graph is already strategy-centered; conversion applies to "
          "treatment-centered graphs only");
    if (lab.role == NodeRole::A)
      throw config_error(
          "graph carries unsplit treatment nodes; split them first");
  }
  auto a_y = g.find_all(NodeRole::A_Y);
  auto a_d = g.find_all(NodeRole::A_D);
  if (a_y.empty() && a_d.empty())
    throw config_error("no treatment nodes to convert");
  auto check_gaps = [&](const std::vector<int>& nodes, const char* what) {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (g.label(nodes[i]).t != static_cast<int>(i) + 1)
        throw config_error(std::string("time-index gap in ") + what +
                           " nodes");
  };
  check_gaps(a_y, "A_Y");
  check_gaps(a_d, "A_D");

  // Output node set: retained nodes keep their labels; add Z_Y/Z_D (when the
  // corresponding component exists) and R_k for every treatment time.
  std::set<int> r_times;
  for (int v : a_y) r_times.insert(g.label(v).t);
  for (int v : a_d) r_times.insert(g.label(v).t);

  std::vector<NodeLabel> nodes;
  std::vector<int> map_old(g.num_nodes(), -1);  // old index -> new index
  for (int v = 0; v < g.num_nodes(); ++v) {
    NodeRole role = g.label(v).role;
    if (role == NodeRole::A_Y || role == NodeRole::A_D) continue;
    map_old[v] = static_cast<int>(nodes.size());
    nodes.push_back(g.label(v));
  }
  int zy = -1, zd = -1;
  if (!a_y.empty()) {
    zy = static_cast<int>(nodes.size());
    nodes.push_back({NodeRole::Z_Y, -1});
  }
  if (!a_d.empty()) {
    zd = static_cast<int>(nodes.size());
    nodes.push_back({NodeRole::Z_D, -1});
  }
  std::map<int, int> r_of;  // time -> new node index
  for (int t : r_times) {
    r_of[t] = static_cast<int>(nodes.size());
    nodes.push_back({NodeRole::R, t});
  }

  // Gamma maps old node index to new node index.
  auto gamma = [&](int v) {
    NodeRole role = g.label(v).role;
    if (role == NodeRole::A_Y || role == NodeRole::A_D)
      return r_of.at(g.label(v).t);
    return map_old[v];
  };

  std::set<std::pair<int, int>> edges;
  for (int w = 0; w < 2; ++w) {
    const auto& treat = w == 0 ? a_d : a_y;
    int zw = w == 0 ? zd : zy;
    for (int v : treat) {
      int rk = r_of.at(g.label(v).t);
      for (int child : g.children(v)) {
        edges.insert({zw, gamma(child)});
        if (gamma(child) != rk) edges.insert({rk, gamma(child)});
      }
      for (int parent : g.parents(v)) edges.insert({gamma(parent), rk});
      edges.insert({zw, rk});
    }
  }
  std::set<std::pair<int, int>> det;
  std::set<std::pair<int, int>> det_in(g.deterministic_edges().begin(),
                                       g.deterministic_edges().end());
  for (auto [u, v] : g.edges()) {
    if (map_old[u] < 0 || map_old[v] < 0) continue;
    edges.insert({map_old[u], map_old[v]});
    if (det_in.count({u, v})) det.insert({map_old[u], map_old[v]});
  }
  return Dag(std::move(nodes),
             std::vector<std::pair<int, int>>(edges.begin(), edges.end()),
             std::vector<std::pair<int, int>>(det.begin(), det.end()), g.K());
}

Dag split_plain_treatment(const Dag& g) {
  auto plain = g.find_all(NodeRole::A);
  if (plain.empty()) return g;
  for (const auto& lab : g.nodes())
    if (lab.role == NodeRole::A_Y || lab.role == NodeRole::A_D)
      throw config_error("graph mixes split and unsplit treatment nodes");
  std::vector<NodeLabel> nodes;
  std::vector<int> map_old(g.num_nodes(), -1);
  std::map<int, std::pair<int, int>> split;  // old A index -> (A_Y, A_D)
  for (int v = 0; v < g.num_nodes(); ++v) {
    if (g.label(v).role == NodeRole::A) {
      int ay = static_cast<int>(nodes.size());
      nodes.push_back({NodeRole::A_Y, g.label(v).t});
      int ad = static_cast<int>(nodes.size());
      nodes.push_back({NodeRole::A_D, g.label(v).t});
      split[v] = {ay, ad};
    } else {
      map_old[v] = static_cast<int>(nodes.size());
      nodes.push_back(g.label(v));
    }
  }
  auto images = [&](int v) {
    std::vector<int> out;
    if (auto it = split.find(v); it != split.end()) {
      out.push_back(it->second.first);
      out.push_back(it->second.second);
    } else {
      out.push_back(map_old[v]);
    }
    return out;
  };
  std::set<std::pair<int, int>> edges, det;
  std::set<std::pair<int, int>> det_in(g.deterministic_edges().begin(),
                                       g.deterministic_edges().end());
  for (auto [u, v] : g.edges())
    for (int a : images(u))
      for (int b : images(v)) {
        edges.insert({a, b});
        if (det_in.count({u, v})) det.insert({a, b});
      }
  return Dag(std::move(nodes),
             std::vector<std::pair<int, int>>(edges.begin(), edges.end()),
             std::vector<std::pair<int, int>>(det.begin(), det.end()), g.K());
}

// ---------------------------------------------------------------------------
// Dismissible component conditions

DccPartition DccPartition::from_roles(const Dag& g) {
  DccPartition p;
  p.block.assign(g.num_nodes(), 0);
  for (int v = 0; v < g.num_nodes(); ++v)
    if (g.label(v).role == NodeRole::L_Y) p.block[v] = 1;
  return p;
}

namespace {

bool is_l_role(NodeRole r) {
  return r == NodeRole::L || r == NodeRole::L_D || r == NodeRole::L_Y;
}

// L nodes with time in [lo, hi], optionally restricted to one block.
std::vector<int> l_nodes_between(const Dag& g, const DccPartition& part,
                                 int lo, int hi, int block /* -1 = both */) {
  std::vector<int> out;
  for (int v = 0; v < g.num_nodes(); ++v) {
    if (!is_l_role(g.label(v).role)) continue;
    int t = g.label(v).t;
    if (t < lo || t > hi) continue;
    if (block >= 0 && part.block[v] != block) continue;
    out.push_back(v);
  }
  return out;
}

std::string names_of(const Dag& g, const std::vector<int>& vs) {
  std::string s;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (i) s += ", ";
    s += g.label(vs[i]).display();
  }
  return s;
}

struct DccSide {
  std::vector<int> x, y, cond;
};

DccItem run_condition(const Swig& swig, const Dag& g, int k, int which,
                      const DccSide& side) {
  DccItem item;
  item.k = k;
  item.condition = which;
  item.description = names_of(g, side.x) + " _||_ " + names_of(g, side.y) +
                     " | {" + names_of(g, side.cond) + "}";
  if (side.x.empty() || side.y.empty()) {
    item.vacuous = true;
    item.pass = true;
    return item;
  }
  auto trail = find_open_trail(swig, side.x, side.y, side.cond);
  item.pass = !trail.has_value();
  if (trail) item.witness = *trail;
  return item;
}

void validate_partition(const Dag& g, const DccPartition& partition) {
  if (partition.block.size() != static_cast<std::size_t>(g.num_nodes()))
    throw config_error("partition size does not match graph");
  for (int v = 0; v < g.num_nodes(); ++v) {
    NodeRole r = g.label(v).role;
    if (r == NodeRole::L_D && partition.block[v] != 0)
      throw config_error("partition assigns an L_D node to the Y block");
    if (r == NodeRole::L_Y && partition.block[v] != 1)
      throw config_error("partition assigns an L_Y node to the D block");
  }
}

}  // namespace

DccReport check_dcc(const Dag& g, const DccPartition& partition, int K) {
  validate_partition(g, partition);
  int zy = g.find(NodeRole::Z_Y);
  int zd = g.find(NodeRole::Z_D);
  if (zy < 0 || zd < 0)
    throw config_error(
        "dismissible-component check needs a strategy-centered graph with "
        "Z_Y and Z_D nodes");
  // SWIG under no loss of follow-up and perfect adherence; the initiated
  // components stay random.
  std::vector<std::pair<int, int>> interventions;
  for (int v : g.find_all(NodeRole::C)) interventions.push_back({v, 0});
  for (int v : g.find_all(NodeRole::R)) interventions.push_back({v, 1});
  Swig swig = build_swig(g, interventions);

  DccReport report;
  auto maybe = [&](NodeRole role, int t) {
    std::vector<int> out;
    int v = g.find(role, t);
    if (v >= 0) out.push_back(v);
    return out;
  };
  // Conditioning on the event {D_t = Y_s = 0} pins the whole histories by
  // monotonicity, so the d-separation surrogate conditions on every D and Y
  // node up to the stated times.
  auto upto = [&](NodeRole role, int t) {
    std::vector<int> out;
    for (int v : g.find_all(role))
      if (g.label(v).t <= t) out.push_back(v);
    return out;
  };
  for (int k = 0; k <= K; ++k) {
    auto lbar_k = l_nodes_between(g, partition, 0, k, -1);
    auto lbar_km1 = l_nodes_between(g, partition, 0, k - 1, -1);
    auto ly_k = l_nodes_between(g, partition, k, k, 1);
    auto ld_k = l_nodes_between(g, partition, k, k, 0);

    DccSide c1;
    c1.x = maybe(NodeRole::Y, k + 1);
    c1.y = {zd};
    c1.cond = {zy};
    for (int v : upto(NodeRole::D, k + 1)) c1.cond.push_back(v);
    for (int v : upto(NodeRole::Y, k)) c1.cond.push_back(v);
    for (int v : lbar_k) c1.cond.push_back(v);
    report.items.push_back(run_condition(swig, g, k, 1, c1));

    DccSide c2;
    c2.x = maybe(NodeRole::D, k + 1);
    c2.y = {zy};
    c2.cond = {zd};
    for (int v : upto(NodeRole::D, k)) c2.cond.push_back(v);
    for (int v : upto(NodeRole::Y, k)) c2.cond.push_back(v);
    for (int v : lbar_k) c2.cond.push_back(v);
    report.items.push_back(run_condition(swig, g, k, 2, c2));

    DccSide c3;
    c3.x = ly_k;
    c3.y = {zd};
    c3.cond = {zy};
    for (int v : upto(NodeRole::D, k)) c3.cond.push_back(v);
    for (int v : upto(NodeRole::Y, k)) c3.cond.push_back(v);
    for (int v : ld_k) c3.cond.push_back(v);
    for (int v : lbar_km1) c3.cond.push_back(v);
    report.items.push_back(run_condition(swig, g, k, 3, c3));

    DccSide c4;
    c4.x = ld_k;
    c4.y = {zy};
    c4.cond = {zd};
    for (int v : upto(NodeRole::D, k)) c4.cond.push_back(v);
    for (int v : upto(NodeRole::Y, k)) c4.cond.push_back(v);
    for (int v : lbar_km1) c4.cond.push_back(v);
    report.items.push_back(run_condition(swig, g, k, 4, c4));
  }
  for (const auto& item : report.items)
    if (!item.pass) report.all_pass = false;
  return report;
}

DccReport check_dcc_treatment(const Dag& g, const DccPartition& partition,
                              int K) {
  validate_partition(g, partition);
  if (g.find(NodeRole::Z_Y) >= 0 || g.find(NodeRole::Z_D) >= 0 ||
      g.find(NodeRole::Z) >= 0)
    throw config_error(
        "treatment-centered check does not apply to strategy-centered "
        "graphs");
  if (g.find_all(NodeRole::A_Y).empty() && g.find_all(NodeRole::A_D).empty())
    throw config_error("no treatment nodes in graph");
  // SWIG under no loss of follow-up only; treatment histories stay random.
  std::vector<std::pair<int, int>> interventions;
  for (int v : g.find_all(NodeRole::C)) interventions.push_back({v, 0});
  Swig swig = build_swig(g, interventions);

  auto a_upto = [&](NodeRole role, int t) {
    std::vector<int> out;
    for (int v : g.find_all(role))
      if (g.label(v).t <= t) out.push_back(v);
    return out;
  };
  auto maybe = [&](NodeRole role, int t) {
    std::vector<int> out;
    int v = g.find(role, t);
    if (v >= 0) out.push_back(v);
    return out;
  };

  DccReport report;
  for (int k = 0; k <= K; ++k) {
    auto lbar_k = l_nodes_between(g, partition, 0, k, -1);
    auto lbar_km1 = l_nodes_between(g, partition, 0, k - 1, -1);
    auto ly_k = l_nodes_between(g, partition, k, k, 1);
    auto ld_k = l_nodes_between(g, partition, k, k, 0);

    DccSide c1;
    c1.x = maybe(NodeRole::Y, k + 1);
    c1.y = a_upto(NodeRole::A_D, k + 1);
    c1.cond = a_upto(NodeRole::A_Y, k + 1);
    for (int v : a_upto(NodeRole::D, k + 1)) c1.cond.push_back(v);
    for (int v : a_upto(NodeRole::Y, k)) c1.cond.push_back(v);
    for (int v : lbar_k) c1.cond.push_back(v);
    report.items.push_back(run_condition(swig, g, k, 1, c1));

    DccSide c2;
    c2.x = maybe(NodeRole::D, k + 1);
    c2.y = a_upto(NodeRole::A_Y, k + 1);
    c2.cond = a_upto(NodeRole::A_D, k + 1);
    for (int v : a_upto(NodeRole::D, k)) c2.cond.push_back(v);
    for (int v : a_upto(NodeRole::Y, k)) c2.cond.push_back(v);
    for (int v : lbar_k) c2.cond.push_back(v);
    report.items.push_back(run_condition(swig, g, k, 2, c2));

    DccSide c3;
    c3.x = ly_k;
    c3.y = a_upto(NodeRole::A_D, k);
    c3.cond = a_upto(NodeRole::A_Y, k);
    for (int v : a_upto(NodeRole::D, k)) c3.cond.push_back(v);
    for (int v : a_upto(NodeRole::Y, k)) c3.cond.push_back(v);
    for (int v : ld_k) c3.cond.push_back(v);
    for (int v : lbar_km1) c3.cond.push_back(v);
    report.items.push_back(run_condition(swig, g, k, 3, c3));

    DccSide c4;
    c4.x = ld_k;
    c4.y = a_upto(NodeRole::A_Y, k);
    c4.cond = a_upto(NodeRole::A_D, k);
    for (int v : a_upto(NodeRole::D, k)) c4.cond.push_back(v);
    for (int v : a_upto(NodeRole::Y, k)) c4.cond.push_back(v);
    for (int v : lbar_km1) c4.cond.push_back(v);
    report.items.push_back(run_condition(swig, g, k, 4, c4));
  }
  for (const auto& item : report.items)
    if (!item.pass) report.all_pass = false;
  return report;
}

// ---------------------------------------------------------------------------
// Partial isolation

IsolationResult check_partial_isolation(const Dag& g, NodeRole which) {
  if (which != NodeRole::Z_Y && which != NodeRole::Z_D)
    throw config_error("partial isolation applies to Z_Y or Z_D");
  IsolationResult result;
  int start = g.find(which);
  if (start < 0) return result;  // vacuously holds

  NodeRole target = which == NodeRole::Z_Y ? NodeRole::D : NodeRole::Y;
  NodeRole event_block = which == NodeRole::Z_Y ? NodeRole::Y : NodeRole::D;
  auto is_blocker = [&](int v) {
    NodeRole r = g.label(v).role;
    return r == event_block || r == NodeRole::R || r == NodeRole::C;
  };
  std::set<std::pair<int, int>> det(g.deterministic_edges().begin(),
                                    g.deterministic_edges().end());

  // Directed reachability avoiding blocker pass-throughs; deterministic
  // edges are definitional, not causal, and do not count.
  std::vector<int> pred(g.num_nodes(), -2);
  std::deque<int> queue;
  queue.push_back(start);
  pred[start] = -1;
  while (!queue.empty()) {
    int v = queue.front();
    queue.pop_front();
    if (v != start) {
      if (g.label(v).role == target) {
        result.holds = false;
        std::vector<int> path;
        for (int u = v; u != -1; u = pred[u]) path.push_back(u);
        std::reverse(path.begin(), path.end());
        result.witness = path;
        return result;
      }
      if (is_blocker(v)) continue;  // path intersected; prune
    }
    for (int c : g.children(v)) {
      if (det.count({v, c})) continue;
      if (pred[c] == -2) {
        pred[c] = v;
        queue.push_back(c);
      }
    }
  }
  return result;
}

}  // namespace sepeff
