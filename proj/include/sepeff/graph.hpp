// Causal DAGs over the trial variables, in the treatment-centered encoding
// (A_{Y,k}, A_{D,k} nodes) or the strategy-centered encoding (Z_Y, Z_D, R_k
// nodes). Supports the encoding conversion, single-world intervention graphs,
// d-separation queries, the dismissible-component checks behind the
// identification result, and the partial-isolation checks behind effect
// interpretation.
//
// Graphs are immutable once built; all queries are const and thread-safe.
#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sepeff/common.hpp"

namespace sepeff {

enum class NodeRole {
  A_Y,  // outcome-pathway treatment component taken at k
  A_D,  // competing-pathway component taken at k
  A,    // unsplit treatment taken at k
  Z,    // initiated treatment (strategy encoding, unsplit)
  Z_Y,  // initiated outcome-pathway component
  Z_D,  // initiated competing-pathway component
  R,    // adherence indicator at k
  C,    // censoring at k
  D,    // competing event at k
  Y,    // event of interest at k
  L_D,  // time-varying covariate, competing-pathway block
  L_Y,  // time-varying covariate, outcome-pathway block
  L,    // time-varying covariate, block unassigned
  U,    // unmeasured
};

const char* role_name(NodeRole role);
NodeRole role_from_name(const std::string& name);
bool role_carries_time(NodeRole role);

struct NodeLabel {
  NodeRole role = NodeRole::L;
  int t = -1;  // -1 for roles without a time index

  bool operator==(const NodeLabel&) const = default;
  std::string display() const;
};

struct Swig;

class Dag {
 public:
  Dag() = default;
  Dag(std::vector<NodeLabel> nodes, std::vector<std::pair<int, int>> edges,
      std::vector<std::pair<int, int>> deterministic, int K);

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  const std::vector<NodeLabel>& nodes() const { return nodes_; }
  const NodeLabel& label(int v) const { return nodes_[v]; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<std::pair<int, int>>& deterministic_edges() const {
    return deterministic_;
  }
  int K() const { return K_; }

  const std::vector<int>& parents(int v) const { return parents_[v]; }
  const std::vector<int>& children(int v) const { return children_[v]; }
  bool has_edge(int from, int to) const;

  // -1 when absent. Roles without time use t = -1.
  int find(NodeRole role, int t = -1) const;
  // All nodes of a role, sorted by time.
  std::vector<int> find_all(NodeRole role) const;
  // Node by display name, e.g. "Y2", "Z_D", "L_D1". -1 when absent.
  int find_by_name(const std::string& name) const;

  bool is_acyclic() const;

  std::string to_dot() const;
  std::string to_json_text() const;
  static Dag from_json_text(const std::string& text);
  static Dag from_json_file(const std::string& path);

 private:
  // SWIG construction duplicates node labels (the fixed half shares the
  // original's label), which the public constructor forbids.
  friend struct Swig;
  friend Swig build_swig(const Dag&, const std::vector<std::pair<int, int>>&);
  static Dag unchecked(std::vector<NodeLabel> nodes,
                       std::vector<std::pair<int, int>> edges,
                       std::vector<std::pair<int, int>> deterministic, int K);

  std::vector<NodeLabel> nodes_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::pair<int, int>> deterministic_;
  std::vector<std::vector<int>> parents_;
  std::vector<std::vector<int>> children_;
  int K_ = 0;
};

// ---------------------------------------------------------------------------
// Single-world intervention graph. Every intervened node is split: the random
// half keeps the incoming edges (and the original index), the fixed half
// keeps the outgoing edges. Fixed halves never lie on d-connecting paths and
// may not appear in query sets.
struct Swig {
  Dag graph;                 // contains original + fixed-half nodes
  std::vector<bool> fixed;   // per node of `graph`
  std::vector<int> origin;   // fixed-half index -> original node index
  std::vector<int> values;   // intervention value per fixed half (parallel)
};

Swig build_swig(const Dag& g, const std::vector<std::pair<int, int>>&
                                  interventions /* (node, value) */);

// ---------------------------------------------------------------------------
// d-separation. Sets must be disjoint; members must be valid non-fixed nodes.
bool d_separated(const Dag& g, const std::vector<int>& x,
                 const std::vector<int>& y, const std::vector<int>& cond);
bool d_separated(const Swig& g, const std::vector<int>& x,
                 const std::vector<int>& y, const std::vector<int>& cond);

// An open trail witnessing d-connection (node sequence from some x to some
// y), or nullopt when d-separated.
std::optional<std::vector<int>> find_open_trail(const Dag& g,
                                                const std::vector<int>& x,
                                                const std::vector<int>& y,
                                                const std::vector<int>& cond);
std::optional<std::vector<int>> find_open_trail(const Swig& g,
                                                const std::vector<int>& x,
                                                const std::vector<int>& y,
                                                const std::vector<int>& cond);

// ---------------------------------------------------------------------------
// Encoding conversion: from a treatment-centered graph with A_Y/A_D nodes at
// every k = 1..K+1 to the strategy-centered graph over Z_Y, Z_D, R_1..R_{K+1}.
// For each child X of A_{W,k}: add Z_W -> X and (if X != R_k's image) R_k -> X;
// each parent of A_{W,k} gains an edge into R_k; Z_W -> R_k always; edges not
// touching treatment nodes are retained. Rejects graphs that are already
// strategy-centered.
Dag convert_to_strategy_centered(const Dag& g);

// Split unsplit A_k nodes into co-located A_{Y,k}, A_{D,k} pairs (duplicating
// parent and child edges); convenience for graphs authored with plain A.
Dag split_plain_treatment(const Dag& g);

// ---------------------------------------------------------------------------
// Dismissible-component conditions.

struct DccPartition {
  // Block per node index; only meaningful for L-role nodes. Values:
  // CovariateBlock-style 0 = D block, 1 = Y block.
  std::vector<int> block;

  static DccPartition from_roles(const Dag& g);  // L_D -> D, L_Y -> Y, L -> D
};

struct DccItem {
  int k = 0;
  int condition = 0;  // 1..4
  bool pass = false;
  bool vacuous = false;          // required variable absent from the graph
  std::vector<int> witness;      // open trail on failure
  std::string description;
};

struct DccReport {
  bool all_pass = true;
  std::vector<DccItem> items;
};

// Strategy-centered form: g contains Z_Y, Z_D and R nodes; the four
// independencies are read as d-separations in the SWIG under interventions
// setting every C_k = 0 and R_k = 1 (the Z components stay random and enter
// the conditioning sets).
DccReport check_dcc(const Dag& g, const DccPartition& partition, int K);

// Treatment-centered form: same conditions phrased with A_{Y,k}, A_{D,k}
// histories; SWIG intervenes on C nodes only.
DccReport check_dcc_treatment(const Dag& g, const DccPartition& partition,
                              int K);

// ---------------------------------------------------------------------------
// Partial isolation. For Z_Y: every directed path from Z_Y to any D_k must
// pass through an intermediate node among {Y_1..Y_K, R_1..R_{K+1},
// C_1..C_{K+1}} (endpoints excluded); for Z_D: paths to any Y_k must pass
// through {D_1..D_{K+1}, R_1..R_{K+1}, C_1..C_{K+1}}. Deterministic edges are
// not causal pathways and are ignored.
struct IsolationResult {
  bool holds = true;
  std::vector<int> witness;  // violating directed path when holds == false
};

IsolationResult check_partial_isolation(const Dag& g, NodeRole which);

}  // namespace sepeff
