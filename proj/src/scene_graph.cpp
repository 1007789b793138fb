#include "aim/scene_graph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "aim/config.hpp"
#include "aim/world.hpp"

namespace aim {

std::string edge_type_name(int type) {
  static const std::array<const char*, kEdgeTypeCount> names{
      "same_lane/AV-AV", "same_lane/AV-MV", "same_lane/MV-AV",
      "crossing/AV-AV",  "crossing/AV-MV",  "crossing/MV-AV"};
  return names.at(static_cast<std::size_t>(type));
}

int priority_value(PathId path, const IntersectionLayout& layout) {
  return priority_rank(layout, path);
}

int priority_relation(int pr_i, int pr_j) { return std::max(std::min(pr_i - pr_j, 1), -1); }

namespace {

// Relation between two vehicles if they still interact on the given paths.
std::optional<EdgeRelation> interaction(PathId pa, double sa, double la, PathId pb, double sb,
                                        double lb, const IntersectionLayout& layout,
                                        const GraphParams& params) {
  switch (layout.relation(pa, pb)) {
    case PathRelation::disjoint:
      return std::nullopt;
    case PathRelation::crossing:
      for (const auto& cp : layout.conflicts(pa, pb)) {
        if (sa <= cp.s_a + la / 2.0 + params.clearance &&
            sb <= cp.s_b + lb / 2.0 + params.clearance) {
          return EdgeRelation::crossing;
        }
      }
      return std::nullopt;
    case PathRelation::same_lane:
      if (pa == pb || layout.shares_exit(pa, pb)) return EdgeRelation::same_lane;
      // shared entry lane, diverging inside the box
      if (sa < layout.path(pa).region_end && sb < layout.path(pb).region_end) {
        return EdgeRelation::same_lane;
      }
      return std::nullopt;
  }
  return std::nullopt;
}

struct PairLink {
  EdgeRelation rel;
  int rank_a;  // rank used for the first vehicle
  int rank_b;
};

// Interaction of two vehicles where at least `a` is an AV. An MV with hidden
// intention is linked through every candidate maneuver that still interacts.
std::optional<PairLink> link(const VehicleState& a, const VehicleState& b,
                             const IntersectionLayout& layout, const GraphParams& params) {
  const int rank_a = priority_value(a.path_id, layout);
  if (b.is_av() || b.intention_observable) {
    auto rel = interaction(a.path_id, a.s, a.length, b.path_id, b.s, b.length, layout, params);
    if (!rel) return std::nullopt;
    return PairLink{*rel, rank_a, priority_value(b.path_id, layout)};
  }
  const Approach origin = layout.path(b.path_id).origin;
  bool any = false;
  bool crossing = false;
  int worst = -1;
  for (Turn t : kTurns) {
    const PathId cand = layout.path_id(origin, t);
    auto rel = interaction(a.path_id, a.s, a.length, cand, b.s, b.length, layout, params);
    if (!rel) continue;
    any = true;
    crossing = crossing || *rel == EdgeRelation::crossing;
    worst = std::max(worst, priority_value(cand, layout));
  }
  if (!any) return std::nullopt;
  EdgeRelation rel = crossing ? EdgeRelation::crossing : EdgeRelation::same_lane;
  if (layout.path(a.path_id).origin == origin) rel = EdgeRelation::same_lane;
  return PairLink{rel, rank_a, worst};
}

EdgeFeature edge_feature(const VehicleState& src, const VehicleState& dst, int rank_src,
                         int rank_dst, const GraphParams& params) {
  const Vec2 delta = dst.position() - src.position();
  const double d = std::max(params.min_distance, delta.norm());
  EdgeFeature f;
  f.inv_d = 1.0 / d;
  f.chi = wrap_angle(std::atan2(delta.y, delta.x) - src.heading);
  f.pr = priority_relation(rank_src, rank_dst);
  return f;
}

}  // namespace

std::optional<int> worst_case_priority(const VehicleState& mv, PathId av_path,
                                       const IntersectionLayout& layout) {
  if (mv.intention_observable) {
    throw std::invalid_argument("worst_case_priority: MV intention is observable");
  }
  const Approach origin = layout.path(mv.path_id).origin;
  std::optional<int> worst;
  for (Turn t : kTurns) {
    const PathId cand = layout.path_id(origin, t);
    if (cand != av_path && layout.relation(cand, av_path) == PathRelation::disjoint) continue;
    const int r = priority_value(cand, layout);
    if (!worst || r > *worst) worst = r;
  }
  return worst;
}

SceneGraph build_graph(std::span<const VehicleState> observation,
                       const IntersectionLayout& layout, const GraphParams& params) {
  SceneGraph g;
  const auto n = observation.size();
  g.ids.reserve(n);
  g.vertices.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& veh = observation[i];
    g.ids.push_back(veh.id);
    g.vertices.push_back({distance_past_stop(veh, layout), veh.v, veh.a_meas,
                          veh.is_av() ? 1.0 : 0.0});
    if (veh.is_av()) g.av_index.push_back(static_cast<int>(i));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = observation[i];
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto& b = observation[j];
      if (!a.is_av() && !b.is_av()) continue;
      // the AV side decides which maneuvers of a hidden-intention MV count
      const bool a_first = a.is_av();
      auto pl = a_first ? link(a, b, layout, params) : link(b, a, layout, params);
      if (!pl) continue;
      const int rank_a = a_first ? pl->rank_a : pl->rank_b;
      const int rank_b = a_first ? pl->rank_b : pl->rank_a;
      GraphEdge e;
      e.src = static_cast<int>(i);
      e.dst = static_cast<int>(j);
      e.rel = pl->rel;
      e.aut = a.is_av() ? (b.is_av() ? EdgeAutomation::av_av : EdgeAutomation::av_mv)
                        : EdgeAutomation::mv_av;
      e.feature = edge_feature(a, b, rank_a, rank_b, params);
      g.edges.push_back(e);
    }
  }
  return g;
}

std::array<double, 4> normalized(const VertexFeature& f) {
  return {f.s / kVertexScale[0], f.v / kVertexScale[1], f.a / kVertexScale[2],
          f.c / kVertexScale[3]};
}

std::array<double, 3> normalized(const EdgeFeature& f) {
  return {f.inv_d / kEdgeScale[0], f.chi / kEdgeScale[1], f.pr / kEdgeScale[2]};
}

void write_graph_text(std::ostream& out, const SceneGraph& g) {
  out << "graph " << g.vertex_count() << ' ' << g.edge_count() << '\n';
  for (std::size_t i = 0; i < g.vertex_count(); ++i) {
    const auto& f = g.vertices[i];
    out << "vertex " << i << ' ' << g.ids[i] << ' ' << (f.c > 0.5 ? "AV" : "MV") << ' '
        << format_double(f.s) << ' ' << format_double(f.v) << ' ' << format_double(f.a) << ' '
        << format_double(f.c) << '\n';
  }
  for (const auto& e : g.edges) {
    out << "edge " << e.src << ' ' << e.dst << ' ' << edge_type_name(e.type()) << ' '
        << format_double(e.feature.inv_d) << ' ' << format_double(e.feature.chi) << ' '
        << format_double(e.feature.pr) << '\n';
  }
}

std::string graph_to_text(const SceneGraph& g) {
  std::ostringstream ss;
  write_graph_text(ss, g);
  return ss.str();
}

SceneGraph read_graph_text(std::istream& in) {
  auto fail = [](const std::string& what) {
    throw std::runtime_error("graph text: " + what);
  };
  std::string tag;
  std::size_t n = 0;
  std::size_t m = 0;
  if (!(in >> tag >> n >> m) || tag != "graph") fail("missing header");
  SceneGraph g;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t idx = 0;
    VehicleId id = 0;
    std::string kind;
    VertexFeature f;
    if (!(in >> tag >> idx >> id >> kind >> f.s >> f.v >> f.a >> f.c) || tag != "vertex" ||
        idx != i) {
      fail("bad vertex line " + std::to_string(i));
    }
    g.ids.push_back(id);
    g.vertices.push_back(f);
    if (kind == "AV") g.av_index.push_back(static_cast<int>(i));
  }
  for (std::size_t k = 0; k < m; ++k) {
    GraphEdge e;
    std::string type;
    if (!(in >> tag >> e.src >> e.dst >> type >> e.feature.inv_d >> e.feature.chi >>
          e.feature.pr) ||
        tag != "edge") {
      fail("bad edge line " + std::to_string(k));
    }
    int t = -1;
    for (int c = 0; c < kEdgeTypeCount; ++c) {
      if (edge_type_name(c) == type) t = c;
    }
    if (t < 0) fail("unknown edge type " + type);
    e.rel = static_cast<EdgeRelation>(t / 3);
    e.aut = static_cast<EdgeAutomation>(t % 3);
    g.edges.push_back(e);
  }
  return g;
}

}  // namespace aim
