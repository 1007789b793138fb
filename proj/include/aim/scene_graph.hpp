#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aim/layout.hpp"
#include "aim/vehicle.hpp"

namespace aim {

enum class EdgeRelation : int { same_lane = 0, crossing = 1 };
enum class EdgeAutomation : int { av_av = 0, av_mv = 1, mv_av = 2 };

inline constexpr int kEdgeTypeCount = 6;

inline int edge_type_index(EdgeRelation rel, EdgeAutomation aut) {
  return static_cast<int>(rel) * 3 + static_cast<int>(aut);
}
std::string edge_type_name(int type);

/// Raw vertex features [s, v, a, c]; s is the signed arc length to the stop
/// position.
struct VertexFeature {
  double s = 0.0;
  double v = 0.0;
  double a = 0.0;
  double c = 0.0;
};

/// Raw edge features [1/d, chi, pr] seen from the source vehicle.
struct EdgeFeature {
  double inv_d = 0.0;
  double chi = 0.0;
  double pr = 0.0;
};

struct GraphEdge {
  int src = 0;
  int dst = 0;
  EdgeFeature feature;
  EdgeRelation rel = EdgeRelation::same_lane;
  EdgeAutomation aut = EdgeAutomation::av_av;

  int type() const { return edge_type_index(rel, aut); }
};

struct SceneGraph {
  std::vector<VehicleId> ids;
  std::vector<VertexFeature> vertices;
  std::vector<GraphEdge> edges;
  std::vector<int> av_index;  // vertex positions of AVs, in input order

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t edge_count() const { return edges.size(); }
  bool is_av(int vertex) const { return vertices.at(static_cast<std::size_t>(vertex)).c > 0.5; }
};

struct GraphParams {
  double min_distance = 1.0;  // floor applied before inverting d
  /// Crossing interactions end once a vehicle's rear has passed every
  /// shared conflict point by this margin (m).
  double clearance = 1.0;
};

/// Right-of-way rank of a path (same as priority_rank).
int priority_value(PathId path, const IntersectionLayout& layout);

/// Clamped rank difference in {-1, 0, 1}.
int priority_relation(int pr_i, int pr_j);

/// Highest rank among the maneuvers of the MV's approach that conflict with
/// `av_path`; nullopt if none does.
std::optional<int> worst_case_priority(const VehicleState& mv, PathId av_path,
                                       const IntersectionLayout& layout);

SceneGraph build_graph(std::span<const VehicleState> observation,
                       const IntersectionLayout& layout, const GraphParams& params = {});

/// Network-facing scaling: s/100, v/15, a/4, chi/pi.
inline constexpr std::array<double, 4> kVertexScale{100.0, 15.0, 4.0, 1.0};
inline constexpr std::array<double, 3> kEdgeScale{1.0, 3.14159265358979323846, 1.0};

std::array<double, 4> normalized(const VertexFeature& f);
std::array<double, 3> normalized(const EdgeFeature& f);

/// Line-oriented text form:
///   graph <n> <m>
///   vertex <index> <id> <AV|MV> <s> <v> <a> <c>
///   edge <src> <dst> <type-name> <inv_d> <chi> <pr>
void write_graph_text(std::ostream& out, const SceneGraph& g);
std::string graph_to_text(const SceneGraph& g);
SceneGraph read_graph_text(std::istream& in);

}  // namespace aim
