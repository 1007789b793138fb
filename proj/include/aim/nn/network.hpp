#pragma once

#include <array>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "aim/nn/tape.hpp"
#include "aim/scene_graph.hpp"

namespace aim::nn {

using InitRng = std::mt19937_64;

struct NetworkConfig {
  int hidden = 64;
  Scalar attention_slope = 0.2;  // LeakyReLU slope inside GAT logits
};

/// Disjoint union of one or more scene graphs in network-ready form.
struct GraphBatch {
  Matrix vertex;  // n x 4, normalized features
  Matrix edge;    // m x 3, normalized features
  Index src;
  Index dst;
  Index type;
  std::array<Index, kEdgeTypeCount> type_edges;  // edge rows per type
  std::array<Index, kEdgeTypeCount> type_dst;
  Index graph_of_vertex;
  int graphs = 0;
  Index av_rows;              // AV vertex rows, graph by graph in av_index order
  std::vector<int> av_offset;  // graphs + 1 entries into av_rows

  int vertex_count() const { return static_cast<int>(vertex.rows()); }
  int edge_count() const { return static_cast<int>(edge.rows()); }
  int av_count() const { return static_cast<int>(av_rows.size()); }
};

GraphBatch make_batch(std::span<const SceneGraph* const> graphs);
GraphBatch make_batch(const SceneGraph& graph);

/// y = x W + b
class Linear {
 public:
  Linear() = default;
  Linear(std::string name, int in, int out);
  void init(InitRng& rng);
  Var forward(Tape& t, Var x);
  void collect(std::vector<Parameter*>& out);

  Parameter W;
  Parameter b;
};

/// Relational convolution with edge features:
/// h'_i = ReLU(h_i W_root + b + sum_r mean_{j in N_r(i)} [h_j | g_ji] Theta_r)
class RgcnLayer {
 public:
  RgcnLayer() = default;
  RgcnLayer(std::string name, int in, int edge_dim, int out);
  void init(InitRng& rng);
  Var forward(Tape& t, Var h, Var g, const GraphBatch& batch);
  void collect(std::vector<Parameter*>& out);

  Parameter root_W;
  Parameter root_b;
  std::array<Parameter, kEdgeTypeCount> theta;
};

/// Single-head attention; edge features enter the logits only, edge types
/// are ignored. A self term keeps vertices without in-edges informative:
/// h'_i = ReLU(h_i W_self + b + sum_j alpha_ij h_j W),
/// alpha_ij = softmax_j LeakyReLU([h_i W | h_j W | g_ji W_e] a).
class GatLayer {
 public:
  GatLayer() = default;
  GatLayer(std::string name, int in, int edge_dim, int out, Scalar slope);
  void init(InitRng& rng);
  Var forward(Tape& t, Var h, Var g, const GraphBatch& batch);
  void collect(std::vector<Parameter*>& out);

  Parameter W;
  Parameter W_edge;
  Parameter attn;
  Parameter W_self;
  Parameter b;
  Scalar slope = 0.2;
};

/// Encoders followed by RGCN, GAT, RGCN.
class GraphTrunk {
 public:
  GraphTrunk() = default;
  GraphTrunk(const std::string& prefix, int vertex_in, const NetworkConfig& cfg);
  void init(InitRng& rng);
  Var forward(Tape& t, Var x, const GraphBatch& batch);
  void collect(std::vector<Parameter*>& out);

  Linear v_enc;
  Linear e_enc;
  RgcnLayer conv1;
  GatLayer conv2;
  RgcnLayer conv3;
};

class Actor {
 public:
  explicit Actor(const NetworkConfig& cfg = {}, const std::string& name = "actor");
  void init(InitRng& rng);
  /// Joint action in [-1, 1], one row per AV (batch av_rows order).
  Var forward(Tape& t, const GraphBatch& batch);
  std::vector<Parameter*> parameters();
  const NetworkConfig& config() const { return cfg_; }

 private:
  NetworkConfig cfg_;
  GraphTrunk trunk_;
  Linear dec1_;
  Linear dec2_;
};

class Critic {
 public:
  explicit Critic(const NetworkConfig& cfg = {}, const std::string& name = "critic");
  void init(InitRng& rng);
  /// One value per graph. `actions` holds one row per AV.
  Var forward(Tape& t, const GraphBatch& batch, Var actions);
  std::vector<Parameter*> parameters();

 private:
  NetworkConfig cfg_;
  GraphTrunk trunk_;
  Linear dec1_;
  Linear dec2_;
};

/// Convenience: actor output for a single graph as plain numbers.
std::vector<double> act(Actor& actor, const SceneGraph& graph);

std::size_t parameter_count(const std::vector<Parameter*>& params);
void zero_grad(const std::vector<Parameter*>& params);
/// target <- tau * source + (1 - tau) * target
void soft_update(const std::vector<Parameter*>& target, const std::vector<Parameter*>& source,
                 Scalar tau);
void copy_values(const std::vector<Parameter*>& target, const std::vector<Parameter*>& source);

/// Adam optimizer over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, Scalar lr, Scalar beta1 = 0.9, Scalar beta2 = 0.999,
       Scalar eps = 1e-8);
  void step();
  void rebind(std::vector<Parameter*> params);
  long steps() const { return t_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  Scalar lr_;
  Scalar b1_;
  Scalar b2_;
  Scalar eps_;
  long t_ = 0;
};

}  // namespace aim::nn
