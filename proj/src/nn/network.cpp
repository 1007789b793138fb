#include "aim/nn/network.hpp"

#include <cmath>
#include <stdexcept>

namespace aim::nn {

GraphBatch make_batch(std::span<const SceneGraph* const> graphs) {
  if (graphs.empty()) throw std::invalid_argument("make_batch: no graphs");
  GraphBatch b;
  int n = 0;
  int m = 0;
  for (const auto* g : graphs) {
    n += static_cast<int>(g->vertex_count());
    m += static_cast<int>(g->edge_count());
  }
  b.vertex.resize(n, 4);
  b.edge.resize(m, 3);
  b.graphs = static_cast<int>(graphs.size());
  b.av_offset.push_back(0);
  int vbase = 0;
  int erow = 0;
  for (int gi = 0; gi < b.graphs; ++gi) {
    const SceneGraph& g = *graphs[static_cast<std::size_t>(gi)];
    for (std::size_t i = 0; i < g.vertex_count(); ++i) {
      const auto f = normalized(g.vertices[i]);
      for (int c = 0; c < 4; ++c) {
        b.vertex(vbase + static_cast<int>(i), c) = static_cast<Scalar>(f[static_cast<std::size_t>(c)]);
      }
      b.graph_of_vertex.push_back(gi);
    }
    for (const auto& e : g.edges) {
      const auto f = normalized(e.feature);
      for (int c = 0; c < 3; ++c) b.edge(erow, c) = static_cast<Scalar>(f[static_cast<std::size_t>(c)]);
      b.src.push_back(vbase + e.src);
      b.dst.push_back(vbase + e.dst);
      b.type.push_back(e.type());
      b.type_edges[static_cast<std::size_t>(e.type())].push_back(erow);
      b.type_dst[static_cast<std::size_t>(e.type())].push_back(vbase + e.dst);
      ++erow;
    }
    for (int a : g.av_index) b.av_rows.push_back(vbase + a);
    b.av_offset.push_back(static_cast<int>(b.av_rows.size()));
    vbase += static_cast<int>(g.vertex_count());
  }
  return b;
}

GraphBatch make_batch(const SceneGraph& graph) {
  const SceneGraph* p = &graph;
  return make_batch(std::span<const SceneGraph* const>(&p, 1));
}

namespace {

void uniform_init(Parameter& p, int fan_in, InitRng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<Scalar>(u(rng));
  p.zero_grad();
}

Parameter make_param(const std::string& name, int rows, int cols) {
  return Parameter(name, Matrix::Zero(rows, cols));
}

}  // namespace

Linear::Linear(std::string name, int in, int out)
    : W(make_param(name + ".W", in, out)), b(make_param(name + ".b", 1, out)) {}

void Linear::init(InitRng& rng) {
  uniform_init(W, static_cast<int>(W.value.rows()), rng);
  uniform_init(b, static_cast<int>(W.value.rows()), rng);
}

Var Linear::forward(Tape& t, Var x) {
  return add_row(matmul(x, t.parameter(W)), t.parameter(b));
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&W);
  out.push_back(&b);
}

RgcnLayer::RgcnLayer(std::string name, int in, int edge_dim, int out)
    : root_W(make_param(name + ".root_W", in, out)), root_b(make_param(name + ".root_b", 1, out)) {
  for (int r = 0; r < kEdgeTypeCount; ++r) {
    theta[static_cast<std::size_t>(r)] =
        make_param(name + ".theta" + std::to_string(r), in + edge_dim, out);
  }
}

void RgcnLayer::init(InitRng& rng) {
  const int in = static_cast<int>(root_W.value.rows());
  uniform_init(root_W, in, rng);
  uniform_init(root_b, in, rng);
  for (auto& th : theta) uniform_init(th, static_cast<int>(th.value.rows()), rng);
}

Var RgcnLayer::forward(Tape& t, Var h, Var g, const GraphBatch& batch) {
  Var out = add_row(matmul(h, t.parameter(root_W)), t.parameter(root_b));
  if (batch.edge_count() > 0) {
    Var msg_in = concat_cols(gather_rows(h, batch.src), g);
    for (int r = 0; r < kEdgeTypeCount; ++r) {
      const auto& rows = batch.type_edges[static_cast<std::size_t>(r)];
      if (rows.empty()) continue;
      Var msg = matmul(gather_rows(msg_in, rows), t.parameter(theta[static_cast<std::size_t>(r)]));
      out = add(out, scatter_mean_rows(msg, batch.type_dst[static_cast<std::size_t>(r)],
                                       batch.vertex_count()));
    }
  }
  return relu(out);
}

void RgcnLayer::collect(std::vector<Parameter*>& out) {
  out.push_back(&root_W);
  out.push_back(&root_b);
  for (auto& th : theta) out.push_back(&th);
}

GatLayer::GatLayer(std::string name, int in, int edge_dim, int out, Scalar s)
    : W(make_param(name + ".W", in, out)),
      W_edge(make_param(name + ".W_edge", edge_dim, out)),
      attn(make_param(name + ".attn", 3 * out, 1)),
      W_self(make_param(name + ".W_self", in, out)),
      b(make_param(name + ".b", 1, out)),
      slope(s) {}

void GatLayer::init(InitRng& rng) {
  const int in = static_cast<int>(W.value.rows());
  uniform_init(W, in, rng);
  uniform_init(W_edge, static_cast<int>(W_edge.value.rows()), rng);
  uniform_init(attn, static_cast<int>(attn.value.rows()), rng);
  uniform_init(W_self, in, rng);
  uniform_init(b, in, rng);
}

Var GatLayer::forward(Tape& t, Var h, Var g, const GraphBatch& batch) {
  Var out = add_row(matmul(h, t.parameter(W_self)), t.parameter(b));
  if (batch.edge_count() > 0) {
    Var wh = matmul(h, t.parameter(W));
    Var wh_src = gather_rows(wh, batch.src);
    Var z = concat_cols(concat_cols(gather_rows(wh, batch.dst), wh_src),
                        matmul(g, t.parameter(W_edge)));
    Var logits = leaky_relu(matmul(z, t.parameter(attn)), slope);
    Var alpha = segment_softmax(logits, batch.dst, batch.vertex_count());
    out = add(out, scatter_add_rows(mul_rows(wh_src, alpha), batch.dst, batch.vertex_count()));
  }
  return relu(out);
}

void GatLayer::collect(std::vector<Parameter*>& out) {
  for (Parameter* p : {&W, &W_edge, &attn, &W_self, &b}) out.push_back(p);
}

GraphTrunk::GraphTrunk(const std::string& prefix, int vertex_in, const NetworkConfig& cfg)
    : v_enc(prefix + ".v_enc", vertex_in, cfg.hidden),
      e_enc(prefix + ".e_enc", 3, cfg.hidden),
      conv1(prefix + ".conv1", cfg.hidden, cfg.hidden, cfg.hidden),
      conv2(prefix + ".conv2", cfg.hidden, cfg.hidden, cfg.hidden, cfg.attention_slope),
      conv3(prefix + ".conv3", cfg.hidden, cfg.hidden, cfg.hidden) {}

void GraphTrunk::init(InitRng& rng) {
  v_enc.init(rng);
  e_enc.init(rng);
  conv1.init(rng);
  conv2.init(rng);
  conv3.init(rng);
}

Var GraphTrunk::forward(Tape& t, Var x, const GraphBatch& batch) {
  Var h = relu(v_enc.forward(t, x));
  Var g = relu(e_enc.forward(t, t.constant(batch.edge)));
  h = conv1.forward(t, h, g, batch);
  h = conv2.forward(t, h, g, batch);
  return conv3.forward(t, h, g, batch);
}

void GraphTrunk::collect(std::vector<Parameter*>& out) {
  v_enc.collect(out);
  e_enc.collect(out);
  conv1.collect(out);
  conv2.collect(out);
  conv3.collect(out);
}

Actor::Actor(const NetworkConfig& cfg, const std::string& name)
    : cfg_(cfg),
      trunk_(name, 4, cfg),
      dec1_(name + ".dec1", cfg.hidden, cfg.hidden),
      dec2_(name + ".dec2", cfg.hidden, 1) {}

void Actor::init(InitRng& rng) {
  trunk_.init(rng);
  dec1_.init(rng);
  dec2_.init(rng);
}

Var Actor::forward(Tape& t, const GraphBatch& batch) {
  if (batch.av_count() == 0) return t.constant(Matrix(0, 1));
  Var h = trunk_.forward(t, t.constant(batch.vertex), batch);
  Var hav = gather_rows(h, batch.av_rows);
  return tanh(dec2_.forward(t, relu(dec1_.forward(t, hav))));
}

std::vector<Parameter*> Actor::parameters() {
  std::vector<Parameter*> out;
  trunk_.collect(out);
  dec1_.collect(out);
  dec2_.collect(out);
  return out;
}

Critic::Critic(const NetworkConfig& cfg, const std::string& name)
    : cfg_(cfg),
      trunk_(name, 5, cfg),
      dec1_(name + ".dec1", cfg.hidden, cfg.hidden),
      dec2_(name + ".dec2", cfg.hidden, 1) {}

void Critic::init(InitRng& rng) {
  trunk_.init(rng);
  dec1_.init(rng);
  dec2_.init(rng);
}

Var Critic::forward(Tape& t, const GraphBatch& batch, Var actions) {
  if (actions.rows() != batch.av_count() || actions.cols() != 1) {
    throw std::invalid_argument("critic: one action per AV required");
  }
  Var x = t.constant(batch.vertex);
  Var a_col = batch.av_count() > 0
                  ? scatter_add_rows(actions, batch.av_rows, batch.vertex_count())
                  : t.constant(Matrix::Zero(batch.vertex_count(), 1));
  Var h = trunk_.forward(t, concat_cols(x, a_col), batch);
  Var pooled = scatter_mean_rows(h, batch.graph_of_vertex, batch.graphs);
  return dec2_.forward(t, relu(dec1_.forward(t, pooled)));
}

std::vector<Parameter*> Critic::parameters() {
  std::vector<Parameter*> out;
  trunk_.collect(out);
  dec1_.collect(out);
  dec2_.collect(out);
  return out;
}

std::vector<double> act(Actor& actor, const SceneGraph& graph) {
  if (graph.av_index.empty()) return {};
  Tape t;
  const GraphBatch b = make_batch(graph);
  const Matrix& y = actor.forward(t, b).value();
  std::vector<double> out(static_cast<std::size_t>(y.rows()));
  for (Eigen::Index i = 0; i < y.rows(); ++i) out[static_cast<std::size_t>(i)] = static_cast<double>(y(i, 0));
  return out;
}

std::size_t parameter_count(const std::vector<Parameter*>& params) {
  std::size_t n = 0;
  for (const auto* p : params) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void zero_grad(const std::vector<Parameter*>& params) {
  for (auto* p : params) p->zero_grad();
}

void soft_update(const std::vector<Parameter*>& target, const std::vector<Parameter*>& source,
                 Scalar tau) {
  if (target.size() != source.size()) throw std::invalid_argument("soft_update: size mismatch");
  for (std::size_t i = 0; i < target.size(); ++i) {
    target[i]->value = tau * source[i]->value + (1 - tau) * target[i]->value;
  }
}

void copy_values(const std::vector<Parameter*>& target, const std::vector<Parameter*>& source) {
  if (target.size() != source.size()) throw std::invalid_argument("copy_values: size mismatch");
  for (std::size_t i = 0; i < target.size(); ++i) target[i]->value = source[i]->value;
}

Adam::Adam(std::vector<Parameter*> params, Scalar lr, Scalar beta1, Scalar beta2, Scalar eps)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
  rebind(std::move(params));
}

void Adam::rebind(std::vector<Parameter*> params) {
  params_ = std::move(params);
  if (m_.size() != params_.size()) {
    m_.clear();
    v_.clear();
    for (auto* p : params_) {
      m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
}

void Adam::step() {
  ++t_;
  const Scalar c1 = 1 - std::pow(b1_, static_cast<Scalar>(t_));
  const Scalar c2 = 1 - std::pow(b2_, static_cast<Scalar>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    m_[i] = b1_ * m_[i] + (1 - b1_) * p.grad;
    v_[i] = b2_ * v_[i] + (1 - b2_) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

}  // namespace aim::nn
