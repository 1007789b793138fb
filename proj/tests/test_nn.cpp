#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <map>
#include <numeric>
#include <sstream>

#include "aim/nn/checkpoint.hpp"
#include "aim/nn/network.hpp"
#include "aim/scene_graph.hpp"
#include "support/gradcheck.hpp"
#include "support/random_scene.hpp"

using namespace aim;
using namespace aim::nn;

namespace {

const IntersectionLayout& layout() {
  static const IntersectionLayout l = build_default_layout();
  return l;
}

SceneGraph graph_with_avs(std::mt19937_64& rng, int n) {
  for (;;) {
    auto scene = testkit::random_scene(layout(), n, rng);
    SceneGraph g = build_graph(scene, layout());
    if (!g.av_index.empty() && !g.edges.empty()) return g;
  }
}

Matrix column(std::initializer_list<Scalar> xs) {
  Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (Scalar x : xs) m(i++, 0) = x;
  return m;
}

}  // namespace

TEST(Tape, TanhGradientAtZero) {
  Tape t;
  Parameter x("x", Matrix::Zero(1, 1));
  t.backward(tanh(t.parameter(x)));
  EXPECT_DOUBLE_EQ(x.grad(0, 0), 1.0);
}

TEST(Tape, ZeroSeedGivesZeroGradients) {
  Parameter w("w", Matrix::Constant(2, 2, 0.5));
  Tape t;
  Var y = relu(matmul(t.constant(Matrix::Ones(3, 2)), t.parameter(w)));
  t.backward(y, Matrix::Zero(3, 2));
  EXPECT_EQ(w.grad.norm(), 0.0);
}

TEST(Tape, BackwardWithoutForwardIsRejected) {
  Tape t;
  Tape other;
  Var v = other.constant(Matrix::Ones(1, 1));
  EXPECT_THROW(t.backward(v), std::logic_error);
}

TEST(Tape, SegmentSoftmaxSingletonAndPair) {
  Tape t;
  Var x = t.constant(column({3.0, -1.0, -1.0}));
  const Matrix& a = segment_softmax(x, {0, 1, 1}, 2).value();
  EXPECT_DOUBLE_EQ(a(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(a(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(a(2, 0), 0.5);
}

TEST(Tape, EveryOpMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  auto rnd = [&](int r, int c) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n01(rng);
    return m;
  };
  Parameter a("a", rnd(4, 3));
  Parameter b("b", rnd(3, 2));
  Parameter bias("bias", rnd(1, 2));
  Parameter w("w", rnd(4, 1));
  const Matrix weights = rnd(3, 4);
  auto loss = [&](Tape& t) {
    Var x = add_row(matmul(t.parameter(a), t.parameter(b)), t.parameter(bias));
    x = concat_cols(tanh(x), leaky_relu(x, 0.2));
    x = mul_rows(x, segment_softmax(t.parameter(w), {0, 0, 1, 1}, 2));
    x = scatter_mean_rows(x, {0, 2, 2, 1}, 3);
    x = add(x, scatter_add_rows(gather_rows(x, {2, 0, 1}), {1, 1, 0}, 3));
    x = sub(mul(x, x), scale(x, 0.3));
    return mean(mul(x, t.constant(weights)));
  };
  const auto res = testkit::check_gradients({&a, &b, &bias, &w}, loss);
  EXPECT_LT(res.max_rel_error, 1e-6) << res.worst;
  EXPECT_GT(res.checked, 20u);
}

TEST(Rgcn, NoEdgesLeavesRootTerm) {
  RgcnLayer layer("l", 2, 1, 2);
  layer.root_W.value << 1, -1, 2, 0.5;
  layer.root_b.value << 0.1, -3;
  SceneGraph g;
  g.ids = {1, 2};
  g.vertices = {{0, 0, 0, 1}, {0, 0, 0, 1}};
  const GraphBatch batch = make_batch(g);
  Tape t;
  Matrix h(2, 2);
  h << 1, 2, -1, 0.5;
  const Matrix out = layer.forward(t, t.constant(h), t.constant(Matrix(0, 2)), batch).value();
  EXPECT_DOUBLE_EQ(out(0, 0), 5.1);
  EXPECT_DOUBLE_EQ(out(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(out(1, 0), 0.1);
  EXPECT_DOUBLE_EQ(out(1, 1), 0.0);
}

TEST(Rgcn, TwoVertexGolden) {
  RgcnLayer layer("l", 2, 1, 2);
  layer.root_W.value = Matrix::Identity(2, 2);
  layer.theta[3].value << 1, 0, 0, 1, 2, -2;
  SceneGraph g;
  g.ids = {1, 2};
  g.vertices = {{0, 0, 0, 1}, {0, 0, 0, 1}};
  GraphEdge e;
  e.src = 0;
  e.dst = 1;
  e.rel = EdgeRelation::crossing;
  e.aut = EdgeAutomation::av_av;
  g.edges = {e};
  const GraphBatch batch = make_batch(g);
  Tape t;
  Matrix h(2, 2);
  h << 1, 2, 3, -1;
  Matrix ge(1, 1);
  ge << 0.5;
  const Matrix out = layer.forward(t, t.constant(h), t.constant(ge), batch).value();
  // vertex 1: (3,-1) + (1,2,0.5) * theta3 = (3,-1) + (2,1) = (5,0)
  EXPECT_DOUBLE_EQ(out(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(out(0, 1), 2.0);
  EXPECT_DOUBLE_EQ(out(1, 0), 5.0);
  EXPECT_DOUBLE_EQ(out(1, 1), 0.0);
}

namespace {

SceneGraph tiny_graph(std::vector<std::pair<int, int>> edges, int n) {
  SceneGraph g;
  for (int i = 0; i < n; ++i) {
    g.ids.push_back(static_cast<VehicleId>(i + 1));
    g.vertices.push_back({0, 0, 0, 1});
    g.av_index.push_back(i);
  }
  for (auto [s, d] : edges) {
    GraphEdge e;
    e.src = s;
    e.dst = d;
    g.edges.push_back(e);
  }
  return g;
}

// Plain-loop GAT forward used as an independent oracle.
Matrix gat_oracle(const GatLayer& l, const Matrix& h, const Matrix& ge, const SceneGraph& g) {
  const Matrix wh = h * l.W.value;
  const Matrix we = ge * l.W_edge.value;
  const auto d = wh.cols();
  Matrix out = (h * l.W_self.value).rowwise() + l.b.value.row(0);
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    std::vector<double> logit;
    std::vector<std::size_t> ids;
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
      if (g.edges[k].dst != i) continue;
      double z = 0;
      const auto j = g.edges[k].src;
      for (Eigen::Index c = 0; c < d; ++c) {
        z += l.attn.value(c, 0) * wh(i, c) + l.attn.value(d + c, 0) * wh(j, c) +
             l.attn.value(2 * d + c, 0) * we(static_cast<Eigen::Index>(k), c);
      }
      logit.push_back(z > 0 ? z : l.slope * z);
      ids.push_back(k);
    }
    double total = 0;
    for (double z : logit) total += std::exp(z);
    for (std::size_t q = 0; q < ids.size(); ++q) {
      out.row(i) += std::exp(logit[q]) / total * wh.row(g.edges[ids[q]].src);
    }
  }
  return out.cwiseMax(0.0);
}

}  // namespace

TEST(Gat, SingleInEdgeHasUnitWeight) {
  GatLayer l("g", 2, 1, 2, 0.2);
  InitRng rng(1);
  l.init(rng);
  l.W_self.value.setZero();
  l.b.value.setConstant(10.0);
  const SceneGraph g = tiny_graph({{0, 1}}, 2);
  const GraphBatch batch = make_batch(g);
  Tape t;
  Matrix h(2, 2);
  h << 0.3, -0.7, 1.1, 0.2;
  const Matrix out = l.forward(t, t.constant(h), t.constant(Matrix::Ones(1, 1)), batch).value();
  const Matrix expect = (h.row(0) * l.W.value).array() + 10.0;
  EXPECT_NEAR((out.row(1) - expect).norm(), 0.0, 1e-12);
}

TEST(Gat, IdenticalNeighboursShareAttention) {
  GatLayer l("g", 2, 1, 2, 0.2);
  InitRng rng(2);
  l.init(rng);
  l.W_self.value.setZero();
  l.b.value.setConstant(10.0);
  const SceneGraph g = tiny_graph({{0, 2}, {1, 2}}, 3);
  Matrix h(3, 2);
  h << 0.4, 0.9, 0.4, 0.9, -2, 1;
  Tape t;
  const Matrix out = l.forward(t, t.constant(h), t.constant(Matrix::Ones(2, 1)), make_batch(g)).value();
  const Matrix expect = (0.5 * h.row(0) * l.W.value + 0.5 * h.row(1) * l.W.value).array() + 10.0;
  EXPECT_NEAR((out.row(2) - expect).norm(), 0.0, 1e-12);
}

TEST(Gat, ThreeVertexMatchesOracle) {
  GatLayer l("g", 3, 2, 4, 0.2);
  InitRng rng(5);
  l.init(rng);
  const SceneGraph g = tiny_graph({{0, 1}, {2, 1}, {1, 0}, {0, 2}}, 3);
  Matrix h(3, 3);
  h << 0.2, -0.4, 1.0, 0.7, 0.1, -0.3, -0.5, 0.9, 0.6;
  Matrix ge(4, 2);
  ge << 0.5, -0.2, 0.1, 0.8, -0.6, 0.3, 0.9, 0.0;
  Tape t;
  const Matrix out = l.forward(t, t.constant(h), t.constant(ge), make_batch(g)).value();
  EXPECT_NEAR((out - gat_oracle(l, h, ge, g)).norm(), 0.0, 1e-12);
}

TEST(Actor, ShapeBoundsAndSizeIndependence) {
  Actor actor;
  InitRng init(7);
  actor.init(init);
  const auto count = parameter_count(actor.parameters());
  std::mt19937_64 rng(11);
  for (int n : {1, 3, 8, 20}) {
    auto scene = testkit::random_scene(layout(), n, rng);
    const SceneGraph g = build_graph(scene, layout());
    const auto a = act(actor, g);
    ASSERT_EQ(a.size(), g.av_index.size());
    for (double x : a) {
      EXPECT_GE(x, -1.0);
      EXPECT_LE(x, 1.0);
    }
  }
  EXPECT_EQ(parameter_count(actor.parameters()), count);
}

TEST(Actor, PermutationEquivariance) {
  Actor actor;
  InitRng init(8);
  actor.init(init);
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    auto scene = testkit::random_scene(layout(), 6, rng);
    const auto base = act(actor, build_graph(scene, layout()));
    std::vector<int> perm(scene.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<VehicleState> permuted;
    for (int p : perm) permuted.push_back(scene[static_cast<std::size_t>(p)]);
    const auto out = act(actor, build_graph(permuted, layout()));
    // map by vehicle id
    std::map<VehicleId, double> by_id;
    std::size_t k = 0;
    for (const auto& v : scene) {
      if (v.is_av()) by_id[v.id] = base[k++];
    }
    k = 0;
    for (const auto& v : permuted) {
      if (v.is_av()) {
        EXPECT_NEAR(out[k++], by_id.at(v.id), 1e-12);
      }
    }
  }
}

TEST(Critic, PermutationInvarianceAndZeroWeights) {
  Critic critic;
  InitRng init(9);
  critic.init(init);
  std::mt19937_64 rng(13);
  auto scene = testkit::random_scene(layout(), 7, rng, 0.7);
  std::vector<VehicleState> rev(scene.rbegin(), scene.rend());
  const SceneGraph g1 = build_graph(scene, layout());
  const SceneGraph g2 = build_graph(rev, layout());
  Matrix a1(static_cast<Eigen::Index>(g1.av_index.size()), 1);
  for (Eigen::Index i = 0; i < a1.rows(); ++i) a1(i, 0) = 0.1 * static_cast<double>(i) - 0.3;
  Matrix a2 = a1.colwise().reverse();
  Tape t;
  const double q1 = critic.forward(t, make_batch(g1), t.constant(a1)).value()(0, 0);
  const double q2 = critic.forward(t, make_batch(g2), t.constant(a2)).value()(0, 0);
  EXPECT_NEAR(q1, q2, 1e-6);
  EXPECT_TRUE(std::isfinite(q1));

  for (auto* p : critic.parameters()) p->value.setZero();
  auto params = critic.parameters();
  params.back()->value(0, 0) = 0.75;  // dec2 bias
  const double q0 = critic.forward(t, make_batch(g1), t.constant(a1)).value()(0, 0);
  EXPECT_DOUBLE_EQ(q0, 0.75);
}

TEST(Batching, DisjointUnionMatchesSingleGraphs) {
  Actor actor;
  Critic critic;
  InitRng init(10);
  actor.init(init);
  critic.init(init);
  std::mt19937_64 rng(14);
  const SceneGraph g1 = graph_with_avs(rng, 5);
  const SceneGraph g2 = graph_with_avs(rng, 8);
  std::vector<const SceneGraph*> both{&g1, &g2};
  const GraphBatch b = make_batch(both);
  Tape t;
  const Matrix a = actor.forward(t, b).value();
  const Matrix q = critic.forward(t, b, t.constant(a)).value();
  ASSERT_EQ(q.rows(), 2);
  const Matrix a1 = actor.forward(t, make_batch(g1)).value();
  const Matrix a2 = actor.forward(t, make_batch(g2)).value();
  EXPECT_NEAR((a.topRows(a1.rows()) - a1).norm(), 0.0, 1e-6);
  EXPECT_NEAR((a.bottomRows(a2.rows()) - a2).norm(), 0.0, 1e-6);
  EXPECT_NEAR(q(0, 0), critic.forward(t, make_batch(g1), t.constant(a1)).value()(0, 0), 1e-6);
  EXPECT_NEAR(q(1, 0), critic.forward(t, make_batch(g2), t.constant(a2)).value()(0, 0), 1e-6);

  // duplicated graph: two copies give the single-copy outputs
  std::vector<const SceneGraph*> dup{&g1, &g1};
  const Matrix ad = actor.forward(t, make_batch(dup)).value();
  EXPECT_NEAR((ad.topRows(a1.rows()) - ad.bottomRows(a1.rows())).norm(), 0.0, 1e-12);
}

TEST(Gradients, ActorAndCriticMatchFiniteDifferences) {
  NetworkConfig cfg;
  cfg.hidden = 8;
  Actor actor(cfg);
  Critic critic(cfg);
  InitRng init(21);
  actor.init(init);
  critic.init(init);
  std::mt19937_64 rng(22);
  const SceneGraph g = graph_with_avs(rng, 5);
  const GraphBatch batch = make_batch(g);
  Matrix w = Matrix::Random(batch.av_count(), 1);
  auto actor_loss = [&](Tape& t) { return sum(mul(actor.forward(t, batch), t.constant(w))); };
  auto ra = testkit::check_gradients(actor.parameters(), actor_loss);
  EXPECT_LT(ra.max_rel_error, 1e-4) << ra.worst;

  Parameter action("action", Matrix::Random(batch.av_count(), 1) * 0.8);
  auto critic_loss = [&](Tape& t) { return sum(critic.forward(t, batch, t.parameter(action))); };
  auto params = critic.parameters();
  params.push_back(&action);
  auto rc = testkit::check_gradients(params, critic_loss);
  EXPECT_LT(rc.max_rel_error, 1e-4) << rc.worst;
}

TEST(Checkpoint, BitExactRoundTrip) {
  Actor a;
  InitRng init(31);
  a.init(init);
  std::stringstream ss;
  write_checkpoint(ss, a.parameters());
  Actor b;
  read_checkpoint(ss, b.parameters());
  auto pa = a.parameters();
  auto pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    ASSERT_EQ(pa[i]->value.size(), pb[i]->value.size());
    EXPECT_EQ(std::memcmp(pa[i]->value.data(), pb[i]->value.data(),
                          sizeof(Scalar) * static_cast<std::size_t>(pa[i]->value.size())),
              0);
  }
}

TEST(Checkpoint, RejectsForeignData) {
  std::stringstream ss("definitely not a checkpoint");
  Actor a;
  EXPECT_THROW(read_checkpoint(ss, a.parameters()), CheckpointError);
}

TEST(Optim, SoftUpdateIsExact) {
  Parameter a("a", Matrix::Constant(2, 2, 1.0));
  Parameter b("b", Matrix::Constant(2, 2, 3.0));
  soft_update({&a}, {&b}, 0.25);
  EXPECT_DOUBLE_EQ(a.value(1, 1), 0.25 * 3.0 + 0.75 * 1.0);
}
