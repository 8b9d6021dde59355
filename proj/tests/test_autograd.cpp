#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "oracles.hpp"
#include "veracity/autograd.hpp"

using namespace veracity;
using ag::Graph;
using ag::Matrix;
using ag::Var;

namespace {

using Op = std::function<Var(Graph&, std::vector<Var>&)>;

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Scalar probe: sum(out .* weights) for fixed random weights.
Var probe(Graph& g, Var out, const Matrix& weights) {
  Var w = ag::cwise_mul(out, g.constant(weights));
  return ag::matmul(ag::matmul(g.constant(Matrix::Ones(1, w.rows())), w), g.constant(Matrix::Ones(w.cols(), 1)));
}

// Compares analytic gradients of every input entry with central differences.
void check_gradients(const Op& op, std::vector<Matrix> inputs, double tol = 1e-6, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::vector<ag::Parameter> params;
  for (std::size_t i = 0; i < inputs.size(); ++i) params.emplace_back("in" + std::to_string(i), inputs[i]);

  Matrix weights;
  auto forward = [&](bool backprop) {
    Graph g;
    std::vector<Var> vars;
    for (auto& p : params) vars.push_back(g.param(p));
    Var out = op(g, vars);
    if (weights.size() == 0) weights = random_matrix(out.rows(), out.cols(), rng);
    Var loss = probe(g, out, weights);
    if (backprop) g.backward(loss);
    return loss.value()(0, 0);
  };
  forward(true);
  for (auto& p : params) {
    const Matrix analytic = p.grad;
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const double numeric = oracle::central_difference([&] { return forward(false); }, p.value.data()[i]);
      EXPECT_NEAR(analytic.data()[i], numeric, tol * std::max(1.0, std::abs(numeric)))
          << p.name << "[" << i << "]";
    }
  }
}

}  // namespace

TEST(Autograd, Matmul) {
  std::mt19937_64 rng(0);
  check_gradients([](Graph&, std::vector<Var>& v) { return ag::matmul(v[0], v[1]); },
                  {random_matrix(3, 4, rng), random_matrix(4, 2, rng)});
}

TEST(Autograd, ElementwiseOps) {
  std::mt19937_64 rng(1);
  const auto a = random_matrix(3, 4, rng);
  const auto b = random_matrix(3, 4, rng);
  check_gradients([](Graph&, std::vector<Var>& v) { return ag::cwise_mul(ag::add(v[0], v[1]), v[0]); }, {a, b});
  check_gradients([](Graph&, std::vector<Var>& v) { return ag::tanh(v[0]); }, {a});
  check_gradients([](Graph&, std::vector<Var>& v) { return ag::sigmoid(v[0]); }, {a});
  check_gradients([](Graph&, std::vector<Var>& v) { return ag::gelu(v[0]); }, {a});
  check_gradients([](Graph&, std::vector<Var>& v) { return ag::relu(v[0]); }, {a});
  check_gradients([](Graph&, std::vector<Var>& v) { return ag::scale(ag::transpose(v[0]), -0.7); }, {a});
}

TEST(Autograd, Broadcasting) {
  std::mt19937_64 rng(2);
  check_gradients([](Graph&, std::vector<Var>& v) { return ag::add_row(v[0], v[1]); },
                  {random_matrix(5, 3, rng), random_matrix(1, 3, rng)});
}

TEST(Autograd, StructuralOps) {
  std::mt19937_64 rng(3);
  const auto a = random_matrix(6, 4, rng);
  const auto b = random_matrix(6, 2, rng);
  check_gradients([](Graph&, std::vector<Var>& v) { return ag::slice_rows(v[0], 1, 3); }, {a});
  check_gradients([](Graph&, std::vector<Var>& v) { return ag::slice_cols(v[0], 2, 2); }, {a});
  check_gradients([](Graph&, std::vector<Var>& v) { return ag::concat_cols({v[0], v[1], v[0]}); }, {a, b});
  check_gradients([](Graph&, std::vector<Var>& v) { return ag::concat_rows({v[0], ag::slice_rows(v[0], 0, 2)}); },
                  {a});
  check_gradients([](Graph&, std::vector<Var>& v) { return ag::gather_rows(v[0], {3, 0, 3, 5}); }, {a});
  check_gradients([](Graph&, std::vector<Var>& v) { return ag::pad_rows(v[0], 2, 1); }, {a});
  check_gradients([](Graph&, std::vector<Var>& v) { return ag::unfold_rows(v[0], 3); }, {a});
}

TEST(Autograd, MaxOverTime) {
  std::mt19937_64 rng(4);
  const auto a = random_matrix(5, 4, rng);
  check_gradients([](Graph&, std::vector<Var>& v) { return ag::max_over_time(v[0]); }, {a});
  check_gradients([](Graph&, std::vector<Var>& v) { return ag::max_over_time(v[0], {true, false, true, true, false}); },
                  {a});
}

TEST(Autograd, MaxOverTimeMaskedRowsNeverWin) {
  Graph g;
  Matrix m(3, 1);
  m << 1.0, 100.0, 2.0;
  EXPECT_EQ(ag::max_over_time(g.constant(m), {true, false, true}).value()(0, 0), 2.0);
  EXPECT_THROW(ag::max_over_time(g.constant(m), {false, false, false}), Error);
}

TEST(Autograd, SoftmaxAndLayerNorm) {
  std::mt19937_64 rng(5);
  const auto a = random_matrix(4, 5, rng);
  check_gradients([](Graph&, std::vector<Var>& v) { return ag::masked_softmax_rows(v[0]); }, {a});
  check_gradients([](Graph&, std::vector<Var>& v) { return ag::masked_softmax_rows(v[0], {true, true, false, true, false}); },
                  {a});
  check_gradients([](Graph&, std::vector<Var>& v) { return ag::layer_norm(v[0], v[1], v[2]); },
                  {a, random_matrix(1, 5, rng), random_matrix(1, 5, rng)}, 1e-5);
}

TEST(Autograd, CrossEntropy) {
  std::mt19937_64 rng(6);
  check_gradients([](Graph&, std::vector<Var>& v) { return ag::cross_entropy(v[0], 2); }, {random_matrix(1, 4, rng)});
}

TEST(Autograd, DropoutIsIdentityWithoutRng) {
  Graph g;
  Var x = g.constant(Matrix::Ones(2, 3));
  EXPECT_EQ(ag::dropout(x, 0.5, nullptr).id, x.id);
  std::mt19937_64 rng(0);
  const Matrix y = ag::dropout(x, 0.5, &rng).value();
  for (Eigen::Index i = 0; i < y.size(); ++i) EXPECT_TRUE(y.data()[i] == 0.0 || y.data()[i] == 2.0);
}

TEST(Autograd, GradientsAccumulateAcrossGraphs) {
  ag::Parameter p("p", Matrix::Constant(1, 1, 3.0));
  for (int i = 0; i < 2; ++i) {
    Graph g;
    Var x = g.param(p);
    g.backward(ag::cwise_mul(x, x));
  }
  EXPECT_DOUBLE_EQ(p.grad(0, 0), 12.0);
}
