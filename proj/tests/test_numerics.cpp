#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "uecg/model/blocks.hpp"
#include "uecg/nn/adam.hpp"
#include "uecg/nn/grad_check.hpp"
#include "uecg/nn/ops.hpp"
#include "uecg/nn/rng.hpp"
#include "uecg/nn/tensor.hpp"

using uecg::nn::Rng;
using uecg::nn::Shape;
using DTensor = uecg::nn::Tensor<double>;

namespace {

// Independent central-difference oracle used to validate analytic gradients
// (and to validate the grad_check utility itself before it is trusted).
double numeric_deriv(const std::function<DTensor()>& loss_fn, DTensor& param, std::size_t idx,
                     double h = 1e-5) {
  auto& vals = param.v();
  const double saved = vals[idx];
  vals[idx] = saved + h;
  const double up = loss_fn().scalar();
  vals[idx] = saved - h;
  const double down = loss_fn().scalar();
  vals[idx] = saved;
  return (up - down) / (2.0 * h);
}

double max_rel_err_vs_fd(const std::function<DTensor()>& loss_fn, std::vector<DTensor> params) {
  for (auto& p : params) p.zero_grad();
  auto loss = loss_fn();
  loss.backward();
  double worst = 0.0;
  for (auto& p : params) {
    const auto analytic = p.g();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double num = numeric_deriv(loss_fn, p, i);
      const double denom = std::max({std::fabs(analytic[i]), std::fabs(num), 1e-4});
      worst = std::max(worst, std::fabs(analytic[i] - num) / denom);
    }
  }
  return worst;
}

DTensor random_tensor(Shape shape, Rng& rng, bool rg = true) {
  return DTensor::randn(std::move(shape), rng, 0.7, rg);
}

}  // namespace

TEST_CASE("matmul against hand cases and the finite-difference oracle") {
  auto a = DTensor::from({2, 2}, {1, 2, 3, 4});
  auto id = DTensor::from({2, 2}, {1, 0, 0, 1});
  auto prod = uecg::nn::matmul(a, id);
  CHECK(prod.v() == a.v());

  auto z = DTensor::zeros({2, 3});
  auto az = uecg::nn::matmul(a, DTensor::zeros({2, 3}));
  CHECK(az.v() == z.v());

  CHECK_THROWS_AS(uecg::nn::matmul(DTensor::zeros({2, 3}), DTensor::zeros({2, 3})),
                  uecg::DimensionError);
  try {
    uecg::nn::matmul(DTensor::zeros({2, 3}), DTensor::zeros({2, 2}));
  } catch (const uecg::DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2 x 3]") != std::string::npos);
    CHECK(msg.find("[2 x 2]") != std::string::npos);
  }

  Rng rng(11);
  auto x = random_tensor({3, 4}, rng);
  auto y = random_tensor({4, 2}, rng);
  auto loss_fn = [&]() { return uecg::nn::mean_all(uecg::nn::gelu(uecg::nn::matmul(x, y))); };
  CHECK(max_rel_err_vs_fd(loss_fn, {x, y}) < 1e-6);
}

TEST_CASE("softmax cross-entropy frozen values and gradients") {
  auto logits = DTensor::from({1, 2}, {0.0, 0.0}, true);
  auto loss = uecg::nn::softmax_cross_entropy(logits, {0});
  CHECK(loss.scalar() == doctest::Approx(0.6931471805599453).epsilon(1e-12));

  auto peaked = DTensor::from({1, 2}, {30.0, -30.0}, true);
  CHECK(uecg::nn::softmax_cross_entropy(peaked, {0}).scalar() < 1e-9);

  CHECK_THROWS_AS(uecg::nn::softmax_cross_entropy(DTensor::zeros({1, 3}, true), {3}),
                  uecg::IndexError);
  CHECK_THROWS_AS(uecg::nn::softmax_cross_entropy(DTensor::zeros({1, 3}, true), {-1}),
                  uecg::IndexError);

  Rng rng(5);
  auto x = random_tensor({5, 7}, rng);
  std::vector<int> targets = {3, 0, 6, 2, 2};
  auto loss_fn = [&]() { return uecg::nn::softmax_cross_entropy(x, targets); };
  CHECK(max_rel_err_vs_fd(loss_fn, {x}) < 1e-5);
}

TEST_CASE("mse frozen values and gradient") {
  auto a = DTensor::from({2}, {1.0, 1.0}, true);
  auto b = DTensor::from({2}, {0.0, 0.0});
  CHECK(uecg::nn::mse(a, a).scalar() == 0.0);
  CHECK(uecg::nn::mse(a, b).scalar() == doctest::Approx(1.0));

  a.zero_grad();
  auto loss = uecg::nn::mse(a, b);
  loss.backward();
  // d/da mean((a-b)^2) = 2 (a-b) / N
  CHECK(a.g()[0] == doctest::Approx(1.0));
  CHECK(a.g()[1] == doctest::Approx(1.0));

  Rng rng(7);
  auto x = random_tensor({3, 3}, rng);
  auto y = random_tensor({3, 3}, rng);
  auto loss_fn = [&]() { return uecg::nn::mse(x, y); };
  CHECK(max_rel_err_vs_fd(loss_fn, {x, y}) < 1e-7);
}

TEST_CASE("adam single-step recurrence and freeze semantics") {
  // One step on a scalar with g=1, lr=0.1: m_hat=1, v_hat=1, so the update is
  // 0.1/(1+1e-8) and the parameter lands a hair above 0.9.
  auto p = DTensor::from({1}, {1.0}, true);
  uecg::nn::Adam<double> opt({0.1, 0.9, 0.999, 1e-8});
  opt.add_param("p", p);
  p.g()[0] = 1.0;
  opt.step();
  CHECK(p.v()[0] == doctest::Approx(0.9).epsilon(1e-7));
  CHECK(opt.step_count() == 1);

  // Zero gradient at the first step leaves the value untouched.
  auto q = DTensor::from({1}, {2.5}, true);
  uecg::nn::Adam<double> opt2;
  opt2.add_param("q", q);
  q.zero_grad();
  opt2.step();
  CHECK(q.v()[0] == 2.5);

  // Masked rows are bitwise invariant under nonzero gradient.
  auto m = DTensor::from({2, 2}, {1.0, 2.0, 3.0, 4.0}, true);
  uecg::nn::Adam<double> opt3;
  opt3.add_param("m", m, {0, 1});
  auto& g = m.g();
  g = {5.0, 5.0, 5.0, 5.0};
  const double frozen0 = m.v()[0], frozen1 = m.v()[1];
  opt3.step();
  CHECK(m.v()[0] == frozen0);
  CHECK(m.v()[1] == frozen1);
  CHECK(m.v()[2] != 3.0);
  CHECK(m.v()[3] != 4.0);
  CHECK(opt3.trainable_scalar_count() == 2);

  // Missing gradient is a training error.
  auto r = DTensor::from({1}, {1.0}, true);
  uecg::nn::Adam<double> opt4;
  opt4.add_param("r", r);
  CHECK_THROWS_AS(opt4.step(), uecg::TrainingError);
}

TEST_CASE("grad_check validates a quadratic to tight tolerance") {
  auto p = DTensor::from({2}, {1.0, 2.0}, true);
  auto loss_fn = [&]() { return uecg::nn::mse(p, DTensor::zeros({2})); };
  Rng rng(3);
  auto report = uecg::nn::grad_check<double>(loss_fn, {{"p", p}}, 1e-5, 1e-8, 64, rng);
  CHECK(report.pass);
  CHECK(report.max_rel_err < 1e-8);
  CHECK(report.per_param.size() == 1);
  CHECK(report.per_param[0].checked == 2);
}

TEST_CASE("elementwise and broadcast ops pass the gradient check") {
  Rng rng(21);
  auto a = random_tensor({3, 4}, rng);
  auto b = random_tensor({3, 4}, rng);
  auto rowv = random_tensor({4}, rng);
  auto colv = random_tensor({3}, rng);

  auto loss_fn = [&]() {
    auto t = uecg::nn::add(uecg::nn::mul(a, b), uecg::nn::scale(uecg::nn::sub(a, b), 0.3));
    t = uecg::nn::add_rowvec(t, rowv);
    t = uecg::nn::mul_colvec(t, colv);
    t = uecg::nn::add_colvec(t, colv);
    return uecg::nn::mean_all(uecg::nn::gelu(t));
  };
  auto report = uecg::nn::grad_check<double>(
      loss_fn, {{"a", a}, {"b", b}, {"rowv", rowv}, {"colv", colv}}, 1e-5, 1e-6, 64, rng);
  CHECK(report.pass);
}

TEST_CASE("layer norm, relu, softmax, matvec, transpose pass the gradient check") {
  Rng rng(22);
  auto x = random_tensor({4, 6}, rng);
  auto gain = random_tensor({6}, rng);
  auto bias = random_tensor({6}, rng);
  auto m = random_tensor({5, 4}, rng);
  auto v = random_tensor({6}, rng);

  auto loss_fn = [&]() {
    auto n = uecg::nn::layer_norm(x, gain, bias);
    auto s = uecg::nn::softmax_rows(n);
    auto r = uecg::nn::transpose(uecg::nn::relu(s));  // [6 x 4]
    auto y = uecg::nn::matmul(m, uecg::nn::transpose(r));
    auto mv = uecg::nn::matvec(y, v);
    return uecg::nn::mean_all(uecg::nn::as_row(mv));
  };
  auto report = uecg::nn::grad_check<double>(
      loss_fn, {{"x", x}, {"gain", gain}, {"bias", bias}, {"m", m}, {"v", v}}, 1e-5, 1e-6, 48,
      rng);
  CHECK(report.pass);

  // Softmax rows are normalized.
  auto sm = uecg::nn::softmax_rows(x);
  for (std::size_t i = 0; i < sm.rows(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < sm.cols(); ++j) sum += sm.at(i, j);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("embedding gather/scatter honors the trainable-row mask") {
  Rng rng(31);
  auto table = random_tensor({4, 3}, rng);
  std::vector<int> ids = {0, 1, 2, 1};

  auto loss_fn = [&]() { return uecg::nn::mean_all(uecg::nn::embedding_rows(table, ids)); };
  auto report = uecg::nn::grad_check<double>(loss_fn, {{"table", table}}, 1e-5, 1e-6, 64, rng);
  CHECK(report.pass);

  // With rows 1 and 3 frozen, their grads stay exactly zero.
  std::vector<std::uint8_t> mask = {1, 0, 1, 0};
  table.zero_grad();
  auto loss = uecg::nn::mean_all(uecg::nn::embedding_rows(table, ids, &mask));
  loss.backward();
  const auto& g = table.g();
  CHECK(g[1 * 3 + 0] == 0.0);
  CHECK(g[1 * 3 + 1] == 0.0);
  CHECK(g[1 * 3 + 2] == 0.0);
  CHECK(g[3 * 3 + 0] == 0.0);
  CHECK(g[0] != 0.0);
  CHECK(g[2 * 3 + 0] != 0.0);

  CHECK_THROWS_AS(uecg::nn::embedding_rows(table, std::vector<int>{4}), uecg::IndexError);
  CHECK_THROWS_AS(uecg::nn::embedding_rows(table, std::vector<int>{-1}), uecg::IndexError);
}

TEST_CASE("concat, slice, pooling and upsampling pass the gradient check") {
  Rng rng(41);
  auto a = random_tensor({2, 3}, rng);
  auto b = random_tensor({3, 3}, rng);
  auto c = random_tensor({2, 2}, rng);

  auto loss_fn = [&]() {
    auto cat = uecg::nn::concat_rows<double>({a, b});  // [5 x 3]
    auto sl = uecg::nn::slice_rows(cat, 1, 4);         // [3 x 3]
    auto wide = uecg::nn::concat_rows<double>({c, uecg::nn::slice_rows(c, 0, 1)});  // [3 x 2]
    auto cc = uecg::nn::concat_cols<double>({sl, wide});                            // [3 x 5]
    auto up = uecg::nn::upsample2_cols(uecg::nn::slice_cols(cc, 1, 4));
    auto pooled = uecg::nn::mean_rows(up);
    return uecg::nn::mean_all(uecg::nn::as_row(pooled));
  };
  auto report = uecg::nn::grad_check<double>(loss_fn, {{"a", a}, {"b", b}, {"c", c}}, 1e-5,
                                             1e-6, 64, rng);
  CHECK(report.pass);
}

TEST_CASE("conv1d matches the finite-difference oracle") {
  Rng rng(51);
  auto x = random_tensor({2, 8}, rng);
  auto w = random_tensor({3, 6}, rng);  // Cout=3, Cin*K=2*3
  auto b = random_tensor({3}, rng);

  auto loss_fn = [&]() {
    auto y = uecg::nn::conv1d(x, w, b, 3, 2, 1);  // [3 x 4]
    return uecg::nn::mean_all(uecg::nn::gelu(y));
  };
  CHECK(max_rel_err_vs_fd(loss_fn, {x, w, b}) < 1e-6);

  CHECK_THROWS_AS(uecg::nn::conv1d(x, DTensor::zeros({3, 5}, true), b, 3, 2, 1),
                  uecg::DimensionError);
}

TEST_CASE("causal self-attention and cross-attention blocks pass the gradient check") {
  Rng rng(61);
  const std::size_t width = 8, heads = 2;
  auto blk = uecg::model::BlockParams<double>::init(width, rng);
  auto x = random_tensor({5, width}, rng);

  auto loss_fn = [&]() {
    return uecg::nn::mean_all(uecg::model::transformer_block(blk, x, heads, true));
  };
  std::vector<std::pair<std::string, DTensor>> params = {{"x", x},
                                                         {"wq", blk.attn.wq},
                                                         {"wk", blk.attn.wk},
                                                         {"wv", blk.attn.wv},
                                                         {"wo", blk.attn.wo},
                                                         {"bq", blk.attn.bq},
                                                         {"ln1g", blk.ln1_g},
                                                         {"ln2b", blk.ln2_b},
                                                         {"wf1", blk.wf1},
                                                         {"wf2", blk.wf2}};
  auto report = uecg::nn::grad_check<double>(loss_fn, params, 1e-5, 1e-5, 32, rng);
  CHECK(report.pass);

  auto dec = uecg::model::DecoderBlockParams<double>::init(width, rng);
  auto queries = random_tensor({3, width}, rng);
  auto enc = random_tensor({4, width}, rng);
  auto loss_fn2 = [&]() {
    return uecg::nn::mean_all(uecg::model::decoder_block(dec, queries, enc, heads));
  };
  std::vector<std::pair<std::string, DTensor>> params2 = {{"q", queries},
                                                          {"enc", enc},
                                                          {"xwq", dec.cross_attn.wq},
                                                          {"xwk", dec.cross_attn.wk},
                                                          {"xwv", dec.cross_attn.wv},
                                                          {"swo", dec.self_attn.wo},
                                                          {"ln3g", dec.ln3_g},
                                                          {"wf1", dec.wf1}};
  auto report2 = uecg::nn::grad_check<double>(loss_fn2, params2, 1e-5, 1e-5, 32, rng);
  CHECK(report2.pass);
}

TEST_CASE("causal block output is bitwise independent of later positions") {
  Rng rng(71);
  const std::size_t width = 8, heads = 2, t = 6;
  auto blk = uecg::model::BlockParams<double>::init(width, rng);
  auto base = random_tensor({t, width}, rng, false);

  auto out1 = uecg::model::transformer_block(blk, base, heads, true);
  auto mutated = DTensor::from(base.shape(), base.v());
  for (std::size_t j = 0; j < width; ++j) mutated.at(t - 1, j) += 3.25;
  auto out2 = uecg::model::transformer_block(blk, mutated, heads, true);

  for (std::size_t i = 0; i + 1 < t; ++i)
    for (std::size_t j = 0; j < width; ++j) CHECK(out1.at(i, j) == out2.at(i, j));
}

TEST_CASE("backward of a sum of losses equals the sum of backwards") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    Rng rng(100 + seed);
    auto a = random_tensor({3, 3}, rng);
    auto b = random_tensor({3, 3}, rng);
    auto c = random_tensor({3}, rng);

    auto build = [&](int which) {
      auto m = uecg::nn::matmul(a, b);
      auto g = uecg::nn::gelu(uecg::nn::add_colvec(m, c));
      auto la = uecg::nn::mean_all(uecg::nn::mul(g, g));
      auto lb = uecg::nn::mse(uecg::nn::softmax_rows(m), uecg::nn::transpose(g));
      if (which == 0) return uecg::nn::add(la, lb);
      if (which == 1) return la;
      return lb;
    };

    a.zero_grad();
    b.zero_grad();
    c.zero_grad();
    build(0).backward();
    auto ga_sum = a.g();
    auto gb_sum = b.g();
    auto gc_sum = c.g();

    a.zero_grad();
    b.zero_grad();
    c.zero_grad();
    build(1).backward();
    build(2).backward();
    for (std::size_t i = 0; i < ga_sum.size(); ++i)
      CHECK(a.g()[i] == doctest::Approx(ga_sum[i]).epsilon(1e-9));
    for (std::size_t i = 0; i < gb_sum.size(); ++i)
      CHECK(b.g()[i] == doctest::Approx(gb_sum[i]).epsilon(1e-9));
    for (std::size_t i = 0; i < gc_sum.size(); ++i)
      CHECK(c.g()[i] == doctest::Approx(gc_sum[i]).epsilon(1e-9));
  }
}

TEST_CASE("ops are deterministic given identical inputs") {
  Rng rng1(77), rng2(77);
  auto a1 = random_tensor({4, 4}, rng1);
  auto a2 = random_tensor({4, 4}, rng2);
  CHECK(a1.v() == a2.v());

  auto f = [](const DTensor& t) {
    auto s = uecg::nn::softmax_rows(uecg::nn::gelu(uecg::nn::matmul(t, t)));
    return uecg::nn::mean_all(s);
  };
  CHECK(f(a1).scalar() == f(a2).scalar());
}

TEST_CASE("backward on a non-finite loss raises a numeric error") {
  auto p = DTensor::from({1}, {1e308}, true);
  auto loss = uecg::nn::mul(p, p);  // overflows to inf
  CHECK_THROWS_AS(loss.backward(), uecg::NumericError);
}
