#pragma once

// Reference computations that share no code with the solver: a dense batch
// least-squares solution of delayed LQ problems and a textbook undelayed DDP
// backward pass.

#include <Eigen/Dense>
#include <vector>

#include "dddp/core.hpp"
#include "dddp/models.hpp"

namespace oracle {

using dddp::Matrix;
using dddp::Vector;

struct BatchLq {
  std::vector<Vector> controls;
  double cost = 0.0;
};

// Every state is affine in the stacked controls U, so the cost is one quadratic
// in U. Each x_t is charged once per window that contains it.
inline BatchLq batch_lq(const std::vector<Matrix>& a, const Matrix& b, const Matrix& p,
                        const Matrix& r, double terminal_weight,
                        const std::vector<Vector>& initial_slots, int horizon) {
  const int k = static_cast<int>(a.size()) - 1;
  const auto n = b.rows();
  const auto m = b.cols();
  const auto nu = m * horizon;
  // x_t for t = -k..horizon lives at index t + k.
  std::vector<Matrix> g(static_cast<std::size_t>(horizon + k + 1), Matrix::Zero(n, nu));
  std::vector<Vector> h(g.size(), Vector::Zero(n));
  for (int j = 0; j <= k; ++j) h[static_cast<std::size_t>(k - j)] = initial_slots[static_cast<std::size_t>(j)];
  for (int t = 0; t < horizon; ++t) {
    auto& gn = g[static_cast<std::size_t>(t + k + 1)];
    auto& hn = h[static_cast<std::size_t>(t + k + 1)];
    for (int j = 0; j <= k; ++j) {
      gn += a[static_cast<std::size_t>(j)] * g[static_cast<std::size_t>(t + k - j)];
      hn += a[static_cast<std::size_t>(j)] * h[static_cast<std::size_t>(t + k - j)];
    }
    gn.block(0, m * t, n, m) += b;
  }
  auto charge = [&](int t) {
    double c = 0.0;
    for (int i = 0; i < horizon; ++i) c += (t <= i && t >= i - k) ? 1.0 : 0.0;
    if (t <= horizon && t >= horizon - k) c += terminal_weight;
    return c;
  };
  Matrix hess = Matrix::Zero(nu, nu);
  Vector grad = Vector::Zero(nu);
  double c0 = 0.0;
  for (int t = -k; t <= horizon; ++t) {
    const double c = charge(t);
    const auto& gt = g[static_cast<std::size_t>(t + k)];
    const auto& ht = h[static_cast<std::size_t>(t + k)];
    hess += c * gt.transpose() * p * gt;
    grad += c * gt.transpose() * p * ht;
    c0 += 0.5 * c * ht.dot(p * ht);
  }
  for (int t = 0; t < horizon; ++t) hess.block(m * t, m * t, m, m) += r;
  const Vector u = hess.ldlt().solve(-grad);
  BatchLq out;
  out.cost = 0.5 * u.dot(hess * u) + grad.dot(u) + c0;
  for (int t = 0; t < horizon; ++t) out.controls.push_back(u.segment(m * t, m));
  return out;
}

// Per-step derivatives of an undelayed problem about a nominal trajectory.
struct Expansion {
  Matrix fx, fu;
  std::vector<Matrix> fxx, fux, fuu;  // per output component; empty for first order
  Vector lx, lu;
  Matrix lxx, luu, lux;
};

struct ClassicGains {
  std::vector<Vector> k;
  std::vector<Matrix> K;
};

// Textbook DDP backward pass with mu = 0 on x_{i+1} = f(x_i, u_i).
inline ClassicGains classic_backward(const std::vector<Expansion>& steps, const Vector& vx_n,
                                     const Matrix& vxx_n) {
  const auto horizon = steps.size();
  ClassicGains out;
  out.k.resize(horizon);
  out.K.resize(horizon);
  Vector vx = vx_n;
  Matrix vxx = vxx_n;
  for (std::size_t s = horizon; s-- > 0;) {
    const Expansion& e = steps[s];
    const Vector qx = e.lx + e.fx.transpose() * vx;
    const Vector qu = e.lu + e.fu.transpose() * vx;
    Matrix qxx = e.lxx + e.fx.transpose() * vxx * e.fx;
    Matrix quu = e.luu + e.fu.transpose() * vxx * e.fu;
    Matrix qux = e.lux + e.fu.transpose() * vxx * e.fx;
    for (std::size_t c = 0; c < e.fxx.size(); ++c) {
      qxx += vx(static_cast<Eigen::Index>(c)) * e.fxx[c];
      quu += vx(static_cast<Eigen::Index>(c)) * e.fuu[c];
      qux += vx(static_cast<Eigen::Index>(c)) * e.fux[c];
    }
    const Eigen::LLT<Matrix> llt(quu);
    out.k[s] = -llt.solve(qu);
    out.K[s] = -llt.solve(qux);
    const Vector& kk = out.k[s];
    const Matrix& KK = out.K[s];
    vx = qx + KK.transpose() * quu * kk + KK.transpose() * qu + qux.transpose() * kk;
    vxx = qxx + KK.transpose() * quu * KK + KK.transpose() * qux + qux.transpose() * KK;
    vxx = (0.5 * (vxx + vxx.transpose())).eval();
  }
  return out;
}

}  // namespace oracle
