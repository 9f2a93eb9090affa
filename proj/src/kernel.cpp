#include "qdpp/kernel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace qdpp {

using linalg::Matrix;

GroundSet::GroundSet(std::size_t n_agents, std::size_t n_obs, std::size_t n_actions)
    : n_agents_(n_agents), n_obs_(n_obs), n_actions_(n_actions) {
  if (n_agents == 0 || n_obs == 0 || n_actions == 0) {
    throw std::invalid_argument("GroundSet: agents, observations and actions must be positive");
  }
}

std::size_t GroundSet::index(std::size_t agent, std::size_t obs, std::size_t action) const {
  if (agent >= n_agents_ || obs >= n_obs_ || action >= n_actions_) {
    throw std::out_of_range("GroundSet::index: (" + std::to_string(agent) + ", " +
                            std::to_string(obs) + ", " + std::to_string(action) +
                            ") out of range");
  }
  return agent * partition_size() + obs * n_actions_ + action;
}

std::vector<std::size_t> GroundSet::valid_slice(std::size_t agent, std::size_t obs) const {
  const std::size_t first = slice_begin(agent, obs);
  std::vector<std::size_t> out(n_actions_);
  for (std::size_t a = 0; a < n_actions_; ++a) out[a] = first + a;
  return out;
}

void GroundSet::check_joint_obs(std::span<const std::size_t> obs) const {
  if (obs.size() != n_agents_) {
    throw std::out_of_range("joint observation has " + std::to_string(obs.size()) +
                            " entries for " + std::to_string(n_agents_) + " agents");
  }
  for (std::size_t o : obs) {
    if (o >= n_obs_) throw std::out_of_range("observation id " + std::to_string(o) + " out of range");
  }
}

JointSelection make_selection(const GroundSet& gs, std::span<const std::size_t> obs,
                              std::span<const std::size_t> actions) {
  gs.check_joint_obs(obs);
  if (actions.size() != gs.n_agents()) {
    throw std::out_of_range("make_selection: one action per agent required");
  }
  JointSelection y;
  y.indices.resize(gs.n_agents());
  for (std::size_t i = 0; i < gs.n_agents(); ++i) y.indices[i] = gs.index(i, obs[i], actions[i]);
  return y;
}

void check_selection(const GroundSet& gs, const JointSelection& y) {
  if (y.size() != gs.n_agents()) {
    throw std::invalid_argument("selection must hold one pair per agent");
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y.indices[i] >= gs.size() || gs.partition(y.indices[i]) != i) {
      throw std::invalid_argument("selection entry " + std::to_string(i) +
                                  " is not in agent " + std::to_string(i) + "'s partition");
    }
  }
}

QDppKernel::QDppKernel(GroundSet gs, std::size_t feature_dim)
    : gs_(gs), log_quality_(gs.size(), 0.0), diversity_(gs.size(), feature_dim) {
  if (feature_dim == 0) {
    throw std::invalid_argument("QDppKernel: feature dimension must be positive");
  }
}

QDppKernel QDppKernel::random_init(GroundSet gs, std::size_t feature_dim, Rng& rng) {
  QDppKernel k(gs, feature_dim);
  for (double& d : k.log_quality_) d = -0.01 + 0.02 * rng.uniform();
  for (std::size_t j = 0; j < k.size(); ++j) {
    auto b = k.diversity_.row(j);
    double n2 = 0.0;
    while (n2 == 0.0) {
      for (double& x : b) x = rng.normal();
      n2 = linalg::squared_norm(b);
    }
    const double scale = 0.99 / std::sqrt(n2);
    for (double& x : b) x *= scale;
  }
  return k;
}

Matrix QDppKernel::kernel_rows() const {
  Matrix w = diversity_;
  for (std::size_t j = 0; j < size(); ++j) {
    const double s = std::exp(0.5 * log_quality_[j]);
    for (double& x : w.row(j)) x *= s;
  }
  return w;
}

Matrix QDppKernel::kernel_rows(const JointSelection& y) const {
  Matrix w(y.size(), feature_dim());
  for (std::size_t k = 0; k < y.size(); ++k) {
    const std::size_t j = y.indices.at(k);
    const double s = std::exp(0.5 * log_quality_.at(j));
    auto src = diversity_.row(j);
    auto dst = w.row(k);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] = s * src[c];
  }
  return w;
}

Matrix QDppKernel::diversity_rows(const JointSelection& y) const {
  Matrix b(y.size(), feature_dim());
  for (std::size_t k = 0; k < y.size(); ++k) {
    auto src = diversity_.row(y.indices.at(k));
    std::copy(src.begin(), src.end(), b.row(k).begin());
  }
  return b;
}

std::size_t QDppKernel::project_to_unit_ball() {
  std::size_t rescaled = 0;
  for (std::size_t j = 0; j < size(); ++j) {
    auto b = diversity_.row(j);
    const double n2 = linalg::squared_norm(b);
    if (n2 > 1.0) {
      const double s = 1.0 / std::sqrt(n2);
      for (double& x : b) x *= s;
      ++rescaled;
    }
  }
  return rescaled;
}

double quality_score(const QDppKernel& kernel, std::size_t j) {
  if (j >= kernel.size()) throw std::out_of_range("quality_score: index out of range");
  return linalg::squared_norm(kernel.diversity().row(j)) * std::exp(kernel.log_quality()[j]);
}

std::size_t greedy_action(const QDppKernel& kernel, std::size_t agent, std::size_t obs) {
  const GroundSet& gs = kernel.ground_set();
  const std::size_t first = gs.slice_begin(agent, obs);
  std::size_t best = 0;
  double best_score = quality_score(kernel, first);
  for (std::size_t a = 1; a < gs.n_actions(); ++a) {
    const double s = quality_score(kernel, first + a);
    if (s > best_score) {
      best_score = s;
      best = a;
    }
  }
  return best;
}

std::vector<std::size_t> greedy_joint_action(const QDppKernel& kernel,
                                             std::span<const std::size_t> obs) {
  kernel.ground_set().check_joint_obs(obs);
  std::vector<std::size_t> actions(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) actions[i] = greedy_action(kernel, i, obs[i]);
  return actions;
}

double log_det_diversity(const QDppKernel& kernel, const JointSelection& y) {
  const double det = linalg::det_gram(kernel.diversity_rows(y));
  return std::log(std::max(det, kDetFloor));
}

double joint_q(const QDppKernel& kernel, const JointSelection& y) {
  double sum = 0.0;
  for (std::size_t j : y.indices) sum += kernel.log_quality()[j];
  return sum + log_det_diversity(kernel, y);
}

double joint_q_from_rows(const QDppKernel& kernel, const JointSelection& y) {
  const double det = linalg::det_gram(kernel.kernel_rows(y));
  double floor_sum = 0.0;
  for (std::size_t j : y.indices) floor_sum += kernel.log_quality()[j];
  // The floor applies to the diversity determinant, which is det / prod exp(D).
  return std::max(std::log(std::max(det, 0.0)), floor_sum + std::log(kDetFloor));
}

JointQGradient grad_joint_q(const QDppKernel& kernel, const JointSelection& y) {
  JointQGradient g;
  g.indices = y.indices;
  g.d_log_quality.assign(y.size(), 1.0);
  g.d_diversity = Matrix(y.size(), kernel.feature_dim());
  const Matrix by = kernel.diversity_rows(y);
  const Matrix gram = linalg::gram_rows(by);
  const double det = linalg::lu_determinant(gram);
  if (!(det > kDetFloor)) {
    g.degenerate = true;
    return g;
  }
  const Matrix inv = linalg::inverse(gram);
  g.d_diversity = linalg::multiply(inv, by);
  for (double& x : g.d_diversity.data()) x *= 2.0;
  return g;
}

namespace {

// In-place LU determinant of an n x n row-major array.
double small_det(double* a, std::size_t n) {
  double det = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t r = k + 1; r < n; ++r) {
      if (std::abs(a[r * n + k]) > std::abs(a[p * n + k])) p = r;
    }
    if (a[p * n + k] == 0.0) return 0.0;
    if (p != k) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[k * n + c], a[p * n + c]);
      det = -det;
    }
    const double akk = a[k * n + k];
    det *= akk;
    for (std::size_t r = k + 1; r < n; ++r) {
      const double f = a[r * n + k] / akk;
      for (std::size_t c = k + 1; c < n; ++c) a[r * n + c] -= f * a[k * n + c];
    }
  }
  return det;
}

// Gauss-Jordan inverse of a (destroyed) into inv.
bool small_inverse(double* a, double* inv, std::size_t n) {
  for (std::size_t i = 0; i < n * n; ++i) inv[i] = 0.0;
  for (std::size_t i = 0; i < n; ++i) inv[i * n + i] = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t r = k + 1; r < n; ++r) {
      if (std::abs(a[r * n + k]) > std::abs(a[p * n + k])) p = r;
    }
    if (a[p * n + k] == 0.0) return false;
    if (p != k) {
      for (std::size_t c = 0; c < n; ++c) {
        std::swap(a[k * n + c], a[p * n + c]);
        std::swap(inv[k * n + c], inv[p * n + c]);
      }
    }
    const double s = 1.0 / a[k * n + k];
    for (std::size_t c = 0; c < n; ++c) {
      a[k * n + c] *= s;
      inv[k * n + c] *= s;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == k) continue;
      const double f = a[r * n + k];
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c) {
        a[r * n + c] -= f * a[k * n + c];
        inv[r * n + c] -= f * inv[k * n + c];
      }
    }
  }
  return true;
}

}  // namespace

double joint_q_raw(const QDppKernel& kernel, std::span<const std::size_t> indices,
                   double* d_diversity, bool* degenerate) {
  const std::size_t n = indices.size();
  const std::size_t p = kernel.feature_dim();
  if (n > kMaxAgents) throw std::invalid_argument("joint_q_raw: too many agents");
  const Matrix& b = kernel.diversity();

  std::array<double, kMaxAgents * kMaxAgents> gram{};
  for (std::size_t r = 0; r < n; ++r) {
    const double* br = b.row(indices[r]).data();
    for (std::size_t c = 0; c <= r; ++c) {
      const double* bc = b.row(indices[c]).data();
      double s = 0.0;
      for (std::size_t k = 0; k < p; ++k) s += br[k] * bc[k];
      gram[r * n + c] = s;
      gram[c * n + r] = s;
    }
  }
  std::array<double, kMaxAgents * kMaxAgents> work = gram;
  const double det = small_det(work.data(), n);

  double sum = 0.0;
  for (std::size_t j : indices) sum += kernel.log_quality()[j];

  const bool degen = !(det > kDetFloor);
  if (degenerate != nullptr) *degenerate = degen;
  if (d_diversity != nullptr) {
    std::fill(d_diversity, d_diversity + n * p, 0.0);
    if (!degen) {
      std::array<double, kMaxAgents * kMaxAgents> inv{};
      work = gram;
      if (small_inverse(work.data(), inv.data(), n)) {
        for (std::size_t r = 0; r < n; ++r) {
          double* out = d_diversity + r * p;
          for (std::size_t c = 0; c < n; ++c) {
            const double f = 2.0 * inv[r * n + c];
            const double* bc = b.row(indices[c]).data();
            for (std::size_t k = 0; k < p; ++k) out[k] += f * bc[k];
          }
        }
      }
    }
  }
  return sum + std::log(degen ? kDetFloor : det);
}

namespace {

linalg::SymmetricEigen eigen_with_fallback(const Matrix& g, const Matrix* warm) {
  if (warm != nullptr) {
    try {
      return linalg::symmetric_eigen(g, warm);
    } catch (const linalg::ConvergenceError&) {
    }
  }
  return linalg::symmetric_eigen(g);
}

}  // namespace

PenaltyResult sv_penalty(const QDppKernel& kernel, double delta, PenaltyWorkspace* workspace) {
  if (!(delta > 0.0 && delta <= 1.0)) {
    throw std::invalid_argument("sv_penalty: delta must lie in (0, 1]");
  }
  const GroundSet& gs = kernel.ground_set();
  const std::size_t n_parts = gs.n_agents();
  const std::size_t part = gs.partition_size();
  const std::size_t p = kernel.feature_dim();
  const std::size_t m = kernel.size();

  PenaltyResult out;
  out.d_log_quality.assign(m, 0.0);
  out.d_diversity = Matrix(m, p);

  const Matrix w = kernel.kernel_rows();

  // Partition Grams; the full Gram is their sum.
  std::vector<Matrix> grams(n_parts + 1, Matrix(p, p));
  for (std::size_t i = 0; i < n_parts; ++i) {
    Matrix& g = grams[i + 1];
    for (std::size_t r = i * part; r < (i + 1) * part; ++r) {
      auto row = w.row(r);
      for (std::size_t a = 0; a < p; ++a) {
        const double wa = row[a];
        if (wa == 0.0) continue;
        auto grow = g.row(a);
        for (std::size_t c = a; c < p; ++c) grow[c] += wa * row[c];
      }
    }
    for (std::size_t a = 0; a < p; ++a) {
      for (std::size_t c = 0; c < a; ++c) g(a, c) = g(c, a);
    }
    for (std::size_t k = 0; k < p * p; ++k) grams[0].data()[k] += g.data()[k];
  }

  std::vector<linalg::SymmetricEigen> eig;
  eig.reserve(n_parts + 1);
  try {
    for (std::size_t t = 0; t <= n_parts; ++t) {
      const Matrix* warm = nullptr;
      if (workspace != nullptr && workspace->bases.size() == n_parts + 1 &&
          workspace->bases[t].rows() == p) {
        warm = &workspace->bases[t];
      }
      eig.push_back(eigen_with_fallback(grams[t], warm));
    }
  } catch (const linalg::ConvergenceError&) {
    out.converged = false;
    return out;
  }
  if (workspace != nullptr) {
    workspace->bases.resize(n_parts + 1);
    for (std::size_t t = 0; t <= n_parts; ++t) workspace->bases[t] = eig[t].vectors;
  }

  // Coefficient matrices: C_full = sum_j (#active i) v_j v_j^T and
  // C_i = (1/delta) sum_{j active for i} u_ij u_ij^T.
  std::vector<Matrix> coef(n_parts + 1, Matrix(p, p));
  for (std::size_t j = 0; j < p; ++j) {
    const double lambda = std::max(eig[0].values[j], 0.0);
    for (std::size_t i = 0; i < n_parts; ++i) {
      const double mu = std::max(eig[i + 1].values[j], 0.0);
      const double term = lambda - mu / delta;
      if (term <= 0.0) continue;
      out.value += term;
      ++out.active_terms;
      for (std::size_t a = 0; a < p; ++a) {
        const double va = eig[0].vectors(a, j);
        const double ua = eig[i + 1].vectors(a, j) / delta;
        for (std::size_t c = 0; c < p; ++c) {
          coef[0](a, c) += va * eig[0].vectors(c, j);
          coef[i + 1](a, c) += ua * eig[i + 1].vectors(c, j);
        }
      }
    }
  }
  if (out.active_terms == 0) return out;

  // dW_k = 2 (C_full - C_part(k)) w_k; chain through w_k = exp(D_k/2) b_k.
  std::vector<double> dw(p);
  for (std::size_t k = 0; k < m; ++k) {
    const Matrix& ci = coef[1 + k / part];
    auto wk = w.row(k);
    for (std::size_t a = 0; a < p; ++a) {
      double s = 0.0;
      for (std::size_t c = 0; c < p; ++c) s += (coef[0](a, c) - ci(a, c)) * wk[c];
      dw[a] = 2.0 * s;
    }
    out.d_log_quality[k] = 0.5 * linalg::dot(dw, wk);
    const double scale = std::exp(0.5 * kernel.log_quality()[k]);
    auto db = out.d_diversity.row(k);
    for (std::size_t a = 0; a < p; ++a) db[a] = scale * dw[a];
  }
  return out;
}

double balance_delta(const QDppKernel& kernel) {
  const GroundSet& gs = kernel.ground_set();
  const std::size_t p = kernel.feature_dim();
  const std::size_t part = gs.partition_size();
  const Matrix w = kernel.kernel_rows();

  auto padded = [p](linalg::Vector sv) {
    sv.resize(p, 0.0);
    return sv;
  };
  const linalg::Vector sigma = padded(linalg::singular_values(w));
  if (sigma.empty() || sigma[0] == 0.0) return 1.0;

  double delta = 1.0;
  for (std::size_t i = 0; i < gs.n_agents(); ++i) {
    Matrix block(part, p);
    for (std::size_t r = 0; r < part; ++r) {
      auto src = w.row(i * part + r);
      std::copy(src.begin(), src.end(), block.row(r).begin());
    }
    const linalg::Vector hat = padded(linalg::singular_values(block));
    for (std::size_t j = 0; j < p; ++j) {
      if (sigma[j] <= 1e-12 * sigma[0]) continue;
      delta = std::min(delta, (hat[j] * hat[j]) / (sigma[j] * sigma[j]));
    }
  }
  return delta;
}

}  // namespace qdpp
