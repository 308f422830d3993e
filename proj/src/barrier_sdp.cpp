#include "reap/barrier_sdp.hpp"

#include <cmath>
#include <limits>
#include <optional>

namespace reap::sdp {
namespace {

// Index map between the upper triangle of A and the packed variable vector.
struct Packing {
  Eigen::Index dim;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> entries;

  explicit Packing(Eigen::Index d) : dim(d) {
    for (Eigen::Index a = 0; a < d; ++a) {
      for (Eigen::Index b = a; b < d; ++b) entries.emplace_back(a, b);
    }
  }
  Eigen::Index size() const { return static_cast<Eigen::Index>(entries.size()); }

  // kappa: basis E_ab = kappa (e_a e_b^T + e_b e_a^T), so E_aa = e_a e_a^T.
  static double kappa(Eigen::Index a, Eigen::Index b) { return a == b ? 0.5 : 1.0; }

  Matrix unpack(const Vector& y) const {
    Matrix m(dim, dim);
    for (Eigen::Index p = 0; p < size(); ++p) {
      const auto [a, b] = entries[static_cast<std::size_t>(p)];
      m(a, b) = y[p];
      m(b, a) = y[p];
    }
    return m;
  }

  Vector pack(const Matrix& m) const {
    Vector y(size());
    for (Eigen::Index p = 0; p < size(); ++p) {
      const auto [a, b] = entries[static_cast<std::size_t>(p)];
      y[p] = 0.5 * (m(a, b) + m(b, a));
    }
    return y;
  }

  // Coefficients of <W, A> as a linear form in the packed variables.
  Vector dual_form(const Matrix& w) const {
    Vector c(size());
    for (Eigen::Index p = 0; p < size(); ++p) {
      const auto [a, b] = entries[static_cast<std::size_t>(p)];
      c[p] = a == b ? w(a, a) : w(a, b) + w(b, a);
    }
    return c;
  }
};

class Barrier {
 public:
  Barrier(const Problem& problem)
      : problem_(problem), packing_(problem.dim), n_a_(packing_.size()),
        m_(problem.num_scalars) {
    cost_.resize(n_a_ + m_);
    cost_.head(n_a_) = packing_.dual_form(problem.objective);
    if (m_ > 0) {
      cost_.tail(m_) = problem.objective_scalars.size() == m_
                           ? problem.objective_scalars
                           : Vector::Zero(m_);
    }
    for (const auto& lc : problem.linear) {
      Vector row(n_a_ + m_);
      row.head(n_a_) = packing_.dual_form(lc.coeff);
      if (m_ > 0) {
        row.tail(m_) = lc.scalar_coeff.size() == m_ ? lc.scalar_coeff : Vector::Zero(m_);
      }
      linear_rows_.push_back(std::move(row));
    }
    nu_ = static_cast<double>(problem.linear.size()) +
          static_cast<double>(problem.blocks.size() * static_cast<std::size_t>(problem.dim));
  }

  Eigen::Index size() const { return n_a_ + m_; }
  double nu() const { return nu_; }
  const Vector& cost() const { return cost_; }
  const Packing& packing() const { return packing_; }

  Vector pack(const Matrix& a, const Vector& z) const {
    Vector y(size());
    y.head(n_a_) = packing_.pack(a);
    if (m_ > 0) y.tail(m_) = z;
    return y;
  }
  Matrix matrix_part(const Vector& y) const { return packing_.unpack(y.head(n_a_)); }
  Vector scalar_part(const Vector& y) const {
    return m_ > 0 ? Vector(y.tail(m_)) : Vector();
  }

  Matrix block_value(const LmiBlock& block, const Matrix& a, const Vector& z) const {
    Matrix f = block.constant + block.sign * a;
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(block.scalar_coeff.size()); ++j) {
      f += z[j] * block.scalar_coeff[static_cast<std::size_t>(j)];
    }
    return f;
  }

  // Barrier value phi(y); nullopt outside the strict interior.
  std::optional<double> value(const Vector& y) const {
    const Matrix a = matrix_part(y);
    const Vector z = scalar_part(y);
    double phi = 0.0;
    for (const auto& block : problem_.blocks) {
      Eigen::LLT<Matrix> llt(block_value(block, a, z));
      if (llt.info() != Eigen::Success) return std::nullopt;
      const Vector diag = llt.matrixLLT().diagonal();
      for (Eigen::Index i = 0; i < diag.size(); ++i) {
        if (!(diag[i] > 0.0)) return std::nullopt;
        phi -= 2.0 * std::log(diag[i]);
      }
    }
    for (std::size_t k = 0; k < linear_rows_.size(); ++k) {
      const double slack = problem_.linear[k].rhs - linear_rows_[k].dot(y);
      if (!(slack > 0.0)) return std::nullopt;
      phi -= std::log(slack);
    }
    return phi;
  }

  // Gradient and Hessian of phi at a strictly feasible y; also returns the
  // block inverses and slacks for dual recovery.
  void derivatives(const Vector& y, Vector& grad, Matrix& hess,
                   std::vector<Matrix>& inverses, Vector& slacks) const {
    const Matrix a = matrix_part(y);
    const Vector z = scalar_part(y);
    const Eigen::Index n = size();
    grad = Vector::Zero(n);
    hess = Matrix::Zero(n, n);
    inverses.clear();
    const auto& entries = packing_.entries;
    for (const auto& block : problem_.blocks) {
      const Matrix f = block_value(block, a, z);
      Eigen::LLT<Matrix> llt(f);
      const Matrix g = llt.solve(Matrix::Identity(problem_.dim, problem_.dim));
      const double s = block.sign;
      for (Eigen::Index p = 0; p < n_a_; ++p) {
        const auto [pa, pb] = entries[static_cast<std::size_t>(p)];
        const double kp = Packing::kappa(pa, pb);
        grad[p] -= s * 2.0 * kp * g(pa, pb);
        for (Eigen::Index q = p; q < n_a_; ++q) {
          const auto [qa, qb] = entries[static_cast<std::size_t>(q)];
          const double kq = Packing::kappa(qa, qb);
          const double h =
              s * s * 2.0 * kp * kq * (g(pa, qa) * g(pb, qb) + g(pa, qb) * g(pb, qa));
          hess(p, q) += h;
          if (q != p) hess(q, p) += h;
        }
      }
      const auto num_coeff = static_cast<Eigen::Index>(block.scalar_coeff.size());
      std::vector<Matrix> gdg(static_cast<std::size_t>(num_coeff));
      for (Eigen::Index j = 0; j < num_coeff; ++j) {
        const Matrix& d = block.scalar_coeff[static_cast<std::size_t>(j)];
        gdg[static_cast<std::size_t>(j)] = g * d * g;
        grad[n_a_ + j] -= (g.cwiseProduct(d)).sum();
        const Matrix& w = gdg[static_cast<std::size_t>(j)];
        for (Eigen::Index p = 0; p < n_a_; ++p) {
          const auto [pa, pb] = entries[static_cast<std::size_t>(p)];
          const double h = s * 2.0 * Packing::kappa(pa, pb) * 0.5 * (w(pa, pb) + w(pb, pa));
          hess(p, n_a_ + j) += h;
          hess(n_a_ + j, p) += h;
        }
      }
      for (Eigen::Index i = 0; i < num_coeff; ++i) {
        for (Eigen::Index j = i; j < num_coeff; ++j) {
          const double h = (gdg[static_cast<std::size_t>(i)].cwiseProduct(
                                block.scalar_coeff[static_cast<std::size_t>(j)]))
                               .sum();
          hess(n_a_ + i, n_a_ + j) += h;
          if (i != j) hess(n_a_ + j, n_a_ + i) += h;
        }
      }
      inverses.push_back(g);
    }
    slacks.resize(static_cast<Eigen::Index>(linear_rows_.size()));
    for (std::size_t k = 0; k < linear_rows_.size(); ++k) {
      const double slack = problem_.linear[k].rhs - linear_rows_[k].dot(y);
      slacks[static_cast<Eigen::Index>(k)] = slack;
      grad += linear_rows_[k] / slack;
      hess += linear_rows_[k] * linear_rows_[k].transpose() / (slack * slack);
    }
  }

 private:
  const Problem& problem_;
  Packing packing_;
  Eigen::Index n_a_;
  Eigen::Index m_;
  Vector cost_;
  std::vector<Vector> linear_rows_;
  double nu_ = 0.0;
};

}  // namespace

bool strictly_feasible(const Problem& problem, const Matrix& a, const Vector& z) {
  Barrier barrier(problem);
  return barrier.value(barrier.pack(a, z)).has_value();
}

Solution solve(const Problem& problem, const Matrix& a_start, const Vector& z_start,
               const Options& options) {
  require_same_dim(a_start.rows(), problem.dim, "sdp start");
  require_same_dim(z_start.size(), problem.num_scalars, "sdp start scalars");
  Barrier barrier(problem);
  Vector y = barrier.pack(a_start, z_start);
  if (!barrier.value(y)) {
    throw Error(ErrorCode::kInfeasible, "sdp: start point is not strictly feasible");
  }
  const Vector& c = barrier.cost();
  const double nu = std::max(barrier.nu(), 1.0);

  Solution sol;
  double t = 1.0;
  Vector grad;
  Matrix hess;
  std::vector<Matrix> inverses;
  Vector slacks;
  bool stalled = false;

  while (true) {
    // Centering.
    for (;;) {
      if (sol.newton_steps >= options.max_newton_steps) {
        stalled = true;
        break;
      }
      barrier.derivatives(y, grad, hess, inverses, slacks);
      const Vector g = -t * c + grad;
      Eigen::LDLT<Matrix> ldlt(hess);
      const Vector step = -ldlt.solve(g);
      if (!step.allFinite()) {
        stalled = true;
        break;
      }
      const double decrement = -g.dot(step);
      ++sol.newton_steps;
      if (decrement * 0.5 <= options.centering_tol) break;
      // Merit -t c^T y + phi(y), compared as a difference so the large linear
      // term does not swamp the decrease at high t.
      const double phi0 = *barrier.value(y);
      const double slope = c.dot(step);
      double s = 1.0;
      bool moved = false;
      while (s > 1e-16) {
        const Vector trial = y + s * step;
        const auto phi1 = barrier.value(trial);
        if (phi1) {
          const double change = -t * s * slope + (*phi1 - phi0);
          if (change <= -0.25 * s * decrement || decrement < 1e-6) {
            moved = trial != y;  // a step below rounding leaves y unchanged
            y = trial;
            break;
          }
        }
        s *= 0.5;
      }
      if (!moved) break;  // Numerically centred as far as double allows.
    }
    if (stalled) break;
    if (nu / t <= options.gap_tol) break;
    t *= options.growth;
  }

  barrier.derivatives(y, grad, hess, inverses, slacks);
  sol.a = barrier.matrix_part(y);
  sol.z = barrier.scalar_part(y);
  sol.objective = c.dot(y);
  for (auto& g : inverses) sol.block_duals.push_back(g / t);
  sol.linear_duals = slacks.cwiseInverse() / t;
  sol.gap_bound = nu / t;
  sol.converged = !stalled;
  return sol;
}

}  // namespace reap::sdp
