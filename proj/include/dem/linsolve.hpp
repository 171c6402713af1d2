#pragma once

#include "dem/types.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

namespace dem {

// Symmetric operator made of 6x6 blocks. Only the diagonal and the upper
// triangle are stored; block (j, i) is the transpose of block (i, j).
template <typename Scalar>
class BlockSparseMatrix {
 public:
  using Block = Eigen::Matrix<Scalar, 6, 6>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct OffDiagonal {
    int row;
    int col;
    Block block;
  };

  BlockSparseMatrix() = default;
  explicit BlockSparseMatrix(int block_count) : diagonal_(block_count, Block::Zero()) {}

  static BlockSparseMatrix diagonal(const Vec& d) {
    BlockSparseMatrix a(static_cast<int>(d.size() / 6));
    for (int i = 0; i < a.block_count(); ++i) a.diagonal_[i] = d.template segment<6>(6 * i).asDiagonal();
    return a;
  }

  int block_count() const { return static_cast<int>(diagonal_.size()); }
  int rows() const { return 6 * block_count(); }
  int cols() const { return rows(); }

  // A(i, j) += b and, for i != j, A(j, i) += b^T.
  void add(int i, int j, const Block& b) {
    if (i == j) {
      diagonal_[i] += b;
      return;
    }
    if (i > j) {
      add(j, i, b.transpose());
      return;
    }
    const std::uint64_t key = (static_cast<std::uint64_t>(i) << 32) | static_cast<std::uint32_t>(j);
    auto [it, inserted] = index_.try_emplace(key, off_.size());
    if (inserted)
      off_.push_back(OffDiagonal{i, j, b});
    else
      off_[it->second].block += b;
  }

  BlockSparseMatrix& operator*=(Scalar s) {
    for (Block& b : diagonal_) b *= s;
    for (OffDiagonal& o : off_) o.block *= s;
    return *this;
  }

  BlockSparseMatrix& operator+=(const BlockSparseMatrix& other) {
    if (other.block_count() != block_count()) throw DimensionMismatch("block matrix sizes differ");
    for (int i = 0; i < block_count(); ++i) diagonal_[i] += other.diagonal_[i];
    for (const OffDiagonal& o : other.off_) add(o.row, o.col, o.block);
    return *this;
  }

  const Block& diagonal_block(int i) const { return diagonal_[i]; }
  const std::vector<OffDiagonal>& off_diagonal() const { return off_; }

  Block block(int i, int j) const {
    if (i == j) return diagonal_[i];
    const bool upper = i < j;
    const std::uint64_t key = upper ? ((static_cast<std::uint64_t>(i) << 32) | static_cast<std::uint32_t>(j))
                                    : ((static_cast<std::uint64_t>(j) << 32) | static_cast<std::uint32_t>(i));
    auto it = index_.find(key);
    if (it == index_.end()) return Block::Zero();
    return upper ? off_[it->second].block : Block(off_[it->second].block.transpose());
  }

  Vec diagonal_entries() const {
    Vec d(rows());
    for (int i = 0; i < block_count(); ++i) d.template segment<6>(6 * i) = diagonal_[i].diagonal();
    return d;
  }

  Vec matvec(const Vec& x) const {
    if (x.size() != rows()) throw DimensionMismatch("matvec: vector length does not match operator");
    Vec y(rows());
    for (int i = 0; i < block_count(); ++i) y.template segment<6>(6 * i) = diagonal_[i] * x.template segment<6>(6 * i);
    for (const OffDiagonal& o : off_) {
      y.template segment<6>(6 * o.row) += o.block * x.template segment<6>(6 * o.col);
      y.template segment<6>(6 * o.col) += o.block.transpose() * x.template segment<6>(6 * o.row);
    }
    return y;
  }

  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> to_dense() const {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> a =
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(rows(), cols());
    for (int i = 0; i < block_count(); ++i) a.template block<6, 6>(6 * i, 6 * i) = diagonal_[i];
    for (const OffDiagonal& o : off_) {
      a.template block<6, 6>(6 * o.row, 6 * o.col) = o.block;
      a.template block<6, 6>(6 * o.col, 6 * o.row) = o.block.transpose();
    }
    return a;
  }

 private:
  std::vector<Block> diagonal_;
  std::vector<OffDiagonal> off_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

using BlockMatrix = BlockSparseMatrix<real>;

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> matvec(const BlockSparseMatrix<Scalar>& a,
                                                const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x) {
  return a.matvec(x);
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> matvec(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& a,
                                                const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x) {
  if (x.size() != a.cols()) throw DimensionMismatch("matvec: vector length does not match operator");
  return a * x;
}

struct CGSettings {
  real tolerance = 1e-10;  // relative to |b|
  int max_iterations = 0;  // 0 selects 10 * dimension
  bool jacobi = false;
  // Called after every iteration with the iteration number and current iterate.
  std::function<void(int, const Vector&)> observer;
};

template <typename Scalar>
struct CGResult {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x;
  int iterations = 0;
  Scalar residual = 0;  // |b - A x| / |b|
};

struct SolverFailure : Error {
  SolverFailure(const std::string& what, real residual_) : Error(what), residual(residual_) {}
  real residual;
};

struct IndefiniteMatrix : Error {
  using Error::Error;
};

// Conjugate gradients for a symmetric positive definite operator.
template <typename Op, typename Scalar>
CGResult<Scalar> cg_solve(const Op& a, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b,
                          const CGSettings& settings = {}) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index n = b.size();
  if (a.rows() != n) throw DimensionMismatch("cg_solve: right-hand side length does not match operator");

  CGResult<Scalar> result;
  result.x = Vec::Zero(n);
  const Scalar b_norm = b.norm();
  if (b_norm == Scalar(0)) return result;

  Vec inv_diag;
  if (settings.jacobi) {
    Vec d;
    if constexpr (requires { a.diagonal_entries(); })
      d = a.diagonal_entries();
    else
      d = a.diagonal();
    if ((d.array() <= Scalar(0)).any()) throw IndefiniteMatrix("jacobi preconditioner needs a positive diagonal");
    inv_diag = d.cwiseInverse();
  }
  auto precondition = [&](const Vec& r) -> Vec { return settings.jacobi ? Vec(inv_diag.cwiseProduct(r)) : r; };

  const int max_iter = settings.max_iterations > 0 ? settings.max_iterations : static_cast<int>(10 * n);
  Vec r = b;
  Vec z = precondition(r);
  Vec p = z;
  Scalar rz = r.dot(z);
  Scalar r_norm = b_norm;
  for (int it = 1; it <= max_iter; ++it) {
    const Vec ap = matvec(a, p);
    const Scalar curvature = p.dot(ap);
    if (!(curvature > Scalar(0)))
      throw IndefiniteMatrix("cg_solve: non-positive curvature p.Ap = " + std::to_string(double(curvature)));
    const Scalar step = rz / curvature;
    result.x += step * p;
    r -= step * ap;
    r_norm = r.norm();
    result.iterations = it;
    result.residual = r_norm / b_norm;
    if (settings.observer) settings.observer(it, result.x.template cast<real>());
    if (r_norm <= settings.tolerance * b_norm) return result;
    z = precondition(r);
    const Scalar rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  throw SolverFailure("cg_solve: no convergence in " + std::to_string(max_iter) + " iterations (relative residual " +
                          std::to_string(double(r_norm / b_norm)) + ")",
                      double(r_norm / b_norm));
}

}  // namespace dem
