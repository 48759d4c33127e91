#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hinmega/common.hpp"

namespace hinmega::tensor {

// Dense N-th order tensor, row-major (last index fastest).
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(std::vector<std::int64_t> shape);
  DenseTensor(std::vector<std::int64_t> shape, std::vector<double> data);

  int order() const { return static_cast<int>(shape_.size()); }
  const std::vector<std::int64_t>& shape() const { return shape_; }
  std::int64_t dim(int mode) const { return shape_.at(static_cast<std::size_t>(mode - 1)); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<const double> values() const { return data_; }

  double at(std::span<const std::int64_t> index) const { return data_[flat(index)]; }
  double& at(std::span<const std::int64_t> index) { return data_[flat(index)]; }
  double operator()(std::int64_t i, std::int64_t j) const;
  double& operator()(std::int64_t i, std::int64_t j);
  double operator()(std::int64_t i, std::int64_t j, std::int64_t k) const;
  double& operator()(std::int64_t i, std::int64_t j, std::int64_t k);

  double frobenius_norm() const;
  bool all_finite() const;

  bool operator==(const DenseTensor&) const = default;

 private:
  std::size_t flat(std::span<const std::int64_t> index) const;

  std::vector<std::int64_t> shape_;
  std::vector<double> data_;
};

// Element (i1,...,iN) = prod_n x^(n)[i_n].
DenseTensor outer_product(const std::vector<Eigen::VectorXd>& vectors);

// Mode-n unfolding (n is 1-based). Column ordering follows the convention
// where [[A,B,C]] unfolds as X(1) = A (C kr B)^T, X(2) = B (C kr A)^T,
// X(3) = C (B kr A)^T: lower remaining modes vary fastest.
Eigen::MatrixXd matricize(const DenseTensor& t, int mode);

// Inverse of matricize for the given shape.
DenseTensor fold(const Eigen::MatrixXd& unfolded, int mode,
                 std::vector<std::int64_t> shape);

// Columnwise Kronecker product: column r of the result is A.col(r) (x) B.col(r),
// with B's row index varying fastest.
Eigen::MatrixXd khatri_rao(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// X^(N) kr ... kr X^(skip+1) kr X^(skip-1) kr ... kr X^(1); skip is 1-based.
Eigen::MatrixXd khatri_rao_skip(const std::vector<Eigen::MatrixXd>& factors, int skip);

struct FactorSet {
  std::vector<Eigen::MatrixXd> factors;  // factor n is I_n x R

  int rank() const { return factors.empty() ? 0 : static_cast<int>(factors[0].cols()); }
  int order() const { return static_cast<int>(factors.size()); }
};

// Sum of rank-one outer products.
DenseTensor reconstruct(const FactorSet& f);
// || t - reconstruct(f) ||_F
double frobenius_error(const DenseTensor& t, const FactorSet& f);

struct CpOptions {
  int max_sweeps = 200;
  double tol = 1e-10;   // relative change of the squared-error objective
  double ridge = 1e-12; // fallback regularization for rank-deficient solves
};

struct CpResult {
  FactorSet factors;
  int sweeps = 0;
  bool converged = false;
  double relative_error = 0.0;          // ||t - reconstruct||_F / ||t||_F
  std::vector<double> objective_trace;  // squared error after each sweep
};

// Alternating least squares for the CP factorization. Deterministic seeded
// N(0,1) initialization; the objective is asserted non-increasing per sweep.
CpResult cp_als(const DenseTensor& t, int rank, std::uint64_t seed,
                const CpOptions& options = {});

// Solve A X = B for symmetric positive (semi-)definite A: Cholesky first,
// then a ridge retry, then LDLT. Never forms an explicit inverse.
Eigen::MatrixXd spd_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                          double ridge = 1e-12, bool* used_fallback = nullptr);

// Text header (order, shape, provenance) + row-major float64 payload.
void write_tensor_block(const DenseTensor& t, const std::filesystem::path& path,
                        const std::string& provenance);
DenseTensor read_tensor_block(const std::filesystem::path& path,
                              std::string* provenance = nullptr);

}  // namespace hinmega::tensor
