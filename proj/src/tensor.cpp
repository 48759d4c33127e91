#include "hinmega/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hinmega/io.hpp"

namespace hinmega::tensor {

namespace {

std::int64_t shape_size(const std::vector<std::int64_t>& shape) {
  if (shape.empty()) throw InputError("tensor order must be >= 1");
  std::int64_t n = 1;
  for (const std::int64_t d : shape) {
    if (d < 1) throw InputError("tensor dimensions must be positive");
    n = checked_mul(n, d);
  }
  return n;
}

void check_mode(const DenseTensor& t, int mode) {
  if (mode < 1 || mode > t.order())
    throw InputError("mode " + std::to_string(mode) + " out of range for order " +
                     std::to_string(t.order()) + " tensor");
}

// Column strides of the mode-n unfolding: lower remaining modes vary fastest.
std::vector<std::int64_t> unfold_col_strides(const std::vector<std::int64_t>& shape,
                                             int mode) {
  std::vector<std::int64_t> strides(shape.size(), 0);
  std::int64_t acc = 1;
  for (std::size_t k = 0; k < shape.size(); ++k) {
    if (static_cast<int>(k) == mode - 1) continue;
    strides[k] = acc;
    acc *= shape[k];
  }
  return strides;
}

}  // namespace

DenseTensor::DenseTensor(std::vector<std::int64_t> shape)
    : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_size(shape_)), 0.0) {}

DenseTensor::DenseTensor(std::vector<std::int64_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (static_cast<std::int64_t>(data_.size()) != shape_size(shape_))
    throw InputError("tensor buffer length does not match shape");
}

std::size_t DenseTensor::flat(std::span<const std::int64_t> index) const {
  std::int64_t offset = 0;
  for (std::size_t k = 0; k < shape_.size(); ++k) offset = offset * shape_[k] + index[k];
  return static_cast<std::size_t>(offset);
}

double DenseTensor::operator()(std::int64_t i, std::int64_t j) const {
  const std::int64_t idx[] = {i, j};
  return at(idx);
}
double& DenseTensor::operator()(std::int64_t i, std::int64_t j) {
  const std::int64_t idx[] = {i, j};
  return at(idx);
}
double DenseTensor::operator()(std::int64_t i, std::int64_t j, std::int64_t k) const {
  const std::int64_t idx[] = {i, j, k};
  return at(idx);
}
double& DenseTensor::operator()(std::int64_t i, std::int64_t j, std::int64_t k) {
  const std::int64_t idx[] = {i, j, k};
  return at(idx);
}

double DenseTensor::frobenius_norm() const {
  double sum = 0.0;
  for (const double v : data_) sum += v * v;
  return std::sqrt(sum);
}

bool DenseTensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

DenseTensor outer_product(const std::vector<Eigen::VectorXd>& vectors) {
  if (vectors.empty()) throw InputError("outer_product needs at least one vector");
  std::vector<std::int64_t> shape;
  shape.reserve(vectors.size());
  for (const auto& v : vectors) shape.push_back(v.size());
  DenseTensor out(shape);
  const std::size_t n = vectors.size();
  std::vector<std::int64_t> idx(n, 0);
  for (std::int64_t flat = 0; flat < out.size(); ++flat) {
    double value = 1.0;
    for (std::size_t k = 0; k < n; ++k) value *= vectors[k](idx[k]);
    out.data()[flat] = value;
    for (std::size_t k = n; k-- > 0;) {
      if (++idx[k] < shape[k]) break;
      idx[k] = 0;
    }
  }
  return out;
}

Eigen::MatrixXd matricize(const DenseTensor& t, int mode) {
  check_mode(t, mode);
  const auto& shape = t.shape();
  const std::int64_t rows = shape[static_cast<std::size_t>(mode - 1)];
  const std::int64_t cols = t.size() / rows;
  const auto col_strides = unfold_col_strides(shape, mode);
  Eigen::MatrixXd out(rows, cols);
  std::vector<std::int64_t> idx(shape.size(), 0);
  for (std::int64_t flat = 0; flat < t.size(); ++flat) {
    std::int64_t col = 0;
    for (std::size_t k = 0; k < shape.size(); ++k) col += idx[k] * col_strides[k];
    out(idx[static_cast<std::size_t>(mode - 1)], col) = t.data()[flat];
    for (std::size_t k = shape.size(); k-- > 0;) {
      if (++idx[k] < shape[k]) break;
      idx[k] = 0;
    }
  }
  return out;
}

DenseTensor fold(const Eigen::MatrixXd& unfolded, int mode,
                 std::vector<std::int64_t> shape) {
  const std::int64_t total = shape_size(shape);
  if (mode < 1 || mode > static_cast<int>(shape.size()))
    throw InputError("fold: mode out of range");
  const std::int64_t rows = shape[static_cast<std::size_t>(mode - 1)];
  if (unfolded.rows() != rows || unfolded.cols() != total / rows)
    throw InputError("fold: matrix does not match target shape");
  DenseTensor out(shape);
  const auto col_strides = unfold_col_strides(shape, mode);
  std::vector<std::int64_t> idx(shape.size(), 0);
  for (std::int64_t flat = 0; flat < out.size(); ++flat) {
    std::int64_t col = 0;
    for (std::size_t k = 0; k < shape.size(); ++k) col += idx[k] * col_strides[k];
    out.data()[flat] = unfolded(idx[static_cast<std::size_t>(mode - 1)], col);
    for (std::size_t k = shape.size(); k-- > 0;) {
      if (++idx[k] < shape[k]) break;
      idx[k] = 0;
    }
  }
  return out;
}

Eigen::MatrixXd khatri_rao(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols())
    throw InputError("khatri_rao: factors must share the column count");
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j)
      out.row(i * b.rows() + j) = a.row(i).cwiseProduct(b.row(j));
  return out;
}

Eigen::MatrixXd khatri_rao_skip(const std::vector<Eigen::MatrixXd>& factors, int skip) {
  Eigen::MatrixXd acc;
  bool first = true;
  for (int n = static_cast<int>(factors.size()); n >= 1; --n) {
    if (n == skip) continue;
    const Eigen::MatrixXd& f = factors[static_cast<std::size_t>(n - 1)];
    if (first) {
      acc = f;
      first = false;
    } else {
      acc = khatri_rao(acc, f);
    }
  }
  if (first) throw InputError("khatri_rao_skip: nothing to combine");
  return acc;
}

DenseTensor reconstruct(const FactorSet& f) {
  if (f.factors.empty()) throw InputError("empty factor set");
  const int rank = f.rank();
  for (const auto& m : f.factors)
    if (m.cols() != rank) throw InputError("factor set has inconsistent ranks");
  std::vector<std::int64_t> shape;
  shape.reserve(f.factors.size());
  for (const auto& m : f.factors) shape.push_back(m.rows());
  DenseTensor out(shape);
  const std::size_t n = f.factors.size();
  std::vector<std::int64_t> idx(n, 0);
  for (std::int64_t flat = 0; flat < out.size(); ++flat) {
    double sum = 0.0;
    for (int r = 0; r < rank; ++r) {
      double prod = 1.0;
      for (std::size_t k = 0; k < n; ++k) prod *= f.factors[k](idx[k], r);
      sum += prod;
    }
    out.data()[flat] = sum;
    for (std::size_t k = n; k-- > 0;) {
      if (++idx[k] < shape[k]) break;
      idx[k] = 0;
    }
  }
  return out;
}

double frobenius_error(const DenseTensor& t, const FactorSet& f) {
  const DenseTensor approx = reconstruct(f);
  if (approx.shape() != t.shape())
    throw InputError("frobenius_error: factor set shape does not match tensor");
  double sum = 0.0;
  for (std::int64_t i = 0; i < t.size(); ++i) {
    const double d = t.data()[i] - approx.data()[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

Eigen::MatrixXd spd_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                          double ridge, bool* used_fallback) {
  if (used_fallback) *used_fallback = false;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt.solve(b);
  if (used_fallback) *used_fallback = true;
  const Eigen::MatrixXd regularized =
      a + ridge * Eigen::MatrixXd::Identity(a.rows(), a.cols());
  Eigen::LLT<Eigen::MatrixXd> retry(regularized);
  if (retry.info() == Eigen::Success) return retry.solve(b);
  return regularized.ldlt().solve(b);
}

CpResult cp_als(const DenseTensor& t, int rank, std::uint64_t seed,
                const CpOptions& options) {
  if (rank < 1) throw InputError("cp_als: rank must be >= 1");
  if (t.order() < 2) throw InputError("cp_als: tensor order must be >= 2");
  if (!t.all_finite()) throw InputError("cp_als: tensor has non-finite entries");

  const int order = t.order();
  Rng rng(seed);
  CpResult result;
  result.factors.factors.resize(static_cast<std::size_t>(order));
  for (int n = 1; n <= order; ++n) {
    Eigen::MatrixXd& f = result.factors.factors[static_cast<std::size_t>(n - 1)];
    f.resize(t.dim(n), rank);
    for (Eigen::Index i = 0; i < f.rows(); ++i)
      for (Eigen::Index r = 0; r < f.cols(); ++r) f(i, r) = rng.gaussian();
  }

  // Cache the unfoldings; they do not change across sweeps.
  std::vector<Eigen::MatrixXd> unfoldings;
  unfoldings.reserve(static_cast<std::size_t>(order));
  for (int n = 1; n <= order; ++n) unfoldings.push_back(matricize(t, n));

  const double norm_t = t.frobenius_norm();
  double prev_objective = std::numeric_limits<double>::infinity();
  for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    for (int n = 1; n <= order; ++n) {
      // Gram of the Khatri-Rao co-factor via the Hadamard identity.
      Eigen::MatrixXd gram = Eigen::MatrixXd::Ones(rank, rank);
      for (int m = 1; m <= order; ++m) {
        if (m == n) continue;
        const auto& f = result.factors.factors[static_cast<std::size_t>(m - 1)];
        gram = gram.cwiseProduct((f.transpose() * f).eval());
      }
      const Eigen::MatrixXd kr = khatri_rao_skip(result.factors.factors, n);
      const Eigen::MatrixXd rhs = unfoldings[static_cast<std::size_t>(n - 1)] * kr;
      result.factors.factors[static_cast<std::size_t>(n - 1)] =
          spd_solve(gram, rhs.transpose(), options.ridge).transpose();
    }

    const double err = frobenius_error(t, result.factors);
    const double objective = err * err;
    if (!std::isfinite(objective))
      throw NumericalError("cp_als: objective became non-finite");
    if (objective > prev_objective + 1e-10 * std::max(1.0, prev_objective))
      throw NumericalError("cp_als: objective increased across a sweep");
    result.objective_trace.push_back(objective);
    result.sweeps = sweep;
    result.relative_error = norm_t > 0.0 ? err / norm_t : err;
    if (std::isfinite(prev_objective) &&
        std::abs(prev_objective - objective) <=
            options.tol * std::max(prev_objective, 1e-300)) {
      result.converged = true;
      break;
    }
    prev_objective = objective;
  }
  return result;
}

void write_tensor_block(const DenseTensor& t, const std::filesystem::path& path,
                        const std::string& provenance) {
  io::BlockHeader header;
  header.kind = "tensor";
  header.set("order", std::to_string(t.order()));
  std::ostringstream shape;
  for (int n = 0; n < t.order(); ++n) {
    if (n) shape << ' ';
    shape << t.shape()[static_cast<std::size_t>(n)];
  }
  header.set("shape", shape.str());
  header.set("provenance", provenance);
  io::write_block_file(path, header, t.values());
}

DenseTensor read_tensor_block(const std::filesystem::path& path, std::string* provenance) {
  std::vector<double> payload;
  const io::BlockHeader header = io::read_block_file(path, payload);
  if (header.kind != "tensor") throw InputError("expected a tensor block in " + path.string());
  std::istringstream shape_in(header.require("shape"));
  std::vector<std::int64_t> shape;
  std::int64_t d = 0;
  while (shape_in >> d) shape.push_back(d);
  if (provenance) {
    const std::string* p = header.find("provenance");
    *provenance = p ? *p : "";
  }
  return DenseTensor(std::move(shape), std::move(payload));
}

}  // namespace hinmega::tensor
