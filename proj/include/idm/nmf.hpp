#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "idm/dataset.hpp"

namespace idm {

struct NmfOptions {
  std::size_t factors = 40;
  std::uint64_t seed = 42;
  std::size_t max_iters = 200;
  /// Stop once the relative objective improvement drops below this.
  double tolerance = 1e-5;
  /// Fit observed entries only; false treats missing entries as zeros.
  bool mask_missing = true;
  /// An objective increase larger than this (relative to max(1, previous))
  /// is reported as divergence.
  double divergence_tolerance = 1e-9;

  bool operator==(const NmfOptions&) const = default;
};

/// Row-major dense factor matrix.
struct FactorMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }

  bool operator==(const FactorMatrix&) const = default;
};

/// Fitted non-negative factorization M ~ p q^T.
class NmfModel {
 public:
  /// Multiplicative updates from a seeded initialization. Each user and
  /// item row is initialized from its own stream keyed on (seed, external
  /// id), so removing a user leaves every other row's start unchanged.
  static NmfModel train(std::shared_ptr<const RatingsDataset> data, const NmfOptions& options);

  /// Continues from given factors for `iterations` updates.
  static NmfModel train_from(std::shared_ptr<const RatingsDataset> data, const NmfOptions& options,
                             FactorMatrix p, FactorMatrix q, std::size_t iterations);

  static NmfModel from_factors(std::shared_ptr<const RatingsDataset> data, const NmfOptions& options,
                               FactorMatrix p, FactorMatrix q, std::vector<double> history);

  const RatingsDataset& dataset() const { return *data_; }
  const std::shared_ptr<const RatingsDataset>& dataset_ptr() const { return data_; }
  const NmfOptions& options() const { return options_; }
  std::size_t factors() const { return p_.cols; }
  const FactorMatrix& user_factors() const { return p_; }
  const FactorMatrix& item_factors() const { return q_; }

  /// Objective after initialization followed by one entry per iteration.
  const std::vector<double>& objective_history() const { return history_; }
  double final_objective() const { return history_.back(); }
  std::size_t iterations() const { return history_.size() - 1; }

  /// M'(u, i) = p_u . q_i
  double predict(UserIndex u, ItemIndex i) const;

 private:
  NmfModel() = default;

  std::shared_ptr<const RatingsDataset> data_;
  NmfOptions options_;
  FactorMatrix p_;
  FactorMatrix q_;
  std::vector<double> history_;
};

/// Seeded initialization used by NmfModel::train.
void nmf_initialize(const RatingsDataset& ds, const NmfOptions& options, FactorMatrix& p,
                    FactorMatrix& q);

/// ||M - p q^T||_F^2, over observed entries only when `mask_missing`.
double nmf_objective(const RatingsDataset& ds, const FactorMatrix& p, const FactorMatrix& q,
                     bool mask_missing);

}  // namespace idm
