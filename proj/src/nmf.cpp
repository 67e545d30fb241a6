#include "idm/nmf.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "idm/random.hpp"

namespace idm {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

// Gram matrix G = X^T X (cols x cols).
std::vector<double> gram(const FactorMatrix& x) {
  const std::size_t f = x.cols;
  std::vector<double> g(f * f, 0.0);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const auto row = x.row(r);
    for (std::size_t a = 0; a < f; ++a) {
      for (std::size_t b = 0; b < f; ++b) g[a * f + b] += row[a] * row[b];
    }
  }
  return g;
}

void scale_row(std::span<double> row, const std::vector<double>& num, const std::vector<double>& den) {
  for (std::size_t k = 0; k < row.size(); ++k) {
    if (den[k] > 0.0) row[k] *= num[k] / den[k];
  }
}

void update_users(const RatingsDataset& ds, FactorMatrix& p, const FactorMatrix& q, bool masked) {
  const std::size_t f = p.cols;
  std::vector<double> num(f), den(f);
  std::vector<double> qtq;
  if (!masked) qtq = gram(q);
  for (UserIndex u = 0; u < ds.num_users(); ++u) {
    auto pu = p.row(u);
    std::fill(num.begin(), num.end(), 0.0);
    std::fill(den.begin(), den.end(), 0.0);
    const auto items = ds.user_items(u);
    const auto ratings = ds.user_ratings(u);
    for (std::size_t j = 0; j < items.size(); ++j) {
      const auto qi = q.row(items[j]);
      const double pred = masked ? dot(pu, qi) : 0.0;
      for (std::size_t k = 0; k < f; ++k) {
        num[k] += ratings[j] * qi[k];
        if (masked) den[k] += pred * qi[k];
      }
    }
    if (!masked) {
      for (std::size_t k = 0; k < f; ++k) {
        for (std::size_t a = 0; a < f; ++a) den[k] += pu[a] * qtq[a * f + k];
      }
    }
    scale_row(pu, num, den);
  }
}

void update_items(const RatingsDataset& ds, const FactorMatrix& p, FactorMatrix& q, bool masked) {
  const std::size_t f = q.cols;
  std::vector<double> num(f), den(f);
  std::vector<double> ptp;
  if (!masked) ptp = gram(p);
  for (ItemIndex i = 0; i < ds.num_items(); ++i) {
    auto qi = q.row(i);
    std::fill(num.begin(), num.end(), 0.0);
    std::fill(den.begin(), den.end(), 0.0);
    const auto users = ds.item_users(i);
    const auto ratings = ds.item_ratings(i);
    for (std::size_t j = 0; j < users.size(); ++j) {
      const auto pu = p.row(users[j]);
      const double pred = masked ? dot(pu, qi) : 0.0;
      for (std::size_t k = 0; k < f; ++k) {
        num[k] += ratings[j] * pu[k];
        if (masked) den[k] += pred * pu[k];
      }
    }
    if (!masked) {
      for (std::size_t k = 0; k < f; ++k) {
        for (std::size_t a = 0; a < f; ++a) den[k] += qi[a] * ptp[a * f + k];
      }
    }
    scale_row(qi, num, den);
  }
}

NmfModel run(std::shared_ptr<const RatingsDataset> data, const NmfOptions& options,
             FactorMatrix p, FactorMatrix q, std::size_t iterations) {
  const RatingsDataset& ds = *data;
  std::vector<double> history{nmf_objective(ds, p, q, options.mask_missing)};
  for (std::size_t it = 0; it < iterations; ++it) {
    update_users(ds, p, q, options.mask_missing);
    update_items(ds, p, q, options.mask_missing);
    const double prev = history.back();
    const double cur = nmf_objective(ds, p, q, options.mask_missing);
    if (!std::isfinite(cur) ||
        cur - prev > options.divergence_tolerance * std::max(1.0, prev)) {
      throw ComputationError("NMF diverged at iteration " + std::to_string(it + 1) +
                             ": objective " + format_double(prev) + " -> " + format_double(cur));
    }
    history.push_back(cur);
    if (cur == 0.0 || (prev - cur) / prev < options.tolerance) break;
  }
  return NmfModel::from_factors(std::move(data), options, std::move(p), std::move(q), std::move(history));
}

}  // namespace

void nmf_initialize(const RatingsDataset& ds, const NmfOptions& options, FactorMatrix& p,
                    FactorMatrix& q) {
  const std::size_t f = options.factors;
  double total = 0.0;
  for (const auto& t : ds.triplets()) total += t.rating;
  const double mean = total / static_cast<double>(ds.num_ratings());
  const double scale = std::sqrt(std::max(mean, 0.0) / static_cast<double>(f));

  auto fill = [&](FactorMatrix& x, const std::vector<std::string>& ids, std::string_view tag) {
    x.rows = ids.size();
    x.cols = f;
    x.values.assign(x.rows * f, 0.0);
    const std::uint64_t tag_key = stable_hash(tag);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      Rng rng(splitmix64(options.seed ^ tag_key) ^ stable_hash(ids[r]));
      for (double& v : x.row(r)) v = rng.uniform_open() * scale;
    }
  };
  fill(p, ds.user_ids(), "user");
  fill(q, ds.item_ids(), "item");
}

double nmf_objective(const RatingsDataset& ds, const FactorMatrix& p, const FactorMatrix& q,
                     bool mask_missing) {
  double observed = 0.0;
  double cross = 0.0;
  for (UserIndex u = 0; u < ds.num_users(); ++u) {
    const auto items = ds.user_items(u);
    const auto ratings = ds.user_ratings(u);
    for (std::size_t j = 0; j < items.size(); ++j) {
      const double pred = dot(p.row(u), q.row(items[j]));
      const double diff = ratings[j] - pred;
      observed += diff * diff;
      cross += pred * pred;
    }
  }
  if (mask_missing) return observed;
  // Unobserved entries contribute (p q^T)^2 = ||p q^T||_F^2 - observed part.
  const auto ptp = gram(p);
  const auto qtq = gram(q);
  double full = 0.0;
  for (std::size_t k = 0; k < ptp.size(); ++k) full += ptp[k] * qtq[k];
  return observed + std::max(0.0, full - cross);
}

NmfModel NmfModel::from_factors(std::shared_ptr<const RatingsDataset> data,
                                const NmfOptions& options, FactorMatrix p, FactorMatrix q,
                                std::vector<double> history) {
  if (!data) throw UsageError("NmfModel: no dataset");
  if (p.rows != data->num_users() || q.rows != data->num_items() || p.cols != q.cols ||
      p.values.size() != p.rows * p.cols || q.values.size() != q.rows * q.cols) {
    throw DataError("NmfModel: factor shapes do not match dataset");
  }
  if (history.empty()) history.push_back(nmf_objective(*data, p, q, options.mask_missing));
  NmfModel model;
  model.data_ = std::move(data);
  model.options_ = options;
  model.p_ = std::move(p);
  model.q_ = std::move(q);
  model.history_ = std::move(history);
  return model;
}

NmfModel NmfModel::train(std::shared_ptr<const RatingsDataset> data, const NmfOptions& options) {
  if (!data) throw UsageError("train_nmf: no dataset");
  if (options.factors < 1) throw UsageError("train_nmf: factors must be >= 1");
  if (options.max_iters < 1) throw UsageError("train_nmf: max_iters must be >= 1");
  FactorMatrix p, q;
  nmf_initialize(*data, options, p, q);
  return run(std::move(data), options, std::move(p), std::move(q), options.max_iters);
}

NmfModel NmfModel::train_from(std::shared_ptr<const RatingsDataset> data,
                              const NmfOptions& options, FactorMatrix p, FactorMatrix q,
                              std::size_t iterations) {
  if (!data) throw UsageError("train_nmf: no dataset");
  if (p.rows != data->num_users() || q.rows != data->num_items() || p.cols != q.cols) {
    throw UsageError("train_nmf: warm-start factor shapes do not match dataset");
  }
  return run(std::move(data), options, std::move(p), std::move(q), iterations);
}

double NmfModel::predict(UserIndex u, ItemIndex i) const { return dot(p_.row(u), q_.row(i)); }

}  // namespace idm
