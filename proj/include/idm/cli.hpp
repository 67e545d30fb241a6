#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "idm/recommender.hpp"
#include "idm/similarity.hpp"

namespace idm::cli {

/// Every setting of a run. Resolution order: built-in defaults, then the
/// config file, then command-line flags.
struct RunConfig {
  // data
  std::string input;
  std::string format = "csv";
  std::string separator;
  bool has_header = false;
  std::size_t user_column = 0;
  std::size_t item_column = 1;
  std::size_t rating_column = 2;
  std::optional<double> rating_min;
  std::optional<double> rating_max;
  std::string dataset;
  std::size_t sample_users = 0;
  std::size_t sample_items = 0;
  std::string item_sampling = "random";

  AlgoConfig algo;
  std::string model;
  std::size_t l = 10;

  double test_fraction = 0.2;
  double relevance_threshold = 4.0;

  bool warm_start = false;
  std::size_t warm_start_iters = 20;
  std::vector<std::size_t> top_k = {1, 5, 10};
  std::vector<double> thresholds = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

  std::size_t feature_k = 60;
  std::optional<double> epsilon;
  double epsilon_quantile = 0.25;
  std::size_t epsilon_max_pairs = 200000;
  Distance user_distance = Distance::cosine;
  Distance item_distance = Distance::cosine;

  std::size_t max_depth = 8;
  std::size_t min_samples_leaf = 5;
  double holdout_fraction = 0.0;
  std::string features;
  std::string influence;

  Distance mds_distance = Distance::cosine;
  std::size_t max_points = 2000;
  std::size_t smacof_iters = 0;
  std::size_t segments = 4;

  std::uint64_t seed = 42;
  std::string out_dir = ".";
  std::size_t workers = 1;
};

/// Sets one dotted key, e.g. "knn.k" = "60". Unknown keys and malformed
/// values raise UsageError.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Parses `key = value` lines; '#' starts a comment. Errors name the line.
std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text,
                                                                   const std::string& source);

/// Every key with its resolved value, sorted by key.
nlohmann::ordered_json to_json(const RunConfig& config);

/// Names of all accepted keys.
const std::vector<std::string>& config_keys();

/// Runs one command line (without the program name). Returns the exit code:
/// 0 success, 1 computation failure, 2 usage or I/O error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace idm::cli
