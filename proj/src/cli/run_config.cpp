#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "idm/cli.hpp"
#include "idm/common.hpp"

namespace idm::cli {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || end != v.data() + v.size()) {
    throw UsageError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || end != v.data() + v.size()) {
    throw UsageError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double to_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  if (!parse_double(v, out) || !std::isfinite(out)) {
    throw UsageError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw UsageError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> parts;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ',')) parts.push_back(trim(part));
  return parts;
}

std::optional<double> to_optional_real(const std::string& key, const std::string& v) {
  if (v.empty() || v == "auto") return std::nullopt;
  return to_real(key, v);
}

std::size_t positive(const std::string& key, std::size_t v) {
  if (v < 1) throw UsageError(key + ": must be >= 1");
  return v;
}

double unit_interval(const std::string& key, double v, bool open_low, bool open_high) {
  if ((open_low ? v <= 0.0 : v < 0.0) || (open_high ? v >= 1.0 : v > 1.0)) {
    throw UsageError(key + ": out of range");
  }
  return v;
}

Distance to_distance(const std::string& key, const std::string& v) {
  try {
    return distance_from_string(v);
  } catch (const Error&) {
    throw UsageError(key + ": unknown distance '" + v + "'");
  }
}

using Json = nlohmann::ordered_json;

Json optional_json(const std::optional<double>& v) {
  return v ? Json(*v) : Json("auto");
}

struct Key {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<Json(const RunConfig&)> get;
};

const std::map<std::string, Key>& registry() {
  static const std::map<std::string, Key> keys = [] {
    std::map<std::string, Key> m;
    m["data.input"] = {[](RunConfig& c, auto&, auto& v) { c.input = v; },
                       [](const RunConfig& c) { return Json(c.input); }};
    m["data.format"] = {[](RunConfig& c, auto& k, auto& v) {
                          if (v != "csv" && v != "tsv" && v != "movielens-dat" && v != "delimited") {
                            throw UsageError(k + ": unknown format '" + v + "'");
                          }
                          c.format = v;
                        },
                        [](const RunConfig& c) { return Json(c.format); }};
    m["data.separator"] = {[](RunConfig& c, auto&, auto& v) { c.separator = v == "\\t" ? "\t" : v; },
                           [](const RunConfig& c) { return Json(c.separator); }};
    m["data.has_header"] = {[](RunConfig& c, auto& k, auto& v) { c.has_header = to_bool(k, v); },
                            [](const RunConfig& c) { return Json(c.has_header); }};
    m["data.user_column"] = {[](RunConfig& c, auto& k, auto& v) { c.user_column = to_size(k, v); },
                             [](const RunConfig& c) { return Json(c.user_column); }};
    m["data.item_column"] = {[](RunConfig& c, auto& k, auto& v) { c.item_column = to_size(k, v); },
                             [](const RunConfig& c) { return Json(c.item_column); }};
    m["data.rating_column"] = {[](RunConfig& c, auto& k, auto& v) { c.rating_column = to_size(k, v); },
                               [](const RunConfig& c) { return Json(c.rating_column); }};
    m["data.rating_min"] = {[](RunConfig& c, auto& k, auto& v) { c.rating_min = to_optional_real(k, v); },
                            [](const RunConfig& c) { return optional_json(c.rating_min); }};
    m["data.rating_max"] = {[](RunConfig& c, auto& k, auto& v) { c.rating_max = to_optional_real(k, v); },
                            [](const RunConfig& c) { return optional_json(c.rating_max); }};
    m["data.dataset"] = {[](RunConfig& c, auto&, auto& v) { c.dataset = v; },
                         [](const RunConfig& c) { return Json(c.dataset); }};
    m["data.sample_users"] = {[](RunConfig& c, auto& k, auto& v) { c.sample_users = to_size(k, v); },
                              [](const RunConfig& c) { return Json(c.sample_users); }};
    m["data.sample_items"] = {[](RunConfig& c, auto& k, auto& v) { c.sample_items = to_size(k, v); },
                              [](const RunConfig& c) { return Json(c.sample_items); }};
    m["data.item_sampling"] = {[](RunConfig& c, auto& k, auto& v) {
                                 if (v != "random" && v != "popular") {
                                   throw UsageError(k + ": expected random or popular");
                                 }
                                 c.item_sampling = v;
                               },
                               [](const RunConfig& c) { return Json(c.item_sampling); }};

    m["algo.name"] = {[](RunConfig& c, auto& k, auto& v) {
                        try {
                          c.algo.algorithm = algorithm_from_string(v);
                        } catch (const Error&) {
                          throw UsageError(k + ": unknown algorithm '" + v + "'");
                        }
                      },
                      [](const RunConfig& c) { return Json(to_string(c.algo.algorithm)); }};
    m["algo.model"] = {[](RunConfig& c, auto&, auto& v) { c.model = v; },
                       [](const RunConfig& c) { return Json(c.model); }};
    m["knn.k"] = {[](RunConfig& c, auto& k, auto& v) { c.algo.knn.k = positive(k, to_size(k, v)); },
                  [](const RunConfig& c) { return Json(c.algo.knn.k); }};
    m["knn.similarity"] = {[](RunConfig& c, auto& k, auto& v) {
                             try {
                               c.algo.knn.similarity.kind = similarity_from_string(v);
                             } catch (const Error&) {
                               throw UsageError(k + ": unknown similarity '" + v + "'");
                             }
                           },
                           [](const RunConfig& c) { return Json(to_string(c.algo.knn.similarity.kind)); }};
    m["knn.shrinkage"] = {[](RunConfig& c, auto& k, auto& v) { c.algo.knn.similarity.shrinkage = to_size(k, v); },
                          [](const RunConfig& c) { return Json(c.algo.knn.similarity.shrinkage); }};
    m["nmf.factors"] = {[](RunConfig& c, auto& k, auto& v) { c.algo.nmf.factors = positive(k, to_size(k, v)); },
                        [](const RunConfig& c) { return Json(c.algo.nmf.factors); }};
    m["nmf.max_iters"] = {[](RunConfig& c, auto& k, auto& v) { c.algo.nmf.max_iters = to_size(k, v); },
                          [](const RunConfig& c) { return Json(c.algo.nmf.max_iters); }};
    m["nmf.tolerance"] = {[](RunConfig& c, auto& k, auto& v) {
                            c.algo.nmf.tolerance = to_real(k, v);
                            if (c.algo.nmf.tolerance < 0.0) throw UsageError(k + ": must be >= 0");
                          },
                          [](const RunConfig& c) { return Json(c.algo.nmf.tolerance); }};
    m["nmf.mask_missing"] = {[](RunConfig& c, auto& k, auto& v) { c.algo.nmf.mask_missing = to_bool(k, v); },
                             [](const RunConfig& c) { return Json(c.algo.nmf.mask_missing); }};
    m["nmf.divergence_tolerance"] = {[](RunConfig& c, auto& k, auto& v) {
                                       c.algo.nmf.divergence_tolerance = to_real(k, v);
                                       if (c.algo.nmf.divergence_tolerance < 0.0) {
                                         throw UsageError(k + ": must be >= 0");
                                       }
                                     },
                                     [](const RunConfig& c) { return Json(c.algo.nmf.divergence_tolerance); }};
    m["recommend.l"] = {[](RunConfig& c, auto& k, auto& v) { c.l = positive(k, to_size(k, v)); },
                        [](const RunConfig& c) { return Json(c.l); }};

    m["evaluate.test_fraction"] = {[](RunConfig& c, auto& k, auto& v) {
                                     c.test_fraction = unit_interval(k, to_real(k, v), true, true);
                                   },
                                   [](const RunConfig& c) { return Json(c.test_fraction); }};
    m["evaluate.relevance_threshold"] = {[](RunConfig& c, auto& k, auto& v) { c.relevance_threshold = to_real(k, v); },
                                         [](const RunConfig& c) { return Json(c.relevance_threshold); }};

    m["influence.warm_start"] = {[](RunConfig& c, auto& k, auto& v) { c.warm_start = to_bool(k, v); },
                                 [](const RunConfig& c) { return Json(c.warm_start); }};
    m["influence.warm_start_iters"] = {[](RunConfig& c, auto& k, auto& v) {
                                         c.warm_start_iters = positive(k, to_size(k, v));
                                       },
                                       [](const RunConfig& c) { return Json(c.warm_start_iters); }};
    m["influence.top_k"] = {[](RunConfig& c, auto& k, auto& v) {
                              std::vector<std::size_t> list;
                              for (const auto& part : split_list(v)) list.push_back(positive(k, to_size(k, part)));
                              if (list.empty()) throw UsageError(k + ": empty list");
                              c.top_k = list;
                            },
                            [](const RunConfig& c) { return Json(c.top_k); }};
    m["influence.thresholds"] = {[](RunConfig& c, auto& k, auto& v) {
                                   std::vector<double> list;
                                   for (const auto& part : split_list(v)) {
                                     list.push_back(unit_interval(k, to_real(k, part), false, false));
                                   }
                                   if (list.empty()) throw UsageError(k + ": empty list");
                                   c.thresholds = list;
                                 },
                                 [](const RunConfig& c) { return Json(c.thresholds); }};

    m["features.k"] = {[](RunConfig& c, auto& k, auto& v) { c.feature_k = positive(k, to_size(k, v)); },
                       [](const RunConfig& c) { return Json(c.feature_k); }};
    m["features.epsilon"] = {[](RunConfig& c, auto& k, auto& v) {
                               c.epsilon = to_optional_real(k, v);
                               if (c.epsilon && !(*c.epsilon > 0.0)) throw UsageError(k + ": must be > 0");
                             },
                             [](const RunConfig& c) { return optional_json(c.epsilon); }};
    m["features.epsilon_quantile"] = {[](RunConfig& c, auto& k, auto& v) {
                                        c.epsilon_quantile = unit_interval(k, to_real(k, v), false, false);
                                      },
                                      [](const RunConfig& c) { return Json(c.epsilon_quantile); }};
    m["features.epsilon_max_pairs"] = {[](RunConfig& c, auto& k, auto& v) {
                                         c.epsilon_max_pairs = positive(k, to_size(k, v));
                                       },
                                       [](const RunConfig& c) { return Json(c.epsilon_max_pairs); }};
    m["features.user_distance"] = {[](RunConfig& c, auto& k, auto& v) { c.user_distance = to_distance(k, v); },
                                   [](const RunConfig& c) { return Json(to_string(c.user_distance)); }};
    m["features.item_distance"] = {[](RunConfig& c, auto& k, auto& v) { c.item_distance = to_distance(k, v); },
                                   [](const RunConfig& c) { return Json(to_string(c.item_distance)); }};

    m["tree.max_depth"] = {[](RunConfig& c, auto& k, auto& v) {
                             c.max_depth = to_size(k, v);
                             if (c.max_depth < 1 || c.max_depth > 10) throw UsageError(k + ": must lie in [1, 10]");
                           },
                           [](const RunConfig& c) { return Json(c.max_depth); }};
    m["tree.min_samples_leaf"] = {[](RunConfig& c, auto& k, auto& v) {
                                    c.min_samples_leaf = positive(k, to_size(k, v));
                                  },
                                  [](const RunConfig& c) { return Json(c.min_samples_leaf); }};
    m["tree.holdout_fraction"] = {[](RunConfig& c, auto& k, auto& v) {
                                    c.holdout_fraction = unit_interval(k, to_real(k, v), false, true);
                                  },
                                  [](const RunConfig& c) { return Json(c.holdout_fraction); }};
    m["tree.features"] = {[](RunConfig& c, auto&, auto& v) { c.features = v; },
                          [](const RunConfig& c) { return Json(c.features); }};
    m["tree.influence"] = {[](RunConfig& c, auto&, auto& v) { c.influence = v; },
                           [](const RunConfig& c) { return Json(c.influence); }};

    m["mds.distance"] = {[](RunConfig& c, auto& k, auto& v) { c.mds_distance = to_distance(k, v); },
                         [](const RunConfig& c) { return Json(to_string(c.mds_distance)); }};
    m["mds.max_points"] = {[](RunConfig& c, auto& k, auto& v) {
                             c.max_points = to_size(k, v);
                             if (c.max_points < 3) throw UsageError(k + ": must be >= 3");
                           },
                           [](const RunConfig& c) { return Json(c.max_points); }};
    m["mds.smacof_iters"] = {[](RunConfig& c, auto& k, auto& v) { c.smacof_iters = to_size(k, v); },
                             [](const RunConfig& c) { return Json(c.smacof_iters); }};
    m["mds.segments"] = {[](RunConfig& c, auto& k, auto& v) { c.segments = positive(k, to_size(k, v)); },
                         [](const RunConfig& c) { return Json(c.segments); }};

    m["run.seed"] = {[](RunConfig& c, auto& k, auto& v) {
                       c.seed = to_u64(k, v);
                       c.algo.nmf.seed = c.seed;
                     },
                     [](const RunConfig& c) { return Json(c.seed); }};
    m["run.out_dir"] = {[](RunConfig& c, auto& k, auto& v) {
                          if (v.empty()) throw UsageError(k + ": must not be empty");
                          c.out_dir = v;
                        },
                        [](const RunConfig& c) { return Json(c.out_dir); }};
    m["run.workers"] = {[](RunConfig& c, auto& k, auto& v) { c.workers = to_size(k, v); },
                        [](const RunConfig& c) { return Json(c.workers); }};
    return m;
  }();
  return keys;
}

}  // namespace

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  const auto& keys = registry();
  const auto it = keys.find(key);
  if (it == keys.end()) throw UsageError("unknown config key '" + key + "'");
  it->second.set(config, key, value);
}

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text,
                                                                   const std::string& source) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::stringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(source + ":" + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw UsageError(source + ":" + std::to_string(line_no) + ": empty key");
    if (!registry().count(key)) {
      throw UsageError(source + ":" + std::to_string(line_no) + ": unknown config key '" + key + "'");
    }
    entries.emplace_back(std::move(key), trim(line.substr(eq + 1)));
  }
  return entries;
}

nlohmann::ordered_json to_json(const RunConfig& config) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [key, entry] : registry()) j[key] = entry.get(config);
  return j;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [key, entry] : registry()) out.push_back(key);
    return out;
  }();
  return names;
}

}  // namespace idm::cli
