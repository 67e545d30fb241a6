#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>

#include "idm/analysis.hpp"
#include "idm/cli.hpp"
#include "idm/features.hpp"
#include "idm/influence.hpp"
#include "idm/model_io.hpp"
#include "idm/random.hpp"
#include "idm/recommender.hpp"
#include "idm/regression_tree.hpp"

namespace idm::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------- files

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name, const std::string& source) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(source + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  return fields;
}

CsvTable read_csv(const fs::path& path) {
  std::stringstream in(read_file(path));
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty CSV");
  table.header = split_csv_line(line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != table.header.size()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": wrong field count");
    }
    table.rows.push_back(std::move(fields));
  }
  return table;
}

double csv_real(const std::string& text, const fs::path& path) {
  double v = 0.0;
  if (!parse_double(text, v)) throw DataError(path.string() + ": bad number '" + text + "'");
  return v;
}

// ---------------------------------------------------------------- run context

struct Context {
  RunConfig config;
  std::string command;
  std::ostream& out;
  std::ostream& err;

  fs::path dir() const { return fs::path(config.out_dir); }
  fs::path path(const std::string& name) const { return dir() / name; }

  void sidecar(const std::string& artifact, const std::string& dataset_hash, Json extra = Json::object()) const {
    Json j;
    j["artifact"] = artifact;
    j["command"] = command;
    j["dataset_hash"] = dataset_hash;
    j["config"] = to_json(config);
    for (auto& [key, value] : extra.items()) j[key] = value;
    const fs::path target = path(fs::path(artifact).stem().string() + ".meta.json");
    write_file(target, j.dump(2) + "\n");
  }
};

LoadOptions load_options(const RunConfig& c) {
  LoadOptions o;
  if (c.format == "csv") {
    o.separator = ",";
  } else if (c.format == "tsv") {
    o.separator = "\t";
  } else if (c.format == "movielens-dat") {
    o.format = InputFormat::movielens_dat;
    o.separator = "::";
  } else if (c.separator.empty()) {
    throw UsageError("data.format = delimited needs data.separator");
  }
  if (!c.separator.empty()) o.separator = c.separator;
  o.has_header = c.has_header;
  o.user_column = c.user_column;
  o.item_column = c.item_column;
  o.rating_column = c.rating_column;
  if (c.rating_min.has_value() != c.rating_max.has_value()) {
    throw UsageError("data.rating_min and data.rating_max must be given together");
  }
  if (c.rating_min) o.scale = RatingScale{*c.rating_min, *c.rating_max};
  return o;
}

fs::path dump_sidecar(const fs::path& tsv) {
  fs::path j = tsv;
  return j.replace_extension(".json");
}

RatingsDataset load_raw(const RunConfig& c) {
  RatingsDataset ds = load_ratings(c.input, load_options(c));
  if (c.sample_users > 0 && c.sample_users < ds.num_users()) ds = sample_users(ds, c.sample_users, c.seed);
  if (c.sample_items > 0 && c.sample_items < ds.num_items()) {
    ds = sample_items(ds, c.sample_items, c.seed,
                      c.item_sampling == "popular" ? ItemSampling::popular : ItemSampling::random);
  }
  return ds;
}

std::shared_ptr<const RatingsDataset> load_data(const Context& ctx) {
  const RunConfig& c = ctx.config;
  if (!c.dataset.empty()) {
    return std::make_shared<const RatingsDataset>(load_dataset_dump(c.dataset, dump_sidecar(c.dataset)));
  }
  if (!c.input.empty()) return std::make_shared<const RatingsDataset>(load_raw(c));
  const fs::path staged = ctx.path("dataset.tsv");
  if (fs::exists(staged)) {
    return std::make_shared<const RatingsDataset>(load_dataset_dump(staged, dump_sidecar(staged)));
  }
  throw UsageError("no dataset: pass --input, --dataset, or run ingest into the output directory first");
}

bool same_settings(const AlgoConfig& a, const AlgoConfig& b) {
  if (a.algorithm != b.algorithm) return false;
  return a.algorithm == Algorithm::knn ? a.knn == b.knn : a.nmf == b.nmf;
}

// A stored model is reused when it was trained on the same data with the
// same settings; otherwise the model is trained.
TrainedModel obtain_model(const Context& ctx, std::shared_ptr<const RatingsDataset> data) {
  const RunConfig& c = ctx.config;
  const bool explicit_path = !c.model.empty();
  const fs::path header = explicit_path ? fs::path(c.model) : ctx.path("model.json");
  fs::path payload = header;
  payload.replace_extension(".tsv");
  if (fs::exists(header) && fs::exists(payload)) {
    const Json j = read_json(header);
    const bool settings_match = j.contains("config") && same_settings(algo_config_from_json(j["config"]), c.algo);
    const bool data_match = j.value("dataset_hash", "") == content_hash(*data);
    if (settings_match && data_match) return load_model(header, payload, data);
    if (explicit_path) {
      throw UsageError("model '" + header.string() + "' does not match the dataset or algorithm settings");
    }
  } else if (explicit_path) {
    throw DataError("cannot open model '" + header.string() + "'");
  }
  return train(std::move(data), c.algo, c.workers);
}

std::size_t count_items(const std::vector<RecommendationList>& lists) {
  std::size_t total = 0;
  for (const auto& l : lists) total += l.items.size();
  return total;
}

// ---------------------------------------------------------------- commands

int cmd_ingest(Context& ctx) {
  if (ctx.config.input.empty()) throw UsageError("ingest needs --input");
  const RatingsDataset ds = load_raw(ctx.config);
  const std::string hash = content_hash(ds);
  save_dataset(ds, ctx.path("dataset.tsv"), ctx.path("dataset.json"));
  const DatasetStats stats = compute_stats(ds);
  Json s;
  s["n_users"] = stats.n_users;
  s["n_items"] = stats.n_items;
  s["n_ratings"] = stats.n_ratings;
  s["sparsity"] = stats.sparsity;
  ctx.sidecar("dataset.tsv", hash, Json{{"stats", s}});
  ctx.out << "users " << stats.n_users << ", items " << stats.n_items << ", ratings " << stats.n_ratings
          << ", sparsity " << format_double(stats.sparsity) << "\n";
  return 0;
}

int cmd_train(Context& ctx) {
  const auto data = load_data(ctx);
  const TrainedModel model = train(data, ctx.config.algo, ctx.config.workers);
  save_model(model, ctx.path("model.json"), ctx.path("model.tsv"));
  Json extra;
  if (const auto* knn = std::get_if<KnnModel>(&model)) {
    extra["effective_k"] = knn->k();
    if (knn->k_was_reduced()) ctx.err << "warning: k reduced to " << knn->k() << "\n";
  } else {
    const auto& nmf = std::get<NmfModel>(model);
    extra["iterations"] = nmf.iterations();
    extra["final_objective"] = nmf.final_objective();
  }
  ctx.sidecar("model.json", content_hash(*data), extra);
  ctx.out << "trained " << to_string(ctx.config.algo.algorithm) << " on " << data->num_users() << " users\n";
  return 0;
}

int cmd_evaluate(Context& ctx) {
  const auto data = load_data(ctx);
  TrainTestSplit split = split_train_test(*data, ctx.config.test_fraction, ctx.config.seed);
  const auto train_data = std::make_shared<const RatingsDataset>(std::move(split.train));
  const TrainedModel model = train(train_data, ctx.config.algo, ctx.config.workers);
  const AccuracyResult acc =
      evaluate(model, split.test, ctx.config.l, ctx.config.relevance_threshold, ctx.config.workers);
  Json j;
  j["precision"] = acc.precision;
  j["recall"] = acc.recall;
  j["users_evaluated"] = acc.users_evaluated;
  j["l"] = ctx.config.l;
  j["test_ratings"] = split.test.size();
  write_file(ctx.path("evaluation.json"), j.dump(2) + "\n");
  ctx.sidecar("evaluation.json", content_hash(*data), Json{{"result", j}});
  ctx.out << "P@" << ctx.config.l << " " << format_double(acc.precision) << ", R@" << ctx.config.l << " "
          << format_double(acc.recall) << " over " << acc.users_evaluated << " users\n";
  return 0;
}

std::vector<std::size_t> effective_top_k(const Context& ctx, std::size_t available) {
  std::vector<std::size_t> sizes;
  for (std::size_t k : ctx.config.top_k) {
    const std::size_t clamped = std::min(k, available);
    if (clamped < k) ctx.err << "warning: top_k " << k << " clamped to " << clamped << "\n";
    if (clamped > 0 && std::find(sizes.begin(), sizes.end(), clamped) == sizes.end()) sizes.push_back(clamped);
  }
  std::sort(sizes.begin(), sizes.end());
  return sizes;
}

void write_influence_csv(const Context& ctx, const RatingsDataset& ds, const InfluenceReport& report) {
  std::vector<std::size_t> rank(ds.num_users(), 0);
  for (std::size_t pos = 0; pos < report.ranking.size(); ++pos) rank[report.ranking[pos]] = pos + 1;
  std::string csv = "user_id,influence,rank\n";
  for (UserIndex u = 0; u < ds.num_users(); ++u) {
    csv += csv_field(ds.user_ids()[u]) + ",";
    if (!report.failed(u)) csv += format_double(report.influence[u]) + "," + std::to_string(rank[u]);
    else csv += ",";
    csv += "\n";
  }
  write_file(ctx.path("influence.csv"), csv);
}

int cmd_influence(Context& ctx) {
  const RunConfig& c = ctx.config;
  const auto data = load_data(ctx);
  const std::string hash = content_hash(*data);
  InfluenceOptions options;
  options.l = c.l;
  options.workers = c.workers;
  options.warm_start = c.warm_start;
  options.warm_start_iters = c.warm_start_iters;
  const LeaveOneOutEngine engine(obtain_model(ctx, data), c.algo, options);
  const InfluenceReport report = influence_all(engine, c.workers);

  write_influence_csv(ctx, *data, report);
  Json failures = Json::array();
  for (UserIndex u = 0; u < data->num_users(); ++u) {
    if (report.failed(u)) failures.push_back(Json{{"user_id", data->user_ids()[u]}, {"error", report.failure[u]}});
  }
  const Json common = {{"algorithm", to_json(c.algo)}, {"l", c.l}, {"seed", c.seed},
                       {"approximate", report.approximate}};
  Json extra = common;
  extra["failures"] = failures;
  ctx.sidecar("influence.csv", hash, extra);

  const std::size_t ok = data->num_users() - report.num_failed();
  const auto sizes = effective_top_k(ctx, ok);
  std::string csv = "top_k,theta,fraction_influenced\n";
  if (!sizes.empty()) {
    const auto curves = group_influence_sweep(engine, report, sizes, c.thresholds, c.workers);
    for (const auto& curve : curves) {
      for (std::size_t t = 0; t < curve.thresholds.size(); ++t) {
        csv += std::to_string(curve.top_k) + "," + format_double(curve.thresholds[t]) + "," +
               format_double(curve.fraction[t]) + "\n";
      }
    }
  }
  write_file(ctx.path("group_influence.csv"), csv);
  Json group_extra = common;
  group_extra["top_k"] = sizes;
  ctx.sidecar("group_influence.csv", hash, group_extra);

  for (const auto& f : failures) {
    ctx.err << "warning: influence failed for user " << f["user_id"].get<std::string>() << ": "
            << f["error"].get<std::string>() << "\n";
  }
  ctx.out << "influence computed for " << ok << " of " << data->num_users() << " users\n";
  return ok == 0 ? 1 : 0;
}

int cmd_features(Context& ctx) {
  const RunConfig& c = ctx.config;
  const auto data = load_data(ctx);
  const TrainedModel model = obtain_model(ctx, data);
  std::optional<KnnModel> standalone;
  const KnnModel* neighborhoods = std::get_if<KnnModel>(&model);
  if (!neighborhoods) {
    KnnOptions opts;
    opts.k = c.feature_k;
    opts.similarity = c.algo.knn.similarity;
    standalone = KnnModel::train(data, opts, c.workers);
    neighborhoods = &*standalone;
  }
  const auto lists = recommend_all(model, c.l, c.workers);
  std::vector<ItemSet> sets;
  sets.reserve(lists.size());
  for (const auto& l : lists) sets.push_back(as_item_set(l));

  FeatureConfig fc;
  fc.k = neighborhoods->k();
  fc.similarity = c.algo.knn.similarity;
  fc.user_distance = c.user_distance;
  fc.item_distance = c.item_distance;
  fc.epsilon = c.epsilon;
  fc.epsilon_quantile = c.epsilon_quantile;
  fc.epsilon_max_pairs = c.epsilon_max_pairs;
  fc.seed = c.seed;
  fc.l = c.l;
  fc.workers = c.workers;
  const FeatureTable table = extract_all(*data, *neighborhoods, sets, fc);

  std::string csv = "user_id";
  for (const auto& name : feature_names()) csv += "," + name;
  csv += "\n";
  for (std::size_t u = 0; u < table.rows.size(); ++u) {
    csv += csv_field(table.user_ids[u]);
    for (double v : table.rows[u]) csv += "," + format_double(v);
    csv += "\n";
  }
  write_file(ctx.path("features.csv"), csv);
  ctx.sidecar("features.csv", content_hash(*data),
              Json{{"epsilon", table.epsilon}, {"k", table.k}, {"l", c.l}, {"recommended_items", count_items(lists)}});
  ctx.out << "features written for " << table.rows.size() << " users\n";
  return 0;
}

std::string hash_from_sidecar(const fs::path& artifact) {
  const fs::path meta = artifact.parent_path() / (artifact.stem().string() + ".meta.json");
  if (!fs::exists(meta)) return "";
  const Json j = read_json(meta);
  return j.value("dataset_hash", "");
}

Json metrics_json(const FitMetrics& m) { return Json{{"r2", m.r2}, {"mse", m.mse}}; }

int cmd_fit_tree(Context& ctx) {
  const RunConfig& c = ctx.config;
  const fs::path features_path = c.features.empty() ? ctx.path("features.csv") : fs::path(c.features);
  const fs::path influence_path = c.influence.empty() ? ctx.path("influence.csv") : fs::path(c.influence);
  const CsvTable features = read_csv(features_path);
  const CsvTable influence = read_csv(influence_path);

  std::map<std::string, double> target;
  const std::size_t id_col = influence.column("user_id", influence_path.string());
  const std::size_t inf_col = influence.column("influence", influence_path.string());
  for (const auto& row : influence.rows) {
    if (!row[inf_col].empty()) target[row[id_col]] = csv_real(row[inf_col], influence_path);
  }
  std::vector<std::size_t> cols;
  for (const auto& name : feature_names()) cols.push_back(features.column(name, features_path.string()));
  const std::size_t fid = features.column("user_id", features_path.string());

  std::vector<std::vector<double>> rows;
  std::vector<double> y;
  for (const auto& row : features.rows) {
    const auto it = target.find(row[fid]);
    if (it == target.end()) continue;
    std::vector<double> x;
    for (std::size_t col : cols) x.push_back(csv_real(row[col], features_path));
    rows.push_back(std::move(x));
    y.push_back(it->second);
  }
  if (rows.empty()) throw DataError("fit-tree: no user appears in both feature and influence tables");

  std::vector<std::size_t> train_rows(rows.size());
  std::iota(train_rows.begin(), train_rows.end(), std::size_t{0});
  std::vector<std::size_t> holdout_rows;
  if (c.holdout_fraction > 0.0) {
    const auto held = static_cast<std::size_t>(std::llround(c.holdout_fraction * static_cast<double>(rows.size())));
    if (held < 1 || held >= rows.size()) throw UsageError("fit-tree: holdout leaves no train or test rows");
    Rng rng(c.seed);
    holdout_rows = sample_indices(rows.size(), held, rng);
    std::sort(holdout_rows.begin(), holdout_rows.end());
    std::vector<std::size_t> kept;
    std::set_difference(train_rows.begin(), train_rows.end(), holdout_rows.begin(), holdout_rows.end(),
                        std::back_inserter(kept));
    train_rows = std::move(kept);
  }
  auto design = [&](const std::vector<std::size_t>& which, std::vector<double>& targets) {
    std::vector<double> values;
    targets.clear();
    for (std::size_t r : which) {
      values.insert(values.end(), rows[r].begin(), rows[r].end());
      targets.push_back(y[r]);
    }
    return DesignMatrix(which.size(), kNumFeatures, std::move(values));
  };
  std::vector<double> y_train, y_hold;
  const DesignMatrix x_train = design(train_rows, y_train);
  const RegressionTree tree = RegressionTree::fit(x_train, y_train, TreeOptions{c.max_depth, c.min_samples_leaf});

  Json metrics;
  metrics["train"] = metrics_json(fit_metrics(tree, x_train, y_train));
  if (!holdout_rows.empty()) {
    const DesignMatrix x_hold = design(holdout_rows, y_hold);
    metrics["holdout"] = metrics_json(fit_metrics(tree, x_hold, y_hold));
  }
  Json importances;
  const auto imp = tree.feature_importance();
  for (std::size_t f = 0; f < kNumFeatures; ++f) importances[feature_names()[f]] = imp[f];

  Json doc;
  doc["feature_names"] = feature_names();
  doc["n_samples"] = train_rows.size();
  doc["depth"] = tree.depth();
  doc["leaves"] = tree.num_leaves();
  doc["importances"] = importances;
  doc["metrics"] = metrics;
  doc["tree"] = tree.to_json();
  write_file(ctx.path("tree.json"), doc.dump(2) + "\n");

  std::string csv = "feature,threshold,depth,side,leaf_value\n";
  for (const auto& b : tree.boundaries()) {
    csv += feature_names()[b.feature] + "," + format_double(b.threshold) + "," + std::to_string(b.depth) + "," +
           b.side + "," + format_double(b.leaf_value) + "\n";
  }
  write_file(ctx.path("boundaries.csv"), csv);

  std::string hash = hash_from_sidecar(features_path);
  if (hash.empty()) hash = hash_from_sidecar(influence_path);
  const Json extra{{"metrics", metrics}, {"importances", importances}};
  ctx.sidecar("tree.json", hash, extra);
  ctx.sidecar("boundaries.csv", hash, extra);
  ctx.out << "tree depth " << tree.depth() << ", leaves " << tree.num_leaves() << ", R2 "
          << format_double(metrics["train"]["r2"].get<double>()) << "\n";
  return 0;
}

InfluenceReport influence_for_mds(Context& ctx, std::shared_ptr<const RatingsDataset> data) {
  const RunConfig& c = ctx.config;
  const fs::path path = c.influence.empty() ? ctx.path("influence.csv") : fs::path(c.influence);
  if (!fs::exists(path)) {
    if (!c.influence.empty()) throw DataError("cannot open '" + path.string() + "'");
    InfluenceOptions options;
    options.l = c.l;
    options.workers = c.workers;
    options.warm_start = c.warm_start;
    options.warm_start_iters = c.warm_start_iters;
    const LeaveOneOutEngine engine(obtain_model(ctx, data), c.algo, options);
    return influence_all(engine, c.workers);
  }
  const CsvTable table = read_csv(path);
  const std::size_t id_col = table.column("user_id", path.string());
  const std::size_t inf_col = table.column("influence", path.string());
  std::map<std::string, double> values;
  for (const auto& row : table.rows) {
    if (!row[inf_col].empty()) values[row[id_col]] = csv_real(row[inf_col], path);
  }
  InfluenceReport report;
  report.config = c.algo;
  report.l = c.l;
  const std::size_t n = data->num_users();
  report.influence.assign(n, std::numeric_limits<double>::quiet_NaN());
  report.failure.assign(n, {});
  for (UserIndex u = 0; u < n; ++u) {
    const auto it = values.find(data->user_ids()[u]);
    if (it == values.end()) report.failure[u] = "no influence value";
    else report.influence[u] = it->second;
  }
  rank_report(report);
  return report;
}

int cmd_mds(Context& ctx) {
  const RunConfig& c = ctx.config;
  const auto data = load_data(ctx);
  MdsOptions options;
  options.distance = c.mds_distance;
  options.max_points = c.max_points;
  options.seed = c.seed;
  options.smacof_iters = c.smacof_iters;
  options.workers = c.workers;
  const MdsEmbedding embedding = mds_embed(*data, options);
  const InfluenceReport report = influence_for_mds(ctx, data);
  const auto labels = segment_by_influence(report, c.segments);

  std::vector<std::size_t> point_labels;
  std::string csv = "user_id,x,y,segment,influence\n";
  for (std::size_t p = 0; p < embedding.users.size(); ++p) {
    const UserIndex u = embedding.users[p];
    point_labels.push_back(labels[u]);
    csv += csv_field(data->user_ids()[u]) + "," + format_double(embedding.coordinates[p][0]) + "," +
           format_double(embedding.coordinates[p][1]) + "," + std::to_string(labels[u]) + "," +
           (report.failed(u) ? std::string() : format_double(report.influence[u])) + "\n";
  }
  write_file(ctx.path("embedding.csv"), csv);

  std::string disp = "segment,mean_radius,mean_pairwise_distance\n";
  for (const auto& s : centrality_dispersion(embedding.coordinates, point_labels, c.segments)) {
    disp += std::to_string(s.segment) + "," + format_double(s.mean_radius) + "," +
            format_double(s.mean_pairwise_distance) + "\n";
  }
  write_file(ctx.path("dispersion.csv"), disp);

  const std::string hash = content_hash(*data);
  const Json extra{{"stress", embedding.stress},
                   {"distance", to_string(embedding.distance)},
                   {"points", embedding.users.size()}};
  ctx.sidecar("embedding.csv", hash, extra);
  ctx.sidecar("dispersion.csv", hash, extra);
  ctx.out << "embedded " << embedding.users.size() << " users, stress " << format_double(embedding.stress) << "\n";
  return 0;
}

Json csv_as_json(const CsvTable& table) {
  Json rows = Json::array();
  for (const auto& row : table.rows) {
    Json obj;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
      double v = 0.0;
      if (parse_double(row[i], v)) obj[table.header[i]] = v;
      else if (row[i].empty()) obj[table.header[i]] = nullptr;
      else obj[table.header[i]] = row[i];
    }
    rows.push_back(std::move(obj));
  }
  return rows;
}

Json influence_summary(const CsvTable& table, const fs::path& path) {
  const std::size_t col = table.column("influence", path.string());
  std::vector<double> v;
  for (const auto& row : table.rows) {
    if (!row[col].empty()) v.push_back(csv_real(row[col], path));
  }
  Json s;
  s["users"] = table.rows.size();
  s["failed"] = table.rows.size() - v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end(), std::greater<>());
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  const std::size_t m = v.size();
  s["max"] = v.front();
  s["min"] = v.back();
  s["mean"] = total / static_cast<double>(m);
  s["median"] = m % 2 ? v[m / 2] : (v[m / 2 - 1] + v[m / 2]) / 2.0;
  const std::size_t decile = std::max<std::size_t>(1, m / 10);
  const double top = std::accumulate(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(decile), 0.0);
  s["top_decile_share"] = total > 0.0 ? top / total : 0.0;
  return s;
}

int cmd_report(Context& ctx) {
  Json doc;
  std::string hash;
  const std::pair<const char*, const char*> stages[] = {
      {"influence", "influence.csv"}, {"group_influence", "group_influence.csv"},
      {"features", "features.csv"},   {"boundaries", "boundaries.csv"},
      {"embedding", "embedding.csv"}, {"dispersion", "dispersion.csv"}};
  for (const auto& [key, file] : stages) {
    const fs::path path = ctx.path(file);
    if (!fs::exists(path)) continue;
    const CsvTable table = read_csv(path);
    doc[key] = csv_as_json(table);
    if (std::string(key) == "influence") doc["influence_summary"] = influence_summary(table, path);
    if (hash.empty()) hash = hash_from_sidecar(path);
  }
  if (fs::exists(ctx.path("evaluation.json"))) doc["evaluation"] = read_json(ctx.path("evaluation.json"));
  if (fs::exists(ctx.path("tree.json"))) {
    const Json tree = read_json(ctx.path("tree.json"));
    doc["tree"] = Json{{"importances", tree.at("importances")}, {"metrics", tree.at("metrics")},
                       {"depth", tree.at("depth")}, {"leaves", tree.at("leaves")}};
  }
  if (doc.is_null()) throw UsageError("report: no stage outputs found in '" + ctx.config.out_dir + "'");
  write_file(ctx.path("report.json"), doc.dump(2) + "\n");
  ctx.sidecar("report.json", hash);
  ctx.out << "report written\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Leave-one-out influence audit for collaborative-filtering recommenders", "idm"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
  app.add_option("--config", config_path, "Config file of key = value lines");

  auto value_flag = [&](CLI::App* target, const std::string& flag, const std::string& key, const std::string& help) {
    target->add_option_function<std::string>(
        flag, [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); }, help + " [" + key + "]");
  };
  auto switch_flag = [&](CLI::App* target, const std::string& flag, const std::string& key, const std::string& help) {
    target->add_flag_callback(flag, [&overrides, key] { overrides.emplace_back(key, "true"); }, help + " [" + key + "]");
  };
  value_flag(&app, "--seed", "run.seed", "Random seed");
  value_flag(&app, "--out-dir", "run.out_dir", "Directory for artifacts");
  value_flag(&app, "--workers", "run.workers", "Parallel jobs (0 = all cores)");
  app.add_option_function<std::vector<std::string>>(
      "--set",
      [&overrides](const std::vector<std::string>& items) {
        for (const auto& item : items) {
          const auto eq = item.find('=');
          if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected key=value");
          overrides.emplace_back(item.substr(0, eq), item.substr(eq + 1));
        }
      },
      "Override any config key (key=value)");

  auto data_flags = [&](CLI::App* sub) {
    value_flag(sub, "--input", "data.input", "Raw ratings file");
    value_flag(sub, "--format", "data.format", "csv, tsv, movielens-dat or delimited");
    value_flag(sub, "--separator", "data.separator", "Field separator for delimited input");
    switch_flag(sub, "--has-header", "data.has_header", "Skip the first line");
    value_flag(sub, "--dataset", "data.dataset", "Canonical dataset dump (.tsv)");
    value_flag(sub, "--sample-users", "data.sample_users", "Keep a seeded user sample");
    value_flag(sub, "--sample-items", "data.sample_items", "Keep an item sample");
  };
  auto algo_flags = [&](CLI::App* sub) {
    value_flag(sub, "--algo", "algo.name", "knn or nmf");
    value_flag(sub, "--model", "algo.model", "Stored model header (.json)");
    value_flag(sub, "--k", "knn.k", "Neighborhood size");
    value_flag(sub, "--similarity", "knn.similarity", "pearson or cosine");
    value_flag(sub, "--shrinkage", "knn.shrinkage", "Significance weighting cutoff (0 = off)");
    value_flag(sub, "--factors", "nmf.factors", "Latent factors");
    value_flag(sub, "--iters", "nmf.max_iters", "NMF iteration budget");
    value_flag(sub, "--l", "recommend.l", "Recommendation list length");
  };
  auto influence_flags = [&](CLI::App* sub) {
    switch_flag(sub, "--warm-start", "influence.warm_start", "Approximate NMF warm start");
    value_flag(sub, "--top-k", "influence.top_k", "Group sizes, comma separated");
    value_flag(sub, "--thresholds", "influence.thresholds", "Theta grid, comma separated");
  };

  CLI::App* ingest = app.add_subcommand("ingest", "Load raw ratings and write the canonical dump");
  data_flags(ingest);
  CLI::App* train_cmd = app.add_subcommand("train", "Fit a recommender and store it");
  data_flags(train_cmd);
  algo_flags(train_cmd);
  CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "Precision and recall on a held-out split");
  data_flags(evaluate_cmd);
  algo_flags(evaluate_cmd);
  value_flag(evaluate_cmd, "--test-fraction", "evaluate.test_fraction", "Held-out share per user");
  value_flag(evaluate_cmd, "--relevance-threshold", "evaluate.relevance_threshold", "Minimum relevant rating");
  CLI::App* influence_cmd = app.add_subcommand("influence", "Per-user influence and group curves");
  data_flags(influence_cmd);
  algo_flags(influence_cmd);
  influence_flags(influence_cmd);
  CLI::App* features_cmd = app.add_subcommand("features", "Per-user features beta1..beta8");
  data_flags(features_cmd);
  algo_flags(features_cmd);
  value_flag(features_cmd, "--feature-k", "features.k", "Neighborhood size for beta3 under NMF");
  value_flag(features_cmd, "--epsilon", "features.epsilon", "Density radius for beta4");
  CLI::App* tree_cmd = app.add_subcommand("fit-tree", "Regression tree from features to influence");
  value_flag(tree_cmd, "--features", "tree.features", "features.csv path");
  value_flag(tree_cmd, "--influence", "tree.influence", "influence.csv path");
  value_flag(tree_cmd, "--max-depth", "tree.max_depth", "Depth limit (1..10)");
  value_flag(tree_cmd, "--min-samples-leaf", "tree.min_samples_leaf", "Minimum samples per leaf");
  value_flag(tree_cmd, "--holdout", "tree.holdout_fraction", "Held-out share for metrics (0 = in-sample only)");
  CLI::App* mds_cmd = app.add_subcommand("mds", "2-D embedding of users segmented by influence");
  data_flags(mds_cmd);
  algo_flags(mds_cmd);
  value_flag(mds_cmd, "--influence", "tree.influence", "influence.csv path");
  value_flag(mds_cmd, "--max-points", "mds.max_points", "Sample size cap");
  value_flag(mds_cmd, "--segments", "mds.segments", "Number of influence segments");
  value_flag(mds_cmd, "--smacof-iters", "mds.smacof_iters", "Stress-majorization iterations");
  CLI::App* report_cmd = app.add_subcommand("report", "Collect stage outputs into report.json");
  for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; })) sub->fallthrough();
  (void)report_cmd;

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  Context ctx{RunConfig{}, app.get_subcommands().front()->get_name(), out, err};
  try {
    if (!config_path.empty()) {
      for (const auto& [key, value] : parse_config_text(read_file(config_path), config_path)) {
        apply_setting(ctx.config, key, value);
      }
    }
    for (const auto& [key, value] : overrides) apply_setting(ctx.config, key, value);
    fs::create_directories(ctx.dir());

    const std::map<std::string, int (*)(Context&)> commands = {
        {"ingest", cmd_ingest},   {"train", cmd_train},       {"evaluate", cmd_evaluate},
        {"influence", cmd_influence}, {"features", cmd_features}, {"fit-tree", cmd_fit_tree},
        {"mds", cmd_mds},         {"report", cmd_report}};
    return commands.at(ctx.command)(ctx);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace idm::cli
