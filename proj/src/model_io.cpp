#include "idm/model_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace idm {

nlohmann::ordered_json to_json(const AlgoConfig& config) {
  nlohmann::ordered_json j;
  j["algorithm"] = to_string(config.algorithm);
  j["knn"]["k"] = config.knn.k;
  j["knn"]["similarity"] = to_string(config.knn.similarity.kind);
  j["knn"]["shrinkage"] = config.knn.similarity.shrinkage;
  j["nmf"]["factors"] = config.nmf.factors;
  j["nmf"]["seed"] = config.nmf.seed;
  j["nmf"]["max_iters"] = config.nmf.max_iters;
  j["nmf"]["tolerance"] = config.nmf.tolerance;
  j["nmf"]["mask_missing"] = config.nmf.mask_missing;
  j["nmf"]["divergence_tolerance"] = config.nmf.divergence_tolerance;
  return j;
}

AlgoConfig algo_config_from_json(const nlohmann::json& j) {
  AlgoConfig c;
  try {
    c.algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());
    const auto& knn = j.at("knn");
    c.knn.k = knn.at("k").get<std::size_t>();
    c.knn.similarity.kind = similarity_from_string(knn.at("similarity").get<std::string>());
    c.knn.similarity.shrinkage = knn.at("shrinkage").get<decltype(c.knn.similarity.shrinkage)>();
    const auto& nmf = j.at("nmf");
    c.nmf.factors = nmf.at("factors").get<std::size_t>();
    c.nmf.seed = nmf.at("seed").get<std::uint64_t>();
    c.nmf.max_iters = nmf.at("max_iters").get<std::size_t>();
    c.nmf.tolerance = nmf.at("tolerance").get<double>();
    c.nmf.mask_missing = nmf.at("mask_missing").get<bool>();
    c.nmf.divergence_tolerance = nmf.at("divergence_tolerance").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model config: ") + e.what());
  }
  return c;
}

namespace {

AlgoConfig config_of(const TrainedModel& model) {
  AlgoConfig c;
  if (const auto* knn = std::get_if<KnnModel>(&model)) {
    c.algorithm = Algorithm::knn;
    c.knn = knn->options();
  } else {
    c.algorithm = Algorithm::nmf;
    c.nmf = std::get<NmfModel>(model).options();
  }
  return c;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::size_t parse_index(const std::string& text, const std::string& where) {
  std::size_t value = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size()) {
    throw DataError(where + ": bad index '" + text + "'");
  }
  return value;
}

double parse_real(const std::string& text, const std::string& where) {
  double value = 0.0;
  if (!parse_double(text, value)) throw DataError(where + ": bad number '" + text + "'");
  return value;
}

void write_matrix(std::ostream& out, const char* name, const FactorMatrix& m) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    out << name << '\t' << r;
    for (double v : m.row(r)) out << '\t' << format_double(v);
    out << '\n';
  }
}

}  // namespace

void save_model(const TrainedModel& model, const std::filesystem::path& json_path,
                const std::filesystem::path& tsv_path) {
  const AlgoConfig config = config_of(model);
  const RatingsDataset& ds = dataset_of(model);
  nlohmann::ordered_json header;
  header["format"] = "idm-model";
  header["version"] = 1;
  header["config"] = to_json(config);
  header["dataset_hash"] = content_hash(ds);
  header["n_users"] = ds.num_users();
  header["n_items"] = ds.num_items();

  std::ofstream tsv(tsv_path, std::ios::binary);
  if (!tsv) throw DataError("cannot write '" + tsv_path.string() + "'");
  if (const auto* knn = std::get_if<KnnModel>(&model)) {
    header["effective_k"] = knn->k();
    tsv << "user_idx\trank\tneighbor_idx\tsimilarity\n";
    for (UserIndex u = 0; u < ds.num_users(); ++u) {
      std::size_t rank = 0;
      for (const auto& nb : knn->candidates(u)) {
        tsv << u << '\t' << rank++ << '\t' << nb.user << '\t' << format_double(nb.similarity) << '\n';
      }
    }
  } else {
    const auto& nmf = std::get<NmfModel>(model);
    header["factors"] = nmf.factors();
    header["iterations"] = nmf.iterations();
    header["objective_history"] = nmf.objective_history();
    tsv << "matrix\tindex";
    for (std::size_t c = 0; c < nmf.factors(); ++c) tsv << "\tf" << c;
    tsv << '\n';
    write_matrix(tsv, "p", nmf.user_factors());
    write_matrix(tsv, "q", nmf.item_factors());
  }
  if (!tsv) throw DataError("failed writing '" + tsv_path.string() + "'");

  std::ofstream js(json_path, std::ios::binary);
  if (!js) throw DataError("cannot write '" + json_path.string() + "'");
  js << header.dump(2) << '\n';
}

TrainedModel load_model(const std::filesystem::path& json_path, const std::filesystem::path& tsv_path,
                        std::shared_ptr<const RatingsDataset> data) {
  std::ifstream js(json_path);
  if (!js) throw DataError("cannot open '" + json_path.string() + "'");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(js);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(json_path.string() + ": " + e.what());
  }
  if (header.value("format", "") != "idm-model") {
    throw DataError(json_path.string() + ": not a model header");
  }
  const AlgoConfig config = algo_config_from_json(header.at("config"));
  if (header.value("dataset_hash", "") != content_hash(*data)) {
    throw DataError(json_path.string() + ": model was trained on a different dataset");
  }

  std::ifstream tsv(tsv_path);
  if (!tsv) throw DataError("cannot open '" + tsv_path.string() + "'");
  std::string line;
  std::getline(tsv, line);
  std::size_t line_no = 1;
  const std::size_t n = data->num_users();

  if (config.algorithm == Algorithm::knn) {
    std::vector<std::vector<Neighbor>> candidates(n);
    while (std::getline(tsv, line)) {
      ++line_no;
      if (line.empty()) continue;
      const std::string where = tsv_path.string() + ":" + std::to_string(line_no);
      const auto f = split_tabs(line);
      if (f.size() != 4) throw DataError(where + ": expected 4 fields");
      const std::size_t u = parse_index(f[0], where);
      const std::size_t rank = parse_index(f[1], where);
      const std::size_t v = parse_index(f[2], where);
      if (u >= n || v >= n || rank != candidates[u].size()) throw DataError(where + ": inconsistent row");
      candidates[u].push_back({static_cast<UserIndex>(v), parse_real(f[3], where)});
    }
    return KnnModel::from_candidates(std::move(data), config.knn, std::move(candidates));
  }

  const std::size_t f = header.at("factors").get<std::size_t>();
  FactorMatrix p{n, f, std::vector<double>(n * f, 0.0)};
  FactorMatrix q{data->num_items(), f, std::vector<double>(data->num_items() * f, 0.0)};
  std::size_t p_rows = 0, q_rows = 0;
  while (std::getline(tsv, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = tsv_path.string() + ":" + std::to_string(line_no);
    const auto fields = split_tabs(line);
    if (fields.size() != f + 2) throw DataError(where + ": wrong field count");
    FactorMatrix* target = fields[0] == "p" ? &p : fields[0] == "q" ? &q : nullptr;
    if (!target) throw DataError(where + ": unknown matrix '" + fields[0] + "'");
    std::size_t& seen = target == &p ? p_rows : q_rows;
    const std::size_t r = parse_index(fields[1], where);
    if (r != seen || r >= target->rows) throw DataError(where + ": rows out of order");
    ++seen;
    for (std::size_t c = 0; c < f; ++c) target->row(r)[c] = parse_real(fields[c + 2], where);
  }
  if (p_rows != p.rows || q_rows != q.rows) throw DataError(tsv_path.string() + ": truncated factor matrices");
  auto history = header.at("objective_history").get<std::vector<double>>();
  return NmfModel::from_factors(std::move(data), config.nmf, std::move(p), std::move(q), std::move(history));
}

}  // namespace idm
