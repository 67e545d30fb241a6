#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "idm/dataset.hpp"
#include "idm/random.hpp"

namespace idm {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + sep.size();
  }
}

std::string dump_text(const RatingsDataset& ds) {
  std::string out = "user_idx\titem_idx\trating\n";
  for (const auto& t : ds.triplets()) {
    out += std::to_string(t.user);
    out += '\t';
    out += std::to_string(t.item);
    out += '\t';
    out += format_double(t.rating);
    out += '\n';
  }
  return out;
}

}  // namespace

RatingsDataset parse_ratings(std::istream& in, const LoadOptions& options,
                             const std::string& source_name) {
  std::string separator = options.separator;
  std::size_t user_col = options.user_column;
  std::size_t item_col = options.item_column;
  std::size_t rating_col = options.rating_column;
  if (options.format == InputFormat::movielens_dat) {
    separator = "::";
    user_col = 0;
    item_col = 1;
    rating_col = 2;
  }
  if (separator.empty()) throw UsageError("empty field separator");
  const std::size_t needed = std::max({user_col, item_col, rating_col}) + 1;

  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;
  std::unordered_map<std::string, UserIndex> user_index;
  std::unordered_map<std::string, ItemIndex> item_index;
  std::vector<Triplet> triplets;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && options.has_header) continue;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    const auto fields = split(view, separator);
    auto fail = [&](const std::string& what) {
      throw DataError(source_name + ":" + std::to_string(line_no) + ": " + what);
    };
    if (fields.size() < needed) {
      fail("expected at least " + std::to_string(needed) + " fields, found " +
           std::to_string(fields.size()));
    }
    const std::string user{trim(fields[user_col])};
    const std::string item{trim(fields[item_col])};
    const std::string_view rating_text = trim(fields[rating_col]);
    if (user.empty()) fail("empty user id");
    if (item.empty()) fail("empty item id");
    double rating = 0.0;
    if (auto it = options.label_map.find(std::string(rating_text)); it != options.label_map.end()) {
      rating = it->second;
    } else if (!parse_double(rating_text, rating) || !std::isfinite(rating)) {
      fail("rating '" + std::string(rating_text) + "' is not a number");
    }
    if (options.scale && !options.scale->contains(rating)) {
      fail("rating " + std::string(rating_text) + " outside the configured scale");
    }

    auto [uit, new_user] = user_index.try_emplace(user, static_cast<UserIndex>(user_ids.size()));
    if (new_user) user_ids.push_back(user);
    auto [iit, new_item] = item_index.try_emplace(item, static_cast<ItemIndex>(item_ids.size()));
    if (new_item) item_ids.push_back(item);
    triplets.push_back({uit->second, iit->second, rating});
    lo = std::min(lo, rating);
    hi = std::max(hi, rating);
  }
  if (in.bad()) throw DataError(source_name + ": read error");
  if (triplets.empty()) throw DataError(source_name + ": dataset is empty after pruning");
  const RatingScale scale = options.scale.value_or(RatingScale{lo, hi});
  return RatingsDataset::from_triplets(std::move(user_ids), std::move(item_ids), std::move(triplets),
                                       scale);
}

RatingsDataset load_ratings(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ratings file '" + path.string() + "'");
  return parse_ratings(in, options, path.string());
}

std::string content_hash(const RatingsDataset& ds) {
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx",
                static_cast<unsigned long long>(stable_hash(dump_text(ds))));
  return buffer;
}

void save_dataset(const RatingsDataset& ds, const std::filesystem::path& tsv_path,
                  const std::filesystem::path& json_path) {
  const std::string text = dump_text(ds);
  {
    std::ofstream out(tsv_path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + tsv_path.string() + "'");
    out << text;
  }
  const DatasetStats stats = compute_stats(ds);
  nlohmann::ordered_json j;
  j["format"] = "idm-dataset";
  j["version"] = 1;
  j["scale"] = {{"min", ds.scale().min}, {"max", ds.scale().max}};
  j["user_ids"] = ds.user_ids();
  j["item_ids"] = ds.item_ids();
  j["stats"] = {{"n_users", stats.n_users},
                {"n_items", stats.n_items},
                {"n_ratings", stats.n_ratings},
                {"sparsity", stats.sparsity}};
  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(stable_hash(text)));
  j["content_hash"] = hash;
  std::ofstream out(json_path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + json_path.string() + "'");
  out << j.dump(2) << '\n';
}

RatingsDataset load_dataset_dump(const std::filesystem::path& tsv_path,
                                 const std::filesystem::path& json_path) {
  std::ifstream meta_in(json_path);
  if (!meta_in) throw DataError("cannot open dataset sidecar '" + json_path.string() + "'");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(json_path.string() + ": " + e.what());
  }
  if (meta.value("format", "") != "idm-dataset") {
    throw DataError(json_path.string() + ": not a dataset sidecar");
  }
  auto user_ids = meta.at("user_ids").get<std::vector<std::string>>();
  auto item_ids = meta.at("item_ids").get<std::vector<std::string>>();
  const RatingScale scale{meta.at("scale").at("min").get<double>(),
                          meta.at("scale").at("max").get<double>()};

  std::ifstream in(tsv_path);
  if (!in) throw DataError("cannot open dataset dump '" + tsv_path.string() + "'");
  std::vector<Triplet> triplets;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) continue;
    if (trim(line).empty()) continue;
    const auto fields = split(line, "\t");
    double u = 0, i = 0, r = 0;
    if (fields.size() != 3 || !parse_double(fields[0], u) || !parse_double(fields[1], i) ||
        !parse_double(fields[2], r) || u < 0 || i < 0 || u >= static_cast<double>(user_ids.size()) ||
        i >= static_cast<double>(item_ids.size())) {
      throw DataError(tsv_path.string() + ":" + std::to_string(line_no) + ": malformed dump record");
    }
    triplets.push_back({static_cast<UserIndex>(u), static_cast<ItemIndex>(i), r});
  }
  const std::size_t n_users = user_ids.size();
  const std::size_t n_items = item_ids.size();
  auto ds = RatingsDataset::from_triplets(std::move(user_ids), std::move(item_ids),
                                          std::move(triplets), scale);
  if (ds.num_users() != n_users || ds.num_items() != n_items) {
    throw DataError(tsv_path.string() + ": dump contains users or items without ratings");
  }
  return ds;
}

}  // namespace idm
