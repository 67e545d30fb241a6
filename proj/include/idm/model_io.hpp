#pragma once

#include <filesystem>
#include <memory>

#include <json.hpp>

#include "idm/recommender.hpp"

namespace idm {

nlohmann::ordered_json to_json(const AlgoConfig& config);
AlgoConfig algo_config_from_json(const nlohmann::json& j);

/// Writes a JSON header (algorithm, hyperparameters, seed, dataset hash)
/// and a TSV payload: ranked neighbor candidates for kNN, factor rows for
/// NMF. Reals are written in shortest round-trip form, so a reload is exact.
void save_model(const TrainedModel& model, const std::filesystem::path& json_path,
                const std::filesystem::path& tsv_path);

/// Rebuilds a saved model on `data`, which must be the dataset it was
/// trained on.
TrainedModel load_model(const std::filesystem::path& json_path, const std::filesystem::path& tsv_path,
                        std::shared_ptr<const RatingsDataset> data);

}  // namespace idm
