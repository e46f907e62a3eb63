#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "spatialgen/trainer.hpp"

namespace spatialgen {

inline constexpr int kCheckpointFormatVersion = 1;

std::string to_string(QueryInit init);
QueryInit parse_query_init(const std::string& text);

/// Pretty-printed JSON object with every TrainConfig field materialised.
std::string config_to_json(const TrainConfig& config);

/// Overlays the fields present in `text` on `base`. Accepts a bare config
/// object or any document with a top-level "config" object (e.g. a
/// checkpoint). Unknown keys and wrongly typed values throw BadConfig.
TrainConfig config_from_json(std::string_view text, const TrainConfig& base = {});
TrainConfig load_config(const std::filesystem::path& path, const TrainConfig& base = {});

/// Tensors are stored as {"shape": [rows, cols], "data": [...]}, row-major.
/// Blocks a mode does not train (Z and theta for erm, theta for signn_g) are
/// omitted.
std::string checkpoint_to_json(const TrainedModel& model);

/// Parses and validates every block shape against the stored config.
/// Throws BadCheckpoint.
TrainedModel checkpoint_from_json(std::string_view text);

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_checkpoint(const std::filesystem::path& path);

/// Reads a whole file; throws Io.
std::string read_text_file(const std::filesystem::path& path);
/// Writes bytes verbatim; throws Io.
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace spatialgen
