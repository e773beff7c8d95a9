#pragma once

#include "biascal/calibration.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace biascal::io {

// Shortest text that parses back to the same double (17 significant digits).
[[nodiscard]] std::string format_double(double v);

void write_text(const std::filesystem::path& path, const std::string& content);
[[nodiscard]] std::string read_text(const std::filesystem::path& path);

[[nodiscard]] std::string chain_csv(const Chain& chain);
[[nodiscard]] Chain parse_chain_csv(const std::string& text);

[[nodiscard]] nlohmann::ordered_json summary_json(const PosteriorSummary& summary);
[[nodiscard]] PosteriorSummary parse_summary_json(const nlohmann::ordered_json& j);

[[nodiscard]] std::string band_csv(const PredictiveBand& band);

// CSV columns series_id, x..., [eta...], y; metadata goes to a sidecar JSON.
[[nodiscard]] std::string dataset_csv(const Dataset& data);
[[nodiscard]] nlohmann::ordered_json dataset_sidecar(const Dataset& data);
void write_dataset(const std::filesystem::path& csv, const Dataset& data);
// Reads the CSV and, when present, the sidecar next to it (same stem, .json).
[[nodiscard]] Dataset read_dataset(const std::filesystem::path& csv);
[[nodiscard]] std::filesystem::path sidecar_path(const std::filesystem::path& csv);

}  // namespace biascal::io
