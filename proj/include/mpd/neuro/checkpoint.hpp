#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "mpd/diff/params.hpp"

namespace mpd::neuro {

/// Portable checkpoint: {"fingerprint", "parameters": [{name, shape, values}],
/// "metadata"}. Doubles are written with round-trip precision.
nlohmann::json checkpoint_json(const diff::ParameterList& params, const std::string& fingerprint,
                               nlohmann::json metadata = nlohmann::json::object());

/// Copies stored values into `params`. Throws if the fingerprint differs or
/// any name/shape does not match.
void restore_checkpoint(const nlohmann::json& doc, diff::ParameterList& params,
                        const std::string& expected_fingerprint);

void save_checkpoint(const std::filesystem::path& path, const diff::ParameterList& params,
                     const std::string& fingerprint, nlohmann::json metadata = nlohmann::json::object());
/// Returns the checkpoint's metadata block.
nlohmann::json load_checkpoint(const std::filesystem::path& path, diff::ParameterList& params,
                               const std::string& expected_fingerprint);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace mpd::neuro
