#include "mpd/neuro/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

namespace mpd::neuro {

nlohmann::json checkpoint_json(const diff::ParameterList& params, const std::string& fingerprint,
                               nlohmann::json metadata) {
  nlohmann::json doc;
  doc["format"] = "mpd-checkpoint-v1";
  doc["fingerprint"] = fingerprint;
  auto& entries = doc["parameters"] = nlohmann::json::array();
  for (const auto& e : params.entries()) {
    auto v = e.tensor.values();
    entries.push_back({{"name", e.name},
                       {"shape", e.tensor.shape()},
                       {"values", std::vector<double>(v.begin(), v.end())}});
  }
  doc["metadata"] = std::move(metadata);
  return doc;
}

void restore_checkpoint(const nlohmann::json& doc, diff::ParameterList& params,
                        const std::string& expected_fingerprint) {
  const auto fingerprint = doc.at("fingerprint").get<std::string>();
  if (fingerprint != expected_fingerprint) {
    throw std::runtime_error("checkpoint fingerprint '" + fingerprint + "' does not match '" + expected_fingerprint +
                             "'");
  }
  const auto& entries = doc.at("parameters");
  if (entries.size() != params.size()) {
    throw std::runtime_error("checkpoint holds " + std::to_string(entries.size()) + " tensors, model has " +
                             std::to_string(params.size()));
  }
  // Validate everything before touching any parameter.
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const auto& p = params.entries()[i];
    const auto name = e.at("name").get<std::string>();
    const auto shape = e.at("shape").get<diff::Shape>();
    if (name != p.name || shape != p.tensor.shape() || e.at("values").size() != p.tensor.numel()) {
      throw std::runtime_error("checkpoint tensor '" + name + "' " + diff::shape_str(shape) + " does not match '" +
                               p.name + "' " + diff::shape_str(p.tensor.shape()));
    }
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto values = entries[i].at("values").get<std::vector<double>>();
    auto dst = params.entries()[i].tensor;
    std::copy(values.begin(), values.end(), dst.mutable_values().begin());
  }
}

void save_checkpoint(const std::filesystem::path& path, const diff::ParameterList& params,
                     const std::string& fingerprint, nlohmann::json metadata) {
  write_json_file(path, checkpoint_json(params, fingerprint, std::move(metadata)));
}

nlohmann::json load_checkpoint(const std::filesystem::path& path, diff::ParameterList& params,
                               const std::string& expected_fingerprint) {
  auto doc = read_json_file(path);
  restore_checkpoint(doc, params, expected_fingerprint);
  return doc.value("metadata", nlohmann::json::object());
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace mpd::neuro
