#include "lfsal/jsonio.hpp"

#include <algorithm>
#include <fstream>

#include "lfsal/error.hpp"

namespace lfsal {

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("'" + path + "' is not valid JSON");
  return j;
}

void save_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

void require_known_keys(const nlohmann::json& obj,
                        std::initializer_list<const char*> keys, const char* context) {
  if (!obj.is_object()) {
    throw ConfigError(std::string(context) + ": expected a JSON object");
  }
  for (const auto& [key, _] : obj.items()) {
    const bool known = std::any_of(keys.begin(), keys.end(),
                                   [&key](const char* k) { return key == k; });
    if (!known) {
      throw ConfigError(std::string(context) + ": unknown key '" + key + "'");
    }
  }
}

}  // namespace lfsal
