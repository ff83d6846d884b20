#pragma once

#include <initializer_list>
#include <string>

#include "json.hpp"

namespace lfsal {

// Parses a JSON file. Unreadable file → IoError; unparseable → ConfigError.
nlohmann::json load_json_file(const std::string& path);

// Writes pretty-printed JSON with a trailing newline.
void save_json_file(const std::string& path, const nlohmann::json& j);

// Rejects config objects carrying unknown keys so typos never pass silently.
void require_known_keys(const nlohmann::json& obj,
                        std::initializer_list<const char*> keys, const char* context);

}  // namespace lfsal
