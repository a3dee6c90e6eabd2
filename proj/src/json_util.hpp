#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "plansmith/error.hpp"

namespace plansmith::detail {

template <typename T>
T require(const nlohmann::json& j, const char* field) {
  if (!j.is_object() || !j.contains(field)) {
    throw Error(ErrorKind::parse, std::string("missing field '") + field + "'");
  }
  try {
    return j.at(field).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("field '") + field + "': " + e.what());
  }
}

template <typename T>
T optional_field(const nlohmann::json& j, const char* field, T fallback) {
  if (!j.is_object() || !j.contains(field) || j.at(field).is_null()) return fallback;
  return require<T>(j, field);
}

}  // namespace plansmith::detail
