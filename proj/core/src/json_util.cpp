#include "json_util.hpp"

#include <cmath>
#include <cstdio>

#include "asmvlm/error.hpp"

namespace asmvlm::detail {

namespace {

void dump_into(const Json& value, std::string& out) {
  switch (value.type()) {
    case Json::value_t::object: {
      out.push_back('{');
      bool first = true;
      for (const auto& [key, item] : value.items()) {  // std::map keeps keys sorted
        if (!first) out.push_back(',');
        first = false;
        out += Json(key).dump(-1, ' ', false, Json::error_handler_t::replace);
        out.push_back(':');
        dump_into(item, out);
      }
      out.push_back('}');
      break;
    }
    case Json::value_t::array: {
      out.push_back('[');
      bool first = true;
      for (const auto& item : value) {
        if (!first) out.push_back(',');
        first = false;
        dump_into(item, out);
      }
      out.push_back(']');
      break;
    }
    case Json::value_t::number_float: {
      const double v = value.get<double>();
      if (!std::isfinite(v)) {
        out += "null";
        break;
      }
      char buffer[64];
      std::snprintf(buffer, sizeof buffer, "%.6f", v);
      std::string text(buffer);
      if (text == "-0.000000") text = "0.000000";
      out += text;
      break;
    }
    default:
      out += value.dump(-1, ' ', false, Json::error_handler_t::replace);
  }
}

}  // namespace

std::string canonical_dump(const Json& value) {
  std::string out;
  dump_into(value, out);
  return out;
}

Json parse_json(std::string_view text, const char* what) {
  Json parsed = Json::parse(text.begin(), text.end(), nullptr, false);
  if (parsed.is_discarded()) throw Error(ErrorCode::ConfigError, std::string("invalid JSON in ") + what);
  return parsed;
}

double require_number(const Json& object, const char* key) {
  if (!object.is_object() || !object.contains(key) || !object.at(key).is_number()) {
    throw Error(ErrorCode::ConfigError, std::string("expected numeric field '") + key + "'");
  }
  return object.at(key).get<double>();
}

int require_int(const Json& object, const char* key) {
  if (!object.is_object() || !object.contains(key) || !object.at(key).is_number_integer()) {
    throw Error(ErrorCode::ConfigError, std::string("expected integer field '") + key + "'");
  }
  return object.at(key).get<int>();
}

std::string require_string(const Json& object, const char* key) {
  if (!object.is_object() || !object.contains(key) || !object.at(key).is_string()) {
    throw Error(ErrorCode::ConfigError, std::string("expected string field '") + key + "'");
  }
  return object.at(key).get<std::string>();
}

}  // namespace asmvlm::detail
