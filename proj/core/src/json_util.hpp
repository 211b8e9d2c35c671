#pragma once

#include <string>
#include <string_view>

#include "json.hpp"

namespace asmvlm::detail {

using Json = nlohmann::json;

/// Compact dump with sorted keys and every floating value printed with six decimals.
std::string canonical_dump(const Json& value);

/// Parses or throws Error(code, ...).
Json parse_json(std::string_view text, const char* what);

double require_number(const Json& object, const char* key);
int require_int(const Json& object, const char* key);
std::string require_string(const Json& object, const char* key);

}  // namespace asmvlm::detail
