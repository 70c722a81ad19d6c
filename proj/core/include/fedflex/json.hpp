#pragma once

#if __has_include(<nlohmann/json.hpp>)
#include <nlohmann/json.hpp>
#else
#include "json.hpp"
#endif

namespace fedflex {
using Json = nlohmann::json;
}  // namespace fedflex
