#pragma once

#include <string>
#include <string_view>

namespace tland {

// RFC 4180 field quoting.
std::string csv_escape(std::string_view field);

// Shortest decimal that round-trips the double exactly.
std::string format_double(double value);

}  // namespace tland
