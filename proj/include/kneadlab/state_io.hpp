#pragma once

#include <string>
#include <string_view>

#include "kneadlab/construct.hpp"

namespace kneadlab {

inline constexpr int kStateVersion = 1;

// Shortest decimal that reads back to the same double ("inf", "nan" allowed).
std::string double_text(double d);
double double_from_text(std::string_view s);

// JSON with sorted keys and decimal strings only; equal states give equal
// bytes.
std::string dump_state(const ConstructionState& s);
// Throws ParseError on malformed input, SchemaVersionMismatch on a foreign
// version.
ConstructionState parse_state(std::string_view text);

void save_state(const std::string& path, const ConstructionState& s);
ConstructionState load_state(const std::string& path);

// One row per stage and family: stage,family,lo,hi,log2_width.
std::string intervals_csv(const ConstructionState& s);

}  // namespace kneadlab
