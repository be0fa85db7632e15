#pragma once

#include <string_view>

namespace forecast_forge {

/// Range class of a forecast. Estimates are clamped to [0, 1] for
/// probabilities and to [0, inf) for counts.
enum class ValueKind { probability, count, raw };

std::string_view to_string(ValueKind kind);
ValueKind parse_value_kind(std::string_view text);

}  // namespace forecast_forge
