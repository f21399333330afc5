#pragma once

#include "sbo/optimizer.hpp"

#include <json.hpp>

#include <memory>

namespace sbo {

using Json = nlohmann::json;

inline constexpr int kStateSchemaVersion = 1;

/// Finite doubles as numbers; infinities and NaN as "inf", "-inf", "nan".
Json number_json(double v);
double number_from_json(const Json& j);

Json to_json(const KernelSpec& k);
Json to_json(const Dataset& d);
Json to_json(const StabilityParams& p);
Json to_json(const BoundReport& r);
Json to_json(const OptConfig& c);
Json to_json(const TraceRow& r);
Json to_json(const Suggestion& s);
Json to_json(const Recommendation& r);
Json to_json(const AskTellState& s);

KernelSpec kernel_from_json(const Json& j);
Dataset dataset_from_json(const Json& j);
TraceRow trace_row_from_json(const Json& j);
Suggestion suggestion_from_json(const Json& j);

/// Parses a campaign config, applying defaults. Throws ConfigError with a
/// message naming the offending field (e.g. "G required").
OptConfig config_from_json(const Json& j);
/// Restores a persisted campaign. Throws ConfigError on schema problems.
std::unique_ptr<AskTellState> state_from_json(const Json& j);

}  // namespace sbo
