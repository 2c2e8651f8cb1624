#pragma once

#include <iosfwd>

#include "json.hpp"
#include "rkg/bifurcation.hpp"
#include "rkg/linearized.hpp"
#include "rkg/nash_moser.hpp"
#include "rkg/resonance.hpp"

namespace rkg {

using Json = nlohmann::json;

Json to_json(const NormParams& p);
Json to_json(const SolverConfig& c);
/// Inverse of to_json(SolverConfig); missing keys keep their defaults.
SolverConfig config_from_json(const Json& j);

Json to_json(const KernelField& v);
KernelField kernel_from_json(const Json& j);

Json to_json(const ConditionRecord& r);
Json to_json(const ConditionCheck& c);
Json to_json(const StageRecord& r);
/// Everything except the per-stage records.
Json trace_summary(const SolveTrace& t);
/// One JSON object per stage, one per line.
void write_trace_jsonl(std::ostream& os, const SolveTrace& t);

Json to_json(const ResidualReport& r);
/// At most `max_intervals` excluded intervals are listed (all of them if negative);
/// the total count is always reported.
Json to_json(const MeasureReport& r, long max_intervals = -1);
Json to_json(const DiophantineResult& r);
Json to_json(const DivisorReport& r, const ProductBound* pb = nullptr);
Json to_json(const SplitReport& r);

}  // namespace rkg
