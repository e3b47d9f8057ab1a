#pragma once

#include <string>

#include <json.hpp>

#include "fliptrace/analysis.hpp"
#include "fliptrace/model.hpp"

namespace fliptrace {

nlohmann::json fault_to_json(const FaultSpec& fault);
FaultSpec fault_from_json(const nlohmann::json& j);

nlohmann::json analysis_to_json(const AnalysisReport& report);
nlohmann::json campaign_to_json(const CampaignResult& result, const SamplePlan& plan,
                                const std::string& scope_text);
nlohmann::json model_fit_to_json(const RegressionModel& model, double r2);
nlohmann::json model_eval_to_json(const EvalReport& report);

/// FeatureVector CSV row in the fixed feature column order.
std::string feature_csv(const std::string& name, const FeatureVector& fv, bool header);

/// Human-readable summary of a machine report; dispatches on its
/// "schema" field. `format` is "text" or "csv".
std::string summarize_report(const nlohmann::json& j, const std::string& format);

/// Writes text to `path` atomically (temp file + rename).
void write_file_atomic(const std::string& path, const std::string& contents);

} // namespace fliptrace
