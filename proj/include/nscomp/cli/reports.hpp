#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "nscomp/cli/config.hpp"
#include "nscomp/cli/experiment.hpp"
#include "nscomp/conclab/conclab.hpp"

namespace nscomp {

using ojson = nlohmann::ordered_json;

// Finite values as numbers; inf and nan as the strings "inf", "-inf", "nan".
ojson json_number(double v);

// {"tool", "version", "kind", "seed", "config_hash", "config", "report"}.
ojson envelope(const std::string& kind, const ExperimentConfig& c, ojson report);
std::string dump_report(const ojson& j);

const char* tool_version();

ojson train_to_json(const TrainedModel& m);
ojson stability_to_json(const StabilityReport& r);
ojson compression_to_json(const CompressionOutcome& r);
ojson bound_to_json(const BoundReport& r);
ojson tail_to_json(const TailReport& r);

// Long format: quantity,i,j,sample,value.
std::string stability_samples_csv(const StabilityReport& r);
// Per-layer effective parameters: layer,effective,actual,percent.
std::string effective_params_csv(const std::vector<EffectiveRow>& rows);
// inject_layer,layer,mean_rel_error.
std::string attenuation_csv(const std::vector<std::vector<double>>& curves);

}  // namespace nscomp
