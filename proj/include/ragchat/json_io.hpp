#pragma once

#include <nlohmann/json.hpp>

#include "ragchat/eval_harness.hpp"
#include "ragchat/rag_pipeline.hpp"

namespace ragchat {

/// Trace as served by the API and written to the traces directory. Absent
/// optional fields are JSON null.
nlohmann::json to_json(const PipelineTrace& trace);
nlohmann::json to_json(const RetrievalResult& result);
nlohmann::json to_json(const TranscriptRecord& record);
nlohmann::json to_json(const BootstrapResult& result);

}  // namespace ragchat
