#pragma once

#include <filesystem>
#include <string>

#include "gosr/pipeline.hpp"

namespace gosr {

/// Deterministic machine-readable report (JSON).
std::string render_report_json(const ExperimentResult& result);

/// Plain-text companion: per-seed table plus a baseline-vs-detector summary
/// block in the row layout of the published result tables.
std::string render_report_text(const ExperimentResult& result);

/// Writes both renderings. Same result -> byte-identical files.
void emit_report(const ExperimentResult& result, const std::filesystem::path& json_path,
                 const std::filesystem::path& text_path);

}  // namespace gosr
