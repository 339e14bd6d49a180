#pragma once

#include <string>

#include "lasp/pipeline_sim.hpp"

namespace lasp {

/// Writes `content` to `path` through a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& content);

/// SVG timing diagram: one lane per stage replica, one rectangle per event,
/// colored by task and labeled t<task>/L<layer>.
[[nodiscard]] std::string render_gantt(const PipelineTrace& trace);
void emit_gantt(const PipelineTrace& trace, const std::string& path);

/// Tab-separated: stage, busy_cycles, span_cycles, utilization.
[[nodiscard]] std::string render_utilization(const PipelineTrace& trace,
                                             UtilizationWindow window = UtilizationWindow::PerStage);
void emit_utilization(const PipelineTrace& trace, const std::string& path,
                      UtilizationWindow window = UtilizationWindow::PerStage);

}  // namespace lasp
