#include "lasp/report_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "lasp/errors.hpp"
#include "lasp/trace_io.hpp"

namespace lasp {

namespace {

constexpr double kPlotWidth = 1200.0;
constexpr double kLaneHeight = 22.0;
constexpr double kLaneGap = 4.0;
constexpr double kLeftMargin = 110.0;
constexpr double kTopMargin = 28.0;

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string task_color(std::size_t position) {
    // Golden-angle hue walk keeps neighbouring tasks distinguishable.
    const unsigned hue = static_cast<unsigned>((position * 137) % 360);
    return "hsl(" + std::to_string(hue) + ",65%,62%)";
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out << content;
        out.flush();
        if (!out) throw IoError("write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot move '" + tmp.string() + "' to '" + path + "'");
    }
}

std::string render_gantt(const PipelineTrace& trace) {
    if (trace.events.empty()) throw EmptyTrace("cannot draw a timing diagram of an empty trace");
    std::map<std::size_t, std::size_t> position;  // task id -> dispatch position
    for (std::size_t i = 0; i < trace.tasks.size(); ++i) position.emplace(trace.tasks[i].id, i);

    std::vector<std::size_t> lane_base(trace.stage_count(), 0);
    std::size_t lanes = 0;
    for (std::size_t k = 0; k < trace.stage_count(); ++k) {
        lane_base[k] = lanes;
        lanes += static_cast<std::size_t>(trace.replicas[k]);
    }
    std::int64_t origin = trace.events.front().start;
    for (const auto& e : trace.events) origin = std::min(origin, e.start);
    const double span = static_cast<double>(std::max<std::int64_t>(1, trace.makespan()));
    const double scale = kPlotWidth / span;
    const double height = kTopMargin + static_cast<double>(lanes) * (kLaneHeight + kLaneGap) + 20.0;

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed2(kLeftMargin + kPlotWidth + 20.0)
       << "\" height=\"" << fixed2(height) << "\" font-family=\"monospace\" font-size=\"10\">\n";
    os << "<text x=\"4\" y=\"16\" font-size=\"12\">" << trace.label << " makespan=" << trace.makespan()
       << " cycles</text>\n";
    for (std::size_t k = 0; k < trace.stage_count(); ++k) {
        for (int r = 0; r < trace.replicas[k]; ++r) {
            const double y = kTopMargin + static_cast<double>(lane_base[k] + static_cast<std::size_t>(r)) *
                                              (kLaneHeight + kLaneGap);
            os << "<text x=\"4\" y=\"" << fixed2(y + 15.0) << "\">stage " << k << " r" << r << "</text>\n";
            os << "<rect x=\"" << fixed2(kLeftMargin) << "\" y=\"" << fixed2(y) << "\" width=\"" << fixed2(kPlotWidth)
               << "\" height=\"" << fixed2(kLaneHeight) << "\" fill=\"#f2f2f2\"/>\n";
        }
    }
    for (const auto& e : trace.events) {
        const double y = kTopMargin + static_cast<double>(lane_base[e.stage] + e.replica) * (kLaneHeight + kLaneGap);
        const double x = kLeftMargin + static_cast<double>(e.start - origin) * scale;
        const double w = static_cast<double>(e.end - e.start) * scale;
        const std::string label = "t" + std::to_string(e.task) + "/L" + std::to_string(e.layer);
        os << "<rect x=\"" << fixed2(x) << "\" y=\"" << fixed2(y) << "\" width=\"" << fixed2(w) << "\" height=\""
           << fixed2(kLaneHeight) << "\" fill=\"" << task_color(position[e.task])
           << "\" stroke=\"#333\" stroke-width=\"0.3\"><title>" << label << ' ' << to_string(e.state) << " ["
           << e.start << ',' << e.end << ")</title></rect>\n";
        if (w >= 34.0) {
            os << "<text x=\"" << fixed2(x + 2.0) << "\" y=\"" << fixed2(y + 14.0) << "\">" << label << "</text>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

void emit_gantt(const PipelineTrace& trace, const std::string& path) {
    write_file_atomic(path, render_gantt(trace));
}

std::string render_utilization(const PipelineTrace& trace, UtilizationWindow window) {
    const auto rows = utilization(trace, window);
    std::ostringstream os;
    os << "stage\tbusy_cycles\tspan_cycles\tutilization\n";
    for (const auto& u : rows) os << u.stage << '\t' << u.busy << '\t' << u.span << '\t' << format_double(u.fraction) << '\n';
    return os.str();
}

void emit_utilization(const PipelineTrace& trace, const std::string& path, UtilizationWindow window) {
    write_file_atomic(path, render_utilization(trace, window));
}

}  // namespace lasp
