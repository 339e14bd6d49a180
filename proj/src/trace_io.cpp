#include "lasp/trace_io.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include "lasp/errors.hpp"

namespace lasp {

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

void write_trace(std::ostream& os, const PipelineTrace& trace) {
    os << "lasp-trace 1\n";
    os << "label " << trace.label << '\n';
    os << "layers " << trace.layers << '\n';
    os << "clock_hz " << format_double(trace.clock_hz) << '\n';
    os << "replicas";
    for (int r : trace.replicas) os << ' ' << r;
    os << '\n';
    for (const auto& t : trace.tasks) os << "task " << t.id << ' ' << t.length << ' ' << t.effective_length << '\n';
    for (const auto& e : trace.events) {
        os << "event " << e.stage << ' ' << e.replica << ' ' << e.task << ' ' << e.layer << ' ' << to_string(e.state)
           << ' ' << e.start << ' ' << e.end << '\n';
    }
    if (trace.events.empty()) return;
    os << "summary makespan_cycles=" << trace.makespan() << " makespan_seconds=" << format_double(trace.makespan_seconds())
       << '\n';
    for (const auto& u : utilization(trace)) {
        os << "stage_summary " << u.stage << " busy=" << u.busy << " span=" << u.span
           << " utilization=" << format_double(u.fraction) << '\n';
    }
}

PipelineTrace read_trace(std::istream& is) {
    PipelineTrace trace;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    auto fail = [&](const std::string& why) {
        throw ParseError("trace line " + std::to_string(line_no) + ": " + why);
    };
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (!header) {
            int version = 0;
            if (tag != "lasp-trace" || !(ls >> version) || version != 1) fail("missing 'lasp-trace 1' header");
            header = true;
            continue;
        }
        if (tag == "label") {
            std::getline(ls >> std::ws, trace.label);
        } else if (tag == "layers") {
            if (!(ls >> trace.layers)) fail("bad layers");
        } else if (tag == "clock_hz") {
            if (!(ls >> trace.clock_hz)) fail("bad clock_hz");
        } else if (tag == "replicas") {
            int r = 0;
            while (ls >> r) trace.replicas.push_back(r);
        } else if (tag == "task") {
            TraceTask t;
            if (!(ls >> t.id >> t.length >> t.effective_length)) fail("bad task record");
            trace.tasks.push_back(t);
        } else if (tag == "event") {
            TraceEvent e;
            std::string state;
            if (!(ls >> e.stage >> e.replica >> e.task >> e.layer >> state >> e.start >> e.end)) fail("bad event record");
            e.state = parse_controller_state(state);
            if (e.stage >= trace.replicas.size()) fail("event references unknown stage");
            trace.events.push_back(e);
        } else if (tag == "summary" || tag == "stage_summary") {
            continue;
        } else {
            fail("unknown record '" + tag + "'");
        }
    }
    if (!header) throw ParseError("trace is empty or lacks a header");
    return trace;
}

}  // namespace lasp
