#include "lasp/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "lasp/attention.hpp"
#include "lasp/errors.hpp"
#include "lasp/report_io.hpp"
#include "lasp/trace_io.hpp"

namespace lasp {

using nlohmann::ordered_json;

AllocationResult plan_allocation(const ExperimentConfig& config, std::int64_t s_avg) {
    AllocationResult out;
    out.s_avg = s_avg;
    out.graph = build_encoder_graph(config.shape, config.k, GraphOptions{config.fixed_costs, 4});
    out.allocation = allocate_stages(out.graph, s_avg, config.budget);
    out.allocation.replication = enumerate_replication(out.graph, out.allocation, s_avg, config.budget, config.r_max);
    return out;
}

std::int64_t allocation_length(const ExperimentConfig& config, const std::vector<std::int64_t>& lengths) {
    if (config.workload.source == WorkloadSource::Stats) {
        return std::max<std::int64_t>(1, std::llround(config.workload.avg));
    }
    if (lengths.empty()) throw EmptyBatch("workload produced no sequences");
    const double sum = std::accumulate(lengths.begin(), lengths.end(), 0.0);
    return std::max<std::int64_t>(1, std::llround(sum / static_cast<double>(lengths.size())));
}

NumericCheck numeric_spot_check(std::size_t n, std::size_t d, std::size_t k, int bits, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    AttentionProblem p{RealMatrix(n, d), RealMatrix(n, d), RealMatrix(n, d), std::nullopt};
    for (auto* m : {&p.q, &p.k, &p.v})
        for (double& x : m->flat()) x = normal(rng);
    const RealMatrix dense = dense_attention(p);
    const RealMatrix sparse = sparse_attention(p, k, bits).z;
    NumericCheck c{n, d, std::min(k, n), bits, 0.0, 0.0};
    double ref = 0.0;
    for (std::size_t i = 0; i < dense.flat().size(); ++i) {
        c.max_abs_error = std::max(c.max_abs_error, std::abs(dense.flat()[i] - sparse.flat()[i]));
        ref = std::max(ref, std::abs(dense.flat()[i]));
    }
    c.max_rel_error = ref > 0.0 ? c.max_abs_error / ref : c.max_abs_error;
    return c;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    ExperimentReport r;
    r.config = config;
    try {
        r.lengths = generate_workload(config.workload, config.seed);
    } catch (const Error& e) {
        throw ValidationError(std::string("workload generation failed: ") + e.what());
    }
    const std::int64_t s_avg = allocation_length(config, r.lengths);
    try {
        r.plan = plan_allocation(config, s_avg);
    } catch (const NodeExceedsBudget& e) {
        throw NodeExceedsBudget(std::string("stage allocation failed: ") + e.what());
    }

    PipelineConfig pc;
    pc.stages = stage_timings(r.plan.graph, r.plan.allocation, config.budget, s_avg);
    pc.layers = config.simulated_layers();
    pc.batch = make_batch(r.lengths);
    pc.buffer_depth = config.buffer_depth;
    pc.clock_hz = config.budget.clock_hz;

    r.length_aware = simulate(pc);
    r.padded = baseline_padded(pc);
    r.microbatch = baseline_microbatch(pc, config.micro_batch);
    r.comparison = compare({{"length-aware", &r.length_aware}, {"padded", &r.padded}, {"microbatch", &r.microbatch}});
    for (const auto* t : {&r.length_aware, &r.padded, &r.microbatch}) r.window_utilization.push_back(utilization(*t, config.window));

    const std::size_t head_dim = config.shape.hidden / config.shape.heads;
    r.numeric = numeric_spot_check(config.spot_check_n, head_dim, config.k, config.bits, config.seed);
    return r;
}

namespace {

ordered_json utilization_json(const std::vector<StageUtilization>& rows) {
    ordered_json out = ordered_json::array();
    for (const auto& u : rows) {
        out.push_back({{"stage", u.stage}, {"busy_cycles", u.busy}, {"span_cycles", u.span}, {"utilization", u.fraction}});
    }
    return out;
}

const char* file_stem(std::size_t i) {
    static const char* kStems[] = {"length_aware", "padded", "microbatch"};
    return kStems[i];
}

}  // namespace

std::string report_json(const ExperimentReport& r) {
    const auto& c = r.config;
    ordered_json j;
    j["model"] = {{"name", c.model}, {"layers", c.shape.layers}, {"hidden", c.shape.hidden}, {"heads", c.shape.heads}};
    j["k"] = c.k;
    j["bits"] = c.bits;
    j["seed"] = c.seed;
    j["simulated_layers"] = c.simulated_layers();
    j["budget"] = {{"compute_units", c.budget.compute_units}, {"clock_hz", c.budget.clock_hz}, {"tile_width", c.budget.tile_width}};

    const double sum = std::accumulate(r.lengths.begin(), r.lengths.end(), 0.0);
    const auto max_len = *std::max_element(r.lengths.begin(), r.lengths.end());
    j["workload"] = {{"dataset", c.dataset},
                     {"count", r.lengths.size()},
                     {"mean_length", sum / static_cast<double>(r.lengths.size())},
                     {"max_length", max_len},
                     {"lengths", r.lengths}};

    const auto& g = r.plan.graph;
    const auto& a = r.plan.allocation;
    ordered_json stages = ordered_json::array();
    for (std::size_t k = 0; k < a.stage_count(); ++k) {
        ordered_json members = ordered_json::array();
        for (NodeId v : a.stages[k]) members.push_back({{"node", g.node(v).name}, {"parallelism", a.parallelism[v]}});
        stages.push_back({{"index", k},
                          {"replication", a.replication[k]},
                          {"units", stage_resource_cost(g, a.stages[k], a.parallelism, c.budget)},
                          {"cycles_at_s_avg", stage_cycles(g, a, k, r.plan.s_avg, c.budget)},
                          {"members", members}});
    }
    j["allocation"] = {{"s_avg", r.plan.s_avg}, {"stage_count", a.stage_count()}, {"stages", stages}};

    const auto& subject = r.comparison.entries.front();
    ordered_json schedules = ordered_json::array();
    for (std::size_t i = 0; i < r.comparison.entries.size(); ++i) {
        const auto& e = r.comparison.entries[i];
        schedules.push_back({{"name", e.name},
                             {"makespan_cycles", e.makespan_cycles},
                             {"makespan_seconds", e.makespan_seconds},
                             {"speedup_of_length_aware", static_cast<double>(e.makespan_cycles) /
                                                             static_cast<double>(subject.makespan_cycles)},
                             {"saved_cycles", e.saved_cycles},
                             {"trace_file", std::string("trace_") + file_stem(i) + ".txt"},
                             {"utilization", utilization_json(r.window_utilization[i])}});
    }
    j["schedules"] = schedules;
    j["utilization_window"] = c.window == UtilizationWindow::Global ? "global" : "per-stage";
    j["numeric_check"] = {{"n", r.numeric.n},
                          {"d", r.numeric.d},
                          {"k", r.numeric.k},
                          {"bits", r.numeric.bits},
                          {"max_abs_error", r.numeric.max_abs_error},
                          {"max_rel_error", r.numeric.max_rel_error}};
    return j.dump(2) + "\n";
}

std::string report_summary(const ExperimentReport& r) {
    const auto& c = r.config;
    std::ostringstream os;
    os << "model " << c.model << " (" << c.shape.layers << " layers, hidden " << c.shape.hidden << ", " << c.shape.heads
       << " heads), k=" << c.k << ", bits=" << c.bits << "\n";
    os << "batch " << r.lengths.size() << " sequences, s_avg=" << r.plan.s_avg << ", simulated layers "
       << c.simulated_layers() << "\n";
    os << "allocation: " << r.plan.allocation.stage_count() << " stages, R =";
    for (int rep : r.plan.allocation.replication) os << ' ' << rep;
    os << "\n";
    const auto& subject = r.comparison.entries.front();
    char buf[160];
    for (const auto& e : r.comparison.entries) {
        std::snprintf(buf, sizeof buf, "  %-14s %14lld cycles  %10.6f s  %7.3fx  saved %lld cycles\n",
                      e.name.c_str(), static_cast<long long>(e.makespan_cycles), e.makespan_seconds, e.speedup,
                      static_cast<long long>(e.saved_cycles));
        os << buf;
    }
    os << "stage utilization (length-aware):";
    for (const auto& u : subject.utilization) {
        std::snprintf(buf, sizeof buf, " %.4f", u.fraction);
        os << buf;
    }
    std::snprintf(buf, sizeof buf, "\nnumeric check n=%zu d=%zu k=%zu: max relative error %.3g\n", r.numeric.n,
                  r.numeric.d, r.numeric.k, r.numeric.max_rel_error);
    os << buf;
    return os.str();
}

void write_report_files(const ExperimentReport& r, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "'");
    const std::filesystem::path base(dir);
    write_file_atomic((base / "report.json").string(), report_json(r));
    write_file_atomic((base / "summary.txt").string(), report_summary(r));
    const PipelineTrace* traces[] = {&r.length_aware, &r.padded, &r.microbatch};
    for (std::size_t i = 0; i < 3; ++i) {
        std::ostringstream os;
        write_trace(os, *traces[i]);
        const std::string stem = file_stem(i);
        write_file_atomic((base / ("trace_" + stem + ".txt")).string(), os.str());
        emit_utilization(*traces[i], (base / ("utilization_" + stem + ".tsv")).string(), r.config.window);
        emit_gantt(*traces[i], (base / ("gantt_" + stem + ".svg")).string());
    }
}

}  // namespace lasp
