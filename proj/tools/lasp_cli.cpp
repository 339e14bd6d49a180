#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "lasp/attention.hpp"
#include "lasp/config.hpp"
#include "lasp/errors.hpp"
#include "lasp/experiment.hpp"
#include "lasp/report_io.hpp"
#include "lasp/trace_io.hpp"

namespace {

void apply_overrides(lasp::ExperimentConfig& config, const std::optional<std::uint64_t>& seed,
                     const std::optional<std::string>& out, const std::optional<std::string>& lengths) {
    if (seed) config.seed = *seed;
    if (out) config.output_dir = *out;
    if (lengths) {
        config.workload.source = lasp::WorkloadSource::File;
        config.workload.path = *lengths;
        config.workload.count = 0;
        config.dataset.clear();
    }
    config.validate();
}

int cmd_run(const std::string& path, const std::optional<std::uint64_t>& seed, const std::optional<std::string>& out,
            const std::optional<std::string>& lengths) {
    auto config = lasp::load_config(path);
    apply_overrides(config, seed, out, lengths);
    const auto report = lasp::run_experiment(config);
    lasp::write_report_files(report, config.output_dir);
    std::cout << lasp::report_summary(report);
    std::cout << "wrote report to " << config.output_dir << "\n";
    return 0;
}

int cmd_allocate(const std::string& path, const std::optional<std::int64_t>& s_avg,
                 const std::optional<std::uint64_t>& seed, const std::optional<std::string>& lengths) {
    auto config = lasp::load_config(path);
    apply_overrides(config, seed, std::nullopt, lengths);
    std::int64_t length = 0;
    if (s_avg) {
        length = *s_avg;
    } else {
        length = lasp::allocation_length(config, lasp::generate_workload(config.workload, config.seed));
    }
    const auto plan = lasp::plan_allocation(config, length);
    lasp::write_graph(std::cout, plan.graph);
    lasp::write_allocation(std::cout, plan.graph, plan.allocation, config.budget, plan.s_avg);
    return 0;
}

int cmd_gantt(const std::string& trace_path, const std::string& out) {
    std::ifstream in(trace_path);
    if (!in) throw lasp::IoError("cannot open trace '" + trace_path + "'");
    const auto trace = lasp::read_trace(in);
    lasp::emit_gantt(trace, out);
    std::cout << "wrote " << trace.events.size() << " events to " << out << "\n";
    return 0;
}

int cmd_bench(std::size_t n, std::size_t d, std::size_t k, int bits, std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto check = lasp::numeric_spot_check(n, d, k, bits, seed);
    const auto t1 = std::chrono::steady_clock::now();
    const auto dense = lasp::count_ops(n, d, k, bits, lasp::AttentionMode::Dense);
    const auto sparse = lasp::count_ops(n, d, k, bits, lasp::AttentionMode::Sparse);
    std::cout << "n=" << n << " d=" << d << " k=" << check.k << " bits=" << bits << " seed=" << seed << "\n";
    std::cout << "max_abs_error " << lasp::format_double(check.max_abs_error) << "\n";
    std::cout << "max_rel_error " << lasp::format_double(check.max_rel_error) << "\n";
    std::cout << "dense  exact_macs " << dense.exact_macs << " exp_evals " << dense.exp_evals << "\n";
    std::cout << "sparse exact_macs " << sparse.exact_macs << " lowbit_macs " << sparse.lowbit_macs << " exp_evals "
              << sparse.exp_evals << "\n";
    std::cout << "exact work reduction "
              << lasp::format_double(1.0 - static_cast<double>(sparse.exact_macs) / static_cast<double>(dense.exact_macs))
              << "\n";
    std::cout << "elapsed_ms " << std::chrono::duration<double, std::milli>(t1 - t0).count() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Length-aware sparse attention pipeline modeling"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> lengths;
    auto* run = app.add_subcommand("run", "Simulate length-aware, padded and micro-batch schedules and write a report");
    run->add_option("config", config_path, "Experiment config (JSON)")->required();
    run->add_option("--seed", seed, "Override the config seed");
    run->add_option("--out", out, "Override the output directory");
    run->add_option("--lengths", lengths, "Read the batch from a file of integer lengths");

    std::optional<std::int64_t> s_avg;
    auto* allocate = app.add_subcommand("allocate", "Print the operator graph and stage allocation");
    allocate->add_option("config", config_path, "Experiment config (JSON)")->required();
    allocate->add_option("--s-avg", s_avg, "Average length used for allocation");
    allocate->add_option("--seed", seed, "Override the config seed");
    allocate->add_option("--lengths", lengths, "Read the batch from a file of integer lengths");

    std::string trace_path;
    std::string gantt_out;
    auto* gantt = app.add_subcommand("gantt", "Render a trace file as an SVG timing diagram");
    gantt->add_option("trace", trace_path, "Trace file")->required();
    gantt->add_option("out", gantt_out, "Output SVG path")->required();

    std::size_t n = 177;
    std::size_t d = 64;
    std::size_t k = 30;
    int bits = 4;
    std::uint64_t bench_seed = 1;
    auto* bench = app.add_subcommand("bench-attention", "Compare sparse and dense attention on random tensors");
    bench->add_option("--n", n, "Sequence length")->check(CLI::PositiveNumber);
    bench->add_option("--d", d, "Head dimension")->check(CLI::PositiveNumber);
    bench->add_option("--k", k, "Candidates per query")->check(CLI::PositiveNumber);
    bench->add_option("--bits", bits, "Quantization width (1, 2, 4, 8)");
    bench->add_option("--seed", bench_seed, "Random seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config_path, seed, out, lengths);
        if (*allocate) return cmd_allocate(config_path, s_avg, seed, lengths);
        if (*gantt) return cmd_gantt(trace_path, gantt_out);
        if (*bench) return cmd_bench(n, d, k, bits, bench_seed);
    } catch (const lasp::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
