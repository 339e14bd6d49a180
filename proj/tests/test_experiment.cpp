#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "lasp/errors.hpp"
#include "lasp/experiment.hpp"
#include "lasp/report_io.hpp"

using namespace lasp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / "lasp_test_experiment" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
    return n;
}

ExperimentConfig small_config() {
    return parse_config(R"({"model": "bert-base", "batch_size": 8, "layers_to_simulate": 2,
                            "workload": {"dataset": "mrpc"}, "seed": 3, "spot_check_n": 32})");
}

}  // namespace

TEST_CASE("allocation length") {
    auto c = small_config();
    CHECK(allocation_length(c, {1, 2, 3}) == 53);
    c.workload.source = WorkloadSource::Uniform;
    CHECK(allocation_length(c, {10, 20, 31}) == 20);
    CHECK(allocation_length(c, {10, 11}) == 11);
}

TEST_CASE("plan_allocation fills replicas within the budget") {
    const auto plan = plan_allocation(small_config(), 53);
    CHECK(plan.s_avg == 53);
    std::int64_t used = 0;
    for (std::size_t k = 0; k < plan.allocation.stage_count(); ++k)
        used += plan.allocation.replication[k] *
                stage_resource_cost(plan.graph, plan.allocation.stages[k], plan.allocation.parallelism, ResourceBudget{});
    CHECK(used <= 3000);
    CHECK(plan.allocation.replication == std::vector<int>{3, 2, 5, 4, 1});
}

TEST_CASE("report speedups are the makespan ratios") {
    const auto r = run_experiment(small_config());
    CHECK(r.lengths.size() == 8);
    CHECK(r.length_aware.layers == 2);
    const auto j = nlohmann::json::parse(report_json(r));
    const auto& schedules = j.at("schedules");
    REQUIRE(schedules.size() == 3);
    CHECK(schedules[0].at("name") == "length-aware");
    const double base = schedules[0].at("makespan_cycles").get<double>();
    for (const auto& s : schedules) {
        CHECK(s.at("speedup_of_length_aware").get<double>() == s.at("makespan_cycles").get<double>() / base);
        CHECK(s.at("saved_cycles").get<std::int64_t>() ==
              s.at("makespan_cycles").get<std::int64_t>() - static_cast<std::int64_t>(base));
    }
    CHECK(j.at("workload").at("lengths").size() == 8);
    CHECK(j.at("seed") == 3);
    for (const auto* t : {&r.length_aware, &r.padded, &r.microbatch}) CHECK(check_trace(*t, 2).empty());
}

TEST_CASE("MRPC-sized batches recover the padding ratio") {
    auto c = parse_config(R"({"model": "bert-base", "batch_size": 512, "layers_to_simulate": 1,
                              "workload": {"dataset": "mrpc"}, "seed": 11})");
    const auto r = run_experiment(c);
    const double speedup = r.comparison.entries.at(1).speedup;
    CHECK(r.comparison.entries.at(1).name == "padded");
    CHECK(speedup >= 1.6 * 0.85);
    CHECK(speedup <= 1.6 * 1.15);
}

TEST_CASE("spot check degenerates when k covers the sequence") {
    const auto full = numeric_spot_check(48, 64, 48, 4, 9);
    CHECK(full.max_rel_error <= 1e-6);
    CHECK(numeric_spot_check(48, 64, 100, 1, 9).max_rel_error <= 1e-6);
    const auto partial = numeric_spot_check(48, 64, 8, 4, 9);
    CHECK(partial.max_rel_error > full.max_rel_error);
    auto c = small_config();
    c.k = 32;
    CHECK(run_experiment(c).numeric.max_rel_error <= 1e-6);
}

TEST_CASE("runs with the same seed write identical files") {
    const auto c = small_config();
    const auto a = scratch("a");
    const auto b = scratch("b");
    write_report_files(run_experiment(c), a.string());
    write_report_files(run_experiment(c), b.string());
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        ++files;
        const auto other = b / entry.path().filename();
        REQUIRE(fs::exists(other));
        CHECK(slurp(entry.path()) == slurp(other));
    }
    CHECK(files == 11);
    for (const char* name : {"report.json", "summary.txt", "trace_length_aware.txt", "gantt_padded.svg",
                             "utilization_microbatch.tsv"})
        CHECK(fs::exists(a / name));

    auto d = c;
    d.seed = 4;
    const auto other = scratch("c");
    write_report_files(run_experiment(d), other.string());
    CHECK(slurp(a / "report.json") != slurp(other / "report.json"));
}

TEST_CASE("gantt output") {
    PipelineConfig c;
    c.stages = linear_stages({3});
    c.batch = make_batch({4});
    const auto single = simulate(c);
    const auto svg = render_gantt(single);
    CHECK(count(svg, "<title>") == 1);
    CHECK(svg.find("t0/L0") != std::string::npos);
    // The only event spans the whole time axis: same x and width as its lane.
    std::smatch m;
    REQUIRE(std::regex_search(svg, m, std::regex(R"re(<rect x="([0-9.]+)" y="[0-9.]+" width="([0-9.]+)" height="[0-9.]+" fill="hsl)re")));
    CHECK(svg.find("<rect x=\"" + m[1].str() + "\" y=\"28.00\" width=\"" + m[2].str() + "\" height=\"22.00\" fill=\"#f2f2f2\"") !=
          std::string::npos);

    c.stages = linear_stages({2, 3, 2});
    c.batch = make_batch({140, 72, 100, 88, 95});
    const auto staircase = render_gantt(simulate(c));
    CHECK(count(staircase, "<title>") == 15);
    CHECK(count(staircase, "fill=\"#f2f2f2\"") == 3);

    const auto dir = scratch("gantt");
    const auto path = (dir / "empty.svg").string();
    CHECK_THROWS_AS(emit_gantt(PipelineTrace{}, path), EmptyTrace);
    CHECK(!fs::exists(path));
    CHECK(fs::is_empty(dir));
    emit_gantt(single, path);
    CHECK(slurp(path) == svg);
}

TEST_CASE("utilization table") {
    PipelineConfig c;
    c.stages = linear_stages({2, 5});
    c.batch = make_batch({30, 10, 20});
    const auto t = simulate(c);
    std::istringstream in(render_utilization(t));
    std::string line;
    std::getline(in, line);
    CHECK(line == "stage\tbusy_cycles\tspan_cycles\tutilization");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        std::istringstream row(line);
        std::size_t stage = 0;
        std::int64_t busy = 0, span = 0;
        double fraction = 0.0;
        row >> stage >> busy >> span >> fraction;
        CHECK(busy <= span);
        CHECK(fraction == doctest::Approx(static_cast<double>(busy) / static_cast<double>(span)));
    }
    CHECK(rows == 2);
    CHECK_THROWS_AS((void)render_utilization(PipelineTrace{}), EmptyTrace);
}

TEST_CASE("atomic writes leave no temporary files") {
    const auto dir = scratch("atomic");
    const auto path = (dir / "x.txt").string();
    write_file_atomic(path, "one");
    write_file_atomic(path, "two");
    CHECK(slurp(path) == "two");
    CHECK(std::distance(fs::directory_iterator(dir), fs::directory_iterator()) == 1);
    CHECK_THROWS_AS(write_file_atomic((dir / "no" / "such" / "x.txt").string(), "z"), IoError);
}
