#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "lasp/config.hpp"
#include "lasp/errors.hpp"
#include "lasp/workload.hpp"

using namespace lasp;

namespace {

double mean(const std::vector<std::int64_t>& v) {
    return static_cast<double>(std::accumulate(v.begin(), v.end(), std::int64_t{0})) / static_cast<double>(v.size());
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "lasp_test_workload";
    std::filesystem::create_directories(dir);
    return dir / name;
}

WorkloadSpec stats(double avg, std::int64_t max, std::size_t count) {
    WorkloadSpec w;
    w.source = WorkloadSource::Stats;
    w.avg = avg;
    w.max_length = max;
    w.count = count;
    return w;
}

}  // namespace

TEST_CASE("dataset presets") {
    CHECK(dataset_stats("squad")->avg == 177);
    CHECK(dataset_stats("squad")->max_length == 821);
    CHECK(dataset_stats("rte")->avg == 68);
    CHECK(dataset_stats("rte")->max_length == 253);
    CHECK(dataset_stats("mrpc")->avg == 53);
    CHECK(dataset_stats("mrpc")->max_length == 86);
    CHECK(!dataset_stats("imdb"));
}

TEST_CASE("lengths file passes through unchanged") {
    const auto path = scratch("lengths.txt");
    {
        std::ofstream out(path);
        out << "# Fig. 5 batch\n72 140\n100\n88 95  # trailing comment\n";
    }
    CHECK(read_lengths_file(path.string()) == std::vector<std::int64_t>{72, 140, 100, 88, 95});
    WorkloadSpec w;
    w.source = WorkloadSource::File;
    w.path = path.string();
    w.count = 0;
    CHECK(generate_workload(w, 1) == std::vector<std::int64_t>{72, 140, 100, 88, 95});
    CHECK(generate_workload(w, 99) == generate_workload(w, 1));
    w.count = 3;
    CHECK(generate_workload(w, 1) == std::vector<std::int64_t>{72, 140, 100});
    w.count = 7;
    CHECK(generate_workload(w, 1) == std::vector<std::int64_t>{72, 140, 100, 88, 95, 72, 140});

    {
        std::ofstream out(path);
        out << "12 zero 4\n";
    }
    CHECK_THROWS_AS((void)read_lengths_file(path.string()), ParseError);
    {
        std::ofstream out(path);
        out << "12 0 4\n";
    }
    CHECK_THROWS_AS((void)read_lengths_file(path.string()), ValidationError);
    CHECK_THROWS_AS((void)read_lengths_file((path.parent_path() / "missing.txt").string()), IoError);
}

TEST_CASE("stats workloads hit the target mean and respect the maximum") {
    for (const char* name : {"squad", "rte", "mrpc"}) {
        const auto st = *dataset_stats(name);
        const auto lengths = generate_workload(stats(st.avg, st.max_length, 10000), 1234);
        REQUIRE(lengths.size() == 10000);
        CHECK(std::abs(mean(lengths) - st.avg) <= 0.05 * st.avg);
        CHECK(*std::max_element(lengths.begin(), lengths.end()) <= st.max_length);
        CHECK(*std::min_element(lengths.begin(), lengths.end()) >= 1);
        // The tail reaches close to the maximum.
        CHECK(*std::max_element(lengths.begin(), lengths.end()) >= 0.9 * static_cast<double>(st.max_length));
    }
}

TEST_CASE("stats generation is seeded") {
    const auto w = stats(53, 86, 64);
    CHECK(generate_workload(w, 5) == generate_workload(w, 5));
    CHECK(generate_workload(w, 5) != generate_workload(w, 6));
    auto floor = stats(53, 86, 2000);
    floor.min_length = 40;
    const auto lengths = generate_workload(floor, 3);
    CHECK(*std::min_element(lengths.begin(), lengths.end()) >= 40);
}

TEST_CASE("truncated log-normal fit") {
    const auto fit = fit_truncated_lognormal(177, 821, 0.01);
    CHECK(fit.sigma > 0.0);
    // The untruncated tail mass beyond the maximum is the requested one.
    const double z = (std::log(821.0) - fit.mu) / fit.sigma;
    CHECK(0.5 * std::erfc(z / std::sqrt(2.0)) == doctest::Approx(0.01).epsilon(1e-6));
    CHECK_THROWS_AS((void)fit_truncated_lognormal(900, 821, 0.01), InfeasibleStats);
    CHECK_THROWS_AS((void)fit_truncated_lognormal(821, 821, 0.01), InfeasibleStats);
    CHECK_THROWS_AS((void)generate_workload(stats(90, 86, 4), 1), InfeasibleStats);
}

TEST_CASE("uniform workloads") {
    WorkloadSpec w;
    w.source = WorkloadSource::Uniform;
    w.lo = 72;
    w.hi = 140;
    w.count = 500;
    const auto lengths = generate_workload(w, 8);
    CHECK(lengths.size() == 500);
    CHECK(*std::min_element(lengths.begin(), lengths.end()) >= 72);
    CHECK(*std::max_element(lengths.begin(), lengths.end()) <= 140);
}

TEST_CASE("minimal config gets defaults") {
    const auto c = parse_config(R"({"model": "bert-base"})");
    CHECK(c.k == 30);
    CHECK(c.bits == 4);
    CHECK(c.shape == EncoderShape{12, 768, 12});
    CHECK(c.budget.compute_units == 3000);
    CHECK(c.budget.clock_hz == 200e6);
    CHECK(c.buffer_depth == 2);
    CHECK(c.batch_size == 16);
    CHECK(c.workload.count == 16);
    CHECK(c.simulated_layers() == 12);
    CHECK(c.window == UtilizationWindow::PerStage);
    CHECK(parse_config("{}") == c);
}

TEST_CASE("model presets") {
    CHECK(parse_config(R"({"model": "bert-large"})").shape == EncoderShape{24, 1024, 16});
    CHECK(parse_config(R"({"model": "distilbert"})").shape == EncoderShape{6, 768, 12});
    CHECK(parse_config(R"({"model": "roberta"})").shape == EncoderShape{12, 768, 12});
    const auto c = parse_config(R"({"model": "custom", "custom": {"layers": 2, "hidden": 64, "heads": 4}})");
    CHECK(c.shape == EncoderShape{2, 64, 4});
}

TEST_CASE("config errors") {
    auto message = [](const std::string& text) -> std::string {
        try {
            (void)parse_config(text);
        } catch (const Error& e) {
            return e.what();
        }
        return {};
    };
    CHECK_THROWS_AS((void)parse_config(R"({"model": "bert-base", "kk": 3})"), ParseError);
    CHECK(message(R"({"model": "bert-base", "kk": 3})").find("kk") != std::string::npos);
    CHECK_THROWS_AS((void)parse_config(R"({"workload": {"source": "stats", "mean": 3}})"), ParseError);
    CHECK(message(R"({"workload": {"mean": 3}})").find("workload.mean") != std::string::npos);
    CHECK_THROWS_AS((void)parse_config("{\"k\": 30,\n \"bits\": }"), ParseError);
    CHECK(message("{\"k\": 30,\n \"bits\": }").find("line 2") != std::string::npos);

    CHECK_THROWS_AS((void)parse_config(R"({"model": "custom", "custom": {"layers": 1, "hidden": 770, "heads": 12}})"),
                    ValidationError);
    CHECK(message(R"({"model": "custom", "custom": {"layers": 1, "hidden": 770, "heads": 12}})").find("custom.hidden") !=
          std::string::npos);
    CHECK(message(R"({"bits": 3})").find("bits") != std::string::npos);
    CHECK_THROWS_AS((void)parse_config(R"({"bits": 3})"), ValidationError);
    CHECK_THROWS_AS((void)parse_config(R"({"k": -1})"), ValidationError);
    CHECK_THROWS_AS((void)parse_config(R"({"k": "thirty"})"), ValidationError);
    CHECK_THROWS_AS((void)parse_config(R"({"model": "gpt"})"), ValidationError);
    CHECK_THROWS_AS((void)parse_config(R"({"workload": {"dataset": "imdb"}})"), ValidationError);
    CHECK_THROWS_AS((void)parse_config(R"({"workload": {"source": "file"}})"), ValidationError);
    CHECK_THROWS_AS((void)parse_config(R"({"utilization_window": "sometimes"})"), ValidationError);
    CHECK_THROWS_AS((void)parse_config(R"({"buffer_depth": 0})"), ValidationError);
    CHECK_THROWS_AS((void)load_config("/nonexistent/lasp.json"), IoError);
}

TEST_CASE("config round trip") {
    const auto c = parse_config(R"({
        "model": "custom", "custom": {"layers": 3, "hidden": 96, "heads": 6},
        "k": 12, "bits": 8, "budget": {"compute_units": 1500, "clock_hz": 250e6, "tile_width": 32},
        "r_max": 4, "buffer_depth": 3, "batch_size": 40,
        "workload": {"source": "stats", "dataset": "rte", "tail_mass": 0.02},
        "layers_to_simulate": 2, "micro_batch": 8, "fixed_costs": false, "seed": 77,
        "spot_check_n": 32, "utilization_window": "global", "output_dir": "runs/x"})");
    CHECK(c.workload.avg == 68);
    CHECK(c.workload.tail_mass == 0.02);
    CHECK(c.workload.count == 40);
    CHECK(parse_config(serialize_config(c)) == c);
    const auto d = parse_config(R"({"workload": {"source": "uniform", "lo": 5, "hi": 9}})");
    CHECK(parse_config(serialize_config(d)) == d);
}

TEST_CASE("relative lengths files resolve next to the config") {
    const auto dir = scratch("cfg");
    std::filesystem::create_directories(dir);
    {
        std::ofstream(dir / "lengths.txt") << "7 8 9\n";
        std::ofstream(dir / "run.json") << R"({"workload": {"source": "file", "path": "lengths.txt"}})";
    }
    const auto c = load_config((dir / "run.json").string());
    CHECK(c.workload.count == 0);
    CHECK(generate_workload(c.workload, 1) == std::vector<std::int64_t>{7, 8, 9});
}
