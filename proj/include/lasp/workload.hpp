#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lasp {

enum class WorkloadSource { File, Stats, Uniform };

/// Sequence-length workload. Stats draws from a log-normal truncated to
/// [min_length, max_length] whose untruncated upper tail beyond max_length has
/// mass `tail_mass`, with the location fitted so the truncated mean is `avg`.
struct WorkloadSpec {
    WorkloadSource source = WorkloadSource::Stats;
    std::string path;                    // File
    double avg = 53.0;                   // Stats
    std::int64_t max_length = 86;        // Stats
    std::int64_t min_length = 1;         // Stats
    double tail_mass = 0.01;             // Stats
    std::int64_t lo = 1, hi = 128;       // Uniform
    std::size_t count = 16;              // 0 with File = every length in the file

    friend bool operator==(const WorkloadSpec&, const WorkloadSpec&) = default;
};

struct DatasetStats {
    const char* name;
    double avg;
    std::int64_t max_length;
};

/// Average and maximum sequence lengths of the evaluation datasets.
[[nodiscard]] std::optional<DatasetStats> dataset_stats(const std::string& name);

struct LogNormalFit {
    double mu = 0.0;
    double sigma = 0.0;
};

/// Throws InfeasibleStats when avg >= max or the mean cannot be reached.
[[nodiscard]] LogNormalFit fit_truncated_lognormal(double avg, std::int64_t max_length, double tail_mass);

/// Deterministic for a given seed.
[[nodiscard]] std::vector<std::int64_t> generate_workload(const WorkloadSpec& spec, std::uint64_t seed);

[[nodiscard]] std::vector<std::int64_t> read_lengths_file(const std::string& path);

}  // namespace lasp
