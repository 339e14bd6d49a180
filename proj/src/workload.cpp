#include "lasp/workload.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "lasp/errors.hpp"

namespace lasp {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Upper-tail quantile by bisection; accurate to ~1e-12.
double normal_quantile(double p) {
    double lo = -40.0;
    double hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (normal_cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double truncated_mean(double sigma, double log_max, double z) {
    const double mu = log_max - z * sigma;
    return std::exp(mu + 0.5 * sigma * sigma) * normal_cdf(z - sigma) / normal_cdf(z);
}

}  // namespace

std::optional<DatasetStats> dataset_stats(const std::string& name) {
    static constexpr std::array<DatasetStats, 3> kTable{{
        {"squad", 177.0, 821},
        {"rte", 68.0, 253},
        {"mrpc", 53.0, 86},
    }};
    for (const auto& d : kTable)
        if (name == d.name) return d;
    return std::nullopt;
}

LogNormalFit fit_truncated_lognormal(double avg, std::int64_t max_length, double tail_mass) {
    if (!(avg > 0.0) || max_length < 1) throw InfeasibleStats("stats need avg > 0 and max >= 1");
    if (avg >= static_cast<double>(max_length)) {
        throw InfeasibleStats("average length " + std::to_string(avg) + " must be below max " +
                              std::to_string(max_length));
    }
    if (!(tail_mass > 0.0 && tail_mass < 0.5)) throw InfeasibleStats("tail_mass must lie in (0, 0.5)");
    const double z = normal_quantile(1.0 - tail_mass);
    const double log_max = std::log(static_cast<double>(max_length));
    // The truncated mean decreases monotonically in sigma on (0, z).
    double lo = 1e-9;
    double hi = z;
    if (truncated_mean(hi, log_max, z) > avg) {
        throw InfeasibleStats("average length too small for max " + std::to_string(max_length) +
                              " at tail_mass " + std::to_string(tail_mass));
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (truncated_mean(mid, log_max, z) > avg ? lo : hi) = mid;
    }
    const double sigma = 0.5 * (lo + hi);
    return {log_max - z * sigma, sigma};
}

std::vector<std::int64_t> read_lengths_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open lengths file '" + path + "'");
    std::vector<std::int64_t> out;
    std::string token;
    while (in >> token) {
        if (token.front() == '#') {
            std::string rest;
            std::getline(in, rest);
            continue;
        }
        std::int64_t v = 0;
        std::istringstream ts(token);
        if (!(ts >> v) || !ts.eof()) throw ParseError("lengths file '" + path + "': bad token '" + token + "'");
        if (v < 1) throw ValidationError("lengths file '" + path + "': length " + token + " < 1");
        out.push_back(v);
    }
    return out;
}

std::vector<std::int64_t> generate_workload(const WorkloadSpec& spec, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::int64_t> out;
    switch (spec.source) {
        case WorkloadSource::File: {
            auto all = read_lengths_file(spec.path);
            if (all.empty()) throw ValidationError("lengths file '" + spec.path + "' is empty");
            if (spec.count == 0 || spec.count == all.size()) return all;
            out.reserve(spec.count);
            for (std::size_t i = 0; i < spec.count; ++i) out.push_back(all[i % all.size()]);
            return out;
        }
        case WorkloadSource::Uniform: {
            if (spec.lo < 1 || spec.hi < spec.lo) throw ValidationError("uniform workload needs 1 <= lo <= hi");
            std::uniform_int_distribution<std::int64_t> dist(spec.lo, spec.hi);
            for (std::size_t i = 0; i < spec.count; ++i) out.push_back(dist(rng));
            return out;
        }
        case WorkloadSource::Stats: {
            if (spec.min_length < 1 || spec.min_length > spec.max_length) {
                throw ValidationError("stats workload needs 1 <= min <= max");
            }
            const auto fit = fit_truncated_lognormal(spec.avg, spec.max_length, spec.tail_mass);
            std::normal_distribution<double> normal(fit.mu, fit.sigma);
            const double log_max = std::log(static_cast<double>(spec.max_length) + 0.5);
            while (out.size() < spec.count) {
                const double log_x = normal(rng);
                if (log_x > log_max) continue;
                const auto len = static_cast<std::int64_t>(std::llround(std::exp(log_x)));
                out.push_back(std::clamp(len, spec.min_length, spec.max_length));
            }
            return out;
        }
    }
    return out;
}

}  // namespace lasp
