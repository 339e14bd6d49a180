#pragma once

#include <cstdint>
#include <string>

#include "lasp/encoder_graph.hpp"
#include "lasp/pipeline_sim.hpp"
#include "lasp/workload.hpp"

namespace lasp {

/// Model presets: distilbert (6/768/12), bert-base and roberta (12/768/12),
/// bert-large (24/1024/16), or custom.
[[nodiscard]] bool model_preset(const std::string& name, EncoderShape& shape);

struct ExperimentConfig {
    std::string model = "bert-base";
    EncoderShape shape{};
    std::size_t k = 30;
    int bits = 4;
    ResourceBudget budget{};
    int r_max = 8;
    std::size_t buffer_depth = 2;
    std::size_t batch_size = 16;
    std::string dataset;  // preset name when the workload came from one, else empty
    WorkloadSpec workload{};
    std::size_t layers_to_simulate = 0;  // 0 = every model layer
    std::size_t micro_batch = 4;
    bool fixed_costs = true;
    std::uint64_t seed = 1;
    std::size_t spot_check_n = 64;
    UtilizationWindow window = UtilizationWindow::PerStage;
    std::string output_dir = "out";

    [[nodiscard]] std::size_t simulated_layers() const noexcept {
        return layers_to_simulate == 0 ? shape.layers : layers_to_simulate;
    }
    /// Throws ValidationError naming the offending field.
    void validate() const;
    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// JSON text to config with defaults applied. Throws ParseError (syntax, unknown
/// key) or ValidationError (bad value).
[[nodiscard]] ExperimentConfig parse_config(const std::string& text);
[[nodiscard]] ExperimentConfig load_config(const std::string& path);

/// Fully explicit JSON; parse_config(serialize_config(c)) == c.
[[nodiscard]] std::string serialize_config(const ExperimentConfig& config);

}  // namespace lasp
