#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lasp {

using NodeId = std::size_t;

enum class OpKind { MatMul, AttenSelect, AttenLoad, AttenScore, AttenAV, Add, LayerNorm, Gelu, Sink };

/// Controller state of the stage state machine that owns an operator.
enum class ControllerState { StateMM, StateAtten, StateFF };

[[nodiscard]] std::string_view to_string(OpKind kind) noexcept;
[[nodiscard]] std::string_view to_string(ControllerState state) noexcept;
[[nodiscard]] OpKind parse_op_kind(std::string_view text);
[[nodiscard]] ControllerState parse_controller_state(std::string_view text);

/// An operator whose work at sequence length s is per_token * s + fixed unit
/// operations. `width` is the MAC width of one instance before the tile cap.
struct OperatorNode {
    NodeId id = 0;
    OpKind kind = OpKind::MatMul;
    std::string name;
    std::int64_t per_token = 0;
    std::int64_t fixed = 0;
    std::int64_t width = 1;
    ControllerState state = ControllerState::StateMM;

    [[nodiscard]] bool is_virtual() const noexcept { return kind == OpKind::Sink; }
    friend bool operator==(const OperatorNode&, const OperatorNode&) = default;
};

[[nodiscard]] std::int64_t operator_weight(const OperatorNode& v, std::int64_t length);

class OperatorGraph {
public:
    NodeId add_node(OpKind kind, std::string name, std::int64_t per_token, std::int64_t fixed, std::int64_t width,
                    ControllerState state);
    void add_edge(NodeId from, NodeId to);

    /// Appends a zero-weight sink fed by every natural sink when there is more
    /// than one. Returns the sink id.
    NodeId ensure_unique_sink();

    [[nodiscard]] const std::vector<OperatorNode>& nodes() const noexcept { return nodes_; }
    [[nodiscard]] const OperatorNode& node(NodeId id) const { return nodes_.at(id); }
    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
    [[nodiscard]] const std::vector<std::pair<NodeId, NodeId>>& edges() const noexcept { return edges_; }
    [[nodiscard]] const std::vector<NodeId>& successors(NodeId id) const { return succ_.at(id); }
    [[nodiscard]] std::vector<NodeId> sinks() const;

    /// Kahn order, ascending id among ready nodes. Throws CyclicGraph.
    [[nodiscard]] std::vector<NodeId> topological_order() const;

    friend bool operator==(const OperatorGraph&, const OperatorGraph&) = default;

private:
    std::vector<OperatorNode> nodes_;
    std::vector<std::pair<NodeId, NodeId>> edges_;
    std::vector<std::vector<NodeId>> succ_;
};

struct GraphOptions {
    bool fixed_costs = true;   // charge per-sequence LayerNorm parameter loads
    std::size_t ffn_multiplier = 4;
};

struct EncoderShape {
    std::size_t layers = 12;
    std::size_t hidden = 768;
    std::size_t heads = 12;
    friend bool operator==(const EncoderShape&, const EncoderShape&) = default;
};

/// One encoder layer: Q/K/V projections, quantized pre-selection, candidate
/// load, fused scoring, AV, output projection, add & norm, FFN with GELU, add &
/// norm. Throws InvalidConfig.
[[nodiscard]] OperatorGraph build_encoder_graph(const EncoderShape& shape, std::size_t k,
                                                const GraphOptions& options = {});

/// P(v) = W(v) + max over successors P(succ); the max-weight path to the sink.
[[nodiscard]] std::vector<std::int64_t> compute_priorities(const OperatorGraph& g, std::int64_t s_avg);

struct ResourceBudget {
    std::int64_t compute_units = 3000;
    double clock_hz = 200e6;
    std::int64_t tile_width = 64;
    friend bool operator==(const ResourceBudget&, const ResourceBudget&) = default;
};

/// MACs per cycle of one operator instance: width capped at the tile size.
[[nodiscard]] std::int64_t units_per_instance(const OperatorNode& v, const ResourceBudget& budget) noexcept;

struct VisitRecord {
    NodeId node = 0;
    std::size_t stage = 0;
    bool opened_stage = false;
    std::vector<std::pair<NodeId, std::int64_t>> factors;  // ceil-ratio applied to members on join
};

struct StageAllocation {
    std::vector<std::vector<NodeId>> stages;
    std::vector<std::int64_t> parallelism;  // per node id; 0 for the virtual sink
    std::vector<int> replication;           // per stage
    std::vector<VisitRecord> visit_log;

    [[nodiscard]] std::size_t stage_count() const noexcept { return stages.size(); }
    friend bool operator==(const StageAllocation& a, const StageAllocation& b) {
        return a.stages == b.stages && a.parallelism == b.parallelism && a.replication == b.replication;
    }
};

/// Visit nodes in decreasing priority (ascending id on ties); a node joins the
/// open stage if the ceil-ratio parallelism update keeps it within budget,
/// otherwise it opens a new stage. Throws NodeExceedsBudget.
[[nodiscard]] StageAllocation allocate_stages(const OperatorGraph& g, std::int64_t s_avg,
                                              const ResourceBudget& budget);

[[nodiscard]] std::int64_t stage_resource_cost(const OperatorGraph& g, const std::vector<NodeId>& stage,
                                               const std::vector<std::int64_t>& parallelism,
                                               const ResourceBudget& budget);

/// Cycles for one work item of the given length on one replica of a stage:
/// sum over nodes of ceil(W(v, s) / (N(v) * units_per_instance(v))).
[[nodiscard]] std::int64_t stage_cycles(const OperatorGraph& g, const StageAllocation& alloc, std::size_t stage,
                                        std::int64_t length, const ResourceBudget& budget);

/// Exhaustive search over R in [1, r_max]^K maximizing min_k R_k / cycles_k(s_avg)
/// subject to sum_k R_k * units_k <= budget. Ties prefer more total replicas,
/// then extra replicas on earlier stages. All ones when nothing else fits.
[[nodiscard]] std::vector<int> enumerate_replication(const OperatorGraph& g, const StageAllocation& alloc,
                                                     std::int64_t s_avg, const ResourceBudget& budget,
                                                     int r_max = 8);

/// Structured text: node lines, edge lines and, for write_allocation, stage
/// membership with N and R.
void write_graph(std::ostream& os, const OperatorGraph& g);
void write_allocation(std::ostream& os, const OperatorGraph& g, const StageAllocation& alloc,
                      const ResourceBudget& budget, std::int64_t s_avg);

}  // namespace lasp
