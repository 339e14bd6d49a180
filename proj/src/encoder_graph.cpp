#include "lasp/encoder_graph.hpp"

#include <algorithm>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <queue>

#include "lasp/errors.hpp"

namespace lasp {

namespace {

constexpr std::int64_t kSaturated = std::numeric_limits<std::int64_t>::max() / 4;

std::int64_t saturating_mul(std::int64_t a, std::int64_t b) {
    if (a != 0 && b > kSaturated / a) return kSaturated;
    return std::min(a * b, kSaturated);
}

std::int64_t ceil_div(std::int64_t num, std::int64_t den) { return (num + den - 1) / den; }

}  // namespace

std::string_view to_string(OpKind kind) noexcept {
    switch (kind) {
        case OpKind::MatMul: return "MatMul";
        case OpKind::AttenSelect: return "AttenSelect";
        case OpKind::AttenLoad: return "AttenLoad";
        case OpKind::AttenScore: return "AttenScore";
        case OpKind::AttenAV: return "AttenAV";
        case OpKind::Add: return "Add";
        case OpKind::LayerNorm: return "LayerNorm";
        case OpKind::Gelu: return "Gelu";
        case OpKind::Sink: return "Sink";
    }
    return "?";
}

std::string_view to_string(ControllerState state) noexcept {
    switch (state) {
        case ControllerState::StateMM: return "StateMM";
        case ControllerState::StateAtten: return "StateAtten";
        case ControllerState::StateFF: return "StateFF";
    }
    return "?";
}

OpKind parse_op_kind(std::string_view text) {
    for (auto k : {OpKind::MatMul, OpKind::AttenSelect, OpKind::AttenLoad, OpKind::AttenScore, OpKind::AttenAV,
                   OpKind::Add, OpKind::LayerNorm, OpKind::Gelu, OpKind::Sink}) {
        if (to_string(k) == text) return k;
    }
    throw ParseError("unknown operator kind '" + std::string(text) + "'");
}

ControllerState parse_controller_state(std::string_view text) {
    for (auto s : {ControllerState::StateMM, ControllerState::StateAtten, ControllerState::StateFF}) {
        if (to_string(s) == text) return s;
    }
    throw ParseError("unknown controller state '" + std::string(text) + "'");
}

std::int64_t operator_weight(const OperatorNode& v, std::int64_t length) {
    return v.per_token * length + v.fixed;
}

NodeId OperatorGraph::add_node(OpKind kind, std::string name, std::int64_t per_token, std::int64_t fixed,
                               std::int64_t width, ControllerState state) {
    if (per_token < 0 || fixed < 0) throw InvalidConfig("operator cost coefficients must be >= 0");
    if (kind != OpKind::Sink && per_token + fixed == 0) {
        throw InvalidConfig("operator '" + name + "' has zero cost");
    }
    if (width < 1) throw InvalidConfig("operator width must be >= 1");
    const NodeId id = nodes_.size();
    nodes_.push_back({id, kind, std::move(name), per_token, fixed, width, state});
    succ_.emplace_back();
    return id;
}

void OperatorGraph::add_edge(NodeId from, NodeId to) {
    if (from >= nodes_.size() || to >= nodes_.size()) throw InvalidConfig("edge references unknown node");
    if (from == to) throw CyclicGraph("self-loop on node " + std::to_string(from));
    edges_.emplace_back(from, to);
    succ_[from].push_back(to);
}

std::vector<NodeId> OperatorGraph::sinks() const {
    std::vector<NodeId> out;
    for (NodeId v = 0; v < nodes_.size(); ++v)
        if (succ_[v].empty()) out.push_back(v);
    return out;
}

NodeId OperatorGraph::ensure_unique_sink() {
    const auto natural = sinks();
    if (natural.size() == 1) return natural.front();
    const NodeId sink = add_node(OpKind::Sink, "sink", 0, 0, 1, ControllerState::StateFF);
    for (NodeId v : natural) add_edge(v, sink);
    return sink;
}

std::vector<NodeId> OperatorGraph::topological_order() const {
    std::vector<std::size_t> indegree(nodes_.size(), 0);
    for (const auto& [from, to] : edges_) ++indegree[to];
    std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
    for (NodeId v = 0; v < nodes_.size(); ++v)
        if (indegree[v] == 0) ready.push(v);
    std::vector<NodeId> order;
    order.reserve(nodes_.size());
    while (!ready.empty()) {
        const NodeId v = ready.top();
        ready.pop();
        order.push_back(v);
        for (NodeId s : succ_[v])
            if (--indegree[s] == 0) ready.push(s);
    }
    if (order.size() != nodes_.size()) throw CyclicGraph("operator graph contains a cycle");
    return order;
}

OperatorGraph build_encoder_graph(const EncoderShape& shape, std::size_t k, const GraphOptions& options) {
    if (shape.layers == 0 || shape.hidden == 0 || shape.heads == 0 || k == 0 || options.ffn_multiplier == 0) {
        throw InvalidConfig("encoder graph parameters must be positive");
    }
    if (shape.hidden % shape.heads != 0) {
        throw InvalidConfig("hidden " + std::to_string(shape.hidden) + " not divisible by heads " +
                            std::to_string(shape.heads));
    }
    const auto h = static_cast<std::int64_t>(shape.hidden);
    const auto heads = static_cast<std::int64_t>(shape.heads);
    const auto dh = h / heads;
    const auto f = h * static_cast<std::int64_t>(options.ffn_multiplier);
    const auto kk = static_cast<std::int64_t>(k);
    const std::int64_t ln_fixed = options.fixed_costs ? 2 * h : 0;

    using CS = ControllerState;
    OperatorGraph g;
    const NodeId q = g.add_node(OpKind::MatMul, "q_proj", h * h, 0, h, CS::StateMM);
    const NodeId kp = g.add_node(OpKind::MatMul, "k_proj", h * h, 0, h, CS::StateMM);
    const NodeId v = g.add_node(OpKind::MatMul, "v_proj", h * h, 0, h, CS::StateMM);
    // Quantize the token's q and k rows and insert into each head's top-k merge.
    // The low-bit products run in LUT fabric and are charged per token.
    const NodeId sel = g.add_node(OpKind::AttenSelect, "atten_select", 2 * h + heads * kk, 0, h, CS::StateMM);
    // One K row and one V row fetched per candidate per head.
    const NodeId load = g.add_node(OpKind::AttenLoad, "atten_load", 2 * heads * kk, 0, 1, CS::StateAtten);
    const NodeId score = g.add_node(OpKind::AttenScore, "atten_score", kk * h + heads * kk, 0, dh, CS::StateAtten);
    const NodeId av = g.add_node(OpKind::AttenAV, "atten_av", kk * h + h, 0, dh, CS::StateAtten);
    const NodeId out = g.add_node(OpKind::MatMul, "out_proj", h * h, 0, h, CS::StateFF);
    const NodeId add1 = g.add_node(OpKind::Add, "add_1", h, 0, h, CS::StateFF);
    const NodeId ln1 = g.add_node(OpKind::LayerNorm, "layer_norm_1", 4 * h, ln_fixed, h, CS::StateFF);
    const NodeId ffn1 = g.add_node(OpKind::MatMul, "ffn_1", h * f, 0, h, CS::StateFF);
    const NodeId act = g.add_node(OpKind::Gelu, "gelu", f, 0, f, CS::StateFF);
    const NodeId ffn2 = g.add_node(OpKind::MatMul, "ffn_2", f * h, 0, f, CS::StateFF);
    const NodeId add2 = g.add_node(OpKind::Add, "add_2", h, 0, h, CS::StateFF);
    const NodeId ln2 = g.add_node(OpKind::LayerNorm, "layer_norm_2", 4 * h, ln_fixed, h, CS::StateFF);

    g.add_edge(q, sel);
    g.add_edge(kp, sel);
    g.add_edge(sel, load);
    g.add_edge(kp, load);
    g.add_edge(v, load);
    g.add_edge(q, score);
    g.add_edge(load, score);
    g.add_edge(score, av);
    g.add_edge(load, av);
    g.add_edge(av, out);
    g.add_edge(out, add1);
    g.add_edge(add1, ln1);
    g.add_edge(ln1, ffn1);
    g.add_edge(ffn1, act);
    g.add_edge(act, ffn2);
    g.add_edge(ffn2, add2);
    g.add_edge(ln1, add2);
    g.add_edge(add2, ln2);
    g.ensure_unique_sink();
    return g;
}

std::vector<std::int64_t> compute_priorities(const OperatorGraph& g, std::int64_t s_avg) {
    const auto order = g.topological_order();
    std::vector<std::int64_t> p(g.size(), 0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const NodeId v = *it;
        std::int64_t best = 0;
        for (NodeId s : g.successors(v)) best = std::max(best, p[s]);
        p[v] = operator_weight(g.node(v), s_avg) + best;
    }
    return p;
}

std::int64_t units_per_instance(const OperatorNode& v, const ResourceBudget& budget) noexcept {
    if (v.is_virtual()) return 0;
    return std::min(v.width, budget.tile_width);
}

std::int64_t stage_resource_cost(const OperatorGraph& g, const std::vector<NodeId>& stage,
                                 const std::vector<std::int64_t>& parallelism, const ResourceBudget& budget) {
    std::int64_t total = 0;
    for (NodeId v : stage) {
        total += saturating_mul(parallelism.at(v), units_per_instance(g.node(v), budget));
        total = std::min(total, kSaturated);
    }
    return total;
}

StageAllocation allocate_stages(const OperatorGraph& g, std::int64_t s_avg, const ResourceBudget& budget) {
    if (s_avg < 1) throw InvalidConfig("average length must be >= 1");
    if (budget.compute_units < 1 || budget.tile_width < 1) throw InvalidConfig("budget must be positive");
    const auto priority = compute_priorities(g, s_avg);

    std::vector<NodeId> visit;
    for (NodeId v = 0; v < g.size(); ++v)
        if (!g.node(v).is_virtual()) visit.push_back(v);
    std::stable_sort(visit.begin(), visit.end(), [&](NodeId a, NodeId b) { return priority[a] > priority[b]; });

    for (NodeId v : visit) {
        if (units_per_instance(g.node(v), budget) > budget.compute_units) {
            throw NodeExceedsBudget("operator '" + g.node(v).name + "' needs " +
                                    std::to_string(units_per_instance(g.node(v), budget)) + " units at parallelism 1");
        }
    }

    StageAllocation alloc;
    alloc.parallelism.assign(g.size(), 0);
    if (visit.empty()) return alloc;

    alloc.stages.push_back({visit.front()});
    alloc.parallelism[visit.front()] = 1;
    alloc.visit_log.push_back({visit.front(), 0, true, {}});

    for (std::size_t idx = 1; idx < visit.size(); ++idx) {
        const NodeId vi = visit[idx];
        const std::int64_t wi = operator_weight(g.node(vi), s_avg);
        auto& current = alloc.stages.back();

        auto tentative = alloc.parallelism;
        std::vector<std::pair<NodeId, std::int64_t>> factors;
        for (NodeId vj : current) {
            const std::int64_t factor = ceil_div(operator_weight(g.node(vj), s_avg), wi);
            tentative[vj] = saturating_mul(tentative[vj], factor);
            factors.emplace_back(vj, factor);
        }
        tentative[vi] = 1;
        auto candidate = current;
        candidate.push_back(vi);

        if (stage_resource_cost(g, candidate, tentative, budget) <= budget.compute_units) {
            current.push_back(vi);
            alloc.parallelism = std::move(tentative);
            alloc.visit_log.push_back({vi, alloc.stages.size() - 1, false, std::move(factors)});
        } else {
            alloc.stages.push_back({vi});
            alloc.parallelism[vi] = 1;
            alloc.visit_log.push_back({vi, alloc.stages.size() - 1, true, {}});
        }
    }
    alloc.replication.assign(alloc.stages.size(), 1);
    return alloc;
}

std::int64_t stage_cycles(const OperatorGraph& g, const StageAllocation& alloc, std::size_t stage,
                          std::int64_t length, const ResourceBudget& budget) {
    std::int64_t cycles = 0;
    for (NodeId v : alloc.stages.at(stage)) {
        const auto& node = g.node(v);
        const std::int64_t capacity = alloc.parallelism.at(v) * units_per_instance(node, budget);
        cycles += ceil_div(operator_weight(node, length), capacity);
    }
    return cycles;
}

namespace {

struct ReplicationSearch {
    std::vector<std::int64_t> units;
    std::vector<std::int64_t> cycles;
    std::int64_t budget = 0;
    int r_max = 1;

    std::vector<int> current;
    std::vector<int> best;
    // Bottleneck throughput of `best` as the fraction best_num / best_den.
    std::int64_t best_num = 0;
    std::int64_t best_den = 1;
    int best_total = 0;

    // True when a/b < c/d. Replica counts are small, so the products fit.
    static bool less(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) { return a * d < c * b; }

    void run(std::size_t stage, std::int64_t used, std::int64_t min_tail, std::int64_t part_num,
             std::int64_t part_den) {
        // The bottleneck can only get worse as stages are added.
        if (!best.empty() && part_den != 0 && less(part_num, part_den, best_num, best_den)) return;
        if (stage == units.size()) {
            consider();
            return;
        }
        // Every later stage needs at least one replica.
        const std::int64_t tail_after = min_tail - units[stage];
        for (int r = 1; r <= r_max; ++r) {
            const std::int64_t cost = used + r * units[stage];
            if (cost + tail_after > budget) break;
            current[stage] = r;
            std::int64_t num = part_num;
            std::int64_t den = part_den;
            if (den == 0 || less(r, cycles[stage], num, den)) {
                num = r;
                den = cycles[stage];
            }
            run(stage + 1, cost, tail_after, num, den);
        }
    }

    void consider() {
        std::int64_t num = current[0];
        std::int64_t den = cycles[0];
        for (std::size_t k = 1; k < current.size(); ++k) {
            if (less(current[k], cycles[k], num, den)) {
                num = current[k];
                den = cycles[k];
            }
        }
        const int total = std::accumulate(current.begin(), current.end(), 0);
        // Enumeration is lexicographic ascending, so a later candidate with equal
        // throughput and total has more replicas on an earlier stage.
        const bool better = best.empty() || less(best_num, best_den, num, den) ||
                            (!less(num, den, best_num, best_den) && total >= best_total);
        if (better) {
            best = current;
            best_num = num;
            best_den = den;
            best_total = total;
        }
    }
};

}  // namespace

std::vector<int> enumerate_replication(const OperatorGraph& g, const StageAllocation& alloc, std::int64_t s_avg,
                                       const ResourceBudget& budget, int r_max) {
    const std::size_t K = alloc.stage_count();
    std::vector<int> ones(K, 1);
    if (K == 0) return ones;
    if (r_max < 1) throw InvalidConfig("r_max must be >= 1");

    ReplicationSearch search;
    search.budget = budget.compute_units;
    search.r_max = r_max;
    search.current.assign(K, 1);
    std::int64_t min_total = 0;
    for (std::size_t k = 0; k < K; ++k) {
        search.units.push_back(stage_resource_cost(g, alloc.stages[k], alloc.parallelism, budget));
        search.cycles.push_back(std::max<std::int64_t>(1, stage_cycles(g, alloc, k, s_avg, budget)));
        min_total += search.units.back();
    }
    if (min_total > budget.compute_units) return ones;
    search.run(0, 0, min_total, 0, 0);
    return search.best.empty() ? ones : search.best;
}

void write_graph(std::ostream& os, const OperatorGraph& g) {
    os << "graph nodes=" << g.size() << " edges=" << g.edges().size() << '\n';
    for (const auto& v : g.nodes()) {
        os << "node " << v.id << ' ' << to_string(v.kind) << ' ' << v.name << " a=" << v.per_token
           << " c=" << v.fixed << " width=" << v.width << " state=" << to_string(v.state) << '\n';
    }
    for (const auto& [from, to] : g.edges()) os << "edge " << from << ' ' << to << '\n';
}

void write_allocation(std::ostream& os, const OperatorGraph& g, const StageAllocation& alloc,
                      const ResourceBudget& budget, std::int64_t s_avg) {
    const auto priority = compute_priorities(g, s_avg);
    os << "allocation stages=" << alloc.stage_count() << " s_avg=" << s_avg << " budget=" << budget.compute_units
       << " tile=" << budget.tile_width << '\n';
    for (std::size_t k = 0; k < alloc.stage_count(); ++k) {
        const int r = k < alloc.replication.size() ? alloc.replication[k] : 1;
        os << "stage " << k << " R=" << r << " units=" << stage_resource_cost(g, alloc.stages[k], alloc.parallelism, budget)
           << " cycles@s_avg=" << stage_cycles(g, alloc, k, s_avg, budget) << '\n';
        for (NodeId v : alloc.stages[k]) {
            os << "  member " << v << ' ' << g.node(v).name << " P=" << priority[v]
               << " W=" << operator_weight(g.node(v), s_avg) << " N=" << alloc.parallelism[v] << '\n';
        }
    }
}

}  // namespace lasp
