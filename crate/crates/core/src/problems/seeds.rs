use super::ProblemKind;

/// Prompt-facing description of a problem plus its seed heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    /// Name of the policy function; generated variants are named `<func_name>_v2`.
    pub func_name: &'static str,
    pub signature: &'static str,
    pub description: &'static str,
    pub seed_code: &'static str,
}

const TSP_DESC: &str = "\
Traveling salesman problem on points in the unit square with Euclidean distances. \
A tour is built one node at a time, starting and ending at node 0. \
select_next_node(current_node, destination_node, unvisited_nodes, distance_matrix) receives the \
current node index, the node the tour must return to, the list of unvisited node indices and the \
full distance matrix as a list of lists, and returns the unvisited node to visit next. \
The goal is the shortest closed tour.";

const TSP_SEED: &str = "\
def select_next_node(current_node, destination_node, unvisited_nodes, distance_matrix):
    best_node = None
    best_dist = float('inf')
    for node in unvisited_nodes:
        d = distance_matrix[current_node][node]
        if d < best_dist:
            best_dist = d
            best_node = node
    return best_node
";

const KP_DESC: &str = "\
0-1 knapsack problem. Items are packed one at a time. \
select_next_item(remaining_capacity, values, weights) receives the remaining capacity and the \
values and weights (lists of floats) of the items not packed yet, some of which may no longer fit, \
and returns the index of the next item to pack within those lists, or None to stop. \
Returning an item heavier than the remaining capacity is invalid. \
The goal is the largest total packed value.";

const KP_SEED: &str = "\
def select_next_item(remaining_capacity, values, weights):
    best_item = None
    best_ratio = -1.0
    for i in range(len(values)):
        if weights[i] <= remaining_capacity:
            ratio = values[i] / weights[i]
            if ratio > best_ratio:
                best_ratio = ratio
                best_item = i
    return best_item
";

const BPP_DESC: &str = "\
Online bin packing. Items arrive one at a time and must be placed immediately into a bin of \
fixed capacity. priority(item, bins_remain_cap) receives the item size and the list of remaining \
capacities of the open bins, and returns one priority score per bin. The item goes to the first bin \
with the highest score; a score of float('-inf') marks a bin as unusable and a new bin is opened when \
no bin is usable. Choosing a bin that is too small is invalid. \
The goal is to use as few bins as possible.";

const BPP_SEED: &str = "\
def priority(item, bins_remain_cap):
    return [-(cap - item) if cap >= item else float('-inf') for cap in bins_remain_cap]
";

pub fn problem_spec(kind: ProblemKind) -> ProblemSpec {
    match kind {
        ProblemKind::Tsp => ProblemSpec {
            kind,
            func_name: "select_next_node",
            signature: "select_next_node(current_node, destination_node, unvisited_nodes, distance_matrix)",
            description: TSP_DESC,
            seed_code: TSP_SEED,
        },
        ProblemKind::Kp => ProblemSpec {
            kind,
            func_name: "select_next_item",
            signature: "select_next_item(remaining_capacity, values, weights)",
            description: KP_DESC,
            seed_code: KP_SEED,
        },
        ProblemKind::BppOnline => ProblemSpec {
            kind,
            func_name: "priority",
            signature: "priority(item, bins_remain_cap)",
            description: BPP_DESC,
            seed_code: BPP_SEED,
        },
    }
}
