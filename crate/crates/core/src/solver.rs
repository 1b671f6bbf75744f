//! Exact optimal assignment via minimum-cost flow.
//!
//! The constraint polytope of the relaxed assignment LP has integer
//! vertices, so a combinatorial flow algorithm over integer costs returns
//! a binary optimum with no tolerances. Maximizing total payoff becomes a
//! min-cost flow with negated arc costs; augmentation stops as soon as the
//! cheapest residual path would lower the objective, which handles
//! negative payoffs and partial matching in one rule.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::model::{Assignment, AssignmentError, UtilityMatrix};
use crate::money::Money;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolveError {
    #[error("capacity vector has {got} entries for a {expected}-provider matrix")]
    CapacityLength { expected: usize, got: usize },
    #[error("provider {provider} has zero capacity")]
    ZeroCapacity { provider: usize },
    #[error("instance too large for exhaustive enumeration: bound {bound} exceeds {limit}")]
    TooLarge { bound: u128, limit: u128 },
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
}

const INF: i128 = i128::MAX / 4;

#[derive(Debug, Clone, Copy)]
struct FlowArc {
    to: usize,
    rev: usize,
    cap: u32,
    cost: i128,
    /// Traveler-provider pair this arc realizes, if any.
    pair: Option<(usize, usize)>,
}

/// Bipartite flow network: source, one node per traveler, one node per
/// provider, sink. Arcs are inserted in traveler-major order so shortest
/// path ties resolve deterministically.
pub struct FlowNetwork {
    graph: Vec<Vec<FlowArc>>,
    source: usize,
    sink: usize,
    num_travelers: usize,
    num_providers: usize,
}

impl FlowNetwork {
    pub fn build(matrix: &UtilityMatrix, capacities: &[u32]) -> Result<FlowNetwork, SolveError> {
        if capacities.len() != matrix.cols() {
            return Err(SolveError::CapacityLength {
                expected: matrix.cols(),
                got: capacities.len(),
            });
        }
        if let Some(j) = capacities.iter().position(|&c| c == 0) {
            return Err(SolveError::ZeroCapacity { provider: j });
        }
        let rows = matrix.rows();
        let cols = matrix.cols();
        let source = 0;
        let sink = rows + cols + 1;
        let mut net = FlowNetwork {
            graph: vec![Vec::new(); rows + cols + 2],
            source,
            sink,
            num_travelers: rows,
            num_providers: cols,
        };
        for i in 0..rows {
            net.add_arc(source, 1 + i, 1, 0, None);
        }
        for i in 0..rows {
            for j in 0..cols {
                let a = matrix.get(i, j);
                // Non-positive payoffs never beat leaving the traveler
                // unmatched; pruning them keeps the optimum unchanged.
                if a > Money::ZERO {
                    net.add_arc(1 + i, 1 + rows + j, 1, -i128::from(a.micros()), Some((i, j)));
                }
            }
        }
        for (j, &cap) in capacities.iter().enumerate() {
            net.add_arc(1 + rows + j, sink, cap, 0, None);
        }
        Ok(net)
    }

    fn add_arc(&mut self, from: usize, to: usize, cap: u32, cost: i128, pair: Option<(usize, usize)>) {
        let rev_from = self.graph[to].len();
        let rev_to = self.graph[from].len();
        self.graph[from].push(FlowArc { to, rev: rev_from, cap, cost, pair });
        self.graph[to].push(FlowArc { to: from, rev: rev_to, cap: 0, cost: -cost, pair: None });
    }

    /// Successive shortest augmenting paths with node potentials. The
    /// first pass runs Bellman-Ford over the initial negative arc costs;
    /// later passes run Dijkstra on reduced costs.
    fn run(&mut self) -> Vec<Option<usize>> {
        let n = self.graph.len();
        let mut potential = self.initial_potentials();
        loop {
            let Some((dist, parent)) = self.dijkstra(&potential) else {
                break;
            };
            if dist[self.sink] >= INF {
                break;
            }
            // True cost of the cheapest augmenting path; stop once it can
            // no longer improve the objective.
            let true_cost = dist[self.sink] + potential[self.sink] - potential[self.source];
            if true_cost >= 0 {
                break;
            }
            for v in 0..n {
                if dist[v] < INF {
                    potential[v] += dist[v];
                }
            }
            self.augment(&parent);
        }
        self.extract_matches()
    }

    fn initial_potentials(&self) -> Vec<i128> {
        // Bellman-Ford over arcs with remaining capacity; graph is a DAG
        // (source -> travelers -> providers -> sink) so node count passes
        // are more than enough.
        let n = self.graph.len();
        let mut dist = vec![INF; n];
        dist[self.source] = 0;
        for _ in 0..n {
            let mut changed = false;
            for u in 0..n {
                if dist[u] >= INF {
                    continue;
                }
                for arc in &self.graph[u] {
                    if arc.cap > 0 && dist[u] + arc.cost < dist[arc.to] {
                        dist[arc.to] = dist[u] + arc.cost;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        dist.iter().map(|&d| if d >= INF { 0 } else { d }).collect()
    }

    fn dijkstra(&self, potential: &[i128]) -> Option<(Vec<i128>, Vec<Option<(usize, usize)>>)> {
        let n = self.graph.len();
        let mut dist = vec![INF; n];
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut heap = BinaryHeap::new();
        dist[self.source] = 0;
        heap.push(Reverse((0i128, self.source)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for (idx, arc) in self.graph[u].iter().enumerate() {
                if arc.cap == 0 {
                    continue;
                }
                let reduced = arc.cost + potential[u] - potential[arc.to];
                debug_assert!(reduced >= 0, "negative reduced cost after potential update");
                let nd = d + reduced;
                if nd < dist[arc.to] {
                    dist[arc.to] = nd;
                    parent[arc.to] = Some((u, idx));
                    heap.push(Reverse((nd, arc.to)));
                }
            }
        }
        if dist[self.sink] >= INF {
            return None;
        }
        Some((dist, parent))
    }

    fn augment(&mut self, parent: &[Option<(usize, usize)>]) {
        // Source arcs carry capacity 1, so each augmentation routes one
        // traveler.
        let mut v = self.sink;
        while v != self.source {
            let (u, idx) = parent[v].expect("path broken during augmentation");
            let rev = self.graph[u][idx].rev;
            self.graph[u][idx].cap -= 1;
            self.graph[v][rev].cap += 1;
            v = u;
        }
    }

    fn extract_matches(&self) -> Vec<Option<usize>> {
        let mut matches = vec![None; self.num_travelers];
        for i in 0..self.num_travelers {
            for arc in &self.graph[1 + i] {
                if let Some((traveler, provider)) = arc.pair {
                    debug_assert_eq!(traveler, i);
                    debug_assert!(provider < self.num_providers);
                    if arc.cap == 0 {
                        matches[i] = Some(provider);
                    }
                }
            }
        }
        matches
    }
}

/// Maximizes the total matching payoff subject to unit demand and
/// provider capacities. The returned assignment is binary and exact.
pub fn solve_optimal_assignment(
    matrix: &UtilityMatrix,
    capacities: &[u32],
) -> Result<Assignment, SolveError> {
    let mut net = FlowNetwork::build(matrix, capacities)?;
    let matches = net.run();
    Ok(Assignment::new(matches, matrix, capacities)?)
}

const ENUMERATION_LIMIT: u128 = 100_000_000;

/// Exhaustive oracle for small instances. Ties between maximizers break
/// toward the lexicographically smallest match vector, with "unmatched"
/// ordered after every provider index.
pub fn brute_force_assignment(
    matrix: &UtilityMatrix,
    capacities: &[u32],
) -> Result<Assignment, SolveError> {
    if capacities.len() != matrix.cols() {
        return Err(SolveError::CapacityLength {
            expected: matrix.cols(),
            got: capacities.len(),
        });
    }
    if let Some(j) = capacities.iter().position(|&c| c == 0) {
        return Err(SolveError::ZeroCapacity { provider: j });
    }
    let bound = (matrix.cols() as u128 + 1)
        .checked_pow(matrix.rows() as u32)
        .unwrap_or(u128::MAX);
    if bound > ENUMERATION_LIMIT {
        return Err(SolveError::TooLarge { bound, limit: ENUMERATION_LIMIT });
    }

    struct Search<'a> {
        matrix: &'a UtilityMatrix,
        remaining: Vec<u32>,
        current: Vec<Option<usize>>,
        best: Option<(i64, Vec<Option<usize>>)>,
    }

    fn rank(m: &Option<usize>, cols: usize) -> usize {
        m.unwrap_or(cols)
    }

    impl Search<'_> {
        fn recurse(&mut self, i: usize, value: i64) {
            if i == self.matrix.rows() {
                let better = match &self.best {
                    None => true,
                    Some((best_value, best_matches)) => {
                        value > *best_value
                            || (value == *best_value
                                && self
                                    .current
                                    .iter()
                                    .map(|m| rank(m, self.matrix.cols()))
                                    .lt(best_matches.iter().map(|m| rank(m, self.matrix.cols()))))
                    }
                };
                if better {
                    self.best = Some((value, self.current.clone()));
                }
                return;
            }
            for j in 0..self.matrix.cols() {
                if self.remaining[j] > 0 {
                    self.remaining[j] -= 1;
                    self.current.push(Some(j));
                    self.recurse(i + 1, value + self.matrix.get(i, j).micros());
                    self.current.pop();
                    self.remaining[j] += 1;
                }
            }
            self.current.push(None);
            self.recurse(i + 1, value);
            self.current.pop();
        }
    }

    let mut search = Search {
        matrix,
        remaining: capacities.to_vec(),
        current: Vec::with_capacity(matrix.rows()),
        best: None,
    };
    search.recurse(0, 0);
    let (_, matches) = search.best.expect("at least the empty assignment is feasible");
    Ok(Assignment::new(matches, matrix, capacities)?)
}

/// Recomputes the exact total payoff of a candidate match vector,
/// rejecting infeasible ones.
pub fn assignment_value(
    matrix: &UtilityMatrix,
    matches: &[Option<usize>],
    capacities: &[u32],
) -> Result<Money, SolveError> {
    let assignment = Assignment::new(matches.to_vec(), matrix, capacities)?;
    Ok(assignment.objective())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn money(s: &str) -> Money {
        s.parse().unwrap()
    }

    fn matrix(rows: &[&[&str]]) -> UtilityMatrix {
        UtilityMatrix::from_rows(
            rows.iter().map(|r| r.iter().map(|s| money(s)).collect()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_positive_pair_is_matched() {
        let a = matrix(&[&["5"]]);
        let asg = solve_optimal_assignment(&a, &[1]).unwrap();
        assert_eq!(asg.matches(), &[Some(0)]);
        assert_eq!(asg.objective(), money("5"));
    }

    #[test]
    fn two_by_two_matches_oracle() {
        // All 7 feasible assignments peak at {0->0, 1->1} with value 5.
        let a = matrix(&[&["3", "1"], &["2", "2"]]);
        let asg = solve_optimal_assignment(&a, &[1, 1]).unwrap();
        assert_eq!(asg.matches(), &[Some(0), Some(1)]);
        assert_eq!(asg.objective(), money("5"));

        let oracle = brute_force_assignment(&a, &[1, 1]).unwrap();
        assert_eq!(oracle.objective(), money("5"));
        assert_eq!(oracle.matches(), asg.matches());
    }

    #[test]
    fn all_negative_payoffs_leave_everyone_unmatched() {
        let a = matrix(&[&["-1", "-1"], &["-1", "-1"]]);
        let asg = solve_optimal_assignment(&a, &[1, 1]).unwrap();
        assert_eq!(asg.matches(), &[None, None]);
        assert_eq!(asg.objective(), Money::ZERO);
    }

    #[test]
    fn capacity_one_provider_keeps_best_traveler() {
        let a = matrix(&[&["5"], &["3"]]);
        let asg = solve_optimal_assignment(&a, &[1]).unwrap();
        assert_eq!(asg.matches(), &[Some(0), None]);
        assert_eq!(asg.objective(), money("5"));

        let oracle = brute_force_assignment(&a, &[1]).unwrap();
        assert_eq!(oracle.matches(), &[Some(0), None]);
    }

    #[test]
    fn brute_force_guards_instance_size() {
        let rows: Vec<Vec<Money>> = (0..40).map(|_| vec![money("1"); 4]).collect();
        let a = UtilityMatrix::from_rows(rows).unwrap();
        let err = brute_force_assignment(&a, &[4, 4, 4, 4]).unwrap_err();
        assert!(matches!(err, SolveError::TooLarge { .. }));
    }

    #[test]
    fn assignment_value_rejects_infeasible() {
        let a = matrix(&[&["5"], &["3"]]);
        assert_eq!(assignment_value(&a, &[None, None], &[1]).unwrap(), Money::ZERO);
        assert_eq!(assignment_value(&a, &[Some(0), None], &[1]).unwrap(), money("5"));
        assert!(assignment_value(&a, &[Some(0), Some(0)], &[1]).is_err());
    }

    #[test]
    fn mixed_sign_entries_partial_match() {
        let a = matrix(&[&["2", "-3"], &["-1", "-2"], &["4", "1"]]);
        let asg = solve_optimal_assignment(&a, &[1, 2]).unwrap();
        let oracle = brute_force_assignment(&a, &[1, 2]).unwrap();
        assert_eq!(asg.objective(), oracle.objective());
        assert_eq!(asg.objective(), money("4"));
        assert_eq!(oracle.matches(), &[None, None, Some(0)]);
    }
}
