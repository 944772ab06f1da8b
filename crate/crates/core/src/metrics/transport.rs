//! Exact transportation simplex for balanced problems with integer supplies.
//!
//! Uniform weights 1/M and 1/N are scaled by M*N, which turns every supply
//! into N and every demand into M. Flows then stay integral through every
//! pivot, so feasibility and degeneracy are decided exactly; only the
//! reduced-cost sign test touches floating point.

use std::collections::VecDeque;

/// Optimal flow for the equal-weight transport between two point sets.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    rows: usize,
    cols: usize,
    /// Row-major M x N flow, summing to 1.
    pub flow: Vec<f64>,
    /// Row-major M x N ground distances.
    pub ground: Vec<f64>,
    /// Total transport cost, `sum(flow * ground)`.
    pub cost: f64,
}

impl TransportPlan {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn flow_at(&self, i: usize, j: usize) -> f64 {
        self.flow[i * self.cols + j]
    }

    pub fn ground_at(&self, i: usize, j: usize) -> f64 {
        self.ground[i * self.cols + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.flow
            .chunks(self.cols)
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.flow_at(i, j)).sum())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct PivotLimit {
    pub pivots: usize,
}

/// Solves min sum(f * c) subject to row sums `supply` and column sums
/// `demand` (equal totals) and returns the integer flow, row-major.
///
/// North-west corner start; Bland's rule for both the entering cell (first
/// negative reduced cost in row-major order) and the leaving cell (first
/// tied blocking cell in row-major order).
pub(crate) fn solve(
    cost: &[f64],
    supply: &[i64],
    demand: &[i64],
    max_pivots: usize,
) -> Result<Vec<i64>, PivotLimit> {
    let m = supply.len();
    let n = demand.len();
    debug_assert_eq!(cost.len(), m * n);
    debug_assert_eq!(supply.iter().sum::<i64>(), demand.iter().sum::<i64>());

    let mut flow = vec![0i64; m * n];
    let mut basic = vec![false; m * n];
    let mut basis: Vec<(usize, usize)> = Vec::with_capacity(m + n - 1);

    // north-west corner: a monotone staircase of exactly m + n - 1 cells
    {
        let mut s = supply.to_vec();
        let mut d = demand.to_vec();
        let (mut i, mut j) = (0, 0);
        loop {
            let x = s[i].min(d[j]);
            flow[i * n + j] = x;
            basic[i * n + j] = true;
            basis.push((i, j));
            s[i] -= x;
            d[j] -= x;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if (s[i] == 0 && i < m - 1) || j == n - 1 {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    let scale = cost.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
    let eps = 1e-12 * (1.0 + scale);

    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); m + n];

    for pivot in 0.. {
        for list in adjacency.iter_mut() {
            list.clear();
        }
        for (k, &(i, j)) in basis.iter().enumerate() {
            adjacency[i].push((m + j, k));
            adjacency[m + j].push((i, k));
        }
        potentials(cost, n, m, &adjacency, &basis, &mut u, &mut v);

        let entering =
            (0..m * n).find(|&idx| !basic[idx] && cost[idx] - u[idx / n] - v[idx % n] < -eps);
        let Some(enter_idx) = entering else {
            return Ok(flow);
        };
        if pivot >= max_pivots {
            return Err(PivotLimit { pivots: pivot });
        }
        let (ei, ej) = (enter_idx / n, enter_idx % n);

        // tree path row ei -> column ej; alternate cells lose flow, starting
        // with the first
        let path = tree_path(&adjacency, ei, m + ej, m + n);
        let mut theta = i64::MAX;
        let mut leave: Option<usize> = None;
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                let (i, j) = basis[k];
                let f = flow[i * n + j];
                let idx = i * n + j;
                let better = match leave {
                    None => true,
                    Some(l) => {
                        let (li, lj) = basis[l];
                        f < theta || (f == theta && idx < li * n + lj)
                    }
                };
                if better {
                    theta = f;
                    leave = Some(k);
                }
            }
        }
        let leave = leave.expect("cycle always contains a donor cell");

        flow[enter_idx] += theta;
        for (pos, &k) in path.iter().enumerate() {
            let (i, j) = basis[k];
            if pos % 2 == 0 {
                flow[i * n + j] -= theta;
            } else {
                flow[i * n + j] += theta;
            }
        }
        let (li, lj) = basis[leave];
        basic[li * n + lj] = false;
        basic[enter_idx] = true;
        basis[leave] = (ei, ej);
    }
    unreachable!()
}

fn potentials(
    cost: &[f64],
    n: usize,
    m: usize,
    adjacency: &[Vec<(usize, usize)>],
    basis: &[(usize, usize)],
    u: &mut [f64],
    v: &mut [f64],
) {
    let mut seen = vec![false; m + n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    u[0] = 0.0;
    while let Some(node) = queue.pop_front() {
        for &(other, k) in &adjacency[node] {
            if seen[other] {
                continue;
            }
            let (i, j) = basis[k];
            let c = cost[i * n + j];
            if node < m {
                v[other - m] = c - u[node];
            } else {
                u[other] = c - v[node - m];
            }
            seen[other] = true;
            queue.push_back(other);
        }
    }
}

/// Basis indices along the unique tree path from `from` to `to`.
fn tree_path(
    adjacency: &[Vec<(usize, usize)>],
    from: usize,
    to: usize,
    nodes: usize,
) -> Vec<usize> {
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; nodes];
    let mut seen = vec![false; nodes];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(node) = queue.pop_front() {
        if node == to {
            break;
        }
        for &(other, k) in &adjacency[node] {
            if !seen[other] {
                seen[other] = true;
                parent[other] = Some((node, k));
                queue.push_back(other);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = to;
    while node != from {
        let (prev, k) = parent[node].expect("basis is a spanning tree");
        path.push(k);
        node = prev;
    }
    path.reverse();
    path
}

pub(crate) fn plan_from_flow(
    rows: usize,
    cols: usize,
    flow: &[i64],
    ground: Vec<f64>,
) -> TransportPlan {
    let total = (rows * cols) as f64;
    let flow: Vec<f64> = flow.iter().map(|&f| f as f64 / total).collect();
    let cost = flow.iter().zip(&ground).map(|(f, d)| f * d).sum();
    TransportPlan {
        rows,
        cols,
        flow,
        ground,
        cost,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn total_cost(cost: &[f64], flow: &[i64]) -> f64 {
        cost.iter().zip(flow).map(|(c, &f)| c * f as f64).sum()
    }

    #[test]
    fn textbook_three_by_four() {
        // classic balanced instance with optimum 743
        let cost = [
            19.0, 30.0, 50.0, 10.0, //
            70.0, 30.0, 40.0, 60.0, //
            40.0, 8.0, 70.0, 20.0,
        ];
        let supply = [7, 9, 18];
        let demand = [5, 8, 7, 14];
        let flow = solve(&cost, &supply, &demand, 1000).unwrap();
        assert_eq!(total_cost(&cost, &flow), 743.0);
        for (i, &s) in supply.iter().enumerate() {
            assert_eq!(flow[i * 4..i * 4 + 4].iter().sum::<i64>(), s);
        }
        for (j, &d) in demand.iter().enumerate() {
            assert_eq!((0..3).map(|i| flow[i * 4 + j]).sum::<i64>(), d);
        }
        assert!(flow.iter().all(|&f| f >= 0));
    }

    #[test]
    fn degenerate_identity_assignment() {
        // equal supplies and demands produce a highly degenerate start
        let n = 5;
        let cost: Vec<f64> = (0..n * n)
            .map(|k| if k / n == (n - 1 - k % n) { 0.0 } else { 1.0 })
            .collect();
        let flow = solve(&cost, &[1; 5], &[1; 5], 250).unwrap();
        assert_eq!(total_cost(&cost, &flow), 0.0);
    }

    #[test]
    fn pivot_cap_reports_failure() {
        let cost = [0.0, 1.0, 1.0, 0.0];
        // north-west corner is already optimal here; flip costs to force a pivot
        let flipped = [1.0, 0.0, 0.0, 1.0];
        assert!(solve(&cost, &[1, 1], &[1, 1], 0).is_ok());
        assert_eq!(
            solve(&flipped, &[1, 1], &[1, 1], 0),
            Err(PivotLimit { pivots: 0 })
        );
    }
}
