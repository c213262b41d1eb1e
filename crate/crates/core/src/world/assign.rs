//! Platform dispatch: maximum-cardinality, minimum-cost matching of idle
//! agents to open orders within scope, solved per connected component with
//! the Hungarian method.

use crate::model::{AgentId, Cell, OrderId};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Assignment {
    pub agent: AgentId,
    pub order: OrderId,
    pub cost: f64,
}

/// Minimum-cost assignment of every row to a distinct column (`n <= m`).
/// Returns the column chosen for each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "hungarian needs rows <= columns");
    // 1-based potentials; p[j] is the row matched to column j
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = x;
        while self.0[c] != r {
            let next = self.0[c];
            self.0[c] = r;
            c = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Matches agents to orders over edges with `euclid <= scope`, cost being the
/// congestion-free path length from the agent to the order start. Output is
/// sorted by agent id.
pub fn assign_orders(orders: &[(OrderId, Cell)], agents: &[(AgentId, Cell)], scope: f64) -> Vec<Assignment> {
    let na = agents.len();
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for (ai, &(_, ac)) in agents.iter().enumerate() {
        for (oi, &(_, oc)) in orders.iter().enumerate() {
            if ac.euclid(oc) <= scope {
                edges.push((ai, oi, ac.octile(oc)));
            }
        }
    }
    if edges.is_empty() {
        return Vec::new();
    }
    // agents are nodes 0..na, orders na..
    let mut dsu = Dsu((0..na + orders.len()).collect());
    for &(a, o, _) in &edges {
        dsu.union(a, na + o);
    }
    let mut comps: std::collections::BTreeMap<usize, Vec<(usize, usize, f64)>> = Default::default();
    for e in edges {
        let root = dsu.find(e.0);
        comps.entry(root).or_default().push(e);
    }
    let mut out = Vec::new();
    for (_, comp) in comps {
        let mut ag: Vec<usize> = comp.iter().map(|e| e.0).collect();
        let mut od: Vec<usize> = comp.iter().map(|e| e.1).collect();
        ag.sort_unstable();
        ag.dedup();
        od.sort_unstable();
        od.dedup();
        let agents_are_rows = ag.len() <= od.len();
        let (rows, cols) = if agents_are_rows { (&ag, &od) } else { (&od, &ag) };
        let (n, m) = (rows.len(), cols.len());
        // Each eligible edge earns a bonus larger than any total cost, so
        // cardinality dominates; dummy columns let a row stay unmatched.
        let total: f64 = comp.iter().map(|e| e.2).sum();
        let bonus = total + 1.0;
        let forbidden = bonus * 4.0 * (n as f64 + 1.0);
        let mut cost = vec![vec![forbidden; m + n]; n];
        for row in cost.iter_mut() {
            for c in row.iter_mut().skip(m) {
                *c = 0.0;
            }
        }
        for &(a, o, c) in &comp {
            let (r, k) = if agents_are_rows { (a, o) } else { (o, a) };
            let ri = rows.binary_search(&r).unwrap();
            let ci = cols.binary_search(&k).unwrap();
            cost[ri][ci] = c - bonus;
        }
        let pick = hungarian(&cost);
        for (ri, &ci) in pick.iter().enumerate() {
            if ci >= m || cost[ri][ci] >= forbidden {
                continue;
            }
            let (a, o) = if agents_are_rows { (rows[ri], cols[ci]) } else { (cols[ci], rows[ri]) };
            out.push(Assignment { agent: agents[a].0, order: orders[o].0, cost: agents[a].1.octile(orders[o].1) });
        }
    }
    out.sort_by_key(|x| x.agent);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hungarian_square() {
        let c = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert_eq!(hungarian(&c), vec![0, 1]);
        let c = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let pick = hungarian(&c);
        let total: f64 = pick.iter().enumerate().map(|(i, &j)| c[i][j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn one_pair() {
        let a = assign_orders(&[(7, Cell::new(30, 0))], &[(2, Cell::new(0, 0))], 100.0);
        assert_eq!(a, vec![Assignment { agent: 2, order: 7, cost: 30.0 }]);
    }

    #[test]
    fn out_of_scope_is_unassigned() {
        assert!(assign_orders(&[(7, Cell::new(101, 0))], &[(2, Cell::new(0, 0))], 100.0).is_empty());
        assert_eq!(assign_orders(&[(7, Cell::new(100, 0))], &[(2, Cell::new(0, 0))], 100.0).len(), 1);
    }

    #[test]
    fn prefers_more_matches_over_cheaper_ones() {
        // agent 0 is close to both orders; agent 1 only reaches order 0
        let agents = [(0, Cell::new(50, 0)), (1, Cell::new(0, 0))];
        let orders = [(0, Cell::new(45, 0)), (1, Cell::new(140, 0))];
        let a = assign_orders(&orders, &agents, 100.0);
        assert_eq!(a.len(), 2);
        assert_eq!((a[0].order, a[1].order), (1, 0));
    }
}
