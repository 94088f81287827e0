//! Primal network simplex for uncapacitated min-cost flow.
//!
//! The spanning tree starts from an artificial root joined to every node and
//! is kept strongly feasible, which rules out cycling on degenerate pivots.
//! Entering arcs are chosen by block search pricing.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// A balanced transshipment problem: node supplies (positive for sources,
/// negative for sinks, summing to zero) and directed arcs with costs.
#[derive(Clone, Debug, Default)]
pub struct FlowNetwork {
    supply: Vec<f64>,
    source: Vec<usize>,
    target: Vec<usize>,
    cost: Vec<f64>,
}

/// Optimal flow on the arcs of a [`FlowNetwork`] in insertion order.
#[derive(Clone, Debug)]
pub struct FlowSolution {
    pub flow: Vec<f64>,
    pub cost: f64,
    /// Node potentials `π` with `c(u,v) + π_u − π_v ≥ 0` on every arc.
    pub potential: Vec<f64>,
    pub pivots: usize,
}

impl FlowNetwork {
    pub fn new(supply: Vec<f64>) -> Self {
        Self { supply, ..Default::default() }
    }

    pub fn with_arc_capacity(supply: Vec<f64>, arcs: usize) -> Self {
        Self {
            supply,
            source: Vec::with_capacity(arcs),
            target: Vec::with_capacity(arcs),
            cost: Vec::with_capacity(arcs),
        }
    }

    pub fn add_arc(&mut self, from: usize, to: usize, cost: f64) -> usize {
        debug_assert!(from < self.supply.len() && to < self.supply.len());
        self.source.push(from);
        self.target.push(to);
        self.cost.push(cost);
        self.source.len() - 1
    }

    pub fn node_count(&self) -> usize {
        self.supply.len()
    }

    pub fn arc_count(&self) -> usize {
        self.source.len()
    }

    pub fn solve(&self) -> Result<FlowSolution> {
        if self.supply.iter().chain(&self.cost).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("flow network"));
        }
        let mut s = Simplex::new(self);
        s.run()?;
        s.finish()
    }
}

struct Simplex {
    nodes: usize,
    arcs: usize,
    source: Vec<usize>,
    target: Vec<usize>,
    cost: Vec<f64>,
    flow: Vec<f64>,
    in_tree: Vec<bool>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    /// `pred` arc points from the node towards its parent.
    up: Vec<bool>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    children: Vec<Vec<usize>>,
    child_pos: Vec<usize>,
    tol: f64,
    feasibility_tol: f64,
    block: usize,
    next_arc: usize,
    pivots: usize,
    max_pivots: usize,
}

impl Simplex {
    fn new(net: &FlowNetwork) -> Self {
        let nodes = net.supply.len();
        let arcs = net.source.len();
        let root = nodes;
        let max_cost = net.cost.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let art_cost = (max_cost + 1.0) * (nodes as f64 + 1.0);
        let total_arcs = arcs + nodes;
        let mut source = Vec::with_capacity(total_arcs);
        let mut target = Vec::with_capacity(total_arcs);
        let mut cost = Vec::with_capacity(total_arcs);
        source.extend_from_slice(&net.source);
        target.extend_from_slice(&net.target);
        cost.extend_from_slice(&net.cost);
        let mut flow = vec![0.0; total_arcs];
        let mut in_tree = vec![false; total_arcs];
        let mut parent = vec![NONE; nodes + 1];
        let mut pred = vec![NONE; nodes + 1];
        let mut up = vec![false; nodes + 1];
        let mut depth = vec![0; nodes + 1];
        let mut pi = vec![0.0; nodes + 1];
        let mut children = vec![Vec::new(); nodes + 1];
        let mut child_pos = vec![0; nodes + 1];
        children[root].reserve(nodes);
        for u in 0..nodes {
            let e = arcs + u;
            let b = net.supply[u];
            parent[u] = root;
            pred[u] = e;
            depth[u] = 1;
            in_tree[e] = true;
            child_pos[u] = u;
            children[root].push(u);
            if b >= 0.0 {
                // Zero-cost arc towards the root carrying the supply.
                up[u] = true;
                source.push(u);
                target.push(root);
                cost.push(0.0);
                flow[e] = b;
                pi[u] = 0.0;
            } else {
                up[u] = false;
                source.push(root);
                target.push(u);
                cost.push(art_cost);
                flow[e] = -b;
                pi[u] = art_cost;
            }
        }
        let scale = net.supply.iter().map(|b| b.abs()).sum::<f64>().max(1e-300);
        let block = (crate::math::sqrt(arcs as f64) as usize).max(10);
        Self {
            nodes,
            arcs,
            source,
            target,
            cost,
            flow,
            in_tree,
            parent,
            pred,
            up,
            depth,
            pi,
            children,
            child_pos,
            tol: (art_cost * 1e-13).max(1e-14),
            feasibility_tol: 1e-9 * scale,
            block,
            next_arc: 0,
            pivots: 0,
            max_pivots: 200 * (arcs + nodes) + 1000,
        }
    }

    #[inline]
    fn reduced_cost(&self, e: usize) -> f64 {
        self.cost[e] + self.pi[self.source[e]] - self.pi[self.target[e]]
    }

    fn find_entering(&mut self) -> Option<usize> {
        if self.arcs == 0 {
            return None;
        }
        let mut best = NONE;
        let mut min = -self.tol;
        let mut count = self.block;
        let mut e = self.next_arc;
        for _ in 0..self.arcs {
            if !self.in_tree[e] {
                let rc = self.reduced_cost(e);
                if rc < min {
                    min = rc;
                    best = e;
                }
            }
            e += 1;
            if e == self.arcs {
                e = 0;
            }
            count -= 1;
            if count == 0 {
                if best != NONE {
                    self.next_arc = e;
                    return Some(best);
                }
                count = self.block;
            }
        }
        (best != NONE).then(|| {
            self.next_arc = e;
            best
        })
    }

    fn find_join(&self, mut u: usize, mut v: usize) -> usize {
        while u != v {
            if self.depth[u] > self.depth[v] {
                u = self.parent[u];
            } else if self.depth[v] > self.depth[u] {
                v = self.parent[v];
            } else {
                u = self.parent[u];
                v = self.parent[v];
            }
        }
        u
    }

    fn detach(&mut self, node: usize) {
        let p = self.parent[node];
        let pos = self.child_pos[node];
        self.children[p].swap_remove(pos);
        if let Some(&moved) = self.children[p].get(pos) {
            self.child_pos[moved] = pos;
        }
        self.parent[node] = NONE;
    }

    fn attach(&mut self, node: usize, p: usize) {
        self.child_pos[node] = self.children[p].len();
        self.children[p].push(node);
        self.parent[node] = p;
    }

    fn run(&mut self) -> Result<()> {
        let mut path = Vec::new();
        let mut stack = Vec::new();
        while let Some(e) = self.find_entering() {
            self.pivots += 1;
            if self.pivots > self.max_pivots {
                return Err(Error::IterationLimit(self.max_pivots));
            }
            // Flow is pushed along s → t, up from t to the join, and down from the join to s.
            let first = self.source[e];
            let second = self.target[e];
            let join = self.find_join(first, second);

            let mut delta = f64::INFINITY;
            let mut u_out = NONE;
            let mut on_first = true;
            let mut u = first;
            while u != join {
                if self.up[u] && self.flow[self.pred[u]] < delta {
                    delta = self.flow[self.pred[u]];
                    u_out = u;
                }
                u = self.parent[u];
            }
            let mut u = second;
            while u != join {
                if !self.up[u] && self.flow[self.pred[u]] <= delta {
                    delta = self.flow[self.pred[u]];
                    u_out = u;
                    on_first = false;
                }
                u = self.parent[u];
            }
            if u_out == NONE {
                return Err(Error::Unbounded);
            }

            if delta > 0.0 {
                self.flow[e] += delta;
                let mut u = first;
                while u != join {
                    let a = self.pred[u];
                    self.flow[a] += if self.up[u] { -delta } else { delta };
                    u = self.parent[u];
                }
                let mut u = second;
                while u != join {
                    let a = self.pred[u];
                    self.flow[a] += if self.up[u] { delta } else { -delta };
                    u = self.parent[u];
                }
            }
            let leaving = self.pred[u_out];
            self.flow[leaving] = 0.0;
            self.in_tree[leaving] = false;
            self.in_tree[e] = true;

            let (in_node, new_parent) = if on_first { (first, second) } else { (second, first) };

            // Reverse the tree path from `in_node` up to `u_out`, then hang it below `new_parent`.
            path.clear();
            let mut u = in_node;
            loop {
                path.push(u);
                if u == u_out {
                    break;
                }
                u = self.parent[u];
            }
            self.detach(u_out);
            for i in (1..path.len()).rev() {
                let y = path[i];
                let x = path[i - 1];
                self.detach(x);
                self.pred[y] = self.pred[x];
                self.up[y] = !self.up[x];
                self.attach(y, x);
            }
            self.pred[in_node] = e;
            self.up[in_node] = self.source[e] == in_node;
            self.attach(in_node, new_parent);

            stack.clear();
            stack.push(in_node);
            while let Some(w) = stack.pop() {
                let p = self.parent[w];
                let a = self.pred[w];
                self.depth[w] = self.depth[p] + 1;
                self.pi[w] = if self.up[w] { self.pi[p] - self.cost[a] } else { self.pi[p] + self.cost[a] };
                stack.extend_from_slice(&self.children[w]);
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<FlowSolution> {
        let artificial: f64 = self.flow[self.arcs..].iter().sum();
        if artificial > self.feasibility_tol {
            return Err(Error::Infeasible);
        }
        let mut flow = self.flow;
        flow.truncate(self.arcs);
        let cost = flow.iter().zip(&self.cost).map(|(f, c)| f * c).sum();
        let mut potential = self.pi;
        potential.truncate(self.nodes);
        Ok(FlowSolution { flow, cost, potential, pivots: self.pivots })
    }
}
