//! Network-flow primitives: Dinic max-flow for integral capacities and
//! successive-shortest-path min-cost flow with real edge costs.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    rev: usize,
    cap: i64,
    cost: f64,
}

/// Max-flow network (Dinic's algorithm).
#[derive(Debug, Clone)]
pub(crate) struct FlowNetwork {
    adj: Vec<Vec<Edge>>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork {
            adj: vec![Vec::new(); nodes],
            level: vec![0; nodes],
            iter: vec![0; nodes],
        }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: i64) {
        let rev_from = self.adj[to].len();
        let rev_to = self.adj[from].len() + usize::from(from == to);
        self.adj[from].push(Edge {
            to,
            rev: rev_from,
            cap,
            cost: 0.0,
        });
        self.adj[to].push(Edge {
            to: from,
            rev: rev_to,
            cap: 0,
            cost: 0.0,
        });
    }

    fn bfs(&mut self, s: usize) {
        self.level.iter_mut().for_each(|l| *l = -1);
        let mut queue = VecDeque::new();
        self.level[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            for e in &self.adj[v] {
                if e.cap > 0 && self.level[e.to] < 0 {
                    self.level[e.to] = self.level[v] + 1;
                    queue.push_back(e.to);
                }
            }
        }
    }

    fn dfs(&mut self, v: usize, t: usize, f: i64) -> i64 {
        if v == t {
            return f;
        }
        while self.iter[v] < self.adj[v].len() {
            let i = self.iter[v];
            let (to, cap, rev) = {
                let e = &self.adj[v][i];
                (e.to, e.cap, e.rev)
            };
            if cap > 0 && self.level[v] < self.level[to] {
                let d = self.dfs(to, t, f.min(cap));
                if d > 0 {
                    self.adj[v][i].cap -= d;
                    self.adj[to][rev].cap += d;
                    return d;
                }
            }
            self.iter[v] += 1;
        }
        0
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        let mut flow = 0;
        loop {
            self.bfs(s);
            if self.level[t] < 0 {
                return flow;
            }
            self.iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let f = self.dfs(s, t, i64::MAX);
                if f == 0 {
                    break;
                }
                flow += f;
            }
        }
    }
}

/// Min-cost flow network (successive shortest paths with Bellman-Ford
/// relaxation, so negative residual costs are handled without potentials).
#[derive(Debug, Clone)]
pub(crate) struct CostFlowNetwork {
    adj: Vec<Vec<Edge>>,
    /// (node, index in adjacency) of every forward edge, in insertion order.
    forward: Vec<(usize, usize)>,
    original_cap: Vec<i64>,
}

impl CostFlowNetwork {
    pub fn new(nodes: usize) -> Self {
        CostFlowNetwork {
            adj: vec![Vec::new(); nodes],
            forward: Vec::new(),
            original_cap: Vec::new(),
        }
    }

    /// Returns the edge id used by [`CostFlowNetwork::flow_on`].
    pub fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: f64) -> usize {
        let rev_from = self.adj[to].len();
        let rev_to = self.adj[from].len() + usize::from(from == to);
        self.forward.push((from, self.adj[from].len()));
        self.original_cap.push(cap);
        self.adj[from].push(Edge {
            to,
            rev: rev_from,
            cap,
            cost,
        });
        self.adj[to].push(Edge {
            to: from,
            rev: rev_to,
            cap: 0,
            cost: -cost,
        });
        self.forward.len() - 1
    }

    pub fn flow_on(&self, edge: usize) -> i64 {
        let (v, i) = self.forward[edge];
        self.original_cap[edge] - self.adj[v][i].cap
    }

    /// Pushes exactly `required` units from `s` to `t` at minimum cost.
    /// Returns `None` when the network cannot carry that much flow.
    pub fn min_cost_flow(&mut self, s: usize, t: usize, required: i64) -> Option<f64> {
        let n = self.adj.len();
        let mut total_cost = 0.0;
        let mut pushed = 0;
        while pushed < required {
            let mut dist = vec![f64::INFINITY; n];
            let mut prev: Vec<Option<(usize, usize)>> = vec![None; n];
            let mut in_queue = vec![false; n];
            let mut queue = VecDeque::new();
            dist[s] = 0.0;
            queue.push_back(s);
            in_queue[s] = true;
            while let Some(v) = queue.pop_front() {
                in_queue[v] = false;
                for (i, e) in self.adj[v].iter().enumerate() {
                    if e.cap > 0 {
                        let nd = dist[v] + e.cost;
                        if nd < dist[e.to] - 1e-12 * (1.0 + nd.abs()) {
                            dist[e.to] = nd;
                            prev[e.to] = Some((v, i));
                            if !in_queue[e.to] {
                                in_queue[e.to] = true;
                                queue.push_back(e.to);
                            }
                        }
                    }
                }
            }
            if !dist[t].is_finite() {
                return None;
            }
            let mut f = required - pushed;
            let mut v = t;
            while let Some((u, i)) = prev[v] {
                f = f.min(self.adj[u][i].cap);
                v = u;
            }
            let mut v = t;
            while let Some((u, i)) = prev[v] {
                let rev = self.adj[u][i].rev;
                self.adj[u][i].cap -= f;
                self.adj[v][rev].cap += f;
                v = u;
            }
            pushed += f;
            total_cost += f as f64 * dist[t];
        }
        Some(total_cost)
    }
}

/// Whether the bipartite graph `allowed[i][j]` (left `i`, right `j`, both of
/// size `s`) has a perfect matching.
pub(crate) fn has_perfect_matching(allowed: &[Vec<bool>]) -> bool {
    let s = allowed.len();
    let source = 2 * s;
    let sink = 2 * s + 1;
    let mut net = FlowNetwork::new(2 * s + 2);
    for (i, row) in allowed.iter().enumerate() {
        net.add_edge(source, i, 1);
        net.add_edge(s + i, sink, 1);
        for (j, &ok) in row.iter().enumerate() {
            if ok {
                net.add_edge(i, s + j, 1);
            }
        }
    }
    net.max_flow(source, sink) == s as i64
}

/// Lexicographically smallest perfect matching (`pi[i]` is the right vertex
/// matched to left vertex `i`), or `None` when no perfect matching exists.
pub(crate) fn lexicographic_perfect_matching(allowed: &[Vec<bool>]) -> Option<Vec<usize>> {
    if !has_perfect_matching(allowed) {
        return None;
    }
    let s = allowed.len();
    let mut work: Vec<Vec<bool>> = allowed.to_vec();
    let mut pi = vec![usize::MAX; s];
    for i in 0..s {
        let mut fixed = false;
        for j in 0..s {
            if !allowed[i][j] {
                continue;
            }
            let mut trial = work.clone();
            for jj in 0..s {
                trial[i][jj] = jj == j;
            }
            for (ii, row) in trial.iter_mut().enumerate() {
                if ii != i {
                    row[j] = false;
                }
            }
            if has_perfect_matching(&trial) {
                work = trial;
                pi[i] = j;
                fixed = true;
                break;
            }
        }
        debug_assert!(fixed);
    }
    Some(pi)
}

/// Minimum-cost perfect assignment on a square cost matrix via min-cost flow.
pub(crate) fn min_cost_assignment(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let s = cost.len();
    let source = 2 * s;
    let sink = 2 * s + 1;
    let mut net = CostFlowNetwork::new(2 * s + 2);
    let mut ids = vec![vec![0usize; s]; s];
    for i in 0..s {
        net.add_edge(source, i, 1, 0.0);
        net.add_edge(s + i, sink, 1, 0.0);
    }
    for (i, row) in cost.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            ids[i][j] = net.add_edge(i, s + j, 1, c);
        }
    }
    let total = net
        .min_cost_flow(source, sink, s as i64)
        .expect("complete bipartite graph always has a perfect assignment");
    let pi = (0..s)
        .map(|i| (0..s).find(|&j| net.flow_on(ids[i][j]) > 0).unwrap())
        .collect();
    (pi, total)
}
