//! Maximum flow (Dinic) and the project-selection reduction used to
//! maximise supermodular gain functions of the form
//! `g(Z) = Σ_{v∈Z} w(v) − cut(Z)` over vertex subsets.

/// Directed flow network with residual bookkeeping.  Capacities are i128:
/// callers scale rational weights to a common denominator first.
pub struct FlowNetwork {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<i128>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork {
            adj: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
        }
    }

    /// Arc `u -> v` with capacity `cap` and reverse capacity `rev_cap`
    /// (equal capacities model an undirected edge).
    pub fn add_arc(&mut self, u: usize, v: usize, cap: i128, rev_cap: i128) {
        let id = self.to.len();
        self.to.push(v);
        self.cap.push(cap);
        self.adj[u].push(id);
        self.to.push(u);
        self.cap.push(rev_cap);
        self.adj[v].push(id + 1);
    }

    fn bfs_levels(&self, s: usize, t: usize) -> Option<Vec<i32>> {
        let mut level = vec![-1; self.adj.len()];
        level[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.to[e];
                if self.cap[e] > 0 && level[v] < 0 {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        (level[t] >= 0).then_some(level)
    }

    fn dfs_push(
        &mut self,
        u: usize,
        t: usize,
        pushed: i128,
        level: &[i32],
        iter: &mut [usize],
    ) -> i128 {
        if u == t {
            return pushed;
        }
        while iter[u] < self.adj[u].len() {
            let e = self.adj[u][iter[u]];
            let v = self.to[e];
            if self.cap[e] > 0 && level[v] == level[u] + 1 {
                let d = self.dfs_push(v, t, pushed.min(self.cap[e]), level, iter);
                if d > 0 {
                    self.cap[e] -= d;
                    self.cap[e ^ 1] += d;
                    return d;
                }
            }
            iter[u] += 1;
        }
        0
    }

    /// Max flow from `s` to `t`; afterwards the residual encodes a minimum
    /// cut.
    pub fn max_flow(&mut self, s: usize, t: usize) -> i128 {
        let mut flow = 0i128;
        while let Some(level) = self.bfs_levels(s, t) {
            let mut iter = vec![0usize; self.adj.len()];
            loop {
                let pushed = self.dfs_push(s, t, i128::MAX, &level, &mut iter);
                if pushed == 0 {
                    break;
                }
                flow += pushed;
            }
        }
        flow
    }

    /// Nodes reachable from `s` in the residual graph (the source side of a
    /// minimum cut once `max_flow` has run).
    pub fn residual_reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.to[e];
                if self.cap[e] > 0 && !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }
}

/// Maximise `Σ_{v∈Z} w(v) − Σ_{edges crossing Z} c(e)` by a single min-cut:
/// source side = selected set.  Returns the maximum (0 for the empty set
/// if nothing positive exists) and one maximiser.
///
/// `edges` lists undirected edges with capacities.
pub fn max_weight_minus_cut(
    weights: &[i128],
    edges: &[(usize, usize, i128)],
) -> (i128, Vec<usize>) {
    let n = weights.len();
    let (s, t) = (n, n + 1);
    let mut net = FlowNetwork::new(n + 2);
    let mut positive_total = 0i128;
    for (v, &w) in weights.iter().enumerate() {
        if w > 0 {
            net.add_arc(s, v, w, 0);
            positive_total += w;
        } else if w < 0 {
            net.add_arc(v, t, -w, 0);
        }
    }
    for &(u, v, c) in edges {
        net.add_arc(u, v, c, c);
    }
    let flow = net.max_flow(s, t);
    let best = positive_total - flow;
    let reach = net.residual_reachable(s);
    let z: Vec<usize> = (0..n).filter(|&v| reach[v]).collect();
    (best, z)
}
