//! Min-cost flow on the torus and the decoder built on it.
//!
//! Every link `(i, μ)` becomes two opposite arcs `i → i+e_μ` and
//! `i+e_μ → i`. Supplies are the syndrome charges, so a feasible flow `f`
//! gives a recovery `r` (net flow along `+μ`) with `divergence(r) = n`.
//! With unit arc costs the optimum minimizes `Σ |r|`.
//!
//! The solver is a primal-dual successive-shortest-path method: a
//! multi-source Dijkstra on reduced costs raises node potentials, then a
//! blocking flow saturates every zero-reduced-cost path from excess to
//! deficit nodes. Reduced costs of residual arcs stay nonnegative, so the
//! final potentials certify optimality.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::decoders::{DecodeOutcome, DecoderId};
use crate::error::{Error, Result};
use crate::lattice::{Axis, Direction, LinkField, Syndrome, TorusLattice};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum CostModel {
    /// Unit cost per unit of flow.
    #[default]
    Linear,
    /// Marginal costs 1, 3, 5 for the first three units on a link and 7 beyond.
    PiecewiseQuadratic,
}

impl CostModel {
    fn marginals(self) -> &'static [i64] {
        match self {
            CostModel::Linear => &[1],
            CostModel::PiecewiseQuadratic => &[1, 3, 5, 7],
        }
    }

    /// Cost of carrying `|r|` units on one link.
    pub fn link_cost(self, r: i64) -> i64 {
        let m = self.marginals();
        let a = r.unsigned_abs() as usize;
        let head: i64 = m.iter().take(a.min(m.len() - 1)).sum();
        head + (a.saturating_sub(m.len() - 1)) as i64 * m[m.len() - 1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub link: usize,
    /// `+1` when the arc runs along `+μ`.
    pub orientation: i64,
    pub capacity: i64,
    pub cost: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowNetwork {
    pub lattice: TorusLattice,
    pub supplies: Vec<i64>,
    pub arcs: Vec<Arc>,
    pub cost_model: CostModel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSolution {
    pub arc_flow: Vec<i64>,
    pub recovery: LinkField,
    pub total_cost: i64,
}

/// Supplies `b_i = n_i` with unit-cost arcs of capacity `Σ max(n_i, 0)`.
pub fn build_network(syndrome: &Syndrome) -> Result<FlowNetwork> {
    build_network_with(syndrome, CostModel::Linear)
}

pub fn build_network_with(syndrome: &Syndrome, cost_model: CostModel) -> Result<FlowNetwork> {
    let total = syndrome.total()?;
    if total != 0 {
        return Err(Error::UnbalancedSyndrome(total));
    }
    let lat = syndrome.lattice();
    let cap: i64 = syndrome.charges().iter().map(|&b| b.max(0)).sum();
    let marginals = cost_model.marginals();
    let mut arcs = Vec::with_capacity(2 * lat.num_links() * marginals.len());
    for link in 0..lat.num_links() {
        let (a, axis) = lat.link_endpoints(link);
        let dir = if axis == Axis::X { Direction::PlusX } else { Direction::PlusY };
        let b = lat.neighbor(a, dir);
        for (pos, &c) in marginals.iter().enumerate() {
            let capacity = if pos + 1 == marginals.len() { cap } else { cap.min(1) };
            arcs.push(Arc { from: a, to: b, link, orientation: 1, capacity, cost: c });
            arcs.push(Arc { from: b, to: a, link, orientation: -1, capacity, cost: c });
        }
    }
    Ok(FlowNetwork { lattice: lat, supplies: syndrome.charges().to_vec(), arcs, cost_model })
}

struct Residual {
    head: Vec<usize>,
    cap: Vec<i64>,
    cost: Vec<i64>,
    /// Edges leaving each node, CSR layout.
    start: Vec<usize>,
    edges: Vec<usize>,
}

impl Residual {
    fn new(net: &FlowNetwork) -> Self {
        let n = net.supplies.len();
        let m = net.arcs.len();
        let mut head = vec![0; 2 * m];
        let mut cap = vec![0; 2 * m];
        let mut cost = vec![0; 2 * m];
        let mut deg = vec![0usize; n + 1];
        for (i, a) in net.arcs.iter().enumerate() {
            head[2 * i] = a.to;
            cap[2 * i] = a.capacity;
            cost[2 * i] = a.cost;
            head[2 * i + 1] = a.from;
            cost[2 * i + 1] = -a.cost;
            deg[a.from + 1] += 1;
            deg[a.to + 1] += 1;
        }
        for i in 0..n {
            deg[i + 1] += deg[i];
        }
        let start = deg.clone();
        let mut fill = deg;
        let mut edges = vec![0; 2 * m];
        for (i, a) in net.arcs.iter().enumerate() {
            edges[fill[a.from]] = 2 * i;
            fill[a.from] += 1;
            edges[fill[a.to]] = 2 * i + 1;
            fill[a.to] += 1;
        }
        Self { head, cap, cost, start, edges }
    }

    fn out(&self, u: usize) -> &[usize] {
        &self.edges[self.start[u]..self.start[u + 1]]
    }
}

/// Integer optimal flow for a balanced network.
pub fn solve_min_cost_flow(net: &FlowNetwork) -> Result<FlowSolution> {
    let n = net.supplies.len();
    let total: i64 = net.supplies.iter().sum();
    if total != 0 {
        return Err(Error::UnbalancedSyndrome(total));
    }
    let mut g = Residual::new(net);
    let mut excess = net.supplies.clone();
    let mut pot = vec![0i64; n];
    let mut dist = vec![i64::MAX; n];
    let mut level = vec![u32::MAX; n];
    let mut iter = vec![0usize; n];
    let mut buckets: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::new();
    let mut path = Vec::new();

    while excess.iter().any(|&e| e > 0) {
        // Multi-source Dijkstra with a bucket queue; costs are small integers.
        dist.fill(i64::MAX);
        buckets.iter_mut().for_each(Vec::clear);
        let push = |buckets: &mut Vec<Vec<usize>>, d: i64, v: usize| {
            let d = d as usize;
            if buckets.len() <= d {
                buckets.resize_with(d + 1, Vec::new);
            }
            buckets[d].push(v);
        };
        for v in 0..n {
            if excess[v] > 0 {
                dist[v] = 0;
                push(&mut buckets, 0, v);
            }
        }
        let mut reach = None;
        let mut d = 0usize;
        'dijkstra: while d < buckets.len() {
            while let Some(u) = buckets[d].pop() {
                if dist[u] != d as i64 {
                    continue;
                }
                if excess[u] < 0 {
                    reach = Some(d as i64);
                    break 'dijkstra;
                }
                for &e in g.out(u) {
                    if g.cap[e] == 0 {
                        continue;
                    }
                    let v = g.head[e];
                    let nd = d as i64 + g.cost[e] + pot[u] - pot[v];
                    debug_assert!(nd >= d as i64);
                    if nd < dist[v] {
                        dist[v] = nd;
                        push(&mut buckets, nd, v);
                    }
                }
            }
            d += 1;
        }
        let reach = reach.ok_or_else(|| Error::Infeasible("no augmenting path from excess to deficit".into()))?;
        for v in 0..n {
            pot[v] += dist[v].min(reach);
        }

        // Blocking flows on the admissible subgraph until it disconnects.
        loop {
            level.fill(u32::MAX);
            queue.clear();
            for v in 0..n {
                if excess[v] > 0 {
                    level[v] = 0;
                    queue.push_back(v);
                }
            }
            let mut found = false;
            while let Some(u) = queue.pop_front() {
                if excess[u] < 0 {
                    found = true;
                    continue;
                }
                for &e in g.out(u) {
                    let v = g.head[e];
                    if g.cap[e] > 0 && level[v] == u32::MAX && g.cost[e] + pot[u] - pot[v] == 0 {
                        level[v] = level[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            if !found {
                break;
            }
            iter[..n].copy_from_slice(&g.start[..n]);
            for s in 0..n {
                while excess[s] > 0 {
                    path.clear();
                    let mut u = s;
                    let reached = loop {
                        if excess[u] < 0 && u != s {
                            break true;
                        }
                        let mut advanced = false;
                        while iter[u] < g.start[u + 1] {
                            let e = g.edges[iter[u]];
                            let v = g.head[e];
                            if g.cap[e] > 0 && level[v] == level[u] + 1 && g.cost[e] + pot[u] - pot[v] == 0 {
                                path.push(e);
                                u = v;
                                advanced = true;
                                break;
                            }
                            iter[u] += 1;
                        }
                        if !advanced {
                            // Dead end: retire `u` for this phase and back up.
                            level[u] = u32::MAX;
                            match path.pop() {
                                Some(e) => {
                                    u = g.head[e ^ 1];
                                    iter[u] += 1;
                                }
                                None => break false,
                            }
                        }
                    };
                    if !reached {
                        break;
                    }
                    let mut amount = excess[s].min(-excess[u]);
                    for &e in &path {
                        amount = amount.min(g.cap[e]);
                    }
                    for &e in &path {
                        g.cap[e] -= amount;
                        g.cap[e ^ 1] += amount;
                    }
                    excess[s] -= amount;
                    excess[u] += amount;
                }
            }
        }
    }
    Ok(finish(net, &g.cap))
}

/// Cancels opposite flows on each link and redistributes parallel arcs cheapest first.
fn finish(net: &FlowNetwork, residual_cap: &[i64]) -> FlowSolution {
    let lat = net.lattice;
    let mut r = vec![0i64; lat.num_links()];
    for (i, a) in net.arcs.iter().enumerate() {
        let flow = a.capacity - residual_cap[2 * i];
        r[a.link] += a.orientation * flow;
    }
    let recovery = LinkField::from_values(lat, r).expect("lattice-sized recovery");
    flow_from_recovery(net, recovery)
}

fn flow_from_recovery(net: &FlowNetwork, recovery: LinkField) -> FlowSolution {
    let mut remaining: Vec<i64> = recovery.values().to_vec();
    let mut arc_flow = vec![0i64; net.arcs.len()];
    let mut total_cost = 0;
    for (i, a) in net.arcs.iter().enumerate() {
        let want = remaining[a.link] * a.orientation;
        if want > 0 {
            let f = want.min(a.capacity);
            arc_flow[i] = f;
            remaining[a.link] -= a.orientation * f;
            total_cost += f * a.cost;
        }
    }
    FlowSolution { arc_flow, recovery, total_cost }
}

/// True when the residual graph of `sol` contains a negative-cost cycle.
pub fn has_negative_residual_cycle(net: &FlowNetwork, sol: &FlowSolution) -> bool {
    let n = net.supplies.len();
    let mut edges = Vec::new();
    for (a, &f) in net.arcs.iter().zip(&sol.arc_flow) {
        if f < a.capacity {
            edges.push((a.from, a.to, a.cost));
        }
        if f > 0 {
            edges.push((a.to, a.from, -a.cost));
        }
    }
    // Bellman-Ford from a virtual source joined to every node at cost 0.
    let mut d = vec![0i64; n];
    for _ in 0..n {
        let mut changed = false;
        for &(u, v, c) in &edges {
            if d[u] + c < d[v] {
                d[v] = d[u] + c;
                changed = true;
            }
        }
        if !changed {
            return false;
        }
    }
    edges.iter().any(|&(u, v, c)| d[u] + c < d[v])
}

/// Checks conservation `outflow - inflow = b` and capacity bounds.
pub fn is_feasible(net: &FlowNetwork, sol: &FlowSolution) -> bool {
    let mut bal = vec![0i64; net.supplies.len()];
    for (a, &f) in net.arcs.iter().zip(&sol.arc_flow) {
        if f < 0 || f > a.capacity {
            return false;
        }
        bal[a.from] += f;
        bal[a.to] -= f;
    }
    bal == net.supplies
}

/// Recovery by min-cost flow; the verdict is the winding of `k - r`.
pub fn mcf_decode(k: &LinkField) -> Result<DecodeOutcome> {
    mcf_decode_with(k, CostModel::Linear).map(|(o, _)| o)
}

pub fn mcf_decode_with(k: &LinkField, model: CostModel) -> Result<(DecodeOutcome, FlowSolution)> {
    let syndrome = k.divergence()?;
    let sol = if syndrome.is_zero() {
        flow_from_recovery(&build_network_with(&syndrome, model)?, LinkField::zeros(k.lattice()))
    } else {
        solve_min_cost_flow(&build_network_with(&syndrome, model)?)?
    };
    let rel = k.checked_sub(&sol.recovery)?;
    let winding =
        rel.winding()?.as_integers().ok_or_else(|| Error::Infeasible("recovery does not match the syndrome".into()))?;
    Ok((
        DecodeOutcome {
            decoder: DecoderId::Mcf,
            chosen_sector: winding,
            success: winding == (0, 0),
            confidence: None,
            gap_uncertainty: None,
            cost: Some(sol.total_cost),
        },
        sol,
    ))
}

/// Exhaustive minimum of `Σ |r|` over `|r| ≤ value_bound` with `divergence(r) = n`; `L ≤ 4`.
pub fn brute_force_mcf(syndrome: &Syndrome, value_bound: i64) -> Result<FlowSolution> {
    let lat = syndrome.lattice();
    if lat.size() > 4 {
        return Err(Error::InvalidSize(lat.size()));
    }
    let total = syndrome.total()?;
    if total != 0 {
        return Err(Error::UnbalancedSyndrome(total));
    }
    let nl = lat.num_links();
    let mut completes = vec![Vec::new(); nl];
    for s in 0..lat.num_sites() {
        completes[*lat.incident_links(s).iter().max().unwrap()].push(s);
    }
    let ends: Vec<(usize, usize)> = (0..nl)
        .map(|l| {
            let (a, axis) = lat.link_endpoints(l);
            let dir = if axis == Axis::X { Direction::PlusX } else { Direction::PlusY };
            (a, lat.neighbor(a, dir))
        })
        .collect();
    let mut search = BruteForce {
        completes,
        ends,
        bound: value_bound,
        r: vec![0; nl],
        need: syndrome.charges().to_vec(),
        best: None,
        limit: 0,
    };
    let lb = search.lower_bound();
    let max_cost = value_bound * nl as i64;
    // Iterative deepening on the cost limit; the first hit is optimal.
    for limit in lb..=max_cost {
        search.limit = limit;
        if search.dfs(0, 0) {
            let r = search.best.take().unwrap();
            let net = build_network(syndrome)?;
            return Ok(flow_from_recovery(&net, LinkField::from_values(lat, r)?));
        }
    }
    Err(Error::Infeasible(format!("no recovery with |r| <= {value_bound}")))
}

struct BruteForce {
    completes: Vec<Vec<usize>>,
    ends: Vec<(usize, usize)>,
    bound: i64,
    r: Vec<i64>,
    /// `target - divergence(r)` over assigned links.
    need: Vec<i64>,
    best: Option<Vec<i64>>,
    limit: i64,
}

impl BruteForce {
    fn lower_bound(&self) -> i64 {
        (self.need.iter().map(|x| x.abs()).sum::<i64>() + 1) / 2
    }

    fn dfs(&mut self, link: usize, cost: i64) -> bool {
        if cost + self.lower_bound() > self.limit {
            return false;
        }
        if link == self.r.len() {
            debug_assert!(self.need.iter().all(|&x| x == 0));
            self.best = Some(self.r.clone());
            return true;
        }
        let (a, b) = self.ends[link];
        let values: Vec<i64> = match self.completes[link].first() {
            Some(&s) => {
                let v = if s == a { self.need[s] } else { -self.need[s] };
                if v.abs() <= self.bound {
                    vec![v]
                } else {
                    vec![]
                }
            }
            None => {
                let mut v: Vec<i64> = (-self.bound..=self.bound).collect();
                v.sort_by_key(|x| x.abs());
                v
            }
        };
        for v in values {
            self.r[link] = v;
            self.need[a] -= v;
            self.need[b] += v;
            let ok = self.completes[link].iter().all(|&s| self.need[s] == 0);
            if ok && self.dfs(link + 1, cost + v.abs()) {
                return true;
            }
            self.need[a] += v;
            self.need[b] -= v;
        }
        self.r[link] = 0;
        false
    }
}
