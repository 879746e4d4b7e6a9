//! Wasserstein distances on finite metric spaces, the coupling lower bound
//! δ ≥ κ from W_∞ ≤ d and W_1 ≤ (1 − κ)d, and the explicit swap coupling of
//! the Bernoulli–Laplace model in exact arithmetic.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain_core::{Distribution, Exact, ReversiblePair};
use crate::error::{Error, Result};
use crate::factorization::subsets;
use crate::gallery::{bernoulli_laplace, johnson_distance};
use crate::spectral::{ConstantEstimate, ConstantName, EstimateKind};
use num_traits::{One, Zero};

/// A metric on 0..n given as a dense distance matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteMetric {
    d: Vec<Vec<f64>>,
}

pub const METRIC_TOL: f64 = 1e-12;

impl FiniteMetric {
    pub fn new(d: Vec<Vec<f64>>) -> Result<Self> {
        let n = d.len();
        if n == 0 || d.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter(
                "metric must be a non-empty square matrix".into(),
            ));
        }
        for i in 0..n {
            if d[i][i] != 0.0 {
                return Err(Error::InvalidParameter(format!("d({i},{i}) ≠ 0")));
            }
            for j in 0..n {
                let v = d[i][j];
                if !(v >= 0.0) || !v.is_finite() || (v - d[j][i]).abs() > METRIC_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "d({i},{j}) is negative or asymmetric"
                    )));
                }
                if i != j && v == 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "d({i},{j}) = 0 for distinct points"
                    )));
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][j] > d[i][k] + d[k][j] + METRIC_TOL {
                        return Err(Error::InvalidParameter(format!(
                            "triangle inequality fails at ({i},{k},{j})"
                        )));
                    }
                }
            }
        }
        Ok(Self { d })
    }

    /// Shortest-path metric of a connected unweighted graph.
    pub fn graph(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a},{b}) out of range"
                )));
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for (s, row) in d.iter_mut().enumerate() {
            row[s] = 0.0;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if row[v].is_infinite() {
                        row[v] = row[u] + 1.0;
                        queue.push_back(v);
                    }
                }
            }
        }
        if d.iter().flatten().any(|v| v.is_infinite()) {
            return Err(Error::InvalidParameter("graph is disconnected".into()));
        }
        Ok(Self { d })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.d[x][y]
    }
}

/// A joint distribution with prescribed marginals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coupling {
    pub joint: Vec<Vec<f64>>,
}

impl Coupling {
    pub fn first_marginal(&self) -> Vec<f64> {
        self.joint.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn second_marginal(&self) -> Vec<f64> {
        let n = self.joint.first().map_or(0, Vec::len);
        (0..n)
            .map(|j| self.joint.iter().map(|r| r[j]).sum())
            .collect()
    }

    pub fn cost(&self, d: &FiniteMetric) -> f64 {
        self.joint
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, v)| v * d.get(i, j)))
            .sum()
    }

    /// Largest distance carrying positive mass.
    pub fn max_distance(&self, d: &FiniteMetric) -> f64 {
        let mut m = 0.0f64;
        for (i, r) in self.joint.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                if *v > FLOW_EPS {
                    m = m.max(d.get(i, j));
                }
            }
        }
        m
    }
}

const FLOW_EPS: f64 = 1e-15;

/// Minimum-cost transport between `mu` and `nu` under `cost` by successive
/// shortest augmenting paths (Dijkstra with potentials on the dense
/// bipartite residual graph).
fn min_cost_transport(mu: &[f64], nu: &[f64], cost: &dyn Fn(usize, usize) -> f64) -> Vec<Vec<f64>> {
    let src: Vec<usize> = (0..mu.len()).filter(|&i| mu[i] > 0.0).collect();
    let dst: Vec<usize> = (0..nu.len()).filter(|&j| nu[j] > 0.0).collect();
    let (a, b) = (src.len(), dst.len());
    let c: Vec<Vec<f64>> = src
        .iter()
        .map(|&i| dst.iter().map(|&j| cost(i, j)).collect())
        .collect();
    let mut supply: Vec<f64> = src.iter().map(|&i| mu[i]).collect();
    let mut demand: Vec<f64> = dst.iter().map(|&j| nu[j]).collect();
    let mut flow = vec![vec![0.0; b]; a];
    // Node u < a is a source, a + v a sink.
    let mut pot = vec![0.0; a + b];
    let total: f64 = supply.iter().sum::<f64>().min(demand.iter().sum());
    let mut moved = 0.0;
    let mut guard = 0usize;
    while total - moved > 1e-14 && guard < 50 * (a + b) * (a + b) + 100 {
        guard += 1;
        let mut dist = vec![f64::INFINITY; a + b];
        let mut prev = vec![usize::MAX; a + b];
        let mut done = vec![false; a + b];
        for u in 0..a {
            if supply[u] > FLOW_EPS {
                dist[u] = 0.0;
            }
        }
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for (v, &dv) in dist.iter().enumerate() {
                if !done[v] && dv < best {
                    best = dv;
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u < a {
                for v in 0..b {
                    let rc = (c[u][v] + pot[u] - pot[a + v]).max(0.0);
                    if dist[u] + rc < dist[a + v] {
                        dist[a + v] = dist[u] + rc;
                        prev[a + v] = u;
                    }
                }
            } else {
                let v = u - a;
                for w in 0..a {
                    if flow[w][v] > FLOW_EPS {
                        let rc = (-c[w][v] + pot[u] - pot[w]).max(0.0);
                        if dist[u] + rc < dist[w] {
                            dist[w] = dist[u] + rc;
                            prev[w] = u;
                        }
                    }
                }
            }
        }
        let Some(target) = (0..b)
            .filter(|&v| demand[v] > FLOW_EPS && dist[a + v].is_finite())
            .min_by(|&x, &y| dist[a + x].total_cmp(&dist[a + y]).then(x.cmp(&y)))
        else {
            break;
        };
        let reach = dist[a + target];
        for v in 0..a + b {
            pot[v] += dist[v].min(reach);
        }
        // Bottleneck along the path back to a source.
        let mut amount = demand[target];
        let mut node = a + target;
        while prev[node] != usize::MAX {
            let p = prev[node];
            if node < a {
                amount = amount.min(flow[node][p - a]);
            }
            node = p;
        }
        amount = amount.min(supply[node]);
        let start = node;
        let mut node = a + target;
        while prev[node] != usize::MAX {
            let p = prev[node];
            if node >= a {
                flow[p][node - a] += amount;
            } else {
                flow[node][p - a] -= amount;
            }
            node = p;
        }
        supply[start] -= amount;
        demand[target] -= amount;
        moved += amount;
    }
    let mut joint = vec![vec![0.0; nu.len()]; mu.len()];
    for (u, &i) in src.iter().enumerate() {
        for (v, &j) in dst.iter().enumerate() {
            joint[i][j] = flow[u][v].max(0.0);
        }
    }
    joint
}

fn check_space(mu: &Distribution, nu: &Distribution, d: &FiniteMetric) -> Result<()> {
    if mu.len() != d.len() || nu.len() != d.len() {
        return Err(Error::DimensionMismatch {
            context: "transport space",
            expected: d.len(),
            found: mu.len().max(nu.len()),
        });
    }
    Ok(())
}

/// W_1(μ, ν) and an optimal coupling.
pub fn w1(mu: &Distribution, nu: &Distribution, d: &FiniteMetric) -> Result<(f64, Coupling)> {
    check_space(mu, nu, d)?;
    let joint = min_cost_transport(mu.weights(), nu.weights(), &|i, j| d.get(i, j));
    let coupling = Coupling { joint };
    Ok((coupling.cost(d), coupling))
}

/// W_∞(μ, ν): the smallest realized distance r such that a coupling supported
/// on {d ≤ r} exists. Feasibility at r is a zero-cost transport with cost 1
/// on pairs farther than r.
pub fn w_infty(mu: &Distribution, nu: &Distribution, d: &FiniteMetric) -> Result<f64> {
    check_space(mu, nu, d)?;
    let su = mu.support();
    let sv = nu.support();
    let mut radii: Vec<f64> = su
        .iter()
        .flat_map(|&i| sv.iter().map(move |&j| d.get(i, j)))
        .collect();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let feasible = |r: f64| {
        let joint = min_cost_transport(mu.weights(), nu.weights(), &|i, j| {
            if d.get(i, j) <= r {
                0.0
            } else {
                1.0
            }
        });
        let leak: f64 = joint
            .iter()
            .enumerate()
            .flat_map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .filter(move |(j, _)| d.get(i, *j) > r)
                    .map(|(_, v)| *v)
            })
            .sum();
        leak <= 1e-12
    };
    let (mut lo, mut hi) = (0usize, radii.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(radii[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(radii[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairCheck {
    pub x: usize,
    pub y: usize,
    pub distance: f64,
    pub w1: f64,
    pub w_infty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingBound {
    /// Certified lower bound on δ, withheld when a W_∞ check fails.
    pub estimate: Option<ConstantEstimate>,
    pub kappa: f64,
    /// Adjacent pair attaining max W_1/d.
    pub worst_pair: Option<(usize, usize)>,
    /// Pairs (adjacent or sampled) with W_∞ > d.
    pub w_infty_violations: Vec<PairCheck>,
    pub adjacent_checked: usize,
    pub sampled_checked: usize,
}

fn check_pair(pair: &ReversiblePair, d: &FiniteMetric, x: usize, y: usize) -> Result<PairCheck> {
    let p = pair.kernel();
    let mu = Distribution::new(p.row(x).to_vec())?;
    let nu = Distribution::new(p.row(y).to_vec())?;
    Ok(PairCheck {
        x,
        y,
        distance: d.get(x, y),
        w1: w1(&mu, &nu, d)?.0,
        w_infty: w_infty(&mu, &nu, d)?,
    })
}

/// δ(π, P) ≥ κ = 1 − max W_1(P(x,·), P(y,·))/d(x,y) over the supplied
/// adjacent pairs, valid when `d` is the path metric generated by them and
/// W_∞(P(x,·), P(y,·)) ≤ d(x,y). W_∞ is checked on every adjacent pair and on
/// `samples` random non-adjacent pairs drawn with `seed`.
pub fn delta_lower_from_coupling(
    pair: &ReversiblePair,
    d: &FiniteMetric,
    adjacency: &[(usize, usize)],
    samples: usize,
    seed: u64,
) -> Result<CouplingBound> {
    let n = pair.len();
    if d.len() != n {
        return Err(Error::DimensionMismatch {
            context: "coupling metric",
            expected: n,
            found: d.len(),
        });
    }
    if adjacency.is_empty() {
        return Err(Error::InvalidParameter("adjacency list is empty".into()));
    }
    let adjacent: Vec<PairCheck> = adjacency
        .par_iter()
        .map(|&(x, y)| check_pair(pair, d, x, y))
        .collect::<Result<_>>()?;

    let adj_set: BTreeSet<(usize, usize)> = adjacency
        .iter()
        .map(|&(x, y)| (x.min(y), x.max(y)))
        .collect();
    let non_adjacent = n * n.saturating_sub(1) / 2 - adj_set.len().min(n * n.saturating_sub(1) / 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = BTreeSet::new();
    let target = samples.min(non_adjacent);
    while picked.len() < target {
        let x = rng.gen_range(0..n);
        let y = rng.gen_range(0..n);
        let key = (x.min(y), x.max(y));
        if x != y && !adj_set.contains(&key) {
            picked.insert(key);
        }
    }
    let picked: Vec<(usize, usize)> = picked.into_iter().collect();
    let sampled: Vec<PairCheck> = picked
        .par_iter()
        .map(|&(x, y)| check_pair(pair, d, x, y))
        .collect::<Result<_>>()?;

    let violations: Vec<PairCheck> = adjacent
        .iter()
        .chain(&sampled)
        .filter(|c| c.w_infty > c.distance + 1e-9)
        .cloned()
        .collect();
    let mut worst = None;
    let mut worst_ratio = f64::NEG_INFINITY;
    for c in &adjacent {
        let r = c.w1 / c.distance;
        if r > worst_ratio {
            worst_ratio = r;
            worst = Some((c.x, c.y));
        }
    }
    let kappa = 1.0 - worst_ratio;
    let estimate = violations.is_empty().then(|| {
        ConstantEstimate::new(
            ConstantName::Delta,
            kappa,
            EstimateKind::CertifiedLower,
            "κ from W_1 contraction with W_∞ ≤ d",
        )
        .with_tolerance(1e-9)
    });
    Ok(CouplingBound {
        estimate,
        kappa,
        worst_pair: worst,
        w_infty_violations: violations,
        adjacent_checked: adjacent.len(),
        sampled_checked: sampled.len(),
    })
}

/// The explicit swap coupling of P(x, ·) and P(y, ·) for adjacent k-subsets
/// x = S ∪ {a}, y = S ∪ {b}, in five parts:
///
/// 1. σ_ij(x) with σ_ij(y), i ∈ S, j ∉ x ∪ y (distance 1);
/// 2. σ_aj(x) with σ_bj(y), j ∉ x ∪ y (distance 0);
/// 3. σ_bi(x) with σ_ai(y), i ∈ S (distance 0);
/// 4. σ_ab(x) = y with y, and x with σ_ab(y) = x (distance 0);
/// 5. the remaining holding mass, x with y (distance 1).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwapCoupling {
    pub n: usize,
    pub k: usize,
    pub x: usize,
    pub y: usize,
    /// (state of the x-chain, state of the y-chain) → probability.
    #[serde(serialize_with = "serialize_entries")]
    pub entries: BTreeMap<(usize, usize), Exact>,
    #[serde(serialize_with = "serialize_exacts")]
    pub part_masses: [Exact; 5],
    #[serde(serialize_with = "serialize_exact")]
    pub expected_distance: Exact,
    pub max_distance: usize,
}

fn serialize_exact<S: serde::Serializer>(v: &Exact, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

fn serialize_exacts<S: serde::Serializer>(
    v: &[Exact; 5],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|e| e.to_string()))
}

fn serialize_entries<S: serde::Serializer>(
    v: &BTreeMap<(usize, usize), Exact>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|((a, b), p)| (a, b, p.to_string())))
}

/// Build the swap coupling for states `x`, `y` (indices into the
/// lexicographic k-subsets of [n]) and validate both marginals exactly
/// against the Bernoulli–Laplace kernel.
pub fn bernoulli_laplace_coupling(n: usize, k: usize, x: usize, y: usize) -> Result<SwapCoupling> {
    SwapCouplings::new(n, k)?.coupling(x, y)
}

/// The exact Bernoulli–Laplace kernel on k-subsets of [n], built once so
/// that many swap couplings can be validated against it.
pub struct SwapCouplings {
    n: usize,
    k: usize,
    states: Vec<Vec<usize>>,
    kernel: crate::chain_core::Kernel<Exact>,
}

impl SwapCouplings {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        let (pair, _) = bernoulli_laplace::<Exact>(n, k)?;
        Ok(Self {
            n,
            k,
            states: subsets(n, k),
            kernel: pair.kernel().clone(),
        })
    }

    /// See [`bernoulli_laplace_coupling`].
    pub fn coupling(&self, x: usize, y: usize) -> Result<SwapCoupling> {
        let (n, k, states) = (self.n, self.k, &self.states);
        if x >= states.len() || y >= states.len() || johnson_distance(&states[x], &states[y]) != 1 {
            return Err(Error::InvalidParameter(format!(
                "states {x} and {y} are not adjacent"
            )));
        }
        let xs = &states[x];
        let ys = &states[y];
        let a = *xs.iter().find(|v| !ys.contains(v)).expect("adjacent");
        let b = *ys.iter().find(|v| !xs.contains(v)).expect("adjacent");
        let common: Vec<usize> = xs.iter().copied().filter(|&v| v != a).collect();
        let outside: Vec<usize> = (0..n)
            .filter(|v| !xs.contains(v) && !ys.contains(v))
            .collect();
        let index = |s: &[usize]| -> usize {
            let mut v = s.to_vec();
            v.sort_unstable();
            states.binary_search(&v).expect("k-subset")
        };
        let swap = |s: &[usize], out: usize, inn: usize| -> usize {
            let v: Vec<usize> = s.iter().map(|&e| if e == out { inn } else { e }).collect();
            index(&v)
        };
        let kk = Exact::from_integer((2 * k * (n - k)).into());
        let unit = Exact::one() / kk.clone();
        let mut entries: BTreeMap<(usize, usize), Exact> = BTreeMap::new();
        let mut add = |key: (usize, usize), p: &Exact| {
            let e = entries.entry(key).or_insert_with(Exact::zero);
            *e = e.clone() + p.clone();
        };
        let mut parts: [Exact; 5] = std::array::from_fn(|_| Exact::zero());
        for &i in &common {
            for &j in &outside {
                add((swap(xs, i, j), swap(ys, i, j)), &unit);
                parts[0] = parts[0].clone() + unit.clone();
            }
        }
        for &j in &outside {
            add((swap(xs, a, j), swap(ys, b, j)), &unit);
            parts[1] = parts[1].clone() + unit.clone();
        }
        for &i in &common {
            add((swap(xs, i, b), swap(ys, i, a)), &unit);
            parts[2] = parts[2].clone() + unit.clone();
        }
        add((y, y), &unit);
        add((x, x), &unit);
        parts[3] = unit.clone() + unit.clone();
        let hold = Exact::one() / Exact::from_integer(2.into()) - unit;
        add((x, y), &hold);
        parts[4] = hold;

        let p = &self.kernel;
        let size = states.len();
        let mut row_x = vec![Exact::zero(); size];
        let mut row_y = vec![Exact::zero(); size];
        let mut expected = Exact::zero();
        let mut max_distance = 0;
        for (&(u, v), m) in &entries {
            row_x[u] = row_x[u].clone() + m.clone();
            row_y[v] = row_y[v].clone() + m.clone();
            let dist = johnson_distance(&states[u], &states[v]);
            max_distance = max_distance.max(dist);
            expected = expected + m.clone() * Exact::from_integer(dist.into());
        }
        if row_x != p.row(x) || row_y != p.row(y) {
            return Err(Error::InvalidParameter(
                "swap coupling marginals differ from P rows".into(),
            ));
        }
        Ok(SwapCoupling {
            n,
            k,
            x,
            y,
            entries,
            part_masses: parts,
            expected_distance: expected,
            max_distance,
        })
    }
}

/// 1 − n/(2k(n − k)) as an exact rational.
pub fn swap_coupling_expected_distance(n: usize, k: usize) -> Exact {
    Exact::one() - Exact::new((n as i64).into(), ((2 * k * (n - k)) as i64).into())
}

/// Johnson-graph metric and adjacency for the Bernoulli–Laplace states.
pub fn johnson_metric(n: usize, k: usize) -> Result<(FiniteMetric, Vec<(usize, usize)>)> {
    let states = subsets(n, k);
    let size = states.len();
    let d: Vec<Vec<f64>> = (0..size)
        .map(|i| {
            (0..size)
                .map(|j| johnson_distance(&states[i], &states[j]) as f64)
                .collect()
        })
        .collect();
    let adjacency = (0..size)
        .flat_map(|i| ((i + 1)..size).map(move |j| (i, j)))
        .filter(|&(i, j)| d[i][j] == 1.0)
        .collect();
    Ok((FiniteMetric { d }, adjacency))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_core::{ratio, Kernel};
    use crate::entropy_opt::{delta, OptimizerConfig};
    use crate::functionals::tv;
    use proptest::prelude::*;

    fn path(n: usize) -> FiniteMetric {
        FiniteMetric::graph(n, &(0..n - 1).map(|i| (i, i + 1)).collect::<Vec<_>>()).unwrap()
    }

    /// Brute force over couplings of two distributions on 3 points with a
    /// 1/60 grid on the free parameters.
    fn brute_w1(mu: &[f64], nu: &[f64], d: &FiniteMetric) -> f64 {
        let steps = 60;
        let mut best = f64::INFINITY;
        for a in 0..=steps {
            for b in 0..=steps {
                for c in 0..=steps {
                    for e in 0..=steps {
                        let g00 = a as f64 / steps as f64;
                        let g01 = b as f64 / steps as f64;
                        let g10 = c as f64 / steps as f64;
                        let g11 = e as f64 / steps as f64;
                        let g02 = mu[0] - g00 - g01;
                        let g12 = mu[1] - g10 - g11;
                        let g20 = nu[0] - g00 - g10;
                        let g21 = nu[1] - g01 - g11;
                        let g22 = mu[2] - g20 - g21;
                        let g = [[g00, g01, g02], [g10, g11, g12], [g20, g21, g22]];
                        if g.iter().flatten().any(|v| *v < -1e-12) {
                            continue;
                        }
                        let cost: f64 = (0..3)
                            .flat_map(|i| (0..3).map(move |j| (i, j)))
                            .map(|(i, j)| g[i][j] * d.get(i, j))
                            .sum();
                        best = best.min(cost);
                    }
                }
            }
        }
        best
    }

    #[test]
    fn w1_basic_cases() {
        let d = path(3);
        let mu = Distribution::new(vec![0.5, 0.5, 0.0]).unwrap();
        let nu = Distribution::new(vec![0.0, 0.5, 0.5]).unwrap();
        let (v, c) = w1(&mu, &nu, &d).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert!((v - brute_w1(mu.weights(), nu.weights(), &d)).abs() < 1e-12);
        assert!((c.cost(&d) - v).abs() < 1e-9);
        assert_eq!(w1(&mu, &mu, &d).unwrap().0, 0.0);
        let px = Distribution::point_mass(3, 0);
        let py = Distribution::point_mass(3, 2);
        assert_eq!(w1(&px, &py, &d).unwrap().0, 2.0);
        assert_eq!(w_infty(&px, &py, &d).unwrap(), 2.0);
        assert_eq!(w_infty(&mu, &mu, &d).unwrap(), 0.0);
    }

    #[test]
    fn w1_matches_brute_force() {
        let d = FiniteMetric::new(vec![
            vec![0.0, 1.0, 2.5],
            vec![1.0, 0.0, 2.0],
            vec![2.5, 2.0, 0.0],
        ])
        .unwrap();
        let mu = [0.2, 0.5, 0.3];
        let nu = [0.6, 0.1, 0.3];
        let got = w1(
            &Distribution::new(mu.to_vec()).unwrap(),
            &Distribution::new(nu.to_vec()).unwrap(),
            &d,
        )
        .unwrap()
        .0;
        assert!((got - brute_w1(&mu, &nu, &d)).abs() < 1e-9);
    }

    #[test]
    fn metric_validation() {
        assert!(FiniteMetric::new(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        assert!(FiniteMetric::new(vec![
            vec![0.0, 1.0, 5.0],
            vec![1.0, 0.0, 1.0],
            vec![5.0, 1.0, 0.0]
        ])
        .is_err());
        assert!(FiniteMetric::graph(3, &[(0, 1)]).is_err());
    }

    #[test]
    fn coupling_bound_trivial_chains() {
        let d = path(4);
        let adj: Vec<(usize, usize)> = (0..3).map(|i| (i, i + 1)).collect();
        let pi = Distribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let one_step = ReversiblePair::new(pi.clone(), Kernel::constant(4, &pi)).unwrap();
        let b = delta_lower_from_coupling(&one_step, &d, &adj, 10, 1).unwrap();
        assert!((b.kappa - 1.0).abs() < 1e-12);
        assert!(b.estimate.is_some());
        let id = ReversiblePair::new(pi, Kernel::identity(4)).unwrap();
        let b = delta_lower_from_coupling(&id, &d, &adj, 10, 1).unwrap();
        assert!(b.kappa.abs() < 1e-12);
        assert_eq!(b.sampled_checked, 3);
    }

    #[test]
    fn swap_coupling_examples() {
        let c = bernoulli_laplace_coupling(4, 2, 0, 1).unwrap();
        assert_eq!(c.expected_distance, ratio(1, 2));
        assert!(c.max_distance <= 1);
        let total = c
            .part_masses
            .iter()
            .fold(Exact::zero(), |s, v| s + v.clone());
        assert_eq!(total, Exact::one());
        // Part masses follow the counts of each swap class.
        let (n, k) = (7i64, 3i64);
        let c = bernoulli_laplace_coupling(7, 3, 0, 1).unwrap();
        let den = 2 * k * (n - k);
        assert_eq!(c.part_masses[0], ratio((k - 1) * (n - k - 1), den));
        assert_eq!(c.part_masses[1], ratio(n - k - 1, den));
        assert_eq!(c.part_masses[2], ratio(k - 1, den));
        assert_eq!(c.part_masses[3], ratio(1, k * (n - k)));
        assert_eq!(c.part_masses[4], ratio(1, 2) - ratio(1, den));
        assert!(bernoulli_laplace_coupling(4, 2, 0, 5).is_err());
    }

    #[test]
    fn swap_coupling_bounds_w_infty_and_w1() {
        let (n, k) = (4, 2);
        let (pair, _) = bernoulli_laplace::<f64>(n, k).unwrap();
        let (d, adj) = johnson_metric(n, k).unwrap();
        for &(x, y) in &adj {
            let mu = Distribution::new(pair.kernel().row(x).to_vec()).unwrap();
            let nu = Distribution::new(pair.kernel().row(y).to_vec()).unwrap();
            assert!(w_infty(&mu, &nu, &d).unwrap() <= 1.0);
            assert!(w1(&mu, &nu, &d).unwrap().0 <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn bernoulli_laplace_kappa() {
        let (pair, _) = bernoulli_laplace::<f64>(6, 2).unwrap();
        let (d, adj) = johnson_metric(6, 2).unwrap();
        let b = delta_lower_from_coupling(&pair, &d, &adj, 20, 3).unwrap();
        assert!(b.kappa >= 0.375 - 1e-9, "{}", b.kappa);
        assert!(b.w_infty_violations.is_empty());
        let upper = delta(&pair, 1, true, &OptimizerConfig::default())
            .unwrap()
            .upper
            .value;
        assert!(b.kappa <= upper + 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn w1_sandwich(
            a in proptest::collection::vec(0.0f64..1.0, 5),
            b in proptest::collection::vec(0.0f64..1.0, 5),
            pts in proptest::collection::vec(0.0f64..10.0, 5),
        ) {
            prop_assume!(a.iter().sum::<f64>() > 0.1 && b.iter().sum::<f64>() > 0.1);
            let sa: f64 = a.iter().sum();
            let sb: f64 = b.iter().sum();
            let mu = Distribution::new(a.iter().map(|v| v / sa).collect()).unwrap();
            let nu = Distribution::new(b.iter().map(|v| v / sb).collect()).unwrap();
            // Points on a line, nudged apart.
            let xs: Vec<f64> = pts.iter().enumerate().map(|(i, p)| p + i as f64 * 1e-3).collect();
            let d = FiniteMetric::new(
                (0..5).map(|i| (0..5).map(|j| (xs[i] - xs[j]).abs()).collect()).collect(),
            ).unwrap();
            let (v, c) = w1(&mu, &nu, &d).unwrap();
            let winf = w_infty(&mu, &nu, &d).unwrap();
            let dmin = (0..5).flat_map(|i| (0..5).map(move |j| (i, j))).filter(|(i, j)| i != j)
                .map(|(i, j)| d.get(i, j)).fold(f64::INFINITY, f64::min);
            prop_assert!(v <= winf + 1e-9);
            prop_assert!(v >= tv(&mu, &nu).unwrap() * dmin - 1e-9);
            for (got, want) in c.first_marginal().iter().zip(mu.weights()) {
                prop_assert!((got - want).abs() <= 1e-9);
            }
            for (got, want) in c.second_marginal().iter().zip(nu.weights()) {
                prop_assert!((got - want).abs() <= 1e-9);
            }
            // On a line W_1 is the L1 distance between CDFs.
            let mut order: Vec<usize> = (0..5).collect();
            order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
            let (mut fa, mut fb, mut cdf) = (0.0, 0.0, 0.0);
            for w in order.windows(2) {
                fa += mu.get(w[0]);
                fb += nu.get(w[0]);
                cdf += (fa - fb).abs() * (xs[w[1]] - xs[w[0]]);
            }
            prop_assert!((v - cdf).abs() <= 1e-9);
        }
    }
}
