//! Example chains with their known constants, and parameter sweeps that
//! measure the gap between two contraction constants.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain_core::{power, Distribution, Exact, Kernel, ReversiblePair, Scalar};
use crate::entropy_opt::{self, OptimizerConfig};
use crate::error::{Error, Result};
use crate::factorization::{binomial, complete_graph_factor, subsets, Factorization};
use crate::functionals::binary_entropy;
use crate::io::ChainDocument;
use crate::spectral::{eta_tv, poincare, ConstantName};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    OneStep,
    OneToK,
    BernoulliLaplace,
    ThreeState,
    BirthDeath,
    CompleteLazy,
    CompleteNonlazy,
    CompleteBipartite,
    RandomTransposition,
    LazyRwGraph,
    RandomRegular,
}

impl Family {
    pub const ALL: [Family; 11] = [
        Family::OneStep,
        Family::OneToK,
        Family::BernoulliLaplace,
        Family::ThreeState,
        Family::BirthDeath,
        Family::CompleteLazy,
        Family::CompleteNonlazy,
        Family::CompleteBipartite,
        Family::RandomTransposition,
        Family::LazyRwGraph,
        Family::RandomRegular,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::OneStep => "one_step",
            Family::OneToK => "one_to_k",
            Family::BernoulliLaplace => "bernoulli_laplace",
            Family::ThreeState => "three_state",
            Family::BirthDeath => "birth_death",
            Family::CompleteLazy => "complete_lazy",
            Family::CompleteNonlazy => "complete_nonlazy",
            Family::CompleteBipartite => "complete_bipartite",
            Family::RandomTransposition => "random_transposition",
            Family::LazyRwGraph => "lazy_rw_graph",
            Family::RandomRegular => "random_regular",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.as_str() == s)
    }

    /// Parameters the family reads, with their defaults.
    pub fn parameters(self) -> &'static [(&'static str, f64)] {
        match self {
            Family::OneStep => &[("n", 3.0), ("M", 1.0)],
            Family::OneToK => &[("n", 4.0), ("k", 2.0)],
            Family::BernoulliLaplace => &[("n", 5.0), ("k", 2.0)],
            Family::ThreeState => &[("M", 100.0)],
            Family::BirthDeath => &[("m", 1.0), ("M", 100.0)],
            Family::CompleteLazy => &[("n", 5.0), ("l", 2.0)],
            Family::CompleteNonlazy => &[("n", 4.0)],
            Family::CompleteBipartite => &[("n", 3.0)],
            Family::RandomTransposition => &[("n", 4.0)],
            Family::LazyRwGraph => &[("n", 8.0), ("d", 2.0)],
            Family::RandomRegular => &[("n", 16.0), ("d", 3.0), ("seed", 1.0)],
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A family plus named numeric parameters; missing ones take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub family: Family,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl ChainSpec {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !self.family.parameters().iter().any(|(p, _)| *p == name) {
            return Err(Error::InvalidParameter(format!(
                "{} has no parameter {name}",
                self.family
            )));
        }
        self.params.insert(name.to_string(), value);
        Ok(())
    }

    pub fn real(&self, name: &str) -> Result<f64> {
        let v = self
            .params
            .get(name)
            .copied()
            .or_else(|| {
                self.family
                    .parameters()
                    .iter()
                    .find(|(p, _)| *p == name)
                    .map(|(_, d)| *d)
            })
            .ok_or_else(|| {
                Error::InvalidParameter(format!("{} has no parameter {name}", self.family))
            })?;
        if !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "{name} = {v} is not finite"
            )));
        }
        Ok(v)
    }

    pub fn int(&self, name: &str) -> Result<usize> {
        let v = self.real(name)?;
        if v < 0.0 || v.fract() != 0.0 || v > 1e9 {
            return Err(Error::InvalidParameter(format!(
                "{name} = {v} must be a nonnegative integer"
            )));
        }
        Ok(v as usize)
    }

    /// Short human-readable description, e.g. `three_state(M=100)`.
    pub fn label(&self) -> String {
        let params: Vec<String> = self
            .family
            .parameters()
            .iter()
            .map(|(p, _)| format!("{p}={}", self.real(p).unwrap_or(f64::NAN)))
            .collect();
        format!("{}({})", self.family, params.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundType {
    Exact,
    Lower,
    Upper,
    /// Order of magnitude only; not a numerical bound.
    Order,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Proven,
    Conjectured,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnownConstant {
    pub name: ConstantName,
    /// The constant refers to the pair (π, P^power); α refers to K.
    pub power: u32,
    pub value: f64,
    pub bound: BoundType,
    pub status: Status,
    pub provenance: String,
}

impl KnownConstant {
    fn new(name: ConstantName, value: f64, bound: BoundType, provenance: &str) -> Self {
        Self {
            name,
            power: 1,
            value,
            bound,
            status: Status::Proven,
            provenance: provenance.to_string(),
        }
    }

    fn at_power(mut self, m: u32) -> Self {
        self.power = m;
        self
    }

    pub fn is_numeric(&self) -> bool {
        self.bound != BoundType::Order && self.status == Status::Proven
    }
}

/// A constructed gallery chain.
#[derive(Debug, Clone)]
pub struct ChainInstance<T: Scalar = f64> {
    pub spec: ChainSpec,
    pub states: Vec<String>,
    pub pair: ReversiblePair<T>,
    pub factorization: Option<Factorization<T>>,
}

impl ChainInstance<f64> {
    pub fn document(&self) -> Result<ChainDocument> {
        ChainDocument::from_pair(&self.pair, self.states.clone())
    }
}

/// Construct a gallery chain in floating point.
pub fn make_chain(spec: &ChainSpec) -> Result<ChainInstance> {
    build(spec)
}

/// Construct a gallery chain in exact rational arithmetic. Real parameters
/// enter through their exact binary value.
pub fn make_chain_exact(spec: &ChainSpec) -> Result<ChainInstance<Exact>> {
    build(spec)
}

fn build<T: Scalar>(spec: &ChainSpec) -> Result<ChainInstance<T>> {
    let labels = |n: usize| (0..n).map(|i| i.to_string()).collect::<Vec<_>>();
    let (states, pair, factorization) = match spec.family {
        Family::OneStep => {
            let (n, m) = (spec.int("n")?, spec.real("M")?);
            if n < 2 || m <= 0.0 {
                return Err(Error::InvalidParameter(
                    "one_step needs n ≥ 2 and M > 0".into(),
                ));
            }
            let f = one_step::<T>(n, T::from_f64(m))?;
            (
                labels(n),
                ReversiblePair::new(f.pi().clone(), f.product()?)?,
                Some(f),
            )
        }
        Family::OneToK => {
            let (n, k) = (spec.int("n")?, spec.int("k")?);
            let f = one_to_k::<T>(n, k)?;
            (
                labels(n),
                ReversiblePair::new(f.pi().clone(), f.product()?)?,
                Some(f),
            )
        }
        Family::BernoulliLaplace => {
            let (n, k) = (spec.int("n")?, spec.int("k")?);
            let (pair, f) = bernoulli_laplace::<T>(n, k)?;
            let states = subsets(n, k).iter().map(|s| set_label(s)).collect();
            (states, pair, Some(f))
        }
        Family::ThreeState => {
            let m = spec.real("M")?;
            if m <= 0.0 {
                return Err(Error::InvalidParameter("three_state needs M > 0".into()));
            }
            let pair = birth_death::<T>(1, T::from_f64(m))?;
            let f = crate::factorization::lazy_factorize(&pair)?;
            (labels(3), pair, Some(f))
        }
        Family::BirthDeath => {
            let (m, big) = (spec.int("m")?, spec.real("M")?);
            if m < 1 || big <= 0.0 || m > 1000 {
                return Err(Error::InvalidParameter(
                    "birth_death needs 1 ≤ m ≤ 1000 and M > 0".into(),
                ));
            }
            let pair = birth_death::<T>(m, T::from_f64(big))?;
            if !pair.is_lazy() {
                return Err(Error::InvalidParameter(
                    "birth_death needs M ≥ 1/2 to stay lazy".into(),
                ));
            }
            let f = crate::factorization::lazy_factorize(&pair)?;
            (labels(m + 2), pair, Some(f))
        }
        Family::CompleteLazy => {
            let (n, l) = (spec.int("n")?, spec.int("l")?);
            if !(2..=2000).contains(&n) {
                return Err(Error::InvalidParameter(
                    "complete_lazy needs 2 ≤ n ≤ 2000".into(),
                ));
            }
            let f = complete_graph_factor::<T>(n, l)?;
            (
                labels(n),
                ReversiblePair::new(Distribution::uniform(n), complete_lazy_kernel(n))?,
                Some(f),
            )
        }
        Family::CompleteNonlazy => {
            let n = spec.int("n")?;
            if !(2..=2000).contains(&n) {
                return Err(Error::InvalidParameter(
                    "complete_nonlazy needs 2 ≤ n ≤ 2000".into(),
                ));
            }
            (
                labels(n),
                ReversiblePair::new(Distribution::uniform(n), complete_nonlazy_kernel(n))?,
                None,
            )
        }
        Family::CompleteBipartite => {
            let n = spec.int("n")?;
            if !(1..=500).contains(&n) {
                return Err(Error::InvalidParameter(
                    "complete_bipartite needs 1 ≤ n ≤ 500".into(),
                ));
            }
            let edges = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, n + j)))
                .collect();
            let (pair, f) = graph_walk::<T>(2 * n, edges)?;
            let states = (0..2 * n)
                .map(|v| format!("{}:{}", v / n + 1, v % n + 1))
                .collect();
            (states, pair, Some(f))
        }
        Family::RandomTransposition => {
            let n = spec.int("n")?;
            if !(2..=5).contains(&n) {
                return Err(Error::ResourceCap(format!(
                    "random_transposition needs 2 ≤ n ≤ 5, got {n}"
                )));
            }
            let (perms, edges) = transposition_graph(n);
            let (pair, f) = graph_walk::<T>(perms.len(), edges)?;
            let states = perms
                .iter()
                .map(|p| p.iter().map(|v| (v + 1).to_string()).collect::<String>())
                .collect();
            (states, pair, Some(f))
        }
        Family::LazyRwGraph => {
            let (n, d) = (spec.int("n")?, spec.int("d")?);
            let edges = circulant_edges(n, d)?;
            let (pair, f) = graph_walk::<T>(n, edges)?;
            (labels(n), pair, Some(f))
        }
        Family::RandomRegular => {
            let (n, d, seed) = (spec.int("n")?, spec.int("d")?, spec.int("seed")?);
            let edges = random_regular_edges(n, d, seed as u64)?;
            let (pair, f) = graph_walk::<T>(n, edges)?;
            (labels(n), pair, Some(f))
        }
    };
    Ok(ChainInstance {
        spec: spec.clone(),
        states,
        pair,
        factorization,
    })
}

fn set_label(s: &[usize]) -> String {
    let inner: Vec<String> = s.iter().map(|x| (x + 1).to_string()).collect();
    format!("{{{}}}", inner.join(","))
}

/// One-step chain P(x, ·) = π with π ∝ (1, …, 1, M), factored through a
/// single output symbol.
pub fn one_step<T: Scalar>(n: usize, m: T) -> Result<Factorization<T>> {
    let total = T::from_usize(n - 1) + m.clone();
    let mut w: Vec<T> = (0..n - 1).map(|_| T::one() / total.clone()).collect();
    w.push(m / total);
    let pi = Distribution::new(w)?;
    let k = Kernel::from_rows(vec![vec![T::one()]; n])?;
    Factorization::new(pi, k, vec!["*".into()])
}

/// One-to-k chain: X = [n], Y = [n]^k with y indexed by Σ y_j n^j, and
/// K(x, y) = #{j : y_j = x}/(k n^{k−1}).
pub fn one_to_k<T: Scalar>(n: usize, k: usize) -> Result<Factorization<T>> {
    if n < 2 || k < 1 {
        return Err(Error::InvalidParameter(
            "one_to_k needs n ≥ 2 and k ≥ 1".into(),
        ));
    }
    let size = (n as u128)
        .checked_pow(k as u32)
        .filter(|s| s * k as u128 <= 1_000_000);
    let Some(size) = size.map(|s| s as usize) else {
        return Err(Error::ResourceCap(format!(
            "one_to_k: k·n^k exceeds 10^6 (n = {n}, k = {k})"
        )));
    };
    let denom = T::from_usize(k) * T::from_usize(size / n);
    let mut rows = vec![vec![T::zero(); size]; n];
    let mut labels = Vec::with_capacity(size);
    for y in 0..size {
        let mut rest = y;
        let mut digits = Vec::with_capacity(k);
        for _ in 0..k {
            digits.push(rest % n);
            rest /= n;
        }
        for x in 0..n {
            let c = digits.iter().filter(|&&d| d == x).count();
            if c > 0 {
                rows[x][y] = T::from_usize(c) / denom.clone();
            }
        }
        labels.push(
            digits
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
    }
    Factorization::new(Distribution::uniform(n), Kernel::from_rows(rows)?, labels)
}

/// Lazy random walk on a d-regular simple graph: P = ½ on the diagonal and
/// 1/(2d) along edges, factored through the edges by K(x, e) = 1{x ∈ e}/d.
pub fn graph_walk<T: Scalar>(
    n: usize,
    edges: Vec<(usize, usize)>,
) -> Result<(ReversiblePair<T>, Factorization<T>)> {
    let mut degree = vec![0usize; n];
    let mut seen = HashSet::new();
    for &(a, b) in &edges {
        if a == b || a >= n || b >= n || !seen.insert((a.min(b), a.max(b))) {
            return Err(Error::InvalidParameter(format!(
                "edge ({a},{b}) breaks simplicity"
            )));
        }
        degree[a] += 1;
        degree[b] += 1;
    }
    let d = degree.first().copied().unwrap_or(0);
    if d == 0 || degree.iter().any(|&x| x != d) {
        return Err(Error::InvalidParameter(
            "graph must be regular with positive degree".into(),
        ));
    }
    let inv_d = T::one() / T::from_usize(d);
    let mut k_rows = vec![vec![T::zero(); edges.len()]; n];
    let half = T::one() / T::from_usize(2);
    let step = half.clone() * inv_d.clone();
    let mut p_rows = vec![vec![T::zero(); n]; n];
    for (i, &(a, b)) in edges.iter().enumerate() {
        k_rows[a][i] = inv_d.clone();
        k_rows[b][i] = inv_d.clone();
        p_rows[a][b] = step.clone();
        p_rows[b][a] = step.clone();
    }
    for (x, row) in p_rows.iter_mut().enumerate() {
        row[x] = half.clone();
    }
    let pi = Distribution::uniform(n);
    let pair = ReversiblePair::new(pi.clone(), Kernel::from_rows(p_rows)?)?;
    let labels = edges.iter().map(|(a, b)| format!("{a}-{b}")).collect();
    let f = Factorization::new(pi, Kernel::from_rows(k_rows)?, labels)?;
    Ok((pair, f))
}

/// Bernoulli–Laplace model: lazy walk on the Johnson graph of k-subsets of
/// [n] (lexicographic order), adjacent when they differ by one swap.
pub fn bernoulli_laplace<T: Scalar>(
    n: usize,
    k: usize,
) -> Result<(ReversiblePair<T>, Factorization<T>)> {
    if n < 2 || k < 1 || k >= n {
        return Err(Error::InvalidParameter(
            "bernoulli_laplace needs 1 ≤ k ≤ n − 1".into(),
        ));
    }
    if binomial(n, k) > 5000 {
        return Err(Error::ResourceCap(format!(
            "C({n},{k}) exceeds 5000 states"
        )));
    }
    let states = subsets(n, k);
    let mut edges = Vec::new();
    for (i, a) in states.iter().enumerate() {
        for (j, b) in states.iter().enumerate().skip(i + 1) {
            if johnson_distance(a, b) == 1 {
                edges.push((i, j));
            }
        }
    }
    graph_walk(states.len(), edges)
}

/// |x \ y| for k-subsets: the Johnson graph distance.
pub fn johnson_distance(x: &[usize], y: &[usize]) -> usize {
    x.iter().filter(|v| !y.contains(v)).count()
}

/// Birth–death chain on m + 2 states with a heavy first state:
/// π(1) = M/(M+m+1), π(x) = 1/(M+m+1) otherwise; P(1,2) = 1/(4M), all other
/// off-diagonal moves 1/4. m = 1 is the three-state chain.
pub fn birth_death<T: Scalar>(m: usize, big: T) -> Result<ReversiblePair<T>> {
    let n = m + 2;
    let total = big.clone() + T::from_usize(m + 1);
    let mut w = vec![T::one() / total.clone(); n];
    w[0] = big.clone() / total;
    let quarter = T::one() / T::from_usize(4);
    let mut rows = vec![vec![T::zero(); n]; n];
    rows[0][1] = quarter.clone() / big;
    for x in 1..n {
        rows[x][x - 1] = quarter.clone();
        if x + 1 < n {
            rows[x][x + 1] = quarter.clone();
        }
    }
    for (x, row) in rows.iter_mut().enumerate() {
        let off = row
            .iter()
            .enumerate()
            .filter(|(y, _)| *y != x)
            .fold(T::zero(), |s, (_, v)| s + v.clone());
        row[x] = T::one() - off;
    }
    ReversiblePair::new(Distribution::new(w)?, Kernel::from_rows(rows)?)
}

fn complete_lazy_kernel<T: Scalar>(n: usize) -> Kernel<T> {
    let half = T::one() / T::from_usize(2);
    let off = if n > 1 {
        half.clone() / T::from_usize(n - 1)
    } else {
        T::zero()
    };
    let rows = (0..n)
        .map(|x| {
            (0..n)
                .map(|y| if x == y { half.clone() } else { off.clone() })
                .collect()
        })
        .collect();
    Kernel::from_rows(rows).expect("rows sum to one")
}

fn complete_nonlazy_kernel<T: Scalar>(n: usize) -> Kernel<T> {
    let off = T::one() / T::from_usize(n - 1);
    let rows = (0..n)
        .map(|x| {
            (0..n)
                .map(|y| if x == y { T::zero() } else { off.clone() })
                .collect()
        })
        .collect();
    Kernel::from_rows(rows).expect("rows sum to one")
}

/// Permutations of [n] in lexicographic order and the transposition edges.
pub fn transposition_graph(n: usize) -> (Vec<Vec<usize>>, Vec<(usize, usize)>) {
    let mut perms = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        perms.push(cur.clone());
        // next permutation
        let Some(i) = (0..n.saturating_sub(1))
            .rev()
            .find(|&i| cur[i] < cur[i + 1])
        else {
            break;
        };
        let j = (i + 1..n)
            .rev()
            .find(|&j| cur[j] > cur[i])
            .expect("successor exists");
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
    let index: HashMap<Vec<usize>, usize> = perms
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, p)| (p, i))
        .collect();
    let mut edges = Vec::new();
    for (u, p) in perms.iter().enumerate() {
        for a in 0..n {
            for b in (a + 1)..n {
                let mut q = p.clone();
                q.swap(a, b);
                let v = index[&q];
                if u < v {
                    edges.push((u, v));
                }
            }
        }
    }
    (perms, edges)
}

/// Circulant d-regular graph on n vertices: x ~ x ± j for 1 ≤ j ≤ ⌊d/2⌋,
/// plus x ~ x + n/2 when d is odd.
pub fn circulant_edges(n: usize, d: usize) -> Result<Vec<(usize, usize)>> {
    if d == 0 || d >= n || (d % 2 == 1 && n % 2 == 1) || n > 5000 {
        return Err(Error::InvalidParameter(format!(
            "no circulant {d}-regular graph on {n} vertices (need 1 ≤ d < n, n·d even, n ≤ 5000)"
        )));
    }
    let mut edges = Vec::new();
    for x in 0..n {
        for j in 1..=d / 2 {
            edges.push((x, (x + j) % n));
        }
        if d % 2 == 1 && x < n / 2 {
            edges.push((x, x + n / 2));
        }
    }
    Ok(edges)
}

/// Minimum spectral gap accepted for a random regular graph.
pub const EXPANDER_MIN_GAP: f64 = 0.1;
const MAX_GRAPH_ATTEMPTS: usize = 1000;

/// A simple d-regular graph from the configuration model, resampled until
/// the lazy walk has λ ≥ [`EXPANDER_MIN_GAP`].
pub fn random_regular_edges(n: usize, d: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if d < 3 || d >= n || (n * d) % 2 == 1 || n > 2000 {
        return Err(Error::InvalidParameter(format!(
            "random_regular needs 3 ≤ d < n ≤ 2000 with n·d even (n = {n}, d = {d})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stubs: Vec<usize> = (0..n).flat_map(|x| std::iter::repeat(x).take(d)).collect();
    for _ in 0..MAX_GRAPH_ATTEMPTS {
        stubs.shuffle(&mut rng);
        let mut seen = HashSet::new();
        let ok = stubs
            .chunks(2)
            .all(|e| e[0] != e[1] && seen.insert((e[0].min(e[1]), e[0].max(e[1]))));
        if !ok {
            continue;
        }
        let edges: Vec<(usize, usize)> = stubs
            .chunks(2)
            .map(|e| (e[0].min(e[1]), e[0].max(e[1])))
            .collect();
        let (pair, _) = graph_walk::<f64>(n, edges.clone())?;
        if poincare(&pair)?.lambda() >= EXPANDER_MIN_GAP {
            return Ok(edges);
        }
    }
    Err(Error::NoConvergence(format!(
        "no simple {d}-regular graph on {n} vertices with gap ≥ {EXPANDER_MIN_GAP} in {MAX_GRAPH_ATTEMPTS} draws"
    )))
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// D(νK‖πK) for the one-to-k chain with ν a point mass:
/// log n − Σ_i C(k−1, i−1)(n−1)^{k−i}/n^{k−1} log(k/i).
pub fn one_to_k_point_mass_divergence(n: usize, k: usize) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    let sum: f64 = (1..=k)
        .map(|i| {
            let c = binomial(k - 1, i - 1) as f64;
            let w = ((k - i) as f64 * (nf - 1.0).ln() - (k - 1) as f64 * nf.ln()).exp();
            c * w * (kf / i as f64).ln()
        })
        .sum();
    nf.ln() - sum
}

/// The log-Sobolev constant of P(x, ·) = π: (1 − 2π_*)/log(1/π_* − 1),
/// with the limit 1/2 at π_* = 1/2.
pub fn one_step_rho(pi_star: f64) -> f64 {
    if (pi_star - 0.5).abs() < 1e-12 {
        0.5
    } else {
        (1.0 - 2.0 * pi_star) / (1.0 / pi_star - 1.0).ln()
    }
}

/// Closed-form constants and bounds attached to a family instance.
pub fn known_constants(spec: &ChainSpec) -> Result<Vec<KnownConstant>> {
    use BoundType::*;
    use ConstantName as C;
    let mut out = Vec::new();
    match spec.family {
        Family::OneStep => {
            let (n, m) = (spec.int("n")?, spec.real("M")?);
            let pi_star = 1.0f64.min(m) / (n as f64 - 1.0 + m);
            out.push(KnownConstant::new(
                C::Rho,
                one_step_rho(pi_star),
                Exact,
                "one-step log-Sobolev formula",
            ));
            out.push(KnownConstant::new(
                C::Alpha,
                1.0,
                Exact,
                "single output symbol: νK = πK",
            ));
        }
        Family::OneToK => {
            let (n, k) = (spec.int("n")?, spec.int("k")?);
            out.push(KnownConstant::new(
                C::Delta,
                1.0 - 1.0 / k as f64,
                Lower,
                "coordinate-marginal data processing",
            ));
            let ratio = one_to_k_point_mass_divergence(n, k) / (n as f64).ln();
            out.push(KnownConstant::new(
                C::Alpha,
                1.0 - ratio,
                Upper,
                "point-mass witness",
            ));
        }
        Family::BernoulliLaplace => {
            let (n, k) = (spec.int("n")?, spec.int("k")?);
            let log_c = (binomial(n, k) as f64).ln();
            let kk = k.min(n - k) as f64;
            let nf = n as f64;
            out.push(KnownConstant::new(
                C::Alpha,
                2f64.ln() / log_c,
                Exact,
                "point-mass witness, tight",
            ));
            out.push(KnownConstant::new(
                C::Delta,
                nf / (2.0 * k as f64 * (n - k) as f64),
                Lower,
                "W1/W∞ contraction of the swap coupling",
            ));
            out.push(KnownConstant::new(
                C::Delta,
                (2.0 * nf * (nf - kk)).ln() / (2.0 * log_c),
                Upper,
                "point-mass witness (evaluated at min(k, n − k))",
            ));
        }
        Family::ThreeState => {
            let m = spec.real("M")?;
            out.push(KnownConstant::new(
                C::Delta,
                binary_entropy(0.25) / (m + 2.0).ln(),
                Upper,
                "point mass at the third state",
            ));
        }
        Family::BirthDeath => {
            let (m, big) = (spec.int("m")?, spec.real("M")?);
            let pair = birth_death::<f64>(m, big)?;
            let pm = power(pair.kernel(), m as u32)?;
            let h: f64 = pm
                .row(m + 1)
                .iter()
                .map(|&c| crate::functionals::xlogx(c))
                .sum::<f64>();
            out.push(
                KnownConstant::new(
                    C::Delta,
                    -h / (big + m as f64 + 1.0).ln(),
                    Upper,
                    "point mass at the last state",
                )
                .at_power(m as u32),
            );
        }
        Family::CompleteLazy => {
            let (n, l) = (spec.int("n")?, spec.int("l")?);
            out.push(KnownConstant::new(
                C::Alpha,
                crate::factorization::complete_graph_alpha(n, l),
                Exact,
                "complete-graph half-step closed form",
            ));
            if n >= 3 {
                let nf = n as f64;
                out.push(KnownConstant::new(
                    C::Rho,
                    (nf - 2.0) / (2.0 * (nf - 1.0) * (nf - 1.0).ln()),
                    Exact,
                    "complete-graph log-Sobolev formula",
                ));
            }
        }
        Family::CompleteNonlazy => {
            let n = spec.int("n")? as f64;
            if n >= 3.0 {
                out.push(KnownConstant::new(
                    C::EtaKl,
                    (n.ln() - (n - 1.0).ln()) / n.ln(),
                    Exact,
                    "point-mass extremizer",
                ));
            }
        }
        Family::CompleteBipartite => {
            let n = spec.int("n")?;
            if n >= 3 {
                let nf = n as f64;
                let mut c = KnownConstant::new(
                    C::EtaKl,
                    nf.ln() / (2.0 * (2.0 * nf).ln()),
                    Exact,
                    "point-mass extremizer",
                );
                if n != 3 {
                    c.status = Status::Conjectured;
                    c.provenance = "numerical conjecture; proven only for n = 3".into();
                }
                out.push(c);
            }
        }
        Family::RandomTransposition => {
            let n = spec.int("n")?;
            out.push(KnownConstant::new(
                C::Alpha,
                2f64.ln() / ln_factorial(n),
                Exact,
                "point-mass witness, tight",
            ));
            out.push(KnownConstant::new(
                C::Rho0,
                1.0 / n as f64,
                Order,
                "ρ₀ = Θ(1/n)",
            ));
        }
        Family::LazyRwGraph => {}
        Family::RandomRegular => {
            let n = spec.int("n")? as f64;
            out.push(KnownConstant::new(
                C::Rho0,
                1.0 / n.ln(),
                Order,
                "expander: ρ₀ = Θ(1/log |V|)",
            ));
        }
    }
    Ok(out)
}

/// Which two constants a sweep compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Separation {
    /// δ(P) against α(K).
    DeltaVsAlpha,
    /// δ(P^{m+1}) against δ(P^m), m from the `m` parameter (1 if absent).
    DeltaPowerVsDelta,
    /// ρ₀(P) against δ(P).
    Rho0VsDelta,
    /// ρ₀(P) against α(K).
    Rho0VsAlpha,
    /// α(K) against ρ(P).
    AlphaVsRho,
    /// λ(P) against ρ₀(P).
    LambdaVsRho0,
}

impl Separation {
    pub fn default_for(family: Family) -> Self {
        match family {
            Family::OneStep => Separation::AlphaVsRho,
            Family::ThreeState | Family::BirthDeath => Separation::DeltaPowerVsDelta,
            Family::RandomTransposition => Separation::Rho0VsAlpha,
            Family::LazyRwGraph | Family::RandomRegular => Separation::LambdaVsRho0,
            _ => Separation::DeltaVsAlpha,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SideBounds {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

/// One grid point of a sweep. `certified_ratio` is numerator-lower over
/// denominator-upper, so it never overstates the true ratio.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub family: String,
    pub param: String,
    pub value: f64,
    pub num_name: String,
    pub num_lower: f64,
    pub num_upper: f64,
    pub den_name: String,
    pub den_lower: f64,
    pub den_upper: f64,
    pub certified_ratio: f64,
}

fn side(name: String, b: &entropy_opt::BoundBracket) -> SideBounds {
    SideBounds {
        name,
        lower: b.lower.value,
        upper: b.upper.value,
    }
}

fn require_factor(inst: &ChainInstance) -> Result<&Factorization> {
    inst.factorization.as_ref().ok_or_else(|| {
        Error::InvalidParameter(format!("{} has no factorization for α", inst.spec.family))
    })
}

/// Numerator and denominator brackets for one chain.
pub fn separation_sides(
    spec: &ChainSpec,
    sep: Separation,
    cfg: &OptimizerConfig,
) -> Result<(SideBounds, SideBounds)> {
    let inst = make_chain(spec)?;
    let pair = &inst.pair;
    let factorizable = inst.factorization.is_some() || pair.is_lazy();
    let alpha = |inst: &ChainInstance| -> Result<SideBounds> {
        let f = require_factor(inst)?;
        Ok(side(
            "alpha".into(),
            &entropy_opt::alpha(f.pi(), f.k(), cfg)?,
        ))
    };
    Ok(match sep {
        Separation::DeltaVsAlpha => (
            side(
                "delta".into(),
                &entropy_opt::delta(pair, 1, factorizable, cfg)?,
            ),
            alpha(&inst)?,
        ),
        Separation::DeltaPowerVsDelta => {
            let m = if spec.family == Family::BirthDeath {
                spec.int("m")? as u32
            } else {
                1
            };
            (
                side(
                    format!("delta(P^{})", m + 1),
                    &entropy_opt::delta(pair, m + 1, factorizable, cfg)?,
                ),
                side(
                    format!("delta(P^{m})"),
                    &entropy_opt::delta(pair, m, factorizable, cfg)?,
                ),
            )
        }
        Separation::Rho0VsDelta => (
            side(
                "rho0".into(),
                &entropy_opt::mlsc_estimate(pair, factorizable, cfg)?,
            ),
            side(
                "delta".into(),
                &entropy_opt::delta(pair, 1, factorizable, cfg)?,
            ),
        ),
        Separation::Rho0VsAlpha => (
            side(
                "rho0".into(),
                &entropy_opt::mlsc_estimate(pair, factorizable, cfg)?,
            ),
            alpha(&inst)?,
        ),
        Separation::AlphaVsRho => (
            alpha(&inst)?,
            side(
                "rho".into(),
                &entropy_opt::lsc_estimate(pair, factorizable, cfg)?,
            ),
        ),
        Separation::LambdaVsRho0 => {
            let lambda = poincare(pair)?.lambda();
            (
                SideBounds {
                    name: "lambda".into(),
                    lower: lambda,
                    upper: lambda,
                },
                side(
                    "rho0".into(),
                    &entropy_opt::mlsc_estimate(pair, factorizable, cfg)?,
                ),
            )
        }
    })
}

/// Evaluate a separation over `values` of parameter `param`, in parallel
/// over grid points; rows come back in grid order.
pub fn separation_sweep(
    base: &ChainSpec,
    param: &str,
    values: &[f64],
    sep: Separation,
    cfg: &OptimizerConfig,
) -> Result<Vec<SweepRow>> {
    let specs: Vec<ChainSpec> = values
        .iter()
        .map(|&v| {
            let mut s = base.clone();
            s.set(param, v)?;
            Ok(s)
        })
        .collect::<Result<_>>()?;
    specs
        .par_iter()
        .zip(values.par_iter())
        .map(|(spec, &value)| {
            let (num, den) = separation_sides(spec, sep, cfg)?;
            Ok(SweepRow {
                family: base.family.to_string(),
                param: param.to_string(),
                value,
                certified_ratio: num.lower / den.upper,
                num_name: num.name,
                num_lower: num.lower,
                num_upper: num.upper,
                den_name: den.name,
                den_lower: den.lower,
                den_upper: den.upper,
            })
        })
        .collect()
}

/// 1 − η_TV(π, P^m): the Dobrushin lower bound on δ(P^m).
pub fn dobrushin_delta_lower(pair: &ReversiblePair, m: u32) -> Result<f64> {
    let pm = power(pair.kernel(), m)?;
    Ok(1.0 - eta_tv(pair.pi(), &pm)?.value)
}

/// Point-mass ratio 1 − D(δ_x P^m‖π)/D(δ_x‖π): an upper bound on δ(P^m).
pub fn point_mass_delta_upper(pair: &ReversiblePair, m: u32, x: usize) -> Result<f64> {
    let pm = power(pair.kernel(), m)?;
    let nu = Distribution::point_mass(pair.len(), x);
    let r = entropy_opt::eta_kl_ratio(pair.pi(), &pm, &nu)?
        .ok_or_else(|| Error::Degenerate(format!("point mass at {x} has zero divergence")))?;
    Ok(1.0 - r)
}
