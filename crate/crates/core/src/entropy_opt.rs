//! Two-sided bounds on the entropy constants ρ, ρ₀, η_KL, α and δ.
//!
//! Upper/lower estimates come from multi-start ratio searches: every value an
//! optimizer reports is attained by an explicit witness, so for an infimum
//! (ρ, ρ₀, α, δ) it is an upper bound and for a supremum (η_KL) a lower bound.
//! The opposite side comes from proven comparison inequalities in
//! [`bound_propagate`], the χ² coefficient, and Dobrushin's coefficient.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::chain_core::{compose, power, reverse_kernel, Distribution, Kernel, ReversiblePair};
use crate::error::{Error, Result};
use crate::functionals::entropy_kernel;
use crate::optim::{lbfgs, newton_polish, LbfgsConfig, Minimum};
use crate::spectral::{
    eta_chi2, eta_tv, poincare, symmetrize_product, ConstantEstimate, ConstantName, EstimateKind,
    Witness,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizerConfig {
    /// Dirichlet-random interior starts, on top of the structured seeds.
    pub random_starts: usize,
    pub max_iters: usize,
    /// L-BFGS history length.
    pub memory: usize,
    pub grad_tol: f64,
    pub seed: u64,
    /// Simplex spacing of the grid oracle.
    pub grid_resolution: f64,
    /// Weights below this are set to zero before a witness is reported.
    pub snap_threshold: f64,
    /// Newton steps applied to the best ρ/ρ₀ witness.
    pub polish_steps: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            random_starts: 32,
            max_iters: 500,
            memory: 8,
            grad_tol: 1e-11,
            seed: 0x5eed_0001,
            grid_resolution: 1e-3,
            snap_threshold: 1e-10,
            polish_steps: 8,
        }
    }
}

impl OptimizerConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.random_starts < 8 {
            return Err(Error::InvalidParameter(format!(
                "at least 8 random starts required, got {}",
                self.random_starts
            )));
        }
        if !(self.grid_resolution > 0.0 && self.grid_resolution <= 0.5) {
            return Err(Error::InvalidParameter(format!(
                "grid resolution {} outside (0, 1/2]",
                self.grid_resolution
            )));
        }
        if self.max_iters == 0 || self.memory == 0 {
            return Err(Error::InvalidParameter(
                "iteration budget and memory must be positive".into(),
            ));
        }
        Ok(())
    }

    fn lbfgs(&self) -> LbfgsConfig {
        LbfgsConfig {
            max_iters: self.max_iters,
            memory: self.memory,
            grad_tol: self.grad_tol,
            f_tol: 1e-15,
        }
    }
}

/// A lower and an upper estimate of one constant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundBracket {
    pub lower: ConstantEstimate,
    pub upper: ConstantEstimate,
}

impl BoundBracket {
    pub fn new(lower: ConstantEstimate, upper: ConstantEstimate) -> Self {
        Self { lower, upper }
    }

    pub fn slack(&self) -> f64 {
        self.lower.tolerance + self.upper.tolerance + 1e-12
    }

    pub fn is_consistent(&self) -> bool {
        self.lower.value <= self.upper.value + self.slack()
    }

    pub fn contains(&self, value: f64, tol: f64) -> bool {
        self.lower.value - tol <= value && value <= self.upper.value + tol
    }

    pub fn width(&self) -> f64 {
        self.upper.value - self.lower.value
    }
}

// ---------------------------------------------------------------------------
// η_KL ratio D(νK‖πK)/D(ν‖π)

/// Below these, D(ν‖π) and Ent(f) are too small for the ratios to carry
/// useful digits.
const MIN_DIVERGENCE: f64 = 1e-10;
const MIN_ENTROPY: f64 = 1e-10;

pub(crate) struct KlProblem {
    pi: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    pik: Vec<f64>,
}

impl KlProblem {
    pub(crate) fn new(pi: &Distribution, k: &Kernel) -> Result<Self> {
        if k.n_in() != pi.len() {
            return Err(Error::DimensionMismatch {
                context: "eta_kl",
                expected: pi.len(),
                found: k.n_in(),
            });
        }
        let rows: Vec<Vec<(usize, f64)>> = k
            .rows()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, v)| **v > 0.0)
                    .map(|(y, v)| (y, *v))
                    .collect()
            })
            .collect();
        let mut pik = vec![0.0; k.n_out()];
        for (x, row) in rows.iter().enumerate() {
            for &(y, v) in row {
                pik[y] += pi.get(x) * v;
            }
        }
        Ok(Self {
            pi: pi.weights().to_vec(),
            rows,
            pik,
        })
    }

    fn output_divergence(&self, nu: &[f64]) -> f64 {
        let mut q = vec![0.0; self.pik.len()];
        for (x, row) in self.rows.iter().enumerate() {
            if nu[x] > 0.0 {
                for &(y, v) in row {
                    q[y] += nu[x] * v;
                }
            }
        }
        q.iter()
            .zip(&self.pik)
            .filter(|(_, b)| **b > 0.0)
            .map(|(a, b)| {
                b * entropy_kernel(if *a > 0.0 {
                    (a / b).ln()
                } else {
                    f64::NEG_INFINITY
                })
            })
            .sum()
    }

    /// Ratio at an arbitrary ν; `None` when D(ν‖π) is zero, tiny or infinite.
    pub(crate) fn ratio(&self, nu: &[f64]) -> Option<f64> {
        let mut d = 0.0;
        for (a, b) in nu.iter().zip(&self.pi) {
            if *b > 0.0 {
                d += b * entropy_kernel(if *a > 0.0 {
                    (a / b).ln()
                } else {
                    f64::NEG_INFINITY
                });
            } else if *a > 0.0 {
                return None;
            }
        }
        if !(d > MIN_DIVERGENCE) {
            return None;
        }
        Some(self.output_divergence(nu) / d)
    }

    /// ν on `active` from log-density coordinates u: ν_i ∝ π_i e^{u_i}.
    fn nu_from(&self, active: &[usize], u: &[f64]) -> (Vec<f64>, f64) {
        let c = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = active
            .iter()
            .zip(u)
            .map(|(&x, ui)| self.pi[x] * (ui - c).exp())
            .collect();
        let z: f64 = w.iter().sum();
        let lse = c + z.ln();
        let mut nu = vec![0.0; self.pi.len()];
        for (&x, wi) in active.iter().zip(&w) {
            nu[x] = wi / z;
        }
        (nu, lse)
    }

    /// −ratio and its gradient in u.
    pub(crate) fn neg_ratio(&self, active: &[usize], u: &[f64], grad: &mut [f64]) -> f64 {
        let (nu, lse) = self.nu_from(active, u);
        let on: f64 = active
            .iter()
            .zip(u)
            .map(|(&x, ui)| self.pi[x] * entropy_kernel(ui - lse))
            .sum();
        let off: f64 =
            self.pi.iter().sum::<f64>() - active.iter().map(|&x| self.pi[x]).sum::<f64>();
        let d = on + off.max(0.0);
        if !(d > MIN_DIVERGENCE) {
            return f64::NAN;
        }
        let mut q = vec![0.0; self.pik.len()];
        for &x in active {
            for &(y, v) in &self.rows[x] {
                q[y] += nu[x] * v;
            }
        }
        let log_ratio: Vec<f64> = q
            .iter()
            .zip(&self.pik)
            .map(|(a, b)| if *a > 0.0 { (a / b).ln() } else { 0.0 })
            .collect();
        let n: f64 = q
            .iter()
            .zip(&self.pik)
            .zip(&log_ratio)
            .filter(|((_, b), _)| **b > 0.0)
            .map(|((a, b), l)| b * entropy_kernel(if *a > 0.0 { *l } else { f64::NEG_INFINITY }))
            .sum();
        let r = n / d;
        let g_r: Vec<f64> = active
            .iter()
            .zip(u)
            .map(|(&x, ui)| {
                let gn: f64 = self.rows[x].iter().map(|&(y, v)| v * log_ratio[y]).sum();
                (gn - r * (ui - lse)) / d
            })
            .collect();
        let mean: f64 = active.iter().zip(&g_r).map(|(&x, g)| nu[x] * g).sum();
        for ((gi, &x), g) in grad.iter_mut().zip(active).zip(&g_r) {
            *gi = -nu[x] * (g - mean);
        }
        -r
    }
}

/// D(νK‖πK)/D(ν‖π), or `None` when the denominator is zero or infinite.
pub fn eta_kl_ratio(pi: &Distribution, k: &Kernel, nu: &Distribution) -> Result<Option<f64>> {
    let problem = KlProblem::new(pi, k)?;
    if nu.len() != pi.len() {
        return Err(Error::DimensionMismatch {
            context: "eta_kl_ratio",
            expected: pi.len(),
            found: nu.len(),
        });
    }
    Ok(problem.ratio(nu.weights()))
}

// ---------------------------------------------------------------------------
// Log-Sobolev type ratios E(√f,√f)/Ent f and E(f, log f)/Ent f

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SobolevKind {
    /// E(√f, √f) / Ent(f)
    Lsi,
    /// E(f, log f) / Ent(f)
    Mlsi,
}

pub(crate) struct SobolevProblem {
    kind: SobolevKind,
    support: Vec<usize>,
    pi: Vec<f64>,
    /// (a, b, π(a)P(a,b)) over a < b, indices into `support`.
    edges: Vec<(usize, usize, f64)>,
}

impl SobolevProblem {
    pub(crate) fn new(pair: &ReversiblePair, kind: SobolevKind) -> Self {
        let support = pair.pi().support();
        let pi: Vec<f64> = support.iter().map(|&x| *pair.pi().get(x)).collect();
        let mut edges = Vec::new();
        for (a, &x) in support.iter().enumerate() {
            for (b, &y) in support.iter().enumerate().skip(a + 1) {
                let w = pi[a] * pair.kernel().get(x, y);
                if w > 0.0 {
                    edges.push((a, b, w));
                }
            }
        }
        Self {
            kind,
            support,
            pi,
            edges,
        }
    }

    fn dim(&self) -> usize {
        self.support.len()
    }

    /// Ratio and gradient at log-density u (on the support).
    pub(crate) fn ratio_grad(&self, u: &[f64], grad: &mut [f64]) -> f64 {
        // Shift so that π[f] = 1; the ratio is scale invariant.
        let c = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = self
            .pi
            .iter()
            .zip(u)
            .map(|(p, ui)| p * (ui - c).exp())
            .sum();
        let lse = c + z.ln();
        let v: Vec<f64> = u.iter().map(|ui| ui - lse).collect();
        let f: Vec<f64> = v.iter().map(|x| x.exp()).collect();
        let ent: f64 = self
            .pi
            .iter()
            .zip(&v)
            .map(|(p, vx)| p * entropy_kernel(*vx))
            .sum();
        if !(ent > MIN_ENTROPY) {
            return f64::NAN;
        }
        let mut num = 0.0;
        let mut g_num = vec![0.0; u.len()];
        match self.kind {
            SobolevKind::Lsi => {
                let g: Vec<f64> = v.iter().map(|x| (0.5 * x).exp()).collect();
                for &(a, b, w) in &self.edges {
                    let d = g[a] - g[b];
                    num += w * d * d;
                    g_num[a] += w * d * g[a];
                    g_num[b] -= w * d * g[b];
                }
            }
            SobolevKind::Mlsi => {
                for &(a, b, w) in &self.edges {
                    let df = f[a] - f[b];
                    let dv = v[a] - v[b];
                    num += w * df * dv;
                    g_num[a] += w * (f[a] * dv + df);
                    g_num[b] -= w * (f[b] * dv + df);
                }
            }
        }
        let r = num / ent;
        for i in 0..u.len() {
            let g_ent = self.pi[i] * f[i] * v[i];
            grad[i] = (g_num[i] - r * g_ent) / ent;
        }
        r
    }

    fn density(&self, n: usize, u: &[f64]) -> Vec<f64> {
        let c = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let f: Vec<f64> = u.iter().map(|ui| (ui - c).exp()).collect();
        let m: f64 = self.pi.iter().zip(&f).map(|(p, x)| p * x).sum();
        let mut out = vec![0.0; n];
        for (&x, fx) in self.support.iter().zip(&f) {
            out[x] = fx / m;
        }
        out
    }
}

fn log_density(pair: &ReversiblePair, f: &[f64]) -> Result<Option<Vec<f64>>> {
    if f.len() != pair.len() {
        return Err(Error::DimensionMismatch {
            context: "sobolev ratio",
            expected: pair.len(),
            found: f.len(),
        });
    }
    let support = pair.pi().support();
    if support.iter().any(|&x| !(f[x] > 0.0) || !f[x].is_finite()) {
        return Ok(None);
    }
    Ok(Some(support.iter().map(|&x| f[x].ln()).collect()))
}

fn sobolev_ratio(pair: &ReversiblePair, f: &[f64], kind: SobolevKind) -> Result<Option<f64>> {
    let problem = SobolevProblem::new(pair, kind);
    let Some(u) = log_density(pair, f)? else {
        return Ok(None);
    };
    let mut g = vec![0.0; u.len()];
    let r = problem.ratio_grad(&u, &mut g);
    Ok(r.is_finite().then_some(r))
}

/// E(f, log f)/Ent_π(f) for f > 0 on supp π; `None` for constants or
/// non-positive f.
pub fn mlsi_ratio(pair: &ReversiblePair, f: &[f64]) -> Result<Option<f64>> {
    sobolev_ratio(pair, f, SobolevKind::Mlsi)
}

/// E(√f, √f)/Ent_π(f). Zeros in f are allowed.
pub fn lsi_ratio(pair: &ReversiblePair, f: &[f64]) -> Result<Option<f64>> {
    if f.len() != pair.len() {
        return Err(Error::DimensionMismatch {
            context: "lsi ratio",
            expected: pair.len(),
            found: f.len(),
        });
    }
    let g: Vec<f64> = f.iter().map(|v| v.max(0.0).sqrt()).collect();
    let num = crate::functionals::dirichlet_form_edges(pair, &g, &g);
    let ent = match crate::functionals::entropy_functional(pair.pi(), f) {
        Ok(e) => e,
        Err(_) => return Ok(None),
    };
    Ok((ent > MIN_ENTROPY).then(|| num / ent))
}

// ---------------------------------------------------------------------------
// Multi-start search

#[derive(Debug, Clone)]
struct Candidate {
    value: f64,
    point: Vec<f64>,
    support: usize,
    start: usize,
}

/// Deterministic reduction: best value, then smaller support, then earlier
/// start. `maximize` selects the direction.
fn reduce(cands: Vec<Candidate>, maximize: bool) -> Option<Candidate> {
    const TIE: f64 = 1e-9;
    let mut best: Option<Candidate> = None;
    for c in cands {
        if !c.value.is_finite() {
            continue;
        }
        best = Some(match best {
            None => c,
            Some(b) => {
                let gain = if maximize {
                    c.value - b.value
                } else {
                    b.value - c.value
                };
                if gain > TIE || (gain >= -TIE && c.support < b.support) {
                    c
                } else {
                    b
                }
            }
        });
    }
    best
}

fn exp_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| Exp1.sample(rng)).collect::<Vec<f64>>()
}

/// Maximize the η_KL ratio from one interior start, then repeatedly drop
/// coordinates below the snap threshold and re-optimize on the face.
fn kl_ascent(problem: &KlProblem, nu0: &[f64], cfg: &OptimizerConfig) -> Option<(f64, Vec<f64>)> {
    let mut active: Vec<usize> = (0..nu0.len()).filter(|&x| nu0[x] > 0.0).collect();
    let mut u: Vec<f64> = active
        .iter()
        .map(|&x| (nu0[x] / problem.pi[x]).ln())
        .collect();
    let lcfg = cfg.lbfgs();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..nu0.len() {
        if active.len() < 2 {
            break;
        }
        let m = lbfgs(|x, g| problem.neg_ratio(&active, x, g), u.clone(), &lcfg);
        if !m.value.is_finite() {
            break;
        }
        let (nu, _) = problem.nu_from(&active, &m.x);
        if let Some(r) = problem.ratio(&nu) {
            if best.as_ref().map_or(true, |(b, _)| r > *b) {
                best = Some((r, nu.clone()));
            }
        }
        let keep: Vec<usize> = active
            .iter()
            .cloned()
            .filter(|&x| nu[x] >= cfg.snap_threshold)
            .collect();
        if keep.len() == active.len() {
            break;
        }
        let mut snapped = vec![0.0; nu.len()];
        let mass: f64 = keep.iter().map(|&x| nu[x]).sum();
        for &x in &keep {
            snapped[x] = nu[x] / mass;
        }
        if let Some(r) = problem.ratio(&snapped) {
            if best.as_ref().map_or(true, |(b, _)| r >= *b - 1e-9) {
                best = Some((r, snapped.clone()));
            }
        }
        u = keep
            .iter()
            .map(|&x| (snapped[x] / problem.pi[x]).ln())
            .collect();
        active = keep;
    }
    best
}

/// Largest η_KL ratio found: point masses plus random interior starts.
fn kl_search(
    problem: &KlProblem,
    cfg: &OptimizerConfig,
    extra_starts: &[Vec<f64>],
) -> Option<Candidate> {
    let n = problem.pi.len();
    let support: Vec<usize> = (0..n).filter(|&x| problem.pi[x] > 0.0).collect();
    let mut cands: Vec<Candidate> = support
        .iter()
        .filter_map(|&x| {
            let mut nu = vec![0.0; n];
            nu[x] = 1.0;
            problem.ratio(&nu).map(|value| Candidate {
                value,
                point: nu,
                support: 1,
                start: x,
            })
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut starts: Vec<Vec<f64>> = (0..cfg.random_starts)
        .map(|_| {
            let w = exp_weights(&mut rng, support.len());
            let z: f64 = w.iter().sum();
            let mut nu = vec![0.0; n];
            for (&x, wi) in support.iter().zip(&w) {
                nu[x] = wi / z;
            }
            nu
        })
        .collect();
    starts.extend(extra_starts.iter().cloned());
    let offset = n;
    let found: Vec<Candidate> = starts
        .par_iter()
        .enumerate()
        .filter_map(|(i, nu0)| {
            kl_ascent(problem, nu0, cfg).map(|(value, point)| Candidate {
                value,
                support: point.iter().filter(|v| **v > 0.0).count(),
                point,
                start: offset + i,
            })
        })
        .collect();
    cands.extend(found);
    reduce(cands, true)
}

/// Two-sided bracket for η_KL(π, K). The lower side is the best ratio found
/// (with its witness ν) or η_χ², whichever is larger; the upper side is η_TV.
pub fn eta_kl_estimate(
    pi: &Distribution,
    k: &Kernel,
    cfg: &OptimizerConfig,
) -> Result<BoundBracket> {
    cfg.validate()?;
    let problem = KlProblem::new(pi, k)?;
    let chi2 = eta_chi2(pi, k)?;
    let tv = eta_tv(pi, k)?;
    let best = kl_search(&problem, cfg, &[]);
    let lower = match best {
        Some(c) if c.value >= chi2.value => ConstantEstimate::new(
            ConstantName::EtaKl,
            c.value,
            EstimateKind::OptimizerLower,
            "ratio D(νK‖πK)/D(ν‖π) at the witness",
        )
        .with_witness(Witness::Distribution(c.point))
        .with_tolerance(1e-9),
        Some(c) => ConstantEstimate::new(
            ConstantName::EtaKl,
            chi2.value,
            EstimateKind::EigenExact,
            "η_χ² (ratio limit as ν → π)",
        )
        .with_witness(Witness::Distribution(c.point))
        .with_tolerance(chi2.tolerance),
        None if pi.support().len() >= 2 => ConstantEstimate::new(
            ConstantName::EtaKl,
            chi2.value,
            EstimateKind::EigenExact,
            "η_χ² (ratio limit as ν → π)",
        )
        .with_tolerance(chi2.tolerance),
        None => {
            return Err(Error::Degenerate(
                "every seed has zero or infinite divergence".into(),
            ))
        }
    };
    let upper = ConstantEstimate::new(
        ConstantName::EtaKl,
        tv.value,
        EstimateKind::CertifiedUpper,
        "η_TV(π, K)",
    );
    Ok(BoundBracket::new(lower, upper))
}

fn complement(
    b: &BoundBracket,
    name: ConstantName,
    certified_lower: ConstantEstimate,
) -> BoundBracket {
    let mut upper = ConstantEstimate::new(
        name,
        1.0 - b.lower.value,
        if b.lower.kind == EstimateKind::OptimizerLower {
            EstimateKind::OptimizerUpper
        } else {
            EstimateKind::CertifiedUpper
        },
        format!("1 - η_KL lower ({})", b.lower.provenance),
    )
    .with_tolerance(b.lower.tolerance);
    upper.witness = b.lower.witness.clone();
    let mut lower = certified_lower;
    if 1.0 - b.upper.value > lower.value {
        lower = ConstantEstimate::new(
            name,
            1.0 - b.upper.value,
            EstimateKind::CertifiedLower,
            "1 - η_TV",
        );
    }
    BoundBracket::new(lower, upper)
}

/// The pair (π, KK*_π).
pub fn factorized_pair(pi: &Distribution, k: &Kernel) -> Result<ReversiblePair> {
    let kstar = reverse_kernel(pi, k)?;
    ReversiblePair::new(pi.clone(), symmetrize_product(pi, &compose(k, &kstar)?))
}

/// α(π, K) = 1 − η_KL(π, K). The certified lower side is max(1 − η_TV(K),
/// certified ρ of (π, KK*)).
pub fn alpha(pi: &Distribution, k: &Kernel, cfg: &OptimizerConfig) -> Result<BoundBracket> {
    let eta = eta_kl_estimate(pi, k, cfg)?;
    let rho_lo = match factorized_pair(pi, k).and_then(|p| bound_propagate(&p, true)) {
        Ok(map) => map[&ConstantName::Rho].value,
        Err(_) => 0.0,
    };
    let lower = ConstantEstimate::new(
        ConstantName::Alpha,
        rho_lo,
        EstimateKind::CertifiedLower,
        "α ≥ ρ(π, KK*)",
    );
    Ok(complement(&eta, ConstantName::Alpha, lower))
}

/// δ(π, P^m) = 1 − η_KL(π, P^m). `factorizable` refers to P; P^m inherits it,
/// and even powers are always factorizable.
pub fn delta(
    pair: &ReversiblePair,
    m: u32,
    factorizable: bool,
    cfg: &OptimizerConfig,
) -> Result<BoundBracket> {
    if m == 0 {
        return Err(Error::InvalidParameter("δ needs a positive power".into()));
    }
    let target = pair.power(m)?;
    let eta = eta_kl_estimate(target.pi(), target.kernel(), cfg)?;
    let lowers = bound_propagate(&target, factorizable || m % 2 == 0)?;
    Ok(complement(
        &eta,
        ConstantName::Delta,
        lowers[&ConstantName::Delta].clone(),
    ))
}

fn sobolev_starts(
    pair: &ReversiblePair,
    problem: &SobolevProblem,
    cfg: &OptimizerConfig,
) -> Result<Vec<Vec<f64>>> {
    let d = problem.dim();
    let mut starts = Vec::new();
    if let Ok(report) = poincare(pair) {
        if let Some(w) = report.estimate.witness {
            let phi: Vec<f64> = problem.support.iter().map(|&x| w.values()[x]).collect();
            let scale = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if scale > 0.0 {
                for s in [-3.0, -0.5, 0.5, 3.0] {
                    starts.push(phi.iter().map(|v| s * v / scale).collect());
                }
            }
        }
    }
    if d <= 64 {
        for i in 0..d {
            for s in [-4.0, 4.0] {
                let mut u = vec![0.0; d];
                u[i] = s;
                starts.push(u);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    for _ in 0..cfg.random_starts {
        let w = exp_weights(&mut rng, d);
        starts.push(w.iter().map(|v| v.ln()).collect());
    }
    Ok(starts)
}

fn sobolev_search(
    pair: &ReversiblePair,
    problem: &SobolevProblem,
    cfg: &OptimizerConfig,
    extra: &[Vec<f64>],
) -> Result<Option<(Minimum, usize)>> {
    let mut starts = sobolev_starts(pair, problem, cfg)?;
    starts.extend(extra.iter().cloned());
    let lcfg = cfg.lbfgs();
    let results: Vec<Minimum> = starts
        .par_iter()
        .map(|u0| lbfgs(|x, g| problem.ratio_grad(x, g), u0.clone(), &lcfg))
        .collect();
    let cands: Vec<Candidate> = results
        .iter()
        .enumerate()
        .map(|(i, m)| Candidate {
            value: m.value,
            point: m.x.clone(),
            support: problem.dim(),
            start: i,
        })
        .collect();
    let Some(best) = reduce(cands, false) else {
        return Ok(None);
    };
    let mut m = results[best.start].clone();
    if cfg.polish_steps > 0 {
        m = newton_polish(|x, g| problem.ratio_grad(x, g), m, cfg.polish_steps, 1e-12);
    }
    Ok(Some((m, best.start)))
}

fn sobolev_estimate(
    pair: &ReversiblePair,
    factorizable: bool,
    kind: SobolevKind,
    cfg: &OptimizerConfig,
) -> Result<BoundBracket> {
    cfg.validate()?;
    let (name, limit_factor, limit_label) = match kind {
        SobolevKind::Lsi => (ConstantName::Rho, 0.5, "λ/2 (near-constant limit)"),
        SobolevKind::Mlsi => (ConstantName::Rho0, 2.0, "2λ (near-constant limit)"),
    };
    let lambda = poincare(pair)?.lambda();
    let lowers = bound_propagate(pair, factorizable)?;
    let problem = SobolevProblem::new(pair, kind);
    let limit = limit_factor * lambda;
    let found = sobolev_search(pair, &problem, cfg, &[])?;
    let upper = match found {
        Some((m, _)) if m.value < limit => ConstantEstimate::new(
            name,
            m.value,
            EstimateKind::OptimizerUpper,
            "ratio at the witness density",
        )
        .with_witness(Witness::Density(problem.density(pair.len(), &m.x)))
        .with_tolerance(1e-9),
        _ => ConstantEstimate::new(name, limit, EstimateKind::OptimizerUpper, limit_label)
            .with_tolerance(1e-12),
    };
    Ok(BoundBracket::new(lowers[&name].clone(), upper))
}

/// ρ(π, P): minimum of E(√f,√f)/Ent(f) found by search, capped at λ/2.
pub fn lsc_estimate(
    pair: &ReversiblePair,
    factorizable: bool,
    cfg: &OptimizerConfig,
) -> Result<BoundBracket> {
    sobolev_estimate(pair, factorizable, SobolevKind::Lsi, cfg)
}

/// ρ₀(π, P): minimum of E(f, log f)/Ent(f) found by search, capped at 2λ.
pub fn mlsc_estimate(
    pair: &ReversiblePair,
    factorizable: bool,
    cfg: &OptimizerConfig,
) -> Result<BoundBracket> {
    sobolev_estimate(pair, factorizable, SobolevKind::Mlsi, cfg)
}

// ---------------------------------------------------------------------------
// Certified lower bounds

pub type CertifiedLowers = BTreeMap<ConstantName, ConstantEstimate>;

/// Certified lower bounds from proven comparison inequalities:
///
/// * ρ ≥ (1 − 2π_min) λ / log(1/π_min − 1), and ρ ≥ ρ₀/(20 log(1/p_min));
/// * δ ≥ 1 − η_TV(P), and δ ≥ α ≥ ρ when P is factorizable;
/// * ρ₀ ≥ 4ρ and ρ₀ ≥ δ.
///
/// `factorizable` asserts that P = KK*_π for some K (lazy chains always are).
pub fn bound_propagate(pair: &ReversiblePair, factorizable: bool) -> Result<CertifiedLowers> {
    let lambda_report = poincare(pair)?;
    let lambda = lambda_report.lambda();
    let pi_min = pair.pi().min_positive();
    let support = pair.pi().support();
    let p_min = support
        .iter()
        .flat_map(|&x| support.iter().map(move |&y| (x, y)))
        .map(|(x, y)| *pair.kernel().get(x, y))
        .filter(|v| *v > 0.0)
        .fold(1.0f64, f64::min);
    let tv = eta_tv(pair.pi(), pair.kernel())?.value;

    let (rho_dsc, rho_dsc_src) = if 1.0 - 2.0 * pi_min > 1e-12 {
        (
            (1.0 - 2.0 * pi_min) * lambda / (1.0 / pi_min - 1.0).ln(),
            "(1 - 2π_min)λ / log(1/π_min - 1)",
        )
    } else {
        (lambda / 2.0, "λ/2 (two-point uniform case)")
    };
    let delta_tv = 1.0 - tv;
    let sparsity = if p_min < 1.0 {
        20.0 * (1.0 / p_min).ln()
    } else {
        f64::INFINITY
    };

    let mut rho = (rho_dsc, rho_dsc_src.to_string());
    let mut delta = (delta_tv, "1 - η_TV(π, P)".to_string());
    let mut rho0 = (0.0, String::new());
    for _ in 0..2 {
        if factorizable && rho.0 > delta.0 {
            delta = (rho.0, format!("δ ≥ α ≥ ρ, ρ via {}", rho.1));
        }
        rho0 = if 4.0 * rho.0 >= delta.0 {
            (4.0 * rho.0, format!("4ρ, ρ via {}", rho.1))
        } else {
            (delta.0, format!("δ ≤ ρ₀, δ via {}", delta.1))
        };
        let from_rho0 = rho0.0 / sparsity;
        if from_rho0 > rho.0 {
            rho = (
                from_rho0,
                format!("ρ₀/(20 log(1/p_min)), ρ₀ via {}", rho0.1),
            );
        }
    }

    let cert = |name, value: f64, src: String| {
        ConstantEstimate::new(name, value.max(0.0), EstimateKind::CertifiedLower, src)
            .with_tolerance(1e-10)
    };
    let mut out = CertifiedLowers::new();
    out.insert(ConstantName::Lambda, lambda_report.estimate.clone());
    out.insert(
        ConstantName::Rho,
        cert(ConstantName::Rho, rho.0, rho.1.clone()),
    );
    if factorizable {
        out.insert(
            ConstantName::Alpha,
            cert(
                ConstantName::Alpha,
                rho.0,
                format!("α ≥ ρ, ρ via {}", rho.1),
            ),
        );
    }
    out.insert(
        ConstantName::Delta,
        cert(ConstantName::Delta, delta.0, delta.1),
    );
    out.insert(ConstantName::Rho0, cert(ConstantName::Rho0, rho0.0, rho0.1));
    Ok(out)
}

/// P[Pois(t) ≥ k].
pub fn poisson_tail(t: f64, k: u32) -> f64 {
    if t <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    // Summing the tail directly keeps small probabilities accurate.
    let mut term = (-t).exp();
    for j in 1..=k {
        term *= t / j as f64;
    }
    if k as f64 > t {
        let mut sum = 0.0;
        let mut j = k;
        while term > 1e-18 * sum || sum == 0.0 {
            sum += term;
            j += 1;
            term *= t / j as f64;
            if term == 0.0 {
                break;
            }
        }
        sum.min(1.0)
    } else {
        let mut head = 0.0;
        let mut term = (-t).exp();
        for j in 0..k {
            head += term;
            term *= t / (j + 1) as f64;
        }
        (1.0 - head).max(0.0)
    }
}

/// δ(π, T_t) ≥ P[Pois(t) ≥ m+1] · (1 − η_TV(π, P^{m+1})).
pub fn poisson_mixture_bound(pair: &ReversiblePair, t: f64, m: u32) -> Result<ConstantEstimate> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let pm = power(pair.kernel(), m + 1)?;
    let tv = eta_tv(pair.pi(), &pm)?.value;
    let tail = poisson_tail(t, m + 1);
    Ok(ConstantEstimate::new(
        ConstantName::Delta,
        tail * (1.0 - tv),
        EstimateKind::CertifiedLower,
        format!("P[Pois({t}) ≥ {}] · (1 - η_TV(P^{}))", m + 1, m + 1),
    )
    .with_tolerance(1e-12))
}

// ---------------------------------------------------------------------------
// Extremizer structure

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremalBranch {
    /// The witness satisfies the Euler–Lagrange equation.
    Residual,
    /// The estimate equals its spectral limit (2λ for ρ₀, λ/2 for ρ); no
    /// witness required.
    SpectralLimit,
    /// η_KL = η_χ²; no witness required.
    ChiSquareLimit,
    /// η_KL witness attains the estimate.
    WitnessAttains,
    /// None of the above within tolerance.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub name: ConstantName,
    pub branch: ExtremalBranch,
    pub max_abs_residual: f64,
    pub relative_residual: f64,
    pub witness_ratio: Option<f64>,
}

impl ResidualReport {
    pub fn accepted(&self) -> bool {
        self.branch != ExtremalBranch::Failed
    }
}

/// Relative tolerance on Euler–Lagrange residuals.
pub const RESIDUAL_TOL: f64 = 1e-4;
/// Tolerance for the spectral/χ² limit branches.
pub const LIMIT_TOL: f64 = 1e-6;

/// Check the structure of an extremizer. For ρ₀ the residual of
/// −Lf − f L(log f) = ρ₀ f log f (π[f] = 1); for ρ the residual of
/// −L√f = ρ √f log f; either may instead sit at its spectral limit. For δ
/// (η_KL of P) the η_KL dichotomy is checked with K = P.
pub fn extremal_residuals(
    pair: &ReversiblePair,
    estimate: &ConstantEstimate,
) -> Result<ResidualReport> {
    match estimate.name {
        ConstantName::Rho | ConstantName::Rho0 => sobolev_residuals(pair, estimate),
        ConstantName::Delta | ConstantName::EtaKl => {
            let mut est = estimate.clone();
            if estimate.name == ConstantName::Delta {
                est.value = 1.0 - estimate.value;
            }
            let mut r = eta_kl_dichotomy(pair.pi(), pair.kernel(), &est)?;
            r.name = estimate.name;
            Ok(r)
        }
        other => Err(Error::InvalidParameter(format!(
            "no extremal equation for {other}"
        ))),
    }
}

fn sobolev_residuals(pair: &ReversiblePair, estimate: &ConstantEstimate) -> Result<ResidualReport> {
    let lambda = poincare(pair)?.lambda();
    let is_mlsi = estimate.name == ConstantName::Rho0;
    let limit = if is_mlsi { 2.0 * lambda } else { lambda / 2.0 };
    if (estimate.value - limit).abs() <= LIMIT_TOL {
        return Ok(ResidualReport {
            name: estimate.name,
            branch: ExtremalBranch::SpectralLimit,
            max_abs_residual: 0.0,
            relative_residual: 0.0,
            witness_ratio: None,
        });
    }
    let w = estimate.witness.as_ref().ok_or(Error::MissingWitness)?;
    let f = crate::chain_core::DensityFunction::new(w.values().to_vec())?
        .normalized(pair.pi())?
        .into_values();
    let n = pair.len();
    let p = pair.kernel();
    let on = |x: usize| *pair.pi().get(x) > 0.0;
    let c = estimate.value;
    let (res, scale, ratio) = if is_mlsi {
        let logf: Vec<f64> = (0..n)
            .map(|x| if on(x) { f[x].ln() } else { 0.0 })
            .collect();
        let pf = p.apply(&f);
        let plog = p.apply(&logf);
        let mut res = vec![0.0; n];
        let mut scale = vec![0.0; n];
        for x in (0..n).filter(|&x| on(x)) {
            let a = f[x] - pf[x];
            let b = f[x] * (logf[x] - plog[x]);
            let d = c * f[x] * logf[x];
            res[x] = a + b - d;
            scale[x] = a.abs() + b.abs() + d.abs();
        }
        (res, scale, mlsi_ratio(pair, &f)?)
    } else {
        let g: Vec<f64> = f.iter().map(|v| v.sqrt()).collect();
        let pg = p.apply(&g);
        let mut res = vec![0.0; n];
        let mut scale = vec![0.0; n];
        for x in (0..n).filter(|&x| on(x)) {
            let a = g[x] - pg[x];
            let d = if f[x] > 0.0 {
                c * g[x] * f[x].ln()
            } else {
                0.0
            };
            res[x] = a - d;
            scale[x] = a.abs() + d.abs();
        }
        (res, scale, lsi_ratio(pair, &f)?)
    };
    let max_abs = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let denom = scale.iter().fold(0.0f64, |m, v| m.max(*v));
    let relative = if denom > 0.0 {
        max_abs / denom
    } else {
        f64::INFINITY
    };
    Ok(ResidualReport {
        name: estimate.name,
        branch: if relative <= RESIDUAL_TOL {
            ExtremalBranch::Residual
        } else {
            ExtremalBranch::Failed
        },
        max_abs_residual: max_abs,
        relative_residual: relative,
        witness_ratio: ratio,
    })
}

/// η_KL dichotomy: either the witness attains the estimate, or the estimate
/// equals η_χ².
pub fn eta_kl_dichotomy(
    pi: &Distribution,
    k: &Kernel,
    estimate: &ConstantEstimate,
) -> Result<ResidualReport> {
    let chi2 = eta_chi2(pi, k)?.value;
    let ratio = match &estimate.witness {
        Some(w) => KlProblem::new(pi, k)?.ratio(w.values()),
        None => None,
    };
    let gap = ratio.map(|r| (r - estimate.value).abs());
    let branch = if gap.is_some_and(|g| g <= LIMIT_TOL) {
        ExtremalBranch::WitnessAttains
    } else if (estimate.value - chi2).abs() <= LIMIT_TOL {
        ExtremalBranch::ChiSquareLimit
    } else {
        ExtremalBranch::Failed
    };
    Ok(ResidualReport {
        name: ConstantName::EtaKl,
        branch,
        max_abs_residual: gap.unwrap_or(f64::NAN),
        relative_residual: gap.map_or(f64::NAN, |g| g / estimate.value.abs().max(1e-300)),
        witness_ratio: ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FullSupport {
    /// P(x,x) ≥ 1/2 everywhere and η_KL > 1/2.
    LazyAndLargeEta,
    /// P(x,y) > 0 everywhere.
    StrictlyPositive,
    Inconclusive,
}

/// Which sufficient condition for full-support η_KL extremizers holds.
pub fn full_support_condition(pair: &ReversiblePair, cfg: &OptimizerConfig) -> Result<FullSupport> {
    if pair.is_lazy() {
        let mut lower = eta_chi2(pair.pi(), pair.kernel())?.value;
        if lower <= 0.5 {
            lower = eta_kl_estimate(pair.pi(), pair.kernel(), cfg)?.lower.value;
        }
        if lower > 0.5 {
            return Ok(FullSupport::LazyAndLargeEta);
        }
    }
    if pair.kernel().rows().all(|r| r.iter().all(|v| *v > 0.0)) {
        return Ok(FullSupport::StrictlyPositive);
    }
    Ok(FullSupport::Inconclusive)
}

// ---------------------------------------------------------------------------
// Grid oracles (|X| ≤ 3)

fn simplex_grid(n: usize, res: f64) -> Result<(usize, Vec<Vec<usize>>)> {
    if !(2..=3).contains(&n) {
        return Err(Error::InvalidParameter(format!(
            "grid oracle needs 2 or 3 states, got {n}"
        )));
    }
    let steps = (1.0 / res).round() as usize;
    let rows = (0..=steps)
        .map(|i| {
            if n == 2 {
                vec![i]
            } else {
                (0..=steps - i).collect()
            }
        })
        .collect();
    Ok((steps, rows))
}

fn grid_point(n: usize, steps: usize, i: usize, j: usize) -> Vec<f64> {
    let s = steps as f64;
    if n == 2 {
        vec![i as f64 / s, (steps - i) as f64 / s]
    } else {
        vec![i as f64 / s, j as f64 / s, (steps - i - j) as f64 / s]
    }
}

/// Best `keep` grid points by `score` (higher is better), deterministic.
fn grid_scan<F>(n: usize, res: f64, keep: usize, score: F) -> Result<Vec<(f64, Vec<f64>)>>
where
    F: Fn(&[f64]) -> Option<f64> + Sync,
{
    let (steps, rows) = simplex_grid(n, res)?;
    let per_row: Vec<Vec<(f64, usize, usize)>> = rows
        .par_iter()
        .enumerate()
        .map(|(i, js)| {
            let mut top: Vec<(f64, usize, usize)> = Vec::new();
            for &j in js {
                let (a, b) = if n == 2 { (j, 0) } else { (i, j) };
                if let Some(v) = score(&grid_point(n, steps, a, b)) {
                    top.push((v, a, b));
                }
            }
            top.sort_by(|x, y| y.0.total_cmp(&x.0));
            top.truncate(keep);
            top
        })
        .collect();
    let mut all: Vec<(f64, usize, usize)> = per_row.into_iter().flatten().collect();
    all.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    all.truncate(keep);
    Ok(all
        .into_iter()
        .map(|(v, a, b)| (v, grid_point(n, steps, a, b)))
        .collect())
}

/// η_KL(π, K) for |X| ≤ 3 by exhaustive simplex grid, local refinement from
/// the best grid points, and the η_χ² limit.
pub fn eta_kl_grid_oracle(
    pi: &Distribution,
    k: &Kernel,
    cfg: &OptimizerConfig,
) -> Result<ConstantEstimate> {
    let problem = KlProblem::new(pi, k)?;
    let top = grid_scan(pi.len(), cfg.grid_resolution, 8, |nu| problem.ratio(nu))?;
    let mut best = (f64::NEG_INFINITY, None);
    for (v, nu) in &top {
        if *v > best.0 {
            best = (*v, Some(nu.clone()));
        }
        let interior: Vec<f64> = {
            let eps = 1e-6;
            let w: Vec<f64> = nu
                .iter()
                .zip(pi.weights())
                .map(|(a, p)| if *p > 0.0 { a + eps } else { 0.0 })
                .collect();
            let z: f64 = w.iter().sum();
            w.iter().map(|x| x / z).collect()
        };
        if let Some((r, point)) = kl_ascent(&problem, &interior, cfg) {
            if r > best.0 {
                best = (r, Some(point));
            }
        }
    }
    let chi2 = eta_chi2(pi, k)?.value;
    let mut est = if chi2 > best.0 {
        ConstantEstimate::new(
            ConstantName::EtaKl,
            chi2,
            EstimateKind::OracleGrid,
            "grid oracle: η_χ² limit",
        )
    } else {
        ConstantEstimate::new(
            ConstantName::EtaKl,
            best.0,
            EstimateKind::OracleGrid,
            "grid oracle: refined grid maximum",
        )
    };
    if let Some(nu) = best.1 {
        est = est.with_witness(Witness::Distribution(nu));
    }
    Ok(est.with_tolerance(1e-9))
}

/// ρ₀(π, P) for |X| ≤ 3 by the same grid scheme over ν = fπ, plus the 2λ limit.
pub fn mlsc_grid_oracle(pair: &ReversiblePair, cfg: &OptimizerConfig) -> Result<ConstantEstimate> {
    let problem = SobolevProblem::new(pair, SobolevKind::Mlsi);
    let pi = pair.pi().weights().to_vec();
    let support = pair.pi().support();
    let to_u = |nu: &[f64]| -> Option<Vec<f64>> {
        support
            .iter()
            .map(|&x| (nu[x] > 0.0).then(|| (nu[x] / pi[x]).ln()))
            .collect()
    };
    let top = grid_scan(pair.len(), cfg.grid_resolution, 8, |nu| {
        let u = to_u(nu)?;
        let mut g = vec![0.0; u.len()];
        let r = problem.ratio_grad(&u, &mut g);
        r.is_finite().then_some(-r)
    })?;
    let lcfg = cfg.lbfgs();
    let mut best = (f64::INFINITY, None);
    for (v, nu) in &top {
        let u0 = to_u(nu).expect("scored grid points are interior");
        if -v < best.0 {
            best = (-v, Some(u0.clone()));
        }
        let m = lbfgs(|x, g| problem.ratio_grad(x, g), u0, &lcfg);
        if m.value < best.0 {
            best = (m.value, Some(m.x));
        }
    }
    let limit = 2.0 * poincare(pair)?.lambda();
    if limit <= best.0 {
        return Ok(ConstantEstimate::new(
            ConstantName::Rho0,
            limit,
            EstimateKind::OracleGrid,
            "grid oracle: 2λ limit",
        )
        .with_tolerance(1e-12));
    }
    let u = best.1.expect("finite minimum has a point");
    Ok(ConstantEstimate::new(
        ConstantName::Rho0,
        best.0,
        EstimateKind::OracleGrid,
        "grid oracle: refined grid minimum",
    )
    .with_witness(Witness::Density(problem.density(pair.len(), &u)))
    .with_tolerance(1e-9))
}

// ---------------------------------------------------------------------------
// The ordering ρ ≤ α ≤ δ ≤ ρ₀ ≤ 2λ

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainReport {
    pub lambda: f64,
    pub rho: BoundBracket,
    pub alpha: Option<BoundBracket>,
    pub delta: BoundBracket,
    pub rho0: BoundBracket,
    /// Certified lower of one constant above the upper estimate of the next.
    pub violations: Vec<String>,
    /// Upper estimates out of order by more than [`ORDER_SLACK`].
    pub estimate_order_warnings: Vec<String>,
    /// (1 − ρ̂₀)/(1 − α̂), reported for inspection only.
    pub rho0_vs_alpha: Option<f64>,
}

pub const ORDER_SLACK: f64 = 5e-3;

/// Checks a chain of (name, lower, upper) entries listed in increasing
/// order: returns the certified violations (a lower above the next upper)
/// and the estimate-order warnings (an upper above the next upper by more
/// than [`ORDER_SLACK`]).
pub fn ordering_check(chain: &[(&str, f64, f64)]) -> (Vec<String>, Vec<String>) {
    let mut violations = Vec::new();
    let mut warnings = Vec::new();
    for w in chain.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.1 > b.2 + 1e-9 {
            violations.push(format!("{} lower {} > {} upper {}", a.0, a.1, b.0, b.2));
        }
        if a.2 > b.2 + ORDER_SLACK {
            warnings.push(format!(
                "{} estimate {} > {} estimate {}",
                a.0, a.2, b.0, b.2
            ));
        }
    }
    (violations, warnings)
}

/// All brackets for a pair plus the ordering checks. `factor` is a kernel K
/// with P = KK*_π when one is known; a lazy pair is always factorizable.
pub fn chain_report(
    pair: &ReversiblePair,
    factor: Option<&Kernel>,
    cfg: &OptimizerConfig,
) -> Result<ChainReport> {
    let factorizable = factor.is_some() || pair.is_lazy();
    let lambda = poincare(pair)?.lambda();
    let rho = lsc_estimate(pair, factorizable, cfg)?;
    let alpha = match factor {
        Some(k) => Some(alpha(pair.pi(), k, cfg)?),
        None => None,
    };
    let delta = delta(pair, 1, factorizable, cfg)?;
    let rho0 = mlsc_estimate(pair, factorizable, cfg)?;

    let two_lambda = 2.0 * lambda;
    let mut chain: Vec<(&str, f64, f64)> = vec![("rho", rho.lower.value, rho.upper.value)];
    if let Some(a) = &alpha {
        chain.push(("alpha", a.lower.value, a.upper.value));
    }
    chain.push(("delta", delta.lower.value, delta.upper.value));
    chain.push(("rho0", rho0.lower.value, rho0.upper.value));
    chain.push(("2lambda", two_lambda, two_lambda));

    let (mut violations, warnings) = ordering_check(&chain);
    for (name, b) in [("rho", &rho), ("delta", &delta), ("rho0", &rho0)] {
        if !b.is_consistent() {
            violations.push(format!(
                "{name} bracket inverted: {} > {}",
                b.lower.value, b.upper.value
            ));
        }
    }
    if let Some(a) = &alpha {
        if !a.is_consistent() {
            violations.push(format!(
                "alpha bracket inverted: {} > {}",
                a.lower.value, a.upper.value
            ));
        }
    }
    let rho0_vs_alpha = alpha.as_ref().and_then(|a| {
        (a.upper.value < 1.0).then(|| (1.0 - rho0.upper.value) / (1.0 - a.upper.value))
    });
    Ok(ChainReport {
        lambda,
        rho,
        alpha,
        delta,
        rho0,
        violations,
        estimate_order_warnings: warnings,
        rho0_vs_alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn cfg() -> OptimizerConfig {
        OptimizerConfig::default()
    }

    fn two_state(c: f64) -> ReversiblePair {
        ReversiblePair::new(
            Distribution::uniform(2),
            Kernel::from_rows(vec![vec![1.0 - c, c], vec![c, 1.0 - c]]).unwrap(),
        )
        .unwrap()
    }

    fn three_state(m: f64) -> ReversiblePair {
        let pi = Distribution::new(vec![m / (m + 2.0), 1.0 / (m + 2.0), 1.0 / (m + 2.0)]).unwrap();
        let p = Kernel::from_rows(vec![
            vec![1.0 - 1.0 / (4.0 * m), 1.0 / (4.0 * m), 0.0],
            vec![0.25, 0.5, 0.25],
            vec![0.0, 0.25, 0.75],
        ])
        .unwrap();
        ReversiblePair::new(pi, p).unwrap()
    }

    fn one_step(pistar: f64, n: usize) -> ReversiblePair {
        let rest = (1.0 - pistar) / (n - 1) as f64;
        let pi = Distribution::new((0..n).map(|x| if x == 0 { pistar } else { rest }).collect())
            .unwrap();
        ReversiblePair::new(pi.clone(), Kernel::constant(n, &pi)).unwrap()
    }

    fn lazy_complete(n: usize) -> ReversiblePair {
        let off = 1.0 / (2.0 * (n as f64 - 1.0));
        let rows = (0..n)
            .map(|x| (0..n).map(|y| if x == y { 0.5 } else { off }).collect())
            .collect();
        ReversiblePair::new(Distribution::uniform(n), Kernel::from_rows(rows).unwrap()).unwrap()
    }

    fn nonlazy_complete(n: usize) -> Kernel {
        let off = 1.0 / (n as f64 - 1.0);
        Kernel::from_rows(
            (0..n)
                .map(|x| (0..n).map(|y| if x == y { 0.0 } else { off }).collect())
                .collect(),
        )
        .unwrap()
    }

    fn h(x: f64) -> f64 {
        crate::functionals::binary_entropy(x)
    }

    #[test]
    fn one_step_kernel_has_alpha_one() {
        let pi = Distribution::new(vec![0.1, 0.3, 0.6]).unwrap();
        let star = Kernel::constant(3, &Distribution::uniform(1));
        let a = alpha(&pi, &star, &cfg()).unwrap();
        assert!((a.upper.value - 1.0).abs() < 1e-12);
        assert!((a.lower.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nonlazy_complete_eta_kl_closed_form() {
        let n = 4;
        let k = nonlazy_complete(n);
        let b = eta_kl_estimate(&Distribution::uniform(n), &k, &cfg()).unwrap();
        let want = ((4f64).ln() - (3f64).ln()) / (4f64).ln();
        assert!(
            (b.lower.value - want).abs() < 1e-6,
            "{} vs {want}",
            b.lower.value
        );
        assert!(b.is_consistent());
    }

    #[test]
    fn three_state_point_mass_delta_bound() {
        let m = 98.0;
        let pair = three_state(m);
        let d = delta(&pair, 1, true, &cfg()).unwrap();
        let bound = h(0.25) / (m + 2.0).ln();
        assert!(
            d.upper.value <= bound + 1e-9,
            "{} vs {bound}",
            d.upper.value
        );
        assert!((bound - 0.1221).abs() < 1e-4);
        assert!(d.is_consistent());
    }

    #[test]
    fn one_step_rho_closed_form() {
        let pair = one_step(0.1, 2);
        let b = lsc_estimate(&pair, true, &cfg()).unwrap();
        let want = (1.0 - 0.2) / (9f64).ln();
        assert!(
            (b.upper.value - want).abs() < 1e-6,
            "{} vs {want}",
            b.upper.value
        );
        assert!((b.lower.value - want).abs() < 1e-9);
    }

    #[test]
    fn lazy_complete_rho_closed_form() {
        let pair = lazy_complete(5);
        let b = lsc_estimate(&pair, true, &cfg()).unwrap();
        let want = 3.0 / (8.0 * (4f64).ln());
        assert!(
            (b.upper.value - want).abs() < 1e-6,
            "{} vs {want}",
            b.upper.value
        );
        assert!((b.lower.value - want).abs() < 1e-9, "{}", b.lower.value);
        assert!(b.upper.value <= poincare(&pair).unwrap().lambda() / 2.0 + 1e-12);
    }

    #[test]
    fn two_state_mlsi_between_4rho_and_2lambda() {
        let pair = two_state(0.25);
        let rho = lsc_estimate(&pair, true, &cfg()).unwrap();
        let rho0 = mlsc_estimate(&pair, true, &cfg()).unwrap();
        assert!(
            4.0 * rho.lower.value <= rho0.upper.value + 1e-12,
            "{} {}",
            rho.lower.value,
            rho0.upper.value
        );
        assert!(rho0.upper.value <= 1.0 + 1e-12);
    }

    #[test]
    fn three_state_mlsi_candidate_bounds_search() {
        let m = 1e6;
        let pair = three_state(m);
        let candidate = [1.0 / m, 1.0, m.ln()];
        let r = mlsi_ratio(&pair, &candidate).unwrap().unwrap();
        let b = mlsc_estimate(&pair, true, &cfg()).unwrap();
        assert!(b.upper.value <= r + 1e-9, "{} vs {r}", b.upper.value);
        assert!(mlsi_ratio(&pair, &[1.0, 1.0, 1.0]).unwrap().is_none());
    }

    #[test]
    fn bound_propagate_examples() {
        let one = one_step(0.3, 3);
        assert!(
            (bound_propagate(&one, true).unwrap()[&ConstantName::Delta].value - 1.0).abs() < 1e-12
        );

        let lc = bound_propagate(&lazy_complete(5), true).unwrap();
        let want = (1.0 - 0.4) * (5.0 / 8.0) / (4f64).ln();
        assert!((lc[&ConstantName::Rho].value - want).abs() < 1e-12);

        let p2 = three_state(100.0).power(2).unwrap();
        let b = bound_propagate(&p2, true).unwrap();
        assert!(b[&ConstantName::Delta].value >= 0.06);
    }

    #[test]
    fn poisson_tail_values() {
        assert_eq!(poisson_tail(0.0, 2), 0.0);
        let want = 1.0 - (-2f64).exp() * 3.0;
        assert!((poisson_tail(2.0, 2) - want).abs() < 1e-15);
        let small = poisson_tail(1e-3, 2);
        let approx = 1e-6 / 2.0 * (-1e-3f64).exp() * (1.0 + 1e-3 / 3.0);
        assert!((small - approx).abs() / approx < 1e-6);
        let mut prev = 0.0;
        for i in 0..50 {
            let v = poisson_tail(i as f64 * 0.2, 3);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn poisson_mixture_examples() {
        let pair = three_state(100.0);
        assert_eq!(poisson_mixture_bound(&pair, 0.0, 1).unwrap().value, 0.0);
        let b = poisson_mixture_bound(&pair, 2.0, 1).unwrap().value;
        let tv = eta_tv(pair.pi(), &power(pair.kernel(), 2).unwrap())
            .unwrap()
            .value;
        assert!((b - poisson_tail(2.0, 2) * (1.0 - tv)).abs() < 1e-15);
    }

    #[test]
    fn mlsi_residual_on_two_state() {
        for pi0 in [0.2, 0.35] {
            let pi = Distribution::new(vec![pi0, 1.0 - pi0]).unwrap();
            let c = 0.4;
            let p = Kernel::from_rows(vec![
                vec![1.0 - c * (1.0 - pi0), c * (1.0 - pi0)],
                vec![c * pi0, 1.0 - c * pi0],
            ])
            .unwrap();
            let pair = ReversiblePair::new(pi, p).unwrap();
            let b = mlsc_estimate(&pair, true, &cfg()).unwrap();
            let r = extremal_residuals(&pair, &b.upper).unwrap();
            assert!(r.accepted(), "{r:?}");
        }
    }

    #[test]
    fn spectral_limit_branch_needs_no_witness() {
        let pair = two_state(0.25);
        let lambda = poincare(&pair).unwrap().lambda();
        let est = ConstantEstimate::new(
            ConstantName::Rho0,
            2.0 * lambda,
            EstimateKind::OptimizerUpper,
            "limit",
        );
        let r = extremal_residuals(&pair, &est).unwrap();
        assert_eq!(r.branch, ExtremalBranch::SpectralLimit);
    }

    #[test]
    fn full_support_conditions() {
        let pi = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let positive = ReversiblePair::new(pi.clone(), Kernel::constant(3, &pi)).unwrap();
        assert_eq!(
            full_support_condition(&positive, &cfg()).unwrap(),
            FullSupport::StrictlyPositive
        );

        // (1 − ε)I + εΠ: lazy, with 1 − η_TV = ε small.
        let eps = 0.1;
        let rows = (0..3)
            .map(|x| {
                (0..3)
                    .map(|y| eps * pi.get(y) + if x == y { 1.0 - eps } else { 0.0 })
                    .collect()
            })
            .collect();
        let lazy = ReversiblePair::new(pi.clone(), Kernel::from_rows(rows).unwrap()).unwrap();
        assert!(1.0 - eta_tv(&pi, lazy.kernel()).unwrap().value < 0.5);
        assert_eq!(
            full_support_condition(&lazy, &cfg()).unwrap(),
            FullSupport::LazyAndLargeEta
        );

        let nonlazy = ReversiblePair::new(Distribution::uniform(3), nonlazy_complete(3)).unwrap();
        assert_eq!(
            full_support_condition(&nonlazy, &cfg()).unwrap(),
            FullSupport::Inconclusive
        );
    }

    fn fd_check<F: Fn(&[f64], &mut [f64]) -> f64>(f: F, u: &[f64]) -> f64 {
        let n = u.len();
        let mut g = vec![0.0; n];
        let _ = f(u, &mut g);
        let mut worst = 0.0f64;
        let mut scratch = vec![0.0; n];
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-8);
        for i in 0..n {
            let h = 1e-6;
            let mut up = u.to_vec();
            up[i] += h;
            let mut dn = u.to_vec();
            dn[i] -= h;
            let fd = (f(&up, &mut scratch) - f(&dn, &mut scratch)) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs() / gmax);
        }
        worst
    }

    #[test]
    fn objective_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pair = three_state(10.0);
        let k = nonlazy_complete(4);
        let kl = KlProblem::new(&Distribution::uniform(4), &k).unwrap();
        let lsi = SobolevProblem::new(&pair, SobolevKind::Lsi);
        let mlsi = SobolevProblem::new(&pair, SobolevKind::Mlsi);
        let active: Vec<usize> = (0..4).collect();
        for _ in 0..50 {
            let u4: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            assert!(fd_check(|x, g| kl.neg_ratio(&active, x, g), &u4) < 1e-5);
            let u3: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            assert!(fd_check(|x, g| lsi.ratio_grad(x, g), &u3) < 1e-5);
            assert!(fd_check(|x, g| mlsi.ratio_grad(x, g), &u3) < 1e-5);
        }
    }

    #[test]
    fn grid_oracle_agrees_with_optimizer_on_three_states() {
        let pair = three_state(10.0);
        let b = eta_kl_estimate(pair.pi(), pair.kernel(), &cfg()).unwrap();
        let g = eta_kl_grid_oracle(pair.pi(), pair.kernel(), &cfg()).unwrap();
        assert!(
            (b.lower.value - g.value).abs() < 1e-4,
            "{} vs {}",
            b.lower.value,
            g.value
        );
        let r = mlsc_estimate(&pair, true, &cfg()).unwrap();
        let rg = mlsc_grid_oracle(&pair, &cfg()).unwrap();
        assert!(
            (r.upper.value - rg.value).abs() < 1e-4,
            "{} vs {}",
            r.upper.value,
            rg.value
        );
    }

    #[test]
    fn config_validation() {
        let mut c = cfg();
        c.random_starts = 3;
        assert!(c.validate().is_err());
    }
}
