//! Divergences, entropy and variance functionals, the Dirichlet form, and the
//! scalar helper functions (binary entropy, binary KL, `f_n`, `g_n`).
//!
//! All logarithms are natural and `0·log 0 = 0` everywhere.

use serde::Serialize;

use crate::chain_core::{density, semigroup, Distribution, ReversiblePair};
use crate::error::{Error, Result};

/// A divergence value; `Infinite` is an explicit marker, never `f64::INFINITY`
/// produced by overflow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Divergence {
    Finite(f64),
    Infinite,
}

impl Divergence {
    pub fn finite(self) -> Option<f64> {
        match self {
            Divergence::Finite(v) => Some(v),
            Divergence::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Divergence::Finite(_))
    }

    /// Finite value, panicking on the marker. For tests and known-finite cases.
    pub fn unwrap(self) -> f64 {
        self.finite().expect("divergence is infinite")
    }
}

/// x log x with the 0 log 0 = 0 convention.
#[inline]
pub fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// φ(w) = w e^w − e^w + 1 ≥ 0, so that D(ν‖π) = Σ π φ(log(ν/π)) whenever
/// both sum to one. Accurate near w = 0, where the naive form cancels;
/// φ(−∞) = 1.
#[inline]
pub fn entropy_kernel(w: f64) -> f64 {
    if w == f64::NEG_INFINITY {
        1.0
    } else if w.abs() < 1e-3 {
        let w2 = w * w;
        w2 * (0.5 + w * (1.0 / 3.0 + w * (0.125 + w * (1.0 / 30.0 + w / 144.0))))
    } else {
        (w - 1.0) * w.exp_m1() + w
    }
}

/// Binary entropy h(x) = −x log x − (1−x) log(1−x).
pub fn binary_entropy(x: f64) -> f64 {
    -xlogx(x) - xlogx(1.0 - x)
}

/// Binary KL divergence d(x‖y).
pub fn binary_kl(x: f64, y: f64) -> Divergence {
    let term = |a: f64, b: f64| -> Option<f64> {
        if a <= 0.0 {
            Some(0.0)
        } else if b <= 0.0 {
            None
        } else {
            Some(a * (a / b).ln())
        }
    };
    match (term(x, y), term(1.0 - x, 1.0 - y)) {
        (Some(a), Some(b)) => Divergence::Finite(a + b),
        _ => Divergence::Infinite,
    }
}

/// `f_n(x) = D((x, (1−x)/(n−1), …) ‖ Unif([n])) = log n + x log x + (1−x) log((1−x)/(n−1))`.
#[inline]
pub fn f_n(n: u32, x: f64) -> f64 {
    debug_assert!(n >= 2);
    let nf = n as f64;
    let rest = 1.0 - x;
    let tail = if rest > 0.0 {
        rest * (rest / (nf - 1.0)).ln()
    } else {
        0.0
    };
    nf.ln() + xlogx(x) + tail
}

/// `g_n(u) = −(1−u) log(1−u) − u log(u/n)`.
pub fn g_n(n: u32, u: f64) -> f64 {
    let a = -xlogx(1.0 - u);
    let b = if u > 0.0 {
        -u * (u / n as f64).ln()
    } else {
        0.0
    };
    a + b
}

fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}

/// D(ν‖μ).
pub fn kl(nu: &Distribution, mu: &Distribution) -> Result<Divergence> {
    check_len("kl", mu.len(), nu.len())?;
    let mut sum = 0.0;
    for (a, b) in nu.weights().iter().zip(mu.weights()) {
        if *a > 0.0 {
            if *b <= 0.0 {
                return Ok(Divergence::Infinite);
            }
            sum += a * (a / b).ln();
        }
    }
    Ok(Divergence::Finite(sum.max(0.0)))
}

/// χ²(ν‖μ) = Σ (ν − μ)² / μ.
pub fn chi2_div(nu: &Distribution, mu: &Distribution) -> Result<Divergence> {
    check_len("chi2", mu.len(), nu.len())?;
    let mut sum = 0.0;
    for (a, b) in nu.weights().iter().zip(mu.weights()) {
        if *b <= 0.0 {
            if *a > 0.0 {
                return Ok(Divergence::Infinite);
            }
            continue;
        }
        sum += (a - b) * (a - b) / b;
    }
    Ok(Divergence::Finite(sum))
}

/// Total variation, half the L1 distance.
pub fn tv(nu: &Distribution, mu: &Distribution) -> Result<f64> {
    check_len("tv", mu.len(), nu.len())?;
    Ok(tv_slices(nu.weights(), mu.weights()))
}

pub(crate) fn tv_slices(a: &[f64], b: &[f64]) -> f64 {
    let l1: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    (0.5 * l1).min(1.0)
}

/// Ent_π(f) = π[f log(f / π[f])].
pub fn entropy_functional(pi: &Distribution, f: &[f64]) -> Result<f64> {
    check_len("entropy", pi.len(), f.len())?;
    let mean = pi.expect(f);
    if !(mean > 0.0) {
        return Err(Error::Degenerate(
            "entropy of a function with zero mean".into(),
        ));
    }
    let s: f64 = pi
        .weights()
        .iter()
        .zip(f)
        .filter(|(p, v)| **p > 0.0 && **v > 0.0)
        .map(|(p, v)| p * v * (v / mean).ln())
        .sum();
    Ok(s.max(0.0))
}

/// Var_π(f) = π[f²] − π[f]², evaluated as π[(f − π[f])²].
pub fn variance_functional(pi: &Distribution, f: &[f64]) -> Result<f64> {
    check_len("variance", pi.len(), f.len())?;
    let mean = pi.expect(f);
    Ok(pi
        .weights()
        .iter()
        .zip(f)
        .map(|(p, v)| p * (v - mean) * (v - mean))
        .sum())
}

/// E(f, g) = −π[f · Lg] with L = P − I.
pub fn dirichlet_form(pair: &ReversiblePair, f: &[f64], g: &[f64]) -> Result<f64> {
    let n = pair.len();
    check_len("dirichlet form", n, f.len())?;
    check_len("dirichlet form", n, g.len())?;
    let pg = pair.kernel().apply(g);
    Ok((0..n)
        .map(|x| {
            let p = pair.pi().get(x);
            if *p == 0.0 || f[x] == 0.0 {
                0.0
            } else {
                p * f[x] * (g[x] - pg[x])
            }
        })
        .sum())
}

/// E(f, g) as the edge sum ½ Σ π(x)P(x,y)(f(x)−f(y))(g(x)−g(y)); equal to
/// [`dirichlet_form`] on reversible pairs and free of cancellation.
pub fn dirichlet_form_edges(pair: &ReversiblePair, f: &[f64], g: &[f64]) -> f64 {
    let n = pair.len();
    let mut s = 0.0;
    for x in 0..n {
        let px = *pair.pi().get(x);
        if px == 0.0 {
            continue;
        }
        for (y, pxy) in pair.kernel().row(x).iter().enumerate().skip(x + 1) {
            if *pxy > 0.0 {
                s += px * pxy * (f[x] - f[y]) * (g[x] - g[y]);
            }
        }
    }
    s
}

/// How a decay derivative was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DerivativeMethod {
    /// −E(f_t, log f_t) evaluated directly.
    Analytic,
    /// f_t vanishes somewhere (only possible at t = 0); forward difference.
    OneSidedDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayDerivative {
    pub value: f64,
    pub method: DerivativeMethod,
}

const ONE_SIDED_STEP: f64 = 1e-6;

fn evolved_density(pair: &ReversiblePair, nu: &Distribution, t: f64) -> Result<Vec<f64>> {
    let tt = semigroup(pair.kernel(), t)?;
    let nu_t = nu.push_forward(&tt)?;
    Ok(density(&nu_t, pair.pi())?.into_values())
}

/// Ent_π(d(νT_t)/dπ).
pub fn entropy_at(pair: &ReversiblePair, nu: &Distribution, t: f64) -> Result<f64> {
    entropy_functional(pair.pi(), &evolved_density(pair, nu, t)?)
}

/// Var_π(d(νT_t)/dπ).
pub fn variance_at(pair: &ReversiblePair, nu: &Distribution, t: f64) -> Result<f64> {
    variance_functional(pair.pi(), &evolved_density(pair, nu, t)?)
}

/// d/dt Ent_π(f_t) = −E(f_t, log f_t).
pub fn entropy_decay_derivative(
    pair: &ReversiblePair,
    nu: &Distribution,
    t: f64,
) -> Result<DecayDerivative> {
    check_len("decay derivative", pair.len(), nu.len())?;
    density(nu, pair.pi())?;
    let f = evolved_density(pair, nu, t)?;
    let on_support = |x: usize| *pair.pi().get(x) > 0.0;
    if (0..f.len()).any(|x| on_support(x) && f[x] <= 0.0) {
        let e0 = entropy_at(pair, nu, t)?;
        let e1 = entropy_at(pair, nu, t + ONE_SIDED_STEP)?;
        return Ok(DecayDerivative {
            value: (e1 - e0) / ONE_SIDED_STEP,
            method: DerivativeMethod::OneSidedDifference,
        });
    }
    let logf: Vec<f64> = f
        .iter()
        .enumerate()
        .map(|(x, v)| if on_support(x) { v.ln() } else { 0.0 })
        .collect();
    Ok(DecayDerivative {
        value: -dirichlet_form_edges(pair, &f, &logf),
        method: DerivativeMethod::Analytic,
    })
}

/// d/dt Var_π(f_t) = −2 E(f_t, f_t).
pub fn variance_decay_derivative(pair: &ReversiblePair, nu: &Distribution, t: f64) -> Result<f64> {
    check_len("decay derivative", pair.len(), nu.len())?;
    let f = evolved_density(pair, nu, t)?;
    Ok(-2.0 * dirichlet_form_edges(pair, &f, &f))
}
