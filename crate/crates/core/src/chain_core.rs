//! Finite state spaces, distributions, Markov kernels and their algebra.
//!
//! Everything here is generic over a [`Scalar`] so the same constructors can
//! run in `f64` (for the optimizers) or in exact rationals (for the
//! factorization and coupling identities, which hold exactly).

use std::fmt;
use std::ops::{Add, Div, Mul, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational probabilities.
pub type Exact = BigRational;

/// Numerical tolerances shared by validation code and property tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub distribution_sum: f64,
    pub kernel_row_sum: f64,
    pub stationarity: f64,
    pub detailed_balance: f64,
    pub semigroup_row_sum: f64,
    pub semigroup_truncation: f64,
}

pub const TOL: Tolerances = Tolerances {
    distribution_sum: 1e-12,
    kernel_row_sum: 1e-12,
    stationarity: 1e-10,
    detailed_balance: 1e-10,
    semigroup_row_sum: 1e-10,
    semigroup_truncation: 1e-12,
};

pub trait Scalar:
    Clone
    + PartialEq
    + PartialOrd
    + fmt::Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Send
    + Sync
{
    fn to_f64(&self) -> f64;
    /// Equality up to `tol`; exact scalars ignore the tolerance.
    fn approx_eq(&self, other: &Self, tol: f64) -> bool;
    fn from_usize(n: usize) -> Self;
    /// The value of a finite float; exact scalars take its exact binary value.
    fn from_f64(x: f64) -> Self;
}

impl Scalar for f64 {
    fn to_f64(&self) -> f64 {
        *self
    }
    fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (self - other).abs() <= tol
    }
    fn from_usize(n: usize) -> Self {
        n as f64
    }
    fn from_f64(x: f64) -> Self {
        x
    }
}

impl Scalar for BigRational {
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn approx_eq(&self, other: &Self, _tol: f64) -> bool {
        self == other
    }
    fn from_usize(n: usize) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).unwrap_or_else(BigRational::zero)
    }
}

/// `p/q` as an exact rational.
pub fn ratio(p: i64, q: i64) -> Exact {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

/// The exact binary value of a float.
pub fn exact_from_f64(x: f64) -> Result<Exact> {
    BigRational::from_float(x).ok_or_else(|| Error::InvalidParameter(format!("{x} is not finite")))
}

/// A probability vector over `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<T: Scalar = f64> {
    weights: Vec<T>,
}

impl<T: Scalar> Distribution<T> {
    pub fn new(weights: Vec<T>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("empty state space".into()));
        }
        let mut sum = T::zero();
        for (i, w) in weights.iter().enumerate() {
            if w.to_f64().is_nan() || *w < T::zero() {
                return Err(Error::InvalidDistribution(format!("weight {i} is {w:?}")));
            }
            sum = sum + w.clone();
        }
        if !sum.approx_eq(&T::one(), TOL.distribution_sum) {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {}",
                sum.to_f64()
            )));
        }
        Ok(Self { weights })
    }

    pub(crate) fn new_unchecked(weights: Vec<T>) -> Self {
        Self { weights }
    }

    pub fn uniform(n: usize) -> Self {
        let w = T::one() / T::from_usize(n);
        Self {
            weights: vec![w; n],
        }
    }

    pub fn point_mass(n: usize, x: usize) -> Self {
        let mut weights = vec![T::zero(); n];
        weights[x] = T::one();
        Self { weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn get(&self, x: usize) -> &T {
        &self.weights[x]
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.weights[i] > T::zero())
            .collect()
    }

    /// Smallest positive weight.
    pub fn min_positive(&self) -> T {
        self.weights
            .iter()
            .filter(|w| **w > T::zero())
            .fold(None::<T>, |acc, w| match acc {
                Some(a) if a <= *w => Some(a),
                _ => Some(w.clone()),
            })
            .unwrap_or_else(T::zero)
    }

    pub fn to_f64(&self) -> Distribution<f64> {
        Distribution {
            weights: self.weights.iter().map(Scalar::to_f64).collect(),
        }
    }

    /// νK.
    pub fn push_forward(&self, k: &Kernel<T>) -> Result<Distribution<T>> {
        if k.n_in() != self.len() {
            return Err(Error::DimensionMismatch {
                context: "push_forward",
                expected: k.n_in(),
                found: self.len(),
            });
        }
        let mut out = vec![T::zero(); k.n_out()];
        for (x, w) in self.weights.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            for (y, o) in out.iter_mut().enumerate() {
                let kxy = k.get(x, y);
                if !kxy.is_zero() {
                    *o = o.clone() + w.clone() * kxy.clone();
                }
            }
        }
        Ok(Distribution { weights: out })
    }
}

impl Distribution<f64> {
    /// Expectation π[f].
    pub fn expect(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }
}

/// A row-stochastic matrix from `0..n_in` to `0..n_out`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel<T: Scalar = f64> {
    n_in: usize,
    n_out: usize,
    data: Vec<T>,
}

impl<T: Scalar> Kernel<T> {
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let n_in = rows.len();
        if n_in == 0 {
            return Err(Error::InvalidKernel("no rows".into()));
        }
        let n_out = rows[0].len();
        if n_out == 0 {
            return Err(Error::InvalidKernel("empty output space".into()));
        }
        let mut data = Vec::with_capacity(n_in * n_out);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n_out {
                return Err(Error::DimensionMismatch {
                    context: "kernel row",
                    expected: n_out,
                    found: row.len(),
                });
            }
            let mut sum = T::zero();
            for (j, v) in row.iter().enumerate() {
                if v.to_f64().is_nan() || *v < T::zero() {
                    return Err(Error::InvalidKernel(format!("entry ({i},{j}) is {v:?}")));
                }
                sum = sum + v.clone();
            }
            if !sum.approx_eq(&T::one(), TOL.kernel_row_sum) {
                return Err(Error::InvalidKernel(format!(
                    "row {i} sums to {}",
                    sum.to_f64()
                )));
            }
            data.extend(row);
        }
        Ok(Self { n_in, n_out, data })
    }

    pub(crate) fn from_flat_unchecked(n_in: usize, n_out: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), n_in * n_out);
        Self { n_in, n_out, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![T::zero(); n * n];
        for i in 0..n {
            data[i * n + i] = T::one();
        }
        Self {
            n_in: n,
            n_out: n,
            data,
        }
    }

    /// Every row equal to `row` (the one-step kernel when `row = π`).
    pub fn constant(n_in: usize, row: &Distribution<T>) -> Self {
        let mut data = Vec::with_capacity(n_in * row.len());
        for _ in 0..n_in {
            data.extend(row.weights().iter().cloned());
        }
        Self {
            n_in,
            n_out: row.len(),
            data,
        }
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn is_square(&self) -> bool {
        self.n_in == self.n_out
    }

    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[x * self.n_out + y]
    }

    pub fn row(&self, x: usize) -> &[T] {
        &self.data[x * self.n_out..(x + 1) * self.n_out]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks(self.n_out)
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.rows().map(<[T]>::to_vec).collect()
    }

    pub fn to_f64(&self) -> Kernel<f64> {
        Kernel {
            n_in: self.n_in,
            n_out: self.n_out,
            data: self.data.iter().map(Scalar::to_f64).collect(),
        }
    }

    /// Kg for a function g on the output space.
    pub fn apply(&self, g: &[T]) -> Vec<T> {
        assert_eq!(g.len(), self.n_out, "function length must match n_out");
        self.rows()
            .map(|row| {
                row.iter().zip(g).fold(T::zero(), |acc, (k, v)| {
                    if k.is_zero() {
                        acc
                    } else {
                        acc + k.clone() * v.clone()
                    }
                })
            })
            .collect()
    }

    /// Largest absolute row-sum defect.
    pub fn row_sum_residual(&self) -> f64 {
        self.rows()
            .map(|r| {
                let s = r.iter().fold(T::zero(), |a, v| a + v.clone());
                (s.to_f64() - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Matrix product K∘L of kernels X→Y and Y→Z.
pub fn compose<T: Scalar>(k: &Kernel<T>, l: &Kernel<T>) -> Result<Kernel<T>> {
    if k.n_out != l.n_in {
        return Err(Error::DimensionMismatch {
            context: "compose",
            expected: k.n_out,
            found: l.n_in,
        });
    }
    let mut data = vec![T::zero(); k.n_in * l.n_out];
    for x in 0..k.n_in {
        let out = &mut data[x * l.n_out..(x + 1) * l.n_out];
        for (y, kxy) in k.row(x).iter().enumerate() {
            if kxy.is_zero() {
                continue;
            }
            for (z, lyz) in l.row(y).iter().enumerate() {
                if !lyz.is_zero() {
                    out[z] = out[z].clone() + kxy.clone() * lyz.clone();
                }
            }
        }
    }
    Ok(Kernel::from_flat_unchecked(k.n_in, l.n_out, data))
}

/// P^m by repeated squaring.
pub fn power<T: Scalar>(p: &Kernel<T>, m: u32) -> Result<Kernel<T>> {
    if !p.is_square() {
        return Err(Error::InvalidKernel("power of a non-square kernel".into()));
    }
    let mut result = Kernel::identity(p.n_in);
    let mut base = p.clone();
    let mut e = m;
    while e > 0 {
        if e & 1 == 1 {
            result = compose(&result, &base)?;
        }
        e >>= 1;
        if e > 0 {
            base = compose(&base, &base)?;
        }
    }
    Ok(result)
}

/// The reverse channel K*_π : Y → X.
///
/// `K*(y, x) = π(x) K(x, y) / (πK)(y)`, and rows with `(πK)(y) = 0` are set
/// to π.
pub fn reverse_kernel<T: Scalar>(pi: &Distribution<T>, k: &Kernel<T>) -> Result<Kernel<T>> {
    let out_mass = pi.push_forward(k)?;
    let (nx, ny) = (k.n_in, k.n_out);
    let mut data = vec![T::zero(); ny * nx];
    for y in 0..ny {
        let mass = out_mass.get(y);
        let row = &mut data[y * nx..(y + 1) * nx];
        if mass.is_zero() {
            row.clone_from_slice(pi.weights());
        } else {
            for (x, r) in row.iter_mut().enumerate() {
                let kxy = k.get(x, y);
                if !kxy.is_zero() && !pi.get(x).is_zero() {
                    *r = pi.get(x).clone() * kxy.clone() / mass.clone();
                }
            }
        }
    }
    Ok(Kernel::from_flat_unchecked(ny, nx, data))
}

/// Number of Taylor terms in the scaled uniformization series. With the time
/// step capped at 1/2 the neglected Poisson tail is below 1e-22 per entry.
const SEMIGROUP_TERMS: usize = 20;
const SEMIGROUP_MAX_STEP: f64 = 0.5;

/// The heat semigroup T_t = exp(t(P − I)).
///
/// Computed as `(e^{-τ} Σ_j τ^j P^j / j!)^(2^s)` with `τ = t / 2^s ≤ 1/2`.
/// Every term is entrywise nonnegative, so there is no cancellation; the
/// truncated tail is below 1e-22 and the `s` squarings amplify it by at most
/// `2^s`, keeping the total truncation error under 1e-12 for `t ≤ 10^8`.
pub fn semigroup(p: &Kernel<f64>, t: f64) -> Result<Kernel<f64>> {
    if !p.is_square() {
        return Err(Error::InvalidKernel(
            "semigroup of a non-square kernel".into(),
        ));
    }
    if t.is_nan() || t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let n = p.n_in;
    if t == 0.0 {
        return Ok(Kernel::identity(n));
    }
    let mut squarings = 0u32;
    let mut tau = t;
    while tau > SEMIGROUP_MAX_STEP {
        tau /= 2.0;
        squarings += 1;
    }
    // Horner: S = I + τ/1 P (I + τ/2 P (... (I + τ/N P))).
    let mut s = Kernel::identity(n);
    for j in (1..=SEMIGROUP_TERMS).rev() {
        let ps = compose(p, &s)?;
        let c = tau / j as f64;
        let mut data = ps.data;
        for v in data.iter_mut() {
            *v *= c;
        }
        for i in 0..n {
            data[i * n + i] += 1.0;
        }
        s = Kernel::from_flat_unchecked(n, n, data);
    }
    let scale = (-tau).exp();
    for v in s.data.iter_mut() {
        *v *= scale;
    }
    for _ in 0..squarings {
        s = compose(&s, &s)?;
    }
    Ok(s)
}

/// A stationary, reversible pair (π, P).
#[derive(Debug, Clone, PartialEq)]
pub struct ReversiblePair<T: Scalar = f64> {
    pi: Distribution<T>,
    p: Kernel<T>,
}

impl<T: Scalar> ReversiblePair<T> {
    pub fn new(pi: Distribution<T>, p: Kernel<T>) -> Result<Self> {
        if !p.is_square() || p.n_in != pi.len() {
            return Err(Error::DimensionMismatch {
                context: "reversible pair",
                expected: pi.len(),
                found: p.n_in,
            });
        }
        let n = pi.len();
        let pushed = pi.push_forward(&p)?;
        for x in 0..n {
            if !pushed.get(x).approx_eq(pi.get(x), TOL.stationarity) {
                return Err(Error::NotReversible(format!(
                    "πP ≠ π at state {x}: {} vs {}",
                    pushed.get(x).to_f64(),
                    pi.get(x).to_f64()
                )));
            }
        }
        for x in 0..n {
            for y in (x + 1)..n {
                let a = pi.get(x).clone() * p.get(x, y).clone();
                let b = pi.get(y).clone() * p.get(y, x).clone();
                if !a.approx_eq(&b, TOL.detailed_balance) {
                    return Err(Error::NotReversible(format!(
                        "detailed balance fails at ({x},{y})"
                    )));
                }
            }
        }
        Ok(Self { pi, p })
    }

    pub fn pi(&self) -> &Distribution<T> {
        &self.pi
    }

    pub fn kernel(&self) -> &Kernel<T> {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn to_f64(&self) -> ReversiblePair<f64> {
        ReversiblePair {
            pi: self.pi.to_f64(),
            p: self.p.to_f64(),
        }
    }

    /// (π, P^m); reversibility is preserved by powers.
    pub fn power(&self, m: u32) -> Result<Self> {
        Ok(Self {
            pi: self.pi.clone(),
            p: power(&self.p, m)?,
        })
    }

    /// True when P(x, x) ≥ 1/2 for every state.
    pub fn is_lazy(&self) -> bool {
        let half = T::one() / T::from_usize(2);
        (0..self.len()).all(|x| *self.p.get(x, x) >= half)
    }
}

impl ReversiblePair<f64> {
    pub fn semigroup(&self, t: f64) -> Result<Self> {
        Ok(Self {
            pi: self.pi.clone(),
            p: semigroup(&self.p, t)?,
        })
    }
}

/// Residuals of the pair invariants; reporting only.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Diagnostics {
    pub distribution_sum_residual: f64,
    pub min_pi: f64,
    pub row_sum_residual: f64,
    pub min_entry: f64,
    pub stationarity_residual: f64,
    pub detailed_balance_residual: f64,
}

impl Diagnostics {
    pub fn is_stationary(&self) -> bool {
        self.stationarity_residual <= TOL.stationarity
    }

    pub fn is_reversible(&self) -> bool {
        self.detailed_balance_residual <= TOL.detailed_balance
    }

    pub fn is_valid(&self) -> bool {
        self.distribution_sum_residual <= TOL.distribution_sum
            && self.min_pi >= 0.0
            && self.row_sum_residual <= TOL.kernel_row_sum
            && self.min_entry >= 0.0
            && self.is_stationary()
            && self.is_reversible()
    }
}

/// Per-invariant residuals for an arbitrary (π, P), valid or not.
pub fn validate<T: Scalar>(pi: &Distribution<T>, p: &Kernel<T>) -> Result<Diagnostics> {
    if !p.is_square() || p.n_in() != pi.len() {
        return Err(Error::DimensionMismatch {
            context: "validate",
            expected: pi.len(),
            found: p.n_in(),
        });
    }
    let n = pi.len();
    let pi64: Vec<f64> = pi.weights().iter().map(Scalar::to_f64).collect();
    let sum_res = (pi
        .weights()
        .iter()
        .fold(T::zero(), |a, w| a + w.clone())
        .to_f64()
        - 1.0)
        .abs();
    let pushed = pi.push_forward(p)?;
    let stationarity = (0..n)
        .map(|x| (pushed.get(x).clone() - pi.get(x).clone()).to_f64().abs())
        .fold(0.0, f64::max);
    let mut balance = 0.0f64;
    for x in 0..n {
        for y in (x + 1)..n {
            let a = pi.get(x).clone() * p.get(x, y).clone();
            let b = pi.get(y).clone() * p.get(y, x).clone();
            balance = balance.max((a - b).to_f64().abs());
        }
    }
    Ok(Diagnostics {
        distribution_sum_residual: sum_res,
        min_pi: pi64.iter().copied().fold(f64::INFINITY, f64::min),
        row_sum_residual: p.row_sum_residual(),
        min_entry: p
            .rows()
            .flat_map(|r| r.iter().map(Scalar::to_f64))
            .fold(f64::INFINITY, f64::min),
        stationarity_residual: stationarity,
        detailed_balance_residual: balance,
    })
}

/// A nonnegative function on the state space, typically dν/dπ.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityFunction {
    values: Vec<f64>,
}

impl DensityFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "density value {i} is {}",
                values[i]
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Rescale so that π[f] = 1.
    pub fn normalized(&self, pi: &Distribution) -> Result<Self> {
        let mean = pi.expect(&self.values);
        if !(mean > 0.0) {
            return Err(Error::Degenerate("density has zero mean".into()));
        }
        Ok(Self {
            values: self.values.iter().map(|v| v / mean).collect(),
        })
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// dν/dπ, zero off the support of π.
pub fn density(nu: &Distribution, pi: &Distribution) -> Result<DensityFunction> {
    if nu.len() != pi.len() {
        return Err(Error::DimensionMismatch {
            context: "density",
            expected: pi.len(),
            found: nu.len(),
        });
    }
    let mut values = vec![0.0; pi.len()];
    for x in 0..pi.len() {
        let (a, b) = (*nu.get(x), *pi.get(x));
        if b > 0.0 {
            values[x] = a / b;
        } else if a > 0.0 {
            return Err(Error::NotAbsolutelyContinuous(x));
        }
    }
    DensityFunction::new(values)
}

/// The distribution with density `f` against π: ν(x) = π(x) f(x) / π[f].
pub fn distribution_from_density(pi: &Distribution, f: &[f64]) -> Result<Distribution> {
    let mean = pi.expect(f);
    if !(mean > 0.0) {
        return Err(Error::Degenerate("density has zero mean".into()));
    }
    let weights = pi
        .weights()
        .iter()
        .zip(f)
        .map(|(p, v)| p * v / mean)
        .collect();
    Ok(Distribution::new_unchecked(weights))
}
