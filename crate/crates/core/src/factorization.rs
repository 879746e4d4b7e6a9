//! Factorizations P = KK*_π: constructors for lazy chains, the complete
//! graph and block dynamics, convex mixing, the PSD necessary condition, and
//! Sinkhorn scaling.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::chain_core::{compose, reverse_kernel, Distribution, Kernel, ReversiblePair, Scalar};
use crate::error::{Error, Result};

/// A kernel K: X → Y together with its reverse channel K*_π: Y → X.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization<T: Scalar = f64> {
    pi: Distribution<T>,
    k: Kernel<T>,
    kstar: Kernel<T>,
    /// Human-readable names of the output symbols.
    pub output_labels: Vec<String>,
    /// Closed-form α(π, K), when known.
    pub closed_form_alpha: Option<f64>,
}

impl<T: Scalar> Factorization<T> {
    pub fn new(pi: Distribution<T>, k: Kernel<T>, output_labels: Vec<String>) -> Result<Self> {
        if output_labels.len() != k.n_out() {
            return Err(Error::DimensionMismatch {
                context: "factorization labels",
                expected: k.n_out(),
                found: output_labels.len(),
            });
        }
        let kstar = reverse_kernel(&pi, &k)?;
        Ok(Self {
            pi,
            k,
            kstar,
            output_labels,
            closed_form_alpha: None,
        })
    }

    pub fn pi(&self) -> &Distribution<T> {
        &self.pi
    }

    pub fn k(&self) -> &Kernel<T> {
        &self.k
    }

    pub fn kstar(&self) -> &Kernel<T> {
        &self.kstar
    }

    /// KK*_π.
    pub fn product(&self) -> Result<Kernel<T>> {
        compose(&self.k, &self.kstar)
    }

    /// max |KK* − P| entrywise; exactly zero in rational mode when P = KK*.
    pub fn product_residual(&self, p: &Kernel<T>) -> Result<f64> {
        let prod = self.product()?;
        if prod.n_in() != p.n_in() || prod.n_out() != p.n_out() {
            return Err(Error::DimensionMismatch {
                context: "product residual",
                expected: prod.n_in(),
                found: p.n_in(),
            });
        }
        let mut worst = 0.0f64;
        for x in 0..p.n_in() {
            for y in 0..p.n_out() {
                let a = prod.get(x, y).clone();
                let b = p.get(x, y).clone();
                let d = if a >= b { a - b } else { b - a };
                worst = worst.max(d.to_f64());
            }
        }
        Ok(worst)
    }

    /// K* equals reverse_kernel(π, K) entrywise (holds by construction).
    pub fn kstar_consistent(&self) -> bool {
        reverse_kernel(&self.pi, &self.k).is_ok_and(|r| r == self.kstar)
    }

    pub fn to_f64(&self) -> Factorization<f64> {
        Factorization {
            pi: self.pi.to_f64(),
            k: self.k.to_f64(),
            kstar: self.kstar.to_f64(),
            output_labels: self.output_labels.clone(),
            closed_form_alpha: self.closed_form_alpha,
        }
    }
}

fn subset_label(s: &[usize]) -> String {
    let inner: Vec<String> = s.iter().map(|x| x.to_string()).collect();
    format!("{{{}}}", inner.join(","))
}

/// Factorization of a lazy chain: Y = singletons ∪ pairs, with
/// K(x,{x}) = 2P(x,x) − 1 and K(x,{x,y}) = 2P(x,y). Then K*(e,·) is uniform
/// on e and KK* = P.
pub fn lazy_factorize<T: Scalar>(pair: &ReversiblePair<T>) -> Result<Factorization<T>> {
    let n = pair.len();
    let p = pair.kernel();
    let two = T::from_usize(2);
    let half = T::one() / two.clone();
    for x in 0..n {
        if *p.get(x, x) < half {
            return Err(Error::NotLazy {
                state: x,
                diagonal: p.get(x, x).to_f64(),
            });
        }
    }
    let mut outputs: Vec<Vec<usize>> = (0..n).map(|x| vec![x]).collect();
    for x in 0..n {
        for y in (x + 1)..n {
            outputs.push(vec![x, y]);
        }
    }
    let rows: Vec<Vec<T>> = (0..n)
        .map(|x| {
            outputs
                .iter()
                .map(|e| match e.as_slice() {
                    [a] if *a == x => two.clone() * p.get(x, x).clone() - T::one(),
                    [a, b] if *a == x => two.clone() * p.get(x, *b).clone(),
                    [a, b] if *b == x => two.clone() * p.get(x, *a).clone(),
                    _ => T::zero(),
                })
                .collect()
        })
        .collect();
    let k = Kernel::from_rows(rows)?;
    let labels = outputs.iter().map(|e| subset_label(e)).collect();
    Factorization::new(pair.pi().clone(), k, labels)
}

/// All `size`-subsets of 0..n in lexicographic order.
pub fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(size);
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for x in start..n {
            if n - x < size - cur.len() {
                break;
            }
            cur.push(x);
            rec(x + 1, n, size, cur, out);
            cur.pop();
        }
    }
    rec(0, n, size, &mut cur, &mut out);
    out
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

/// α(π, K(ℓ)) = ℓ log ℓ / (2(ℓ−1) log n).
pub fn complete_graph_alpha(n: usize, l: usize) -> f64 {
    let (n, l) = (n as f64, l as f64);
    l * l.ln() / (2.0 * (l - 1.0) * n.ln())
}

/// The factorization K(ℓ) of the lazy walk on the complete graph K_n:
/// K(x,{x}) = (ℓ−2)/(2(ℓ−1)) and K(x,S) = ℓ/(2(ℓ−1)C(n−1,ℓ−1)) for every
/// ℓ-set S ∋ x. Outputs are the singletons followed by the ℓ-subsets.
pub fn complete_graph_factor<T: Scalar>(n: usize, l: usize) -> Result<Factorization<T>> {
    if !(2..=n).contains(&l) {
        return Err(Error::InvalidParameter(format!(
            "need 2 ≤ ℓ ≤ n, got ℓ = {l}, n = {n}"
        )));
    }
    if binomial(n, l) > 200_000 {
        return Err(Error::ResourceCap(format!("C({n},{l}) output symbols")));
    }
    let sets = subsets(n, l);
    let lt = T::from_usize(l);
    let two = T::from_usize(2);
    let single = (lt.clone() - two.clone()) / (two.clone() * (lt.clone() - T::one()));
    let choose = T::from_usize(binomial(n - 1, l - 1) as usize);
    let multi = lt.clone() / (two * (lt - T::one()) * choose);
    let rows = (0..n)
        .map(|x| {
            let mut row: Vec<T> = (0..n)
                .map(|y| if y == x { single.clone() } else { T::zero() })
                .collect();
            row.extend(sets.iter().map(|s| {
                if s.contains(&x) {
                    multi.clone()
                } else {
                    T::zero()
                }
            }));
            row
        })
        .collect();
    let mut labels: Vec<String> = (0..n).map(|x| subset_label(&[x])).collect();
    labels.extend(sets.iter().map(|s| subset_label(s)));
    let mut f = Factorization::new(Distribution::uniform(n), Kernel::from_rows(rows)?, labels)?;
    f.closed_form_alpha = Some(complete_graph_alpha(n, l));
    Ok(f)
}

/// Factorization of (1 − t)P₀ + tP₁ over the disjoint union of the two
/// output alphabets: K_t = ((1 − t)K₀ | tK₁).
pub fn mix_factorizations<T: Scalar>(
    f0: &Factorization<T>,
    f1: &Factorization<T>,
    t: T,
) -> Result<Factorization<T>> {
    if f0.pi != f1.pi {
        return Err(Error::InvalidParameter(
            "mixed factorizations must share π".into(),
        ));
    }
    if t < T::zero() || t > T::one() {
        return Err(Error::InvalidParameter(format!(
            "mixing weight {} outside [0, 1]",
            t.to_f64()
        )));
    }
    let s = T::one() - t.clone();
    let rows = (0..f0.k.n_in())
        .map(|x| {
            let mut row: Vec<T> = f0.k.row(x).iter().map(|v| s.clone() * v.clone()).collect();
            row.extend(f1.k.row(x).iter().map(|v| t.clone() * v.clone()));
            row
        })
        .collect();
    let mut labels: Vec<String> = f0.output_labels.iter().map(|l| format!("0:{l}")).collect();
    labels.extend(f1.output_labels.iter().map(|l| format!("1:{l}")));
    Factorization::new(f0.pi.clone(), Kernel::from_rows(rows)?, labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsdReport {
    pub psd: bool,
    pub min_eigenvalue: f64,
}

/// Tolerance on the smallest eigenvalue of Diag(π)P.
pub const PSD_TOL: f64 = 1e-10;

/// Whether Diag(π)P is positive semidefinite; a `false` result certifies that
/// (π, P) is not factorizable.
pub fn psd_check(pair: &ReversiblePair) -> PsdReport {
    let n = pair.len();
    let pi = pair.pi();
    let p = pair.kernel();
    let m = DMatrix::from_fn(n, n, |i, j| {
        0.5 * (pi.get(i) * p.get(i, j) + pi.get(j) * p.get(j, i))
    });
    let min = SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    PsdReport {
        psd: min >= -PSD_TOL,
        min_eigenvalue: min,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SinkhornResult {
    /// D_r A D_c.
    pub scaled: Vec<Vec<f64>>,
    pub row_scaling: Vec<f64>,
    pub col_scaling: Vec<f64>,
    pub iterations: usize,
}

impl SinkhornResult {
    /// For symmetric A the single diagonal D = (D_r D_c)^{1/2} gives a
    /// symmetric doubly stochastic DAD.
    pub fn symmetric_scaling(&self) -> Vec<f64> {
        self.row_scaling
            .iter()
            .zip(&self.col_scaling)
            .map(|(r, c)| (r * c).sqrt())
            .collect()
    }
}

pub const SINKHORN_MAX_ITERS: usize = 100_000;

fn sums_residual(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        worst = worst.max((a[i].iter().sum::<f64>() - 1.0).abs());
        worst = worst.max(((0..n).map(|r| a[r][i]).sum::<f64>() - 1.0).abs());
    }
    worst
}

/// Alternate row and column normalization of a strictly positive square
/// matrix until all row and column sums are within `tol` of 1.
pub fn sinkhorn(a: &[Vec<f64>], tol: f64) -> Result<SinkhornResult> {
    let n = a.len();
    if n == 0 || a.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidParameter(
            "sinkhorn needs a non-empty square matrix".into(),
        ));
    }
    if a.iter().flatten().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "sinkhorn needs strictly positive entries".into(),
        ));
    }
    let mut r = vec![1.0; n];
    let mut c = vec![1.0; n];
    let scaled = |r: &[f64], c: &[f64]| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..n).map(|j| r[i] * a[i][j] * c[j]).collect())
            .collect()
    };
    let mut iterations = 0;
    let mut cur = scaled(&r, &c);
    while sums_residual(&cur) > tol {
        if iterations == SINKHORN_MAX_ITERS {
            return Err(Error::NoConvergence(format!(
                "sinkhorn after {iterations} iterations"
            )));
        }
        iterations += 1;
        for i in 0..n {
            let s: f64 = (0..n).map(|j| a[i][j] * c[j]).sum();
            r[i] = 1.0 / s;
        }
        for j in 0..n {
            let s: f64 = (0..n).map(|i| r[i] * a[i][j]).sum();
            c[j] = 1.0 / s;
        }
        cur = scaled(&r, &c);
    }
    Ok(SinkhornResult {
        scaled: cur,
        row_scaling: r,
        col_scaling: c,
        iterations,
    })
}

/// Configurations of [q]^n are indexed by Σ σ_i q^i.
pub fn decode_config(q: usize, n: usize, mut index: usize) -> Vec<usize> {
    (0..n)
        .map(|_| {
            let s = index % q;
            index /= q;
            s
        })
        .collect()
}

/// Glauber weights: each single site with probability 1/n.
pub fn glauber_weights<T: Scalar>(n: usize) -> Vec<(Vec<usize>, T)> {
    (0..n)
        .map(|i| (vec![i], T::one() / T::from_usize(n)))
        .collect()
}

struct BlockSetup<T> {
    q: usize,
    n: usize,
    blocks: Vec<(Vec<usize>, T)>,
}

fn block_setup<T: Scalar>(
    q: usize,
    n: usize,
    pi: &Distribution<T>,
    weights: &[(Vec<usize>, T)],
) -> Result<BlockSetup<T>> {
    let size = q
        .checked_pow(n as u32)
        .filter(|s| *s <= 4096)
        .ok_or_else(|| Error::ResourceCap(format!("{q}^{n} configurations exceed 4096")))?;
    if pi.len() != size {
        return Err(Error::DimensionMismatch {
            context: "block dynamics table",
            expected: size,
            found: pi.len(),
        });
    }
    let mut total = T::zero();
    for (set, w) in weights {
        if *w < T::zero() || set.iter().any(|&i| i >= n) {
            return Err(Error::InvalidParameter(
                "block weights must be nonnegative over sites 0..n".into(),
            ));
        }
        total = total + w.clone();
    }
    if !total.approx_eq(&T::one(), 1e-12) {
        return Err(Error::InvalidParameter(
            "block weights must sum to 1".into(),
        ));
    }
    Ok(BlockSetup {
        q,
        n,
        blocks: weights
            .iter()
            .filter(|(_, w)| *w > T::zero())
            .cloned()
            .collect(),
    })
}

/// π(η | σ_{A^c}) for every η, as a row over configurations.
fn conditional_row<T: Scalar>(
    s: &BlockSetup<T>,
    pi: &Distribution<T>,
    sigma: usize,
    set: &[usize],
) -> Vec<T> {
    let size = pi.len();
    let sig = decode_config(s.q, s.n, sigma);
    let agrees = |eta: usize| {
        let e = decode_config(s.q, s.n, eta);
        (0..s.n).all(|i| set.contains(&i) || e[i] == sig[i])
    };
    let mut row = vec![T::zero(); size];
    let mut mass = T::zero();
    for (eta, slot) in row.iter_mut().enumerate() {
        if agrees(eta) {
            *slot = pi.get(eta).clone();
            mass = mass + pi.get(eta).clone();
        }
    }
    if mass > T::zero() {
        for v in row.iter_mut() {
            *v = v.clone() / mass.clone();
        }
    } else {
        // σ has zero mass and so does its whole fiber: stay put.
        row[sigma] = T::one();
    }
    row
}

/// Block dynamics P(σ, σ') = Σ_A α_A π(σ' | σ_{A^c}) on [q]^n.
pub fn block_dynamics_kernel<T: Scalar>(
    q: usize,
    n: usize,
    pi: &Distribution<T>,
    weights: &[(Vec<usize>, T)],
) -> Result<Kernel<T>> {
    let s = block_setup(q, n, pi, weights)?;
    let size = pi.len();
    let rows = (0..size)
        .map(|sigma| {
            let mut row = vec![T::zero(); size];
            for (set, w) in &s.blocks {
                for (slot, v) in row.iter_mut().zip(conditional_row(&s, pi, sigma, set)) {
                    *slot = slot.clone() + w.clone() * v;
                }
            }
            row
        })
        .collect();
    Kernel::from_rows(rows)
}

/// The factorization K(σ, (A, η)) = α_A π(η | σ_{A^c}) of block dynamics, over
/// the outputs (A, η) with α_A > 0.
pub fn block_dynamics_factor<T: Scalar>(
    q: usize,
    n: usize,
    pi: &Distribution<T>,
    weights: &[(Vec<usize>, T)],
) -> Result<Factorization<T>> {
    let s = block_setup(q, n, pi, weights)?;
    let size = pi.len();
    if size * size * s.blocks.len() > 20_000_000 {
        return Err(Error::ResourceCap(
            "block dynamics factor too large to materialize".into(),
        ));
    }
    let rows = (0..size)
        .map(|sigma| {
            let mut row = Vec::with_capacity(size * s.blocks.len());
            for (set, w) in &s.blocks {
                row.extend(
                    conditional_row(&s, pi, sigma, set)
                        .into_iter()
                        .map(|v| w.clone() * v),
                );
            }
            row
        })
        .collect();
    let labels = s
        .blocks
        .iter()
        .flat_map(|(set, _)| (0..size).map(move |eta| format!("{}:{eta}", subset_label(set))))
        .collect();
    Factorization::new(pi.clone(), Kernel::from_rows(rows)?, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_core::{ratio, Exact};
    use num_traits::{One, Zero};
    use proptest::prelude::*;

    fn lazy_complete_exact(n: usize) -> ReversiblePair<Exact> {
        let off = ratio(1, 2 * (n as i64 - 1));
        let rows = (0..n)
            .map(|x| {
                (0..n)
                    .map(|y| if x == y { ratio(1, 2) } else { off.clone() })
                    .collect()
            })
            .collect();
        ReversiblePair::new(Distribution::uniform(n), Kernel::from_rows(rows).unwrap()).unwrap()
    }

    fn three_state_exact(m: i64) -> ReversiblePair<Exact> {
        let mm = Exact::from_integer(m.into());
        let d = mm.clone() + Exact::from_integer(2.into());
        let pi = Distribution::new(vec![
            mm.clone() / d.clone(),
            Exact::one() / d.clone(),
            Exact::one() / d,
        ])
        .unwrap();
        let q = ratio(1, 4 * m);
        let p = Kernel::from_rows(vec![
            vec![Exact::one() - q.clone(), q, Exact::zero()],
            vec![ratio(1, 4), ratio(1, 2), ratio(1, 4)],
            vec![Exact::zero(), ratio(1, 4), ratio(3, 4)],
        ])
        .unwrap();
        ReversiblePair::new(pi, p).unwrap()
    }

    #[test]
    fn lazy_factorize_identity() {
        let pair =
            ReversiblePair::new(Distribution::<Exact>::uniform(3), Kernel::identity(3)).unwrap();
        let f = lazy_factorize(&pair).unwrap();
        for x in 0..3 {
            assert_eq!(*f.k().get(x, x), Exact::one());
        }
        assert_eq!(f.product().unwrap(), Kernel::identity(3));
    }

    #[test]
    fn lazy_factorize_three_state_exact() {
        for m in [1, 7, 100] {
            let pair = three_state_exact(m);
            let f = lazy_factorize(&pair).unwrap();
            assert_eq!(f.product().unwrap(), *pair.kernel());
            assert!(f.kstar_consistent());
            // K*(e, ·) is uniform on e for the pair outputs that carry mass.
            for e in 3..f.k().n_out() {
                let row = f.kstar().row(e);
                let nz: Vec<&Exact> = row.iter().filter(|v| !v.is_zero()).collect();
                if nz.len() == 2 {
                    assert_eq!(nz[0], nz[1]);
                }
            }
        }
    }

    #[test]
    fn lazy_factorize_rejects_nonlazy() {
        let flip = ReversiblePair::new(
            Distribution::uniform(2),
            Kernel::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            lazy_factorize(&flip),
            Err(Error::NotLazy { state: 0, .. })
        ));
    }

    #[test]
    fn lazy_factorize_reproduces_complete_graph_k2() {
        for n in 3..7 {
            let pair = lazy_complete_exact(n);
            let lazy = lazy_factorize(&pair).unwrap();
            let k2 = complete_graph_factor::<Exact>(n, 2).unwrap();
            assert_eq!(lazy.k(), k2.k(), "n={n}");
        }
    }

    #[test]
    fn complete_graph_factor_products_exact() {
        for n in 2..=8 {
            let target = lazy_complete_exact(n);
            for l in 2..=n {
                let f = complete_graph_factor::<Exact>(n, l).unwrap();
                assert_eq!(f.product().unwrap(), *target.kernel(), "n={n} l={l}");
            }
        }
        assert!(complete_graph_factor::<f64>(4, 1).is_err());
        assert!(complete_graph_factor::<f64>(4, 5).is_err());
    }

    #[test]
    fn complete_graph_alpha_values() {
        assert!((complete_graph_alpha(3, 2) - 2f64.ln() / 3f64.ln()).abs() < 1e-15);
        assert!((complete_graph_alpha(3, 2) - 0.6309).abs() < 1e-4);
        for n in 3..9 {
            let want = n as f64 / (2.0 * (n as f64 - 1.0));
            assert!((complete_graph_alpha(n, n) - want).abs() < 1e-14);
        }
    }

    #[test]
    fn mixing_factorizations() {
        let n = 5;
        let f2 = complete_graph_factor::<Exact>(n, 2).unwrap();
        let fnn = complete_graph_factor::<Exact>(n, n).unwrap();
        let target = lazy_complete_exact(n);
        let half = mix_factorizations(&f2, &fnn, ratio(1, 2)).unwrap();
        assert_eq!(half.product().unwrap(), *target.kernel());
        let zero = mix_factorizations(&f2, &fnn, Exact::zero()).unwrap();
        assert_eq!(zero.k().n_out(), f2.k().n_out() + fnn.k().n_out());
        for x in 0..n {
            assert_eq!(&zero.k().row(x)[..f2.k().n_out()], f2.k().row(x));
        }
        assert_eq!(zero.product().unwrap(), f2.product().unwrap());
        let one = mix_factorizations(&f2, &fnn, Exact::one()).unwrap();
        assert_eq!(one.product().unwrap(), fnn.product().unwrap());
    }

    #[test]
    fn psd_examples() {
        let flip = ReversiblePair::new(
            Distribution::uniform(2),
            Kernel::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let r = psd_check(&flip);
        assert!(!r.psd);
        assert!((r.min_eigenvalue + 0.5).abs() < 1e-12);
        let pi = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let one_step = ReversiblePair::new(pi.clone(), Kernel::constant(3, &pi)).unwrap();
        assert!(psd_check(&one_step).psd);
        assert!(psd_check(&three_state_exact(10).to_f64()).psd);
    }

    #[test]
    fn sinkhorn_examples() {
        let ds = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let r = sinkhorn(&ds, 1e-10).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.row_scaling, vec![1.0, 1.0]);

        let a = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let r = sinkhorn(&a, 1e-10).unwrap();
        assert!(sums_residual(&r.scaled) <= 1e-10);

        // Symmetric positive definite input: DAD symmetric and PSD.
        let s = vec![
            vec![2.0, 1.0, 0.5],
            vec![1.0, 3.0, 1.0],
            vec![0.5, 1.0, 4.0],
        ];
        let r = sinkhorn(&s, 1e-12).unwrap();
        let d = r.symmetric_scaling();
        let dad = DMatrix::from_fn(3, 3, |i, j| d[i] * s[i][j] * d[j]);
        assert!((&dad - dad.transpose()).amax() < 1e-12);
        for i in 0..3 {
            assert!((dad.row(i).sum() - 1.0).abs() < 1e-9);
        }
        assert!(SymmetricEigen::new(dad).eigenvalues.min() > 0.0);
        assert!(sinkhorn(&[vec![0.0, 1.0], vec![1.0, 1.0]], 1e-10).is_err());
    }

    #[test]
    fn glauber_on_two_bits_matches_hand_kernel() {
        let pi = Distribution::<Exact>::uniform(4);
        let w = glauber_weights::<Exact>(2);
        let p = block_dynamics_kernel(2, 2, &pi, &w).unwrap();
        // Index = σ0 + 2σ1. Resampling one uniform site: stay w.p. 1/2, flip
        // either site w.p. 1/4.
        let q = ratio(1, 4);
        let h = ratio(1, 2);
        let z = Exact::zero();
        let hand = Kernel::from_rows(vec![
            vec![h.clone(), q.clone(), q.clone(), z.clone()],
            vec![q.clone(), h.clone(), z.clone(), q.clone()],
            vec![q.clone(), z.clone(), h.clone(), q.clone()],
            vec![z, q.clone(), q, h],
        ])
        .unwrap();
        assert_eq!(p, hand);
        let f = block_dynamics_factor(2, 2, &pi, &w).unwrap();
        assert_eq!(f.product().unwrap(), hand);
    }

    #[test]
    fn block_dynamics_single_site_is_one_step() {
        let pi = Distribution::new(vec![ratio(1, 6), ratio(2, 6), ratio(3, 6)]).unwrap();
        let w = vec![(vec![0], Exact::one())];
        let p = block_dynamics_kernel(3, 1, &pi, &w).unwrap();
        assert_eq!(p, Kernel::constant(3, &pi));
    }

    #[test]
    fn block_output_marginal() {
        // (πK)(A, η) = α_A π(η).
        let pi = Distribution::new(vec![ratio(1, 10), ratio(2, 10), ratio(3, 10), ratio(4, 10)])
            .unwrap();
        let w = vec![
            (vec![0], ratio(1, 3)),
            (vec![1], ratio(1, 6)),
            (vec![0, 1], ratio(1, 2)),
        ];
        let f = block_dynamics_factor(2, 2, &pi, &w).unwrap();
        let out = pi.push_forward(f.k()).unwrap();
        for (b, (_, a)) in w.iter().enumerate() {
            for eta in 0..4 {
                assert_eq!(*out.get(b * 4 + eta), a.clone() * pi.get(eta).clone());
            }
        }
        let pair = ReversiblePair::new(pi.clone(), f.product().unwrap());
        assert!(pair.is_ok());
    }

    #[test]
    fn binomials_and_subsets() {
        assert_eq!(binomial(10, 5), 252);
        assert_eq!(subsets(5, 2).len(), 10);
        assert_eq!(subsets(4, 4), vec![vec![0, 1, 2, 3]]);
    }

    proptest! {
        #[test]
        fn random_factorization_is_reversible_and_psd(
            weights in proptest::collection::vec(0.05f64..1.0, 4),
            k_raw in proptest::collection::vec(0.0f64..1.0, 4 * 3),
        ) {
            let z: f64 = weights.iter().sum();
            let pi = Distribution::new(weights.iter().map(|w| w / z).collect()).unwrap();
            let rows: Vec<Vec<f64>> = k_raw
                .chunks(3)
                .map(|r| {
                    let s: f64 = r.iter().sum::<f64>() + 1e-3;
                    let mut v: Vec<f64> = r.iter().map(|x| (x + 1e-3 / 3.0) / s).collect();
                    let t: f64 = v.iter().sum();
                    v.iter_mut().for_each(|x| *x /= t);
                    v
                })
                .collect();
            let f = Factorization::new(pi.clone(), Kernel::from_rows(rows).unwrap(), vec!["a".into(), "b".into(), "c".into()]).unwrap();
            let p = f.product().unwrap();
            for x in 0..4 {
                for y in 0..4 {
                    prop_assert!((pi.get(x) * p.get(x, y) - pi.get(y) * p.get(y, x)).abs() <= 1e-12);
                }
            }
            let pair = ReversiblePair::new(pi, p).unwrap();
            prop_assert!(psd_check(&pair).psd);
        }
    }
}
