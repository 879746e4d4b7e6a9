//! Eigenstructure-based constants: the Poincaré constant λ, the χ²
//! contraction coefficient and Dobrushin's TV coefficient.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::chain_core::{compose, reverse_kernel, Distribution, Kernel, ReversiblePair, Scalar};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantName {
    Rho,
    Alpha,
    Delta,
    Rho0,
    Lambda,
    EtaTv,
    EtaChi2,
    EtaKl,
}

impl ConstantName {
    pub const ALL: [ConstantName; 8] = [
        ConstantName::Rho,
        ConstantName::Alpha,
        ConstantName::Delta,
        ConstantName::Rho0,
        ConstantName::Lambda,
        ConstantName::EtaTv,
        ConstantName::EtaChi2,
        ConstantName::EtaKl,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConstantName::Rho => "rho",
            ConstantName::Alpha => "alpha",
            ConstantName::Delta => "delta",
            ConstantName::Rho0 => "rho0",
            ConstantName::Lambda => "lambda",
            ConstantName::EtaTv => "eta_tv",
            ConstantName::EtaChi2 => "eta_chi2",
            ConstantName::EtaKl => "eta_kl",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl std::fmt::Display for ConstantName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a value was obtained, and therefore which side of the truth it sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    /// Evaluated closed form; exact up to float rounding.
    ClosedForm,
    /// Dense symmetric eigensolve; exact up to float rounding.
    EigenExact,
    /// Attained by an explicit witness, so it bounds the true constant from
    /// above (infimum-type constants) or is an upper estimate of it.
    OptimizerUpper,
    /// Attained by an explicit witness for a supremum-type constant; bounds
    /// the true value from below.
    OptimizerLower,
    /// Rigorous lower bound from a proven inequality.
    CertifiedLower,
    /// Rigorous upper bound from a proven inequality.
    CertifiedUpper,
    /// Exhaustive simplex grid with refinement, |X| ≤ 3.
    OracleGrid,
}

/// An extremizer candidate: a distribution ν or a density f.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", content = "values", rename_all = "snake_case")]
pub enum Witness {
    Distribution(Vec<f64>),
    Density(Vec<f64>),
}

impl Witness {
    pub fn values(&self) -> &[f64] {
        match self {
            Witness::Distribution(v) | Witness::Density(v) => v,
        }
    }

    pub fn support(&self) -> Vec<usize> {
        self.values()
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_point_mass(&self) -> bool {
        matches!(self, Witness::Distribution(_)) && self.support().len() == 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantEstimate {
    pub name: ConstantName,
    pub value: f64,
    pub kind: EstimateKind,
    pub witness: Option<Witness>,
    pub tolerance: f64,
    pub provenance: String,
}

impl ConstantEstimate {
    pub fn new(
        name: ConstantName,
        value: f64,
        kind: EstimateKind,
        provenance: impl Into<String>,
    ) -> Self {
        Self {
            name,
            value,
            kind,
            witness: None,
            tolerance: 0.0,
            provenance: provenance.into(),
        }
    }

    pub fn with_witness(mut self, witness: Witness) -> Self {
        self.witness = Some(witness);
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }
}

/// Result of a Poincaré computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoincareReport {
    pub estimate: ConstantEstimate,
    /// Communicating classes of the support of π; more than one means λ = 0.
    pub components: Vec<Vec<usize>>,
    /// Spectrum of P restricted to supp π, in decreasing order.
    pub eigenvalues: Vec<f64>,
}

impl PoincareReport {
    pub fn lambda(&self) -> f64 {
        self.estimate.value
    }

    pub fn is_reducible(&self) -> bool {
        self.components.len() > 1
    }
}

const EIGEN_TOL: f64 = 1e-12;

fn components(support: &[usize], p: &Kernel<f64>) -> Vec<Vec<usize>> {
    let n = support.len();
    let mut label = vec![usize::MAX; n];
    let mut out = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut stack = vec![start];
        let mut members = Vec::new();
        label[start] = id;
        while let Some(i) = stack.pop() {
            members.push(support[i]);
            for j in 0..n {
                if label[j] == usize::MAX && *p.get(support[i], support[j]) > 0.0 {
                    label[j] = id;
                    stack.push(j);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// λ(π, P) = 1 − (second largest eigenvalue of P), via the symmetric matrix
/// D^{1/2} P D^{−1/2} on supp π. The witness is the matching eigenfunction of
/// −L (zero off the support).
pub fn poincare(pair: &ReversiblePair) -> Result<PoincareReport> {
    let pi = pair.pi();
    let p = pair.kernel();
    let support = pi.support();
    let m = support.len();
    if m < 2 {
        return Err(Error::Degenerate(
            "Poincaré constant needs two states of positive mass".into(),
        ));
    }
    let comps = components(&support, p);
    let sqrt_pi: Vec<f64> = support.iter().map(|&x| pi.get(x).sqrt()).collect();
    let s = DMatrix::from_fn(m, m, |i, j| {
        let a = sqrt_pi[i] * p.get(support[i], support[j]) / sqrt_pi[j];
        let b = sqrt_pi[j] * p.get(support[j], support[i]) / sqrt_pi[i];
        0.5 * (a + b)
    });
    let eig = SymmetricEigen::new(s);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();

    let n = pair.len();
    let (value, witness, provenance) = if comps.len() > 1 {
        let first = &comps[0];
        let mass: f64 = first.iter().map(|&x| pi.get(x)).sum();
        let mut f = vec![0.0; n];
        for &x in &support {
            f[x] = if first.contains(&x) {
                1.0 - mass
            } else {
                -mass
            };
        }
        (0.0, f, "reducible: indicator of a closed class")
    } else {
        let col = eig.eigenvectors.column(order[1]);
        let mut f = vec![0.0; n];
        for (i, &x) in support.iter().enumerate() {
            f[x] = col[i] / sqrt_pi[i];
        }
        let lambda = (1.0 - eigenvalues[1]).clamp(0.0, 2.0);
        (lambda, f, "1 - second eigenvalue of the symmetrized kernel")
    };
    Ok(PoincareReport {
        estimate: ConstantEstimate::new(
            ConstantName::Lambda,
            value,
            EstimateKind::EigenExact,
            provenance,
        )
        .with_witness(Witness::Density(witness))
        .with_tolerance(EIGEN_TOL * m as f64),
        components: comps,
        eigenvalues,
    })
}

/// η_χ²(π, K) = 1 − λ(π, KK*_π).
pub fn eta_chi2(pi: &Distribution, k: &Kernel) -> Result<ConstantEstimate> {
    if k.n_in() != pi.len() {
        return Err(Error::DimensionMismatch {
            context: "eta_chi2",
            expected: pi.len(),
            found: k.n_in(),
        });
    }
    let provenance = "1 - λ(π, KK*)";
    if pi.support().len() < 2 {
        return Ok(ConstantEstimate::new(
            ConstantName::EtaChi2,
            0.0,
            EstimateKind::EigenExact,
            provenance,
        ));
    }
    let kstar = reverse_kernel(pi, k)?;
    let p = symmetrize_product(pi, &compose(k, &kstar)?);
    let pair = ReversiblePair::new(pi.clone(), p)?;
    let report = poincare(&pair)?;
    let value = (1.0 - report.lambda()).clamp(0.0, 1.0);
    Ok(ConstantEstimate::new(
        ConstantName::EtaChi2,
        value,
        EstimateKind::EigenExact,
        provenance,
    )
    .with_tolerance(report.estimate.tolerance))
}

/// Remove rounding asymmetry from a product KK* so that detailed balance holds
/// to the last bit before validation.
pub(crate) fn symmetrize_product(pi: &Distribution, p: &Kernel) -> Kernel {
    let n = pi.len();
    let mut rows = p.to_rows();
    for x in 0..n {
        for y in (x + 1)..n {
            let (px, py) = (*pi.get(x), *pi.get(y));
            if px > 0.0 && py > 0.0 {
                let flow = 0.5 * (px * rows[x][y] + py * rows[y][x]);
                rows[x][y] = flow / px;
                rows[y][x] = flow / py;
            }
        }
    }
    Kernel::from_flat_unchecked(n, n, rows.into_iter().flatten().collect())
}

/// Dobrushin's coefficient max_{x,x' ∈ supp π} TV(K(x,·), K(x',·)), with the
/// maximizing pair recorded in the provenance.
pub fn eta_tv(pi: &Distribution, k: &Kernel) -> Result<ConstantEstimate> {
    let (value, pair) = eta_tv_generic(pi, k)?;
    let provenance = match pair {
        Some((a, b)) => format!("max row TV, attained at rows ({a}, {b})"),
        None => "single state".to_string(),
    };
    Ok(ConstantEstimate::new(
        ConstantName::EtaTv,
        value,
        EstimateKind::ClosedForm,
        provenance,
    ))
}

/// Dobrushin's coefficient in any scalar type; exact for rationals.
/// Returns the value and the maximizing pair of rows.
pub fn eta_tv_generic<T: Scalar>(
    pi: &Distribution<T>,
    k: &Kernel<T>,
) -> Result<(T, Option<(usize, usize)>)> {
    if k.n_in() != pi.len() {
        return Err(Error::DimensionMismatch {
            context: "eta_tv",
            expected: pi.len(),
            found: k.n_in(),
        });
    }
    let support = pi.support();
    let mut best = T::zero();
    let mut arg = None;
    for (i, &a) in support.iter().enumerate() {
        for &b in &support[i + 1..] {
            let overlap = k
                .row(a)
                .iter()
                .zip(k.row(b))
                .fold(T::zero(), |acc, (u, v)| {
                    acc + if u < v { u.clone() } else { v.clone() }
                });
            let d = T::one() - overlap;
            if arg.is_none() || d > best {
                best = d;
                arg = Some((a, b));
            }
        }
    }
    Ok((best, arg))
}
