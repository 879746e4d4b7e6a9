use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use entrocon::certify::{bipartite_certificate, BipartiteRequest};
use entrocon::chain_core::{density, power, Distribution};
use entrocon::entropy_opt::{
    alpha, bound_propagate, delta, eta_kl_estimate, lsc_estimate, mlsc_estimate, ordering_check,
    BoundBracket, OptimizerConfig,
};
use entrocon::error::Error;
use entrocon::factorization::{lazy_factorize, psd_check, PsdReport};
use entrocon::functionals::{
    entropy_at, entropy_decay_derivative, entropy_functional, variance_at,
    variance_decay_derivative, variance_functional,
};
use entrocon::gallery::{make_chain_exact, separation_sweep, Family, KnownConstant, Separation};
use entrocon::io::ChainDocument;
use entrocon::spectral::{eta_chi2, eta_tv, poincare, ConstantName};
use entrocon::transport::{delta_lower_from_coupling, CouplingBound, FiniteMetric, SwapCouplings};
use serde::Serialize;

use crate::source::{ChainArgs, ChainSource};
use crate::{CertifyKind, Cli, Command, GlobalArgs, Outcome};

pub fn run(cli: &Cli) -> Result<Outcome> {
    let g = &cli.global;
    match &cli.command {
        Command::Constants { chain, which } => constants(g, chain, which),
        Command::Separation {
            chain,
            param,
            values,
            separation: which,
        } => separation(g, chain, param, values, which.as_deref()),
        Command::Trajectory {
            chain,
            start,
            nu,
            times,
            steps,
        } => trajectory(g, chain, *start, nu, times, *steps),
        Command::Certify { kind } => certify(g, kind),
        Command::Factorize { chain } => factorize(g, chain),
        Command::Coupling { chain, samples } => coupling(g, chain, *samples),
        Command::Emit { chain } => emit(g, chain),
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn optimizer(g: &GlobalArgs) -> Result<OptimizerConfig> {
    let mut cfg = OptimizerConfig::default();
    if let Some(s) = g.seed {
        cfg = cfg.with_seed(s);
    }
    cfg.validate()?;
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// constants

#[derive(Serialize)]
struct ConstantsReport {
    chain: String,
    states: usize,
    seed: u64,
    constants: BTreeMap<ConstantName, BoundBracket>,
    ordering: Option<OrderingReport>,
    known: Vec<KnownConstant>,
}

#[derive(Serialize)]
struct OrderingReport {
    chain: Vec<String>,
    violations: Vec<String>,
    warnings: Vec<String>,
}

fn parse_which(which: &[String]) -> Result<Vec<ConstantName>> {
    if which.is_empty() {
        return Ok(ConstantName::ALL.to_vec());
    }
    let mut out = Vec::new();
    for w in which {
        let name = ConstantName::parse(w.trim()).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "unknown constant {w}; expected rho, alpha, delta, rho0, lambda, eta_tv, eta_chi2 or eta_kl"
            ))
        })?;
        if !out.contains(&name) {
            out.push(name);
        }
    }
    out.sort();
    Ok(out)
}

fn exact_bracket(e: entrocon::spectral::ConstantEstimate) -> BoundBracket {
    BoundBracket::new(e.clone(), e)
}

fn constants(g: &GlobalArgs, chain: &ChainArgs, which: &[String]) -> Result<Outcome> {
    let which = parse_which(which)?;
    let cfg = optimizer(g)?;
    let src = chain.load(g.seed)?;
    let needs_pair = which.iter().any(|c| {
        !matches!(
            c,
            ConstantName::EtaTv | ConstantName::EtaChi2 | ConstantName::EtaKl
        )
    });
    let factor = if needs_pair {
        src.factorization()?
    } else {
        None
    };
    let factorizable = factor.is_some();

    let mut out = BTreeMap::new();
    for &name in &which {
        let bracket = match name {
            ConstantName::EtaTv => exact_bracket(eta_tv(&src.pi, &src.kernel)?),
            ConstantName::EtaChi2 => exact_bracket(eta_chi2(&src.pi, &src.kernel)?),
            ConstantName::EtaKl => eta_kl_estimate(&src.pi, &src.kernel, &cfg)?,
            ConstantName::Lambda => exact_bracket(poincare(src.pair()?)?.estimate),
            ConstantName::Rho => lsc_estimate(src.pair()?, factorizable, &cfg)?,
            ConstantName::Delta => delta(src.pair()?, 1, factorizable, &cfg)?,
            ConstantName::Rho0 => mlsc_estimate(src.pair()?, factorizable, &cfg)?,
            ConstantName::Alpha => match &factor {
                Some(f) => alpha(f.pi(), f.k(), &cfg)?,
                None if which == [ConstantName::Alpha] => {
                    bail!(Error::InvalidParameter(format!(
                        "{} has no known factorization P = KK*; α is undefined",
                        src.label
                    )))
                }
                // skipped when other constants were requested too
                None => continue,
            },
        };
        out.insert(name, bracket);
    }

    let ordering = ordering_report(&out);
    let report = ConstantsReport {
        chain: src.label.clone(),
        states: src.states.len(),
        seed: cfg.seed,
        constants: out,
        ordering,
        known: src.known.clone(),
    };
    write_output(g.out.as_deref(), &json(&report)?)?;
    Ok(match &report.ordering {
        Some(o) if !o.violations.is_empty() => Outcome::Failed(o.violations.join("; ")),
        _ => Outcome::Ok,
    })
}

/// The ordering ρ ≤ α ≤ δ ≤ ρ₀ ≤ 2λ over whichever constants were computed.
fn ordering_report(b: &BTreeMap<ConstantName, BoundBracket>) -> Option<OrderingReport> {
    let mut chain: Vec<(String, f64, f64)> = [
        ConstantName::Rho,
        ConstantName::Alpha,
        ConstantName::Delta,
        ConstantName::Rho0,
    ]
    .into_iter()
    .filter_map(|c| {
        b.get(&c)
            .map(|x| (c.to_string(), x.lower.value, x.upper.value))
    })
    .collect();
    if let Some(l) = b.get(&ConstantName::Lambda) {
        chain.push(("2lambda".into(), 2.0 * l.lower.value, 2.0 * l.upper.value));
    }
    if chain.len() < 2 {
        return None;
    }
    let view: Vec<(&str, f64, f64)> = chain.iter().map(|(n, a, b)| (n.as_str(), *a, *b)).collect();
    let (violations, warnings) = ordering_check(&view);
    Some(OrderingReport {
        chain: chain.into_iter().map(|c| c.0).collect(),
        violations,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// separation

fn separation(
    g: &GlobalArgs,
    chain: &ChainArgs,
    param: &str,
    values: &[f64],
    which: Option<&str>,
) -> Result<Outcome> {
    if chain.file.is_some() {
        bail!(Error::InvalidParameter(
            "separation sweeps need a gallery family".into()
        ));
    }
    let cfg = optimizer(g)?;
    let base = chain.spec(g.seed)?;
    let sep = match which {
        Some(s) => Separation::parse(s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown separation {s}")))?,
        None => Separation::default_for(base.family),
    };
    let rows = separation_sweep(&base, param, values, sep, &cfg)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv: {e}"))?;
    write_output(g.out.as_deref(), std::str::from_utf8(&bytes)?)?;
    Ok(Outcome::Ok)
}

// ---------------------------------------------------------------------------
// trajectory

/// Relative slack allowed when comparing a decay curve with its envelope.
const ENVELOPE_SLACK: f64 = 1e-10;

fn start_distribution(src: &ChainSource, start: Option<usize>, nu: &[f64]) -> Result<Distribution> {
    let n = src.states.len();
    if !nu.is_empty() {
        return Ok(Distribution::new(nu.to_vec())?);
    }
    let x = start.unwrap_or(0);
    if x >= n {
        bail!(Error::InvalidParameter(format!(
            "start state {x} out of range 0..{n}"
        )));
    }
    Ok(Distribution::point_mass(n, x))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn trajectory(
    g: &GlobalArgs,
    chain: &ChainArgs,
    start: Option<usize>,
    nu: &[f64],
    times: &[f64],
    steps: Option<u32>,
) -> Result<Outcome> {
    let src = chain.load(g.seed)?;
    let pair = src.pair()?;
    let nu0 = start_distribution(&src, start, nu)?;
    let f0 = density(&nu0, pair.pi())?.into_values();
    let ent0 = entropy_functional(pair.pi(), &f0)?;
    let var0 = variance_functional(pair.pi(), &f0)?;
    let factorizable = src.factorization()?.is_some();
    let lowers = bound_propagate(pair, factorizable)?;
    let lambda = poincare(pair)?.lambda();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut violations = Vec::new();
    let over =
        |value: f64, envelope: f64, scale: f64| value > envelope + ENVELOPE_SLACK * (1.0 + scale);

    if let Some(steps) = steps {
        let delta_lo = lowers[&ConstantName::Delta].value;
        w.write_record(["m", "entropy", "variance", "entropy_envelope"])?;
        let mut nu_m = nu0.clone();
        for m in 0..=steps {
            if m > 0 {
                nu_m = nu_m.push_forward(pair.kernel())?;
            }
            let f = density(&nu_m, pair.pi())?.into_values();
            let ent = entropy_functional(pair.pi(), &f)?;
            let var = variance_functional(pair.pi(), &f)?;
            let env = (1.0 - delta_lo).powi(m as i32) * ent0;
            if over(ent, env, ent0) {
                violations.push(format!(
                    "m = {m}: entropy {ent} above (1 - δ)^m envelope {env}"
                ));
            }
            w.write_record([
                m.to_string(),
                ent.to_string(),
                var.to_string(),
                env.to_string(),
            ])?;
        }
    } else {
        let rho0_lo = lowers[&ConstantName::Rho0].value;
        let grid: Vec<f64> = if times.is_empty() {
            (0..20).map(|i| 5.0 * i as f64 / 19.0).collect()
        } else {
            times.to_vec()
        };
        w.write_record([
            "t",
            "entropy",
            "variance",
            "entropy_derivative",
            "variance_derivative",
            "entropy_envelope",
            "variance_envelope",
            "discrete_entropy",
        ])?;
        for &t in &grid {
            let ent = entropy_at(pair, &nu0, t)?;
            let var = variance_at(pair, &nu0, t)?;
            let dent = entropy_decay_derivative(pair, &nu0, t)?.value;
            let dvar = variance_decay_derivative(pair, &nu0, t)?;
            let ent_env = (-rho0_lo * t).exp() * ent0;
            let var_env = (-2.0 * lambda * t).exp() * var0;
            if over(ent, ent_env, ent0) {
                violations.push(format!(
                    "t = {t}: entropy {ent} above e^(-ρ₀t) envelope {ent_env}"
                ));
            }
            if over(var, var_env, var0) {
                violations.push(format!(
                    "t = {t}: variance {var} above e^(-2λt) envelope {var_env}"
                ));
            }
            let discrete = if t.fract() == 0.0 && t <= 1e4 {
                let pm = power(pair.kernel(), t as u32)?;
                let f = density(&nu0.push_forward(&pm)?, pair.pi())?.into_values();
                Some(entropy_functional(pair.pi(), &f)?)
            } else {
                None
            };
            w.write_record([
                t.to_string(),
                ent.to_string(),
                var.to_string(),
                dent.to_string(),
                dvar.to_string(),
                ent_env.to_string(),
                var_env.to_string(),
                fmt_opt(discrete),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv: {e}"))?;
    write_output(g.out.as_deref(), std::str::from_utf8(&bytes)?)?;
    Ok(if violations.is_empty() {
        Outcome::Ok
    } else {
        Outcome::Failed(violations.join("; "))
    })
}

// ---------------------------------------------------------------------------
// certify

fn certify(g: &GlobalArgs, kind: &CertifyKind) -> Result<Outcome> {
    let CertifyKind::Bipartite {
        n,
        spacing,
        margin,
        t_star,
        budget,
        corner_spacing,
    } = kind;
    let req = BipartiteRequest {
        n: *n,
        spacing: *spacing,
        margin: *margin,
        t_star: *t_star,
        budget: *budget,
        corner_spacing: *corner_spacing,
    };
    let report = bipartite_certificate(&req)?;
    write_output(g.out.as_deref(), &json(&report)?)?;
    for s in &report.stages {
        eprintln!(
            "[{}] {}: {}",
            if s.pass { "pass" } else { "FAIL" },
            s.name,
            s.detail
        );
    }
    eprintln!("runtime {:.1} s", report.runtime_secs);
    Ok(match report.verdict {
        Some(v) => {
            eprintln!("certified: η_KL = {v:.12} with point-mass extremizers");
            Outcome::Ok
        }
        None => Outcome::Failed("certificate withheld".into()),
    })
}

// ---------------------------------------------------------------------------
// factorize

#[derive(Serialize)]
struct FactorizeReport {
    chain: String,
    arithmetic: &'static str,
    product_residual: f64,
    psd: PsdReport,
    factor: ChainDocument,
}

fn factorize(g: &GlobalArgs, chain: &ChainArgs) -> Result<Outcome> {
    let src = chain.load(g.seed)?;
    let pair = src.pair()?;
    let not_lazy = || {
        Error::InvalidParameter(format!(
            "{} is not lazy and has no known factorization",
            src.label
        ))
    };
    let (factor, residual, arithmetic) = match &src.spec {
        Some(spec) => {
            let inst = make_chain_exact(spec)?;
            let f = match inst.factorization {
                Some(f) => f,
                None if inst.pair.is_lazy() => lazy_factorize(&inst.pair)?,
                None => bail!(not_lazy()),
            };
            let residual = f.product_residual(inst.pair.kernel())?;
            (f.to_f64(), residual, "exact")
        }
        None => {
            let f = src.factorization()?.ok_or_else(not_lazy)?;
            let residual = f.product_residual(pair.kernel())?;
            (f, residual, "f64")
        }
    };
    let report = FactorizeReport {
        chain: src.label.clone(),
        arithmetic,
        product_residual: residual,
        psd: psd_check(pair),
        factor: ChainDocument::from_factorization(&factor, src.states.clone())?,
    };
    write_output(g.out.as_deref(), &json(&report)?)?;
    let tol = if arithmetic == "exact" { 0.0 } else { 1e-12 };
    Ok(if residual <= tol {
        Outcome::Ok
    } else {
        Outcome::Failed(format!("product residual {residual:e} exceeds {tol:e}"))
    })
}

// ---------------------------------------------------------------------------
// coupling

#[derive(Serialize)]
struct CouplingReport {
    chain: String,
    bound: CouplingBound,
    /// Exact check of the swap coupling (Bernoulli–Laplace only).
    swap: Option<SwapSummary>,
}

#[derive(Serialize)]
struct SwapSummary {
    pairs_validated: usize,
    expected_distance: String,
    expected_distance_f64: f64,
    kappa: f64,
}

/// Swap couplings validated exactly per run.
const MAX_SWAP_PAIRS: usize = 500;

fn coupling(g: &GlobalArgs, chain: &ChainArgs, samples: usize) -> Result<Outcome> {
    let src = chain.load(g.seed)?;
    let pair = src.pair()?;
    let n = pair.len();
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|x| (x + 1..n).map(move |y| (x, y)))
        .filter(|&(x, y)| *pair.kernel().get(x, y) > 0.0)
        .collect();
    let metric = FiniteMetric::graph(n, &edges)?;
    let bound = delta_lower_from_coupling(pair, &metric, &edges, samples, g.seed.unwrap_or(0))?;

    let swap = match &src.spec {
        Some(spec) if spec.family == Family::BernoulliLaplace => {
            let (bn, bk) = (spec.int("n")?, spec.int("k")?);
            let mut expected = None;
            let checked = edges.len().min(MAX_SWAP_PAIRS);
            let couplings = SwapCouplings::new(bn, bk)?;
            for &(x, y) in edges.iter().take(checked) {
                let c = couplings.coupling(x, y)?;
                if let Some(e) = &expected {
                    if *e != c.expected_distance {
                        bail!(Error::Degenerate(format!(
                            "swap coupling distance differs at ({x}, {y})"
                        )));
                    }
                } else {
                    expected = Some(c.expected_distance.clone());
                }
            }
            expected.map(|e| {
                let f = entrocon::chain_core::Scalar::to_f64(&e);
                SwapSummary {
                    pairs_validated: checked,
                    expected_distance: e.to_string(),
                    expected_distance_f64: f,
                    kappa: 1.0 - f,
                }
            })
        }
        _ => None,
    };
    let failed = match &bound.estimate {
        None => Some(format!(
            "{} pairs violate W∞ ≤ d; no bound",
            bound.w_infty_violations.len()
        )),
        Some(_) => None,
    };
    let report = CouplingReport {
        chain: src.label.clone(),
        bound,
        swap,
    };
    write_output(g.out.as_deref(), &json(&report)?)?;
    Ok(failed.map_or(Outcome::Ok, Outcome::Failed))
}

// ---------------------------------------------------------------------------
// emit

fn emit(g: &GlobalArgs, chain: &ChainArgs) -> Result<Outcome> {
    let text = match &chain.file {
        Some(path) => ChainDocument::load(path)?.to_json(),
        None => {
            let src = chain.load(g.seed)?;
            ChainDocument::from_pair(src.pair()?, src.states.clone())?.to_json()
        }
    };
    write_output(g.out.as_deref(), &text)?;
    Ok(Outcome::Ok)
}
