//! Where a chain comes from: a gallery family plus parameters, or a JSON file.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use entrocon::chain_core::{Distribution, Kernel, ReversiblePair};
use entrocon::entropy_opt::factorized_pair;
use entrocon::error::Error;
use entrocon::factorization::{lazy_factorize, Factorization};
use entrocon::gallery::{known_constants, make_chain, ChainSpec, Family, KnownConstant};
use entrocon::io::ChainDocument;

#[derive(Debug, Clone, Args)]
pub struct ChainArgs {
    /// Gallery family (alternative to --gallery).
    #[arg(value_name = "FAMILY", conflicts_with_all = ["gallery", "file"])]
    pub family: Option<String>,
    /// Gallery family, e.g. three_state, bernoulli_laplace.
    #[arg(long, conflicts_with = "file")]
    pub gallery: Option<String>,
    /// Chain JSON file.
    #[arg(long)]
    pub file: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<f64>,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub l: Option<f64>,
    /// Size parameter M of one_step, three_state and birth_death.
    #[arg(long = "M")]
    pub big_m: Option<f64>,
    /// Power m of birth_death.
    #[arg(long = "m")]
    pub small_m: Option<f64>,
    #[arg(long)]
    pub d: Option<f64>,
}

impl ChainArgs {
    fn family_name(&self) -> Option<&str> {
        self.gallery.as_deref().or(self.family.as_deref())
    }

    fn overrides(&self) -> [(&'static str, Option<f64>); 6] {
        [
            ("n", self.n),
            ("k", self.k),
            ("l", self.l),
            ("M", self.big_m),
            ("m", self.small_m),
            ("d", self.d),
        ]
    }

    /// The gallery spec, with `seed` feeding families that take one.
    pub fn spec(&self, seed: Option<u64>) -> Result<ChainSpec> {
        let Some(name) = self.family_name() else {
            bail!(Error::InvalidParameter(
                "a chain needs --gallery <family> or --file <path>".into()
            ));
        };
        let family = Family::parse(name).ok_or_else(|| {
            let known: Vec<&str> = Family::ALL.iter().map(|f| f.as_str()).collect();
            Error::InvalidParameter(format!(
                "unknown family {name}; expected one of {}",
                known.join(", ")
            ))
        })?;
        let mut spec = ChainSpec::new(family);
        for (name, value) in self.overrides() {
            if let Some(v) = value {
                spec.set(name, v)?;
            }
        }
        if let Some(s) = seed {
            if family.parameters().iter().any(|(p, _)| *p == "seed") {
                spec.set("seed", s as f64)?;
            }
        }
        Ok(spec)
    }

    pub fn load(&self, seed: Option<u64>) -> Result<ChainSource> {
        if let Some(path) = &self.file {
            if self.overrides().iter().any(|(_, v)| v.is_some()) {
                bail!(Error::InvalidParameter(
                    "family parameters cannot be combined with --file".into()
                ));
            }
            let doc = ChainDocument::load(path)?;
            return ChainSource::from_document(doc, path.display().to_string());
        }
        let spec = self.spec(seed)?;
        let inst = make_chain(&spec)?;
        Ok(ChainSource {
            label: spec.label(),
            states: inst.states.clone(),
            pi: inst.pair.pi().clone(),
            kernel: inst.pair.kernel().clone(),
            pair: Ok(inst.pair),
            factor: inst.factorization,
            known: known_constants(&spec)?,
            spec: Some(spec),
        })
    }
}

/// A loaded chain. `pair` holds the validation error for non-reversible
/// input so that the contraction coefficients can still be computed.
pub struct ChainSource {
    pub label: String,
    pub states: Vec<String>,
    pub pi: Distribution,
    pub kernel: Kernel,
    pub pair: std::result::Result<ReversiblePair, Error>,
    pub factor: Option<Factorization>,
    pub known: Vec<KnownConstant>,
    pub spec: Option<ChainSpec>,
}

impl ChainSource {
    fn from_document(doc: ChainDocument, label: String) -> Result<Self> {
        let pi = doc.distribution()?;
        let kernel = doc.kernel()?;
        if let Some(outputs) = doc.output_states.as_ref().filter(|o| **o != doc.states) {
            // A half-step kernel K: the chain is P = KK*.
            let factor = Factorization::new(pi.clone(), kernel, outputs.clone())?;
            let pair = factorized_pair(&pi, factor.k())?;
            return Ok(Self {
                label,
                states: doc.states,
                pi,
                kernel: pair.kernel().clone(),
                pair: Ok(pair),
                factor: Some(factor),
                known: Vec::new(),
                spec: None,
            });
        }
        Ok(Self {
            label,
            states: doc.states.clone(),
            pair: doc.to_pair(),
            pi,
            kernel,
            factor: None,
            known: Vec::new(),
            spec: None,
        })
    }

    pub fn pair(&self) -> Result<&ReversiblePair> {
        self.pair
            .as_ref()
            .map_err(|e| anyhow::Error::new(e.clone()))
            .context(format!("{} cannot be analysed", self.label))
    }

    /// The known factorization, or the lazy one when the chain is lazy.
    pub fn factorization(&self) -> Result<Option<Factorization>> {
        if let Some(f) = &self.factor {
            return Ok(Some(f.clone()));
        }
        let pair = self.pair()?;
        Ok(if pair.is_lazy() {
            Some(lazy_factorize(pair)?)
        } else {
            None
        })
    }
}
