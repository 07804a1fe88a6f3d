//! JSON experiment configs and the sequence/grid descriptors they share
//! with the command-line flags.
//!
//! A config file can drive any subcommand; flags override field by
//! field. Validation failures always name the offending field so config
//! mistakes are localizable without reading source.

use devbound::binomial::ConcentrationConstants;
use devbound::seq::ProbSeq;
use devbound::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub sequences: Vec<SeqDescriptor>,
    pub n: Option<NGrid>,
    pub gamma: Vec<f64>,
    pub qnorm: Vec<f64>,
    pub t: Vec<f64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub constants: BTreeMap<String, f64>,
    /// Sweep quantities; see [`crate::run::SWEEP_QUANTITIES`].
    pub quantities: Vec<String>,
    pub side: Option<String>,
    pub mode: Option<String>,
    pub output: Option<String>,
    pub path: Option<String>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::domain(format!("config {}: {e}", path.display())))
    }
}

/// n grid as an explicit list or a geometric progression
/// start, start*factor, ... clipped to end.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NGrid {
    List(Vec<u64>),
    Geometric { start: u64, end: u64, factor: f64 },
}

impl NGrid {
    pub fn expand(&self) -> Result<Vec<u64>> {
        match self {
            NGrid::List(ns) => {
                if ns.is_empty() {
                    return Err(Error::domain("field n: grid must be non-empty"));
                }
                if ns.contains(&0) {
                    return Err(Error::domain("field n: grid values must be >= 1"));
                }
                Ok(ns.clone())
            }
            NGrid::Geometric { start, end, factor } => {
                if *start == 0 || end < start {
                    return Err(Error::domain(format!(
                        "field n: geometric grid needs 1 <= start <= end, got {start}..{end}"
                    )));
                }
                if !(*factor > 1.0) {
                    return Err(Error::domain(format!(
                        "field n: geometric factor must be > 1, got {factor}"
                    )));
                }
                let mut ns = vec![*start];
                let mut x = *start as f64;
                loop {
                    x *= factor;
                    let v = x.round() as u64;
                    if v > *end {
                        break;
                    }
                    if v > *ns.last().unwrap() {
                        ns.push(v);
                    }
                }
                Ok(ns)
            }
        }
    }
}

/// Flat sequence descriptor: `family` picks the constructor and the
/// other fields supply its parameters. Counts can be given as J
/// (integer), ln(J+1) (any scale), or per-block log counts.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeqDescriptor {
    pub family: String,
    pub ln_jp1: Option<f64>,
    /// Integer count: step J, or the poissonian J cap.
    pub j: Option<u64>,
    pub q: Option<f64>,
    /// Block list "log_count:q;log_count:q;..." with natural-log counts.
    pub blocks: Option<String>,
    pub values: Option<Vec<f64>>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub cap: Option<u64>,
    pub n_ref: Option<u64>,
    pub k_factor: Option<f64>,
    pub alpha: Option<f64>,
    /// Interpret the values as variances instead of means.
    pub variance: bool,
}

fn req<T: Copy>(x: Option<T>, field: &str, family: &str) -> Result<T> {
    x.ok_or_else(|| Error::domain(format!("field {field}: required for family {family}")))
}

impl SeqDescriptor {
    pub fn build(&self) -> Result<ProbSeq> {
        let seq = match self.family.as_str() {
            "step" => {
                let q = req(self.q, "q", "step")?;
                match (self.ln_jp1, self.j) {
                    (Some(l), None) => ProbSeq::step_with_ln_jp1(l, q)?,
                    (None, Some(j)) => {
                        if j == 0 {
                            return Err(Error::domain("field j: step needs J >= 1"));
                        }
                        ProbSeq::step((j as f64).ln(), q)?
                    }
                    (Some(_), Some(_)) => {
                        return Err(Error::domain(
                            "fields ln_jp1 and j: give exactly one step count",
                        ))
                    }
                    (None, None) => {
                        return Err(Error::domain("field ln_jp1 or j: step needs a count"))
                    }
                }
            }
            "blocks" => {
                let text = self
                    .blocks
                    .as_deref()
                    .ok_or_else(|| Error::domain("field blocks: required for family blocks"))?;
                ProbSeq::blocks(parse_blocks(text)?)?
            }
            "explicit" => {
                let values = self
                    .values
                    .clone()
                    .ok_or_else(|| Error::domain("field values: required for family explicit"))?;
                ProbSeq::explicit(values)?
            }
            "power_law" => ProbSeq::power_law(
                req(self.a, "a", "power_law")?,
                req(self.b, "b", "power_law")?,
                self.cap,
            )?,
            "open_problem" => ProbSeq::open_problem(
                req(self.n_ref, "n_ref", "open_problem")?,
                req(self.k_factor, "k_factor", "open_problem")?,
            )?,
            "poissonian" => ProbSeq::poissonian(
                req(self.alpha, "alpha", "poissonian")?,
                req(self.n_ref, "n_ref", "poissonian")?,
                req(self.j, "j", "poissonian")?,
            )?,
            other => {
                return Err(Error::domain(format!(
                    "field family: unknown family {other:?} (step, blocks, explicit, \
                     power_law, open_problem, poissonian)"
                )))
            }
        };
        Ok(if self.variance { seq.as_variance() } else { seq })
    }
}

fn parse_blocks(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut entries = Vec::new();
    for part in text.split(';') {
        let (lc, q) = part.split_once(':').ok_or_else(|| {
            Error::domain(format!("field blocks: entry {part:?} is not log_count:q"))
        })?;
        let lc: f64 = lc
            .trim()
            .parse()
            .map_err(|_| Error::domain(format!("field blocks: bad log count {lc:?}")))?;
        let q: f64 = q
            .trim()
            .parse()
            .map_err(|_| Error::domain(format!("field blocks: bad value {q:?}")))?;
        entries.push((lc, q));
    }
    Ok(entries)
}

/// Defaults, then config-file overrides, then `--const NAME=VALUE` flags
/// in order.
pub fn build_constants(
    from_config: &BTreeMap<String, f64>,
    flags: &[String],
) -> Result<ConcentrationConstants> {
    let mut consts = ConcentrationConstants::default();
    for (name, value) in from_config {
        consts.set(name, *value)?;
    }
    for flag in flags {
        let (name, value) = flag.split_once('=').ok_or_else(|| {
            Error::domain(format!("--const expects NAME=VALUE, got {flag:?}"))
        })?;
        let value: f64 = value
            .parse()
            .map_err(|_| Error::domain(format!("--const {name}: bad value {value:?}")))?;
        consts.set(name, value)?;
    }
    Ok(consts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_grid_matches_powers_of_two() {
        let grid = NGrid::Geometric { start: 1, end: 16384, factor: 2.0 };
        let ns = grid.expand().unwrap();
        assert_eq!(ns.len(), 15);
        assert_eq!(ns[0], 1);
        assert_eq!(ns[14], 16384);
        for w in ns.windows(2) {
            assert_eq!(w[1], 2 * w[0]);
        }
        assert!(NGrid::List(vec![]).expand().is_err());
        assert!(NGrid::Geometric { start: 10, end: 5, factor: 2.0 }.expand().is_err());
        assert!(NGrid::Geometric { start: 1, end: 8, factor: 1.0 }.expand().is_err());
    }

    #[test]
    fn descriptor_errors_name_the_field() {
        let d = SeqDescriptor { family: "step".into(), ..Default::default() };
        let err = d.build().unwrap_err().to_string();
        assert!(err.contains("field q"), "got {err}");
        let d = SeqDescriptor {
            family: "step".into(),
            q: Some(0.25),
            ln_jp1: Some(4.0),
            j: Some(4),
            ..Default::default()
        };
        assert!(d.build().unwrap_err().to_string().contains("exactly one"));
        let d = SeqDescriptor { family: "nope".into(), ..Default::default() };
        assert!(d.build().unwrap_err().to_string().contains("field family"));
        let d = SeqDescriptor {
            family: "blocks".into(),
            blocks: Some("1.5;0.25".into()),
            ..Default::default()
        };
        assert!(d.build().unwrap_err().to_string().contains("log_count:q"));
    }

    #[test]
    fn descriptors_build_each_family() {
        let step = SeqDescriptor {
            family: "step".into(),
            ln_jp1: Some(4.0),
            q: Some(0.25),
            ..Default::default()
        };
        assert!(step.build().is_ok());
        let blocks = SeqDescriptor {
            family: "blocks".into(),
            blocks: Some("2:0.4; 0:0.1".into()),
            ..Default::default()
        };
        assert_eq!(blocks.build().unwrap().to_string(), "blocks(2:0.4;0:0.1)");
        let pois = SeqDescriptor {
            family: "poissonian".into(),
            alpha: Some(0.5),
            n_ref: Some(100),
            j: Some(10),
            variance: true,
            ..Default::default()
        };
        assert_eq!(
            pois.build().unwrap().to_string(),
            "variance:poissonian(alpha=0.5,n_ref=100,J=10)"
        );
    }

    #[test]
    fn config_json_round_trip_and_unknown_field() {
        let text = r#"{
            "sequences": [{"family": "step", "ln_jp1": 4.0, "q": 0.25}],
            "n": {"start": 1, "end": 8, "factor": 2.0},
            "quantities": ["rate", "exact"],
            "trials": 1000,
            "seed": 42,
            "constants": {"c0": 0.1}
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.n.unwrap().expand().unwrap(), vec![1, 2, 4, 8]);
        assert_eq!(cfg.sequences.len(), 1);
        assert_eq!(cfg.seed, Some(42));
        let bad = r#"{"trails": 5}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(bad).is_err());
        let list = r#"{"n": [10, 20]}"#;
        let cfg: ExperimentConfig = serde_json::from_str(list).unwrap();
        assert_eq!(cfg.n.unwrap().expand().unwrap(), vec![10, 20]);
    }

    #[test]
    fn constants_override_order() {
        let mut cfg = BTreeMap::new();
        cfg.insert("c0".to_string(), 0.2);
        let consts = build_constants(&cfg, &["c0=0.1".to_string()]).unwrap();
        assert_eq!(consts.c0, 0.1, "flags win over config");
        assert!(build_constants(&cfg, &["c0".to_string()]).is_err());
        assert!(build_constants(&cfg, &["nope=1".to_string()]).is_err());
        assert!(build_constants(&cfg, &["c0=2.0".to_string()]).is_err(), "out of range");
    }
}
