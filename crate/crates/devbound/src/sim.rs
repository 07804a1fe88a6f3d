//! Monte Carlo estimation of deviation statistics.
//!
//! Four experiment targets share one trial harness:
//!
//! * product: independent coordinates, per block the extremes of J iid
//!   binomials, either drawn directly or (for astronomic J, upper side
//!   only) through log-space inversion of the block maximum;
//! * coupled: every coordinate indicates the same uniform draws, so the
//!   sup deviation collapses onto the empirical CDF at the sequence
//!   values;
//! * two_point: a variance profile realized on {0, eta} valued
//!   coordinates with eta = sqrt(2 n sum sigma^2);
//! * cdf_sup: the exact sup of |F_n - F| for uniform samples left of a
//!   cutoff, from the order statistics.
//!
//! Trials are reproducible regardless of the worker count: trial i draws
//! from ChaCha8 stream i of the plan seed, and results are collected by
//! trial index. The `DEVBOUND_THREADS` environment variable caps the
//! rayon pool; it changes scheduling only, never values.

use crate::binomial::{log_pmf, BinomialSpec};
use crate::error::{Error, Result};
use crate::numeric::{ln_neg_ln_one_minus_exp, logaddexp, Kahan};
use crate::oracle::Side;
use crate::seq::{self, Blocked, BlockView, Family, ProbSeq, SeqKind, TruncationPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp1};
use rayon::prelude::*;

/// How product blocks with many coordinates are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HugeBlockMode {
    /// One binomial draw per coordinate; needs integer block counts.
    Direct,
    /// Draw the block maximum by inverting F(k)^J in log space. Works
    /// for any log-scale count but only yields the upward deviation.
    MaxInversion,
}

#[derive(Debug, Clone)]
pub enum Target {
    ProductSup { view: BlockView, side: Side, mode: HugeBlockMode },
    CoupledSup { seq: ProbSeq },
    TwoPoint { seq: ProbSeq },
    /// Uses its own sample count; the plan-level n is ignored here.
    CdfSup { x0: f64, n_samples: u64 },
}

#[derive(Debug, Clone)]
pub struct SimPlan {
    pub seed: u64,
    pub trials: u64,
    pub n: u64,
    pub target: Target,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailProb {
    pub estimate: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub quantiles: Vec<(f64, f64)>,
    pub tail_probs: Vec<(f64, TailProb)>,
    pub trials: u64,
    pub seed: u64,
}

const MAX_DIRECT_COUNT: u64 = 10_000_000;

/// Runs the plan and summarizes with default quantile levels.
pub fn simulate(plan: &SimPlan) -> Result<SimEstimate> {
    simulate_summary(plan, &[0.5, 0.9, 0.99], &[])
}

/// Runs the plan and summarizes at the given levels and thresholds.
pub fn simulate_summary(
    plan: &SimPlan,
    levels: &[f64],
    thresholds: &[f64],
) -> Result<SimEstimate> {
    let values = simulate_values(plan)?;
    let mut est = summarize(&values, levels, thresholds)?;
    est.seed = plan.seed;
    Ok(est)
}

/// Per-trial values in trial order.
pub fn simulate_values(plan: &SimPlan) -> Result<Vec<f64>> {
    simulate_values_threads(plan, thread_override())
}

fn thread_override() -> Option<usize> {
    std::env::var("DEVBOUND_THREADS").ok()?.parse().ok().filter(|&k| k >= 1)
}

pub(crate) fn simulate_values_threads(
    plan: &SimPlan,
    threads: Option<usize>,
) -> Result<Vec<f64>> {
    if plan.trials == 0 {
        return Err(Error::domain("simulation needs at least 1 trial"));
    }
    let prep = prepare(plan)?;
    let seed = plan.seed;
    let trial = move |t: u64| -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t);
        match &prep {
            Prepared::ProductDirect { n, blocks, side } => {
                product_direct_trial(&mut rng, *n, blocks, *side)
            }
            Prepared::ProductMax { n, blocks } => product_max_trial(&mut rng, *n, blocks),
            Prepared::Coupled { n, kind } => coupled_trial(&mut rng, *n, kind),
            Prepared::TwoPoint { n, eta, blocks } => {
                two_point_trial(&mut rng, *n, *eta, blocks)
            }
            Prepared::Cdf { m, x0 } => {
                let us = draw_sorted_uniforms(&mut rng, *m);
                cdf_sup_from_sorted(&us, *x0)
            }
        }
    };
    let run = || (0..plan.trials).into_par_iter().map(trial).collect();
    Ok(match threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::resource(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    })
}

enum CoupledKind {
    /// The sequence takes finitely many distinct values; the sup only
    /// needs the empirical CDF at those points.
    Values(Vec<f64>),
    /// Power-law values change at every index; the sup is attained at
    /// the indices where the sequence crosses an order statistic, plus
    /// the range ends.
    Power { a: f64, b: f64, capf: f64, plateau_end: f64 },
}

/// Per-block inversion table for the max draw: entry k holds
/// log_count + ln(-ln F(k)), nonincreasing in k, so the smallest k with
/// entry <= ln G is one partition_point away.
struct MaxBlock {
    q: f64,
    table: Vec<f64>,
}

impl MaxBlock {
    fn build(n: u64, q: f64, log_count: f64) -> Result<Self> {
        let spec = BinomialSpec::new(n, q)?;
        let mut table = vec![0.0; n as usize + 1];
        // Upper tails accumulate from the small end, so the running
        // logaddexp only ever adds a larger term to a smaller sum.
        let mut tail = f64::NEG_INFINITY;
        for k in (0..=n).rev() {
            table[k as usize] = log_count + ln_neg_ln_one_minus_exp(tail.min(0.0));
            tail = logaddexp(tail, log_pmf(&spec, k));
        }
        Ok(MaxBlock { q, table })
    }
}

enum Prepared {
    ProductDirect { n: u64, blocks: Vec<(u64, f64, Binomial)>, side: Side },
    ProductMax { n: u64, blocks: Vec<MaxBlock> },
    Coupled { n: u64, kind: CoupledKind },
    TwoPoint { n: u64, eta: f64, blocks: Vec<(u64, f64, Binomial)> },
    Cdf { m: u64, x0: f64 },
}

fn binom(n: u64, p: f64) -> Result<Binomial> {
    Binomial::new(n, p).map_err(|e| Error::domain(format!("binomial draw setup: {e}")))
}

fn prepare(plan: &SimPlan) -> Result<Prepared> {
    let n = plan.n;
    let need_n = |what: &str| -> Result<()> {
        if n == 0 {
            return Err(Error::domain(format!("{what} needs n >= 1")));
        }
        Ok(())
    };
    match &plan.target {
        Target::ProductSup { view, side, mode } => {
            need_n("the product experiment")?;
            match mode {
                HugeBlockMode::Direct => {
                    let mut blocks = Vec::new();
                    for b in view.blocks.iter().filter(|b| b.q > 0.0) {
                        let count = b.count.ok_or_else(|| {
                            Error::unrepresentable(
                                "direct sampling needs integer block counts; \
                                 use max_inversion for log-scale blocks",
                            )
                        })?;
                        if count > MAX_DIRECT_COUNT {
                            return Err(Error::unrepresentable(format!(
                                "direct sampling caps block counts at {MAX_DIRECT_COUNT}, \
                                 got {count}; use max_inversion"
                            )));
                        }
                        blocks.push((count, b.q, binom(n, b.q)?));
                    }
                    Ok(Prepared::ProductDirect { n, blocks, side: *side })
                }
                HugeBlockMode::MaxInversion => {
                    if *side != Side::Upper {
                        return Err(Error::domain(
                            "max_inversion draws block maxima only, so only the \
                             upper side is available",
                        ));
                    }
                    let blocks = view
                        .blocks
                        .iter()
                        .filter(|b| b.q > 0.0)
                        .map(|b| MaxBlock::build(n, b.q, b.log_count))
                        .collect::<Result<_>>()?;
                    Ok(Prepared::ProductMax { n, blocks })
                }
            }
        }
        Target::CoupledSup { seq } => {
            need_n("the coupled experiment")?;
            if seq.kind() != SeqKind::Mean {
                return Err(Error::domain("the coupled experiment needs a mean sequence"));
            }
            let kind = match *seq.family() {
                Family::PowerLaw { a, b, cap_index } => {
                    let capf = cap_index.map(|m| m as f64).unwrap_or(f64::INFINITY);
                    let plateau_end = seq::power_cap_boundary(a, b).floor().clamp(0.0, capf);
                    CoupledKind::Power { a, b, capf, plateau_end }
                }
                _ => match seq.block_view(&TruncationPolicy::for_n(n))? {
                    Blocked::Exact(v) => CoupledKind::Values(
                        v.blocks.iter().filter(|b| b.q > 0.0).map(|b| b.q).collect(),
                    ),
                    Blocked::Bracket { .. } => unreachable!("only power laws bracket"),
                },
            };
            Ok(Prepared::Coupled { n, kind })
        }
        Target::TwoPoint { seq } => {
            need_n("the two-point experiment")?;
            if seq.kind() != SeqKind::Variance {
                return Err(Error::domain("the two-point experiment needs a variance sequence"));
            }
            let view = match seq.block_view(&TruncationPolicy::for_n(n))? {
                Blocked::Exact(v) => v,
                Blocked::Bracket { .. } => {
                    return Err(Error::unrepresentable(
                        "the two-point experiment needs an exactly enumerable variance profile",
                    ))
                }
            };
            let total = view.total_mass();
            let mut blocks = Vec::new();
            let mut eta = 0.0;
            if total > 0.0 {
                eta = (2.0 * n as f64 * total).sqrt();
                for b in view.blocks.iter().filter(|b| b.q > 0.0) {
                    let count = b.count.ok_or_else(|| {
                        Error::unrepresentable(
                            "the two-point experiment needs integer block counts",
                        )
                    })?;
                    if count > MAX_DIRECT_COUNT {
                        return Err(Error::unrepresentable(format!(
                            "the two-point experiment caps block counts at {MAX_DIRECT_COUNT}, \
                             got {count}"
                        )));
                    }
                    let bprob = b.q / (eta * eta);
                    blocks.push((count, bprob, binom(n, bprob)?));
                }
            }
            Ok(Prepared::TwoPoint { n, eta, blocks })
        }
        Target::CdfSup { x0, n_samples } => {
            if !(*x0 > 0.0 && *x0 <= 1.0) {
                return Err(Error::domain(format!("cdf cutoff must be in (0, 1], got {x0}")));
            }
            if *n_samples == 0 {
                return Err(Error::domain("the cdf experiment needs at least 1 sample"));
            }
            Ok(Prepared::Cdf { m: *n_samples, x0: *x0 })
        }
    }
}

fn product_direct_trial(
    rng: &mut ChaCha8Rng,
    n: u64,
    blocks: &[(u64, f64, Binomial)],
    side: Side,
) -> f64 {
    let nf = n as f64;
    let mut dev = 0.0f64;
    for &(count, q, dist) in blocks {
        let mut kmax = 0u64;
        let mut kmin = u64::MAX;
        for _ in 0..count {
            let y = dist.sample(rng);
            kmax = kmax.max(y);
            kmin = kmin.min(y);
        }
        let hi = kmax as f64 / nf - q;
        let lo = q - kmin as f64 / nf;
        let d = match side {
            Side::TwoSided => hi.abs().max(lo.abs()),
            Side::Upper => hi.max(0.0),
            Side::Lower => lo.max(0.0),
        };
        dev = dev.max(d);
    }
    dev
}

/// Smallest k with F(k)^J >= U, via G = -ln U ~ Exp(1): the condition is
/// J * (-ln F(k)) <= G, evaluated against the precomputed log tables so
/// that counts like e^{10^4} never leave log scale.
fn product_max_trial(rng: &mut ChaCha8Rng, n: u64, blocks: &[MaxBlock]) -> f64 {
    let nf = n as f64;
    let mut dev = 0.0f64;
    for block in blocks {
        let g: f64 = rng.sample(Exp1);
        let ln_g = g.ln();
        let k = block.table.partition_point(|&v| v > ln_g);
        dev = dev.max((k as f64 / nf - block.q).max(0.0));
    }
    dev
}

fn draw_sorted_uniforms(rng: &mut ChaCha8Rng, m: u64) -> Vec<f64> {
    let mut us: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    us.sort_unstable_by(f64::total_cmp);
    us
}

fn coupled_trial(rng: &mut ChaCha8Rng, n: u64, kind: &CoupledKind) -> f64 {
    let us = draw_sorted_uniforms(rng, n);
    let nf = n as f64;
    let fn_at = |v: f64| us.partition_point(|&u| u <= v) as f64 / nf;
    match kind {
        CoupledKind::Values(vals) => {
            vals.iter().map(|&v| (fn_at(v) - v).abs()).fold(0.0, f64::max)
        }
        CoupledKind::Power { a, b, capf, plateau_end } => {
            let p_at = |j: f64| (a * j.powf(-*b)).min(0.5);
            let mut best = 0.0f64;
            let mut eval = |j: f64| {
                if j >= 1.0 && j <= *capf {
                    let v = p_at(j);
                    best = best.max((fn_at(v) - v).abs());
                }
            };
            eval(1.0);
            if *plateau_end >= 1.0 {
                eval(*plateau_end);
                eval(*plateau_end + 1.0);
            }
            if capf.is_finite() {
                eval(*capf);
            }
            for &u in &us {
                if u <= 0.0 {
                    continue;
                }
                // Largest j with p(j) >= u; the sup over each constant
                // stretch of F_n(p(j)) sits at such crossings.
                let j = (a / u).powf(1.0 / b).floor();
                eval(j);
                eval(j + 1.0);
            }
            best
        }
    }
}

fn two_point_trial(
    rng: &mut ChaCha8Rng,
    n: u64,
    eta: f64,
    blocks: &[(u64, f64, Binomial)],
) -> f64 {
    let nf = n as f64;
    let mut dev = 0.0f64;
    for &(count, bprob, dist) in blocks {
        let mut kmax = 0u64;
        let mut kmin = u64::MAX;
        for _ in 0..count {
            let y = dist.sample(rng);
            kmax = kmax.max(y);
            kmin = kmin.min(y);
        }
        let d = (kmax as f64 / nf - bprob).abs().max((bprob - kmin as f64 / nf).abs());
        dev = dev.max(d);
    }
    eta * dev
}

/// sup_{u <= x0} |F_n(u) - u| from sorted samples: per order statistic
/// the one-sided gaps u_(i) - (i-1)/m and i/m - u_(i), plus the cutoff
/// endpoint.
fn cdf_sup_from_sorted(us: &[f64], x0: f64) -> f64 {
    let m = us.len() as f64;
    let mut best = 0.0f64;
    let mut k = 0usize;
    for (i, &u) in us.iter().enumerate() {
        if u > x0 {
            break;
        }
        k = i + 1;
        best = best.max(u - i as f64 / m).max((i + 1) as f64 / m - u);
    }
    best.max((k as f64 / m - x0).abs())
}

/// Two-sided 95% normal quantile used for every confidence band.
pub const Z95: f64 = 1.959963984540054;

fn wilson(successes: f64, n: f64) -> TailProb {
    let p = successes / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    TailProb {
        estimate: p,
        wilson_lo: (center - half).max(0.0),
        wilson_hi: (center + half).min(1.0),
    }
}

/// Mean, standard error, nearest-rank quantiles and Wilson 95% bands for
/// strict threshold exceedances.
///
/// # Errors
/// `Domain` with fewer than 2 samples or levels outside (0, 1].
pub fn summarize(samples: &[f64], levels: &[f64], thresholds: &[f64]) -> Result<SimEstimate> {
    if samples.len() < 2 {
        return Err(Error::domain(format!(
            "summaries need at least 2 samples, got {}",
            samples.len()
        )));
    }
    let nt = samples.len() as f64;
    let mut acc = Kahan::new();
    for &x in samples {
        acc.add(x);
    }
    let mean = acc.value() / nt;
    let mut sq = Kahan::new();
    for &x in samples {
        sq.add((x - mean) * (x - mean));
    }
    let std_error = (sq.value() / (nt - 1.0) / nt).sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let mut quantiles = Vec::with_capacity(levels.len());
    for &level in levels {
        if !(level > 0.0 && level <= 1.0) {
            return Err(Error::domain(format!(
                "quantile levels must be in (0, 1], got {level}"
            )));
        }
        let rank = (level * nt).ceil().max(1.0) as usize;
        quantiles.push((level, sorted[rank.min(sorted.len()) - 1]));
    }
    let tail_probs = thresholds
        .iter()
        .map(|&t| {
            let c = samples.iter().filter(|&&x| x > t).count();
            (t, wilson(c as f64, nt))
        })
        .collect();
    Ok(SimEstimate { mean, std_error, quantiles, tail_probs, trials: samples.len() as u64, seed: 0 })
}
