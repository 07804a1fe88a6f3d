//! Probability sequences and their run-length block views.
//!
//! A sequence assigns each coordinate j = 1, 2, ... a success probability
//! p(j) in [0, 1/2], nonincreasing in j. Most operations only need the
//! distinct values and how many coordinates share each one, so the
//! canonical working form is a list of blocks (count, q) with strictly
//! decreasing q. Counts may be far beyond 2^53 (some families index
//! e^{10^4}-many coordinates), in which case a block carries only its
//! log-count and downstream code stays in the log domain.
//!
//! The power-law family cannot be represented exactly by finitely many
//! blocks, so its block view is a pair of envelopes: within each dyadic
//! block the upper view takes the left-endpoint value and the lower view
//! the right-endpoint value, bracketing the true sequence pointwise.

use crate::error::{Error, Result};
use crate::numeric::{ln_expm1, softplus, Kahan};

/// Whether block values are mean parameters p(j) or variance proxies
/// sigma^2(j). The rate certificates differ between the two.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqKind {
    Mean,
    Variance,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// p(j) = q for j <= J = e^{log_j}, 0 beyond. J may be fractional;
    /// integer-count consumers will reject it then.
    Step { log_j: f64, q: f64 },
    /// Explicit (log_count, q) blocks, q strictly decreasing.
    Blocks { entries: Vec<(f64, f64)> },
    /// A finite list of values, nonincreasing. May be empty.
    Explicit { values: Vec<f64> },
    /// p(j) = min(a j^{-b}, 1/2), optionally cut off after cap_index.
    PowerLaw { a: f64, b: f64, cap_index: Option<u64> },
    /// Single block with q = 1/(K sqrt(n_ref)) and J = floor(e^{K sqrt(n_ref)}) - 1.
    OpenProblem { n_ref: u64, k_factor: f64 },
    /// p(j) = alpha / (2 n_ref j) for j <= j_max: every coordinate sits
    /// at or below the 1/(2 n j) threshold when n = n_ref and alpha <= 1.
    Poissonian { alpha: f64, n_ref: u64, j_max: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbSeq {
    family: Family,
    kind: SeqKind,
}

/// One run of equal-valued coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    /// ln of the number of coordinates in this block.
    pub log_count: f64,
    /// The common probability value, in [0, 1/2].
    pub q: f64,
    /// ln(1 + j_end) where j_end is the index of the last coordinate of
    /// this block (equivalently the cumulative count so far).
    pub end_log_index: f64,
    /// Exact count when it fits in 2^53, else None.
    pub count: Option<u64>,
    /// Exact cumulative last index when it fits in 2^53, else None.
    pub end_index: Option<u64>,
}

impl Block {
    /// ln(j_end): log of the cumulative count through this block.
    pub fn end_log_count(&self) -> f64 {
        match self.end_index {
            Some(e) => (e as f64).ln(),
            None => ln_expm1(self.end_log_index),
        }
    }
}

/// Run-length view of a sequence: blocks in index order with strictly
/// decreasing q.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BlockView {
    pub blocks: Vec<Block>,
}

impl BlockView {
    fn from_counts(counts_q: &[(f64, f64)]) -> Result<Self> {
        let mut blocks = Vec::with_capacity(counts_q.len());
        let mut cum_exact: Option<u64> = Some(0);
        let mut cum_log = f64::NEG_INFINITY;
        let mut prev_q = f64::INFINITY;
        for &(log_count, q) in counts_q {
            if !(log_count >= 0.0) || !log_count.is_finite() {
                return Err(Error::domain(format!(
                    "block log-count must be finite and >= 0, got {log_count}"
                )));
            }
            if !(0.0..=0.5).contains(&q) {
                return Err(Error::domain(format!("block value must be in [0, 1/2], got {q}")));
            }
            if q >= prev_q {
                return Err(Error::domain(format!(
                    "block values must be strictly decreasing, got {q} after {prev_q}"
                )));
            }
            prev_q = q;
            let count = int_from_log(log_count);
            cum_exact = match (cum_exact, count) {
                (Some(c), Some(k)) if c + k <= MAX_EXACT => Some(c + k),
                _ => None,
            };
            cum_log = crate::numeric::logaddexp(cum_log, log_count);
            let end_log_index = match cum_exact {
                Some(c) => ((c + 1) as f64).ln(),
                None => softplus(cum_log),
            };
            blocks.push(Block { log_count, q, end_log_index, count, end_index: cum_exact });
        }
        Ok(BlockView { blocks })
    }

    /// Sum of count * q over blocks: the expected number of successes per
    /// draw (total mass). +inf when counts overflow f64.
    pub fn total_mass(&self) -> f64 {
        let mut acc = Kahan::new();
        for b in &self.blocks {
            if b.q > 0.0 {
                let term = (b.log_count + b.q.ln()).exp();
                if term.is_infinite() {
                    return f64::INFINITY;
                }
                acc.add(term);
            }
        }
        acc.value()
    }

    /// True when every block carries an exact integer count.
    pub fn all_counts_exact(&self) -> bool {
        self.blocks.iter().all(|b| b.count.is_some())
    }
}

/// Block materialization result: exact for block-representable families,
/// an envelope pair for power laws.
#[derive(Debug, Clone, PartialEq)]
pub enum Blocked {
    Exact(BlockView),
    Bracket {
        upper: BlockView,
        lower: BlockView,
        /// Set when the enumeration was cut before the (infinite) end;
        /// carries what is needed to bound the remainder analytically.
        tail: Option<PowerTail>,
    },
}

impl Blocked {
    /// The view safe for upper bounds (exact, or the upper envelope).
    pub fn upper_view(&self) -> &BlockView {
        match self {
            Blocked::Exact(v) => v,
            Blocked::Bracket { upper, .. } => upper,
        }
    }
}

/// Remainder marker for truncated power-law enumerations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTail {
    pub a: f64,
    pub b: f64,
    /// First index not covered by the enumerated blocks.
    pub resume_index: f64,
}

/// Where to stop materializing blocks of an infinite family: after the
/// expected number of tail successes among n draws drops below
/// tail_tol / n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    pub n: u64,
    pub tail_tol: f64,
}

impl TruncationPolicy {
    pub fn for_n(n: u64) -> Self {
        TruncationPolicy { n, tail_tol: 1e-3 }
    }
}

/// Extended-real sum of powers of the sequence values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Seminorm {
    pub value: f64,
    /// True when the infinite sum genuinely diverges (as opposed to
    /// merely overflowing f64, which yields value = +inf with
    /// diverges = false).
    pub diverges: bool,
}

const MAX_EXACT: u64 = 1 << 53;
/// Capped power laws at or below this many coordinates are enumerated
/// exactly instead of bracketed.
const POWER_EXACT_ENUM: u64 = 4096;
/// Indices beyond 2^53 cannot be distinguished in f64; dyadic envelope
/// generation stops there at the latest.
const POWER_MAX_LOG_INDEX: f64 = 36.7368005696771;
/// Hard cap on materialized blocks for the one-block-per-coordinate
/// Poissonian family.
const POISSONIAN_MAX_BLOCKS: u64 = 100_000;

fn int_from_log(log_count: f64) -> Option<u64> {
    if log_count > 36.8 {
        // e^36.8 > 2^53: counts this large are log-scale only.
        return None;
    }
    let c = log_count.exp();
    let r = c.round();
    if r >= 1.0 && (c - r).abs() <= 1e-9 * r.max(1.0) {
        Some(r as u64)
    } else {
        None
    }
}

impl ProbSeq {
    pub fn step(log_j: f64, q: f64) -> Result<Self> {
        if !(log_j >= 0.0) || !log_j.is_finite() {
            return Err(Error::domain(format!("step needs finite log J >= 0, got {log_j}")));
        }
        if !(q > 0.0 && q <= 0.5) {
            return Err(Error::domain(format!("step value must be in (0, 1/2], got {q}")));
        }
        Ok(ProbSeq { family: Family::Step { log_j, q }, kind: SeqKind::Mean })
    }

    /// Step family parameterized by ln(J + 1) instead of ln J.
    pub fn step_with_ln_jp1(ln_jp1: f64, q: f64) -> Result<Self> {
        if !(ln_jp1 > std::f64::consts::LN_2 * (1.0 - 1e-12)) || !ln_jp1.is_finite() {
            return Err(Error::domain(format!(
                "step needs ln(J+1) >= ln 2 so that J >= 1, got {ln_jp1}"
            )));
        }
        Self::step(ln_expm1(ln_jp1).max(0.0), q)
    }

    pub fn blocks(entries: Vec<(f64, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::domain("blocks family needs at least one block"));
        }
        // Validation happens through the view construction.
        BlockView::from_counts(&entries)?;
        Ok(ProbSeq { family: Family::Blocks { entries }, kind: SeqKind::Mean })
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        let mut prev = f64::INFINITY;
        for &v in &values {
            if !(0.0..=0.5).contains(&v) {
                return Err(Error::domain(format!("explicit value out of [0, 1/2]: {v}")));
            }
            if v > prev {
                return Err(Error::domain("explicit values must be nonincreasing"));
            }
            prev = v;
        }
        Ok(ProbSeq { family: Family::Explicit { values }, kind: SeqKind::Mean })
    }

    pub fn power_law(a: f64, b: f64, cap_index: Option<u64>) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() || !(b > 0.0) || !b.is_finite() {
            return Err(Error::domain(format!("power law needs a > 0, b > 0, got a={a}, b={b}")));
        }
        if cap_index == Some(0) {
            return Err(Error::domain("power law cap index must be >= 1"));
        }
        Ok(ProbSeq { family: Family::PowerLaw { a, b, cap_index }, kind: SeqKind::Mean })
    }

    pub fn open_problem(n_ref: u64, k_factor: f64) -> Result<Self> {
        if n_ref == 0 {
            return Err(Error::domain("open problem family needs n_ref >= 1"));
        }
        let root = (n_ref as f64).sqrt();
        if !(2.0..=root).contains(&k_factor) {
            return Err(Error::domain(format!(
                "open problem needs K in [2, sqrt(n_ref)] = [2, {root}], got {k_factor}"
            )));
        }
        Ok(ProbSeq { family: Family::OpenProblem { n_ref, k_factor }, kind: SeqKind::Mean })
    }

    pub fn poissonian(alpha: f64, n_ref: u64, j_max: u64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::domain(format!("poissonian alpha must be in (0, 1], got {alpha}")));
        }
        if n_ref == 0 || j_max == 0 {
            return Err(Error::domain("poissonian needs n_ref >= 1 and J >= 1"));
        }
        Ok(ProbSeq { family: Family::Poissonian { alpha, n_ref, j_max }, kind: SeqKind::Mean })
    }

    pub fn as_variance(mut self) -> Self {
        self.kind = SeqKind::Variance;
        self
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn kind(&self) -> SeqKind {
        self.kind
    }

    /// p(j) for 1-based coordinate j.
    ///
    /// # Errors
    /// `Domain` for j = 0.
    pub fn value_at(&self, j: u64) -> Result<f64> {
        if j == 0 {
            return Err(Error::domain("coordinates are 1-based"));
        }
        let jf = j as f64;
        Ok(match &self.family {
            Family::Step { log_j, q } => {
                if jf.ln() <= *log_j {
                    *q
                } else {
                    0.0
                }
            }
            Family::Blocks { entries } => {
                let view = BlockView::from_counts(entries).expect("validated at construction");
                let lp1 = (jf + 1.0).ln();
                let mut val = 0.0;
                for b in &view.blocks {
                    let inside = match b.end_index {
                        Some(e) => j <= e,
                        None => lp1 <= b.end_log_index,
                    };
                    if inside {
                        val = b.q;
                        break;
                    }
                }
                val
            }
            Family::Explicit { values } => {
                if (j as usize) <= values.len() {
                    values[j as usize - 1]
                } else {
                    0.0
                }
            }
            Family::PowerLaw { a, b, cap_index } => {
                if let Some(m) = cap_index {
                    if j > *m {
                        return Ok(0.0);
                    }
                }
                (a * jf.powf(-b)).min(0.5)
            }
            Family::OpenProblem { n_ref, k_factor } => {
                let x = k_factor * (*n_ref as f64).sqrt();
                // j <= J = floor(e^x) - 1 iff j + 1 <= e^x iff ln(j+1) <= x.
                if (jf + 1.0).ln() <= x {
                    1.0 / x
                } else {
                    0.0
                }
            }
            Family::Poissonian { alpha, n_ref, j_max } => {
                if j <= *j_max {
                    alpha / (2.0 * *n_ref as f64 * jf)
                } else {
                    0.0
                }
            }
        })
    }

    /// Materialize the run-length view. Exact for every family but the
    /// power law, which gets bracketing envelopes.
    pub fn block_view(&self, truncation: &TruncationPolicy) -> Result<Blocked> {
        match &self.family {
            Family::Step { log_j, q } => {
                Ok(Blocked::Exact(BlockView::from_counts(&[(*log_j, *q)])?))
            }
            Family::Blocks { entries } => Ok(Blocked::Exact(BlockView::from_counts(entries)?)),
            Family::Explicit { values } => {
                let mut runs: Vec<(f64, f64)> = Vec::new();
                for &v in values {
                    match runs.last_mut() {
                        Some((c, q)) if *q == v => *c += 1.0,
                        _ => runs.push((1.0, v)),
                    }
                }
                let entries: Vec<(f64, f64)> =
                    runs.into_iter().map(|(c, q)| (c.ln(), q)).collect();
                Ok(Blocked::Exact(BlockView::from_counts(&entries)?))
            }
            Family::OpenProblem { n_ref, k_factor } => {
                let x = k_factor * (*n_ref as f64).sqrt();
                let q = 1.0 / x;
                // J = floor(e^x) - 1; exact while e^x fits the integer range.
                let log_count = if x <= 36.0 {
                    let j = x.exp().floor() as u64 - 1;
                    if j == 0 {
                        return Err(Error::domain(
                            "open problem parameters leave an empty sequence",
                        ));
                    }
                    (j as f64).ln()
                } else {
                    // ln(e^x - 1); the floor is invisible at this scale.
                    x + (-(-x).exp()).ln_1p()
                };
                Ok(Blocked::Exact(BlockView::from_counts(&[(log_count, q)])?))
            }
            Family::Poissonian { alpha, n_ref, j_max } => {
                if *j_max > POISSONIAN_MAX_BLOCKS {
                    return Err(Error::resource(format!(
                        "poissonian J={j_max} exceeds the {POISSONIAN_MAX_BLOCKS}-block cap"
                    )));
                }
                let c = alpha / (2.0 * *n_ref as f64);
                let entries: Vec<(f64, f64)> =
                    (1..=*j_max).map(|j| (0.0, c / j as f64)).collect();
                Ok(Blocked::Exact(BlockView::from_counts(&entries)?))
            }
            Family::PowerLaw { a, b, cap_index } => {
                power_law_blocks(*a, *b, *cap_index, truncation)
            }
        }
    }

    /// Expected number of draws landing past coordinate j_cut when each
    /// of the n rounds samples every coordinate: n * sum_{j > j_cut} p(j).
    pub fn head_mass(&self, j_cut: u64, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::domain("head_mass needs n >= 1"));
        }
        let nf = n as f64;
        let cut = j_cut as f64;
        Ok(match &self.family {
            Family::Step { log_j, q } => {
                let count_beyond = (log_j.exp() - cut).max(0.0);
                nf * q * count_beyond
            }
            Family::Blocks { entries } => {
                let view = BlockView::from_counts(entries).expect("validated at construction");
                let mut acc = Kahan::new();
                let mut start = 1.0f64; // first index of the current block
                for bl in &view.blocks {
                    let count = bl.log_count.exp();
                    let end = start + count - 1.0;
                    let beyond = (end - cut.max(start - 1.0)).max(0.0).min(count);
                    if bl.q > 0.0 && beyond > 0.0 {
                        let term = nf * bl.q * beyond;
                        if term.is_infinite() {
                            return Ok(f64::INFINITY);
                        }
                        acc.add(term);
                    }
                    start = end + 1.0;
                }
                acc.value()
            }
            Family::Explicit { values } => {
                let mut acc = Kahan::new();
                for (i, &v) in values.iter().enumerate() {
                    if (i as u64 + 1) > j_cut {
                        acc.add(nf * v);
                    }
                }
                acc.value()
            }
            Family::PowerLaw { a, b, cap_index } => {
                nf * power_law_tail_mass(*a, *b, *cap_index, j_cut)
            }
            Family::OpenProblem { n_ref, k_factor } => {
                let x = k_factor * (*n_ref as f64).sqrt();
                let q = 1.0 / x;
                let count_beyond = if x <= 36.0 {
                    ((x.exp().floor() - 1.0) - cut).max(0.0)
                } else {
                    // Counts here dwarf any cut representable as u64.
                    (x + (-(-x).exp()).ln_1p()).exp()
                };
                nf * q * count_beyond
            }
            Family::Poissonian { alpha, n_ref, j_max } => {
                if j_cut >= *j_max {
                    0.0
                } else {
                    let c = alpha / (2.0 * *n_ref as f64);
                    nf * c * (harmonic(*j_max) - harmonic(j_cut))
                }
            }
        })
    }

    /// sum_j p(j)^r as an extended real.
    ///
    /// # Errors
    /// `Domain` for r <= 0.
    pub fn seminorm(&self, r: f64) -> Result<Seminorm> {
        if !(r > 0.0) {
            return Err(Error::domain(format!("seminorm order must be > 0, got {r}")));
        }
        let finite = |value: f64| Seminorm { value, diverges: false };
        Ok(match &self.family {
            Family::Step { log_j, q } => finite((log_j + r * q.ln()).exp()),
            Family::Blocks { entries } => {
                let mut acc = Kahan::new();
                for &(lc, q) in entries {
                    if q > 0.0 {
                        let t = (lc + r * q.ln()).exp();
                        if t.is_infinite() {
                            return Ok(finite(f64::INFINITY));
                        }
                        acc.add(t);
                    }
                }
                finite(acc.value())
            }
            Family::Explicit { values } => {
                let mut acc = Kahan::new();
                for &v in values {
                    if v > 0.0 {
                        acc.add(v.powf(r));
                    }
                }
                finite(acc.value())
            }
            Family::PowerLaw { a, b, cap_index } => {
                power_law_seminorm(*a, *b, *cap_index, r)
            }
            Family::OpenProblem { n_ref, k_factor } => {
                let x = k_factor * (*n_ref as f64).sqrt();
                let log_count = if x <= 36.0 {
                    (x.exp().floor() - 1.0).ln()
                } else {
                    x + (-(-x).exp()).ln_1p()
                };
                finite((log_count + r * (1.0 / x).ln()).exp())
            }
            Family::Poissonian { alpha, n_ref, j_max } => {
                let c = alpha / (2.0 * *n_ref as f64);
                finite(c.powf(r) * power_sum(r, *j_max))
            }
        })
    }
}

impl std::fmt::Display for ProbSeq {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.kind == SeqKind::Variance {
            write!(f, "variance:")?;
        }
        match &self.family {
            Family::Step { log_j, q } => write!(f, "step(logJ={log_j},q={q})"),
            Family::Blocks { entries } => {
                write!(f, "blocks(")?;
                for (i, (lc, q)) in entries.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{lc}:{q}")?;
                }
                write!(f, ")")
            }
            Family::Explicit { values } => {
                write!(f, "explicit(")?;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, ")")
            }
            Family::PowerLaw { a, b, cap_index } => match cap_index {
                Some(m) => write!(f, "power_law(a={a},b={b},cap={m})"),
                None => write!(f, "power_law(a={a},b={b})"),
            },
            Family::OpenProblem { n_ref, k_factor } => {
                write!(f, "open_problem(n_ref={n_ref},K={k_factor})")
            }
            Family::Poissonian { alpha, n_ref, j_max } => {
                write!(f, "poissonian(alpha={alpha},n_ref={n_ref},J={j_max})")
            }
        }
    }
}

/// Index below which p(j) = 1/2 because of the cap: (2a)^{1/b}.
pub(crate) fn power_cap_boundary(a: f64, b: f64) -> f64 {
    (2.0 * a).powf(1.0 / b)
}

fn power_law_blocks(
    a: f64,
    b: f64,
    cap_index: Option<u64>,
    truncation: &TruncationPolicy,
) -> Result<Blocked> {
    if let Some(m) = cap_index {
        if m <= POWER_EXACT_ENUM {
            let values: Vec<f64> =
                (1..=m).map(|j| (a * (j as f64).powf(-b)).min(0.5)).collect();
            let seq = ProbSeq::explicit(values).expect("power-law values are valid");
            return seq.block_view(truncation);
        }
    }
    let plateau_end_real = power_cap_boundary(a, b).floor();
    let end_limit = cap_index
        .map(|m| m as f64)
        .unwrap_or(f64::INFINITY)
        .min(POWER_MAX_LOG_INDEX.exp());
    let plateau_end = plateau_end_real.clamp(0.0, end_limit);

    let mut upper: Vec<(f64, f64)> = Vec::new();
    let mut lower: Vec<(f64, f64)> = Vec::new();
    if plateau_end >= 1.0 {
        upper.push((plateau_end.ln(), 0.5));
        lower.push((plateau_end.ln(), 0.5));
    }
    let p_at = |j: f64| (a * j.powf(-b)).min(0.5);
    let tol = truncation.tail_tol / truncation.n as f64;
    let mut start = plateau_end + 1.0;
    let mut truncated_at: Option<f64> = None;
    while start <= end_limit {
        // Dyadic block [start, end]: end is the last index before the
        // next power of two past start, clamped to the overall limit.
        let next_pow = (2.0f64).powf(start.log2().floor() + 1.0);
        let end = (next_pow - 1.0).min(end_limit);
        let count = end - start + 1.0;
        upper.push((count.ln(), p_at(start)));
        lower.push((count.ln(), p_at(end)));
        let tail_mass = truncation.n as f64 * power_law_tail_mass(a, b, cap_index, end as u64);
        if tail_mass < tol {
            if end < end_limit {
                truncated_at = Some(end + 1.0);
            }
            break;
        }
        if end >= end_limit {
            if cap_index.is_none() {
                truncated_at = Some(end + 1.0);
            }
            break;
        }
        start = end + 1.0;
    }
    let tail = truncated_at.map(|resume_index| PowerTail { a, b, resume_index });
    Ok(Blocked::Bracket {
        upper: BlockView::from_counts(&upper)?,
        lower: BlockView::from_counts(&lower)?,
        tail,
    })
}

/// sum_{j > j_cut} min(a j^{-b}, 1/2); +inf when b <= 1 and no cap.
pub(crate) fn power_law_tail_mass(a: f64, b: f64, cap_index: Option<u64>, j_cut: u64) -> f64 {
    let plateau_end = power_cap_boundary(a, b).floor().max(0.0);
    let effective_end = cap_index.map(|m| m as f64).unwrap_or(f64::INFINITY);
    let cut = j_cut as f64;
    let mut total = 0.0f64;
    // Plateau part beyond the cut.
    let plateau_hi = plateau_end.min(effective_end);
    if plateau_hi > cut {
        total += 0.5 * (plateau_hi - cut);
    }
    // Power part: indices in (max(cut, plateau_end), effective_end].
    let lo = cut.max(plateau_hi);
    if effective_end.is_infinite() {
        if b <= 1.0 {
            return f64::INFINITY;
        }
        total += a * power_tail_sum(b, lo);
    } else if effective_end > lo {
        total += a * (power_tail_sum(b, lo) - power_tail_sum(b, effective_end));
    }
    total
}

fn power_law_seminorm(a: f64, b: f64, cap_index: Option<u64>, r: f64) -> Seminorm {
    let rb = r * b;
    let plateau_end = power_cap_boundary(a, b).floor().max(0.0);
    let effective_end = cap_index.map(|m| m as f64).unwrap_or(f64::INFINITY);
    let plateau_hi = plateau_end.min(effective_end);
    let mut total = plateau_hi * 0.5f64.powf(r);
    let ar = a.powf(r);
    if effective_end.is_infinite() {
        if rb <= 1.0 {
            return Seminorm { value: f64::INFINITY, diverges: true };
        }
        total += ar * power_tail_sum(rb, plateau_hi);
    } else if effective_end > plateau_hi {
        total += ar * (power_tail_sum(rb, plateau_hi) - power_tail_sum(rb, effective_end));
    }
    Seminorm { value: total, diverges: false }
}

// Euler-Maclaurin machinery for sums of j^{-s}. Heads are summed
// directly below this index; the asymptotic expansion takes over after.
const EM_HEAD: u64 = 50;

/// sum_{j > from} j^{-s} for s > 1, from >= 0 (integer-valued f64).
pub(crate) fn power_tail_sum(s: f64, from: f64) -> f64 {
    debug_assert!(s > 1.0, "tail power sum diverges for s <= 1");
    let from = from.max(0.0);
    if from < EM_HEAD as f64 {
        let mut head = Kahan::new();
        let lo = from as u64 + 1;
        for j in lo..=EM_HEAD {
            head.add((j as f64).powf(-s));
        }
        return head.value() + em_tail(s, EM_HEAD as f64 + 1.0);
    }
    em_tail(s, from + 1.0)
}

/// sum_{j >= a} j^{-s} by Euler-Maclaurin, valid for a >= ~50.
fn em_tail(s: f64, a: f64) -> f64 {
    let f = a.powf(-s);
    let integral = a.powf(1.0 - s) / (s - 1.0);
    let d1 = -s * a.powf(-s - 1.0);
    let d3 = -s * (s + 1.0) * (s + 2.0) * a.powf(-s - 3.0);
    let d5 = -s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * a.powf(-s - 5.0);
    integral + 0.5 * f - d1 / 12.0 + d3 / 720.0 - d5 / 30240.0
}

/// sum_{j = 1}^{m} j^{-r} for any r > 0.
pub(crate) fn power_sum(r: f64, m: u64) -> f64 {
    if m <= 1_000_000 {
        let mut acc = Kahan::new();
        for j in 1..=m {
            acc.add((j as f64).powf(-r));
        }
        return acc.value();
    }
    let mut head = Kahan::new();
    for j in 1..=EM_HEAD {
        head.add((j as f64).powf(-r));
    }
    // Euler-Maclaurin over [EM_HEAD + 1, m].
    let (a, bnd) = ((EM_HEAD + 1) as f64, m as f64);
    let fa = a.powf(-r);
    let fb = bnd.powf(-r);
    let integral = if (r - 1.0).abs() < 1e-12 {
        (bnd / a).ln()
    } else {
        (bnd.powf(1.0 - r) - a.powf(1.0 - r)) / (1.0 - r)
    };
    let d1 = |x: f64| -r * x.powf(-r - 1.0);
    let d3 = |x: f64| -r * (r + 1.0) * (r + 2.0) * x.powf(-r - 3.0);
    head.add(integral + 0.5 * (fa + fb) + (d1(bnd) - d1(a)) / 12.0 - (d3(bnd) - d3(a)) / 720.0);
    head.value()
}

/// H_m, the m-th harmonic number (H_0 = 0).
pub(crate) fn harmonic(m: u64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    if m <= 10_000 {
        let mut acc = Kahan::new();
        for j in 1..=m {
            acc.add(1.0 / j as f64);
        }
        return acc.value();
    }
    const EULER_GAMMA: f64 = 0.5772156649015329;
    let x = m as f64;
    x.ln() + EULER_GAMMA + 1.0 / (2.0 * x) - 1.0 / (12.0 * x * x) + 1.0 / (120.0 * x.powi(4))
}

/// sup over integer j in [from_j, cap] of min(a j^{-b}, 1/2) ln(j + 1),
/// certified through the unimodality of x -> a x^{-b} ln(1 + x) past the
/// cap plateau. Used for the S functional and for bounding truncated
/// power-law tails. The cap is a float so callers can pass +inf.
pub(crate) fn power_s_sup(a: f64, b: f64, from_j: f64, cap: f64) -> f64 {
    let from = from_j.max(1.0);
    if from > cap {
        return 0.0;
    }
    let plateau_end = power_cap_boundary(a, b).floor().min(cap);
    let mut best = 0.0f64;
    let h = |x: f64| (a * x.powf(-b)).min(0.5) * (1.0 + x).ln();
    if plateau_end >= from {
        // Constant value, growing log factor: right end wins.
        best = best.max(0.5 * (1.0 + plateau_end).ln());
    }
    let first = from.max(plateau_end + 1.0);
    if first > cap {
        return best;
    }
    best = best.max(h(first));
    best = best.max(h(cap.min(POWER_MAX_LOG_INDEX.exp())));
    if b < 1.0 {
        // g(x) = x/(1+x) - b ln(1+x) crosses zero once past its peak at
        // x = 1/b - 1; the crossing is the continuous maximizer of h.
        let g = |x: f64| x / (1.0 + x) - b * (1.0 + x).ln();
        let mut lo = (1.0 / b - 1.0).max(first);
        if g(lo) > 0.0 {
            let mut hi = 2.0 * lo.max(2.0);
            while g(hi) > 0.0 && hi < 1e300 {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            // h is unimodal past the plateau, so the integer maximum sits
            // at floor or ceil of the continuous crossing.
            let x_star = 0.5 * (lo + hi);
            for cand in [x_star.floor(), x_star.ceil()] {
                let c = cand.clamp(first, cap.min(POWER_MAX_LOG_INDEX.exp()));
                best = best.max(h(c));
            }
        }
    }
    best
}

/// sup over integer j in [1, cap] of ln(j + 1) / ln(1 / p(j)) for the
/// power law, including the j -> inf limit 1/b when no cap is present.
/// For a < 1 the supremum can be approached but not attained; the value
/// returned is then exact up to a documented 2e-7 relative slack coming
/// from cutting the candidate enumeration at 1e6 indices.
pub(crate) fn power_t_sup(a: f64, b: f64, cap_index: Option<u64>) -> f64 {
    let cap = cap_index.map(|m| m as f64).unwrap_or(f64::INFINITY);
    let plateau_end = power_cap_boundary(a, b).floor().min(cap);
    let mut best = 0.0f64;
    if plateau_end >= 1.0 {
        best = best.max((1.0 + plateau_end).ln() / std::f64::consts::LN_2);
    }
    let first = (plateau_end + 1.0).max(1.0);
    if first > cap {
        return best;
    }
    let f = |x: f64| {
        let denom = b * x.ln() - a.ln();
        debug_assert!(denom > 0.0, "uncapped region has p < 1/2 so ln(1/p) > ln 2");
        (1.0 + x).ln() / denom
    };
    best = best.max(f(first));
    if cap.is_finite() {
        best = best.max(f(cap));
    }
    if a >= 1.0 {
        // f decreases on the whole uncapped region: first index wins.
        return best;
    }
    // a < 1: f exceeds its limit 1/b exactly on x <= x_c and climbs back
    // toward 1/b from below beyond; enumerate the head, then take the
    // limit as a candidate (it is the tail supremum when no cap cuts it).
    let x_c = 1.0 / ((1.0 / a).ln() / b).exp_m1();
    let enum_hi = x_c.min(cap).min(first + 1e6);
    let mut j = first;
    while j <= enum_hi {
        best = best.max(f(j));
        j += 1.0;
    }
    if cap.is_infinite() {
        best = best.max(1.0 / b);
    }
    best
}
