//! Log-space binomial tail machinery.
//!
//! Everything downstream (tail inversion, exact references, moment
//! comparisons) leans on `ln P(Y >= k)` staying trustworthy up to
//! n = 1e6, so the pmf uses the saddle-point form
//!
//! ```text
//! ln pmf(k) = stirlerr(n) - stirlerr(k) - stirlerr(n-k)
//!             - bd0(k, np) - bd0(n-k, n(1-p))
//!             - (1/2) ln(2 pi k (n-k) / n)
//! ```
//!
//! with `stirlerr(m) = ln m! - (m + 1/2) ln m + m - (1/2) ln(2 pi)` and
//! `bd0(x, M) = x ln(x/M) + M - x` evaluated by a cancellation-free
//! series near x = M. Differences of ln-gamma lose absolute accuracy at
//! large n exactly where the tail sums need it; the saddle-point route
//! keeps each pmf to a few ulps. Tail sums are two-pass compensated
//! logsumexp, so their relative error is dominated by the pmf error
//! (a few ulps of the log magnitude, i.e. well under 1e-12 for any tail
//! that is not astronomically small).

use crate::error::{Error, Result};
use crate::numeric::Kahan;

/// Natural log of a probability; `-inf` encodes probability zero.
pub type LogProb = f64;

/// Parameters of a single binomial count Y ~ Bin(n, p).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialSpec {
    pub n: u64,
    pub p: f64,
}

impl BinomialSpec {
    pub fn new(n: u64, p: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("binomial needs n >= 1"));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("binomial p must be in [0,1], got {p}")));
        }
        Ok(BinomialSpec { n, p })
    }
}

/// Tunable constants of the concentration machinery. None of them change
/// the exact computations; they scale the analytic bounds and the
/// comparison tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationConstants {
    /// Tail-inversion target level, in (0, 1/4).
    pub c0: f64,
    /// Anti-concentration exponent multiplier, >= 1.
    pub c_anti: f64,
    /// Upper comparison constant, >= 1. Only reported, never folded into
    /// a computed bound.
    pub c1: f64,
    /// Lower comparison constant, > 0. Only reported.
    pub c2: f64,
    /// Tail-probability prefactor of the localized CDF bound, > 0.
    pub dkw_c1: f64,
    /// Exponent constant of the localized CDF bound, > 0.
    pub dkw_c2: f64,
    /// Scale of the high-probability upper band, > 0.
    pub hp_a1: f64,
    /// Scale of the high-probability lower band, > 0.
    pub hp_a2: f64,
}

impl Default for ConcentrationConstants {
    fn default() -> Self {
        ConcentrationConstants {
            c0: 0.125,
            c_anti: 4.0,
            c1: 3.0,
            c2: 0.1,
            dkw_c1: 2.0,
            dkw_c2: 2.0,
            hp_a1: 1.0,
            hp_a2: 1.0,
        }
    }
}

impl ConcentrationConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.c0 > 0.0 && self.c0 < 0.25) {
            return Err(Error::domain(format!("c0 must be in (0, 1/4), got {}", self.c0)));
        }
        if !(self.c_anti >= 1.0) {
            return Err(Error::domain(format!("C_anti must be >= 1, got {}", self.c_anti)));
        }
        if !(self.c1 >= 1.0) {
            return Err(Error::domain(format!("C1 must be >= 1, got {}", self.c1)));
        }
        if !(self.c2 > 0.0) {
            return Err(Error::domain(format!("c2 must be > 0, got {}", self.c2)));
        }
        if !(self.dkw_c1 > 0.0) || !(self.dkw_c2 > 0.0) {
            return Err(Error::domain("dkw_c1 and dkw_c2 must be > 0"));
        }
        if !(self.hp_a1 > 0.0) || !(self.hp_a2 > 0.0) {
            return Err(Error::domain("hp_a1 and hp_a2 must be > 0"));
        }
        Ok(())
    }

    /// Named override used by the CLI's `--const name=value` flags.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "c0" => self.c0 = value,
            "C_anti" | "c_anti" => self.c_anti = value,
            "C1" | "c1" => self.c1 = value,
            "c2" => self.c2 = value,
            "dkw_c1" => self.dkw_c1 = value,
            "dkw_c2" => self.dkw_c2 = value,
            "hp_a1" => self.hp_a1 = value,
            "hp_a2" => self.hp_a2 = value,
            _ => return Err(Error::domain(format!("unknown constant name {name:?}"))),
        }
        self.validate()
    }
}

/// Analytic bounds on ln P(Y/n >= q) for a single binomial coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailBounds {
    /// Chernoff upper bound: -n D(q || p).
    pub chernoff: LogProb,
    /// Anti-concentration lower bound ln c0 - C_anti n D(q || p); present
    /// only inside the window 1/n <= q <= (1 + p)/2.
    pub anti: Option<LogProb>,
    /// Bennett upper bound -n sigma^2 h((q - p)/sigma^2).
    pub bennett: LogProb,
}

/// Value and regime of the q-th moment growth function for one binomial
/// coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiQ {
    pub value: f64,
    pub regime: PsiRegime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsiRegime {
    /// p >= q/(2n): central-limit scaling (npq)^{q/2}.
    Subgaussian,
    /// q/(n e^q) <= p < q/(2n): (q / ln(q/(np)))^q.
    LogWindow,
    /// p < q/(n e^q): the tail is a near-Poisson singleton, value np.
    Poisson,
}

const LN_2PI: f64 = 1.8378770664093453;

// Exact n! for n <= 15; beyond that the asymptotic series takes over.
const FACT: [f64; 16] = [
    1.0,
    1.0,
    2.0,
    6.0,
    24.0,
    120.0,
    720.0,
    5040.0,
    40320.0,
    362880.0,
    3628800.0,
    39916800.0,
    479001600.0,
    6227020800.0,
    87178291200.0,
    1307674368000.0,
];

/// stirlerr(m) = ln m! - (m + 1/2) ln m + m - (1/2) ln(2 pi), for a
/// positive integer value held in f64. Series coefficients and branch
/// points follow the standard dbinom evaluation.
fn stirlerr(m: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;

    if m <= 15.0 {
        let ln_fact = FACT[m as usize].ln();
        return ln_fact - (m + 0.5) * m.ln() + m - 0.5 * LN_2PI;
    }
    let mm = m * m;
    if m > 500.0 {
        (S0 - S1 / mm) / m
    } else if m > 80.0 {
        (S0 - (S1 - S2 / mm) / mm) / m
    } else if m > 35.0 {
        (S0 - (S1 - (S2 - S3 / mm) / mm) / mm) / m
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / mm) / mm) / mm) / mm) / m
    }
}

/// bd0(x, M) = x ln(x/M) + M - x, the deviance term, computed without
/// cancellation when x is close to M. Accepts any x >= 0, M > 0; the
/// x = 0 limit is M.
fn bd0(x: f64, m: f64) -> f64 {
    debug_assert!(x >= 0.0 && m > 0.0, "bd0 domain: x={x}, M={m}");
    if x == 0.0 {
        return m;
    }
    if (x - m).abs() < 0.1 * (x + m) {
        let v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        let mut j = 1u32;
        loop {
            ej *= v2;
            let s1 = s + ej / f64::from(2 * j + 1);
            if s1 == s {
                return s1;
            }
            s = s1;
            j += 1;
        }
    }
    x * (x / m).ln() + m - x
}

/// ln P(Y = k) for Y ~ Bin(n, p). Returns -inf for k > n.
pub fn log_pmf(spec: &BinomialSpec, k: u64) -> LogProb {
    let n = spec.n;
    let p = spec.p;
    if k > n {
        return f64::NEG_INFINITY;
    }
    if p == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if p == 1.0 {
        return if k == n { 0.0 } else { f64::NEG_INFINITY };
    }
    let nf = n as f64;
    if k == 0 {
        return nf * (-p).ln_1p();
    }
    if k == n {
        return nf * p.ln();
    }
    let kf = k as f64;
    let nkf = (n - k) as f64;
    let lc = stirlerr(nf) - stirlerr(kf) - stirlerr(nkf) - bd0(kf, nf * p) - bd0(nkf, nf * (1.0 - p));
    lc - 0.5 * (LN_2PI + kf.ln() + (-kf / nf).ln_1p())
}

/// ln P(Y >= k) for Y ~ Bin(n, p).
///
/// k = 0 returns exactly 0 (the whole space); k = n + 1 returns -inf
/// (the empty tail). The sum is a two-pass compensated logsumexp over
/// the pmf, so no rescaling error accumulates along the way.
///
/// # Errors
/// `Domain` if k > n + 1.
pub fn log_upper_tail(spec: &BinomialSpec, k: u64) -> Result<LogProb> {
    let n = spec.n;
    if k > n + 1 {
        return Err(Error::domain(format!("tail index k={k} exceeds n+1={}", n + 1)));
    }
    if k == 0 {
        return Ok(0.0);
    }
    if k == n + 1 {
        return Ok(f64::NEG_INFINITY);
    }
    let mut max_l = f64::NEG_INFINITY;
    for j in k..=n {
        let l = log_pmf(spec, j);
        if l > max_l {
            max_l = l;
        }
    }
    if max_l == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let mut acc = Kahan::new();
    for j in k..=n {
        acc.add((log_pmf(spec, j) - max_l).exp());
    }
    Ok(max_l + acc.value().ln())
}

/// Bernoulli relative entropy D(q || p) = q ln(q/p) + (1-q) ln((1-q)/(1-p)).
///
/// Evaluated as bd0(q, p) + bd0(1-q, 1-p), which is exact at the
/// endpoints q in {0, 1} and cancellation-free near q = p.
///
/// # Errors
/// `Domain` when p in {0, 1} with q != p (the divergence is infinite),
/// or when either argument leaves [0, 1].
pub fn kl_bernoulli(q: f64, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) || !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("kl_bernoulli needs q, p in [0,1], got q={q}, p={p}")));
    }
    if p == 0.0 || p == 1.0 {
        if q == p {
            return Ok(0.0);
        }
        return Err(Error::domain(format!(
            "kl_bernoulli(q={q}, p={p}) is infinite for a degenerate reference"
        )));
    }
    Ok(bd0(q, p) + bd0(1.0 - q, 1.0 - p))
}

/// Like kl_bernoulli but total: degenerate references yield +inf instead
/// of an error. Internal use by the analytic bounds, where -n * inf is a
/// legitimate -inf log-probability.
pub(crate) fn kl_extended(q: f64, p: f64) -> f64 {
    if p == 0.0 || p == 1.0 {
        if q == p {
            return 0.0;
        }
        return f64::INFINITY;
    }
    bd0(q, p) + bd0(1.0 - q, 1.0 - p)
}

fn bennett_h(u: f64) -> f64 {
    (1.0 + u) * u.ln_1p() - u
}

/// Chernoff, anti-concentration, and Bennett bounds on ln P(Y/n >= q).
///
/// # Errors
/// `Domain` unless spec.p <= q <= 1.
pub fn analytic_tail_bounds(
    spec: &BinomialSpec,
    q: f64,
    consts: &ConcentrationConstants,
) -> Result<TailBounds> {
    consts.validate()?;
    if !(q >= spec.p && q <= 1.0) {
        return Err(Error::domain(format!(
            "analytic_tail_bounds needs p <= q <= 1, got p={}, q={q}",
            spec.p
        )));
    }
    let n = spec.n as f64;
    let d = kl_extended(q, spec.p);
    // The +0.0 folds a possible -0.0 from d = 0 back to plain zero.
    let chernoff = -n * d + 0.0;
    let in_window = q >= 1.0 / n && q <= (1.0 + spec.p) / 2.0;
    let anti = if in_window {
        Some(consts.c0.ln() - consts.c_anti * n * d)
    } else {
        None
    };
    let sigma2 = spec.p * (1.0 - spec.p);
    let t = q - spec.p;
    let bennett = if sigma2 == 0.0 {
        if t == 0.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        -n * sigma2 * bennett_h(t / sigma2) + 0.0
    };
    Ok(TailBounds { chernoff, anti, bennett })
}

/// E |Y - np|^q by direct summation over the support.
///
/// # Errors
/// `Domain` for q < 1; `Resource` for n > 1e6 (the sum is O(n)).
pub fn abs_central_moment_exact(spec: &BinomialSpec, q: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::domain(format!("moment order must be >= 1, got {q}")));
    }
    if spec.n > 1_000_000 {
        return Err(Error::resource(format!(
            "exact moment needs an O(n) sweep; n={} exceeds 1e6",
            spec.n
        )));
    }
    let mean = spec.n as f64 * spec.p;
    let mut acc = Kahan::new();
    for k in 0..=spec.n {
        let w = log_pmf(spec, k).exp();
        if w > 0.0 {
            acc.add(w * (k as f64 - mean).abs().powf(q));
        }
    }
    Ok(acc.value())
}

/// Growth function of the q-th absolute central moment of Bin(n, p),
/// up to constants depending only on q:
///
/// ```text
/// psi_q(n, p) = (npq)^{q/2}            p >= q/(2n)
///             = (q / ln(q/(np)))^q     q/(n e^q) <= p < q/(2n)
///             = np                     p < q/(n e^q)
/// ```
///
/// Boundary ties resolve to the larger-p regime.
///
/// # Errors
/// `Domain` unless n >= 1, 0 <= p <= 1/2, q >= 1.
pub fn psi_q(n: u64, p: f64, q: f64) -> Result<PsiQ> {
    if n == 0 {
        return Err(Error::domain("psi_q needs n >= 1"));
    }
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::domain(format!("psi_q needs p in [0, 1/2], got {p}")));
    }
    if !(q >= 1.0) {
        return Err(Error::domain(format!("psi_q needs moment order q >= 1, got {q}")));
    }
    let nf = n as f64;
    let t_sub = q / (2.0 * nf);
    let t_log = q / (nf * q.exp());
    if p >= t_sub {
        Ok(PsiQ { value: (nf * p * q).powf(q / 2.0), regime: PsiRegime::Subgaussian })
    } else if p >= t_log {
        // Inside the window q/(np) is in (2, e^q], so the log is positive.
        let value = (q / (q / (nf * p)).ln()).powf(q);
        Ok(PsiQ { value, regime: PsiRegime::LogWindow })
    } else {
        Ok(PsiQ { value: nf * p, regime: PsiRegime::Poisson })
    }
}

/// Smallest k with log_upper_tail(spec, k) <= log_target. Since the
/// upper tail is non-increasing in k and the empty tail is -inf, the
/// result is well defined and lies in [0, n + 1]. Together with
/// log_upper_tail this forms a Galois connection: for every k,
/// tail(k) <= target  iff  k >= binom_quantile(target).
pub fn binom_quantile(spec: &BinomialSpec, log_target: LogProb) -> u64 {
    let mut lo = 0u64;
    let mut hi = spec.n + 1;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        let t = log_upper_tail(spec, mid).expect("mid is within [0, n+1]");
        if t <= log_target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}
