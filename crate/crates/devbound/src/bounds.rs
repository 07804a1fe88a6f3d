//! Closed-form rate functionals for the expected sup-norm deviation of
//! empirical frequencies.
//!
//! The central object is the three-regime rate for a constant block of
//! J coordinates at value q,
//!
//! ```text
//! phi_{J,q}(n) = 1                                  n <  ln(J+1)/ln(1/q)
//!              = ln(J+1) / (n ln(ln(J+1)/(nq)))     n <  ln(J+1)/(e q)
//!              = sqrt(q ln(J+1) / n)                otherwise
//! ```
//!
//! together with its exact finite-n counterpart epsilon (a binomial
//! quantile on the 1/n grid), the two summary functionals
//! S = sup_j p(j) ln(j+1) and T = sup_j ln(j+1)/ln(1/p(j)), and the
//! combined rate that takes a block sup of
//! max(sqrt(q ln(j+1)/n), ln(j+1)/(n ln(2 + ln(j+1)/(nq)))) unless every
//! coordinate sits under the Poissonian threshold p(j) <= 1/(2nj).
//!
//! All suprema are evaluated at block right-endpoints; both terms are
//! increasing in j while q stays constant, so the endpoints certify the
//! sup. Power-law sequences get bracketing envelopes plus analytic tail
//! candidates so that truncation never silently drops the supremum.

use crate::binomial::{binom_quantile, psi_q, BinomialSpec, ConcentrationConstants, LogProb};
use crate::error::{Error, Result};
use crate::numeric::{softplus, Kahan};
use crate::seq::{self, Blocked, BlockView, Family, ProbSeq, SeqKind, TruncationPolicy};

/// The pair S(p), T(p). T is extended-real; +inf means the sup diverges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ST {
    pub s: f64,
    pub t: f64,
}

/// Sup over coordinates of p(j) ln(j+1) and of ln(j+1)/ln(1/p(j)).
///
/// Zero-valued coordinates contribute 0 to both. For power laws the
/// suprema come from the unimodal certificates instead of block
/// enumeration, so uncapped tails are included exactly.
pub fn functional_s_t(seq: &ProbSeq) -> Result<ST> {
    if let Family::PowerLaw { a, b, cap_index } = *seq.family() {
        let capf = cap_index.map(|m| m as f64).unwrap_or(f64::INFINITY);
        return Ok(ST {
            s: seq::power_s_sup(a, b, 1.0, capf),
            t: seq::power_t_sup(a, b, cap_index),
        });
    }
    let view = exact_view(seq, 1)?;
    let mut s = 0.0f64;
    let mut t = 0.0f64;
    for b in &view.blocks {
        if b.q > 0.0 {
            s = s.max(b.q * b.end_log_index);
            t = t.max(b.end_log_index / (1.0 / b.q).ln());
        }
    }
    Ok(ST { s, t })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiRegime {
    Constant,
    Subgamma,
    Subgaussian,
    Fractional,
}

impl std::fmt::Display for PhiRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PhiRegime::Constant => "constant",
            PhiRegime::Subgamma => "subgamma",
            PhiRegime::Subgaussian => "subgaussian",
            PhiRegime::Fractional => "fractional",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phi {
    pub value: f64,
    pub regime: PhiRegime,
}

/// The block rate phi_{J,q}(n), parameterized by log_j = ln J so that J
/// beyond the float range stays representable. J in (0, 1) uses the
/// fractional extension e^{-1/J} sqrt(q/n). A boundary n belongs to the
/// larger-n regime. q = 0 gives 0.
///
/// # Errors
/// `Domain` unless log_j is finite, q is in [0, 1/2] and n >= 1.
pub fn phi(log_j: f64, q: f64, n: u64) -> Result<Phi> {
    if !log_j.is_finite() {
        return Err(Error::domain(format!("phi needs a finite log J, got {log_j}")));
    }
    if !(0.0..=0.5).contains(&q) {
        return Err(Error::domain(format!("phi needs q in [0, 1/2], got {q}")));
    }
    if n == 0 {
        return Err(Error::domain("phi needs n >= 1"));
    }
    let nf = n as f64;
    if q == 0.0 {
        return Ok(Phi { value: 0.0, regime: PhiRegime::Subgaussian });
    }
    if log_j < 0.0 {
        let value = (-(-log_j).exp()).exp() * (q / nf).sqrt();
        return Ok(Phi { value, regime: PhiRegime::Fractional });
    }
    let l = softplus(log_j);
    if nf * (1.0 / q).ln() < l {
        Ok(Phi { value: 1.0, regime: PhiRegime::Constant })
    } else if nf * std::f64::consts::E * q < l {
        // Here l/(n q) > e, so the outer log is > 1.
        let value = l / (nf * (l / (nf * q)).ln());
        Ok(Phi { value, regime: PhiRegime::Subgamma })
    } else {
        Ok(Phi { value: (q * l / nf).sqrt(), regime: PhiRegime::Subgaussian })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Epsilon {
    pub epsilon: f64,
    /// The grid point m/n whose strict upper tail clears the target, or
    /// 0 in the degenerate case.
    pub threshold_grid_point: f64,
    pub degenerate: bool,
}

/// Exact finite-n threshold: the smallest grid value t in {0, 1/n, ..., 1}
/// with t >= q such that P(Y/n > t) <= c0/(2J) for Y ~ Binomial(n, q),
/// returned as epsilon = t - q. When already P(Y >= 1) <= c0/(2J) the
/// sequence is degenerate and epsilon = -q by convention. The target
/// comparison happens in log space, so log_j up to 1e5 is exact.
///
/// # Errors
/// `Domain` unless q is in (0, 1/2], log_j >= 0 and n >= 1.
pub fn epsilon_exact(
    log_j: f64,
    q: f64,
    n: u64,
    consts: &ConcentrationConstants,
) -> Result<Epsilon> {
    consts.validate()?;
    if !(q > 0.0 && q <= 0.5) {
        return Err(Error::domain(format!("epsilon needs q in (0, 1/2], got {q}")));
    }
    if !(log_j >= 0.0) || !log_j.is_finite() {
        return Err(Error::domain(format!("epsilon needs finite log J >= 0, got {log_j}")));
    }
    let spec = BinomialSpec::new(n, q)?;
    let target = consts.c0.ln() - std::f64::consts::LN_2 - log_j;
    // Smallest k with P(Y >= k) <= target; k = 0 is impossible because
    // the target is below ln 1.
    let kstar = binom_quantile(&spec, target);
    if kstar <= 1 {
        return Ok(Epsilon { epsilon: -q, threshold_grid_point: 0.0, degenerate: true });
    }
    let m = (kstar - 1).max((q * n as f64).ceil() as u64);
    let t = m as f64 / n as f64;
    Ok(Epsilon { epsilon: t - q, threshold_grid_point: t, degenerate: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Constant,
    Subgamma,
    Subgaussian,
    Poissonian,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Constant => "constant",
            Regime::Subgamma => "subgamma",
            Regime::Subgaussian => "subgaussian",
            Regime::Poissonian => "poissonian",
        })
    }
}

/// Per-block certificate values behind a rate sup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    /// ln of the block-end coordinate index.
    pub log_index: f64,
    pub sqrt_term: f64,
    pub log_term: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub rate: f64,
    pub regime: Regime,
    /// ln j* of the dominating block end; NaN in the Poissonian branch,
    /// which has no dominating index.
    pub argmax_log_index: f64,
    pub s: f64,
    pub t: f64,
    pub components: Vec<Component>,
    /// Set when the Poissonian branch total mass diverges; the rate is
    /// then the 1/n floor of the min.
    pub diverges: bool,
    /// Lower-envelope rate, present only for bracketed power laws.
    pub bracket_lower: Option<f64>,
}

/// Expected sup-deviation rate for a mean sequence: the Poissonian
/// branch min(1/n, sum p(j)) when every coordinate satisfies
/// p(j) <= 1/(2nj), otherwise 1 capped block sup of the sqrt and log
/// terms.
///
/// # Errors
/// `Domain` for variance sequences or n = 0; `Resource` errors propagate
/// from block materialization.
pub fn delta_rate(seq: &ProbSeq, n: u64) -> Result<BoundReport> {
    rate_report(seq, n, SeqKind::Mean)
}

/// Rate for variance sequences: identical block sup, but the
/// Poissonian branch becomes min(1/n, sqrt(sum sigma^2 / n)).
pub fn variance_rate(seq: &ProbSeq, n: u64) -> Result<BoundReport> {
    rate_report(seq, n, SeqKind::Variance)
}

/// Upper bound c (sqrt(S/n) + T ln(n)/n), valid for n >= 21.
///
/// # Errors
/// `Domain` when n < 21, c is not positive, or T is infinite.
pub fn cohen_bound(seq: &ProbSeq, n: u64, c: f64) -> Result<f64> {
    if n < 21 {
        return Err(Error::domain(format!("cohen bound needs n >= 21, got {n}")));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::domain(format!("cohen bound needs a finite c > 0, got {c}")));
    }
    let st = functional_s_t(seq)?;
    if !st.t.is_finite() {
        return Err(Error::domain("cohen bound needs a finite T functional"));
    }
    let nf = n as f64;
    Ok(c * ((st.s / nf).sqrt() + st.t * nf.ln() / nf))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelatedBand {
    pub lower: f64,
    pub upper: f64,
}

/// Deviation band when all coordinates are driven by one shared uniform:
/// lower min(p(1), sqrt(p(1)/n)) (just p(1) in the Poissonian branch),
/// upper the usual combined rate.
pub fn correlated_band(seq: &ProbSeq, n: u64) -> Result<CorrelatedBand> {
    let report = delta_rate(seq, n)?;
    let p1 = seq.value_at(1)?;
    let lower = if report.regime == Regime::Poissonian {
        p1
    } else {
        p1.min((p1 / n as f64).sqrt())
    };
    Ok(CorrelatedBand { lower, upper: report.rate })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqBand {
    /// Whether E of the lq deviation norm vanishes as n grows: holds
    /// exactly when the sequence has finite total mass.
    pub converges: bool,
    pub lower: f64,
    pub upper: f64,
    /// sqrt of (q/2-seminorm)^{2/q} / n; present for qnorm >= 2 on
    /// convergent sequences.
    pub asymptotic_rate: Option<f64>,
}

/// Moment-matched band for the lq norm of the deviation vector:
///
/// ```text
/// lower = (1/sqrt n) (sum_{p >= 1/n} p^{q/2})^{1/q} + (sum_{p <= 1/n} p^q)^{1/q}
/// upper = ((1/n^q) sum_j psi_q(n, p(j)))^{1/q}
/// ```
///
/// Coordinates exactly at 1/n enter both sums. Divergent sums surface
/// as +inf rather than errors.
///
/// # Errors
/// `Domain` for qnorm < 1, n = 0, or variance sequences;
/// `Unrepresentable` when block counts exceed the integer float range;
/// `Resource` when a power-law psi sum needs more than 2e7 evaluations.
pub fn lq_band(seq: &ProbSeq, n: u64, qnorm: f64) -> Result<LqBand> {
    if !(qnorm >= 1.0) {
        return Err(Error::domain(format!("lq band needs qnorm >= 1, got {qnorm}")));
    }
    if n == 0 {
        return Err(Error::domain("lq band needs n >= 1"));
    }
    if seq.kind() != SeqKind::Mean {
        return Err(Error::domain("lq band is defined for mean sequences"));
    }
    let converges = !seq.seminorm(1.0)?.diverges;
    if let Family::PowerLaw { a, b, cap_index } = *seq.family() {
        return power_lq_band(seq, a, b, cap_index, n, qnorm, converges);
    }
    let view = exact_view(seq, n)?;
    if !view.all_counts_exact() {
        return Err(Error::unrepresentable(
            "lq band needs integer block counts; this sequence only has log-scale counts",
        ));
    }
    let nf = n as f64;
    let thr = 1.0 / nf;
    let mut ge = Kahan::new();
    let mut le = Kahan::new();
    let mut psi = Kahan::new();
    for b in &view.blocks {
        if b.q == 0.0 {
            continue;
        }
        let cnt = b.count.expect("checked exact") as f64;
        if b.q >= thr {
            ge.add(cnt * b.q.powf(qnorm / 2.0));
        }
        if b.q <= thr {
            le.add(cnt * b.q.powf(qnorm));
        }
        psi.add(cnt * psi_q(n, b.q, qnorm)?.value);
    }
    let lower = ge.value().powf(1.0 / qnorm) / nf.sqrt() + le.value().powf(1.0 / qnorm);
    let upper = psi.value().powf(1.0 / qnorm) / nf;
    let asymptotic_rate = if qnorm >= 2.0 && converges {
        Some((seq.seminorm(qnorm / 2.0)?.value).powf(1.0 / qnorm) / nf.sqrt())
    } else {
        None
    };
    Ok(LqBand { converges, lower, upper, asymptotic_rate })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HpBand {
    pub gamma: f64,
    pub upper: f64,
    pub lower: f64,
    /// Bounded-differences fallback width sqrt(ln(2/gamma)/(2n)).
    pub mcdiarmid_width: f64,
    /// True when every coordinate sits strictly under gamma/(2nj); the
    /// sup deviation is then below 2/n with probability 1 - gamma.
    pub poissonian_flag: bool,
}

/// 1 - gamma quantile band for the sup deviation: upper
/// hp_a1 sup_j phi_{j/gamma, p(j)}(n), lower
/// hp_a2 sup_j phi_{j/ln(1/gamma), p(j)}(n). The index scaling enters
/// phi through its log J argument, using the fractional extension when
/// the scaled index drops below 1.
///
/// # Errors
/// `Domain` unless gamma is in (0, 1/2) and the sequence is a mean
/// sequence with n >= 1.
pub fn hp_band(
    seq: &ProbSeq,
    n: u64,
    gamma: f64,
    consts: &ConcentrationConstants,
) -> Result<HpBand> {
    consts.validate()?;
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(Error::domain(format!("hp band needs gamma in (0, 1/2), got {gamma}")));
    }
    if n == 0 {
        return Err(Error::domain("hp band needs n >= 1"));
    }
    if seq.kind() != SeqKind::Mean {
        return Err(Error::domain("hp band is defined for mean sequences"));
    }
    let nf = n as f64;
    let shift_up = -gamma.ln();
    let shift_lo = -(1.0 / gamma).ln().ln();
    let mcdiarmid_width = ((2.0 / gamma).ln() / (2.0 * nf)).sqrt();
    // Strictly-below-threshold certificate, in logs: q j < gamma/(2n).
    let flag_rhs = gamma.ln() - (2.0 * nf).ln();
    let (mut up, mut lo, flag): (f64, f64, bool);
    match seq.block_view(&TruncationPolicy::for_n(n))? {
        Blocked::Exact(view) => {
            flag = view
                .blocks
                .iter()
                .all(|b| b.q == 0.0 || b.q.ln() + b.end_log_count() < flag_rhs);
            up = 0.0;
            lo = 0.0;
            for b in &view.blocks {
                if b.q == 0.0 {
                    continue;
                }
                let lj = b.end_log_count();
                up = up.max(phi(lj + shift_up, b.q, n)?.value);
                lo = lo.max(phi(lj + shift_lo, b.q, n)?.value);
            }
        }
        Blocked::Bracket { upper: uv, lower: lv, tail } => {
            let (a, b, cap_index) = match *seq.family() {
                Family::PowerLaw { a, b, cap_index } => (a, b, cap_index),
                _ => unreachable!("only power laws produce brackets"),
            };
            let capf = cap_index.map(|m| m as f64).unwrap_or(f64::INFINITY);
            flag = power_poiss_cert(a, b, capf, flag_rhs.exp(), true);
            up = 0.0;
            lo = 0.0;
            for blk in &uv.blocks {
                up = up.max(phi(blk.end_log_count() + shift_up, blk.q, n)?.value);
            }
            for blk in &lv.blocks {
                lo = lo.max(phi(blk.end_log_count() + shift_lo, blk.q, n)?.value);
            }
            if let Some(t) = tail {
                let x1 = t.resume_index;
                if nf * b < 1.0 && capf.is_infinite() {
                    // Far enough out the scaled block count always wins
                    // the constant-regime comparison.
                    up = 1.0;
                } else {
                    let c = nf.ln() + a.ln();
                    let t_req = 10.0 * (c.max(0.0) + 1.0) / b;
                    let xfar = if capf.is_finite() {
                        capf
                    } else {
                        t_req.max(x1.ln() + 1.0).exp()
                    };
                    for x in [x1, xfar] {
                        let q = (a * x.powf(-b)).min(0.5);
                        up = up.max(phi(x.ln() + shift_up, q, n)?.value);
                    }
                    let q1 = (a * x1.powf(-b)).min(0.5);
                    let s_tail = seq::power_s_sup(a, b, x1, capf) + shift_up * q1;
                    up = up.max(((s_tail / nf).sqrt()).min(1.0));
                    up = up
                        .max(power_tail_log_candidate(a, b, capf, nf, x1, shift_up, 1.0).min(1.0));
                }
            }
        }
    }
    Ok(HpBand {
        gamma,
        upper: consts.hp_a1 * up,
        lower: consts.hp_a2 * lo,
        mcdiarmid_width,
        poissonian_flag: flag,
    })
}

/// Log of the localized tail bound min(1, c1 e^{-c2 min(t^2, t sqrt(nV))}),
/// where V is the largest F(1-F) value over the localization window.
///
/// # Errors
/// `Domain` unless V is in (0, 1/4], t >= 0 and n >= 1.
pub fn local_dkw_tail(
    n: u64,
    v: f64,
    t: f64,
    consts: &ConcentrationConstants,
) -> Result<LogProb> {
    consts.validate()?;
    if n == 0 {
        return Err(Error::domain("dkw tail needs n >= 1"));
    }
    if !(v > 0.0 && v <= 0.25) {
        return Err(Error::domain(format!("dkw tail needs V in (0, 1/4], got {v}")));
    }
    if !(t >= 0.0) {
        return Err(Error::domain(format!("dkw tail needs t >= 0, got {t}")));
    }
    let exponent = consts.dkw_c2 * (t * t).min(t * (n as f64 * v).sqrt());
    Ok((consts.dkw_c1.ln() - exponent).min(0.0))
}

fn exact_view(seq: &ProbSeq, n: u64) -> Result<BlockView> {
    match seq.block_view(&TruncationPolicy::for_n(n))? {
        Blocked::Exact(v) => Ok(v),
        Blocked::Bracket { .. } => unreachable!("callers route power laws elsewhere"),
    }
}

fn rate_report(seq: &ProbSeq, n: u64, kind: SeqKind) -> Result<BoundReport> {
    if n == 0 {
        return Err(Error::domain("rate needs n >= 1"));
    }
    if seq.kind() != kind {
        return Err(Error::domain(match kind {
            SeqKind::Mean => "this rate applies to mean sequences; use variance_rate instead",
            SeqKind::Variance => "variance_rate needs a variance sequence",
        }));
    }
    let st = functional_s_t(seq)?;
    match seq.block_view(&TruncationPolicy::for_n(n))? {
        Blocked::Exact(view) => exact_rate_report(&view, n, kind, st),
        Blocked::Bracket { upper, lower, tail } => {
            let (a, b, cap_index) = match *seq.family() {
                Family::PowerLaw { a, b, cap_index } => (a, b, cap_index),
                _ => unreachable!("only power laws produce brackets"),
            };
            power_bracket_rate(a, b, cap_index, &upper, &lower, tail, n, kind, st)
        }
    }
}

fn exact_rate_report(view: &BlockView, n: u64, kind: SeqKind, st: ST) -> Result<BoundReport> {
    let nf = n as f64;
    let poiss_rhs = -(2.0 * nf).ln();
    let poissonian = view
        .blocks
        .iter()
        .all(|b| b.q == 0.0 || b.q.ln() + b.end_log_count() <= poiss_rhs + 1e-12);
    if poissonian {
        let rate = poissonian_rate(view.total_mass(), nf, kind);
        return Ok(BoundReport {
            rate,
            regime: Regime::Poissonian,
            argmax_log_index: f64::NAN,
            s: st.s,
            t: st.t,
            components: vec![],
            diverges: false,
            bracket_lower: None,
        });
    }
    let (raw, argmax, components) = sup_over(
        view.blocks.iter().filter(|b| b.q > 0.0).map(|b| (b.end_log_count(), b.end_log_index, b.q)),
        nf,
    );
    Ok(finish_report(raw, argmax, components, st, None))
}

fn poissonian_rate(mass: f64, nf: f64, kind: SeqKind) -> f64 {
    match kind {
        SeqKind::Mean => (1.0 / nf).min(mass),
        SeqKind::Variance => (1.0 / nf).min((mass / nf).sqrt()),
    }
}

/// Block sup of the combined rate terms. Input items are
/// (ln j_end, ln(j_end + 1), q) with q > 0.
fn sup_over(
    points: impl Iterator<Item = (f64, f64, f64)>,
    nf: f64,
) -> (f64, f64, Vec<Component>) {
    let mut best = 0.0f64;
    let mut argmax = f64::NAN;
    let mut components = Vec::new();
    for (log_index, l, q) in points {
        let sqrt_term = (q * l / nf).sqrt();
        let log_term = l / (nf * (2.0 + l / (nf * q)).ln());
        components.push(Component { log_index, sqrt_term, log_term });
        let v = sqrt_term.max(log_term);
        if v > best || argmax.is_nan() {
            best = v;
            argmax = log_index;
        }
    }
    (best, argmax, components)
}

fn finish_report(
    raw: f64,
    argmax: f64,
    components: Vec<Component>,
    st: ST,
    bracket_lower: Option<f64>,
) -> BoundReport {
    let (rate, regime) = if raw >= 1.0 {
        (1.0, Regime::Constant)
    } else {
        let at_max = components
            .iter()
            .filter(|c| c.log_index == argmax)
            .fold((0.0f64, 0.0f64), |acc, c| (acc.0.max(c.sqrt_term), acc.1.max(c.log_term)));
        let regime = if at_max.0 >= at_max.1 { Regime::Subgaussian } else { Regime::Subgamma };
        (raw, regime)
    };
    BoundReport {
        rate,
        regime,
        argmax_log_index: argmax,
        s: st.s,
        t: st.t,
        components,
        diverges: false,
        bracket_lower,
    }
}

/// Whether min(a j^{-b}, 1/2) * j stays at or under rhs for every
/// coordinate (strictly under when `strict`). rhs is 1/(2n) for the rate
/// branch and gamma/(2n) for the high-probability flag.
fn power_poiss_cert(a: f64, b: f64, capf: f64, rhs: f64, strict: bool) -> bool {
    let ok = |x: f64| if strict { x < rhs } else { x <= rhs * (1.0 + 1e-12) };
    let plateau = seq::power_cap_boundary(a, b).floor().min(capf);
    if plateau >= 1.0 && !ok(0.5 * plateau) {
        return false;
    }
    let first = (plateau + 1.0).max(1.0);
    if first > capf {
        return true;
    }
    // Past the plateau q j = a j^{1-b}, monotone, so the ends decide.
    let at_first = a * first.powf(1.0 - b);
    if !ok(at_first) {
        return false;
    }
    if b >= 1.0 {
        true
    } else if capf.is_finite() {
        ok(a * capf.powf(1.0 - b))
    } else {
        false
    }
}

#[allow(clippy::too_many_arguments)]
fn power_bracket_rate(
    a: f64,
    b: f64,
    cap_index: Option<u64>,
    upper: &BlockView,
    lower: &BlockView,
    tail: Option<seq::PowerTail>,
    n: u64,
    kind: SeqKind,
    st: ST,
) -> Result<BoundReport> {
    let nf = n as f64;
    let capf = cap_index.map(|m| m as f64).unwrap_or(f64::INFINITY);
    if power_poiss_cert(a, b, capf, 1.0 / (2.0 * nf), false) {
        let mass = seq::power_law_tail_mass(a, b, cap_index, 0);
        return Ok(BoundReport {
            rate: poissonian_rate(mass, nf, kind),
            regime: Regime::Poissonian,
            argmax_log_index: f64::NAN,
            s: st.s,
            t: st.t,
            components: vec![],
            diverges: mass.is_infinite(),
            bracket_lower: None,
        });
    }
    let (mut raw, mut argmax, mut components) = sup_over(
        upper.blocks.iter().map(|blk| (blk.end_log_count(), blk.end_log_index, blk.q)),
        nf,
    );
    if let Some(t) = tail {
        let x1 = t.resume_index;
        let sqrt_term = (seq::power_s_sup(a, b, x1, capf) / nf).sqrt();
        let log_term =
            power_tail_log_candidate(a, b, capf, nf, x1, 0.0, std::f64::consts::LN_2);
        components.push(Component { log_index: x1.ln(), sqrt_term, log_term });
        let v = sqrt_term.max(log_term);
        if v > raw {
            raw = v;
            argmax = x1.ln();
        }
    }
    let (mut low, _, _) = sup_over(
        lower.blocks.iter().map(|blk| (blk.end_log_count(), blk.end_log_index, blk.q)),
        nf,
    );
    if capf.is_infinite() {
        // The log term tends to 1/(nb) from within, so the true sup is
        // at least the limit.
        low = low.max(1.0 / (nf * b));
    }
    Ok(finish_report(raw, argmax, components, st, Some(low.min(1.0))))
}

/// Certified upper bound for the tail sup of
/// (ln(j+1) + shift) / (n ln(floor_base + (ln(j+1)+shift)/(n a j^{-b})))
/// over j >= x1 (capped at capf). Splits [ln x1, t_req] into geometric
/// segments, then bounds the remainder through the limit 1/(nb) with a
/// certified correction, where t_req = 10 (ln(na) + 1)/b forces the
/// correction below b/10.
fn power_tail_log_candidate(
    a: f64,
    b: f64,
    capf: f64,
    nf: f64,
    x1: f64,
    shift: f64,
    den_floor: f64,
) -> f64 {
    let c = nf.ln() + a.ln();
    let t1 = x1.ln();
    let t_req = 10.0 * (c.max(0.0) + 1.0) / b;
    let ln_cap = capf.ln();
    let t_end = t_req.min(ln_cap);
    let slack = shift + 1.0 / x1;
    let mut best = 0.0f64;
    let mut tk = t1;
    while tk < t_end {
        let tk1 = (tk * 1.25).min(t_end);
        let den = (tk.ln() + b * tk - c).max(den_floor);
        best = best.max((tk1 + slack) / (nf * den));
        tk = tk1;
    }
    if ln_cap.is_infinite() || t_req < ln_cap {
        let tx = t1.max(t_end);
        let delta = ((c - tx.ln()) / tx).max(0.0);
        if delta < b {
            best = best.max((1.0 + slack / tx) / (nf * (b - delta)));
        } else {
            // t_req keeps delta under b/10; this is a safety net only.
            best = f64::INFINITY;
        }
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn power_lq_band(
    seq: &ProbSeq,
    a: f64,
    b: f64,
    cap_index: Option<u64>,
    n: u64,
    qnorm: f64,
    converges: bool,
) -> Result<LqBand> {
    const PSI_ENUM_CAP: f64 = 2e7;
    let nf = n as f64;
    let thr = 1.0 / nf;
    let capf = cap_index.map(|m| m as f64).unwrap_or(f64::INFINITY);
    let plateau = seq::power_cap_boundary(a, b).floor().clamp(0.0, capf);
    let mut ge = Kahan::new();
    let mut le = Kahan::new();
    if plateau >= 1.0 {
        if 0.5 >= thr {
            ge.add(plateau * 0.5f64.powf(qnorm / 2.0));
        }
        if 0.5 <= thr {
            le.add(plateau * 0.5f64.powf(qnorm));
        }
    }
    // Power part: a j^{-b} >= 1/n iff j <= (an)^{1/b}; an index exactly
    // at the threshold lands in both sums via floor/ceil.
    let split = (a * nf).powf(1.0 / b);
    let ge_hi = split.floor().min(capf);
    let le_lo = split.ceil().max(plateau + 1.0);
    ge.add(a.powf(qnorm / 2.0) * partial_pow(b * qnorm / 2.0, plateau + 1.0, ge_hi));
    let le_tail = if le_lo <= capf {
        if capf.is_infinite() && b * qnorm <= 1.0 {
            f64::INFINITY
        } else {
            a.powf(qnorm) * partial_pow(b * qnorm, le_lo, capf)
        }
    } else {
        0.0
    };
    let lower = ge.value().powf(1.0 / qnorm) / nf.sqrt() + (le.value() + le_tail).powf(1.0 / qnorm);
    // Upper: psi is exactly np below q/(n e^q), so only the window above
    // that threshold needs per-index evaluation.
    let upper = if capf.is_infinite() && b <= 1.0 {
        f64::INFINITY
    } else {
        let mut psi = Kahan::new();
        if plateau >= 1.0 {
            psi.add(plateau * psi_q(n, 0.5, qnorm)?.value);
        }
        let j_pois = (a * nf * qnorm.exp() / qnorm).powf(1.0 / b);
        let enum_end = j_pois.floor().min(capf);
        if enum_end - plateau > PSI_ENUM_CAP {
            return Err(Error::resource(format!(
                "power-law psi sum needs {} evaluations, above the {PSI_ENUM_CAP} cap",
                enum_end - plateau
            )));
        }
        let mut j = plateau + 1.0;
        while j <= enum_end {
            psi.add(psi_q(n, (a * j.powf(-b)).min(0.5), qnorm)?.value);
            j += 1.0;
        }
        if capf > enum_end {
            psi.add(nf * a * partial_pow(b, enum_end + 1.0, capf));
        }
        psi.value().powf(1.0 / qnorm) / nf
    };
    let asymptotic_rate = if qnorm >= 2.0 && converges {
        Some((seq.seminorm(qnorm / 2.0)?.value).powf(1.0 / qnorm) / nf.sqrt())
    } else {
        None
    };
    Ok(LqBand { converges, lower, upper, asymptotic_rate })
}

/// sum of j^{-s} over integer j in [u, v]; v may be +inf (needs s > 1).
fn partial_pow(s: f64, u: f64, v: f64) -> f64 {
    if v < u {
        return 0.0;
    }
    if v.is_infinite() {
        return seq::power_tail_sum(s, u - 1.0);
    }
    if s > 1.0 {
        seq::power_tail_sum(s, u - 1.0) - seq::power_tail_sum(s, v)
    } else {
        seq::power_sum(s, v as u64) - seq::power_sum(s, (u - 1.0) as u64)
    }
}
