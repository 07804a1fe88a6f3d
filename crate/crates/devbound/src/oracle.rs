//! Exact distribution of the sup deviation of empirical frequencies for
//! block product families, without Monte Carlo.
//!
//! For a view with blocks (J_b, q_b) and sample size n, the deviation
//! of one coordinate is a function of Y ~ Bin(n, q_b), so the sup M over
//! all coordinates has
//!
//! ```text
//! P(M <= t) = prod_b P(dev_b <= t)^{J_b}
//! ```
//!
//! a piecewise-constant function whose breakpoints are the values
//! |k/n - q_b|. Expectations come from the exact Riemann sum of
//! 1 - P(M <= t), quantiles from inverting the same staircase. The
//! exponent J_b is applied in log space throughout, so block counts like
//! e^{10^4} are fine: per block the running tail T(t) = P(dev > t) is
//! accumulated as a log-sum while sweeping t downward (adding outcomes,
//! never removing them), and J ln(1 - T) is formed through log1p so that
//! T near 1e-300 still produces the right product.
//!
//! The sweep keeps the per-block exponents in a pairwise summation tree;
//! the total is always a fresh sum of current leaves, which keeps the
//! integrand accurate even right after segments where some block
//! contributed an astronomically large exponent.

use crate::binomial::{log_pmf, BinomialSpec};
use crate::error::{Error, Result};
use crate::numeric::{ln_neg_ln_one_minus_exp, logaddexp, Kahan};
use crate::seq::BlockView;

/// Which deviation M takes the sup of: |p_hat - p|, the positive part
/// upward, or the positive part downward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    TwoSided,
    Upper,
    Lower,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::TwoSided => "two_sided",
            Side::Upper => "upper",
            Side::Lower => "lower",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactResult {
    pub value: f64,
    /// Distinct positive deviation values swept.
    pub breakpoints_used: u64,
    pub side: Side,
    /// Smallest ln P(Y = k) folded into any tail, +inf when no positive
    /// deviation exists. Diagnostic only.
    pub log_domain_min: f64,
}

const MAX_N: u64 = 100_000;
const MAX_BREAKPOINTS: u64 = 10_000_000;

/// E[M] as the exact Riemann sum of P(M > t) over the deviation grid.
///
/// # Errors
/// `Domain` for n = 0; `Resource` when n > 1e5 or the grid
/// (n+1) * active blocks exceeds 1e7.
pub fn exact_sup_expectation(view: &BlockView, n: u64, side: Side) -> Result<ExactResult> {
    let mut acc = Kahan::new();
    let (breakpoints_used, log_domain_min) = sweep_deviation_cdf(view, n, side, |lo, hi, s| {
        if s > 0.0 && hi.is_finite() {
            acc.add((hi - lo) * (-(-s).exp_m1()));
        }
    })?;
    Ok(ExactResult {
        value: acc.value().clamp(0.0, 1.0),
        breakpoints_used,
        side,
        log_domain_min,
    })
}

/// Smallest grid point t with P(M <= t) >= level.
///
/// # Errors
/// `Domain` unless level is in (0, 1); caps as in
/// [`exact_sup_expectation`].
pub fn sup_quantile(view: &BlockView, n: u64, level: f64, side: Side) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("quantile level must be in (0, 1), got {level}")));
    }
    let target = -level.ln();
    let mut best = f64::NAN;
    sweep_deviation_cdf(view, n, side, |lo, _hi, s| {
        // The sweep descends and s only grows, so the last write is the
        // smallest qualifying breakpoint.
        if s <= target {
            best = lo;
        }
    })?;
    Ok(best)
}

/// Exact E sum_j |p_hat(j) - p(j)|^qnorm = sum_b J_b E|Y_b/n - q_b|^qnorm.
///
/// # Errors
/// `Unrepresentable` when a block count has no exact integer value;
/// `Domain`/`Resource` propagate from the per-block moment sums.
pub fn exact_lq_moment(view: &BlockView, n: u64, qnorm: f64) -> Result<f64> {
    if !view.all_counts_exact() {
        return Err(Error::unrepresentable(
            "exact moments need integer block counts; this view only has log-scale counts",
        ));
    }
    let mut acc = Kahan::new();
    for b in &view.blocks {
        if b.q == 0.0 {
            continue;
        }
        let spec = BinomialSpec::new(n, b.q)?;
        let m = crate::binomial::abs_central_moment_exact(&spec, qnorm)?;
        acc.add(b.count.expect("checked exact") as f64 * m);
    }
    Ok(acc.value() * (n as f64).powf(-qnorm))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonExact {
    /// P(some coordinate sees at least one success in n draws),
    /// 1 - prod_j (1 - p(j))^n with the product in log space.
    pub p_any_success: f64,
    /// sup_j n j p(j), attained at block ends. +inf when the block index
    /// scale overflows f64.
    pub u: f64,
    /// n sum_j p(j). +inf on overflow.
    pub v: f64,
}

/// The three success-count summaries of the sparse regime. Defined for
/// any view; no Poissonian condition is required.
///
/// # Errors
/// `Domain` for n = 0.
pub fn poisson_exact(view: &BlockView, n: u64) -> Result<PoissonExact> {
    if n == 0 {
        return Err(Error::domain("poisson summary needs n >= 1"));
    }
    let nf = n as f64;
    let mut exponent = Kahan::new();
    let mut u = 0.0f64;
    for b in &view.blocks {
        if b.q == 0.0 {
            continue;
        }
        exponent.add((b.log_count + (-(-b.q).ln_1p()).ln()).exp());
        u = u.max(nf * (b.q.ln() + b.end_log_count()).exp());
    }
    let p_any_success = -(-nf * exponent.value()).exp_m1();
    Ok(PoissonExact { p_any_success, u, v: nf * view.total_mass() })
}

/// One future change of a block's CDF: at t just below `d` the block's
/// exponent -J ln P(dev <= t) becomes `w`.
struct Event {
    d: f64,
    w: f64,
}

/// Streams a block's deviation grid in descending order with O(1) state.
struct BlockStream {
    spec: BinomialSpec,
    log_count: f64,
    side: Side,
    lo: u64,
    hi: u64,
    done: bool,
    log_tail: f64,
    log_domain_min: f64,
}

impl BlockStream {
    fn new(spec: BinomialSpec, log_count: f64, side: Side) -> Self {
        BlockStream {
            lo: 0,
            hi: spec.n,
            spec,
            log_count,
            side,
            done: false,
            log_tail: f64::NEG_INFINITY,
            log_domain_min: f64::INFINITY,
        }
    }

    fn consume(&mut self, k: u64) {
        let lp = log_pmf(&self.spec, k);
        self.log_domain_min = self.log_domain_min.min(lp);
        self.log_tail = logaddexp(self.log_tail, lp);
    }

    fn next_event(&mut self) -> Option<Event> {
        if self.done {
            return None;
        }
        let nf = self.spec.n as f64;
        let q = self.spec.p;
        let d = match self.side {
            Side::Upper => {
                let d = self.hi as f64 / nf - q;
                if d <= 0.0 {
                    self.done = true;
                    return None;
                }
                self.consume(self.hi);
                if self.hi == 0 {
                    self.done = true;
                } else {
                    self.hi -= 1;
                }
                d
            }
            Side::Lower => {
                let d = q - self.lo as f64 / nf;
                if d <= 0.0 || self.lo > self.spec.n {
                    self.done = true;
                    return None;
                }
                self.consume(self.lo);
                self.lo += 1;
                d
            }
            Side::TwoSided => {
                if self.lo > self.hi {
                    self.done = true;
                    return None;
                }
                let (lo_k, hi_k) = (self.lo, self.hi);
                let dl = (lo_k as f64 / nf - q).abs();
                let dh = (hi_k as f64 / nf - q).abs();
                let d = dl.max(dh);
                if d <= 0.0 {
                    // Only the zero-deviation outcome remains; it never
                    // leaves the inside set.
                    self.done = true;
                    return None;
                }
                if dl == d {
                    self.consume(lo_k);
                    self.lo += 1;
                }
                if dh == d && hi_k != lo_k {
                    self.consume(hi_k);
                    if hi_k == 0 {
                        self.done = true;
                    } else {
                        self.hi -= 1;
                    }
                }
                d
            }
        };
        let lt = self.log_tail.min(0.0);
        Some(Event { d, w: (self.log_count + ln_neg_ln_one_minus_exp(lt)).exp() })
    }
}

/// Pairwise summation tree over nonnegative leaves: the root is always a
/// freshly rounded sum of current values, so its relative error stays
/// O(log B * eps) no matter how large past leaf values were.
struct SumTree {
    size: usize,
    tree: Vec<f64>,
}

impl SumTree {
    fn new(leaves: usize) -> Self {
        let size = leaves.next_power_of_two().max(1);
        SumTree { size, tree: vec![0.0; 2 * size] }
    }

    fn update(&mut self, i: usize, v: f64) {
        let mut pos = self.size + i;
        self.tree[pos] = v;
        while pos > 1 {
            pos /= 2;
            self.tree[pos] = self.tree[2 * pos] + self.tree[2 * pos + 1];
        }
    }

    fn total(&self) -> f64 {
        self.tree[1]
    }
}

struct HeapEntry {
    d: f64,
    idx: usize,
    w: f64,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.idx == other.idx
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.d.total_cmp(&other.d).then(self.idx.cmp(&other.idx))
    }
}

/// Sweeps the sup CDF from the largest deviation down to 0 and reports
/// every constant segment as (t_lo, t_hi, s) with
/// P(M <= t) = e^{-s} for t in [t_lo, t_hi). Returns the number of
/// distinct breakpoints and the smallest log pmf encountered.
fn sweep_deviation_cdf(
    view: &BlockView,
    n: u64,
    side: Side,
    mut seg: impl FnMut(f64, f64, f64),
) -> Result<(u64, f64)> {
    if n == 0 {
        return Err(Error::domain("the sup oracle needs n >= 1"));
    }
    if n > MAX_N {
        return Err(Error::resource(format!("the sup oracle caps n at {MAX_N}, got {n}")));
    }
    let active: Vec<&crate::seq::Block> = view.blocks.iter().filter(|b| b.q > 0.0).collect();
    let grid = (n + 1).saturating_mul(active.len() as u64);
    if grid > MAX_BREAKPOINTS {
        return Err(Error::resource(format!(
            "deviation grid has {grid} points, above the {MAX_BREAKPOINTS} cap"
        )));
    }
    let mut streams: Vec<BlockStream> = active
        .iter()
        .map(|b| Ok(BlockStream::new(BinomialSpec::new(n, b.q)?, b.log_count, side)))
        .collect::<Result<_>>()?;
    let mut heap = std::collections::BinaryHeap::with_capacity(streams.len());
    for (idx, s) in streams.iter_mut().enumerate() {
        if let Some(ev) = s.next_event() {
            heap.push(HeapEntry { d: ev.d, idx, w: ev.w });
        }
    }
    let mut tree = SumTree::new(streams.len());
    let mut t_prev = f64::INFINITY;
    let mut breakpoints = 0u64;
    while let Some(top) = heap.pop() {
        let t_e = top.d;
        seg(t_e, t_prev, tree.total());
        breakpoints += 1;
        let mut apply = |entry: HeapEntry, heap: &mut std::collections::BinaryHeap<HeapEntry>| {
            tree.update(entry.idx, entry.w);
            if let Some(ev) = streams[entry.idx].next_event() {
                heap.push(HeapEntry { d: ev.d, idx: entry.idx, w: ev.w });
            }
        };
        apply(top, &mut heap);
        while heap.peek().is_some_and(|e| e.d == t_e) {
            let e = heap.pop().expect("peeked");
            apply(e, &mut heap);
        }
        t_prev = t_e;
    }
    seg(0.0, t_prev, tree.total());
    let log_domain_min =
        streams.iter().fold(f64::INFINITY, |m, s| m.min(s.log_domain_min));
    Ok((breakpoints, log_domain_min))
}
