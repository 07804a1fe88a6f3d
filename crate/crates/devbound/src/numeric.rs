//! Small numeric helpers used across modules: compensated summation,
//! log-domain addition, and stable softplus.

/// Kahan-compensated accumulator. Deterministic for a fixed input order,
/// which the simulator relies on for reproducible summaries.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Kahan::default()
    }

    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// ln(e^a + e^b) without overflow; tolerates -inf on either side.
pub fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// ln(1 + e^x), stable for large |x|. Used to turn ln J into ln(J + 1)
/// when J itself is far outside float range.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// ln(e^x - 1) for x > 0, the inverse of softplus. Stable at both ends:
/// for large x this is x + ln(1 - e^{-x}), for small x ln(expm1(x)).
pub fn ln_expm1(x: f64) -> f64 {
    debug_assert!(x > 0.0, "ln_expm1 needs x > 0, got {x}");
    if x > 36.7 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// ln(-ln F) for F = 1 - c given u = ln c, avoiding the total loss of
/// precision in `ln(-ln(1 - e^u))` when c is tiny. For c < 1e-8 the
/// two-term series -ln(1-c) = c(1 + c/2 + ...) gives
/// ln(-ln F) = u + ln(1 + c/2 + ...) = u + c/2 up to O(c^2).
pub fn ln_neg_ln_one_minus_exp(u: f64) -> f64 {
    debug_assert!(u <= 0.0 || u.is_nan(), "ln of a probability must be <= 0, got {u}");
    if u == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if u == 0.0 {
        return f64::INFINITY;
    }
    if u < -18.420680743952367 {
        // ln(1e-8); below this the series is exact to f64.
        let c = u.exp();
        u + c / 2.0
    } else {
        let c = u.exp();
        (-(-c).ln_1p()).ln()
    }
}
