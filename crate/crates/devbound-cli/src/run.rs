//! Subcommand dispatch: builds report rows from the library calls and
//! writes them in the selected format.
//!
//! Every subcommand is a pure function of (config, flags, seed):
//! re-running emits byte-identical reports, including under different
//! `DEVBOUND_THREADS` settings.

use crate::args::{
    BoundCmd, Cli, Command, DkwCmd, GridArgs, HpCmd, LqCmd, ModeArg, OpenProblemCmd, OracleCmd,
    ScalarCmd, SeqArgs, SideArg, SimulateCmd, SweepCmd, TargetArg,
};
use crate::config::{build_constants, ExperimentConfig};
use crate::report::{emit, fmt_float, Format, ReportRow};
use devbound::binomial::ConcentrationConstants;
use devbound::bounds;
use devbound::oracle::{self, Side};
use devbound::seq::{Blocked, BlockView, ProbSeq, SeqKind, TruncationPolicy};
use devbound::sim::{self, HugeBlockMode, SimPlan, Target, Z95};
use devbound::{Error, Result};
use std::io::Write;
use std::path::PathBuf;

/// Quantities the sweep subcommand can emit per (sequence, n) cell.
pub const SWEEP_QUANTITIES: [&str; 3] = ["rate", "exact", "sim_mean"];

/// Parses argv and runs; returns the process exit code (0 ok, 1 invalid
/// input, 2 resource or I/O failure).
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::error::ErrorKind;
    let cli = match <Cli as clap::Parser>::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                // clap exits with 2 on usage errors; those are
                // validation failures here, and 2 is reserved for
                // resource and I/O problems.
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("devbound: {e}");
            e.exit_code()
        }
    }
}

struct Ctx {
    cfg: ExperimentConfig,
    consts: ConcentrationConstants,
}

impl Ctx {
    fn sequences(&self, seq: &SeqArgs) -> Result<Vec<ProbSeq>> {
        if let Some(d) = seq.descriptor()? {
            return Ok(vec![d.build()?]);
        }
        if self.cfg.sequences.is_empty() {
            return Err(Error::domain(
                "no sequence given: use --family flags or a config with sequences",
            ));
        }
        self.cfg.sequences.iter().map(|d| d.build()).collect()
    }

    fn grid(&self, grid: &GridArgs) -> Result<Vec<u64>> {
        if let Some(g) = grid.grid()? {
            return g.expand();
        }
        match &self.cfg.n {
            Some(g) => g.expand(),
            None => Err(Error::domain("field n: an n grid is required (--n or --n-geom)")),
        }
    }

    fn trials(&self, flag: Option<u64>) -> u64 {
        flag.or(self.cfg.trials).unwrap_or(10_000)
    }

    fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.cfg.seed).unwrap_or(0)
    }

    fn side(&self, flag: Option<SideArg>) -> Result<Side> {
        match (flag, &self.cfg.side) {
            (Some(s), _) => Ok(s.to_side()),
            (None, Some(name)) => Ok(SideArg::parse_name(name)?.to_side()),
            (None, None) => Ok(Side::TwoSided),
        }
    }

    fn mode(&self, flag: Option<ModeArg>) -> Result<HugeBlockMode> {
        match (flag, &self.cfg.mode) {
            (Some(m), _) => Ok(m.to_mode()),
            (None, Some(name)) => Ok(ModeArg::parse_name(name)?.to_mode()),
            (None, None) => Ok(HugeBlockMode::Direct),
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let consts = build_constants(&cfg.constants, &cli.consts)?;
    let ctx = Ctx { cfg, consts };
    let rows = match &cli.command {
        Command::Bound(c) => bound_rows(c, &ctx)?,
        Command::Phi(c) => phi_rows(c, &ctx)?,
        Command::Epsilon(c) => epsilon_rows(c, &ctx)?,
        Command::Oracle(c) => oracle_rows(c, &ctx)?,
        Command::Simulate(c) => simulate_rows(c, &ctx)?,
        Command::Sweep(c) => sweep_rows(c, &ctx)?,
        Command::Dkw(c) => dkw_rows(c, &ctx)?,
        Command::Openproblem(c) => openproblem_rows(c, &ctx)?,
        Command::Lq(c) => lq_rows(c, &ctx)?,
        Command::Hp(c) => hp_rows(c, &ctx)?,
    };
    let format = match (cli.format, &ctx.cfg.output) {
        (Some(f), _) => f,
        (None, Some(name)) => match name.as_str() {
            "csv" => Format::Csv,
            "json" => Format::Json,
            other => {
                return Err(Error::domain(format!(
                    "field output: expected csv or json, got {other:?}"
                )))
            }
        },
        (None, None) => Format::Csv,
    };
    let out = cli.out.clone().or_else(|| ctx.cfg.path.as_ref().map(PathBuf::from));
    write_report(&rows, format, out)
}

fn write_report(rows: &[ReportRow], format: Format, out: Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => {
            let file = std::fs::File::create(&path)?;
            let mut w = std::io::BufWriter::new(file);
            emit(rows, format, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            emit(rows, format, &mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

/// ln(e^x - 1): the ln J matching a given ln(J+1).
fn ln_expm1(x: f64) -> f64 {
    if x > 30.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

fn exact_view(seq: &ProbSeq, n: u64) -> Result<BlockView> {
    match seq.block_view(&TruncationPolicy::for_n(n))? {
        Blocked::Exact(view) => Ok(view),
        Blocked::Bracket { .. } => Err(Error::unrepresentable(format!(
            "{seq} only brackets between block envelopes; exact computations need \
             a block-representable sequence"
        ))),
    }
}

fn opt_not_nan(x: f64) -> Option<f64> {
    if x.is_nan() {
        None
    } else {
        Some(x)
    }
}

fn bound_rows(cmd: &BoundCmd, ctx: &Ctx) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for seq in &ctx.sequences(&cmd.seq)? {
        let id = seq.to_string();
        for &n in &ctx.grid(&cmd.grid)? {
            let (report, quantity) = match seq.kind() {
                SeqKind::Mean => (bounds::delta_rate(seq, n)?, "delta_rate"),
                SeqKind::Variance => (bounds::variance_rate(seq, n)?, "variance_rate"),
            };
            let regime = if report.diverges {
                format!("{}_divergent", report.regime)
            } else {
                report.regime.to_string()
            };
            let mut row = ReportRow::new("bound", &id, n, quantity, report.rate);
            row.regime = Some(regime);
            row.argmax_log_index = opt_not_nan(report.argmax_log_index);
            rows.push(row);
            if let Some(lower) = report.bracket_lower {
                rows.push(ReportRow::new("bound", &id, n, "bracket_lower", lower));
            }
        }
    }
    Ok(rows)
}

fn scalar_id(cmd: &ScalarCmd) -> String {
    format!("step(lnJp1={},q={})", cmd.ln_jp1, cmd.q)
}

fn phi_rows(cmd: &ScalarCmd, ctx: &Ctx) -> Result<Vec<ReportRow>> {
    if !(cmd.ln_jp1 > 0.0) {
        return Err(Error::domain(format!("field lnJp1: must be > 0, got {}", cmd.ln_jp1)));
    }
    let log_j = ln_expm1(cmd.ln_jp1);
    let id = scalar_id(cmd);
    let mut rows = Vec::new();
    for &n in &ctx.grid(&cmd.grid)? {
        let phi = bounds::phi(log_j, cmd.q, n)?;
        let mut row = ReportRow::new("phi", &id, n, "phi", phi.value);
        row.regime = Some(phi.regime.to_string());
        rows.push(row);
    }
    Ok(rows)
}

fn epsilon_rows(cmd: &ScalarCmd, ctx: &Ctx) -> Result<Vec<ReportRow>> {
    if !(cmd.ln_jp1 > 0.0) {
        return Err(Error::domain(format!("field lnJp1: must be > 0, got {}", cmd.ln_jp1)));
    }
    let log_j = ln_expm1(cmd.ln_jp1);
    let id = scalar_id(cmd);
    let mut rows = Vec::new();
    for &n in &ctx.grid(&cmd.grid)? {
        let eps = bounds::epsilon_exact(log_j, cmd.q, n, &ctx.consts)?;
        let regime = if eps.degenerate { Some("degenerate".to_string()) } else { None };
        let mut row = ReportRow::new("epsilon", &id, n, "epsilon", eps.epsilon);
        row.regime = regime.clone();
        rows.push(row);
        let mut row = ReportRow::new("epsilon", &id, n, "threshold", eps.threshold_grid_point);
        row.regime = regime;
        rows.push(row);
    }
    Ok(rows)
}

fn exact_quantity(side: Side) -> &'static str {
    match side {
        Side::TwoSided => "delta_exact",
        Side::Upper => "delta_plus_exact",
        Side::Lower => "delta_minus_exact",
    }
}

fn oracle_rows(cmd: &OracleCmd, ctx: &Ctx) -> Result<Vec<ReportRow>> {
    let side = ctx.side(Some(cmd.side))?;
    let mut rows = Vec::new();
    for seq in &ctx.sequences(&cmd.seq)? {
        let id = seq.to_string();
        for &n in &ctx.grid(&cmd.grid)? {
            let view = exact_view(seq, n)?;
            let exact = oracle::exact_sup_expectation(&view, n, side)?;
            rows.push(ReportRow::new("oracle", &id, n, exact_quantity(side), exact.value));
            for &level in cmd.level.iter().flatten() {
                let q = oracle::sup_quantile(&view, n, level, side)?;
                rows.push(ReportRow::new("oracle", &id, n, &format!("quantile_{level}"), q));
            }
        }
    }
    Ok(rows)
}

fn summary_rows(
    experiment: &str,
    id: &str,
    n: u64,
    est: &sim::SimEstimate,
    mean_quantity: &str,
) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    let mut row = ReportRow::new(experiment, id, n, mean_quantity, est.mean);
    row.std_error = Some(est.std_error);
    row.ci_lo = Some(est.mean - Z95 * est.std_error);
    row.ci_hi = Some(est.mean + Z95 * est.std_error);
    rows.push(row);
    for (level, value) in &est.quantiles {
        rows.push(ReportRow::new(experiment, id, n, &format!("sim_quantile_{level}"), *value));
    }
    for (t, tp) in &est.tail_probs {
        let mut row =
            ReportRow::new(experiment, id, n, &format!("sim_exceed_{t}"), tp.estimate);
        row.ci_lo = Some(tp.wilson_lo);
        row.ci_hi = Some(tp.wilson_hi);
        rows.push(row);
    }
    rows
}

fn write_raw(path: &PathBuf, values: &[f64]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    for v in values {
        writeln!(w, "{}", fmt_float(*v))?;
    }
    w.flush()?;
    Ok(())
}

fn simulate_rows(cmd: &SimulateCmd, ctx: &Ctx) -> Result<Vec<ReportRow>> {
    let trials = ctx.trials(cmd.trials);
    let seed = ctx.seed(cmd.seed);
    let levels = cmd.levels.clone().unwrap_or_else(|| vec![0.5, 0.9, 0.99]);
    let thresholds = cmd.thresholds.clone().unwrap_or_default();
    let mut rows = Vec::new();
    // (plan, row id, row n) per grid point; cdf has no sequence or grid.
    let mut plans: Vec<(SimPlan, String, u64)> = Vec::new();
    match cmd.target {
        TargetArg::Cdf => {
            let x0 = cmd
                .x0
                .ok_or_else(|| Error::domain("field x0: required for --target cdf"))?;
            let samples = cmd
                .samples
                .ok_or_else(|| Error::domain("field samples: required for --target cdf"))?;
            let plan = SimPlan {
                seed,
                trials,
                n: samples,
                target: Target::CdfSup { x0, n_samples: samples },
            };
            plans.push((plan, format!("uniform(x0={x0})"), samples));
        }
        TargetArg::Product => {
            let side = ctx.side(cmd.side)?;
            let mode = ctx.mode(cmd.mode)?;
            for seq in &ctx.sequences(&cmd.seq)? {
                for &n in &ctx.grid(&cmd.grid)? {
                    let view = exact_view(seq, n)?;
                    let target = Target::ProductSup { view, side, mode };
                    plans.push((SimPlan { seed, trials, n, target }, seq.to_string(), n));
                }
            }
        }
        TargetArg::Coupled | TargetArg::TwoPoint => {
            for seq in &ctx.sequences(&cmd.seq)? {
                for &n in &ctx.grid(&cmd.grid)? {
                    let target = match cmd.target {
                        TargetArg::Coupled => Target::CoupledSup { seq: seq.clone() },
                        _ => Target::TwoPoint { seq: seq.clone() },
                    };
                    plans.push((SimPlan { seed, trials, n, target }, seq.to_string(), n));
                }
            }
        }
    }
    if cmd.raw.is_some() && plans.len() > 1 {
        return Err(Error::domain(
            "--raw needs a single simulation cell (one sequence, one n)",
        ));
    }
    for (plan, id, row_n) in &plans {
        let values = sim::simulate_values(plan)?;
        if let Some(path) = &cmd.raw {
            write_raw(path, &values)?;
        }
        let est = sim::summarize(&values, &levels, &thresholds)?;
        rows.extend(summary_rows("simulate", id, *row_n, &est, "sim_mean"));
    }
    Ok(rows)
}

fn sweep_rows(cmd: &SweepCmd, ctx: &Ctx) -> Result<Vec<ReportRow>> {
    let quantities = match &cmd.quantities {
        Some(qs) => qs.clone(),
        None if !ctx.cfg.quantities.is_empty() => ctx.cfg.quantities.clone(),
        None => vec!["rate".to_string()],
    };
    for q in &quantities {
        if !SWEEP_QUANTITIES.contains(&q.as_str()) {
            return Err(Error::domain(format!(
                "field quantities: unknown quantity {q:?} (rate, exact, sim_mean)"
            )));
        }
    }
    let trials = ctx.trials(cmd.trials);
    let seed = ctx.seed(cmd.seed);
    let mut rows = Vec::new();
    for seq in &ctx.sequences(&cmd.seq)? {
        let id = seq.to_string();
        for &n in &ctx.grid(&cmd.grid)? {
            for quantity in &quantities {
                match quantity.as_str() {
                    "rate" => {
                        let (report, name) = match seq.kind() {
                            SeqKind::Mean => (bounds::delta_rate(seq, n)?, "delta_rate"),
                            SeqKind::Variance => {
                                (bounds::variance_rate(seq, n)?, "variance_rate")
                            }
                        };
                        let mut row = ReportRow::new("sweep", &id, n, name, report.rate);
                        row.regime = Some(report.regime.to_string());
                        row.argmax_log_index = opt_not_nan(report.argmax_log_index);
                        rows.push(row);
                    }
                    "exact" => {
                        let view = exact_view(seq, n)?;
                        let exact =
                            oracle::exact_sup_expectation(&view, n, Side::TwoSided)?;
                        rows.push(ReportRow::new("sweep", &id, n, "delta_exact", exact.value));
                    }
                    _ => {
                        let view = exact_view(seq, n)?;
                        let target = Target::ProductSup {
                            view,
                            side: Side::TwoSided,
                            mode: HugeBlockMode::Direct,
                        };
                        let plan = SimPlan { seed, trials, n, target };
                        let est = sim::simulate(&plan)?;
                        rows.extend(summary_rows("sweep", &id, n, &est, "sim_mean"));
                    }
                }
            }
        }
    }
    Ok(rows)
}

fn dkw_rows(cmd: &DkwCmd, ctx: &Ctx) -> Result<Vec<ReportRow>> {
    let trials = ctx.trials(cmd.trials);
    let seed = ctx.seed(cmd.seed);
    let tgrid = match &cmd.t {
        Some(ts) => ts.clone(),
        None if !ctx.cfg.t.is_empty() => ctx.cfg.t.clone(),
        None => vec![1.0, 2.0, 4.0],
    };
    let mut rows = Vec::new();
    for &x0 in &cmd.x0 {
        if !(x0 > 0.0 && x0 < 1.0) {
            return Err(Error::domain(format!("field x0: must be in (0, 1), got {x0}")));
        }
        let v = x0 * (1.0 - x0);
        let id = format!("uniform(x0={x0})");
        for &n in &ctx.grid(&cmd.grid)? {
            let scale = (v / n as f64).sqrt();
            let thresholds: Vec<f64> = tgrid.iter().map(|t| t * scale).collect();
            let plan = SimPlan {
                seed,
                trials,
                n,
                target: Target::CdfSup { x0, n_samples: n },
            };
            let values = sim::simulate_values(&plan)?;
            let est = sim::summarize(&values, &[0.99], &thresholds)?;
            let mut row = ReportRow::new("dkw", &id, n, "sup_mean", est.mean);
            row.std_error = Some(est.std_error);
            row.ci_lo = Some(est.mean - Z95 * est.std_error);
            row.ci_hi = Some(est.mean + Z95 * est.std_error);
            rows.push(row);
            let (level, q99) = est.quantiles[0];
            rows.push(ReportRow::new("dkw", &id, n, &format!("sim_quantile_{level}"), q99));
            for (t, (_, tp)) in tgrid.iter().zip(&est.tail_probs) {
                let mut row =
                    ReportRow::new("dkw", &id, n, &format!("exceed_t{t}"), tp.estimate);
                row.ci_lo = Some(tp.wilson_lo);
                row.ci_hi = Some(tp.wilson_hi);
                rows.push(row);
                let bound = bounds::local_dkw_tail(n, v, *t, &ctx.consts)?.exp();
                rows.push(ReportRow::new("dkw", &id, n, &format!("bound_t{t}"), bound));
            }
        }
    }
    Ok(rows)
}

fn openproblem_rows(cmd: &OpenProblemCmd, ctx: &Ctx) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for &n in &ctx.grid(&cmd.grid)? {
        let k = cmd.k_factor.unwrap_or_else(|| 4.0f64.max((n as f64).ln()));
        let seq = ProbSeq::open_problem(n, k)?;
        let id = seq.to_string();
        let view = exact_view(&seq, n)?;
        let delta_plus = oracle::exact_sup_expectation(&view, n, Side::Upper)?.value;
        let st = bounds::functional_s_t(&seq)?;
        let nf = n as f64;
        let sqrt_s_over_n = (st.s / nf).sqrt();
        rows.push(ReportRow::new("openproblem", &id, n, "delta_plus", delta_plus));
        rows.push(ReportRow::new("openproblem", &id, n, "sqrt_S_over_n", sqrt_s_over_n));
        rows.push(ReportRow::new("openproblem", &id, n, "T_over_n", st.t / nf));
        let psi = (delta_plus - sqrt_s_over_n) * nf / st.t;
        rows.push(ReportRow::new("openproblem", &id, n, "psi", psi));
    }
    Ok(rows)
}

fn lq_rows(cmd: &LqCmd, ctx: &Ctx) -> Result<Vec<ReportRow>> {
    let qnorms = match &cmd.qnorm {
        Some(qs) => qs.clone(),
        None if !ctx.cfg.qnorm.is_empty() => ctx.cfg.qnorm.clone(),
        None => return Err(Error::domain("field qnorm: at least one exponent is required")),
    };
    let mut rows = Vec::new();
    for seq in &ctx.sequences(&cmd.seq)? {
        let id = seq.to_string();
        for &n in &ctx.grid(&cmd.grid)? {
            for &q in &qnorms {
                let band = bounds::lq_band(seq, n, q)?;
                let regime =
                    Some(if band.converges { "convergent" } else { "divergent" }.to_string());
                let mut row = ReportRow::new("lq", &id, n, &format!("lq_lower_q{q}"), band.lower);
                row.regime = regime.clone();
                rows.push(row);
                let mut row = ReportRow::new("lq", &id, n, &format!("lq_upper_q{q}"), band.upper);
                row.regime = regime.clone();
                rows.push(row);
                if let Some(rate) = band.asymptotic_rate {
                    let mut row =
                        ReportRow::new("lq", &id, n, &format!("lq_rate_q{q}"), rate);
                    row.regime = regime;
                    rows.push(row);
                }
                if cmd.exact {
                    let view = exact_view(seq, n)?;
                    let root =
                        oracle::exact_lq_moment(&view, n, q)?.powf(1.0 / q);
                    rows.push(ReportRow::new("lq", &id, n, &format!("lq_exact_root_q{q}"), root));
                }
            }
        }
    }
    Ok(rows)
}

fn hp_rows(cmd: &HpCmd, ctx: &Ctx) -> Result<Vec<ReportRow>> {
    let gammas = match &cmd.gamma {
        Some(gs) => gs.clone(),
        None if !ctx.cfg.gamma.is_empty() => ctx.cfg.gamma.clone(),
        None => return Err(Error::domain("field gamma: at least one level is required")),
    };
    let mut rows = Vec::new();
    for seq in &ctx.sequences(&cmd.seq)? {
        let id = seq.to_string();
        for &n in &ctx.grid(&cmd.grid)? {
            for &gamma in &gammas {
                let band = bounds::hp_band(seq, n, gamma, &ctx.consts)?;
                let regime = band.poissonian_flag.then(|| "poissonian".to_string());
                for (name, value) in [
                    (format!("hp_lower_g{gamma}"), band.lower),
                    (format!("hp_upper_g{gamma}"), band.upper),
                    (format!("hp_mcdiarmid_g{gamma}"), band.mcdiarmid_width),
                ] {
                    let mut row = ReportRow::new("hp", &id, n, &name, value);
                    row.regime = regime.clone();
                    rows.push(row);
                }
            }
        }
    }
    Ok(rows)
}
