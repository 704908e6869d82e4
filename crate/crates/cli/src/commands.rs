//! Subcommand implementations. Each builds a [`Report`]; `main` decides
//! where it is written.

use std::io::Write;

use optrec::analysis::{beta_response, crossover_report, sweep_beta, sweep_varpi, SignRegion};
use optrec::oracle::{brute_force_optimum, compare, GridSpec, EPS_GRID_BITS};
use optrec::simulator::{cross_entropy_rate, sample_sequence, simulate_revenue, SimConfig, RNG_ALGORITHM};
use optrec::{
    entropy, expected_revenue, kl_divergence, optimal_distribution, thresholds, verify_kkt, LogBase, Pmf,
    SolveResult, SystemKind,
};

use crate::config::RunConfig;
use crate::error::{exit, CliError};
use crate::series::{format_num, Cell, SweepSeries};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_GRID: u32 = 200;
pub const DEFAULT_TRIALS: u64 = 100_000;
pub const DEFAULT_SEQUENCE_LENGTH: u64 = 100_000;
/// Agreement band for Monte-Carlo checks, in standard errors.
pub const SIGMA_BAND: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Solve,
    Thresholds,
    SweepBeta,
    SweepVarpi,
    Analyze,
    Oracle,
    Simulate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Thresholds => "thresholds",
            Command::SweepBeta => "sweep-beta",
            Command::SweepVarpi => "sweep-varpi",
            Command::Analyze => "analyze",
            Command::Oracle => "oracle",
            Command::Simulate => "simulate",
        }
    }

    pub fn default_format(self) -> Format {
        match self {
            Command::SweepBeta | Command::SweepVarpi => Format::Csv,
            _ => Format::Table,
        }
    }
}

/// A command's table, free-form result lines and exit code.
#[derive(Debug, Clone)]
pub struct Report {
    pub series: SweepSeries,
    pub notes: Vec<String>,
    pub code: u8,
}

impl Report {
    /// CSV carries the notes as metadata; tables print them after the rows.
    pub fn write<W: Write>(mut self, mut w: W, format: Format) -> Result<(), CliError> {
        match format {
            Format::Csv => {
                self.series.metadata.extend(self.notes.iter().map(|n| format!("result: {n}")));
                self.series.write_csv(w)
            }
            Format::Table => {
                self.series.write_table(&mut w)?;
                for n in &self.notes {
                    writeln!(w, "{n}")?;
                }
                Ok(())
            }
        }
    }
}

fn metadata(cmd: Command, cfg: &RunConfig) -> Vec<String> {
    let mut m = vec![
        format!("optrec {VERSION}"),
        format!("command: {}", cmd.name()),
        format!(
            "seed: {}",
            cfg.seed.map_or_else(|| "none".to_string(), |s| s.to_string())
        ),
        format!("rng: {RNG_ALGORITHM}"),
        format!("log_base: {}", cfg.log_base),
        "config:".to_string(),
    ];
    m.extend(cfg.to_toml().lines().map(|l| format!("  {l}")));
    m
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Report, CliError> {
    let mut report = match cmd {
        Command::Solve => solve(cfg)?,
        Command::Thresholds => thresholds_table(cfg)?,
        Command::SweepBeta => sweep_beta_cmd(cfg)?,
        Command::SweepVarpi => sweep_varpi_cmd(cfg)?,
        Command::Analyze => analyze(cfg)?,
        Command::Oracle => oracle(cfg)?,
        Command::Simulate => simulate(cfg)?,
    };
    let mut meta = metadata(cmd, cfg);
    meta.append(&mut report.series.metadata);
    report.series.metadata = meta;
    Ok(report)
}

fn class_columns(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn in_base(bits: Option<f64>, base: LogBase) -> Option<f64> {
    bits.map(|b| match base {
        LogBase::Bits => b,
        LogBase::Nats => b * std::f64::consts::LN_2,
    })
}

fn varpi_cell(r: &SolveResult) -> Cell {
    Cell::opt(r.varpi_star.map(|w| w.value()))
}

fn p_cells(r: &SolveResult, n: usize) -> Vec<Cell> {
    match &r.p_star {
        Some(p) => p.iter().map(|&v| Cell::Num(v)).collect(),
        None => vec![Cell::Empty; n],
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|&x| format_num(x)).collect();
    format!("[{}]", parts.join(", "))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "/".to_string(), format_num)
}

fn solve(cfg: &RunConfig) -> Result<Report, CliError> {
    let u = cfg.utility()?;
    let beta = cfg.beta_scalar()?;
    let params = cfg.revenue;
    let r = optimal_distribution(&params, &u, beta)?;
    let n = u.len();
    let base = cfg.log_base;

    let mut header = vec!["beta", "case", "outcome", "system", "alpha", "varpi"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    header.extend(class_columns("p", n));
    header.extend(["kl", "revenue", "kkt_residual"].map(String::from));
    let mut series = SweepSeries::new(header);

    let revenue = match &r.p_star {
        Some(p) => Some(expected_revenue(p, &u, &params)?),
        None => None,
    };
    let kkt = verify_kkt(&r, &u, &params, beta).ok();
    let mut row = vec![
        Cell::Num(beta),
        Cell::Num(r.regime.case_id.number() as f64),
        Cell::text(r.regime.case_id.outcome()),
        Cell::text(r.regime.system.to_string()),
        Cell::opt(r.alpha),
        varpi_cell(&r),
    ];
    row.extend(p_cells(&r, n));
    row.extend([
        Cell::opt(in_base(r.kl_bits, base)),
        Cell::opt(revenue),
        Cell::opt(kkt.map(|k| k.max_residual())),
    ]);
    series.push(row);

    let t = r.thresholds;
    let mut notes = vec![
        format!(
            "case {} ({}, {} system)",
            r.regime.case_id,
            r.regime.case_id.outcome(),
            r.regime.system
        ),
        format!(
            "thresholds: beta_0 = {}, beta_ad = {}, beta_no = {}, beta_ne = {}",
            format_num(t.beta_0),
            fmt_opt(t.beta_ad()),
            fmt_opt(t.beta_no()),
            format_num(t.beta_ne)
        ),
        format!("alpha = {}", fmt_opt(r.alpha)),
    ];
    let code = match (&r.p_star, r.varpi_star) {
        (Some(p), Some(w)) => {
            notes.push(format!("varpi* = {w}"));
            notes.push(format!("P* = {}", fmt_vec(p)));
            notes.push(format!(
                "D(P*||U) = {} {}",
                fmt_opt(in_base(r.kl_bits, base)),
                base.unit()
            ));
            notes.push(format!(
                "revenue check: R(P*) = {} (target {})",
                fmt_opt(revenue),
                format_num(beta)
            ));
            if let Some(k) = kkt {
                notes.push(format!("kkt max residual = {}", format_num(k.max_residual())));
            }
            exit::OK
        }
        _ => {
            notes.push(format!("infeasible: no distribution reaches revenue {}", format_num(beta)));
            exit::INFEASIBLE
        }
    };
    Ok(Report { series, notes, code })
}

fn thresholds_table(cfg: &RunConfig) -> Result<Report, CliError> {
    let u = cfg.utility()?;
    let p = cfg.revenue;
    let t = thresholds(&p, &u);
    let absent = |v: Option<f64>| v.map_or_else(|| Cell::text("/"), Cell::Num);
    let mut series = SweepSeries::new(["sign_sum", "beta_0", "beta_no", "beta_ad", "gamma", "beta_ne"]);
    series.push(vec![
        Cell::Num(p.sign_sum()),
        Cell::Num(t.beta_0),
        absent(t.beta_no()),
        absent(t.beta_ad()),
        Cell::Num(optrec::gamma(&u)),
        Cell::Num(t.beta_ne),
    ]);
    let notes = vec![format!("system: {}", t.kind)];
    Ok(Report {
        series,
        notes,
        code: exit::OK,
    })
}

fn sweep_beta_cmd(cfg: &RunConfig) -> Result<Report, CliError> {
    let u = cfg.utility()?;
    let range = cfg.beta_range()?;
    let n = u.len();
    let base = cfg.log_base;
    let points = sweep_beta(&cfg.revenue, &u, range.min, range.max, range.steps)?;

    let mut header: Vec<String> = ["beta", "case", "outcome", "alpha", "varpi"].map(String::from).to_vec();
    header.extend(class_columns("p", n));
    header.extend(["kl", "revenue"].map(String::from));
    let mut series = SweepSeries::new(header);
    for pt in &points {
        let r = &pt.result;
        let mut row = vec![
            Cell::Num(pt.beta),
            Cell::Num(r.regime.case_id.number() as f64),
            Cell::text(r.regime.case_id.outcome()),
            Cell::opt(r.alpha),
            varpi_cell(r),
        ];
        row.extend(p_cells(r, n));
        row.extend([Cell::opt(in_base(r.kl_bits, base)), Cell::opt(pt.revenue)]);
        series.push(row);
    }
    Ok(Report {
        series,
        notes: Vec::new(),
        code: exit::OK,
    })
}

fn sweep_varpi_cmd(cfg: &RunConfig) -> Result<Report, CliError> {
    let u = cfg.utility()?;
    let range = cfg.varpi_range()?;
    let sweep = sweep_varpi(&u, range.min, range.max, range.steps)?;
    let mut header = vec!["varpi".to_string()];
    header.extend(class_columns("f", u.len()));
    let mut series = SweepSeries::new(header);
    for (w, row) in sweep.varpi.iter().zip(&sweep.rows) {
        let mut cells = vec![Cell::Num(*w)];
        cells.extend(row.iter().map(|&v| Cell::Num(v)));
        series.push(cells);
    }
    Ok(Report {
        series,
        notes: Vec::new(),
        code: exit::OK,
    })
}

fn region_label(r: SignRegion) -> &'static str {
    match r {
        SignRegion::AmplifiedAbove => "amplified_above",
        SignRegion::AmplifiedBelow => "amplified_below",
        SignRegion::AlwaysUtility => "always_utility",
    }
}

fn analyze(cfg: &RunConfig) -> Result<Report, CliError> {
    let u = cfg.utility()?;
    let params = cfg.revenue;
    let non_neutral = params.system_kind() != SystemKind::Neutral;
    let mut notes = Vec::new();

    // Partition tilt: explicit value, else the optimum for a scalar target.
    let at = match (cfg.partition_varpi, cfg.beta_scalar()) {
        (Some(w), _) => Some(w),
        (None, Ok(beta)) => {
            let r = optimal_distribution(&params, &u, beta)?;
            let w = r.varpi_star.map(|w| w.value()).filter(|w| w.is_finite());
            if let Some(w) = w {
                notes.push(format!("partition at varpi* = {} (beta = {})", format_num(w), format_num(beta)));
            }
            w
        }
        (None, Err(_)) => None,
    };
    let report = crossover_report(&u, Some(&params), at)?;

    let header = [
        "class",
        "u",
        "varpi_x",
        "varpi_tilde_x",
        "beta_x",
        "region",
        "p_vs_beta",
        "partition",
    ];
    let mut series = SweepSeries::new(header);
    for c in &report.classes {
        let response = if non_neutral {
            let r = beta_response(&params, &u, c.index)?;
            let mut parts = Vec::new();
            if let Some((a, b)) = r.increasing {
                parts.push(format!("up ({}, {})", format_num(a), format_num(b)));
            }
            if let Some((a, b)) = r.decreasing {
                parts.push(format!("down ({}, {})", format_num(a), format_num(b)));
            }
            Cell::text(parts.join("; "))
        } else {
            Cell::Empty
        };
        let arrow = report
            .partition
            .as_ref()
            .map_or(Cell::Empty, |(_, p)| Cell::text(p.arrow(c.index).to_string()));
        series.push(vec![
            Cell::Num((c.index + 1) as f64),
            Cell::Num(c.u),
            Cell::Num(c.varpi_x),
            c.varpi_tilde_x.map_or_else(|| Cell::text("/"), Cell::Num),
            Cell::opt(c.beta_x),
            Cell::text(region_label(c.sign_region)),
            response,
            arrow,
        ]);
    }

    notes.push(format!("gamma = {}", format_num(report.gamma)));
    let mut tilde: Vec<(usize, f64)> = report
        .classes
        .iter()
        .filter_map(|c| c.varpi_tilde_x.map(|w| (c.index + 1, w)))
        .collect();
    if !tilde.is_empty() {
        tilde.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut parts: Vec<String> = Vec::new();
        let mut zero_placed = false;
        for (i, w) in &tilde {
            if !zero_placed && *w > 0.0 {
                parts.push("0".into());
                zero_placed = true;
            }
            parts.push(format!("varpi_tilde_{i}"));
        }
        if !zero_placed {
            parts.push("0".into());
        }
        notes.push(format!("crossing order: {}", parts.join(" < ")));
    }
    if let Some((w, p)) = &report.partition {
        let one_based = |v: &[usize]| v.iter().map(|x| (x + 1).to_string()).collect::<Vec<_>>().join(",");
        notes.push(format!(
            "at varpi = {}: amplified {{{}}}, attenuated {{{}}}",
            format_num(*w),
            one_based(&p.amplified),
            one_based(&p.attenuated)
        ));
    }
    Ok(Report {
        series,
        notes,
        code: exit::OK,
    })
}

fn oracle(cfg: &RunConfig) -> Result<Report, CliError> {
    let u = cfg.utility()?;
    let beta = cfg.beta_scalar()?;
    let params = cfg.revenue;
    let grid = GridSpec::new(cfg.grid.unwrap_or(DEFAULT_GRID))?;
    let base = cfg.log_base;
    let n = u.len();

    let solved = optimal_distribution(&params, &u, beta)?;
    let lattice = brute_force_optimum(&u, &params, beta, grid)?;
    let cmp = compare(&solved, &lattice, &u, &params, beta)?;

    let mut header: Vec<String> = vec!["source".into(), "feasible".into()];
    header.extend(class_columns("p", n));
    header.extend(["kl", "revenue"].map(String::from));
    let mut series = SweepSeries::new(header);
    let flag = |b: bool| Cell::text(if b { "yes" } else { "no" });

    let mut row = vec![Cell::text("optimizer"), flag(solved.is_feasible())];
    row.extend(p_cells(&solved, n));
    let rev = match &solved.p_star {
        Some(p) => Some(expected_revenue(p, &u, &params)?),
        None => None,
    };
    row.extend([Cell::opt(in_base(solved.kl_bits, base)), Cell::opt(rev)]);
    series.push(row);

    let mut row = vec![Cell::text("oracle"), flag(lattice.is_feasible())];
    match &lattice.best {
        Some(b) => {
            row.extend(b.point.iter().map(|&v| Cell::Num(v)));
            row.extend([Cell::opt(in_base(Some(b.kl_bits), base)), Cell::Num(b.revenue)]);
        }
        None => row.extend(vec![Cell::Empty; n + 2]),
    }
    series.push(row);

    let mut notes = vec![
        format!(
            "lattice: m = {}, {} points, {} feasible",
            lattice.resolution, lattice.points, lattice.feasible_points
        ),
        format!("delta_kl_bits = {}", fmt_opt(cmp.delta_kl_bits)),
        format!("eps_grid_bits (rounding certificate) = {}", fmt_opt(cmp.eps_grid_bits)),
        format!("documented eps_grid_bits = {}", format_num(EPS_GRID_BITS)),
    ];
    if cmp.resolution_warning {
        notes.push("warning: no lattice point is feasible at this resolution".into());
    }
    let lost = !cmp.never_loses(EPS_GRID_BITS);
    notes.push(format!(
        "verdict: {}",
        if lost { "FAIL (closed form beaten by the lattice)" } else { "ok" }
    ));
    Ok(Report {
        series,
        notes,
        code: if lost { exit::VERIFICATION_FAILED } else { exit::OK },
    })
}

fn simulate(cfg: &RunConfig) -> Result<Report, CliError> {
    let u = cfg.utility()?;
    let params = cfg.revenue;
    let seed = cfg
        .seed
        .ok_or_else(|| CliError::Config("simulate needs a `seed` (config or --seed)".into()))?;
    let base = cfg.log_base;
    let mut notes = Vec::new();

    let p: Pmf = match (&cfg.recommendation, cfg.beta_scalar()) {
        (Some(raw), _) => Pmf::new(raw, crate::config::CONFIG_SUM_TOL)
            .map_err(|e| CliError::Config(format!("field `recommendation`: {e}")))?,
        (None, Ok(beta)) => {
            let r = optimal_distribution(&params, &u, beta)?;
            notes.push(format!("recommendation: optimum for beta = {}", format_num(beta)));
            r.p_star.ok_or_else(|| {
                CliError::Config(format!("beta = {beta} is infeasible; nothing to simulate"))
            })?
        }
        (None, Err(_)) => {
            notes.push("recommendation: utility distribution".into());
            u.to_pmf()
        }
    };
    let sim = SimConfig {
        trials: cfg.trials.unwrap_or(DEFAULT_TRIALS),
        sequence_length: cfg.sequence_length.unwrap_or(DEFAULT_SEQUENCE_LENGTH),
        seed,
        params,
        u: u.clone(),
        p: p.clone(),
    };
    let rev = simulate_revenue(&sim)?;
    let rev_ref = expected_revenue(&p, &u, &params)?;
    let seq = sample_sequence(&p, sim.sequence_length, seed)?;
    let ce = cross_entropy_rate(&seq, &u, base)?;
    let kl_ref = kl_divergence(&p, &u, base)?;
    let ce_ref = entropy(&p, base) + kl_ref;

    let mut series = SweepSeries::new(["quantity", "estimate", "stderr", "reference", "sigmas", "check"]);
    let mut all_pass = true;
    let mut check = |est: f64, se: f64, reference: f64| -> (Cell, Cell) {
        let dev = (est - reference).abs();
        let pass = dev <= SIGMA_BAND * se || dev == 0.0;
        all_pass &= pass;
        let sig = if se > 0.0 { Cell::Num(dev / se) } else { Cell::Empty };
        (sig, Cell::text(if pass { "pass" } else { "fail" }))
    };
    let (s1, c1) = check(rev.mean, rev.stderr, rev_ref);
    series.push(vec![
        Cell::text("revenue"),
        Cell::Num(rev.mean),
        Cell::Num(rev.stderr),
        Cell::Num(rev_ref),
        s1,
        c1,
    ]);
    let (s2, c2) = check(ce.kl_estimate, ce.kl_stderr, kl_ref);
    series.push(vec![
        Cell::text("plugin_kl"),
        Cell::Num(ce.kl_estimate),
        Cell::Num(ce.kl_stderr),
        Cell::Num(kl_ref),
        s2,
        c2,
    ]);
    series.push(vec![
        Cell::text("cross_entropy"),
        Cell::Num(ce.cross_entropy),
        Cell::Empty,
        Cell::Num(ce_ref),
        Cell::Empty,
        Cell::Empty,
    ]);
    notes.push(format!(
        "trials = {}, sequence length = {}, divergences in {}",
        sim.trials,
        sim.sequence_length,
        base.unit()
    ));
    notes.push(format!("raw plug-in divergence = {}", format_num(ce.plugin_kl)));
    Ok(Report {
        series,
        notes,
        code: if all_pass { exit::OK } else { exit::VERIFICATION_FAILED },
    })
}

