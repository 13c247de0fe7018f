//! Command implementations behind the `rpencil` binary.

pub mod config;

use std::path::Path;

use rpencil::lie_core::{build_root_system, chevalley_basis, compact_basis, haar_samples, ALGEBRAIC_TOL};
use rpencil::pencil::{
    cross_check_group_vs_chart, degeneracy_scan, fmt_f64, straddling_points, PencilContext, PencilReport,
};
use rpencil::rmatrix::{check_ad_invariance, compact_r, drinfeld_jimbo_r, schouten_square};
use rpencil::vaisman::{
    cp1_obstruction, cp1_xi0, default_obstruction_grid, example1_with, example2, quantization_verdict, Check,
    PrequantumConvention, VerdictMethod,
};
use serde_json::{json, Value};

pub use config::{Format, Resolved, RunConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Exit codes: all checks passed, a check failed, bad configuration or IO.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl From<rpencil::Error> for CliError {
    fn from(e: rpencil::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

/// Result of one command: checks plus the files to write.
#[derive(Debug, Clone)]
pub struct CommandReport {
    pub command: String,
    pub checks: Vec<Check>,
    pub json: Value,
    pub csv: Vec<(String, String)>,
}

impl CommandReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass() {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }

    pub fn checks_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["check", "value", "tolerance", "pass"])
            .expect("in-memory write");
        for c in &self.checks {
            w.write_record([
                c.name.clone(),
                fmt_f64(c.value),
                fmt_f64(c.tolerance),
                c.pass.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    pub fn summary_lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                format!(
                    "{} {}/{} value={} tol={}",
                    if c.pass { "PASS" } else { "FAIL" },
                    self.command,
                    c.name,
                    fmt_f64(c.value),
                    fmt_f64(c.tolerance)
                )
            })
            .collect()
    }
}

fn envelope(command: &str, cfg: &RunConfig, checks: &[Check], payload: Value) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": cfg,
        "pass": checks.iter().all(|c| c.pass),
        "checks": checks,
        "result": payload,
    })
}

fn context(res: &Resolved) -> Result<PencilContext, CliError> {
    if res.series != rpencil::lie_core::Series::A {
        return Err(rpencil::Error::UnsupportedAlgebra {
            series: format!("{:?}", res.series),
            rank: res.rank,
        }
        .into());
    }
    Ok(PencilContext::new(res.label.clone(), res.rank, &res.roots)?)
}

/// Builds and validates the Chevalley and compact bases and the r-matrices.
pub fn cmd_algebra(cfg: &RunConfig) -> Result<CommandReport, CliError> {
    let res = cfg.validate().map_err(CliError::Config)?;
    let rs = build_root_system(res.series, res.rank)?;
    let chev = chevalley_basis(&rs)?;
    let basis = compact_basis(&chev, &res.roots)?;
    let v = basis.validate()?;
    let n = rs.matrix_size();
    let compact = &basis.compact()?.basis;

    let mut checks = vec![
        Check::exact("compact_dim", v.compact_dim as f64, (n * n - 1) as f64),
        Check::at_most("anti_hermitian", v.anti_hermitian, ALGEBRAIC_TOL),
        Check::at_most("traceless", v.traceless, ALGEBRAIC_TOL),
        Check::at_most("orthonormality", v.orthonormality, ALGEBRAIC_TOL),
        Check::at_most("closure", v.closure, ALGEBRAIC_TOL),
    ];
    let dj = drinfeld_jimbo_r(&basis);
    let ro = compact_r(&basis)?;
    let transported = ro.transport(compact, &basis.chevalley)?;
    let consistency = (&transported.coeffs - &dj.coeffs).norm();
    checks.push(Check::at_most("r_o_equals_drinfeld_jimbo", consistency, ALGEBRAIC_TOL));
    let rr = schouten_square(&ro, compact)?;
    let samples = haar_samples(n, cfg.scan.samples.min(50), cfg.scan.seed);
    let invariance = check_ad_invariance(&rr, compact, &samples)?;
    checks.push(Check::at_most("mybe_ad_invariance", invariance, 1e-10));

    let payload = json!({
        "label": res.label,
        "series": format!("{:?}", res.series),
        "rank": res.rank,
        "parabolic": res.roots.iter().map(|r| r.to_string()).collect::<Vec<_>>(),
        "m": res.roots.len(),
        "positive_roots": rs.positive_roots.iter().map(|r| r.to_string()).collect::<Vec<_>>(),
        "compact_basis": compact.to_json(),
        "r_o": ro.to_json(),
        "r_drinfeld_jimbo": dj.to_json(),
    });
    let json = envelope("algebra", cfg, &checks, payload);
    let mut report = CommandReport {
        command: "algebra".into(),
        checks,
        json,
        csv: Vec::new(),
    };
    report.csv.push(("algebra_checks.csv".into(), report.checks_csv()));
    Ok(report)
}

/// Degeneracy scan, spectral bound and (on `CP^1`) the group/chart cross-check.
pub fn cmd_pencil_scan(cfg: &RunConfig) -> Result<CommandReport, CliError> {
    let res = cfg.validate().map_err(CliError::Config)?;
    let ctx = context(&res)?;
    let tol = &cfg.tolerances;
    let report: PencilReport = degeneracy_scan(
        &ctx,
        &cfg.scan.lambda_grid,
        cfg.scan.samples,
        cfg.scan.seed,
        tol.rank_tol,
    )?;

    let mut checks = vec![
        Check::at_most("bound_max", report.bound_max, 1.0 + tol.bound_tol),
        Check::at_most(
            "bound_at_identity",
            (report.bound_at_identity - 1.0).abs(),
            tol.bound_tol,
        ),
    ];
    for row in &report.rows {
        let expected = (-2.0..=0.0).contains(&row.lambda);
        checks.push(Check::flag(
            format!("degenerate[{}]={}", row.lambda, row.degenerate),
            row.degenerate == expected,
        ));
        if ctx.is_su2() && row.lambda > -2.0 && row.lambda < 0.0 {
            let xi0 = cp1_xi0(row.lambda)?;
            let err = row
                .witness
                .as_ref()
                .and_then(|w| w.radius_sq)
                .map(|r| (r - xi0 * xi0).abs())
                .unwrap_or(f64::INFINITY);
            checks.push(Check::at_most(format!("witness_radius[{}]", row.lambda), err, 1e-6));
        }
    }
    let mut cross = Vec::new();
    if ctx.is_su2() {
        for &lambda in &cfg.scan.lambda_grid {
            let mut pts = straddling_points(&ctx, lambda);
            for (k, g) in haar_samples(2, 10, cfg.scan.seed).into_iter().enumerate() {
                pts.push((format!("haar[{k}]"), g));
            }
            let c = cross_check_group_vs_chart(&ctx, lambda, &pts, tol.rank_tol)?;
            checks.push(Check::at_most(
                format!("group_vs_chart[{lambda}]"),
                c.mismatches as f64,
                0.0,
            ));
            cross.push(c);
        }
    }
    let payload = json!({ "report": report, "cross_checks": cross });
    let json = envelope("pencil-scan", cfg, &checks, payload);
    let mut out = CommandReport {
        command: "pencil-scan".into(),
        checks,
        json,
        csv: vec![("pencil_report.csv".into(), report.to_csv())],
    };
    out.csv.push(("pencil_checks.csv".into(), out.checks_csv()));
    Ok(out)
}

/// Example certifications and the `CP^1` obstruction for each configured `lambda`.
pub fn cmd_vaisman(cfg: &RunConfig) -> Result<CommandReport, CliError> {
    cfg.validate().map_err(CliError::Config)?;
    let v = &cfg.vaisman;
    let conv: PrequantumConvention = v.prequantum_convention.parse()?;
    let tol = &cfg.tolerances;

    let ex1 = example1_with(conv, v.hbar);
    let ex2 = example2();
    let mut checks = Vec::new();
    for cert in [&ex1, &ex2] {
        for c in &cert.checks {
            let mut c = c.clone();
            c.name = format!("{}.{}", cert.name, c.name);
            checks.push(c);
        }
    }

    let mut obstructions = Vec::new();
    let mut verdicts = Vec::new();
    let mut csv = Vec::new();
    for &lambda in &v.lambdas {
        let verdict = quantization_verdict(lambda)?;
        match verdict.method {
            VerdictMethod::StokesFit => {
                let grid = if v.xi_grid.is_empty() {
                    default_obstruction_grid(lambda)?
                } else {
                    v.xi_grid.clone()
                };
                let res = cp1_obstruction(lambda, &grid)?;
                checks.push(Check::at_most(
                    format!("obstruction[{lambda}].rel_err"),
                    res.max_rel_err,
                    tol.quad_rel_err,
                ));
                if let Some(fit) = &res.fit {
                    checks.push(Check {
                        name: format!("obstruction[{lambda}].log_fit_r2"),
                        value: fit.log_r2,
                        tolerance: rpencil::vaisman::LOG_FIT_R2,
                        pass: fit.log_r2 > rpencil::vaisman::LOG_FIT_R2,
                    });
                }
                csv.push((format!("obstruction_{lambda}.csv"), res.to_csv()));
                obstructions.push(res);
            }
            VerdictMethod::WeylFlip => {
                checks.push(Check::at_most(
                    format!("obstruction[{lambda}].weyl_flip"),
                    verdict.weyl_flip_residual.unwrap_or(f64::INFINITY),
                    1e-10,
                ));
            }
        }
        checks.push(Check::flag(
            format!("verdict[{lambda}].quantizable=false"),
            !verdict.quantizable,
        ));
        verdicts.push(verdict);
    }
    for a in &verdicts {
        if let Some(b) = verdicts.iter().find(|b| b.lambda == a.partner && a.lambda < b.lambda) {
            checks.push(Check::flag(
                format!("flip_pair[{},{}]", a.lambda, b.lambda),
                a.quantizable == b.quantizable,
            ));
        }
    }

    let payload = json!({
        "example1": ex1,
        "example2": ex2,
        "obstructions": obstructions,
        "verdicts": verdicts,
    });
    let json = envelope("vaisman", cfg, &checks, payload);
    let mut out = CommandReport {
        command: "vaisman".into(),
        checks,
        json,
        csv,
    };
    out.csv.push(("vaisman_checks.csv".into(), out.checks_csv()));
    Ok(out)
}

/// Writes the report files in the configured formats.
pub fn write_report(cfg: &RunConfig, report: &CommandReport) -> Result<(), CliError> {
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let write = |name: &str, contents: &str| -> Result<(), CliError> {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    };
    if cfg.wants_json() {
        let text = serde_json::to_string_pretty(&report.json).expect("report values serialize");
        write(&format!("{}.json", report.command.replace('-', "_")), &text)?;
    }
    if cfg.wants_csv() {
        for (name, contents) in &report.csv {
            write(name, contents)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Algebra,
    PencilScan,
    Vaisman,
    All,
}

/// Runs a command, writes its files, prints summary lines and returns the exit code.
type CommandFn = fn(&RunConfig) -> Result<CommandReport, CliError>;

pub fn run(command: Command, cfg: &RunConfig, out: &mut impl std::io::Write) -> i32 {
    let cmds: &[CommandFn] = match command {
        Command::Algebra => &[cmd_algebra],
        Command::PencilScan => &[cmd_pencil_scan],
        Command::Vaisman => &[cmd_vaisman],
        Command::All => &[cmd_algebra, cmd_pencil_scan, cmd_vaisman],
    };
    let mut code = EXIT_PASS;
    for cmd in cmds {
        let report = match cmd(cfg).and_then(|r| write_report(cfg, &r).map(|_| r)) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("{e}");
                return EXIT_CONFIG;
            }
        };
        for line in report.summary_lines() {
            let _ = writeln!(out, "{line}");
        }
        code = code.max(report.exit_code());
    }
    code
}

/// Loads the config file (or defaults) and applies flag overrides.
pub fn load_config(
    path: Option<&Path>,
    seed: Option<u64>,
    out: Option<&Path>,
    format: Option<Format>,
    preset: Option<&str>,
) -> Result<RunConfig, CliError> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p).map_err(CliError::Config)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.scan.seed = s;
    }
    if let Some(d) = out {
        cfg.output.dir = d.to_path_buf();
    }
    if let Some(f) = format {
        cfg.output.formats = vec![f];
    }
    if let Some(p) = preset {
        cfg.parabolic.preset = Some(p.to_string());
        cfg.parabolic.roots.clear();
        cfg.algebra.rank = None;
    }
    cfg.validate().map_err(CliError::Config)?;
    Ok(cfg)
}
