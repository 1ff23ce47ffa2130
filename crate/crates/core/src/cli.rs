//! Command-line workflows. Exit code 0 = all checks passed, 2 = a check failed, 1 = usage or config error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::assembly::{
    assemble, local_chart, pohozaev_balance, pohozaev_balance_both, residual, BlowupConfig, LocalDisk,
};
use crate::config::RunConfig;
use crate::coupling::{
    check_hypotheses, gamma_project, lambda_in, lambda_scale, m_star, pohozaev_defect,
};
use crate::criteria::{criteria_report, lambda_prediction, DQuadrature, LambdaForm, Regime};
use crate::error::{Error, Result};
use crate::fredholm::{first_order_correction, invertibility_check, projection_idempotency};
use crate::linearized::{b_coefficient, kernel_fields, FrequencyGrid, HLocalData};
use crate::radial_bubble::{match_sigma, solve_radial, verify_expansions, RadialBubble};
use crate::report::{loglog_slope, write_file, Check, Report, Table};
use crate::torus::{d_min, find_critical, TorusGreen};

#[derive(Debug, Parser)]
#[command(name = "liouville", version, about = "Blowup analysis toolkit for Liouville systems on the flat torus")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for reports.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Overrides the configured solver tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Overrides the configured ε list (comma-separated).
    #[arg(long, global = true, value_delimiter = ',')]
    pub eps_list: Option<Vec<f64>>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Radial entire solutions.
    #[command(subcommand)]
    Bubble(BubbleCmd),
    /// Projection of a parameter ray onto the critical surface.
    #[command(subcommand)]
    Gamma(GammaCmd),
    /// Green's function evaluation.
    #[command(subcommand)]
    Torus(TorusCmd),
    /// Critical points of the location functional.
    #[command(subcommand)]
    Critical(CriticalCmd),
    /// H, D, L coefficients and regime classification.
    #[command(subcommand)]
    Criteria(CriteriaCmd),
    /// Numerical verification workflows.
    #[command(subcommand)]
    Verify(VerifyCmd),
}

#[derive(Debug, Subcommand)]
pub enum BubbleCmd {
    Solve,
    Match,
}

#[derive(Debug, Subcommand)]
pub enum GammaCmd {
    Project,
}

#[derive(Debug, Subcommand)]
pub enum TorusCmd {
    Green,
}

#[derive(Debug, Subcommand)]
pub enum CriticalCmd {
    Find,
}

#[derive(Debug, Subcommand)]
pub enum CriteriaCmd {
    Report,
}

#[derive(Debug, Subcommand)]
pub enum VerifyCmd {
    Expansion,
    Kernels,
    Frequency,
    Fredholm,
    Matching,
    Pohozaev,
    Residual,
    LambdaRate,
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.global.threads {
        // A second initialization in the same process is harmless to ignore.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(&cli) {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for c in &report.checks {
                eprintln!(
                    "{} {}: {:.6e} (threshold {:.6e})",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.threshold
                );
            }
            if report.pass {
                0
            } else {
                2
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn load_config(g: &GlobalArgs) -> Result<RunConfig> {
    let path = g
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(t) = g.tol {
        if !(t > 0.0) {
            return Err(Error::Config("--tol must be positive".into()));
        }
        cfg.tol = t;
    }
    if let Some(e) = &g.eps_list {
        cfg.eps_list = e.clone();
        cfg.validate()?;
    }
    Ok(cfg)
}

/// Runs the selected workflow and writes its artifacts.
pub fn run(cli: &Cli) -> Result<Report> {
    let cfg = load_config(&cli.global)?;
    let (report, table) = dispatch(&cli.command, &cfg)?;
    write_outputs(&cli.global.out, &cfg, &report, table.as_ref())?;
    Ok(report)
}

fn write_outputs(out: &Path, cfg: &RunConfig, report: &Report, table: Option<&Table>) -> Result<()> {
    write_file(&out.join(&cfg.output.json), &report.to_json()?)?;
    if let Some(t) = table {
        let name = cfg
            .output
            .csv
            .clone()
            .unwrap_or_else(|| format!("{}.csv", report.command.replace(' ', "_")));
        write_file(&out.join(name), &t.to_csv())?;
    }
    Ok(())
}

type Outcome = Result<(Report, Option<Table>)>;

pub fn dispatch(cmd: &Command, cfg: &RunConfig) -> Outcome {
    match cmd {
        Command::Bubble(BubbleCmd::Solve) => bubble_solve(cfg),
        Command::Bubble(BubbleCmd::Match) => bubble_match(cfg),
        Command::Gamma(GammaCmd::Project) => gamma_cmd(cfg),
        Command::Torus(TorusCmd::Green) => torus_green(cfg),
        Command::Critical(CriticalCmd::Find) => critical_find(cfg),
        Command::Criteria(CriteriaCmd::Report) => criteria_cmd(cfg),
        Command::Verify(v) => match v {
            VerifyCmd::Expansion => verify_expansion(cfg),
            VerifyCmd::Kernels => verify_kernels(cfg),
            VerifyCmd::Frequency => verify_frequency(cfg),
            VerifyCmd::Fredholm => verify_fredholm(cfg),
            VerifyCmd::Matching => verify_matching(cfg),
            VerifyCmd::Pohozaev => verify_pohozaev(cfg),
            VerifyCmd::Residual => verify_residual(cfg),
            VerifyCmd::LambdaRate => verify_lambda_rate(cfg),
        },
    }
}

fn has_masses(cfg: &RunConfig) -> bool {
    cfg.sigma.is_some() || cfg.rho.is_some() || cfg.rho_ray.is_some()
}

/// Matched bubble when masses are configured, otherwise the bubble shot from α.
fn bubble_for(cfg: &RunConfig) -> Result<RadialBubble> {
    let a = cfg.coupling_matrix()?;
    if has_masses(cfg) {
        match_sigma(&a, &cfg.sigma_target()?, &cfg.alpha(), cfg.r_max, cfg.tol)
    } else {
        solve_radial(&a, &cfg.alpha(), cfg.r_max, cfg.tol)
    }
}

fn bubble_summary(b: &RadialBubble) -> serde_json::Value {
    json!({
        "alpha": b.alpha,
        "sigma": b.sigma,
        "m": b.m,
        "I": b.big_i,
        "r_max": b.r_max,
        "ode_residual": b.residual,
        "sigma_error_estimate": b.error_estimate,
        "pohozaev_defect": pohozaev_defect(&b.coupling, &b.sigma),
    })
}

fn profile_table(b: &RadialBubble) -> Table {
    let n = b.n();
    let mut header = vec!["r".to_string()];
    for i in 0..n {
        header.push(format!("v{}", i + 1));
        header.push(format!("dv{}", i + 1));
    }
    let mut t = Table {
        header,
        rows: Vec::new(),
    };
    for k in (0..b.r.len()).step_by(10) {
        let mut row = vec![b.r[k]];
        for i in 0..n {
            row.push(b.v[i][k]);
            row.push(b.dv[i][k]);
        }
        t.rows.push(row);
    }
    t
}

fn pohozaev_check(b: &RadialBubble) -> Check {
    let scale = 4.0 * b.sigma.iter().sum::<f64>();
    Check::at_most(
        "relative Pohozaev defect",
        pohozaev_defect(&b.coupling, &b.sigma).abs() / scale,
        1e-6,
    )
}

fn bubble_solve(cfg: &RunConfig) -> Outcome {
    let b = solve_radial(&cfg.coupling_matrix()?, &cfg.alpha(), cfg.r_max, cfg.tol)?;
    let mut r = Report::new("bubble solve", bubble_summary(&b))?;
    r.check(pohozaev_check(&b));
    Ok((r, Some(profile_table(&b))))
}

fn bubble_match(cfg: &RunConfig) -> Outcome {
    let target = cfg.sigma_target()?;
    let b = match_sigma(&cfg.coupling_matrix()?, &target, &cfg.alpha(), cfg.r_max, cfg.tol)?;
    let worst = b
        .sigma
        .iter()
        .zip(&target)
        .map(|(s, t)| (s - t).abs() / t)
        .fold(0.0f64, f64::max);
    let mut r = Report::new("bubble match", bubble_summary(&b))?;
    r.check(Check::at_most("relative σ mismatch", worst, 1e-8));
    r.check(pohozaev_check(&b));
    Ok((r, Some(profile_table(&b))))
}

fn gamma_cmd(cfg: &RunConfig) -> Outcome {
    let a = cfg.coupling_matrix()?;
    let ray = cfg
        .rho_ray
        .clone()
        .or_else(|| cfg.rho.clone())
        .ok_or_else(|| Error::Config("rho_ray is required".into()))?;
    let rho = gamma_project(&a, &ray, cfg.n_points)?;
    let md = m_star(&a, &rho);
    let lam = lambda_in(&a, &rho);
    let hyp = check_hypotheses(&a);
    let mut r = Report::new(
        "gamma project",
        json!({ "rho": rho.rho, "lambda": lam, "masses": md, "hypotheses": hyp }),
    )?;
    r.check(Check::at_most("|Λ| / scale", lam.abs() / lambda_scale(&rho), 1e-10));
    if !hyp.admissible() {
        r.warnings.push("coupling matrix fails the structural hypotheses".into());
    }
    Ok((r, None))
}

fn torus_green(cfg: &RunConfig) -> Outcome {
    let g = TorusGreen::default();
    let pairs: Vec<[[f64; 2]; 2]> = if cfg.pairs.is_empty() {
        let p = cfg.require_points()?;
        let mut v = Vec::new();
        for (s, &x) in p.iter().enumerate() {
            for &q in &p[s + 1..] {
                v.push([x, q]);
            }
        }
        v
    } else {
        cfg.pairs.clone()
    };
    let mut t = Table::new(&["x1", "x2", "q1", "q2", "G", "gamma", "dG1", "dG2"]);
    for [x, q] in &pairs {
        let j = g.green_jet(*x, *q)?;
        t.push(vec![x[0], x[1], q[0], q[1], j.value, g.regular_part(*x, *q), j.grad[0], j.grad[1]]);
    }
    let r = Report::new(
        "torus green",
        json!({ "robin": g.robin(), "split_time": g.split(), "values": t.rows }),
    )?;
    Ok((r, Some(t)))
}

fn critical_find(cfg: &RunConfig) -> Outcome {
    let rho = cfg.param_vector()?;
    let md = cfg.masses()?;
    let cp = find_critical(
        &TorusGreen::default(),
        cfg.require_points()?,
        &rho.rho,
        &md.m,
        &cfg.h_fields(),
        cfg.seed,
        cfg.restarts,
    )?;
    let mut r = Report::new("critical find", &cp)?;
    r.check(Check::at_most("max |∇f|", cp.gradient_norm, 1e-10));
    if !cp.nondegenerate {
        r.warnings.push("critical point is degenerate".into());
    }
    Ok((r, None))
}

fn criteria_inputs(cfg: &RunConfig) -> Result<(RadialBubble, DQuadrature)> {
    let a = cfg.coupling_matrix()?;
    let b = match_sigma(&a, &cfg.sigma_target()?, &cfg.alpha(), cfg.r_max, cfg.tol)?;
    let quad = DQuadrature {
        grid: cfg.d_grid,
        ..Default::default()
    };
    Ok((b, quad))
}

fn criteria_cmd(cfg: &RunConfig) -> Outcome {
    let (b, quad) = criteria_inputs(cfg)?;
    let rep = criteria_report(
        &TorusGreen::default(),
        cfg.require_points()?,
        &cfg.h_fields(),
        &b.m,
        &b.big_i,
        &cfg.tau_factors,
        quad,
    )?;
    let r = Report::new("criteria report", &rep)?;
    Ok((r, None))
}

fn chart(cfg: &RunConfig, b: &RadialBubble) -> Result<Vec<HLocalData>> {
    if cfg.points.is_empty() {
        Ok(vec![HLocalData::flat(1.0); b.n()])
    } else {
        local_chart(&TorusGreen::default(), &cfg.points, &cfg.h_fields(), &b.m, 0)
    }
}

fn verify_expansion(cfg: &RunConfig) -> Outcome {
    let b = bubble_for(cfg)?;
    let e = verify_expansions(&b);
    let mut r = Report::new("verify expansion", &e)?;
    let worst_large = e.large_r.iter().map(|t| t.rel_error).fold(0.0f64, f64::max);
    let worst_r2 = e
        .r2
        .iter()
        .map(|(f, p)| (f - p).abs() / p.abs())
        .fold(0.0f64, f64::max);
    r.check(Check::at_most("large-r coefficient relative error", worst_large, 0.01));
    r.check(Check::at_most("r² coefficient relative error", worst_r2, 1e-3));
    r.check(Check {
        name: "r⁴ coefficient matches exactly one form".into(),
        value: if e.r4_verdict == "derived" || e.r4_verdict == "alternative" { 1.0 } else { 0.0 },
        threshold: 1.0,
        pass: e.r4_verdict == "derived" || e.r4_verdict == "alternative",
    });
    r.warnings.extend(e.warnings.iter().cloned());
    Ok((r, None))
}

fn verify_kernels(cfg: &RunConfig) -> Outcome {
    let b = bubble_for(cfg)?;
    let k = kernel_fields(&b);
    let m_star = b.m.iter().cloned().fold(f64::INFINITY, f64::min);
    let far_bound = 5.0 * b.r_max.powf(2.0 - m_star);
    let worst_gap = k.far_gap.iter().cloned().fold(0.0f64, f64::max);
    let mut r = Report::new(
        "verify kernels",
        json!({
            "residual_z0": k.residual_z0,
            "residual_z1": k.residual_z1,
            "far_gap": k.far_gap,
            "far_bound": far_bound,
            "solver_tol": b.tol,
        }),
    )?;
    r.check(Check::at_most("Z_0 residual", k.residual_z0, 10.0 * b.tol));
    r.check(Check::at_most("V' residual", k.residual_z1, 10.0 * b.tol));
    r.check(Check::at_most("|Z_0(R) − (2 − m_i)|", worst_gap, far_bound));
    let mut t = Table::new(&["r"]);
    for i in 0..b.n() {
        t.header.push(format!("z0_{}", i + 1));
        t.header.push(format!("z1_{}", i + 1));
    }
    for kk in (0..k.r.len()).step_by(10) {
        let mut row = vec![k.r[kk]];
        for i in 0..b.n() {
            row.push(k.z0[i][kk]);
            row.push(k.z1[i][kk]);
        }
        t.rows.push(row);
    }
    Ok((r, Some(t)))
}

/// sup_r |c(r)| / (ε (1 + r)^{0.05}) over both directions and all components.
pub fn growth_ratio(fo: &crate::fredholm::FirstOrder, eps: f64) -> f64 {
    let mut worst = 0.0f64;
    for p in &fo.profiles {
        for vals in &p.samples.values {
            for (v, &r) in vals.iter().zip(&p.samples.r) {
                worst = worst.max(v.abs() / (eps * (1.0 + r).powf(0.05)));
            }
        }
    }
    worst
}

fn verify_frequency(cfg: &RunConfig) -> Outcome {
    let b = bubble_for(cfg)?;
    let h = chart(cfg, &b)?;
    let eps = cfg.require_eps()?;
    let m_star = b.m.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut t = Table::new(&["eps", "growth_ratio", "multiplier_1", "multiplier_2"]);
    for &e in eps {
        let fo = first_order_correction(&b, &h, e, cfg.fredholm_tau, FrequencyGrid::default(), true)?;
        t.push(vec![e, growth_ratio(&fo, e), fo.multipliers[0], fo.multipliers[1]]);
    }
    let ratios: Vec<f64> = t.rows.iter().map(|r| r[1]).collect();
    let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut b_rows = Vec::new();
    if (m_star - 4.0).abs() < 1e-6 {
        for &e in eps {
            let bc = b_coefficient(&b, &h, e, cfg.fredholm_tau / e);
            b_rows.push(json!({ "eps": e, "b": bc.b, "ratio": bc.ratio }));
        }
    }
    let mut r = Report::new(
        "verify frequency",
        json!({ "m_star": m_star, "rows": t.rows, "b_coefficient": b_rows }),
    )?;
    r.check(Check::at_most("growth ratio max/min", hi / lo, 1.5));
    Ok((r, Some(t)))
}

fn verify_fredholm(cfg: &RunConfig) -> Outcome {
    let b = bubble_for(cfg)?;
    let h = chart(cfg, &b)?;
    let eps = cfg.require_eps()?;
    let rows = invertibility_check(&b, &h, eps, cfg.fredholm_tau, cfg.beta, cfg.fredholm_nodes)?;
    let smallest = rows
        .iter()
        .min_by(|x, y| x.eps.partial_cmp(&y.eps).unwrap())
        .ok_or_else(|| Error::Config("empty eps_list".into()))?;
    let hi = rows.iter().map(|x| x.sigma_constrained).fold(f64::NEG_INFINITY, f64::max);
    let lo = rows.iter().map(|x| x.sigma_constrained).fold(f64::INFINITY, f64::min);
    let idem = eps
        .iter()
        .map(|&e| projection_idempotency(&b, &h, e, cfg.fredholm_tau))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0f64, f64::max);
    let mut t = Table::new(&["eps", "sigma_constrained", "sigma_unconstrained", "t1", "t2"]);
    for x in &rows {
        t.push(vec![x.eps, x.sigma_constrained, x.sigma_unconstrained, x.t1, x.t2]);
    }
    let mut r = Report::new("verify fredholm", json!({ "rows": rows, "idempotency": idem }))?;
    r.check(Check::at_most("constrained σ_min max/min", hi / lo, 2.0));
    r.check(Check::at_most(
        "unconstrained/constrained σ_min at smallest ε",
        smallest.sigma_unconstrained / smallest.sigma_constrained,
        0.1,
    ));
    r.check(Check::at_most("Q idempotency residual", idem, 1e-10));
    Ok((r, Some(t)))
}

fn blowup_config(cfg: &RunConfig, eps: f64) -> Result<BlowupConfig> {
    let points = cfg.require_points()?.to_vec();
    let tau = cfg.tau.unwrap_or_else(|| crate::assembly::default_tau(&points));
    BlowupConfig::with_matched_bubble(
        cfg.coupling_matrix()?,
        cfg.param_vector()?,
        points,
        cfg.h_fields(),
        eps,
        tau,
        cfg.alpha()[0],
    )
}

fn sorted_eps(cfg: &RunConfig) -> Result<Vec<f64>> {
    let mut e = cfg.require_eps()?.to_vec();
    e.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(e)
}

fn verify_matching(cfg: &RunConfig) -> Outcome {
    let eps = sorted_eps(cfg)?;
    let mut t = Table::new(&["eps", "mismatch", "u_bar_spread"]);
    let mut m_star = f64::NAN;
    let mut warnings = Vec::new();
    for &e in &eps {
        let bc = blowup_config(cfg, e)?;
        m_star = bc.bubble.m.iter().cloned().fold(f64::INFINITY, f64::min);
        warnings.extend(bc.warnings.iter().cloned());
        let sol = assemble(&bc, cfg.grid)?;
        t.push(vec![e, sol.max_mismatch(), sol.u_bar_spread]);
    }
    let x: Vec<f64> = t.rows.iter().map(|r| r[0]).collect();
    let y: Vec<f64> = t.rows.iter().map(|r| r[1]).collect();
    let slope = loglog_slope(&x, &y);
    let mut r = Report::new(
        "verify matching",
        json!({ "m_star": m_star, "slope": slope, "rows": t.rows }),
    )?;
    r.check(Check::at_most("|slope − (m* − 2)|", (slope - (m_star - 2.0)).abs(), 0.15));
    r.warnings = warnings;
    Ok((r, Some(t)))
}

fn verify_pohozaev(cfg: &RunConfig) -> Outcome {
    let eps = sorted_eps(cfg)?;
    let mut t = Table::new(&["eps", "imbalance", "imbalance_over_eps2", "volume", "boundary", "quadrature_tol"]);
    let mut exact = None;
    for &e in &eps {
        let bc = blowup_config(cfg, e)?;
        if exact.is_none() {
            let flat = vec![[0.0; 2]; bc.n()];
            let d = LocalDisk::linear_weight(&bc.bubble, &flat, 0.0, bc.tau / e, None);
            exact = Some(pohozaev_balance(&d, 0)?);
        }
        let h = bc.chart_data(0)?;
        let fo = first_order_correction(&bc.bubble, &h, bc.eps[0], bc.tau, FrequencyGrid::default(), true)?;
        let disk = LocalDisk::from_config(&bc, 0, Some(&fo));
        let [p0, p1] = pohozaev_balance_both(&disk)?;
        let p = if p1.imbalance.abs() > p0.imbalance.abs() { p1 } else { p0 };
        let e0 = bc.eps[0];
        t.push(vec![e, p.imbalance, p.imbalance / (e0 * e0), p.volume, p.boundary, p.quadrature_tol]);
    }
    let exact = exact.expect("eps_list is nonempty");
    let scaled: Vec<f64> = t.rows.iter().map(|r| r[2].abs()).collect();
    let growth = scaled.iter().cloned().fold(0.0f64, f64::max) / scaled[0].max(1e-300);
    let mut r = Report::new("verify pohozaev", json!({ "exact": exact, "rows": t.rows }))?;
    r.check(Check::at_most(
        "exact-bubble imbalance / quadrature tolerance",
        exact.imbalance.abs() / exact.quadrature_tol.max(f64::EPSILON),
        10.0,
    ));
    r.check(Check::at_most("growth of imbalance/ε² across ε", growth, 2.0));
    Ok((r, Some(t)))
}

fn verify_residual(cfg: &RunConfig) -> Outcome {
    let eps = sorted_eps(cfg)?;
    let mut t = Table::new(&["eps", "l2", "sup"]);
    for &e in &eps {
        let bc = blowup_config(cfg, e)?;
        let sol = assemble(&bc, cfg.grid)?;
        let res = residual(&bc, &sol, bc.tau / 4.0)?;
        let l2 = res.l2.iter().cloned().fold(0.0f64, f64::max);
        let sup = res.sup.iter().cloned().fold(0.0f64, f64::max);
        t.push(vec![e, l2, sup]);
    }
    let increases = t.rows.windows(2).filter(|w| w[1][1] >= w[0][1]).count();
    let mut r = Report::new("verify residual", json!({ "rows": t.rows }))?;
    r.check(Check::at_most("non-decreasing steps of the L² residual", increases as f64, 0.0));
    Ok((r, Some(t)))
}

fn verify_lambda_rate(cfg: &RunConfig) -> Outcome {
    let eps = sorted_eps(cfg)?;
    let (b, quad) = criteria_inputs(cfg)?;
    let points = cfg.require_points()?;
    let rep = criteria_report(
        &TorusGreen::default(),
        points,
        &cfg.h_fields(),
        &b.m,
        &b.big_i,
        &cfg.tau_factors,
        quad,
    )?;
    let lam: Vec<f64> = eps
        .iter()
        .map(|&e| lambda_prediction(&rep, e, LambdaForm::Restricted))
        .collect::<Result<_>>()?;
    let mut t = Table::new(&["eps", "lambda_pred"]);
    for (e, l) in eps.iter().zip(&lam) {
        t.push(vec![*e, *l]);
    }
    let slope = loglog_slope(&eps, &lam);
    let mut r = Report::new(
        "verify lambda-rate",
        json!({
            "regime": rep.regime,
            "m_star": rep.m_star,
            "slope": slope,
            "rows": t.rows,
            "d_min": if points.len() > 1 { d_min(points) } else { 1.0 },
        }),
    )?;
    match rep.regime {
        Regime::A => r.check(Check::at_most(
            "|slope − (m* − 2)|",
            (slope - (rep.m_star - 2.0)).abs(),
            0.01,
        )),
        Regime::B => {
            let c: Vec<f64> = eps
                .iter()
                .zip(&lam)
                .map(|(e, l)| (l / (e * e * (1.0 / e).ln())).abs())
                .collect();
            let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
            r.check(Check::at_most("relative spread of |Λ|/(ε² ln(1/ε))", (hi - lo) / hi, 0.01));
        }
        _ => r.warnings.push(format!("regime {:?}: no rate check applies", rep.regime)),
    }
    Ok((r, Some(t)))
}
