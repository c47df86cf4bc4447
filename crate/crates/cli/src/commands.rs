use std::fs;
use std::path::{Path, PathBuf};

use pdg_core::campaign::{
    nominal_plan, records_to_csv, run_campaign, run_closed_loop, CampaignConfig, FlightMode,
    NominalSummary, ReplanEvent, SCHEMA_VERSION,
};
use pdg_core::guidance::{
    check_solution, fmt_sig, scvx_solve, tilt_sweep, ConstraintReport, DescentScenario,
    IterationRecord, ScvxStatus,
};
use pdg_core::model::{
    critical_tilt_angle, delta_v_budget, tip_over_angle, MassPropertyRow, TiltBoundary,
};
use pdg_core::sim::{
    run_open_loop, FailureEvent, FlightRecord, PerturbationDraw, RunSetup, Touchdown,
};
use serde::Serialize;

use crate::config::{to_json, Problem};
use crate::error::{exit, status_code, CliError};

fn version() -> String {
    format!("pdg {}", env!("CARGO_PKG_VERSION"))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

#[derive(Debug, Serialize)]
struct TipOverRow {
    footprint_diameter_m: f64,
    cog_height_m: f64,
    tipping_arm_m: f64,
    tip_over_deg: f64,
}

#[derive(Debug, Serialize)]
struct AnalysisReport {
    schema_version: u32,
    version: String,
    tip_over_vs_footprint: Vec<TipOverRow>,
    tip_over_vs_cog_height: Vec<TipOverRow>,
    vehicle_tip_over_deg: f64,
    delta_v_mps: f64,
    critical_tilt_wet: TiltBoundary,
    critical_tilt_dry: TiltBoundary,
    mass_properties: Vec<MassPropertyRow>,
}

fn tip_row(d: f64, h: f64) -> Result<TipOverRow, CliError> {
    Ok(TipOverRow {
        footprint_diameter_m: d,
        cog_height_m: h,
        tipping_arm_m: d / 2.0,
        tip_over_deg: tip_over_angle(d, h)?,
    })
}

fn tilt_text(b: TiltBoundary) -> String {
    match b {
        TiltBoundary::Angle(a) => format!("{a:.2} deg"),
        TiltBoundary::NoBoundary => "none (minimum thrust below weight)".into(),
    }
}

pub fn analyze(p: &Problem, json: bool) -> Result<u8, CliError> {
    let v = &p.vehicle;
    let e = &p.environment;
    let report = AnalysisReport {
        schema_version: SCHEMA_VERSION,
        version: version(),
        tip_over_vs_footprint: [1.5, 2.0, 2.5, 3.0, 3.5]
            .iter()
            .map(|&d| tip_row(d, 1.0))
            .collect::<Result<_, _>>()?,
        tip_over_vs_cog_height: [0.5, 0.75, 1.0, 1.25, 1.5]
            .iter()
            .map(|&h| tip_row(2.0, h))
            .collect::<Result<_, _>>()?,
        vehicle_tip_over_deg: tip_over_angle(v.footprint_diameter, v.cog_height)?,
        delta_v_mps: delta_v_budget(v.engine.isp, e.g0, v.mass_wet, v.mass_dry)?,
        critical_tilt_wet: critical_tilt_angle(v.mass_wet, e.gravity_moon, v.engine.thrust_min)?,
        critical_tilt_dry: critical_tilt_angle(v.mass_dry, e.gravity_moon, v.engine.thrust_min)?,
        mass_properties: v.mass_properties.rows.clone(),
    };
    if json {
        print!("{}", to_json(&report));
        return Ok(exit::OK);
    }
    println!("Tip-over angle vs footprint diameter (h = 1.00 m)");
    println!("D (m) | D/2 (m) | angle (deg)");
    for r in &report.tip_over_vs_footprint {
        println!(
            "{:.1} | {:.2} | {:.2}",
            r.footprint_diameter_m, r.tipping_arm_m, r.tip_over_deg
        );
    }
    println!();
    println!("Tip-over angle vs CoG height (D = 2.0 m)");
    println!("h (m) | D/2 (m) | angle (deg)");
    for r in &report.tip_over_vs_cog_height {
        println!(
            "{:.2} | {:.1} | {:.2}",
            r.cog_height_m, r.tipping_arm_m, r.tip_over_deg
        );
    }
    println!();
    println!(
        "Vehicle tip-over angle: {:.2} deg (D = {} m, h = {} m)",
        report.vehicle_tip_over_deg, v.footprint_diameter, v.cog_height
    );
    println!(
        "Delta-v budget: {:.1} m/s (Isp {} s, {} -> {} kg)",
        report.delta_v_mps, v.engine.isp, v.mass_wet, v.mass_dry
    );
    println!(
        "Critical tilt at wet mass: {}",
        tilt_text(report.critical_tilt_wet)
    );
    println!(
        "Critical tilt at dry mass: {}",
        tilt_text(report.critical_tilt_dry)
    );
    println!();
    println!("Mass properties");
    println!("propellant fraction | CoG y (m) | CoG z (m) | Jxx | Jyy | Jzz (kg m^2)");
    for r in &report.mass_properties {
        println!(
            "{:.4} | {:.2} | {:.2} | {:.1} | {:.1} | {:.1}",
            r.propellant_fraction, r.cog_y, r.cog_z, r.jxx, r.jyy, r.jzz
        );
    }
    Ok(exit::OK)
}

#[derive(Debug, Serialize)]
struct PlanReport<'a> {
    schema_version: u32,
    version: String,
    status: ScvxStatus,
    iterations: usize,
    virtual_control: f64,
    nonlinear_defect_m: f64,
    nodes: usize,
    final_time_s: f64,
    initial_mass_kg: f64,
    final_mass_kg: f64,
    propellant_kg: f64,
    constraints: ConstraintReport,
    scenario: &'a DescentScenario,
    history: &'a [IterationRecord],
}

pub fn plan(p: &Problem, out: &Path) -> Result<u8, CliError> {
    let result = scvx_solve(&p.scenario, &p.vehicle, &p.environment, &p.scvx)?;
    let t = &result.trajectory;
    let n = t.nodes();
    let report = PlanReport {
        schema_version: SCHEMA_VERSION,
        version: version(),
        status: result.report.status,
        iterations: result.report.iterations,
        virtual_control: result.report.virtual_control,
        nonlinear_defect_m: result.report.nonlinear_defect_m,
        nodes: n,
        final_time_s: t.final_time,
        initial_mass_kg: t.mass(0),
        final_mass_kg: t.mass(n - 1),
        propellant_kg: t.mass(0) - t.mass(n - 1),
        constraints: check_solution(t, &p.scenario, &p.vehicle, &p.environment),
        scenario: &p.scenario,
        history: &result.report.history,
    };
    write(out, "trajectory.csv", &t.to_csv())?;
    write(out, "plan_report.json", &to_json(&report))?;
    println!(
        "{:?} after {} iterations: t_f = {:.2} s, propellant = {:.3} kg, virtual control = {:.2e}",
        report.status,
        report.iterations,
        report.final_time_s,
        report.propellant_kg,
        report.virtual_control
    );
    Ok(status_code(report.status))
}

pub const SWEEP_COLUMNS: [&str; 9] = [
    "theta_max_deg",
    "feasible",
    "status",
    "iterations",
    "propellant_kg",
    "final_time_s",
    "final_mass_kg",
    "virtual_control",
    "warm_started",
];

/// One row per requested tilt limit, in request order. Fuel and time are
/// empty for rows that did not converge.
pub fn sweep(p: &Problem, thetas: &[f64], out: &Path) -> Result<u8, CliError> {
    if thetas.len() < 2 {
        return Err(CliError::Config(
            "sweep needs at least two tilt limits".into(),
        ));
    }
    if let Some(bad) = thetas.iter().find(|t| !(**t > 0.0 && **t < 90.0)) {
        return Err(CliError::Config(format!(
            "tilt limit {bad} outside (0, 90)"
        )));
    }
    let points = tilt_sweep(&p.scenario, thetas, &p.vehicle, &p.environment, &p.scvx)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_COLUMNS).expect("in-memory write");
    for theta in thetas {
        let (pt, _) = points
            .iter()
            .find(|(pt, _)| pt.theta_max_deg == *theta)
            .expect("every requested tilt is solved");
        let feasible = pt.status == ScvxStatus::Converged;
        let when = |x: f64| if feasible { fmt_sig(x) } else { String::new() };
        w.write_record([
            fmt_sig(pt.theta_max_deg),
            feasible.to_string(),
            format!("{:?}", pt.status).to_lowercase(),
            pt.iterations.to_string(),
            when(pt.propellant_kg),
            when(pt.final_time_s),
            when(pt.final_mass_kg),
            fmt_sig(pt.virtual_control),
            pt.warm_started.to_string(),
        ])
        .expect("in-memory write");
    }
    let text = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv");
    write(out, "sweep.csv", &text)?;

    let crit = critical_tilt_angle(
        p.scenario.m0,
        p.environment.gravity_moon,
        p.vehicle.engine.thrust_min,
    )?;
    println!("Critical tilt at initial mass: {}", tilt_text(crit));
    let last_infeasible = points
        .iter()
        .filter(|(pt, _)| pt.status != ScvxStatus::Converged)
        .map(|(pt, _)| pt.theta_max_deg)
        .next_back();
    let first_feasible = points
        .iter()
        .find(|(pt, _)| pt.status == ScvxStatus::Converged)
        .map(|(pt, _)| pt.theta_max_deg);
    match (last_infeasible, first_feasible) {
        (Some(a), Some(b)) => println!("Feasibility transition between {a} and {b} deg"),
        (None, Some(b)) => println!("Feasible from {b} deg, no infeasible point"),
        (_, None) => println!("No feasible point"),
    }
    Ok(exit::OK)
}

#[derive(Debug, Serialize)]
struct SimMetrics {
    schema_version: u32,
    version: String,
    mode: FlightMode,
    seed: u64,
    nominal: NominalSummary,
    success: bool,
    touchdown: Option<Touchdown>,
    fault: Option<String>,
    replan_count: usize,
    replans_converged: usize,
    replans: Vec<ReplanEvent>,
    draw: PerturbationDraw,
    failures: Vec<FailureEvent>,
}

pub fn sim(cfg: &CampaignConfig, mode: FlightMode, seed: u64, out: &Path) -> Result<u8, CliError> {
    cfg.validate()?;
    let (nominal, nominal_summary) = nominal_plan(cfg)?;
    let setup = RunSetup::sample(seed, &cfg.perturbations, &cfg.failures, nominal.final_time);
    let (v, e) = (&cfg.vehicle, &cfg.environment);
    let (flight, replans): (Result<FlightRecord, String>, Vec<ReplanEvent>) = match mode {
        FlightMode::OpenLoop => (
            run_open_loop(&nominal, &setup, v, e).map_err(|e| e.to_string()),
            Vec::new(),
        ),
        FlightMode::ClosedLoop => {
            match run_closed_loop(
                &cfg.scenario,
                &nominal,
                &setup,
                v,
                e,
                &cfg.scvx,
                &cfg.closed_loop,
            ) {
                Ok(f) => (Ok(f.record), f.replans),
                Err(f) => (Err(f.error.to_string()), f.replans),
            }
        }
    };
    let touchdown = flight.as_ref().ok().map(|r| r.touchdown);
    let metrics = SimMetrics {
        schema_version: SCHEMA_VERSION,
        version: version(),
        mode,
        seed,
        nominal: nominal_summary,
        success: touchdown.as_ref().is_some_and(|t| cfg.success.met_by(t)),
        touchdown,
        fault: flight.as_ref().err().cloned(),
        replan_count: replans.len(),
        replans_converged: replans.iter().filter(|r| r.converged()).count(),
        replans,
        draw: setup.draw,
        failures: setup.failures.clone(),
    };
    let text = to_json(&metrics);
    if let Ok(record) = &flight {
        write(out, "flight.csv", &record.to_csv())?;
    }
    write(out, "sim_metrics.json", &text)?;
    print!("{text}");
    match flight {
        Ok(_) => Ok(exit::OK),
        Err(msg) => Err(CliError::Sim(msg)),
    }
}

/// Fraction of completed flights below which a campaign fails.
pub const MIN_COMPLETED_FRACTION: f64 = 0.95;

pub fn mc(cfg: &CampaignConfig, threads: Option<usize>, out: &Path) -> Result<u8, CliError> {
    let campaign = || run_campaign(cfg);
    let result = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?
            .install(campaign),
        None => campaign(),
    }?;
    write(out, "records.csv", &records_to_csv(&result.records))?;
    write(out, "summary.json", &to_json(&result.summary))?;
    let s = &result.summary;
    for m in &s.modes {
        let miss = m
            .miss_distance_m
            .map(|d| {
                format!(
                    "mean miss {:.2} m, median {:.2} m, p95 {:.2} m",
                    d.mean, d.median, d.p95
                )
            })
            .unwrap_or_else(|| "no touchdowns".into());
        println!(
            "{}: {}/{} completed, {}, success rate {:.1}%",
            m.mode.name(),
            m.completed,
            m.runs,
            miss,
            100.0 * m.success_rate
        );
    }
    if let Some(r) = s.paired_miss_ratio {
        println!("closed/open mean miss ratio: {r:.4}");
    }
    if s.completed_fraction >= MIN_COMPLETED_FRACTION {
        Ok(exit::OK)
    } else {
        eprintln!(
            "only {:.1}% of flights completed",
            100.0 * s.completed_fraction
        );
        Ok(exit::SIM_FAULT)
    }
}
