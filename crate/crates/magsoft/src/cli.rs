//! Scenario runner and the `magsoft` command line.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::actuation::{solve_fields, ActuationModel};
use crate::beam_mech::{
    activation_threshold, characterize, inner_contact_field, opening, solve_inner_beam, solve_tentacle, InnerBeamParams,
    Known, OpeningCurve, TentacleParams, GAMMA_CONTACT,
};
use crate::config::{GaitName, PulseShape, Scenario, Step};
use crate::fieldspace::{map_to_global, FieldState, Frame, Vec3, Waveform};
use crate::gaits::{plan_crawl, plan_roll, plan_spin_walk, simulate, Env, RollAxis, Steer, TrajectoryPoint};
use crate::io::{self, num};
use crate::reprogram_thermal::{
    apply_reprogram, heat_step, ReprogramKind, ReprogramWaveform, HEAT_FIELD, HEAT_FREQUENCY,
};
use crate::robot_model::{MagnetizationState, Robot};
use crate::safety::{self, audit, SafetyReport, WaveformSpec};
use crate::scaling::{self, ScalePlan};
use crate::{Error, Result};

/// Samples per reprogramming pulse.
const REPROGRAM_SAMPLES: usize = 2000;
/// Sample rate of held function fields, Hz.
const HOLD_RATE: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub step: usize,
    pub t: f64,
    pub kind: String,
    pub detail: String,
}

impl Event {
    pub fn line(&self) -> String {
        format!("step={} t={} {} {}", self.step, num(self.t), self.kind, self.detail)
    }
}

/// Everything a run produces, before it is written out.
#[derive(Debug, Clone, Default)]
pub struct RunResult {
    pub waveform: Waveform,
    pub trajectory: Vec<(usize, TrajectoryPoint)>,
    pub events: Vec<Event>,
    pub reports: Vec<SafetyReport>,
}

impl RunResult {
    pub fn safe(&self) -> bool {
        self.reports.iter().all(|r| r.pass())
    }

    /// Gait, function and demagnetization events, in order.
    pub fn mode_gait_events(&self) -> Vec<&Event> {
        self.events
            .iter()
            .filter(|e| matches!(e.kind.as_str(), "gait" | "function" | "demagnetize"))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub waveform: PathBuf,
    pub trajectory: PathBuf,
    pub events: PathBuf,
    pub safety_text: PathBuf,
    pub safety_json: PathBuf,
    pub result: RunResult,
}

fn interlock(step: usize, e: Error) -> Error {
    match e {
        Error::Interlock(m) => Error::Interlock(format!("step {step}: {m}")),
        Error::Refused(m) => Error::Refused(format!("step {step}: {m}")),
        Error::InvalidArgument(m) => Error::Config { step: Some(step), msg: m },
        other => other,
    }
}

fn check_coil(step: usize, w: &Waveform) -> Result<()> {
    if let Some(s) = w.coil_violation() {
        return Err(Error::Config {
            step: Some(step),
            msg: format!("sample at t = {} s exceeds the coil capacity", s.t),
        });
    }
    Ok(())
}

/// Appends `w` at `t0`, dropping samples that would not advance time (the
/// shared instant between two consecutive steps).
fn append(dst: &mut Waveform, w: &Waveform, t0: f64) {
    for s in &w.samples {
        let t = s.t + t0;
        if dst.samples.last().map_or(true, |p| t > p.t) {
            dst.push(t, s.field, &s.tag);
        }
    }
}

fn held(fs: FieldState, duration: f64, tag: &str) -> Waveform {
    let n = ((duration * HOLD_RATE).round() as usize).max(1);
    let mut w = Waveform::new();
    for i in 0..=n {
        w.push(duration * i as f64 / n as f64, fs, tag);
    }
    w
}

/// Runs every step in memory. Nothing is written, so a failed interlock
/// leaves no partial output behind.
pub fn execute(sc: &Scenario) -> Result<RunResult> {
    let modes = sc.validate()?;
    let env = Env::preset(&sc.env).expect("validated");
    let robot = &sc.robot;
    let mat = &robot.materials;
    let tparams = TentacleParams::from_robot(robot);
    let mut state = MagnetizationState::locomotion(mat);
    let mut thermal = sc.thermal;
    let mut out = RunResult::default();
    let mut cursor = 0.0;
    let mut offset = Vec3::zeros();

    for (i, st) in sc.steps.iter().enumerate() {
        let mut ev = |kind: &str, detail: String, t: f64| {
            out.events.push(Event { step: i, t, kind: kind.into(), detail })
        };
        let label = |cat: &str| format!("step{i}:{cat}");
        match st {
            Step::SetMode { phi_deg, demagnetize, pulse } => {
                let p = sc.reprogram;
                let w = if *demagnetize {
                    ReprogramWaveform::demagnetize(p)
                } else {
                    let kind = match pulse {
                        PulseShape::Ramp => ReprogramKind::RampMagnetize,
                        PulseShape::Step => ReprogramKind::StepMagnetize,
                    };
                    ReprogramWaveform::magnetize(kind, phi_deg.expect("validated"), p)
                };
                let next = apply_reprogram(&state, &w, mat).map_err(|e| interlock(i, e))?;
                let samples = w.sample(REPROGRAM_SAMPLES)?;
                append(&mut out.waveform, &samples, cursor);
                let (spec, cat) = match w.kind {
                    ReprogramKind::Demagnetize => {
                        (WaveformSpec::DecayingHarmonic { b0: p.b_demag, k_d: p.k_demag, f: p.f_demag }, "IIIb")
                    }
                    ReprogramKind::StepMagnetize => {
                        (WaveformSpec::StepRL { b0: p.b_mag, l: p.l_coil, r: p.r_coil }, "IIIa-step")
                    }
                    ReprogramKind::RampMagnetize => {
                        (WaveformSpec::Ramp { k: p.k_ramp, t_end: p.b_mag / p.k_ramp }, "IIIa-ramp")
                    }
                };
                out.reports.push(audit(&label(cat), &spec)?);
                if *demagnetize {
                    ev("demagnetize", format!("mode={}", next.mode.name()), cursor);
                } else {
                    ev("magnetize", format!("mode={}", next.mode.name()), cursor);
                }
                state = next;
                cursor += w.duration();
            }
            Step::Gait { gait, b_mt, frequency, duration, cycles, heading_deg, steer_deg_per_s } => {
                let cfg = &sc.gait;
                let b_nominal = match gait {
                    GaitName::Crawl => cfg.crawl_b_high,
                    _ => b_mt.map_or(cfg.roll_b, |b| b * 1e-3),
                };
                let bent = solve_tentacle(b_nominal, &tparams)?;
                let model = ActuationModel::build(robot, &state, Some(&bent), [0.0; 3])?;
                let steer = if *steer_deg_per_s == 0.0 {
                    Steer::Constant(heading_deg.to_radians())
                } else {
                    Steer::Linear { theta0: heading_deg.to_radians(), rate: steer_deg_per_s.to_radians() }
                };
                let b = b_mt.map_or(cfg.roll_b, |b| b * 1e-3);
                let (plan, w) = match gait {
                    GaitName::RollLength | GaitName::RollWidth => {
                        let axis = if *gait == GaitName::RollLength { RollAxis::Length } else { RollAxis::Width };
                        plan_roll(axis, b, *frequency, duration.expect("validated"), steer, cfg, &model.design)
                    }
                    GaitName::Crawl => plan_crawl(cycles.expect("validated"), *frequency, steer, cfg, &model.design),
                    GaitName::SpinWalk => {
                        plan_spin_walk(cycles.expect("validated"), b, *frequency, steer, cfg, &model.design)
                    }
                }
                .map_err(|e| interlock(i, e))?;
                check_coil(i, &w)?;
                let traj = simulate(&plan, &w, &tparams, &env)?;
                let start = traj.points.first().map_or(Vec3::zeros(), |p| p.pos);
                for p in &traj.points {
                    let mut q = p.clone();
                    q.t += cursor;
                    q.pos = p.pos - start + offset + Vec3::new(0.0, 0.0, start.z);
                    out.trajectory.push((i, q));
                }
                let disp = traj.displacement();
                ev(
                    "gait",
                    format!(
                        "{:?} mode={} f={} displacement_m={},{},{}",
                        plan.kind,
                        state.mode.name(),
                        num(plan.frequency),
                        num(disp.x),
                        num(disp.y),
                        num(disp.z)
                    ),
                    cursor,
                );
                if traj.stepped_out() {
                    ev("step_out", "commanded rate above the step-out limit".into(), cursor);
                }
                if let Some(thr) = activation_threshold(state.mode) {
                    if w.samples.iter().any(|s| s.field.b.norm() >= thr) {
                        ev("threshold_crossing", format!("|B| reaches the {} T activation threshold", num(thr)), cursor);
                    }
                }
                let spec = match gait {
                    GaitName::RollLength | GaitName::RollWidth if *frequency > 0.0 => {
                        WaveformSpec::Harmonic { b0: b, f: *frequency }
                    }
                    _ => WaveformSpec::Sampled(w.clone()),
                };
                if w.len() >= 2 {
                    out.reports.push(audit(&label("I"), &spec)?);
                }
                append(&mut out.waveform, &w, cursor);
                offset += disp;
                cursor += plan.duration;
            }
            Step::Function { b_mt, duration, .. } => {
                let mode = modes[i];
                let b = b_mt * 1e-3;
                let bent = solve_tentacle(b, &tparams)?;
                let model = ActuationModel::build(robot, &state, Some(&bent), [0.0; 3])?;
                let inter = solve_fields(&model.design, 0.0, &Vec3::zeros(), b, 0.0)?;
                let w = held(map_to_global(0.0, 0.0, &inter)?, *duration, "function");
                check_coil(i, &w)?;
                let curve = OpeningCurve::default_for(mode)?;
                let o = opening(mode, b, &curve)?;
                let what = if o > 0.0 { format!("opening > 0 ({} m)", num(o)) } else { "opening = 0".to_string() };
                ev("function", format!("mode={} b_T={} {}", mode.name(), num(b), what), cursor);
                let spec = WaveformSpec::StepRL { b0: b, l: safety::ACTUATION_COIL_L, r: safety::ACTUATION_COIL_R };
                out.reports.push(audit(&label("II"), &spec)?);
                append(&mut out.waveform, &w, cursor);
                cursor += duration;
            }
            Step::Heat { duration } => {
                thermal = heat_step(&thermal, *duration, true)?;
                let fs = FieldState::new(Vec3::new(HEAT_FIELD, 0.0, 0.0), [0.0; 5], Frame::Global);
                let mut w = Waveform::new();
                w.push(0.0, fs, "heat_carrier");
                w.push(*duration, fs, "heat_carrier");
                append(&mut out.waveform, &w, cursor);
                let spec = WaveformSpec::Harmonic { b0: HEAT_FIELD, f: HEAT_FREQUENCY };
                out.reports.push(audit(&label("IV"), &spec)?);
                ev("heat", format!("temperature_C={}", num(thermal.temperature)), cursor);
                cursor += duration;
            }
            Step::Wait { duration } => {
                thermal = heat_step(&thermal, *duration, false)?;
                let mut w = Waveform::new();
                w.push(0.0, FieldState::zero(Frame::Global), "wait");
                w.push(*duration, FieldState::zero(Frame::Global), "wait");
                append(&mut out.waveform, &w, cursor);
                ev("wait", format!("temperature_C={}", num(thermal.temperature)), cursor);
                cursor += duration;
            }
        }
    }
    for r in &out.reports {
        if !r.pass() {
            let step = r.category.trim_start_matches("step").split(':').next().and_then(|s| s.parse().ok()).unwrap_or(0);
            out.events.push(Event { step, t: cursor, kind: "safety_fail".into(), detail: r.category.clone() });
        }
    }
    Ok(out)
}

/// Executes a scenario and writes its files into `out_dir`.
pub fn run(sc: &Scenario, out_dir: &Path) -> Result<RunOutput> {
    let result = execute(sc)?;
    fs::create_dir_all(out_dir)?;
    let o = RunOutput {
        waveform: out_dir.join("waveform.csv"),
        trajectory: out_dir.join("trajectory.csv"),
        events: out_dir.join("events.log"),
        safety_text: out_dir.join("safety.txt"),
        safety_json: out_dir.join("safety.json"),
        result,
    };
    let r = &o.result;
    io::emit_waveform_csv(&r.waveform, &o.waveform)?;
    let pts: Vec<_> = r.trajectory.iter().map(|(s, p)| (*s, p)).collect();
    fs::write(&o.trajectory, io::trajectory_csv(&pts)?)?;
    let mut log = String::new();
    for e in &r.events {
        log.push_str(&e.line());
        log.push('\n');
    }
    fs::write(&o.events, log)?;
    let mut text = String::new();
    for rep in &r.reports {
        text.push_str(&rep.to_text());
    }
    fs::write(&o.safety_text, text)?;
    fs::write(&o.safety_json, io::reports_json(&r.reports)? + "\n")?;
    Ok(o)
}

#[derive(Debug, Parser)]
#[command(name = "magsoft", about = "Field planning, beam solving and safety audits for the reprogrammable soft robot")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one or more scenario files.
    Run(RunArgs),
    /// Audit a waveform CSV against the dB/dt and |H|f limits.
    Safety(SafetyArgs),
    /// Print the miniaturization feasibility table.
    Scale(ScaleArgs),
    /// Fit magnetization or stiffness from beam deflection measurements.
    Characterize(CharArgs),
    /// One-shot beam queries.
    SolveBeam(BeamArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long = "config", required = true, num_args = 1..)]
    pub configs: Vec<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Overrides the scenario environment.
    #[arg(long, value_parser = ["air", "oil", "ideal"])]
    pub env: Option<String>,
    /// Scenarios run concurrently, each into its own directory.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct SafetyArgs {
    /// Waveform CSV. Omit with --reference.
    pub waveform: Option<PathBuf>,
    #[arg(long)]
    pub category: Option<String>,
    /// Audit the reference field categories instead of a file.
    #[arg(long)]
    pub reference: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScaleArgs {
    /// Scenario file whose [scale] table is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub lambda_body: Option<f64>,
    #[arg(long)]
    pub lambda_tent: Option<f64>,
    #[arg(long)]
    pub width_factor: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CharArgs {
    /// CSV with columns b_mT,gamma_deg.
    pub measurements: PathBuf,
    #[arg(long)]
    pub volume_mm3: f64,
    #[arg(long)]
    pub length_mm: f64,
    /// Known flexural rigidity, N m^2.
    #[arg(long, conflicts_with = "m_kam")]
    pub ei: Option<f64>,
    /// Known magnetization, kA/m.
    #[arg(long)]
    pub m_kam: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BeamArgs {
    #[arg(value_parser = ["tentacle", "inner", "contact"])]
    pub beam: String,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub b_mt: f64,
    /// Scenario file whose [robot] table is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn load_robot(p: &Option<PathBuf>) -> Result<Robot> {
    match p {
        Some(p) => Ok(Scenario::load(p)?.robot),
        None => Ok(Robot::default()),
    }
}

fn cmd_run(a: &RunArgs) -> Result<bool> {
    let mut scenarios = Vec::new();
    for p in &a.configs {
        let mut s = Scenario::load(p)?;
        if let Some(e) = &a.env {
            s.env = e.clone();
        }
        let dir = if a.configs.len() == 1 {
            a.out_dir.clone()
        } else {
            a.out_dir.join(p.file_stem().map(|s| s.to_os_string()).unwrap_or_default())
        };
        scenarios.push((s, dir));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(e.to_string()))?;
    let results: Vec<Result<RunOutput>> = pool.install(|| scenarios.par_iter().map(|(s, d)| run(s, d)).collect());
    let mut safe = true;
    for r in results {
        let o = r?;
        for e in &o.result.events {
            println!("{}", e.line());
        }
        println!("wrote {}", o.waveform.parent().unwrap_or(Path::new(".")).display());
        safe &= o.result.safe();
    }
    Ok(safe)
}

fn cmd_safety(a: &SafetyArgs) -> Result<bool> {
    let reports = if a.reference {
        safety::reference_table()?
    } else {
        let path = a.waveform.as_ref().ok_or_else(|| Error::invalid("give a waveform CSV or --reference"))?;
        let mut w = io::read_waveform_csv(path)?;
        if a.category.is_some() {
            w.category = a.category.clone();
        }
        vec![safety::audit_waveform(&w)?]
    };
    for r in &reports {
        print!("{}", r.to_text());
    }
    if let Some(d) = &a.out_dir {
        fs::create_dir_all(d)?;
        fs::write(d.join("safety.txt"), reports.iter().map(|r| r.to_text()).collect::<String>())?;
        fs::write(d.join("safety.kv"), io::reports_kv(&reports))?;
        fs::write(d.join("safety.json"), io::reports_json(&reports)? + "\n")?;
    }
    Ok(reports.iter().all(|r| r.pass()))
}

fn cmd_scale(a: &ScaleArgs) -> Result<bool> {
    let mut plan = match &a.config {
        Some(p) => Scenario::load(p)?.scale,
        None => ScalePlan::default(),
    };
    if let Some(l) = a.lambda_body {
        plan.lambda_body = l;
    }
    if let Some(l) = a.lambda_tent {
        plan.lambda_tent = l;
    }
    if a.width_factor.is_some() {
        plan.width_factor = a.width_factor;
    }
    print!("{}", scaling::report(&plan)?);
    let c = scaling::capacities(&plan);
    Ok(c.drug_ok && c.sample_ok && c.cutter_ok)
}

fn cmd_characterize(a: &CharArgs) -> Result<bool> {
    let m = io::parse_measurements_csv(&fs::read(&a.measurements)?)?;
    let known = match (a.ei, a.m_kam) {
        (Some(ei), None) => Known::Ei(ei),
        (None, Some(m)) => Known::M(m * 1e3),
        _ => return Err(Error::invalid("give exactly one of --ei or --m-kam")),
    };
    let fit = characterize(&m, a.volume_mm3 * 1e-9, a.length_mm * 1e-3, known)?;
    println!("slope_per_T {}", num(fit.slope));
    match known {
        Known::Ei(_) => println!("magnetization_A_per_m {}", num(fit.derived)),
        Known::M(_) => println!("flexural_rigidity_N_m2 {}", num(fit.derived)),
    }
    println!("relative_rms_residual {}", num(fit.residual));
    Ok(true)
}

fn cmd_beam(a: &BeamArgs) -> Result<bool> {
    let robot = load_robot(&a.config)?;
    let b = a.b_mt * 1e-3;
    match a.beam.as_str() {
        "tentacle" => {
            let d = solve_tentacle(b, &TentacleParams::from_robot(&robot))?;
            println!("shape {:?}", d.shape);
            println!("tip_angle_rad {}", num(d.tip_angle()));
            println!("tip_y_m {}", num(d.tip_y()));
            println!("tip_z_m {}", num(d.tip_z()));
        }
        "inner" => {
            let g = solve_inner_beam(b, &InnerBeamParams::from_robot(&robot))?;
            println!("tip_rotation_rad {}", num(g));
            println!("contact {}", g >= GAMMA_CONTACT);
        }
        _ => {
            let f = inner_contact_field(GAMMA_CONTACT, &InnerBeamParams::from_robot(&robot));
            println!("contact_field_T {}", num(f));
        }
    }
    Ok(true)
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let r = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Safety(a) => cmd_safety(a),
        Command::Scale(a) => cmd_scale(a),
        Command::Characterize(a) => cmd_characterize(a),
        Command::SolveBeam(a) => cmd_beam(a),
    };
    match r {
        Ok(true) => 0,
        Ok(false) => 4,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
