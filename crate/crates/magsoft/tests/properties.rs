//! Property tests for the model invariants.

use std::f64::consts::PI;
use std::sync::OnceLock;

use magsoft::actuation::{control_matrix, design_matrix, levitation_gradient, solve_fields, ActuationModel, DesignMatrix, Vec6};
use magsoft::beam_mech::{
    activation_threshold, characterize, gamma_from_gsec, solve_inner_beam, solve_tentacle, InnerBeamParams, Known,
    TentacleParams,
};
use magsoft::cli::main_with_args;
use magsoft::fieldspace::{
    gradient_matrix, map_to_global, rot_axis, rotate_field, rx, ry, Axis, FieldState, Frame, Mat3, Rotation, Vec3,
    Waveform,
};
use magsoft::gaits::{plan_crawl, plan_roll, plan_spin_walk, simulate, Env, GaitConfig, RollAxis, Steer};
use magsoft::io::{parse_waveform_csv, trajectory_csv, waveform_csv};
use magsoft::reprogram_thermal::{apply_reprogram, ReprogramKind, ReprogramParams, ReprogramWaveform};
use magsoft::robot_model::{
    net_moment, profile_moments, rotate_inner_set, Component, MagnetizationState, Materials, Mode, Robot,
    TentacleProfile,
};
use magsoft::safety::{audit, dbdt_limit, eta_of, hf_product, reported_dbdt, WaveformSpec};
use magsoft::scaling::{capacities, inner_thickness, tentacle_thickness, wrench_scale, ScalePlan};
use magsoft::{COIL_MAX_B, COIL_MAX_GRAD};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn model(mode: Mode) -> &'static ActuationModel {
    static LOCO: OnceLock<ActuationModel> = OnceLock::new();
    static FUNC: OnceLock<Vec<(Mode, ActuationModel)>> = OnceLock::new();
    let build = |mode: Mode, b: f64| {
        let r = Robot::default();
        let st = if mode == Mode::Locomotion {
            MagnetizationState::locomotion(&r.materials)
        } else {
            MagnetizationState::function(&r.materials, mode).unwrap()
        };
        let t = solve_tentacle(b, &TentacleParams::from_robot(&r)).unwrap();
        ActuationModel::build(&r, &st, Some(&t), [0.0; 3]).unwrap()
    };
    if mode == Mode::Locomotion {
        return LOCO.get_or_init(|| build(Mode::Locomotion, 0.015));
    }
    let all = FUNC.get_or_init(|| Mode::FUNCTION_MODES.iter().map(|&m| (m, build(m, 0.005))).collect());
    &all.iter().find(|(m, _)| *m == mode).unwrap().1
}

fn loco() -> &'static DesignMatrix {
    &model(Mode::Locomotion).design
}

fn grad5() -> impl Strategy<Value = [f64; 5]> {
    prop::array::uniform5(-1.0..1.0f64)
}

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn function_mode() -> impl Strategy<Value = Mode> {
    prop::sample::select(Mode::FUNCTION_MODES.to_vec())
}

fn max_abs_diff(a: &Mat3, b: &Mat3) -> f64 {
    (a - b).amax()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_is_traceless_and_symmetric(g in grad5()) {
        let m = gradient_matrix(&g).unwrap();
        prop_assert!(m.trace().abs() <= 1e-12);
        prop_assert!(max_abs_diff(&m, &m.transpose()) <= 1e-12);
    }

    #[test]
    fn intermediate_to_global_is_conjugation(a in -PI..PI, b in -PI..PI, bv in vec3(1.0), g in grad5()) {
        let fs = FieldState::new(bv, g, Frame::Intermediate);
        let fast = map_to_global(a, b, &fs).unwrap();
        let slow = rotate_field(&(rx(a) * ry(b)), &fs, Frame::Global);
        prop_assert!((fast.b - slow.b).amax() <= 1e-12);
        for i in 0..5 {
            prop_assert!((fast.grad[i] - slow.grad[i]).abs() <= 1e-12, "entry {i}: {} vs {}", fast.grad[i], slow.grad[i]);
        }
    }

    #[test]
    fn long_rotation_chains_stay_orthonormal(seq in prop::collection::vec((0usize..3, -PI..PI), 1000)) {
        let axes = [Axis::X, Axis::Y, Axis::Z];
        let r = seq.iter().fold(Rotation::identity(), |acc, &(i, a)| acc.compose(&rot_axis(axes[i], a)));
        let m = r.matrix();
        prop_assert!(max_abs_diff(&(m.transpose() * m), &Mat3::identity()) <= 1e-10);
        prop_assert!((m.determinant() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn inner_set_has_threefold_symmetry(mode in prop::option::of(function_mode())) {
        let mat = Materials::default();
        let st = match mode {
            Some(m) => MagnetizationState::function(&mat, m).unwrap(),
            None => MagnetizationState::locomotion(&mat),
        };
        // the tabulated coordinates are rounded; an exact 0.6 mm circle must map onto itself
        let mut exact = Robot::default().geometry;
        let r = 0.6e-3;
        exact.x_inner = [-r * (PI / 3.0).sin(), r * (PI / 3.0).sin(), 0.0];
        exact.y_inner = [r * 0.5, r * 0.5, -r];
        for (geom, tol) in [(exact, 1e-15), (Robot::default().geometry, 1e-6)] {
            let d = profile_moments(&st, &geom, 8);
            let inner: Vec<_> = d.iter().filter(|p| p.component == Component::Inner).collect();
            let rotated = rotate_inner_set(&d);
            prop_assert_eq!(rotated.len(), 3);
            for r in &rotated {
                let hit = inner.iter().any(|p| (p.pos - r.pos).amax() <= tol && (p.moment - r.moment).amax() <= 1e-18);
                prop_assert!(hit, "rotated inner magnet {:?} has no partner", r.pos);
            }
        }
    }

    #[test]
    fn net_moment_is_lipschitz_in_bend(g in -1.5..1.5f64, dg in -1e-3..1e-3f64, n in 4usize..32) {
        let mat = Materials::default();
        let st = MagnetizationState::locomotion(&mat);
        let geom = Robot::default().geometry;
        let m0 = net_moment(&st, &geom, &TentacleProfile::uniform(n, g), [0.0; 3]).unwrap();
        let m1 = net_moment(&st, &geom, &TentacleProfile::uniform(n, g + dg), [0.0; 3]).unwrap();
        // each tentacle element turns by dg, so the sum moves by at most |dg| times its tentacle moment
        let tent = st.m_tent * geom.tentacle_area() * geom.l_tent;
        prop_assert!((m1 - m0).norm() <= tent * dg.abs() * (1.0 + 1e-9) + 1e-24);
    }

    #[test]
    fn symmetric_locomotion_moment_is_vertical(gam in prop::collection::vec(-1.5..1.5f64, 4..24), gi in -0.2..0.2f64) {
        let mat = Materials::default();
        let st = MagnetizationState::locomotion(&mat);
        let m = net_moment(&st, &Robot::default().geometry, &TentacleProfile::symmetric(gam), [gi; 3]).unwrap();
        prop_assert!(m.x.abs().max(m.y.abs()) <= 1e-12 * m.norm().max(1e-12));
    }

    #[test]
    fn inner_beam_grows_with_field(a in 1e-5..0.034f64, b in 1e-5..0.034f64) {
        prop_assume!((a - b).abs() > 1e-7);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let p = InnerBeamParams::from_robot(&Robot::default());
        let (gl, gh) = (solve_inner_beam(lo, &p).unwrap(), solve_inner_beam(hi, &p).unwrap());
        prop_assert!(gl > 0.0 && gh > gl, "{gl} at {lo} T, {gh} at {hi} T");
    }

    #[test]
    fn characterization_round_trips(ei in 1e-9..1e-6f64, m in 1e3..2e5f64, fields in prop::collection::vec(1e-3..0.03f64, 2..8)) {
        let (v, l) = (7.07e-9, 9.3e-3);
        let slope = m * v * l / ei;
        prop_assume!(fields.iter().all(|b| slope * b < 50.0));
        let data: Vec<(f64, f64)> = fields.iter().map(|b| (gamma_from_gsec(slope * b), *b)).collect();
        let got_m = characterize(&data, v, l, Known::Ei(ei)).unwrap().derived;
        let got_ei = characterize(&data, v, l, Known::M(m)).unwrap().derived;
        prop_assert!(rel(got_m, m) <= 1e-10, "M {got_m} vs {m}");
        prop_assert!(rel(got_ei, ei) <= 1e-10, "EI {got_ei} vs {ei}");
    }

    #[test]
    fn reprogramming_is_idempotent_and_reversible(mode in function_mode(), step in any::<bool>()) {
        let mat = Materials::default();
        let p = ReprogramParams::default();
        let kind = if step { ReprogramKind::StepMagnetize } else { ReprogramKind::RampMagnetize };
        let w = ReprogramWaveform::magnetize(kind, mode.phi_deg().unwrap(), p);
        let loco = MagnetizationState::locomotion(&mat);
        let once = apply_reprogram(&loco, &w, &mat).unwrap();
        let twice = apply_reprogram(&once, &w, &mat).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(once.mode, mode);
        let back = apply_reprogram(&once, &ReprogramWaveform::demagnetize(p), &mat).unwrap();
        prop_assert_eq!(&back, &loco);
        for s in [&once, &back] {
            prop_assert_eq!(s.m_tent.to_bits(), loco.m_tent.to_bits());
            prop_assert_eq!(s.m_sixth.to_bits(), loco.m_sixth.to_bits());
            prop_assert_eq!(s.m_inner.to_bits(), loco.m_inner.to_bits());
        }
    }

    #[test]
    fn demagnetizing_field_stays_inside_its_envelope(u in 0.0..1.0f64) {
        let p = ReprogramParams::default();
        let w = ReprogramWaveform::demagnetize(p);
        prop_assert_eq!(w.value(0.0).unwrap(), p.b_demag);
        let t = u * p.demag_end();
        let env = p.b_demag - p.k_demag * p.f_demag * t;
        prop_assert!(w.value(t).unwrap().abs() <= env.max(0.0) + 1e-15);
    }

    #[test]
    fn dbdt_limit_decreases_toward_54(a in 1e-4..1e4f64, b in 1e-4..1e4f64) {
        prop_assume!(a != b);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(dbdt_limit(lo).unwrap() > dbdt_limit(hi).unwrap());
        prop_assert!(dbdt_limit(hi).unwrap() > 54.0);
    }

    #[test]
    fn sampled_harmonic_matches_closed_form(b0 in 1e-3..0.03f64, f in 0.5..50.0f64, quarter in 25usize..100) {
        let spp = 4 * quarter;
        let mut w = Waveform::new();
        for i in 0..=spp {
            let t = i as f64 / (spp as f64 * f);
            w.push(t, FieldState::new(Vec3::new(b0 * (2.0 * PI * f * t).sin(), 0.0, 0.0), [0.0; 5], Frame::Global), "h");
        }
        let closed = WaveformSpec::Harmonic { b0, f };
        let sampled = WaveformSpec::Sampled(w);
        prop_assert!(rel(eta_of(&sampled).unwrap(), eta_of(&closed).unwrap()) <= 0.01);
        prop_assert!(rel(reported_dbdt(&sampled).unwrap(), reported_dbdt(&closed).unwrap()) <= 0.01);
        prop_assert!(rel(hf_product(&sampled, 0.2).unwrap(), hf_product(&closed, 0.2).unwrap()) <= 0.01);
    }

    #[test]
    fn audit_scales_linearly(vals in prop::collection::vec(vec3(0.03), 3..40), c in 0.1..10.0f64) {
        let mut w = Waveform::new();
        for (i, b) in vals.iter().enumerate() {
            w.push(i as f64 * 1e-3, FieldState::new(*b, [0.0; 5], Frame::Global), "s");
        }
        let base = WaveformSpec::Sampled(w.clone());
        let scaled = WaveformSpec::Sampled(w.scaled(c));
        prop_assert!(rel(reported_dbdt(&scaled).unwrap(), c * reported_dbdt(&base).unwrap()) <= 1e-12);
        prop_assert!(rel(hf_product(&scaled, 0.2).unwrap(), c * hf_product(&base, 0.2).unwrap()) <= 1e-12);
    }

    #[test]
    fn scale_plans_compose(a in 0.2..2.0f64, b in 0.2..2.0f64, ta in 0.2..2.0f64, tb in 0.2..2.0f64,
                           wa in prop::option::of(0.2..2.0f64), wb in prop::option::of(0.2..2.0f64)) {
        let p = ScalePlan { lambda_body: a, lambda_tent: ta, width_factor: wa, ..Default::default() };
        let q = ScalePlan { lambda_body: b, lambda_tent: tb, width_factor: wb, ..Default::default() };
        let pq = p.then(&q);
        let h = 60e-6;
        let two = inner_thickness(&q, inner_thickness(&p, h).unwrap()).unwrap();
        prop_assert!(rel(inner_thickness(&pq, h).unwrap(), two) <= 1e-12);
        let two = tentacle_thickness(&q, tentacle_thickness(&p, h).unwrap()).unwrap();
        prop_assert!(rel(tentacle_thickness(&pq, h).unwrap(), two) <= 1e-12);
        prop_assert!(rel(wrench_scale(&pq), wrench_scale(&p) * wrench_scale(&q)) <= 1e-12);
        // cutting force and cutter area scale together, so pressure is unchanged
        let area = capacities(&pq).cutter_area / pq.capacity.cutter_area;
        prop_assert!(rel(wrench_scale(&pq) / area, 1.0) <= 1e-12);
    }

    #[test]
    fn waveform_csv_round_trips(vals in prop::collection::vec((vec3(0.034), grad5()), 1..30)) {
        let mut w = Waveform::new();
        for (i, (b, g)) in vals.iter().enumerate() {
            w.push(i as f64 * 1e-3 + 0.25, FieldState::new(*b, g.map(|x| x * 0.4), Frame::Global), "t");
        }
        let bytes = waveform_csv(&w).unwrap();
        let back = parse_waveform_csv(&bytes).unwrap();
        prop_assert_eq!(back.len(), w.len());
        for (x, y) in w.samples.iter().zip(&back.samples) {
            prop_assert!((x.t - y.t).abs() <= 1e-8 * x.t.abs());
            prop_assert!((x.field.b - y.field.b).amax() <= 1e-10);
            prop_assert_eq!(&x.tag, &y.tag);
        }
        prop_assert_eq!(waveform_csv(&back).unwrap(), bytes);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn least_norm_fields_meet_the_wrench(theta in -PI..PI, f in vec3(1e-3)) {
        let d = loco();
        let fs = solve_fields(d, theta, &f, 0.0, 0.0).unwrap();
        let w = control_matrix(d, theta) * fs.to_vec8();
        let want = Vec6::from_column_slice(&[0.0, 0.0, 0.0, f.x, f.y, f.z]);
        let scale = f.norm().max(1e-12);
        prop_assert!((w - want).amax() <= 1e-9 * scale, "residual {}", (w - want).amax());
    }

    #[test]
    fn gait_waveforms_respect_coil_limits(b in 0.0..COIL_MAX_B, f in 0.05..1.0f64, fc in 0.1..2.5f64, cycles in 1usize..3) {
        let cfg = GaitConfig { samples_per_period: 50, ..Default::default() };
        let (_, w) = plan_roll(RollAxis::Length, b, f, 1.0 / f, Steer::Constant(0.0), &cfg, loco()).unwrap();
        prop_assert!(w.coil_violation().is_none());
        let (_, w) = plan_crawl(cycles, fc, Steer::Constant(0.3), &cfg, loco()).unwrap();
        prop_assert!(w.coil_violation().is_none());
        for s in &w.samples {
            prop_assert!(s.field.b.norm() <= COIL_MAX_B && s.field.max_grad_entry() <= COIL_MAX_GRAD);
        }
    }

    #[test]
    fn roll_simulation_is_deterministic_and_linear_in_frequency(f in 0.05..0.5f64, dur in 0.5..4.0f64, slip in 0.0..0.5f64) {
        let cfg = GaitConfig { samples_per_period: 40, ..Default::default() };
        let params = TentacleParams::default();
        let env = Env { slip_factor: slip, ..Env::ideal() };
        let go = |freq: f64| {
            let (plan, w) = plan_roll(RollAxis::Width, 0.015, freq, dur, Steer::Constant(0.0), &cfg, loco()).unwrap();
            simulate(&plan, &w, &params, &env).unwrap()
        };
        let (a, b) = (go(f), go(f));
        let rows = |t: &magsoft::gaits::Trajectory| trajectory_csv(&t.points.iter().map(|p| (0usize, p)).collect::<Vec<_>>()).unwrap();
        prop_assert_eq!(rows(&a), rows(&b));
        let d1 = a.displacement().norm();
        let d2 = go(2.0 * f).displacement().norm();
        prop_assert!(rel(d2, 2.0 * d1) <= 1e-9, "{d1} then {d2}");
    }

    #[test]
    fn function_mode_walking_stays_below_activation(mode in function_mode(), u in 0.05..0.95f64, f in 0.2..2.0f64) {
        let thr = activation_threshold(mode).unwrap();
        let b = u * thr.min(COIL_MAX_B);
        let cfg = GaitConfig { samples_per_period: 40, ..Default::default() };
        let (_, w) = plan_spin_walk(4, b, f, Steer::Constant(0.0), &cfg, &model(mode).design).unwrap();
        prop_assert!(!w.is_empty());
        for s in &w.samples {
            prop_assert!(s.field.b.norm() < thr, "{} T at t = {}", s.field.b.norm(), s.t);
        }
        prop_assert!(plan_spin_walk(4, thr.min(COIL_MAX_B), f, Steer::Constant(0.0), &cfg, &model(mode).design).is_err()
            || thr > COIL_MAX_B);
    }
}

#[test]
fn levitation_needs_about_4_39_tesla_per_metre() {
    let d = design_matrix(Mode::Locomotion, 3.71e-5, &loco().d).unwrap();
    let g = levitation_gradient(&d, 16.6e-6).unwrap();
    assert!(rel(g, 4.39) <= 0.02, "dBz/dz = {g}");
}

#[test]
fn dbdt_limit_tends_to_54() {
    assert!(rel(dbdt_limit(1e9).unwrap(), 54.0) <= 1e-9);
    assert!(dbdt_limit(0.0).is_err());
}

#[test]
fn harmonic_reference_passes() {
    assert!(audit("I", &WaveformSpec::Harmonic { b0: 0.015, f: 3.0 }).unwrap().pass());
}

fn write_csv(dir: &std::path::Path, name: &str, w: &Waveform) -> String {
    let p = dir.join(name);
    std::fs::write(&p, waveform_csv(w).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out").to_string_lossy().into_owned();

    let mut calm = Waveform::new();
    let mut harsh = Waveform::new();
    for i in 0..=400 {
        let t = i as f64 / 400.0;
        let fs = |b: f64| FieldState::new(Vec3::new(b, 0.0, 0.0), [0.0; 5], Frame::Global);
        calm.push(t, fs(0.015 * (2.0 * PI * t).sin()), "calm");
        harsh.push(t * 1e-3, fs(0.034 * (i % 2) as f64), "harsh");
    }
    let calm = write_csv(dir.path(), "calm.csv", &calm);
    let harsh = write_csv(dir.path(), "harsh.csv", &harsh);
    assert_eq!(main_with_args(["magsoft", "safety", &calm, "--out-dir", &out]), 0);
    assert_eq!(main_with_args(["magsoft", "safety", &harsh, "--out-dir", &out]), 4);
    assert_eq!(main_with_args(["magsoft", "safety", "/nonexistent/none.csv"]), 5);
    assert_eq!(main_with_args(["magsoft", "frobnicate"]), 2);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[[steps]]\nkind = \"gait\"\ngait = \"crawl\"\ncycles = 1\n[[steps]]\nkind = \"set_mode\"\nphi_deg = 90.0\n[[steps]]\nkind = \"gait\"\ngait = \"crawl\"\ncycles = 1\n").unwrap();
    let run_out = dir.path().join("run");
    let code = main_with_args(["magsoft", "run", "--config", &bad.to_string_lossy(), "--out-dir", &run_out.to_string_lossy()]);
    assert_eq!(code, 2);
    assert!(!run_out.join("waveform.csv").exists(), "a rejected scenario must not write outputs");
}
