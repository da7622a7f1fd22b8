//! End-to-end runs: lift → NLS → frames → reconstruction, with optional
//! Bäcklund and filament stages, and their export.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64 as C64;

use crate::backlund::{bt_apply, frame_at_complex_lambda, BtResult};
use crate::config::{RunConfig, VfeRoute};
use crate::curve::{CurveState, LibraryCurve, LibraryFilament};
use crate::diagnostics::{
    conservation_report, error_norms, stationary_great_circle, DiagnosticsReport, DriftThresholds, RunMeta,
};
use crate::error::{Error, Result};
use crate::frame::{
    closure_deviation, evolve_frames, pde_residual, reconstruct, FrameField, FrameOptions, XDerivative,
};
use crate::io::{self, ExportData, ManifestValue, DIAGNOSTICS_COLUMNS};
use crate::lift::{lift_curve, LiftResult};
use crate::nls::{nls_solve, InvariantField, NlsTrajectory};
use crate::spectral::{PeriodicGrid, Spectral};
use crate::vfe::{filament_from_flow, solve_vfe_sym, vfe_residual, FilamentState, NonClosedWarning, SymOptions};

/// Which part of the pipeline to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stage {
    /// Lift only; outputs describe `t = 0`.
    Lift,
    /// Everything the configuration asks for.
    #[default]
    Full,
}

/// Where the initial curve came from.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSource {
    pub name: String,
    /// Parameter period of the source before mapping to `2π`.
    pub period: f64,
    /// Pre-projection sphere deviation of ingested samples.
    pub ingest_deviation: f64,
}

#[derive(Debug, Clone)]
pub struct VfeOutput {
    pub route: VfeRoute,
    pub states: Vec<FilamentState>,
    pub warnings: Vec<NonClosedWarning>,
    /// Length over `2π` of the seed (Sym route).
    pub scale: f64,
    pub derivative_gap: Option<f64>,
    pub closure_gap: Vec<f64>,
    /// Per output time; `None` where no neighbouring levels exist.
    pub residual: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub config: RunConfig,
    pub source: CurveSource,
    pub c0: f64,
    pub branch_sign: f64,
    pub curves: Vec<CurveState>,
    pub invariant: Vec<InvariantField>,
    pub report: DiagnosticsReport,
    /// `γ_t − γ × γ_xx` per output time where neighbours exist.
    pub pde_residual: Vec<Option<f64>>,
    pub backlund: Option<BtResult>,
    pub vfe: Option<VfeOutput>,
    pub elapsed_seconds: f64,
}

fn load_curve(cfg: &RunConfig, spec: &Spectral) -> Result<(CurveState, CurveSource)> {
    if let Ok(c) = LibraryCurve::from_name(&cfg.curve) {
        let source = CurveSource { name: c.name().into(), period: 2.0 * std::f64::consts::PI, ingest_deviation: 0.0 };
        return Ok((c.sample(spec.grid()), source));
    }
    let path = Path::new(&cfg.curve);
    if !path.exists() {
        return Err(Error::UnknownCurve(cfg.curve.clone()));
    }
    let ing = io::ingest_curve(path, spec, cfg.tail_threshold)?;
    let source = CurveSource { name: cfg.curve.clone(), period: ing.period, ingest_deviation: ing.deviation };
    Ok((ing.curve, source))
}

fn meta(cfg: &RunConfig) -> RunMeta {
    RunMeta {
        n: cfg.n,
        dt: cfg.dt,
        t_final: cfg.t_final,
        scheme: cfg.scheme.name().into(),
        branch: format!("{:?}", cfg.branch).to_lowercase(),
    }
}

fn step_of(t: f64, dt: f64) -> usize {
    (t / dt).round() as usize
}

/// Indices of `times` that are output times.
fn output_indices(times: &[f64], cfg: &RunConfig) -> Result<Vec<usize>> {
    let (stride, first) = cfg.output_stride()?;
    let steps = cfg.steps()?;
    Ok(times
        .iter()
        .enumerate()
        .filter(|(_, &t)| {
            let n = step_of(t, cfg.dt);
            n >= first && ((n - first).is_multiple_of(stride) || n == steps)
        })
        .map(|(i, _)| i)
        .collect())
}

/// Evaluates `residual` on the window around each selected index when both
/// neighbours lie one step away.
fn windowed<T>(items: &[T], time: impl Fn(&T) -> f64, picks: &[usize], dt: f64, residual: impl Fn(&[T]) -> f64) -> Vec<Option<f64>> {
    picks
        .iter()
        .map(|&i| {
            if i == 0 || i + 1 >= items.len() {
                return None;
            }
            let close = |a: f64, b: f64| ((a - b).abs() - dt).abs() < 1e-9 * dt.max(1.0);
            if close(time(&items[i - 1]), time(&items[i])) && close(time(&items[i]), time(&items[i + 1])) {
                Some(residual(&items[i - 1..=i + 1]))
            } else {
                None
            }
        })
        .collect()
}

fn pick<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i].clone()).collect()
}

fn finish_report(report: &mut DiagnosticsReport, curves: &[CurveState], name: &str, pde: &[Option<f64>]) {
    if name == LibraryCurve::GreatCircle.name() {
        report.error = Some(error_norms(curves, stationary_great_circle));
    }
    report.pde_residual = pde.iter().flatten().copied().reduce(f64::max);
}

pub fn run_pipeline(cfg: &RunConfig, stage: Stage) -> Result<RunArtifacts> {
    cfg.validate()?;
    let start = Instant::now();
    let grid = cfg.grid()?;
    let spec = Spectral::new(grid);
    if stage == Stage::Full && cfg.vfe.as_ref().is_some_and(|v| v.route == VfeRoute::Sym) {
        let mut art = run_sym(cfg, &spec)?;
        art.elapsed_seconds = start.elapsed().as_secs_f64();
        return Ok(art);
    }
    let (curve, source) = load_curve(cfg, &spec)?;
    let lift = lift_curve(&curve, &spec, &cfg.lift_options())?;
    let q0 = InvariantField::new(grid, lift.q0_tilde.clone(), 0.0, 1.0);
    let mut art = match stage {
        Stage::Lift => lift_only(cfg, &spec, &lift, q0, source)?,
        Stage::Full => run_full(cfg, &spec, &lift, q0, source)?,
    };
    art.elapsed_seconds = start.elapsed().as_secs_f64();
    Ok(art)
}

fn lift_only(cfg: &RunConfig, spec: &Spectral, lift: &LiftResult, q0: InvariantField, source: CurveSource) -> Result<RunArtifacts> {
    let frame = FrameField {
        grid: spec.grid(),
        frames: lift.frame_tilde.clone(),
        t: 0.0,
        lambda: C64::new(-lift.c0, 0.0),
        drift: 0.0,
    };
    let rec = reconstruct(spec, std::slice::from_ref(&frame), lift.c0);
    let traj = NlsTrajectory { fields: vec![q0.clone()], dt: cfg.dt, scheme: cfg.scheme, mass_drift: 0.0 };
    let mut report = conservation_report(spec, &traj, &rec.curves, meta(cfg), &DriftThresholds::default());
    report.sphere_deviation = rec.sphere_deviation.clone();
    report.closure_deviation = vec![closure_deviation(spec, &frame, &q0, lift.branch_sign)];
    finish_report(&mut report, &rec.curves, &source.name, &[None]);
    Ok(RunArtifacts {
        config: cfg.clone(),
        source,
        c0: lift.c0,
        branch_sign: lift.branch_sign,
        curves: rec.curves,
        invariant: vec![q0],
        report,
        pde_residual: vec![None],
        backlund: None,
        vfe: None,
        elapsed_seconds: 0.0,
    })
}

fn run_full(cfg: &RunConfig, spec: &Spectral, lift: &LiftResult, q0: InvariantField, source: CurveSource) -> Result<RunArtifacts> {
    let traj = nls_solve(spec, &q0, cfg.t_final, cfg.dt, &cfg.nls_options())?;
    let (stride, _) = cfg.output_stride()?;
    let dense = cfg.vfe.is_some() || cfg.backlund.is_some();
    let opts = FrameOptions { save_every: if dense { 1 } else { stride }, neighbors: true };
    let frames = evolve_frames(spec, &lift.frame_tilde, &traj, C64::new(-lift.c0, 0.0), &opts)?;
    let rec = reconstruct(spec, &frames, lift.c0);
    let times: Vec<f64> = frames.iter().map(|f| f.t).collect();
    let idx = output_indices(&times, cfg)?;
    let pde = windowed(&rec.curves, |c| c.t, &idx, cfg.dt, |w| pde_residual(spec, w, XDerivative::Spectral));

    let curves = pick(&rec.curves, &idx);
    let invariant: Vec<InvariantField> = idx.iter().map(|&i| traj.at_step(step_of(times[i], cfg.dt)).clone()).collect();
    let mut report = conservation_report(spec, &traj, &curves, meta(cfg), &DriftThresholds::default());
    report.sphere_deviation = pick(&rec.sphere_deviation, &idx);
    report.closure_deviation = idx
        .iter()
        .zip(&invariant)
        .map(|(&i, q)| closure_deviation(spec, &frames[i], q, lift.branch_sign))
        .collect();
    finish_report(&mut report, &curves, &source.name, &pde);

    let backlund = match &cfg.backlund {
        Some(b) => {
            let params = b.params(lift.c0)?;
            let real: Vec<FrameField> = if params.lambda0 == -lift.c0 {
                frames.clone()
            } else {
                evolve_frames(spec, &lift.frame_tilde, &traj, C64::new(params.lambda0, 0.0), &FrameOptions::every(1))?
            };
            let complex = frame_at_complex_lambda(spec, lift, &traj, params.alpha, 1)?;
            let mut bt = bt_apply(spec, lift, &traj, &real, &complex, &params)?;
            bt.curves = pick(&bt.curves, &idx);
            bt.q_tilde = pick(&bt.q_tilde, &idx);
            bt.closure_deviation = pick(&bt.closure_deviation, &idx);
            Some(bt)
        }
        None => None,
    };

    let vfe = match &cfg.vfe {
        Some(_) => {
            let flow = filament_from_flow(spec, &rec.curves);
            let residual = windowed(&flow.states, |s| s.t, &idx, cfg.dt, |w| vfe_residual(spec, w, XDerivative::Spectral));
            let closure_gap = idx
                .iter()
                .map(|&i| {
                    let c = &rec.curves[i];
                    let mean = c.points.iter().fold(crate::su2::SpherePoint::zero(), |a, &p| a + p);
                    (mean * c.grid.h()).norm()
                })
                .collect();
            Some(VfeOutput {
                route: VfeRoute::Flow,
                states: pick(&flow.states, &idx),
                warnings: flow.warnings,
                scale: 1.0,
                derivative_gap: None,
                closure_gap,
                residual,
            })
        }
        None => None,
    };

    Ok(RunArtifacts {
        config: cfg.clone(),
        source,
        c0: lift.c0,
        branch_sign: lift.branch_sign,
        curves,
        invariant,
        report,
        pde_residual: pde,
        backlund,
        vfe,
        elapsed_seconds: 0.0,
    })
}

fn run_sym(cfg: &RunConfig, spec: &Spectral) -> Result<RunArtifacts> {
    let vcfg = cfg.vfe.clone().unwrap_or_default();
    let (seed, period) = match LibraryFilament::from_name(&cfg.curve) {
        Ok(f) => (f.sample(spec.grid()), 2.0 * std::f64::consts::PI),
        Err(_) if Path::new(&cfg.curve).exists() => io::ingest_filament(Path::new(&cfg.curve), spec, cfg.tail_threshold)?,
        Err(e) => return Err(e),
    };
    let (stride, _) = cfg.output_stride()?;
    let run = solve_vfe_sym(
        spec,
        &seed,
        cfg.t_final,
        cfg.dt,
        &cfg.nls_options(),
        &SymOptions { delta: vcfg.delta, save_every: stride },
    )?;
    let s = run.reparam.scale;
    let times: Vec<f64> = run.result.states.iter().map(|st| st.t).collect();
    let idx = output_indices(&times, cfg)?;
    let states = pick(&run.result.states, &idx);

    // Tangent indicatrix in the arclength variable, on the solver's clock.
    let curves: Vec<CurveState> = states
        .iter()
        .map(|st| {
            let tangent = spec.derivative_points(&st.points).into_iter().map(|p| p * (1.0 / s)).collect();
            CurveState::projected(st.grid, tangent, st.t / (s * s)).0
        })
        .collect();
    let invariant: Vec<InvariantField> =
        curves.iter().map(|c| run.traj.at_step(step_of(c.t, run.traj.dt)).clone()).collect();
    let mut report = conservation_report(spec, &run.traj, &curves, meta(cfg), &DriftThresholds::default());
    report.times = states.iter().map(|st| st.t).collect();
    report.sphere_deviation = vec![0.0; states.len()];
    report.closure_deviation = pick(&run.result.closure_gap, &idx);
    let source = CurveSource { name: cfg.curve.clone(), period, ingest_deviation: 0.0 };
    let residual = vec![None; states.len()];
    Ok(RunArtifacts {
        config: cfg.clone(),
        source,
        c0: run.lift.c0,
        branch_sign: 1.0,
        curves: curves.into_iter().zip(&states).map(|(c, st)| CurveState { t: st.t, ..c }).collect(),
        invariant,
        report,
        pde_residual: vec![None; states.len()],
        backlund: None,
        vfe: Some(VfeOutput {
            route: VfeRoute::Sym,
            states,
            warnings: Vec::new(),
            scale: s,
            derivative_gap: Some(run.result.derivative_gap),
            closure_gap: pick(&run.result.closure_gap, &idx),
            residual,
        }),
        elapsed_seconds: 0.0,
    })
}

/// Quantities not computed at a time are left as empty cells.
fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.16e}"))
}

/// `diagnostics.csv` contents.
pub fn diagnostics_csv(art: &RunArtifacts) -> String {
    let r = &art.report;
    let mut s = DIAGNOSTICS_COLUMNS.join(",");
    s.push('\n');
    for i in 0..r.times.len() {
        let c = &r.conserved[i];
        let err = r.error.as_ref();
        let row = [
            Some(r.times[i]),
            Some(r.energy[i]),
            Some(c.h1),
            Some(c.h2.re),
            Some(c.h2.im),
            Some(c.h3),
            Some(c.h4.re),
            Some(c.h4.im),
            err.map(|e| e.l2[i]),
            err.map(|e| e.sup[i]),
            r.sphere_deviation.get(i).copied(),
            r.closure_deviation.get(i).copied(),
            art.pde_residual.get(i).copied().flatten(),
            art.vfe.as_ref().and_then(|v| v.residual.get(i).copied().flatten()),
        ];
        let cells: Vec<String> = row.into_iter().map(fmt_opt).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn snapshot_name(dir: &str, i: usize) -> PathBuf {
    PathBuf::from(format!("{dir}/t_{i:04}.csv"))
}

/// Collects every artifact of a run as file contents plus manifest fields.
pub fn export_data(art: &RunArtifacts) -> ExportData {
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    let grid: PeriodicGrid = art.curves[0].grid;
    let mut frame_names = Vec::new();
    let mut q_names = Vec::new();
    for (i, (c, q)) in art.curves.iter().zip(&art.invariant).enumerate() {
        let f = snapshot_name("frames", i);
        let g = snapshot_name("invariant", i);
        frame_names.push(f.to_string_lossy().into_owned());
        q_names.push(g.to_string_lossy().into_owned());
        files.push((f, io::points_csv(grid, &c.points, "x,r1,r2,r3")));
        files.push((g, io::field_csv(grid, &q.values)));
    }
    files.push((PathBuf::from("diagnostics.csv"), diagnostics_csv(art)));

    let mut run: BTreeMap<String, ManifestValue> = BTreeMap::new();
    let f = ManifestValue::Float;
    run.insert("curve".into(), ManifestValue::Text(art.source.name.clone()));
    run.insert("original_period".into(), f(art.source.period));
    run.insert("ingest_deviation".into(), f(art.source.ingest_deviation));
    run.insert("c0".into(), f(art.c0));
    run.insert("branch_sign".into(), f(art.branch_sign));
    run.insert("branch".into(), ManifestValue::Text(art.report.meta.branch.clone()));
    run.insert("snapshots".into(), ManifestValue::Int(art.curves.len() as i64));
    run.insert("times".into(), ManifestValue::List(art.report.times.iter().map(|t| format!("{t}")).collect()));
    if let Some(p) = art.report.pde_residual {
        run.insert("pde_residual".into(), f(p));
    }
    run.insert("max_energy_drift".into(), f(art.report.max_energy_drift()));
    run.insert("max_h1_drift".into(), f(art.report.max_h1_drift()));
    run.insert("flags".into(), ManifestValue::List(art.report.flags.clone()));
    if let Some(e) = &art.report.error {
        run.insert("global_sup_error".into(), f(e.global_sup));
    }
    if !art.config.deterministic {
        run.insert("elapsed_seconds".into(), f(art.elapsed_seconds));
    }

    if let Some(bt) = &art.backlund {
        for (i, (c, q)) in bt.curves.iter().zip(&bt.q_tilde).enumerate() {
            files.push((snapshot_name("backlund/frames", i), io::points_csv(grid, &c.points, "x,r1,r2,r3")));
            files.push((snapshot_name("backlund/invariant", i), io::field_csv(grid, &q.values)));
        }
        run.insert("bt_sphere_deviation".into(), f(bt.sphere_deviation));
        run.insert("bt_nls_residual".into(), f(bt.nls_residual));
        run.insert("bt_pde_residual".into(), f(bt.pde_residual));
        run.insert("bt_projector_defect".into(), f(bt.projector_defect));
        run.insert(
            "bt_closure_deviation".into(),
            ManifestValue::List(bt.closure_deviation.iter().map(|d| format!("{d:.6e}")).collect()),
        );
    }

    let mut filament_names = Vec::new();
    if let Some(v) = &art.vfe {
        for (i, st) in v.states.iter().enumerate() {
            let name = snapshot_name("filament", i);
            filament_names.push(name.to_string_lossy().into_owned());
            files.push((name, io::points_csv(grid, &st.points, "x,a1,a2,a3")));
        }
        run.insert("vfe_route".into(), ManifestValue::Text(format!("{:?}", v.route).to_lowercase()));
        run.insert("vfe_scale".into(), f(v.scale));
        if let Some(g) = v.derivative_gap {
            run.insert("vfe_derivative_gap".into(), f(g));
        }
        run.insert(
            "vfe_non_closed_warnings".into(),
            ManifestValue::List(v.warnings.iter().map(|w| format!("t = {}: |mean| = {:.3e}", w.t, w.mean)).collect()),
        );
    }
    files.push((
        PathBuf::from("plots.gp"),
        io::plot_script(&frame_names, &q_names, &art.report.times, &filament_names),
    ));
    ExportData { config_toml: art.config.to_toml_string(), run, files }
}

/// Writes all artifacts of `art` below `outdir`.
pub fn export_run(art: &RunArtifacts, outdir: &Path) -> Result<Vec<PathBuf>> {
    io::write_export(&export_data(art), outdir)
}
