use std::fs;
use std::path::Path;

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use sphereflow::config::{BacklundConfig, RunConfig, VfeConfig};
use sphereflow::curve::{CurveState, LibraryCurve};
use sphereflow::frame::{evolve_frame, reconstruct, FrameOptions};
use sphereflow::io::{verify_manifest, DIAGNOSTICS_COLUMNS};
use sphereflow::lift::{lift_curve, LiftOptions};
use sphereflow::nls::{conserved_quantities, nls_solve, InvariantField, NlsOptions};
use sphereflow::pipeline::{export_run, run_pipeline, Stage};
use sphereflow::spectral::{PeriodicGrid, Spectral};
use sphereflow::su2::SpherePoint;

fn spec(n: usize) -> Spectral {
    Spectral::new(PeriodicGrid::new(n).unwrap())
}

/// Rodrigues rotation about `axis` by `angle`.
fn rotate(axis: SpherePoint, angle: f64, p: SpherePoint) -> SpherePoint {
    let k = axis.normalized();
    p * angle.cos() + k.cross(p) * angle.sin() + k * (k.dot(p) * (1.0 - angle.cos()))
}

fn evolve(s: &Spectral, curve: &CurveState, t: f64, dt: f64) -> Vec<CurveState> {
    let lift = lift_curve(curve, s, &LiftOptions::default()).unwrap();
    let q0 = InvariantField::new(s.grid(), lift.q0_tilde.clone(), 0.0, 1.0);
    let traj = nls_solve(s, &q0, t, dt, &NlsOptions::default()).unwrap();
    let frames = evolve_frame(s, &lift, &traj, &FrameOptions::every(traj.steps())).unwrap();
    reconstruct(s, &frames, lift.c0).curves
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn flow_commutes_with_rotations(ax in -1.0..1.0f64, ay in -1.0..1.0f64, az in 0.1..1.0f64, angle in 0.0..std::f64::consts::TAU) {
        let s = spec(128);
        let axis = SpherePoint::new(ax, ay, az);
        let base = LibraryCurve::Viviani.sample(s.grid());
        let turned = CurveState::sample(s.grid(), |x| rotate(axis, angle, LibraryCurve::Viviani.eval(x)));
        let a = evolve(&s, &base, 0.05, 1e-3);
        let b = evolve(&s, &turned, 0.05, 1e-3);
        for (ca, cb) in a.iter().zip(&b) {
            for (p, q) in ca.points.iter().zip(&cb.points) {
                prop_assert!(rotate(axis, angle, *p).distance(*q) < 1e-9);
                prop_assert!(q.sphere_deviation() < 1e-12);
            }
        }
    }

    #[test]
    fn split_step_keeps_mass(coeffs in prop::collection::vec((-0.5..0.5f64, -0.5..0.5f64), 9)) {
        let s = spec(64);
        let values = s
            .grid()
            .xs()
            .iter()
            .map(|&x| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(m, &(re, im))| C64::new(re, im) * C64::from_polar(1.0, (m as f64 - 4.0) * x))
                    .sum()
            })
            .collect();
        let q0 = InvariantField::new(s.grid(), values, 0.0, 1.0);
        let traj = nls_solve(&s, &q0, 0.1, 1e-3, &NlsOptions::default()).unwrap();
        let h0 = conserved_quantities(&s, &q0).h1;
        for f in &traj.fields {
            prop_assert!(f.is_finite());
            prop_assert!(((conserved_quantities(&s, f).h1 - h0) / h0).abs() < 1e-10);
        }
    }
}

fn check_csv(path: &Path, header: Option<&[&str]>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let head: Vec<&str> = lines.next().unwrap().split(',').collect();
    if let Some(h) = header {
        assert_eq!(head, h, "{path:?}");
    }
    let mut rows = 0;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), head.len(), "{path:?}: {line}");
        for c in cells {
            // Empty cells stand for quantities not computed at that time.
            if !c.is_empty() {
                assert!(c.parse::<f64>().unwrap().is_finite(), "{path:?}: {c}");
            }
        }
        rows += 1;
    }
    assert!(rows > 0, "{path:?}");
}

fn walk(dir: &Path, out: &mut Vec<std::path::PathBuf>) {
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            walk(&p, out);
        } else {
            out.push(p);
        }
    }
}

#[test]
fn exported_files_follow_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        curve: "great_circle".into(),
        n: 32,
        dt: 0.01,
        t_final: 0.1,
        backlund: Some(BacklundConfig::default()),
        vfe: Some(VfeConfig::default()),
        output: dir.path().to_path_buf(),
        ..RunConfig::default()
    };
    let art = run_pipeline(&cfg, Stage::Full).unwrap();
    export_run(&art, dir.path()).unwrap();
    assert!(verify_manifest(dir.path()).unwrap().is_empty());

    let mut files = Vec::new();
    walk(dir.path(), &mut files);
    let mut csv = 0;
    for f in &files {
        let name = f.strip_prefix(dir.path()).unwrap().to_string_lossy().into_owned();
        if name == "diagnostics.csv" {
            check_csv(f, Some(&DIAGNOSTICS_COLUMNS));
        } else if name.ends_with(".csv") {
            let header: &[&str] = if name.contains("invariant") {
                &["x", "re_q", "im_q"]
            } else if name.starts_with("filament") {
                &["x", "a1", "a2", "a3"]
            } else {
                &["x", "r1", "r2", "r3"]
            };
            check_csv(f, Some(header));
        } else {
            assert!(name == "manifest.toml" || name == "plots.gp", "unexpected file {name}");
            continue;
        }
        csv += 1;
    }
    for sub in ["frames", "invariant", "backlund/frames", "backlund/invariant", "filament"] {
        assert!(dir.path().join(sub).join("t_0000.csv").exists(), "{sub}");
    }
    assert!(csv >= 26);
}
