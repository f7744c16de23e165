use carroll_core::algebroid::{dual_form_at, transverse, AlgebroidModel, Section};
use carroll_core::connection::{
    bianchi_residuals, covariant_derivative, diagnose, idx, make_carrollian, make_frame_parallel_carrollian,
    make_l_compatible, make_metric_compatible, make_torsion_free_carrollian, minimal_direct_sum_connection,
    nonmetricity, ConnectionField, GammaEntry, TorsionFreeOutcome,
};
use carroll_core::fields::{Chart, ScalarField};
use carroll_core::linalg;
use carroll_core::presets;
use carroll_core::sampling::Sampling;

fn points(model: &AlgebroidModel, n: usize) -> Vec<Vec<f64>> {
    if model.dim() == 0 {
        vec![vec![]]
    } else {
        Sampling::new(n, 42).points(model.chart())
    }
}

fn constructed(model: &AlgebroidModel) -> Vec<(&'static str, ConnectionField)> {
    let mut out = vec![
        ("l-compat", make_l_compatible(model, ConnectionField::Zero).unwrap()),
        ("carrollian", make_carrollian(model, ConnectionField::Zero).unwrap()),
        (
            "frame-parallel",
            make_frame_parallel_carrollian(model, ConnectionField::Zero).unwrap(),
        ),
    ];
    if let TorsionFreeOutcome::Connection(c) = make_torsion_free_carrollian(model, ConnectionField::Zero).unwrap() {
        out.push(("torsion-free", c));
    }
    if let Ok(c) = minimal_direct_sum_connection(model) {
        out.push(("minimal-direct-sum", c));
    }
    out
}

#[test]
fn bianchi_identities_hold_for_every_constructed_connection() {
    for (name, model) in &presets::shipped() {
        for (method, conn) in constructed(model) {
            for x in points(model, 20) {
                let b = bianchi_residuals(model, &conn, &x).unwrap();
                assert!(
                    b.algebraic <= 1e-6 && b.differential <= 1e-6,
                    "{name}/{method} at {x:?}: {b:?}"
                );
            }
        }
    }
}

#[test]
fn shipped_presets_admit_carrollian_connections() {
    for (name, model) in presets::shipped() {
        let conn = make_carrollian(&model, ConnectionField::Zero).unwrap();
        for x in points(&model, 64) {
            let n = nonmetricity(&model, &conn, &x).unwrap();
            assert!(n.max_abs() <= 1e-9, "{name}");
        }
        if model.dim() > 0 {
            let d = diagnose(&model, &conn, Sampling::default()).unwrap();
            assert!(d.l_compatibility <= 1e-9, "{name}: {d:?}");
        }
    }
}

#[test]
fn kernel_sections_stay_parallel_to_sigma() {
    let model = presets::flat_carroll(3).unwrap();
    let chart = model.chart();
    let base = ConnectionField::Table(vec![
        GammaEntry {
            a: 0,
            b: 2,
            c: 1,
            field: ScalarField::parse("x*y + t", chart).unwrap(),
        },
        GammaEntry {
            a: 2,
            b: 2,
            c: 0,
            field: ScalarField::parse("t^2 - y", chart).unwrap(),
        },
        GammaEntry {
            a: 1,
            b: 0,
            c: 2,
            field: ScalarField::parse("3", chart).unwrap(),
        },
    ]);
    let conn = make_l_compatible(&model, base).unwrap();
    let sigma = model.sigma_section();
    for f in ["x", "exp(t)*y", "sin(x + t)", "1 + y^2", "x*y*t"] {
        let fs = sigma.scaled(&ScalarField::parse(f, chart).unwrap());
        for x in Sampling::new(20, 3).points(chart) {
            for a in 0..3 {
                let v = covariant_derivative(&model, &conn, &Section::basis(3, a), &fs, &x).unwrap();
                let s = model.frame_at(&x).unwrap().sigma;
                assert!(linalg::norm(&transverse(&s, &dual_form_at(&s), &v)) <= 1e-12, "{f}");
            }
        }
    }
}

#[test]
fn different_bases_give_different_carrollian_connections() {
    let model = presets::nonstationary();
    let chart = model.chart();
    let other = ConnectionField::Table(vec![GammaEntry {
        a: 0,
        b: 0,
        c: 1,
        field: ScalarField::parse("x + t", chart).unwrap(),
    }]);
    let a = make_carrollian(&model, ConnectionField::Zero).unwrap();
    let b = make_carrollian(&model, other).unwrap();
    let x = [0.3, 1.1];
    let (ga, gb) = (a.values(&model, &x).unwrap(), b.values(&model, &x).unwrap());
    assert!(ga.iter().zip(&gb).any(|(p, q)| (p - q).abs() > 1e-3));
    assert!(nonmetricity(&model, &a, &x).unwrap().max_abs() <= 1e-9);
    assert!(nonmetricity(&model, &b, &x).unwrap().max_abs() <= 1e-9);
}

#[test]
fn flat_carroll_needs_no_correction() {
    let model = presets::flat_carroll(3).unwrap();
    let conn = make_metric_compatible(&model, ConnectionField::Zero).unwrap();
    for x in Sampling::new(10, 42).points(model.chart()) {
        assert!(conn.values(&model, &x).unwrap().iter().all(|v| v.abs() <= 1e-15));
    }
}

#[test]
fn direct_sum_block_is_determined_by_the_metric() {
    let chart = Chart::from_bounds(&["x", "y"], &[-2.0, -2.0], &[2.0, 2.0]).unwrap();
    let model = presets::direct_sum_on(chart, &[&["1 + x^2", "0.2*y"], &["0.2*y", "2"]], &["1 + y^2", "x"]).unwrap();
    let minimal = minimal_direct_sum_connection(&model).unwrap();
    let generic = make_carrollian(&model, ConnectionField::Zero).unwrap();
    let (m, k) = (2, 3);
    for x in Sampling::new(10, 42).points(model.chart()) {
        let f = model.frame_at(&x).unwrap();
        let gh = minimal.values(&model, &x).unwrap();
        let gg = generic.values(&model, &x).unwrap();
        // Only the g0-symmetric part of Gamma(sigma, A0) is fixed by metric compatibility.
        let lower = |g: &[f64], c: usize, b: usize| -> f64 { (0..m).map(|d| f.g(c, d) * g[idx(k, d, m, b)]).sum() };
        for c in 0..m {
            for b in 0..m {
                let sym = 0.5 * (lower(&gg, c, b) + lower(&gg, b, c));
                assert!((sym - lower(&gh, c, b)).abs() <= 1e-10, "({c}, {b}) at {x:?}");
            }
        }
    }
    let d = diagnose(&model, &minimal, Sampling::default()).unwrap();
    assert!(d.nonmetricity <= 1e-9 && d.l_compatibility <= 1e-9, "{d:?}");
}
