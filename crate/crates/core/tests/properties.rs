use carroll_core::algebroid::{
    anchor_of_section, bracket_sections, dual_form_at, is_killing, is_stationary, quotient_gram, transverse,
    AlgebroidModel, Section,
};
use carroll_core::connection::{
    bianchi_residuals, diagnose, make_carrollian, make_l_compatible, make_metric_compatible, torsion,
    torsion_of_sections, ConnectionField, GammaEntry,
};
use carroll_core::distribution::{classify_leaf, flow_to, singular_scan, LeafClass, LeafParams};
use carroll_core::dynamics::{classify_initial, integrate_apath, InitialClass};
use carroll_core::fields::{Chart, ScalarField};
use carroll_core::linalg;
use carroll_core::presets;
use carroll_core::sampling::Sampling;
use proptest::prelude::*;

fn chart2() -> Chart {
    Chart::from_bounds(&["x", "y"], &[-1.5, -1.5], &[1.5, 1.5]).unwrap()
}

/// Smooth, bounded expressions in `x`, `y` using every grammar production.
fn expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x".to_string()),
        Just("y".to_string()),
        (-2.0..2.0f64).prop_map(|c| format!("({c:.3})")),
        (0.1..3.0f64).prop_map(|c| format!("{c:.2}e0")),
    ];
    leaf.prop_recursive(3, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} * {b}")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} / (2 + sin({b}))")),
            inner.clone().prop_map(|a| format!("-{a}")),
            inner.clone().prop_map(|a| format!("({a})^2")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("tanh({a})")),
            inner.clone().prop_map(|a| format!("exp(sin({a}))")),
            inner.clone().prop_map(|a| format!("sqrt(1 + ({a})^2)")),
            inner.clone().prop_map(|a| format!("log(2 + cos({a}))")),
            inner.clone().prop_map(|a| format!("tan(sin({a}) / 2)")),
        ]
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.4..1.4f64, 2)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    linalg::norm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn jet_matches_central_differences(text in expr(), pts in prop::collection::vec(point(), 4)) {
        let chart = chart2();
        let f = ScalarField::parse(&text, &chart).unwrap();
        let h = 1e-5 * 3.0;
        for x in &pts {
            let jet = f.jet(x).unwrap();
            for i in 0..2 {
                let mut p = x.clone();
                let mut m = x.clone();
                p[i] += h;
                m[i] -= h;
                let fd = (f.value(&p).unwrap() - f.value(&m).unwrap()) / (2.0 * h);
                prop_assert!((jet.grad[i] - fd).abs() <= 1e-5 * (1.0 + jet.grad[i].abs()), "{text} d{i} at {x:?}: {} vs {fd}", jet.grad[i]);
                let gp = f.jet(&p).unwrap().grad;
                let gm = f.jet(&m).unwrap().grad;
                for j in 0..2 {
                    let fd2 = (gp[j] - gm[j]) / (2.0 * h);
                    prop_assert!((jet.hess[i][j] - fd2).abs() <= 1e-3 * (1.0 + jet.hess[i][j].abs()));
                }
            }
        }
    }

    #[test]
    fn printed_fields_reparse_identically(text in expr()) {
        let chart = chart2();
        let f = ScalarField::parse(&text, &chart).unwrap();
        let g = ScalarField::parse(&f.to_string(), &chart).unwrap();
        for x in Sampling::new(20, 9).points(&chart) {
            let (a, b) = (f.jet(&x).unwrap(), g.jet(&x).unwrap());
            prop_assert!((a.value - b.value).abs() <= 1e-14 * (1.0 + a.value.abs()));
            for i in 0..2 {
                prop_assert!((a.grad[i] - b.grad[i]).abs() <= 1e-14 * (1.0 + a.grad[i].abs()));
            }
        }
        // Symbolic derivatives print and re-parse too.
        let d = f.diff(0);
        let d2 = ScalarField::parse(&d.to_string(), &chart).unwrap();
        let x = [0.3, -0.7];
        let (a, b) = (d.value(&x).unwrap(), d2.value(&x).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }
}

fn section(model: &AlgebroidModel, texts: &[String]) -> Section {
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    Section::parse(&refs, model.chart()).unwrap()
}

fn bracket_models() -> Vec<AlgebroidModel> {
    vec![
        presets::action_gl2(),
        presets::direct_sum(&[&["1 + x^2", "0"], &["0", "1"]], &["y", "x*y"]).unwrap(),
        presets::random(3, 2, 5).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bracket_antisymmetry_and_leibniz(
        which in 0usize..3,
        u in prop::collection::vec(expr(), 4),
        v in prop::collection::vec(expr(), 4),
        f in expr(),
    ) {
        let model = &bracket_models()[which];
        let k = model.rank();
        let u = section(model, &u[..k]);
        let v = section(model, &v[..k]);
        let f = ScalarField::parse(&f, model.chart()).unwrap();
        let fv = v.scaled(&f);
        for x in Sampling::new(20, 4).points(model.chart()) {
            let uv = bracket_sections(model, &u, &v, &x).unwrap();
            let vu = bracket_sections(model, &v, &u, &x).unwrap();
            for a in 0..k {
                prop_assert!((uv[a] + vu[a]).abs() <= 1e-14 * (1.0 + uv[a].abs()));
            }
            let lhs = bracket_sections(model, &u, &fv, &x).unwrap();
            let (fx, df) = f.grad(&x).unwrap();
            let xu = anchor_of_section(model, &u, &x).unwrap();
            let uf: f64 = xu.iter().zip(&df).map(|(p, q)| p * q).sum();
            let vx = v.eval(&x).unwrap();
            for a in 0..k {
                let rhs = uf * vx[a] + fx * uv[a];
                prop_assert!((lhs[a] - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()), "{} vs {rhs}", lhs[a]);
            }
        }
    }

    #[test]
    fn killing_propagates_to_rescaled_kernel_sections(f in expr()) {
        let stationary = [
            presets::flat_carroll(2).unwrap(),
            presets::vector_field_line(&["y", "0"]).unwrap(),
            presets::direct_sum(&[&["1", "0"], &["0", "2"]], &["1", "0.5"]).unwrap(),
        ];
        for model in stationary {
            prop_assert!(is_stationary(&model, Sampling::new(32, 42), 1e-9).unwrap().is_killing);
            let text = f.replace('y', &model.chart().coords()[1]);
            let f = ScalarField::parse(&text, model.chart()).unwrap();
            let fs = model.sigma_section().scaled(&f);
            let r = is_killing(&model, &fs, Sampling::new(32, 42), 1e-9).unwrap();
            prop_assert!(r.is_killing, "{r:?}");
        }
    }

    #[test]
    fn quotient_gram_ignores_kernel_shifts(x in point(), shift in prop::collection::vec(-3.0..3.0f64, 3)) {
        let model = presets::action_gl2();
        let reps: Vec<Vec<f64>> = (1..4).map(|a| (0..4).map(|b| if a == b { 1.0 } else { 0.3 }).collect()).collect();
        let sigma = model.frame_at(&x).unwrap().sigma;
        let moved: Vec<Vec<f64>> = reps
            .iter()
            .zip(&shift)
            .map(|(r, s)| r.iter().zip(&sigma).map(|(p, q)| p + s * q).collect())
            .collect();
        let a = quotient_gram(&model, &x, &reps).unwrap();
        let b = quotient_gram(&model, &x, &moved).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((a[i][j] - b[i][j]).abs() <= 1e-10);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn leaf_class_is_a_leaf_invariant(which in 0usize..3, seed in point(), frac in 0.1..0.9f64) {
        let model = match which {
            0 => presets::vector_field_line(&["y", "0"]).unwrap(),
            1 => presets::vector_field_line(&["-y", "x"]).unwrap(),
            _ => presets::vector_field_line(&["x^2 - 1", "y*(x - 0.5)"]).unwrap(),
        };
        let params = LeafParams::for_chart(model.chart());
        let rec = classify_leaf(&model, &seed, &params).unwrap();
        prop_assume!(matches!(rec.class, LeafClass::Line | LeafClass::Circle));
        // Partition: another point of the traced leaf gets the same class.
        let other = rec.polyline[((rec.polyline.len() - 1) as f64 * frac) as usize].clone();
        prop_assume!(model.chart().contains(&other));
        prop_assert_eq!(classify_leaf(&model, &other, &params).unwrap().class, rec.class);
        // Flow reversal: flowing forward then classifying agrees.
        if let Ok(end) = flow_to(&model, &seed, 0.2) {
            if model.chart().contains(&end) {
                prop_assert_eq!(classify_leaf(&model, &end, &params).unwrap().class, rec.class);
            }
        }
    }

    #[test]
    fn refinement_keeps_true_singular_cells(n in 4usize..40) {
        let line = presets::vector_field_line(&["y", "0"]).unwrap();
        let eps = 1e-6 * line.chart().diagonal();
        for grid in [[n, n], [2 * n, 2 * n]] {
            let flagged = singular_scan(&line, &grid, eps).unwrap();
            let h = 4.0 / grid[1] as f64;
            for j in 0..grid[1] {
                let lo = -2.0 + h * j as f64;
                let hi = lo + h;
                if lo <= 0.0 && 0.0 <= hi {
                    prop_assert_eq!(flagged.iter().filter(|c| c.cell.index[1] == j).count(), grid[0]);
                }
            }
        }
        let gl2 = presets::action_gl2();
        let flagged = singular_scan(&gl2, &[2 * n, 2 * n], eps).unwrap();
        prop_assert!(flagged.iter().any(|c| c.cell.index[0] == n - 1 || c.cell.index[0] == n));
        prop_assert!(flagged.iter().all(|c| c.cell.lo[0] <= 0.0 && 0.0 <= c.cell.hi[0]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn metric_compatible_is_l_compatible(seed in 0u64..10_000, shape in 0usize..3) {
        let (k, n) = [(2, 1), (3, 2), (4, 2)][shape];
        let model = presets::random(k, n, seed).unwrap();
        let conn = make_metric_compatible(&model, ConnectionField::Zero).unwrap();
        let d = diagnose(&model, &conn, Sampling::new(32, 42)).unwrap();
        prop_assert!(d.nonmetricity <= 1e-9 && d.l_compatibility <= 1e-9, "{d:?}");
    }

    #[test]
    fn torsion_of_kernel_sections_stays_in_the_kernel(f in expr(), c1 in -1.0..1.0f64, c2 in -1.0..1.0f64) {
        let model = presets::flat_carroll(2).unwrap();
        let chart = model.chart();
        let table = ConnectionField::Table(vec![
            GammaEntry { a: 0, b: 1, c: 0, field: ScalarField::parse(&format!("{c1} * x*t"), chart).unwrap() },
            GammaEntry { a: 1, b: 0, c: 1, field: ScalarField::parse(&format!("{c2} + t"), chart).unwrap() },
        ]);
        let conn = make_l_compatible(&model, table).unwrap();
        let f = ScalarField::parse(&f.replace('y', "t"), chart).unwrap();
        let s = model.sigma_section();
        let fs = s.scaled(&f);
        for x in Sampling::new(20, 42).points(chart) {
            let t = torsion_of_sections(&model, &conn, &s, &fs, &x).unwrap();
            let sig = model.frame_at(&x).unwrap().sigma;
            let r = linalg::norm(&transverse(&sig, &dual_form_at(&sig), &t));
            prop_assert!(r <= 1e-9, "{r}");
        }
    }

    #[test]
    fn particle_class_ignores_scaling(scale in prop_oneof![-100.0..-0.01f64, 0.01..100.0f64], x in point()) {
        let model = presets::direct_sum(&[&["1", "0"], &["0", "1"]], &["y", "0"]).unwrap();
        let c = classify_initial(&model, &[0.0, 0.0, scale], &x, 1e-12).unwrap();
        prop_assert_eq!(c, InitialClass::Particle);
        let c = classify_initial(&model, &[scale * 1e-3, 0.0, scale], &x, 1e-12).unwrap();
        prop_assert_eq!(c, InitialClass::Swifton);
    }

    #[test]
    fn geodesics_reverse(a in prop::collection::vec(-0.5..0.5f64, 3), x in prop::collection::vec(-0.5..0.5f64, 2)) {
        let model = presets::random(3, 2, 3).unwrap();
        let conn = make_carrollian(&model, ConnectionField::Zero).unwrap();
        let fwd = integrate_apath(&model, &conn, &x, &a, None, 0.4, 0.05).unwrap();
        prop_assume!(fwd.event.name() == "Completed");
        let back: Vec<f64> = fwd.end_alpha().iter().map(|v| -v).collect();
        let bwd = integrate_apath(&model, &conn, fwd.end(), &back, None, 0.4, 0.05).unwrap();
        prop_assert!(dist(bwd.end(), &x) <= 1e-6);
    }
}

#[test]
fn torsion_is_antisymmetric_for_constructed_connections() {
    let model = presets::random(3, 2, 1).unwrap();
    let conn = make_carrollian(&model, ConnectionField::Zero).unwrap();
    for x in Sampling::new(10, 1).points(model.chart()) {
        let t = torsion(&model, &conn, &x).unwrap();
        for c in 0..3 {
            for a in 0..3 {
                for b in 0..3 {
                    assert_eq!(t.get(c, a, b), -t.get(c, b, a));
                }
            }
        }
        let bi = bianchi_residuals(&model, &conn, &x).unwrap();
        assert!(bi.algebraic <= 1e-6 && bi.differential <= 1e-6, "{bi:?}");
    }
}
