//! Example models: the standard gallery plus randomized direct sums for test
//! batteries. Every shipped preset passes `validate` at tolerance 1e-8.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::algebroid::{AlgebroidError, AlgebroidModel, ModelMeta, StructureEntry};
use crate::fields::{Chart, FieldError, ScalarField};
use crate::linalg;
use crate::sampling::Sampling;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum PresetError {
    #[error("unknown preset {0:?}; available: {}", NAMES.join(", "))]
    Unknown(String),
    #[error("bad parameter {key}: {msg}")]
    Param { key: String, msg: String },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Model(#[from] AlgebroidError),
}

/// Names accepted by [`by_name`].
pub const NAMES: &[&str] = &[
    "flat-carroll",
    "vector-field-line",
    "rotation",
    "interval-flow",
    "action-gl2",
    "lie-algebra-gl2",
    "direct-sum",
    "random",
    "nonstationary",
];

fn coord_names(n: usize) -> Vec<String> {
    match n {
        1 => vec!["x".into()],
        2 => vec!["x".into(), "y".into()],
        3 => vec!["x".into(), "y".into(), "z".into()],
        _ => (1..=n).map(|i| format!("x{i}")).collect(),
    }
}

fn box_chart(names: Vec<String>, lo: f64, hi: f64) -> Chart {
    let n = names.len();
    Chart::new(names, vec![lo; n], vec![hi; n]).expect("valid box")
}

fn cst(v: f64) -> ScalarField {
    ScalarField::constant(v)
}

fn meta(name: &str, params: &[(&str, String)], notes: &[&str]) -> ModelMeta {
    ModelMeta {
        preset: Some(name.to_string()),
        params: params.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        notes: notes.iter().map(|s| s.to_string()).collect(),
    }
}

/// Tangent algebroid (identity anchor, coordinate frame, zero brackets) with
/// the given metric and kernel frame.
pub fn tangent_model(chart: Chart, metric: &[&[&str]], sigma: &[&str]) -> Result<AlgebroidModel, PresetError> {
    let n = chart.dim();
    let anchor = (0..n)
        .map(|i| (0..n).map(|a| cst(if i == a { 1.0 } else { 0.0 })).collect())
        .collect();
    let metric = metric
        .iter()
        .map(|row| row.iter().map(|t| ScalarField::parse(t, &chart)).collect())
        .collect::<Result<Vec<Vec<_>>, _>>()?;
    let sigma = sigma
        .iter()
        .map(|t| ScalarField::parse(t, &chart))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AlgebroidModel::new(chart, n, anchor, vec![], metric, sigma)?)
}

/// Flat Carroll spacetime as a tangent algebroid: coordinates
/// `(x.., t)` on `[-2, 2]^n`, metric `diag(1, .., 1, 0)`, kernel `d_t`.
pub fn flat_carroll(n: usize) -> Result<AlgebroidModel, PresetError> {
    flat_carroll_on(n, -2.0, 2.0)
}

pub fn flat_carroll_on(n: usize, lo: f64, hi: f64) -> Result<AlgebroidModel, PresetError> {
    if n < 2 {
        return Err(PresetError::Param {
            key: "n".into(),
            msg: "flat Carroll needs n >= 2".into(),
        });
    }
    let mut names = coord_names(n - 1);
    names.push("t".into());
    let chart = Chart::new(names, vec![lo; n], vec![hi; n])?;
    let anchor = (0..n)
        .map(|i| (0..n).map(|a| cst(if i == a { 1.0 } else { 0.0 })).collect())
        .collect();
    let metric = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| cst(if a == b && a + 1 < n { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    let sigma = (0..n).map(|a| cst(if a + 1 == n { 1.0 } else { 0.0 })).collect();
    Ok(
        AlgebroidModel::new(chart, n, anchor, vec![], metric, sigma)?.with_meta(meta(
            "flat-carroll",
            &[("n", n.to_string())],
            &["weak Carrollian manifold viewed as its tangent algebroid"],
        )),
    )
}

/// Trivial line bundle anchored by the vector field `X`, zero metric,
/// frame `sigma = 1`. The chart is `[-2, 2]^m` with `m = X.len()`.
pub fn vector_field_line(x: &[&str]) -> Result<AlgebroidModel, PresetError> {
    vector_field_line_on(x, -2.0, 2.0)
}

pub fn vector_field_line_on(x: &[&str], lo: f64, hi: f64) -> Result<AlgebroidModel, PresetError> {
    let chart = Chart::new(coord_names(x.len()), vec![lo; x.len()], vec![hi; x.len()])?;
    let anchor = x
        .iter()
        .map(|t| Ok(vec![ScalarField::parse(t, &chart)?]))
        .collect::<Result<Vec<_>, FieldError>>()?;
    Ok(
        AlgebroidModel::new(chart, 1, anchor, vec![], vec![vec![cst(0.0)]], vec![cst(1.0)])?.with_meta(meta(
            "vector-field-line",
            &[("X", x.join(","))],
            &["bracket -X(psi) chi + psi X(chi) on the trivial line bundle, zero metric"],
        )),
    )
}

/// Matrix units of gl2 in the order (E11, E12, E21, E22).
fn gl2_unit(a: usize) -> [[f64; 2]; 2] {
    let mut m = [[0.0; 2]; 2];
    m[a / 2][a % 2] = 1.0;
    m
}

fn mat_mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

/// Structure constants of the gl2 commutator, scaled by `sign`.
fn gl2_structure(sign: f64) -> Vec<StructureEntry> {
    let mut out = Vec::new();
    for a in 0..4 {
        for b in a + 1..4 {
            let ab = mat_mul(gl2_unit(a), gl2_unit(b));
            let ba = mat_mul(gl2_unit(b), gl2_unit(a));
            for c in 0..4 {
                let v = ab[c / 2][c % 2] - ba[c / 2][c % 2];
                if v != 0.0 {
                    out.push(StructureEntry {
                        lower: (a, b),
                        upper: c,
                        field: cst(sign * v),
                    });
                }
            }
        }
    }
    out
}

/// Action algebroid of gl2 acting linearly on the plane.
///
/// The anchor sends a matrix `A` to the linear vector field `p -> A p`, which
/// reverses brackets; the structure constants are therefore those of the
/// opposite commutator `BA - AB`, making the anchor a homomorphism.
pub fn action_gl2() -> AlgebroidModel {
    let chart = box_chart(coord_names(2), -2.0, 2.0);
    let x = ScalarField::parse("x", &chart).expect("coordinate");
    let y = ScalarField::parse("y", &chart).expect("coordinate");
    let z = cst(0.0);
    let anchor = vec![
        vec![x.clone(), y.clone(), z.clone(), z.clone()],
        vec![z.clone(), z.clone(), x, y],
    ];
    let metric = (0..4)
        .map(|a| (0..4).map(|b| cst(if a == b && a > 0 { 1.0 } else { 0.0 })).collect())
        .collect();
    let sigma = vec![cst(1.0), cst(0.0), cst(0.0), cst(0.0)];
    AlgebroidModel::new(chart, 4, anchor, gl2_structure(-1.0), metric, sigma)
        .expect("gl2 action model is well formed")
        .with_meta(meta(
            "action-gl2",
            &[],
            &[
                "basis order (E11, E12, E21, E22); anchor E -> (p -> E p)",
                "structure constants of BA - AB so that the anchor preserves brackets",
                "metric beta1 beta2 + gamma1 gamma2 + delta1 delta2, kernel spanned by E11",
            ],
        ))
}

/// Killing form `K(X, Y) = 4 tr(XY) - 2 tr(X) tr(Y)` of gl2 in the unit basis.
pub fn gl2_killing_form() -> [[f64; 4]; 4] {
    let tr = |m: [[f64; 2]; 2]| m[0][0] + m[1][1];
    let mut k = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            let (ea, eb) = (gl2_unit(a), gl2_unit(b));
            k[a][b] = 4.0 * tr(mat_mul(ea, eb)) - 2.0 * tr(ea) * tr(eb);
        }
    }
    k
}

/// gl2 over a point with its Killing form; the kernel is spanned by the identity.
pub fn lie_algebra_gl2() -> AlgebroidModel {
    let kf = gl2_killing_form();
    let metric = kf.iter().map(|r| r.iter().map(|v| cst(*v)).collect()).collect();
    let sigma = vec![cst(1.0), cst(0.0), cst(0.0), cst(1.0)];
    AlgebroidModel::new(Chart::point(), 4, vec![], gl2_structure(1.0), metric, sigma)
        .expect("gl2 algebra model is well formed")
        .with_meta(meta(
            "lie-algebra-gl2",
            &[],
            &[
                "Carrollian Lie algebra: gl2 with its (ad-invariant) Killing form",
                "basis order (E11, E12, E21, E22); kernel spanned by the identity matrix",
            ],
        ))
}

fn check_positive_definite(chart: &Chart, g0: &[Vec<ScalarField>]) -> Result<(), PresetError> {
    let m = g0.len();
    for p in Sampling::default().points(chart) {
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        let (a, b) = if i <= j { (i, j) } else { (j, i) };
                        g0[a][b].value(&p)
                    })
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        if m > 0 && linalg::to_matrix(&rows, m).llt(faer::Side::Lower).is_err() {
            return Err(PresetError::Param {
                key: "g0".into(),
                msg: format!("not positive definite at {p:?}"),
            });
        }
    }
    Ok(())
}

/// Riemannian tangent algebroid `(TM, g0)` plus a line anchored by `X`.
///
/// Frame `(d_1, .., d_m, sigma)`, metric `diag(g0, 0)`. The cross brackets
/// are `[d_i, sigma] = (d_i X^j) d_j`, which is what makes the anchor a bracket
/// homomorphism when `X` is not constant.
pub fn direct_sum(g0: &[&[&str]], x: &[&str]) -> Result<AlgebroidModel, PresetError> {
    let chart = box_chart(coord_names(x.len()), -6.0, 6.0);
    direct_sum_on(chart, g0, x)
}

pub fn direct_sum_on(chart: Chart, g0: &[&[&str]], x: &[&str]) -> Result<AlgebroidModel, PresetError> {
    let m = chart.dim();
    if x.len() != m || g0.len() != m || g0.iter().any(|r| r.len() != m) {
        return Err(PresetError::Param {
            key: "g0/X".into(),
            msg: format!("need an {m}x{m} metric block and {m} vector field components"),
        });
    }
    let g0 = g0
        .iter()
        .map(|row| row.iter().map(|t| ScalarField::parse(t, &chart)).collect())
        .collect::<Result<Vec<Vec<_>>, _>>()?;
    let xf = x
        .iter()
        .map(|t| ScalarField::parse(t, &chart))
        .collect::<Result<Vec<_>, _>>()?;
    let model = assemble_direct_sum(chart, g0, xf, 0)?;
    let g0_text = g0_param(&model);
    Ok(model.with_meta(meta(
        "direct-sum",
        &[
            ("g0", g0_text),
            ("X", x.join(",")),
        ],
        &[
            "Riemannian tangent algebroid plus a vector-field line",
            "cross brackets [d_i, sigma] = (d_i X^j) d_j; with all cross terms zero the anchor fails to preserve brackets for non-constant X",
        ],
    )))
}

fn g0_param(model: &AlgebroidModel) -> String {
    let m = model.rank() - 1;
    (0..m)
        .map(|a| {
            (0..m)
                .map(|b| model.metric_field(a, b).to_string())
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join(";")
}

/// Shared builder: tangent block of the chart dimension, `extra` abelian
/// generators with zero anchor, then the kernel line anchored by `x`.
fn assemble_direct_sum(
    chart: Chart,
    g0: Vec<Vec<ScalarField>>,
    x: Vec<ScalarField>,
    extra: usize,
) -> Result<AlgebroidModel, PresetError> {
    let n = chart.dim();
    let m = n + extra;
    let k = m + 1;
    check_positive_definite(&chart, &g0)?;
    let anchor: Vec<Vec<ScalarField>> = (0..n)
        .map(|i| {
            let mut row: Vec<ScalarField> = (0..m).map(|a| cst(if a == i { 1.0 } else { 0.0 })).collect();
            row.push(x[i].clone());
            row
        })
        .collect();
    let mut structure = Vec::new();
    for i in 0..n {
        for (j, xj) in x.iter().enumerate() {
            let d = xj.diff(i);
            if d.as_const() != Some(0.0) {
                structure.push(StructureEntry {
                    lower: (i, m),
                    upper: j,
                    field: d,
                });
            }
        }
    }
    let metric: Vec<Vec<ScalarField>> = (0..k)
        .map(|a| {
            (0..k)
                .map(|b| if a < m && b < m { g0[a][b].clone() } else { cst(0.0) })
                .collect()
        })
        .collect();
    let sigma = (0..k).map(|a| cst(if a == m { 1.0 } else { 0.0 })).collect();
    Ok(AlgebroidModel::new(chart, k, anchor, structure, metric, sigma)?)
}

/// Randomized direct sum: rank `k`, chart dimension `n` (`k - 1 >= n`; the
/// surplus generators form an abelian block with zero anchor). The metric
/// block is a diagonally dominant polynomial matrix, `X` a random quadratic
/// vector field. Same seed, same model.
pub fn random(k: usize, n: usize, seed: u64) -> Result<AlgebroidModel, PresetError> {
    if k < 2 || k - 1 < n {
        return Err(PresetError::Param {
            key: "k".into(),
            msg: format!("need k >= 2 and k - 1 >= n, got k = {k}, n = {n}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chart = box_chart(coord_names(n), -1.0, 1.0);
    let names = chart.coords().to_vec();
    let m = k - 1;
    let mut coef = |scale: f64| -> f64 { (rng.gen_range(-1.0..1.0) * scale * 1000.0f64).round() / 1000.0 };
    let var = |i: usize| -> String { names[i % n.max(1)].clone() };

    let mut g0_text = vec![vec![String::new(); m]; m];
    for a in 0..m {
        for b in a..m {
            g0_text[a][b] = if n == 0 {
                if a == b {
                    format!("{}", 2.0 + coef(0.5).abs())
                } else {
                    format!("{}", coef(0.3) / m as f64)
                }
            } else if a == b {
                format!("2 + {}*{}^2", coef(1.0).abs(), var(a))
            } else {
                let s = 0.3 / m as f64;
                format!("{} + {}*{}", coef(s), coef(s), var(a + b))
            };
            g0_text[b][a] = g0_text[a][b].clone();
        }
    }
    let x_text: Vec<String> = (0..n)
        .map(|j| {
            format!(
                "{} + {}*{} + {}*{}*{}",
                coef(1.0),
                coef(1.0),
                var(j + 1),
                coef(0.5),
                var(j),
                var(j + 2)
            )
        })
        .collect();
    let g0 = g0_text
        .iter()
        .map(|r| r.iter().map(|t| ScalarField::parse(t, &chart)).collect())
        .collect::<Result<Vec<Vec<_>>, _>>()?;
    let xf = x_text
        .iter()
        .map(|t| ScalarField::parse(t, &chart))
        .collect::<Result<Vec<_>, _>>()?;
    let model = assemble_direct_sum(chart, g0, xf, m - n)?;
    Ok(model.with_meta(meta(
        "random",
        &[("k", k.to_string()), ("n", n.to_string()), ("seed", seed.to_string())],
        &["random direct sum; surplus generators abelian with zero anchor"],
    )))
}

/// Tangent algebroid on `(x, t)` with the time-dependent metric
/// `diag(1 + t^2, 0)`: Carrollian but not stationary.
pub fn nonstationary() -> AlgebroidModel {
    let chart = Chart::from_bounds(&["x", "t"], &[-1.0, 0.0], &[1.0, 2.0]).expect("valid chart");
    tangent_model(chart, &[&["1 + t^2", "0"], &["0", "0"]], &["0", "1"])
        .expect("well formed")
        .with_meta(meta(
            "nonstationary",
            &[],
            &["metric diag(1 + t^2, 0); the kernel frame d_t is not Killing"],
        ))
}

/// Poincaré half-plane `(x, y)`, `y in [0.5, 2]`, metric `diag(1/y^2, 1/y^2)`.
///
/// The metric is non-degenerate, so this is not a Carrollian model; it is the
/// Riemannian reference case for curvature and Levi-Civita checks. The kernel
/// frame slot holds `d_y` as a placeholder.
pub fn poincare_half_plane() -> AlgebroidModel {
    let chart = Chart::from_bounds(&["x", "y"], &[-1.0, 0.5], &[1.0, 2.0]).expect("valid chart");
    tangent_model(chart, &[&["1/y^2", "0"], &["0", "1/y^2"]], &["0", "1"])
        .expect("well formed")
        .with_meta(meta("poincare-half-plane", &[], &["Riemannian reference model"]))
}

/// Every shipped Carrollian preset with default parameters.
pub fn shipped() -> Vec<(String, AlgebroidModel)> {
    let mut out = Vec::new();
    for name in NAMES {
        let model = by_name(name, &BTreeMap::new()).expect("default presets build");
        out.push((name.to_string(), model));
    }
    out
}

fn param<'a>(params: &'a BTreeMap<String, String>, key: &str) -> Option<&'a str> {
    params.get(key).map(String::as_str)
}

fn parse_num<T: std::str::FromStr>(params: &BTreeMap<String, String>, key: &str, default: T) -> Result<T, PresetError> {
    match param(params, key) {
        None => Ok(default),
        Some(v) => v.trim().parse().map_err(|_| PresetError::Param {
            key: key.into(),
            msg: format!("cannot parse {v:?}"),
        }),
    }
}

fn split_list(v: &str) -> Vec<&str> {
    v.split(',').map(str::trim).collect()
}

/// Build a preset by name. Recognized parameters: `n` (flat-carroll), `X`
/// (comma-separated components), `g0` (rows separated by `;`), `k`, `n`,
/// `seed` (random), and `lo`/`hi` box bounds where a box chart is used.
pub fn by_name(name: &str, params: &BTreeMap<String, String>) -> Result<AlgebroidModel, PresetError> {
    let bounds = |lo: f64, hi: f64| -> Result<(f64, f64), PresetError> {
        Ok((parse_num(params, "lo", lo)?, parse_num(params, "hi", hi)?))
    };
    let mut model = match name {
        "flat-carroll" => {
            let (lo, hi) = bounds(-2.0, 2.0)?;
            flat_carroll_on(parse_num(params, "n", 2usize)?, lo, hi)?
        }
        "vector-field-line" | "rotation" | "interval-flow" => {
            let default = match name {
                "rotation" => "-y,x",
                "interval-flow" => "1-x^2",
                _ => "y,0",
            };
            let x = param(params, "X").unwrap_or(default);
            let (lo, hi) = bounds(-2.0, 2.0)?;
            let mut m = vector_field_line_on(&split_list(x), lo, hi)?;
            m.meta.preset = Some(name.to_string());
            m
        }
        "action-gl2" => action_gl2(),
        "lie-algebra-gl2" => lie_algebra_gl2(),
        "direct-sum" => {
            let x = split_list(param(params, "X").unwrap_or("y,0"));
            let (lo, hi) = bounds(-6.0, 6.0)?;
            let chart = box_chart(coord_names(x.len()), lo, hi);
            let g0_owned: Vec<Vec<String>> = match param(params, "g0") {
                Some(text) => text
                    .split(';')
                    .map(|r| r.split(',').map(|s| s.trim().to_string()).collect())
                    .collect(),
                None => (0..x.len())
                    .map(|i| {
                        (0..x.len())
                            .map(|j| if i == j { "1" } else { "0" }.to_string())
                            .collect()
                    })
                    .collect(),
            };
            let rows: Vec<Vec<&str>> = g0_owned
                .iter()
                .map(|r| r.iter().map(String::as_str).collect())
                .collect();
            let refs: Vec<&[&str]> = rows.iter().map(Vec::as_slice).collect();
            direct_sum_on(chart, &refs, &x)?
        }
        "random" => random(
            parse_num(params, "k", 3usize)?,
            parse_num(params, "n", 2usize)?,
            parse_num(params, "seed", 7u64)?,
        )?,
        "nonstationary" => nonstationary(),
        other => return Err(PresetError::Unknown(other.to_string())),
    };
    for (k, v) in params {
        model.meta.params.entry(k.clone()).or_insert_with(|| v.clone());
    }
    Ok(model)
}
