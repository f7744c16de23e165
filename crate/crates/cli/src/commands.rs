use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use carroll_core::algebroid::{self, is_stationary, AlgebroidModel};
use carroll_core::connection::{
    self, bianchi_residuals, diagnose, idx, make_carrollian, make_frame_parallel_carrollian, make_l_compatible,
    make_torsion_free_carrollian, minimal_direct_sum_connection, ConnectionError, ConnectionField, TorsionFreeOutcome,
};
use carroll_core::distribution::{leaf_census, LeafClass, LeafParams};
use carroll_core::dynamics::{classify_initial, integrate_apath, DynamicsError, ForceMode, ForceSection};
use carroll_core::io::ModelFile;
use carroll_core::presets;
use carroll_core::sampling::Sampling;
use serde_json::json;

use crate::report::{csv_text, file_hash, stdout, write_file, CliError, CliResult, Code, Report};
use crate::{Base, ForceKind, Method};

fn load(path: &Path) -> Result<(AlgebroidModel, ModelFile, String), CliError> {
    let hash = file_hash(path)?;
    let file = ModelFile::read(path).map_err(CliError::input)?;
    let model = file.model().map_err(CliError::input)?;
    Ok((model, file, hash))
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>, CliError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::input(format!("bad {what} component {s:?}: {e}")))
        })
        .collect()
}

/// `AxB...` or a single count applied to every axis.
fn parse_grid(text: &str, dim: usize) -> Result<Vec<usize>, CliError> {
    let parts = text
        .split(['x', 'X'])
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| CliError::input(format!("bad grid {text:?}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    match parts.len() {
        1 => Ok(vec![parts[0]; dim]),
        n if n == dim => Ok(parts),
        n => Err(CliError::input(format!("grid {text:?} has {n} axes, chart has {dim}"))),
    }
}

pub fn validate(path: &Path, samples: usize, seed: u64, tol: f64) -> CliResult {
    let (model, _, hash) = load(path)?;
    let sampling = Sampling::new(samples, seed);
    let r = algebroid::validate(&model, sampling, tol);
    let mut rep = Report::new("validate", Some(hash));
    rep.set("parameters", json!({ "samples": samples, "seed": seed, "tol": tol }));
    rep.set("checks", &r.checks);
    if !r.errors.is_empty() {
        rep.set("errors", &r.errors);
    }
    rep.set("pass", r.pass);
    rep.emit(None)?;
    Ok(if r.pass { Code::Pass } else { Code::Fail })
}

pub fn leaves(path: &Path, grid: &str, eps: Option<f64>, out: Option<&Path>) -> CliResult {
    let (model, _, hash) = load(path)?;
    let chart = model.chart();
    let grid = parse_grid(grid, chart.dim())?;
    let mut params = LeafParams::for_chart(chart);
    if let Some(e) = eps {
        params.eps = e;
    }
    let census = leaf_census(&model, &grid, &params).map_err(CliError::input)?;
    if let Some(p) = out {
        let mut header: Vec<String> = chart.coords().to_vec();
        header.extend(["class", "forward_event", "backward_event", "arclength"].map(String::from));
        let ev = |e: Option<carroll_core::distribution::LeafEvent>| e.map_or("", |e| e.name()).to_string();
        let rows: Vec<Vec<String>> = census
            .cells
            .iter()
            .map(|c| {
                let mut r: Vec<String> = c.seed.iter().map(|v| v.to_string()).collect();
                r.push(c.class.name().into());
                r.push(ev(c.forward));
                r.push(ev(c.backward));
                r.push(c.arclength.to_string());
                r
            })
            .collect();
        write_file(p, &csv_text(&header, &rows)?)?;
    }
    let counts: BTreeMap<&str, usize> = LeafClass::ALL.iter().map(|c| (c.name(), census.count(*c))).collect();
    let mut rep = Report::new("leaves", Some(hash));
    rep.set("parameters", json!({ "grid": grid, "leaf": params }));
    rep.set("cells", census.cells.len());
    rep.set("counts", counts);
    rep.emit(None)?;
    Ok(Code::Pass)
}

pub struct ConnectArgs {
    pub path: PathBuf,
    pub method: Method,
    pub base: Base,
    pub out: Option<PathBuf>,
    pub emit_gamma: Option<PathBuf>,
    pub gamma_grid: String,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub bianchi_samples: usize,
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::LCompat => "l-compat",
        Method::Carrollian => "carrollian",
        Method::FrameParallel => "frame-parallel",
        Method::TorsionFree => "torsion-free",
        Method::MinimalDirectSum => "minimal-direct-sum",
    }
}

fn connection_error(e: ConnectionError) -> CliError {
    match e {
        ConnectionError::Inconsistent { .. } => CliError::new(Code::Infeasible, e),
        other => CliError::input(other),
    }
}

enum Built {
    Connection(ConnectionField),
    Infeasible(TorsionFreeOutcome),
}

fn build(model: &AlgebroidModel, method: Method, base: ConnectionField) -> Result<Built, CliError> {
    let conn = match method {
        Method::LCompat => make_l_compatible(model, base),
        Method::Carrollian => make_carrollian(model, base),
        Method::FrameParallel => make_frame_parallel_carrollian(model, base),
        Method::MinimalDirectSum => minimal_direct_sum_connection(model),
        Method::TorsionFree => {
            return match make_torsion_free_carrollian(model, base).map_err(connection_error)? {
                TorsionFreeOutcome::Connection(c) => Ok(Built::Connection(c)),
                other => Ok(Built::Infeasible(other)),
            }
        }
    };
    conn.map(Built::Connection).map_err(connection_error)
}

fn base_connection(file: &ModelFile, model: &AlgebroidModel, base: Base) -> Result<ConnectionField, CliError> {
    match base {
        Base::Zero => Ok(ConnectionField::Zero),
        Base::File => file
            .connection(model)
            .map_err(CliError::input)?
            .ok_or_else(|| CliError::input("model file has no [connection] table")),
    }
}

fn gamma_rows(model: &AlgebroidModel, conn: &ConnectionField, grid: &[usize]) -> Result<String, CliError> {
    let chart = model.chart();
    let k = model.rank();
    let mut header: Vec<String> = chart.coords().to_vec();
    header.extend(["a", "b", "c", "gamma"].map(String::from));
    let mut points = vec![Vec::new()];
    for (i, &nodes) in grid.iter().enumerate() {
        if nodes == 0 {
            return Err(CliError::input("gamma grid needs at least one node per axis"));
        }
        let (lo, hi) = (chart.lo()[i], chart.hi()[i]);
        let coord = |j: usize| {
            if nodes == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * j as f64 / (nodes - 1) as f64
            }
        };
        points = points
            .into_iter()
            .flat_map(|p: Vec<f64>| {
                (0..nodes).map(move |j| {
                    let mut q = p.clone();
                    q.push(coord(j));
                    q
                })
            })
            .collect();
    }
    let mut rows = Vec::new();
    for p in &points {
        let g = conn.values(model, p).map_err(connection_error)?;
        for a in 0..k {
            for b in 0..k {
                for c in 0..k {
                    let mut r: Vec<String> = p.iter().map(|v| v.to_string()).collect();
                    r.extend([a + 1, b + 1, c + 1].map(|v| v.to_string()));
                    r.push(g[idx(k, c, a, b)].to_string());
                    rows.push(r);
                }
            }
        }
    }
    csv_text(&header, &rows)
}

pub fn connect(args: &ConnectArgs) -> CliResult {
    let (model, file, hash) = load(&args.path)?;
    let base = base_connection(&file, &model, args.base)?;
    let sampling = Sampling::new(args.samples, args.seed);
    let mut rep = Report::new("connect", Some(hash));
    rep.set(
        "parameters",
        json!({
            "method": method_name(args.method),
            "base": if args.base == Base::Zero { "zero" } else { "file" },
            "samples": args.samples,
            "seed": args.seed,
            "tol": args.tol,
            "bianchi_samples": args.bianchi_samples,
            "gauge": connection::GAUGE,
        }),
    );
    let conn = match build(&model, args.method, base)? {
        Built::Connection(c) => c,
        Built::Infeasible(TorsionFreeOutcome::Infeasible {
            point,
            solve_residual,
            stationarity_residual,
            stationary,
        }) => {
            rep.set("feasible", false);
            rep.set(
                "infeasibility",
                json!({
                    "point": point,
                    "solve_residual": solve_residual,
                    "stationarity_residual": stationarity_residual,
                    "stationary": stationary,
                }),
            );
            rep.set("pass", false);
            rep.emit(args.out.as_deref())?;
            return Ok(Code::Infeasible);
        }
        Built::Infeasible(TorsionFreeOutcome::Connection(_)) => unreachable!("feasible outcomes are connections"),
    };
    let d = diagnose(&model, &conn, sampling).map_err(connection_error)?;
    let mut bianchi = (0.0f64, 0.0f64);
    for p in Sampling::new(args.bianchi_samples, args.seed).points(model.chart()) {
        let b = bianchi_residuals(&model, &conn, &p).map_err(connection_error)?;
        bianchi = (bianchi.0.max(b.algebraic), bianchi.1.max(b.differential));
    }
    let mut checks = vec![("l_compatibility", d.l_compatibility)];
    match args.method {
        Method::LCompat => {}
        Method::Carrollian | Method::MinimalDirectSum => checks.push(("nonmetricity", d.nonmetricity)),
        Method::FrameParallel => {
            checks.push(("nonmetricity", d.nonmetricity));
            checks.push(("nabla_sigma", d.nabla_sigma));
        }
        Method::TorsionFree => {
            checks.push(("nonmetricity", d.nonmetricity));
            checks.push(("torsion", d.torsion));
        }
    }
    let pass = checks.iter().all(|(_, v)| *v <= args.tol);
    let stationary = is_stationary(&model, sampling, 1e-8).map_err(CliError::input)?;
    rep.set("feasible", true);
    rep.set("connection", conn.describe());
    rep.set(
        "residuals",
        json!({
            "nonmetricity": d.nonmetricity,
            "l_compatibility": d.l_compatibility,
            "nabla_sigma": d.nabla_sigma,
            "torsion": d.torsion,
            "bianchi_algebraic": bianchi.0,
            "bianchi_differential": bianchi.1,
        }),
    );
    rep.set(
        "checked",
        checks
            .iter()
            .map(|(n, v)| (n.to_string(), *v <= args.tol))
            .collect::<BTreeMap<_, _>>(),
    );
    rep.set("stationarity_residual", stationary.residual);
    rep.set("pass", pass);
    if let Some(p) = &args.emit_gamma {
        let grid = parse_grid(&args.gamma_grid, model.dim())?;
        write_file(p, &gamma_rows(&model, &conn, &grid)?)?;
    }
    rep.emit(args.out.as_deref())?;
    Ok(if pass { Code::Pass } else { Code::Fail })
}

pub struct GeodesicArgs {
    pub path: PathBuf,
    pub connection: String,
    pub start: String,
    pub alpha: String,
    pub force: String,
    pub force_mode: ForceKind,
    pub t_end: f64,
    pub dt: f64,
    pub tol: f64,
    pub out: Option<PathBuf>,
}

fn dynamics_error(e: DynamicsError) -> CliError {
    match e {
        DynamicsError::Invalid(_) | DynamicsError::OutsideChart(_) | DynamicsError::DegenerateInitial => {
            CliError::input(e)
        }
        other => CliError::new(Code::Integration, other),
    }
}

pub fn geodesic(args: &GeodesicArgs) -> CliResult {
    let (model, file, hash) = load(&args.path)?;
    let mut rep = Report::new("geodesic", Some(hash));
    let conn = match args.connection.as_str() {
        "zero" => ConnectionField::Zero,
        "file" => base_connection(&file, &model, Base::File)?,
        other => {
            let method = <Method as clap::ValueEnum>::from_str(other, false).map_err(|_| {
                CliError::input(format!(
                    "unknown connection {other:?}; use zero, file, l-compat, carrollian, frame-parallel, torsion-free or minimal-direct-sum"
                ))
            })?;
            match build(&model, method, ConnectionField::Zero)? {
                Built::Connection(c) => c,
                Built::Infeasible(_) => {
                    return Err(CliError::new(
                        Code::Infeasible,
                        "no torsion-free Carrollian connection exists on this model",
                    ))
                }
            }
        }
    };
    let start = parse_list(&args.start, "start")?;
    let alpha = parse_list(&args.alpha, "alpha")?;
    let force = match args.force.trim() {
        "none" => None,
        text => {
            let comps: Vec<&str> = text.split(',').map(str::trim).collect();
            let mode = match args.force_mode {
                ForceKind::Particle => ForceMode::ParticleForce,
                ForceKind::General => ForceMode::GeneralForce,
            };
            Some(ForceSection::parse(&model, &comps, mode).map_err(CliError::input)?)
        }
    };
    if start.len() != model.dim() {
        return Err(CliError::input(format!(
            "start has {} coordinates, chart has {}",
            start.len(),
            model.dim()
        )));
    }
    if !model.chart().contains(&start) {
        return Err(CliError::input(format!("start {start:?} is outside the chart")));
    }
    let class = classify_initial(&model, &alpha, &start, args.tol).map_err(dynamics_error)?;
    let traj =
        integrate_apath(&model, &conn, &start, &alpha, force.as_ref(), args.t_end, args.dt).map_err(dynamics_error)?;

    let mut header = vec!["t".to_string()];
    header.extend(model.chart().coords().iter().cloned());
    header.extend((1..=model.rank()).map(|a| format!("alpha{a}")));
    header.extend(["speed", "misalignment"].map(String::from));
    let rows: Vec<Vec<String>> = (0..traj.times.len())
        .map(|j| {
            std::iter::once(traj.times[j])
                .chain(traj.gamma[j].iter().copied())
                .chain(traj.alpha[j].iter().copied())
                .chain([traj.speed[j], traj.misalignment[j]])
                .map(|v| v.to_string())
                .collect()
        })
        .collect();
    let csv = csv_text(&header, &rows)?;
    match &args.out {
        Some(p) => write_file(p, &csv)?,
        None => stdout(&csv),
    }

    rep.set(
        "parameters",
        json!({
            "connection": args.connection,
            "start": start,
            "alpha": alpha,
            "force": traj.force,
            "t": args.t_end,
            "dt": args.dt,
            "tol": args.tol,
        }),
    );
    rep.set("classification", class);
    rep.set("event", traj.event);
    rep.set("samples", traj.times.len());
    rep.set("end", traj.end());
    rep.set("end_alpha", traj.end_alpha());
    rep.set("max_misalignment", traj.max_misalignment());
    rep.set("substeps", traj.substeps);
    rep.set("converged", traj.converged);
    stdout(&(rep.line() + "\n"));
    Ok(Code::Pass)
}

pub fn preset(name: &str, params: &[String], emit: Option<&Path>) -> CliResult {
    let mut map = BTreeMap::new();
    for p in params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| CliError::input(format!("parameter {p:?} is not key=value")))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    let model = presets::by_name(name, &map).map_err(CliError::input)?;
    let text = ModelFile::from_model(&model, None).to_toml().map_err(CliError::input)?;
    match emit {
        Some(p) => write_file(p, &text)?,
        None => stdout(&text),
    }
    Ok(Code::Pass)
}
