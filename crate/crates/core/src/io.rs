//! TOML model files.
//!
//! ```toml
//! [chart]
//! coords = ["x", "y"]
//! lo = [-2.0, -2.0]
//! hi = [2.0, 2.0]
//!
//! [algebroid]
//! rank = 1
//! anchor = [["y"], ["0"]]     # anchor[i][a] = rho^i_a
//! structure = []              # {lower = [a, b], upper = c, expr}, 1-based, a < b
//! metric = [["0"]]            # upper triangle is read
//! sigma = ["1"]
//!
//! [connection]                # optional
//! gamma = [{ a = 1, b = 1, c = 1, expr = "0" }]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebroid::{AlgebroidError, AlgebroidModel, ModelMeta, StructureEntry};
use crate::connection::{ConnectionField, GammaEntry};
use crate::fields::{Chart, FieldError, ScalarField};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("malformed model file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("cannot serialize model: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("{context}: {source}")]
    Field { context: String, source: FieldError },
    #[error(transparent)]
    Model(#[from] AlgebroidError),
    #[error("{0}")]
    Index(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartTable {
    pub coords: Vec<String>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureRow {
    pub lower: [usize; 2],
    pub upper: usize,
    pub expr: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebroidTable {
    pub rank: usize,
    pub anchor: Vec<Vec<String>>,
    #[serde(default)]
    pub structure: Vec<StructureRow>,
    pub metric: Vec<Vec<String>>,
    pub sigma: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaRow {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub expr: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionTable {
    #[serde(default)]
    pub gamma: Vec<GammaRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub chart: ChartTable,
    pub algebroid: AlgebroidTable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connection: Option<ConnectionTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<ModelMeta>,
}

fn field(text: &str, chart: &Chart, context: impl Fn() -> String) -> Result<ScalarField, IoError> {
    ScalarField::parse(text, chart).map_err(|source| IoError::Field {
        context: context(),
        source,
    })
}

fn one_based(v: usize, k: usize, what: &str) -> Result<usize, IoError> {
    if v == 0 || v > k {
        return Err(IoError::Index(format!("{what} index {v} out of range 1..={k}")));
    }
    Ok(v - 1)
}

impl ModelFile {
    pub fn from_toml(text: &str) -> Result<Self, IoError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String, IoError> {
        Ok(toml::to_string(self)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, IoError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| IoError::Read {
            path: path.display().to_string(),
            source,
        })?;
        ModelFile::from_toml(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), IoError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()?).map_err(|source| IoError::Write {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn from_model(model: &AlgebroidModel, conn: Option<&[GammaEntry]>) -> Self {
        let chart = model.chart();
        let k = model.rank();
        let s = |f: &ScalarField| f.to_string();
        ModelFile {
            chart: ChartTable {
                coords: chart.coords().to_vec(),
                lo: chart.lo().to_vec(),
                hi: chart.hi().to_vec(),
            },
            algebroid: AlgebroidTable {
                rank: k,
                anchor: model.anchor_rows().iter().map(|r| r.iter().map(s).collect()).collect(),
                structure: model
                    .structure_entries()
                    .iter()
                    .map(|e| StructureRow {
                        lower: [e.lower.0 + 1, e.lower.1 + 1],
                        upper: e.upper + 1,
                        expr: s(&e.field),
                    })
                    .collect(),
                metric: model.metric_rows().iter().map(|r| r.iter().map(s).collect()).collect(),
                sigma: model.sigma_fields().iter().map(s).collect(),
            },
            connection: conn.map(|entries| ConnectionTable {
                gamma: entries
                    .iter()
                    .map(|e| GammaRow {
                        a: e.a + 1,
                        b: e.b + 1,
                        c: e.c + 1,
                        expr: s(&e.field),
                    })
                    .collect(),
            }),
            meta: (model.meta != ModelMeta::default()).then(|| model.meta.clone()),
        }
    }

    pub fn chart(&self) -> Result<Chart, IoError> {
        let c = &self.chart;
        Chart::new(c.coords.clone(), c.lo.clone(), c.hi.clone()).map_err(|source| IoError::Field {
            context: "chart".into(),
            source,
        })
    }

    pub fn model(&self) -> Result<AlgebroidModel, IoError> {
        let chart = self.chart()?;
        let alg = &self.algebroid;
        let k = alg.rank;
        let anchor = alg
            .anchor
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(a, t)| field(t, &chart, || format!("anchor[{}][{}]", i + 1, a + 1)))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let structure = alg
            .structure
            .iter()
            .map(|r| {
                let a = one_based(r.lower[0], k, "structure lower")?;
                let b = one_based(r.lower[1], k, "structure lower")?;
                let c = one_based(r.upper, k, "structure upper")?;
                Ok(StructureEntry {
                    lower: (a, b),
                    upper: c,
                    field: field(&r.expr, &chart, || {
                        format!("structure lower=[{}, {}] upper={}", r.lower[0], r.lower[1], r.upper)
                    })?,
                })
            })
            .collect::<Result<Vec<_>, IoError>>()?;
        let metric = alg
            .metric
            .iter()
            .enumerate()
            .map(|(a, row)| {
                row.iter()
                    .enumerate()
                    .map(|(b, t)| {
                        if b < a {
                            // The lower triangle is not read.
                            Ok(ScalarField::zero())
                        } else {
                            field(t, &chart, || format!("metric[{}][{}]", a + 1, b + 1))
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let sigma = alg
            .sigma
            .iter()
            .enumerate()
            .map(|(a, t)| field(t, &chart, || format!("sigma[{}]", a + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        let model = AlgebroidModel::new(chart, k, anchor, structure, metric, sigma)?;
        Ok(match &self.meta {
            Some(m) => model.with_meta(m.clone()),
            None => model,
        })
    }

    /// Connection table, if present.
    pub fn connection(&self, model: &AlgebroidModel) -> Result<Option<ConnectionField>, IoError> {
        let Some(table) = &self.connection else {
            return Ok(None);
        };
        let k = model.rank();
        let mut seen = std::collections::BTreeSet::new();
        let mut entries = Vec::with_capacity(table.gamma.len());
        for r in &table.gamma {
            let (a, b, c) = (
                one_based(r.a, k, "gamma a")?,
                one_based(r.b, k, "gamma b")?,
                one_based(r.c, k, "gamma c")?,
            );
            if !seen.insert((a, b, c)) {
                return Err(IoError::Index(format!(
                    "duplicate gamma entry a={} b={} c={}",
                    r.a, r.b, r.c
                )));
            }
            entries.push(GammaEntry {
                a,
                b,
                c,
                field: field(&r.expr, model.chart(), || {
                    format!("gamma a={} b={} c={}", r.a, r.b, r.c)
                })?,
            });
        }
        Ok(Some(ConnectionField::Table(entries)))
    }
}

/// Load a model and its optional connection table.
pub fn load(path: impl AsRef<Path>) -> Result<(AlgebroidModel, Option<ConnectionField>), IoError> {
    let file = ModelFile::read(path)?;
    let model = file.model()?;
    let conn = file.connection(&model)?;
    Ok((model, conn))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::sampling::Sampling;

    #[test]
    fn presets_round_trip() {
        for (name, model) in presets::shipped() {
            let text = ModelFile::from_model(&model, None).to_toml().unwrap();
            let back = ModelFile::from_toml(&text).unwrap().model().unwrap();
            assert_eq!(back.meta, model.meta, "{name}");
            for p in Sampling::new(8, 3).points(model.chart()) {
                let a = model.frame_at(&p).unwrap();
                let b = back.frame_at(&p).unwrap();
                for (x, y) in a
                    .metric
                    .iter()
                    .chain(&a.structure)
                    .chain(&a.anchor)
                    .zip(b.metric.iter().chain(&b.structure).chain(&b.anchor))
                {
                    assert!((x - y).abs() <= 1e-14 * (1.0 + x.abs()), "{name}");
                }
            }
        }
    }

    #[test]
    fn reads_schema() {
        let text = r#"
            [chart]
            coords = ["x", "t"]
            lo = [-1.0, 0.0]
            hi = [1.0, 2.0]

            [algebroid]
            rank = 2
            anchor = [["1", "0"], ["0", "1"]]
            metric = [["1 + t^2", "0"], ["junk is ignored?", "0"]]
            sigma = ["0", "1"]

            [connection]
            gamma = [{ a = 2, b = 1, c = 1, expr = "t" }]
        "#;
        let file = ModelFile::from_toml(text).unwrap();
        let model = file.model().unwrap();
        assert_eq!(model.frame_at(&[0.0, 1.0]).unwrap().g(0, 0), &2.0);
        let conn = file.connection(&model).unwrap().unwrap();
        let g = conn.values(&model, &[0.0, 1.5]).unwrap();
        assert_eq!(g[crate::connection::idx(2, 0, 1, 0)], 1.5);
    }

    #[test]
    fn rejects_bad_indices() {
        let base = r#"
            [chart]
            coords = ["x"]
            lo = [0.0]
            hi = [1.0]
            [algebroid]
            rank = 2
            anchor = [["1", "0"]]
            metric = [["1", "0"], ["0", "0"]]
            sigma = ["0", "1"]
        "#;
        let bad = format!("{base}structure = [{{ lower = [2, 1], upper = 1, expr = \"1\" }}]");
        assert!(ModelFile::from_toml(&bad).unwrap().model().is_err());
        let bad = format!("{base}structure = [{{ lower = [1, 3], upper = 1, expr = \"1\" }}]");
        assert!(matches!(
            ModelFile::from_toml(&bad).unwrap().model(),
            Err(IoError::Index(_))
        ));
        let bad = format!("{base}\n[connection]\ngamma = [{{ a = 0, b = 1, c = 1, expr = \"1\" }}]");
        let file = ModelFile::from_toml(&bad).unwrap();
        assert!(file.connection(&file.model().unwrap()).is_err());
        assert!(ModelFile::from_toml("[chart]\ncoords = 3").is_err());
        let bad = base.replace("rank = 2", "rank = 2\nextra = 1");
        assert!(ModelFile::from_toml(&bad).is_err());
    }
}
