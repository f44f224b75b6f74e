//! On-disk formats and I/O helpers.

use std::path::Path;

use anyhow::{bail, Context};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toda_kdq::kdq::PseudoPositiveMeasure;
use toda_kdq::moment::DiscreteMeasure;
use toda_kdq::toda::TodaStateFlaschka;

use crate::Options;

pub const SCHEMA: u32 = 1;

/// `{"schema": 1, "a": [...], "b": [...]}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct StateFile {
    pub schema: u32,
    #[serde(flatten)]
    pub state: TodaStateFlaschka,
}

#[derive(Debug, Deserialize)]
pub struct PointSpec {
    pub zeta: [f64; 2],
    pub theta: Vec<f64>,
}

#[derive(Debug, Deserialize)]
pub struct TransformFile {
    pub schema: u32,
    pub measure: PseudoPositiveMeasure,
    pub points: Vec<PointSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum NevanlinnaFile {
    OneDim {
        schema: u32,
        measure: DiscreteMeasure,
        order: usize,
        #[serde(default = "default_y")]
        y: Vec<f64>,
    },
    Kdq {
        schema: u32,
        kdq_measure: PseudoPositiveMeasure,
        k: usize,
        ell: usize,
        order: usize,
        #[serde(default = "default_moduli")]
        moduli: Vec<f64>,
    },
}

fn default_y() -> Vec<f64> {
    vec![10.0, 100.0, 1000.0]
}

fn default_moduli() -> Vec<f64> {
    vec![4.0, 8.0, 16.0]
}

/// JSON output wrapper carrying the schema version.
#[derive(Serialize)]
pub struct Versioned<'a, T: Serialize> {
    pub schema: u32,
    #[serde(flatten)]
    pub body: &'a T,
}

pub fn check_schema(schema: u32) -> anyhow::Result<()> {
    if schema != SCHEMA {
        bail!("unsupported schema version {schema} (expected {SCHEMA})");
    }
    Ok(())
}

pub fn parse<T: DeserializeOwned>(text: &str, what: &str) -> anyhow::Result<T> {
    serde_json::from_str(text).with_context(|| format!("parsing {what}"))
}

pub fn read_input<T: DeserializeOwned>(opts: &Options) -> anyhow::Result<T> {
    let path = opts.input.as_deref().context("--input is required for this command")?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text, &path.display().to_string())
}

pub fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

/// `0, dt, 2dt, …` ending exactly at `t_final`.
pub fn time_grid(t_final: f64, dt: f64) -> Vec<f64> {
    let steps = (t_final / dt - 1e-9).ceil().max(0.0) as usize;
    (0..=steps).map(|k| if k == steps { t_final } else { k as f64 * dt }).collect()
}
