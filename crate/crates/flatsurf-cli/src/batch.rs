//! Experiment batching: a text config mirroring the flag names, expanded as a
//! cartesian product over comma-separated values. Rows run concurrently but
//! are emitted in input order; failures are flagged per row and the batch
//! continues.

use anyhow::{anyhow, bail, Context, Result};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Clone, Debug)]
struct Config {
    command: String,
    values: BTreeMap<String, Vec<String>>,
}

fn parse_config(text: &str) -> Result<Config> {
    let mut command = None;
    let mut values = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key = value", lineno + 1))?;
        let key = key.trim().to_string();
        let vals: Vec<String> = value.split(',').map(|v| v.trim().to_string()).collect();
        if key == "command" {
            command = Some(vals[0].clone());
        } else {
            values.insert(key, vals);
        }
    }
    Ok(Config {
        command: command.ok_or_else(|| anyhow!("config is missing `command`"))?,
        values,
    })
}

fn product(values: &BTreeMap<String, Vec<String>>) -> Vec<BTreeMap<String, String>> {
    let mut rows = vec![BTreeMap::new()];
    for (key, vals) in values {
        let mut next = Vec::with_capacity(rows.len() * vals.len());
        for row in &rows {
            for v in vals {
                let mut r = row.clone();
                r.insert(key.clone(), v.clone());
                next.push(r);
            }
        }
        rows = next;
    }
    rows
}

/// One row of an `estimate` batch.
fn run_estimate_row(row: &BTreeMap<String, String>) -> Result<String> {
    let qs = row.get("qs").ok_or_else(|| anyhow!("missing qs"))?;
    let r: f64 = row
        .get("r")
        .ok_or_else(|| anyhow!("missing r"))?
        .parse()
        .context("parsing r")?;
    let alpha = row.get("alpha").ok_or_else(|| anyhow!("missing alpha"))?;
    let beta = row.get("beta").ok_or_else(|| anyhow!("missing beta"))?;
    let s = parse_surface_file(qs)?.normalize_area();
    let a = parse_curve_file(&s, alpha)?;
    let b = parse_curve_file(&s, beta)?;
    let rep = flatsurf::ergodic::main_estimate(&s, r, &a, &b).map_err(|e| anyhow!("{e}"))?;
    Ok(format!(
        "{r},{},{},{},{},{},0",
        rep.predicted, rep.actual_lo, rep.actual_hi, rep.residual, rep.normalized_residual
    ))
}

/// One row of an `equidist` batch.
fn run_equidist_row(row: &BTreeMap<String, String>) -> Result<String> {
    let surface = row.get("surface").ok_or_else(|| anyhow!("missing surface"))?;
    let theta: f64 = row
        .get("theta")
        .map(|v| v.parse())
        .transpose()
        .context("parsing theta")?
        .unwrap_or(0.0);
    let horizon: f64 = row
        .get("T")
        .ok_or_else(|| anyhow!("missing T"))?
        .parse()
        .context("parsing T")?;
    let seed: u64 = row
        .get("seed")
        .map(|v| v.parse())
        .transpose()
        .context("parsing seed")?
        .unwrap_or(1);
    let s0 = parse_surface_file(surface)?;
    let rotated = flatsurf::linear::apply_matrix(
        &s0,
        &flatsurf::linear::rotation_matrix(theta),
    )
    .map_err(|e| anyhow!("{e}"))?
    .normalize_area();
    let gs = flatsurf::ergodic::random_nonhorizontal_geodesics(&rotated, 1, seed);
    let g = gs.first().ok_or_else(|| anyhow!("no curve for seed"))?;
    let lm = flatsurf::saddle::l_min(&rotated);
    let collar = flatsurf::collar::build_collar(&rotated, g, lm).map_err(|e| anyhow!("{e}"))?;
    let b = flatsurf::collar::bump_function(&collar, (lm.min(1.0) / 8.0) * 0.5, 0)
        .map_err(|e| anyhow!("{e}"))?;
    let gamma = crate::horizontal_segment(&rotated, horizon.exp(), seed)?;
    let rep = flatsurf::ergodic::equidistribution_error(&rotated, &b, &gamma, 4.0)
        .map_err(|e| anyhow!("{e}"))?;
    let predicted = rep.length * rep.surface_integral;
    Ok(format!(
        "{horizon},{predicted},{},{},{},{},{seed}",
        rep.seg_integral, rep.seg_integral, rep.error, rep.normalized_error
    ))
}

fn parse_surface_file(path: &str) -> Result<flatsurf::HalfTranslationSurface> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
    flatsurf::io::parse_surface(&text).map_err(|e| anyhow!("parsing {path}: {e}"))
}

fn parse_curve_file(
    s: &flatsurf::HalfTranslationSurface,
    path: &str,
) -> Result<flatsurf::geodesic::CurveClass> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
    let word = flatsurf::io::parse_curve(&text).map_err(|e| anyhow!("parsing {path}: {e}"))?;
    flatsurf::geodesic::CurveClass::new(s, word).map_err(|e| anyhow!("{e}"))
}

pub fn run_batch(config_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config_path)
        .with_context(|| format!("reading config {}", config_path.display()))?;
    let config = parse_config(&text)?;
    let rows = product(&config.values);
    let runner: fn(&BTreeMap<String, String>) -> Result<String> = match config.command.as_str() {
        "estimate" => run_estimate_row,
        "equidist" => run_equidist_row,
        other => bail!("unknown batch command `{other}`"),
    };
    let header = match config.command.as_str() {
        "estimate" => "index,status,r,predicted,actual_lo,actual_hi,residual,normalized_residual,seed",
        _ => "index,status,T,predicted,actual_lo,actual_hi,residual,normalized_residual,seed",
    };
    println!("{header}");
    // Rows execute concurrently; output is ordered by input index.
    let results: Vec<(usize, Result<String>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = rows
            .iter()
            .enumerate()
            .map(|(i, row)| scope.spawn(move || (i, runner(row))))
            .collect();
        let mut results: Vec<(usize, Result<String>)> =
            handles.into_iter().map(|h| h.join().unwrap()).collect();
        results.sort_by_key(|(i, _)| *i);
        results
    });
    for (i, res) in results {
        match res {
            Ok(fields) => println!("{i},ok,{fields}"),
            Err(e) => println!("{i},failed,{e:#}"),
        }
    }
    Ok(())
}
