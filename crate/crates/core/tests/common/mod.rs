//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

/// Wilson-Hilferty approximation of the chi-square 99th percentile.
pub fn chi2_critical_p01(df: usize) -> f64 {
    let df = df as f64;
    let z = 2.326_347_874_040_841; // standard normal 99th percentile
    let t = 2.0 / (9.0 * df);
    df * (1.0 - t + z * t.sqrt()).powi(3)
}

/// Least-squares line fit; returns (slope, intercept, r_squared).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    (slope, intercept, r2)
}

/// Relative error with a small absolute floor, for gradient comparisons.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Write interactions as a `user,item[,domain]` CSV and return its path.
pub fn write_interactions_csv(
    dir: &Path,
    name: &str,
    rows: &[fmpair_core::data::Interaction],
    with_domain: bool,
) -> PathBuf {
    use std::fmt::Write as _;
    let mut text = String::new();
    for it in rows {
        if with_domain {
            let _ = writeln!(
                text,
                "{},{},{}",
                it.user,
                it.item,
                it.domain.as_deref().unwrap_or("")
            );
        } else {
            let _ = writeln!(text, "{},{}", it.user, it.item);
        }
    }
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}
