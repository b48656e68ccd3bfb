#![allow(dead_code)]

use std::path::PathBuf;

use iga_derham::tmesh::{restore_suitability, TMeshLayout, Tiling};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn layout(name: &str) -> TMeshLayout {
    let text = std::fs::read_to_string(fixtures().join(name)).unwrap();
    let l: TMeshLayout = serde_json::from_str(&text).unwrap();
    l.validate().unwrap();
    l
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A uniform grid with a few randomly chosen faces split, made strongly
/// analysis-suitable for `degree`.
pub fn random_suitable_tiling(rng: &mut ChaCha8Rng, degree: usize) -> Tiling {
    let n = rng.gen_range(3..=5);
    let mut t = Tiling::uniform(n, n);
    for _ in 0..rng.gen_range(1..=3) {
        let f = t.faces[rng.gen_range(0..t.faces.len())];
        t.subdivide(|g| *g == f);
    }
    restore_suitability(&t, [degree, degree], 50).unwrap()
}

/// Central fourth-order difference of `f` along coordinate `k`.
pub fn diff4(f: &dyn Fn(&[f64]) -> f64, x: &[f64], k: usize, h: f64) -> f64 {
    let at = |s: f64| {
        let mut y = x.to_vec();
        y[k] += s * h;
        f(&y)
    };
    (-at(2.0) + 8.0 * at(1.0) - 8.0 * at(-1.0) + at(-2.0)) / (12.0 * h)
}

/// Eigenvalues `m² + n²` of the square `(0,π)²` below `limit`, with the
/// number of index pairs giving each value.
pub fn square_spectrum(limit: usize) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    for v in 1..limit {
        let count = (0..=v).flat_map(|m| (0..=v).map(move |n| (m, n))).filter(|&(m, n)| m * m + n * n == v).count();
        if count > 0 {
            out.push((v as f64, count));
        }
    }
    out
}

/// Checks that every computed eigenvalue below `cutoff` lies within `tol`
/// of an exact one and that each exact value below `cutoff` is hit exactly
/// as often as its multiplicity. Returns a description of the first
/// mismatch.
pub fn square_multiplicities(nonzero: &[f64], cutoff: f64, tol: f64) -> Result<(), String> {
    let exact = square_spectrum(cutoff.ceil() as usize);
    let computed: Vec<f64> = nonzero.iter().copied().filter(|&v| v < cutoff).collect();
    for &v in &computed {
        if !exact.iter().any(|&(e, _)| (v - e).abs() <= tol) {
            return Err(format!("{v} is not within {tol} of any m²+n²"));
        }
    }
    for &(e, mult) in exact.iter().filter(|&&(e, _)| e < cutoff) {
        let hits = computed.iter().filter(|&&v| (v - e).abs() <= tol).count();
        if hits != mult {
            return Err(format!("{e} found {hits} times, expected {mult}"));
        }
    }
    Ok(())
}

/// `a` agrees with `b` once both are rounded to `digits` significant
/// digits, allowing one unit of the last place for rounding ties.
pub fn significant_match(a: f64, b: f64, digits: i32) -> bool {
    let scale = 10f64.powi(b.abs().log10().floor() as i32 - digits + 1);
    ((a / scale).round() - (b / scale).round()).abs() <= 1.0
}
