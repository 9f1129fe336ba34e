//! TOML experiment configuration: schema check with full diagnostics, default
//! resolution, and idempotent emission.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

/// Fully resolved parameter set; every field has a concrete value so the
/// manifest never hides a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub dim: usize,
    pub grid_n: usize,
    pub box_side: f64,
    pub seeds: Vec<u64>,
    pub phi: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    pub radius: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius_max: Option<f64>,
    pub min_gap: f64,
    pub delta: f64,
    pub kappa_ladder: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub eps_ladder: Vec<f64>,
    pub cell_n: usize,
    pub kappa: f64,
    pub force: String,
    pub force_amplitude: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub rho_count: usize,
    pub resolution: usize,
    pub rs: Vec<f64>,
    pub dims: Vec<usize>,
    pub kinds: Vec<String>,
}

const KEYS: &[&str] = &[
    "dim",
    "grid_n",
    "box_side",
    "seeds",
    "phi",
    "count",
    "radius",
    "radius_max",
    "min_gap",
    "delta",
    "kappa_ladder",
    "tol",
    "max_iter",
    "eps_ladder",
    "cell_n",
    "kappa",
    "force",
    "force_amplitude",
    "rho_min",
    "rho_max",
    "rho_count",
    "resolution",
    "rs",
    "dims",
    "kinds",
];

const KIND_LABELS: &[&str] = &["grad_w", "hess_w", "weighted_hess_w"];

fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn suggest(key: &str) -> Option<&'static str> {
    KEYS.iter().copied().min_by_key(|k| edit_distance(key, k)).filter(|k| edit_distance(key, k) <= 2)
}

fn get_f64(table: &toml::Table, key: &str, errs: &mut Vec<String>) -> Option<f64> {
    match table.get(key) {
        None => None,
        Some(v) => match v.as_float().or_else(|| v.as_integer().map(|i| i as f64)) {
            Some(x) => Some(x),
            None => {
                errs.push(format!("`{key}`: expected a number, got {v}"));
                None
            }
        },
    }
}

fn get_usize(table: &toml::Table, key: &str, errs: &mut Vec<String>) -> Option<usize> {
    match table.get(key) {
        None => None,
        Some(v) => match v.as_integer().filter(|&i| i >= 0) {
            Some(i) => Some(i as usize),
            None => {
                errs.push(format!("`{key}`: expected a nonnegative integer, got {v}"));
                None
            }
        },
    }
}

fn get_str(table: &toml::Table, key: &str, errs: &mut Vec<String>) -> Option<String> {
    match table.get(key) {
        None => None,
        Some(v) => match v.as_str() {
            Some(s) => Some(s.to_string()),
            None => {
                errs.push(format!("`{key}`: expected a string, got {v}"));
                None
            }
        },
    }
}

fn get_vec<T, F>(table: &toml::Table, key: &str, errs: &mut Vec<String>, conv: F) -> Option<Vec<T>>
where
    F: Fn(&toml::Value) -> Option<T>,
{
    match table.get(key) {
        None => None,
        Some(toml::Value::Array(arr)) => {
            let vals: Option<Vec<T>> = arr.iter().map(&conv).collect();
            if vals.is_none() {
                errs.push(format!("`{key}`: array has an element of the wrong type"));
            }
            vals
        }
        Some(v) => {
            errs.push(format!("`{key}`: expected an array, got {v}"));
            None
        }
    }
}

fn num(v: &toml::Value) -> Option<f64> {
    v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
}

/// Parses, checks the schema, and fills defaults. All violations are
/// collected and reported together.
pub fn validate(text: &str) -> Result<Resolved> {
    let table: toml::Table = match text.parse() {
        Ok(t) => t,
        Err(e) => bail!("config is not valid TOML: {e}"),
    };
    let mut errs: Vec<String> = Vec::new();

    for key in table.keys() {
        if !KEYS.contains(&key.as_str()) {
            match suggest(key) {
                Some(s) => errs.push(format!("unknown key `{key}`; did you mean `{s}`?")),
                None => errs.push(format!("unknown key `{key}`")),
            }
        }
    }

    let dim = get_usize(&table, "dim", &mut errs).unwrap_or(2);
    let grid_n =
        get_usize(&table, "grid_n", &mut errs).unwrap_or(if dim == 3 { 64 } else { 256 });
    let box_side = get_f64(&table, "box_side", &mut errs).unwrap_or(4.0);
    let seeds = get_vec(&table, "seeds", &mut errs, |v| {
        v.as_integer().filter(|&i| i >= 0).map(|i| i as u64)
    })
    .unwrap_or_else(|| vec![0]);
    let phi = get_f64(&table, "phi", &mut errs).unwrap_or(0.1);
    let count = get_usize(&table, "count", &mut errs);
    let radius = get_f64(&table, "radius", &mut errs).unwrap_or(0.5);
    let radius_max = get_f64(&table, "radius_max", &mut errs);
    let min_gap = get_f64(&table, "min_gap", &mut errs).unwrap_or(0.05);
    let delta = get_f64(&table, "delta", &mut errs).unwrap_or(0.05);
    let kappa_ladder = get_vec(&table, "kappa_ladder", &mut errs, num)
        .unwrap_or_else(|| vec![1e2, 1e3, 1e4]);
    let tol = get_f64(&table, "tol", &mut errs).unwrap_or(1e-8);
    let max_iter = get_usize(&table, "max_iter", &mut errs).unwrap_or(50_000);
    let eps_ladder =
        get_vec(&table, "eps_ladder", &mut errs, num).unwrap_or_else(|| vec![0.25, 0.125]);
    let cell_n = get_usize(&table, "cell_n", &mut errs).unwrap_or(64);
    let kappa = get_f64(&table, "kappa", &mut errs).unwrap_or(1e2);
    let force = get_str(&table, "force", &mut errs).unwrap_or_else(|| "sine-shear".to_string());
    let force_amplitude = get_f64(&table, "force_amplitude", &mut errs).unwrap_or(1.0);
    let rho_min = get_f64(&table, "rho_min", &mut errs).unwrap_or(1e-4);
    let rho_max = get_f64(&table, "rho_max", &mut errs).unwrap_or(1e-1);
    let rho_count = get_usize(&table, "rho_count", &mut errs).unwrap_or(7);
    let resolution = get_usize(&table, "resolution", &mut errs).unwrap_or(256);
    let rs = get_vec(&table, "rs", &mut errs, num).unwrap_or_else(|| vec![1.0, 2.0, 3.0]);
    let dims = get_vec(&table, "dims", &mut errs, |v| {
        v.as_integer().filter(|&i| i >= 0).map(|i| i as usize)
    })
    .unwrap_or_else(|| vec![2, 3]);
    let kinds = get_vec(&table, "kinds", &mut errs, |v| v.as_str().map(str::to_string))
        .unwrap_or_else(|| KIND_LABELS.iter().map(|s| s.to_string()).collect());

    if dim != 2 && dim != 3 {
        errs.push(format!("`dim`: must be 2 or 3, got {dim}"));
    }
    if grid_n < 16 {
        errs.push(format!("`grid_n`: must be at least 16, got {grid_n}"));
    }
    if box_side < 4.0 {
        errs.push(format!("`box_side`: must be at least 4, got {box_side}"));
    }
    if seeds.is_empty() {
        errs.push("`seeds`: must list at least one seed".to_string());
    }
    if phi <= 0.0 || phi >= 0.5 {
        errs.push(format!("`phi`: must lie in (0, 0.5), got {phi}"));
    }
    if radius <= 0.0 {
        errs.push(format!("`radius`: must be positive, got {radius}"));
    }
    if let Some(rm) = radius_max {
        if rm < radius {
            errs.push(format!("`radius_max`: must be at least `radius`, got {rm} < {radius}"));
        }
    }
    if min_gap < 0.0 {
        errs.push(format!("`min_gap`: must be nonnegative, got {min_gap}"));
    }
    if delta < 0.0 {
        errs.push(format!("`delta`: must be nonnegative, got {delta}"));
    }
    if kappa_ladder.len() < 3 {
        errs.push(format!("`kappa_ladder`: needs at least 3 rungs, got {}", kappa_ladder.len()));
    }
    if kappa_ladder.windows(2).any(|w| w[1] <= w[0]) || kappa_ladder.iter().any(|&k| k <= 1.0) {
        errs.push("`kappa_ladder`: must be strictly increasing with every rung above 1".to_string());
    }
    if tol <= 0.0 {
        errs.push(format!("`tol`: must be positive, got {tol}"));
    }
    if max_iter == 0 {
        errs.push("`max_iter`: must be positive".to_string());
    }
    if eps_ladder.is_empty()
        || eps_ladder.iter().any(|&e| e <= 0.0 || e >= 1.0)
        || eps_ladder.windows(2).any(|w| w[1] >= w[0])
    {
        errs.push("`eps_ladder`: must be strictly decreasing with values in (0, 1)".to_string());
    }
    if cell_n < 16 {
        errs.push(format!("`cell_n`: must be at least 16, got {cell_n}"));
    }
    if kappa <= 1.0 {
        errs.push(format!("`kappa`: must exceed 1, got {kappa}"));
    }
    if force != "sine-shear" && force != "rotor" {
        errs.push(format!("`force`: must be \"sine-shear\" or \"rotor\", got \"{force}\""));
    }
    if !(rho_min > 0.0 && rho_min < rho_max && rho_max < 1.0) {
        errs.push(format!(
            "`rho_min`/`rho_max`: need 0 < rho_min < rho_max < 1, got {rho_min}, {rho_max}"
        ));
    }
    if rho_count < 4 {
        errs.push(format!("`rho_count`: needs at least 4 samples, got {rho_count}"));
    }
    if resolution < 64 {
        errs.push(format!("`resolution`: must be at least 64, got {resolution}"));
    }
    if rs.is_empty() || rs.iter().any(|&r| r < 1.0) {
        errs.push("`rs`: exponents must all be at least 1".to_string());
    }
    if dims.is_empty() || dims.iter().any(|&d| d != 2 && d != 3) {
        errs.push("`dims`: must be a nonempty subset of {2, 3}".to_string());
    }
    for k in &kinds {
        if !KIND_LABELS.contains(&k.as_str()) {
            errs.push(format!("`kinds`: unknown norm kind \"{k}\" (expected one of {KIND_LABELS:?})"));
        }
    }

    if !errs.is_empty() {
        bail!("invalid config ({} problem(s)):\n  - {}", errs.len(), errs.join("\n  - "));
    }

    Ok(Resolved {
        dim,
        grid_n,
        box_side,
        seeds,
        phi,
        count,
        radius,
        radius_max,
        min_gap,
        delta,
        kappa_ladder,
        tol,
        max_iter,
        eps_ladder,
        cell_n,
        kappa,
        force,
        force_amplitude,
        rho_min,
        rho_max,
        rho_count,
        resolution,
        rs,
        dims,
        kinds,
    })
}

/// Echoes the resolved parameters as TOML; validate(emit(c)) == c.
pub fn emit(resolved: &Resolved) -> String {
    toml::to_string(resolved).expect("resolved config serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gets_defaults() {
        let c = validate("").unwrap();
        assert_eq!(c.dim, 2);
        assert_eq!(c.grid_n, 256);
        assert_eq!(c.seeds, vec![0]);
        assert_eq!(c.kappa_ladder, vec![1e2, 1e3, 1e4]);
        assert_eq!(c.tol, 1e-8);
    }

    #[test]
    fn unknown_key_suggestion() {
        let err = validate("kapa = 3\n").unwrap_err().to_string();
        assert!(err.contains("did you mean `kappa`"), "{err}");
    }

    #[test]
    fn all_violations_listed() {
        let err = validate("delta = -1.0\ndim = 5\ntol = 0.0\n").unwrap_err().to_string();
        assert!(err.contains("`delta`"), "{err}");
        assert!(err.contains("`dim`"), "{err}");
        assert!(err.contains("`tol`"), "{err}");
    }

    #[test]
    fn round_trip_idempotent() {
        let c = validate("phi = 0.15\nseeds = [3, 7]\ngrid_n = 128\n").unwrap();
        let again = validate(&emit(&c)).unwrap();
        assert_eq!(c, again);
        assert_eq!(emit(&c), emit(&again));
    }

    #[test]
    fn dimension_dependent_grid_default() {
        let c = validate("dim = 3\n").unwrap();
        assert_eq!(c.grid_n, 64);
    }
}
