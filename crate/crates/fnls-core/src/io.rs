//! Bit-exact data formats: binary field snapshots, flat key=value run
//! configuration, and CSV emission with round-trip-exact floats.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::error::{FnlsError, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::params::{LaplacianKind, ModelParams};

const MAGIC: &[u8; 4] = b"FNLS";
const VERSION: u32 = 1;

/// Write a field snapshot: magic "FNLS", version u32 LE, d, m, nx, ny
/// (u32 LE), lx, sigma, alpha (f64 LE), kind byte, then interleaved
/// re/im f64 LE in row-major order.
pub fn write_snapshot(path: &Path, params: &ModelParams, field: &Field) -> Result<()> {
    let grid = field.grid();
    let mut buf = Vec::with_capacity(45 + 16 * grid.num_points());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(grid.d as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.m as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.nx as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.ny as u32).to_le_bytes());
    buf.extend_from_slice(&grid.lx.to_le_bytes());
    buf.extend_from_slice(&params.sigma.to_le_bytes());
    buf.extend_from_slice(&params.alpha.to_le_bytes());
    buf.push(match params.kind {
        LaplacianKind::Isotropic => 0,
        LaplacianKind::Anisotropic => 1,
    });
    for v in field.values() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(ModelParams, Field)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let fail = |what: &str| FnlsError::Format(format!("{what} in snapshot {}", path.display()));

    if bytes.len() < 45 {
        return Err(fail("truncated header"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(fail("bad magic (expected FNLS)"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(fail(&format!("unsupported version {version}")));
    }
    let d = u32_at(8) as usize;
    let m = u32_at(12) as usize;
    let nx = u32_at(16) as usize;
    let ny = u32_at(20) as usize;
    let lx = f64_at(24);
    let sigma = f64_at(32);
    let alpha = f64_at(40);
    let kind = match bytes[48] {
        0 => LaplacianKind::Isotropic,
        1 => LaplacianKind::Anisotropic,
        b => return Err(fail(&format!("unknown kind byte {b}"))),
    };
    let grid = Grid::new(d, m, lx, nx, ny)
        .map_err(|e| fail(&format!("invalid grid ({e})")))?;
    let params = ModelParams::new(d, m.max(1).min(2), sigma, alpha, kind)
        .or_else(|_| ModelParams::new(d, 1, sigma, alpha, kind))
        .map_err(|e| fail(&format!("invalid parameters ({e})")))?;
    let params = ModelParams { m, ..params };

    let n = grid.num_points();
    let data = &bytes[49..];
    if data.len() != 16 * n {
        return Err(fail(&format!(
            "payload length {} does not match {n} samples",
            data.len()
        )));
    }
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let re = f64::from_le_bytes(data[16 * i..16 * i + 8].try_into().unwrap());
        let im = f64::from_le_bytes(data[16 * i + 8..16 * i + 16].try_into().unwrap());
        values.push(Complex64::new(re, im));
    }
    let field = Field::new(grid, values).map_err(|e| fail(&format!("bad samples ({e})")))?;
    Ok((params, field))
}

/// Round-trip-exact float formatting used for every numeric output.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum KeyType {
    Float,
    Int,
    Enum(&'static [&'static str]),
    Text,
}

/// (key, type, required-for which run types; empty = optional everywhere)
const KNOWN_KEYS: &[(&str, KeyType, &[&str])] = &[
    ("run", KeyType::Enum(&["groundstate", "scan", "evolve", "gn", "check"]),
        &["groundstate", "scan", "evolve", "gn", "check"]),
    ("model.d", KeyType::Int, &["groundstate", "scan", "evolve", "gn"]),
    ("model.m", KeyType::Int, &["groundstate", "scan", "evolve", "gn"]),
    ("model.sigma", KeyType::Float, &["groundstate", "scan", "evolve", "gn"]),
    ("model.alpha", KeyType::Float, &["groundstate", "scan", "evolve", "gn"]),
    ("model.kind", KeyType::Enum(&["isotropic", "anisotropic"]),
        &["groundstate", "scan", "evolve", "gn"]),
    ("grid.lx", KeyType::Float, &["groundstate", "scan", "evolve", "gn"]),
    ("grid.nx", KeyType::Int, &["groundstate", "scan", "evolve", "gn"]),
    ("grid.ny", KeyType::Int, &["groundstate", "scan", "evolve", "gn"]),
    ("solver.tol", KeyType::Float, &[]),
    ("solver.max_iter", KeyType::Int, &[]),
    ("solver.tau", KeyType::Float, &[]),
    ("solver.init", KeyType::Text, &[]),
    ("solver.init_eps", KeyType::Float, &[]),
    ("mode", KeyType::Enum(&[
        "fixed-frequency", "normalized-sub", "normalized-local", "intercritical",
        "reference-rd",
    ]), &["groundstate"]),
    ("omega", KeyType::Float, &[]),
    ("mass", KeyType::Float, &[]),
    ("rho0", KeyType::Float, &[]),
    ("scan.axis", KeyType::Enum(&["omega", "mass", "lambda"]), &["scan"]),
    ("scan.min", KeyType::Float, &["scan"]),
    ("scan.max", KeyType::Float, &["scan"]),
    ("scan.samples", KeyType::Int, &["scan"]),
    ("scan.resolution", KeyType::Float, &["scan"]),
    ("evolve.dt", KeyType::Float, &["evolve"]),
    ("evolve.t_final", KeyType::Float, &["evolve"]),
    ("evolve.r", KeyType::Float, &["evolve"]),
    ("evolve.sample_every", KeyType::Int, &["evolve"]),
    ("evolve.u0", KeyType::Text, &["evolve"]),
    ("evolve.amplitude", KeyType::Float, &[]),
    ("evolve.mc", KeyType::Float, &["evolve"]),
    ("evolve.snapshot_every", KeyType::Int, &[]),
    ("gn.samples", KeyType::Int, &[]),
    ("suite", KeyType::Enum(&["multipliers", "gradients", "fiber"]), &["check"]),
    ("seed", KeyType::Int, &[]),
];

/// Flat key=value run configuration with '#' comments. Unknown keys are
/// rejected, values are normalized by type, and [`RunConfig::canonical`]
/// emits a sorted text form that re-parses to the same configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                FnlsError::Config(format!("line {}: expected key=value, got {line:?}", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let spec = KNOWN_KEYS.iter().find(|(k, _, _)| *k == key).ok_or_else(|| {
                FnlsError::Config(format!("unknown key {key:?} on line {}", lineno + 1))
            })?;
            let normalized = normalize_value(key, spec.1, value)?;
            if entries.insert(key.to_string(), normalized).is_some() {
                return Err(FnlsError::Config(format!("duplicate key {key:?}")));
            }
        }
        let cfg = RunConfig { entries };
        cfg.check_required()?;
        Ok(cfg)
    }

    fn check_required(&self) -> Result<()> {
        let run = self
            .entries
            .get("run")
            .ok_or_else(|| FnlsError::Config("missing required key \"run\"".into()))?
            .clone();
        for (key, _, required_for) in KNOWN_KEYS {
            if required_for.contains(&run.as_str()) && !self.entries.contains_key(*key) {
                return Err(FnlsError::Config(format!(
                    "missing required key {key:?} for run={run}"
                )));
            }
        }
        if run == "groundstate" {
            let mode = self.entries.get("mode").map(String::as_str).unwrap_or("");
            let needed: &[&str] = match mode {
                "fixed-frequency" => &["omega"],
                "normalized-sub" | "intercritical" => &["mass"],
                "normalized-local" => &["mass", "rho0"],
                _ => &[],
            };
            for key in needed {
                if !self.entries.contains_key(*key) {
                    return Err(FnlsError::Config(format!(
                        "missing required key {key:?} for mode={mode}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Sorted `key=value` lines with normalized values.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| FnlsError::Config(format!("missing required key {key:?}")))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let spec = KNOWN_KEYS
            .iter()
            .find(|(k, _, _)| *k == key)
            .ok_or_else(|| FnlsError::Config(format!("unknown key {key:?}")))?;
        self.entries.insert(key.to_string(), normalize_value(key, spec.1, value)?);
        Ok(())
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.require(key)?
            .parse()
            .map_err(|_| FnlsError::Config(format!("key {key:?} is not a float")))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            Some(v) => v
                .parse()
                .map_err(|_| FnlsError::Config(format!("key {key:?} is not a float"))),
            None => Ok(default),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        self.require(key)?
            .parse()
            .map_err(|_| FnlsError::Config(format!("key {key:?} is not an integer")))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            Some(v) => v
                .parse()
                .map_err(|_| FnlsError::Config(format!("key {key:?} is not an integer"))),
            None => Ok(default),
        }
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        let kind = match self.require("model.kind")? {
            "isotropic" => LaplacianKind::Isotropic,
            "anisotropic" => LaplacianKind::Anisotropic,
            other => return Err(FnlsError::Config(format!("unknown model.kind {other:?}"))),
        };
        ModelParams::new(
            self.usize("model.d")?,
            self.usize("model.m")?,
            self.f64("model.sigma")?,
            self.f64("model.alpha")?,
            kind,
        )
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        Grid::new(
            self.usize("model.d")?,
            self.usize("model.m")?,
            self.f64("grid.lx")?,
            self.usize("grid.nx")?,
            self.usize("grid.ny")?,
        )
    }

    pub fn solver_config(&self) -> Result<crate::ground_state::SolverConfig> {
        use crate::ground_state::{InitKind, SolverConfig};
        let init = match self.get("solver.init").unwrap_or("gaussian-ybroken") {
            "gaussian-flat" => InitKind::GaussianFlat,
            "gaussian-ybroken" => {
                InitKind::GaussianYBroken { eps: self.f64_or("solver.init_eps", 0.1)? }
            }
            other => {
                if let Some(path) = other.strip_prefix("file:") {
                    InitKind::FromFile(path.into())
                } else {
                    return Err(FnlsError::Config(format!("unknown solver.init {other:?}")));
                }
            }
        };
        Ok(SolverConfig {
            tol: self.f64_or("solver.tol", 1e-9)?,
            max_iter: self.usize_or("solver.max_iter", 20_000)?,
            tau: self.f64_or("solver.tau", 0.5)?,
            init,
        })
    }
}

fn normalize_value(key: &str, ty: KeyType, value: &str) -> Result<String> {
    match ty {
        KeyType::Float => {
            let x: f64 = value
                .parse()
                .map_err(|_| FnlsError::Config(format!("key {key:?}: {value:?} is not a float")))?;
            if !x.is_finite() {
                return Err(FnlsError::Config(format!("key {key:?}: non-finite value")));
            }
            Ok(fmt_f64(x))
        }
        KeyType::Int => {
            let x: i64 = value.parse().map_err(|_| {
                FnlsError::Config(format!("key {key:?}: {value:?} is not an integer"))
            })?;
            Ok(x.to_string())
        }
        KeyType::Enum(options) => {
            let lower = value.to_ascii_lowercase();
            if options.contains(&lower.as_str()) {
                Ok(lower)
            } else {
                Err(FnlsError::Config(format!(
                    "key {key:?}: {value:?} not in {options:?}"
                )))
            }
        }
        KeyType::Text => Ok(value.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.fnls");
        let grid = Grid::new(2, 1, 8.0, 8, 4).unwrap();
        let params = ModelParams::new(2, 1, 0.75, 1.8, LaplacianKind::Anisotropic).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let values: Vec<Complex64> = (0..grid.num_points())
            .map(|_| Complex64::new(rng.gen::<f64>() * 1e3 - 500.0, rng.gen::<f64>()))
            .collect();
        let field = Field::new(grid.clone(), values.clone()).unwrap();
        write_snapshot(&path, &params, &field).unwrap();
        let (p2, f2) = read_snapshot(&path).unwrap();
        assert_eq!(p2.sigma, params.sigma);
        assert_eq!(p2.alpha, params.alpha);
        assert_eq!(p2.kind, params.kind);
        assert_eq!(f2.grid().as_ref(), grid.as_ref());
        for (a, b) in values.iter().zip(f2.values()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn snapshot_rejects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.fnls");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(matches!(read_snapshot(&path), Err(FnlsError::Format(_))));

        let grid = Grid::new(1, 1, 8.0, 4, 2).unwrap();
        let params = ModelParams::new(1, 1, 0.5, 2.0, LaplacianKind::Isotropic).unwrap();
        let field = Field::zeros(grid);
        write_snapshot(&path, &params, &field).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&path, &bytes).unwrap();
        let err = read_snapshot(&path).unwrap_err();
        assert!(err.to_string().contains("payload"), "unexpected error {err}");
    }

    #[test]
    fn config_parses_and_canonicalizes() {
        let text = "
            # ground state run
            run = groundstate
            mode = fixed-frequency
            model.d=1
            model.m=1
            model.sigma = 0.750   # trailing comment
            model.alpha = 2.0
            model.kind = Isotropic
            grid.lx = 16.0
            grid.nx = 256
            grid.ny = 16
            omega = 1.50
        ";
        let cfg = RunConfig::parse(text).unwrap();
        let canon = cfg.canonical();
        assert!(canon.contains("model.sigma=0.75\n"));
        assert!(canon.contains("omega=1.5\n"));
        assert!(canon.contains("model.kind=isotropic\n"));
        // canonical text re-parses to the identical configuration
        let cfg2 = RunConfig::parse(&canon).unwrap();
        assert_eq!(cfg, cfg2);
        assert_eq!(canon, cfg2.canonical());
    }

    #[test]
    fn config_rejects_unknown_and_missing_keys() {
        let err = RunConfig::parse("run=groundstate\nbogus=1").unwrap_err();
        assert!(err.to_string().contains("bogus"));

        let text = "
            run = groundstate
            mode = fixed-frequency
            model.d=1
            model.m=1
            model.sigma=0.75
            model.alpha=2
            model.kind=isotropic
            grid.lx=16
            grid.nx=64
            grid.ny=8
        ";
        let err = RunConfig::parse(text).unwrap_err();
        assert!(err.to_string().contains("omega"), "error should name the key: {err}");
    }

    #[test]
    fn fmt_f64_round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, std::f64::consts::PI] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x} -> {s}");
        }
    }
}
