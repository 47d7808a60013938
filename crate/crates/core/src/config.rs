//! `key=value` problem files and the builders that turn them into problems.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are
//! comma-separated; matrix rows are separated by `;`. Relative file paths are
//! resolved against the directory of the problem file. Every key must be
//! consumed by the command that reads the file.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::sync::Mutex;

use nalgebra::DMatrix;

use crate::bsee::{
    AffineDriver, BseeProblem, Driver, HeatReference, LipschitzDriver, Partition, SolveOptions,
};
use crate::chaos::{
    io as chaos_io, Catalog, CatalogLimits, ChaosRandomVariable, MonteCarlo, ProjectorOptions,
};
use crate::nullctrl::{NullControlOptions, NullControlProblem};
use crate::slq::{SlqOptions, SlqProblem};
use crate::spectral::{self, SpectralBasis, SpectralCoeffs};
use crate::{Error, Result};

#[derive(Debug, Default)]
pub struct KeyValues {
    origin: String,
    base_dir: PathBuf,
    map: BTreeMap<String, String>,
    used: Mutex<BTreeSet<String>>,
}

impl KeyValues {
    pub fn parse(text: &str, origin: &str, base_dir: &Path) -> Result<Self> {
        let mut kv = KeyValues {
            origin: origin.into(),
            base_dir: base_dir.into(),
            ..Default::default()
        };
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let loc = format!("{origin}:{}", n + 1);
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(&loc, "expected key=value"))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::parse(&loc, "empty key"));
            }
            if kv.map.insert(k.into(), v.trim().into()).is_some() {
                return Err(Error::parse(&loc, format!("duplicate key {k}")));
            }
        }
        Ok(kv)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &path.display().to_string(), &base)
    }

    /// Applies a `key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
        self.map.insert(k.trim().into(), v.trim().into());
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn raw(&self, key: &str) -> Option<&str> {
        let v = self.map.get(key)?;
        self.used.lock().expect("usage set").insert(key.into());
        Some(v.as_str())
    }

    fn bad(&self, key: &str, msg: impl std::fmt::Display) -> Error {
        Error::Config(format!("{}: {key}: {msg}", self.origin))
    }

    pub fn string(&self, key: &str) -> Option<String> {
        self.raw(key).map(str::to_string)
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.raw(key)
            .map(|v| v.parse::<f64>().map_err(|e| self.bad(key, e)))
            .transpose()
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.raw(key)
            .map(|v| v.parse::<usize>().map_err(|e| self.bad(key, e)))
            .transpose()
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.usize(key)?.unwrap_or(default))
    }

    pub fn require_usize(&self, key: &str) -> Result<usize> {
        self.usize(key)?.ok_or_else(|| self.bad(key, "missing"))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some("true" | "1" | "yes") => Ok(true),
            Some("false" | "0" | "no") => Ok(false),
            Some(v) => Err(self.bad(key, format!("expected a boolean, got {v:?}"))),
        }
    }

    pub fn list_f64(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|p| p.trim().parse::<f64>().map_err(|e| self.bad(key, e)))
                    .collect()
            })
            .transpose()
    }

    pub fn list_usize(&self, key: &str) -> Result<Option<Vec<usize>>> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|p| p.trim().parse::<usize>().map_err(|e| self.bad(key, e)))
                    .collect()
            })
            .transpose()
    }

    /// Square `n x n` matrix; missing keys give zero.
    pub fn matrix(&self, key: &str, n: usize) -> Result<DMatrix<f64>> {
        let Some(v) = self.raw(key) else {
            return Ok(DMatrix::zeros(n, n));
        };
        let rows: Vec<Vec<f64>> = v
            .split(';')
            .map(|r| {
                r.split(',')
                    .map(|p| p.trim().parse::<f64>().map_err(|e| self.bad(key, e)))
                    .collect()
            })
            .collect::<Result<_>>()?;
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(self.bad(key, format!("expected a {n}x{n} matrix")));
        }
        Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(|v| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                self.base_dir.join(p)
            }
        })
    }

    /// Per-mode values: a list with at least `n` entries (extra entries are
    /// ignored) or a single value for every mode.
    pub fn modes(&self, key: &str, n: usize) -> Result<Option<Vec<f64>>> {
        let Some(v) = self.list_f64(key)? else {
            return Ok(None);
        };
        match v.len() {
            1 => Ok(Some(vec![v[0]; n])),
            len if len >= n => Ok(Some(v[..n].to_vec())),
            len => Err(self.bad(key, format!("{len} values for {n} modes"))),
        }
    }

    /// Fails on keys no builder has read.
    pub fn check_all_used(&self) -> Result<()> {
        let used = self.used.lock().expect("usage set");
        let unknown: Vec<&String> = self.map.keys().filter(|k| !used.contains(*k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "{}: unknown or unused keys: {}",
                self.origin,
                unknown
                    .iter()
                    .map(|s| s.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            )))
        }
    }
}

/// Grid parameters shared by every problem type.
#[derive(Clone, Copy, Debug)]
pub struct GridSpec {
    pub horizon: f64,
    pub steps: usize,
    pub modes: usize,
    pub degree: usize,
}

pub fn grid_spec(kv: &KeyValues) -> Result<GridSpec> {
    Ok(GridSpec {
        horizon: kv.f64_or("T", 1.0)?,
        steps: kv.require_usize("N")?,
        modes: kv.require_usize("n")?,
        degree: kv.usize_or("M", 1)?,
    })
}

pub fn catalog(kv: &KeyValues, steps: usize, degree: usize) -> Result<Arc<Catalog>> {
    let mut limits = CatalogLimits::default();
    limits.max_slots = kv.usize_or("catalog.max_slots", limits.max_slots)?;
    Catalog::with_limits(steps, degree, limits)
}

pub fn projector_options(kv: &KeyValues, seed: u64) -> Result<ProjectorOptions> {
    let d = ProjectorOptions::default();
    Ok(ProjectorOptions {
        nodes: kv.usize_or("quad.nodes", d.nodes)?,
        max_slots: kv.usize_or("quad.max_slots", d.max_slots)?,
        monte_carlo: kv
            .usize("mc.samples")?
            .map(|samples| MonteCarlo { samples, seed }),
    })
}

pub fn solve_options(kv: &KeyValues, seed: u64) -> Result<SolveOptions> {
    let d = SolveOptions::default();
    Ok(SolveOptions {
        scheme: kv.string("scheme").map_or(Ok(d.scheme), |s| s.parse())?,
        tol: kv.f64_or("picard.tol", d.tol)?,
        max_iter: kv.usize_or("picard.max_iter", d.max_iter)?,
        relaxation: kv.f64_or("picard.relaxation", d.relaxation)?,
        projector: projector_options(kv, seed)?,
    })
}

/// Terminal data given as `const + wt W(T)` per mode, if not read from a file.
#[derive(Clone, Debug)]
pub struct TerminalSpec {
    pub shift: Vec<f64>,
    pub slope: Vec<f64>,
}

pub fn terminal_spec(kv: &KeyValues, n: usize) -> Result<Option<TerminalSpec>> {
    if kv.contains("terminal.file") {
        return Ok(None);
    }
    let shift = match kv.f64("terminal.const.decay")? {
        Some(p) => (1..=n).map(|i| (i as f64).powf(-p)).collect(),
        None => kv
            .modes("terminal.const", n)?
            .unwrap_or_else(|| vec![0.0; n]),
    };
    let slope = kv.modes("terminal.wt", n)?.unwrap_or_else(|| vec![0.0; n]);
    Ok(Some(TerminalSpec { shift, slope }))
}

fn terminal(
    kv: &KeyValues,
    catalog: &Arc<Catalog>,
    partition: &Partition,
    n: usize,
) -> Result<ChaosRandomVariable> {
    if let Some(path) = kv.path("terminal.file") {
        let f = std::fs::File::open(&path)
            .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
        let v = chaos_io::read_variable(BufReader::new(f), catalog, &path.display().to_string())?;
        if v.modes() != n {
            return Err(Error::Config(format!(
                "terminal file has {} modes, expected {n}",
                v.modes()
            )));
        }
        return Ok(v);
    }
    let spec = terminal_spec(kv, n)?.expect("no terminal file");
    ChaosRandomVariable::affine_brownian(
        catalog,
        partition.steps(),
        partition.tau(),
        &spec.shift,
        &spec.slope,
    )
}

fn driver(
    kv: &KeyValues,
    catalog: &Arc<Catalog>,
    partition: &Partition,
    n: usize,
) -> Result<Driver> {
    match kv.string("driver.kind").as_deref().unwrap_or("zero") {
        "zero" => Ok(Driver::Zero),
        "affine" => {
            let mut d = AffineDriver::new(kv.matrix("driver.la", n)?, kv.matrix("driver.lb", n)?);
            if let Some(f) = kv.modes("driver.f", n)? {
                d = d.with_deterministic_source(catalog, partition, |_| f.clone());
            }
            Ok(Driver::Affine(d))
        }
        "lipschitz" => {
            let name = kv
                .string("driver.fn")
                .ok_or_else(|| Error::Config("driver.fn is required".into()))?;
            let mut d = LipschitzDriver::named(&name, kv.f64_or("driver.scale", 1.0)?)?;
            if let Some(l) = kv.f64("driver.lipschitz")? {
                d.lipschitz = l;
            }
            Ok(Driver::Lipschitz(d))
        }
        other => Err(Error::Config(format!("unknown driver.kind {other:?}"))),
    }
}

/// Builds the backward problem, optionally overriding `N` and `n` (used by sweeps).
pub fn bsee_problem(
    kv: &KeyValues,
    steps: Option<usize>,
    modes: Option<usize>,
) -> Result<BseeProblem> {
    let horizon = kv.f64_or("T", 1.0)?;
    let degree = kv.usize_or("M", 1)?;
    let steps = match steps {
        Some(s) => s,
        None => kv.require_usize("N")?,
    };
    let n = match modes {
        Some(n) => n,
        None => kv.require_usize("n")?,
    };
    let partition = Partition::new(horizon, steps)?;
    let basis = SpectralBasis::new(n)?;
    let catalog = catalog(kv, steps, degree)?;
    let driver = driver(kv, &catalog, &partition, n)?;
    let terminal = terminal(kv, &catalog, &partition, n)?;
    BseeProblem::new(partition, basis, catalog, driver, terminal)
}

/// Closed-form reference for a zero driver and `const + wt W(T)` terminal data.
pub fn heat_reference(kv: &KeyValues, modes: usize) -> Result<Option<HeatReference>> {
    if kv.string("driver.kind").as_deref().unwrap_or("zero") != "zero" {
        return Ok(None);
    }
    let horizon = kv.f64_or("T", 1.0)?;
    Ok(terminal_spec(kv, modes)?.map(|s| HeatReference {
        horizon,
        eigenvalues: (1..=modes).map(spectral::eigenvalue).collect(),
        shift: s.shift,
        slope: s.slope,
    }))
}

fn spatial(kv: &KeyValues, prefix: &str, n: usize, default: f64) -> Result<SpectralCoeffs> {
    if let Some(path) = kv.path(&format!("{prefix}.file")) {
        let f = std::fs::File::open(&path)
            .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
        let mut c = spectral::read_coeffs(BufReader::new(f), &path.display().to_string())?;
        c.values.resize(n, 0.0);
        return Ok(c);
    }
    if let Some(path) = kv.path(&format!("{prefix}.samples")) {
        let f = std::fs::File::open(&path)
            .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
        let s = spectral::read_samples(BufReader::new(f), &path.display().to_string())?;
        return spectral::project_function(&s, n);
    }
    Ok(SpectralCoeffs::new(
        kv.modes(prefix, n)?.unwrap_or_else(|| vec![default; n]),
    ))
}

pub fn slq_problem(kv: &KeyValues) -> Result<(SlqProblem, SlqOptions)> {
    let g = grid_spec(kv)?;
    let partition = Partition::new(g.horizon, g.steps)?;
    let basis = SpectralBasis::new(g.modes)?;
    let initial = spatial(kv, "forward.y0", g.modes, 0.0)?;
    let noise = spatial(kv, "forward.sigma", g.modes, 0.0)?;
    let catalog = catalog(kv, g.steps, g.degree.max(1))?;
    let mut p = SlqProblem::new(partition, basis, catalog, initial, noise)?;
    p.kappa = kv.f64_or("slq.kappa", p.default_kappa())?;
    p.literal_forward = kv.bool_or("slq.literal_forward", false)?;
    let d = SlqOptions::default();
    let o = SlqOptions {
        tol: kv.f64_or("slq.tol", d.tol)?,
        max_iter: kv.usize_or("slq.max_iter", d.max_iter)?,
    };
    Ok((p, o))
}

pub fn nullctrl_problem(kv: &KeyValues) -> Result<(NullControlProblem, NullControlOptions)> {
    let g = grid_spec(kv)?;
    let partition = Partition::new(g.horizon, g.steps)?;
    let basis = SpectralBasis::new(g.modes)?;
    let initial = spatial(kv, "nullctrl.y0", g.modes, 0.0)?;
    let catalog = catalog(kv, g.steps, g.degree)?;
    let d = NullControlOptions::default();
    let o = NullControlOptions {
        tol: kv.f64_or("nullctrl.tol", d.tol)?,
        max_iter: kv.usize_or("nullctrl.max_iter", d.max_iter)?,
    };
    Ok((
        NullControlProblem::new(partition, basis, catalog, initial)?,
        o,
    ))
}
