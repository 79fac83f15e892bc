//! Run configuration: a flat `[section]` / `key = value` file.
//!
//! Keys may be written inside a section or fully qualified at the top level
//! (`mesh.n = 128`). Unknown keys are rejected, and every problem found is
//! reported, not just the first.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::existence::VARIABLES;
use crate::expr::Expr;
use crate::mesh::{build_interval_mesh, build_rectangle_mesh, Mesh};
use crate::multiplicity::{check_t_grid, Family};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{origin}:{line}: {message}")]
    Parse { origin: String, line: usize, message: String },
    #[error("{origin}:{line}: {key}: {message}")]
    Invalid {
        origin: String,
        line: usize,
        key: String,
        message: String,
    },
}

/// All errors found in one file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshKind {
    Interval,
    Rectangle,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeshSpec {
    pub kind: MeshKind,
    /// `a, b` for intervals, `ax, ay, bx, by` for rectangles.
    pub bounds: Vec<f64>,
    pub n: usize,
    /// Cells in `y`; defaults to `n`.
    pub ny: usize,
}

impl MeshSpec {
    pub fn build(&self) -> crate::Result<Arc<Mesh>> {
        let b = &self.bounds;
        let mesh = match self.kind {
            MeshKind::Interval => build_interval_mesh(b[0], b[1], self.n)?,
            MeshKind::Rectangle => build_rectangle_mesh(b[0], b[1], b[2], b[3], self.n, self.ny)?,
        };
        Ok(Arc::new(mesh))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProblemSpec {
    pub p: [String; 2],
    pub f: [String; 2],
    pub eta: [f64; 2],
    /// Right-hand side for `solve`, in `x` and `y`.
    pub rhs: String,
    /// Field measured by `norm`, in `x` and `y`.
    pub u: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverSpec {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    pub eps_reg: f64,
    pub outer_max: usize,
    pub outer_increment_tol: f64,
    pub outer_residual_tol: f64,
    pub margin: f64,
    pub sub_grid: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct HomotopySpec {
    pub family: Family,
    /// Absent values default to half of `λ₁ min{1, p⁻ − 1}` at run time.
    pub j: [Option<f64>; 2],
    pub delta: f64,
    pub t_grid: Vec<f64>,
    pub r: Option<f64>,
    pub r_tilde: Option<f64>,
    pub r_hat: Option<f64>,
    pub seeds: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeSpec {
    /// Absent: half of `λ₁ (p⁻ − 1)`.
    pub j: Option<f64>,
    pub deltas: Vec<f64>,
    pub seeds: usize,
}

/// A hand-chosen box `[lower φ₁, upper φ̃₁]` replacing the automatic one.
#[derive(Debug, Clone, Serialize)]
pub struct BoxSpec {
    pub lower_scale: f64,
    pub upper_scale: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputSpec {
    pub dir: String,
    pub csv: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub mesh: MeshSpec,
    pub problem: ProblemSpec,
    pub solver: SolverSpec,
    pub homotopy: HomotopySpec,
    pub probe: ProbeSpec,
    #[serde(rename = "box")]
    pub manual_box: Option<BoxSpec>,
    pub output: OutputSpec,
    pub rng_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let f = |si: &str, sj: &str| format!("20*{si}/(1 + abs({si}))*(1 + {sj}^2/(1 + {sj}^2))");
        RunConfig {
            mesh: MeshSpec {
                kind: MeshKind::Interval,
                bounds: vec![0.0, 1.0],
                n: 256,
                ny: 256,
            },
            problem: ProblemSpec {
                p: ["2".into(), "2".into()],
                f: [f("s1", "s2"), f("s2", "s1")],
                eta: [19.8, 19.8],
                rhs: "1".into(),
                u: "sin(pi*x)".into(),
            },
            solver: SolverSpec {
                tolerance: 1e-10,
                max_iterations: 200,
                max_halvings: 30,
                eps_reg: 1e-10,
                outer_max: 200,
                outer_increment_tol: 1e-9,
                outer_residual_tol: 1e-8,
                margin: 0.25,
                sub_grid: 5,
            },
            homotopy: HomotopySpec {
                family: Family::Tilde,
                j: [None, None],
                delta: 1e-3,
                t_grid: (0..=10).map(|k| k as f64 / 10.0).collect(),
                r: None,
                r_tilde: None,
                r_hat: None,
                seeds: 40,
            },
            probe: ProbeSpec {
                j: None,
                deltas: vec![1e-2, 1e-3],
                seeds: 50,
            },
            manual_box: None,
            output: OutputSpec {
                dir: "out".into(),
                csv: true,
            },
            rng_seed: 42,
        }
    }
}

const KEYS: &[&str] = &[
    "mesh.kind",
    "mesh.bounds",
    "mesh.n",
    "mesh.ny",
    "problem.p1",
    "problem.p2",
    "problem.f1",
    "problem.f2",
    "problem.eta1",
    "problem.eta2",
    "problem.rhs",
    "problem.u",
    "solver.tolerance",
    "solver.max_iterations",
    "solver.max_halvings",
    "solver.eps_reg",
    "solver.outer_max",
    "solver.outer_increment_tol",
    "solver.outer_residual_tol",
    "solver.margin",
    "solver.sub_grid",
    "homotopy.family",
    "homotopy.j1",
    "homotopy.j2",
    "homotopy.delta",
    "homotopy.t_grid",
    "homotopy.r",
    "homotopy.r_tilde",
    "homotopy.r_hat",
    "homotopy.seeds",
    "probe.j",
    "probe.deltas",
    "probe.seeds",
    "box.lower_scale",
    "box.upper_scale",
    "output.dir",
    "output.csv",
    "run.rng_seed",
];

struct Entry {
    value: String,
    line: usize,
}

/// Splits the text into qualified keys, reporting syntax errors, unknown
/// keys and duplicates.
fn scan(text: &str, origin: &str, errors: &mut Vec<ConfigError>) -> BTreeMap<String, Entry> {
    let mut out: BTreeMap<String, Entry> = BTreeMap::new();
    let mut section = String::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() || content.starts_with(';') {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            match rest.strip_suffix(']') {
                Some(name) if !name.trim().is_empty() => section = name.trim().to_string(),
                _ => errors.push(ConfigError::Parse {
                    origin: origin.into(),
                    line,
                    message: format!("malformed section header '{content}'"),
                }),
            }
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            errors.push(ConfigError::Parse {
                origin: origin.into(),
                line,
                message: format!("expected 'key = value', found '{content}'"),
            });
            continue;
        };
        let key = key.trim();
        let full = if key.contains('.') || section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        if !KEYS.contains(&full.as_str()) {
            errors.push(ConfigError::Invalid {
                origin: origin.into(),
                line,
                key: full,
                message: "unknown key".into(),
            });
            continue;
        }
        if let Some(prev) = out.get(&full) {
            errors.push(ConfigError::Invalid {
                origin: origin.into(),
                line,
                key: full.clone(),
                message: format!("duplicate key (first set on line {})", prev.line),
            });
            continue;
        }
        out.insert(
            full,
            Entry {
                value: value.trim().to_string(),
                line,
            },
        );
    }
    out
}

struct Reader<'a> {
    origin: &'a str,
    entries: BTreeMap<String, Entry>,
    errors: Vec<ConfigError>,
}

impl Reader<'_> {
    fn fail(&mut self, key: &str, message: String) {
        let line = self.entries.get(key).map_or(0, |e| e.line);
        self.errors.push(ConfigError::Invalid {
            origin: self.origin.into(),
            line,
            key: key.into(),
            message,
        });
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Option<T> {
        let raw = self.entries.get(key)?.value.clone();
        match raw.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.fail(key, format!("expected {what}, found '{raw}'"));
                None
            }
        }
    }

    fn set<T: std::str::FromStr>(&mut self, key: &str, what: &str, target: &mut T) {
        if let Some(v) = self.parsed(key, what) {
            *target = v;
        }
    }

    fn positive(&mut self, key: &str, target: &mut f64) {
        if let Some(v) = self.parsed::<f64>(key, "a number") {
            if v > 0.0 && v.is_finite() {
                *target = v;
            } else {
                self.fail(key, format!("must be positive and finite, got {v}"));
            }
        }
    }

    fn optional_positive(&mut self, key: &str, target: &mut Option<f64>) {
        if self.entries.contains_key(key) {
            let mut v = f64::NAN;
            let before = self.errors.len();
            self.positive(key, &mut v);
            if self.errors.len() == before {
                *target = Some(v);
            }
        }
    }

    fn list(&mut self, key: &str) -> Option<Vec<f64>> {
        let raw = self.entries.get(key)?.value.clone();
        let parts: Result<Vec<f64>, _> = raw.split(',').map(|s| s.trim().parse::<f64>()).collect();
        match parts {
            Ok(v) if !v.is_empty() => Some(v),
            _ => {
                self.fail(key, format!("expected a comma-separated list of numbers, found '{raw}'"));
                None
            }
        }
    }

    fn expr(&mut self, key: &str, vars: &[&str], target: &mut String) {
        let Some(raw) = self.entries.get(key).map(|e| e.value.clone()) else {
            return;
        };
        match Expr::parse(&raw, vars) {
            Ok(_) => *target = raw,
            Err(e) => self.fail(key, e.to_string()),
        }
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigErrors> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        ConfigErrors(vec![ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }])
    })?;
    parse_config_str(&text, &path.display().to_string())
}

/// Parses and validates configuration text; `origin` names it in errors.
pub fn parse_config_str(text: &str, origin: &str) -> Result<RunConfig, ConfigErrors> {
    let mut errors = Vec::new();
    let entries = scan(text, origin, &mut errors);
    let mut r = Reader { origin, entries, errors };
    let mut c = RunConfig::default();

    if let Some(kind) = r.entries.get("mesh.kind").map(|e| e.value.clone()) {
        match kind.as_str() {
            "interval" => c.mesh.kind = MeshKind::Interval,
            "rectangle" => {
                c.mesh.kind = MeshKind::Rectangle;
                c.mesh.bounds = vec![0.0, 0.0, 1.0, 1.0];
                c.mesh.n = 16;
                c.mesh.ny = 16;
            }
            other => r.fail("mesh.kind", format!("expected 'interval' or 'rectangle', found '{other}'")),
        }
    }
    if let Some(b) = r.list("mesh.bounds") {
        c.mesh.bounds = b;
    }
    let want = if c.mesh.kind == MeshKind::Interval { 2 } else { 4 };
    let b = c.mesh.bounds.clone();
    if b.len() != want {
        r.fail("mesh.bounds", format!("expected {want} values, found {}", b.len()));
    } else if !(b[0] < b[want / 2] && (want == 2 || b[1] < b[3])) {
        r.fail("mesh.bounds", format!("lower bounds must be below upper bounds, got {b:?}"));
    }
    r.set("mesh.n", "a cell count", &mut c.mesh.n);
    c.mesh.ny = c.mesh.n;
    r.set("mesh.ny", "a cell count", &mut c.mesh.ny);
    for (key, v) in [("mesh.n", c.mesh.n), ("mesh.ny", c.mesh.ny)] {
        if v < 2 {
            r.fail(key, format!("needs at least 2 cells, got {v}"));
        }
    }

    r.expr("problem.p1", &["x", "y"], &mut c.problem.p[0]);
    r.expr("problem.p2", &["x", "y"], &mut c.problem.p[1]);
    r.expr("problem.f1", &VARIABLES, &mut c.problem.f[0]);
    r.expr("problem.f2", &VARIABLES, &mut c.problem.f[1]);
    r.positive("problem.eta1", &mut c.problem.eta[0]);
    r.positive("problem.eta2", &mut c.problem.eta[1]);
    r.expr("problem.rhs", &["x", "y"], &mut c.problem.rhs);
    r.expr("problem.u", &["x", "y"], &mut c.problem.u);

    r.positive("solver.tolerance", &mut c.solver.tolerance);
    r.set("solver.max_iterations", "an iteration count", &mut c.solver.max_iterations);
    r.set("solver.max_halvings", "a count", &mut c.solver.max_halvings);
    if let Some(v) = r.parsed::<f64>("solver.eps_reg", "a number") {
        if v >= 0.0 && v.is_finite() {
            c.solver.eps_reg = v;
        } else {
            r.fail("solver.eps_reg", format!("must be ≥ 0, got {v}"));
        }
    }
    r.set("solver.outer_max", "an iteration count", &mut c.solver.outer_max);
    r.positive("solver.outer_increment_tol", &mut c.solver.outer_increment_tol);
    r.positive("solver.outer_residual_tol", &mut c.solver.outer_residual_tol);
    r.positive("solver.margin", &mut c.solver.margin);
    r.set("solver.sub_grid", "a count", &mut c.solver.sub_grid);
    if c.solver.sub_grid < 2 {
        r.fail("solver.sub_grid", format!("needs at least 2, got {}", c.solver.sub_grid));
    }

    if let Some(family) = r.entries.get("homotopy.family").map(|e| e.value.clone()) {
        match family.as_str() {
            "tilde" => c.homotopy.family = Family::Tilde,
            "with-delta" => c.homotopy.family = Family::WithDelta,
            other => r.fail("homotopy.family", format!("expected 'tilde' or 'with-delta', found '{other}'")),
        }
    }
    let (mut j1, mut j2) = (None, None);
    r.optional_positive("homotopy.j1", &mut j1);
    r.optional_positive("homotopy.j2", &mut j2);
    c.homotopy.j = [j1, j2];
    r.positive("homotopy.delta", &mut c.homotopy.delta);
    if let Some(t) = r.list("homotopy.t_grid") {
        if let Err(e) = check_t_grid(&t) {
            r.fail("homotopy.t_grid", e);
        }
        c.homotopy.t_grid = t;
    }
    r.optional_positive("homotopy.r", &mut c.homotopy.r);
    r.optional_positive("homotopy.r_tilde", &mut c.homotopy.r_tilde);
    r.optional_positive("homotopy.r_hat", &mut c.homotopy.r_hat);
    if let (Some(rh), Some(rr)) = (c.homotopy.r_hat, c.homotopy.r) {
        if !(rh < rr) {
            r.fail("homotopy.r_hat", format!("must be smaller than homotopy.r = {rr}, got {rh}"));
        }
    }
    r.set("homotopy.seeds", "a seed count", &mut c.homotopy.seeds);

    r.optional_positive("probe.j", &mut c.probe.j);
    if let Some(d) = r.list("probe.deltas") {
        if d.iter().any(|v| !(*v > 0.0)) {
            r.fail("probe.deltas", "every delta must be positive".into());
        }
        c.probe.deltas = d;
    }
    r.set("probe.seeds", "a seed count", &mut c.probe.seeds);
    for (key, v) in [("homotopy.seeds", c.homotopy.seeds), ("probe.seeds", c.probe.seeds)] {
        if v == 0 {
            r.fail(key, "needs at least one seed".into());
        }
    }

    let has_lower = r.entries.contains_key("box.lower_scale");
    let has_upper = r.entries.contains_key("box.upper_scale");
    if has_lower || has_upper {
        let mut b = BoxSpec {
            lower_scale: f64::NAN,
            upper_scale: f64::NAN,
        };
        r.positive("box.lower_scale", &mut b.lower_scale);
        r.positive("box.upper_scale", &mut b.upper_scale);
        if !(has_lower && has_upper) {
            let missing = if has_lower { "box.upper_scale" } else { "box.lower_scale" };
            r.errors.push(ConfigError::Invalid {
                origin: origin.into(),
                line: 0,
                key: missing.into(),
                message: "both box scalings are required".into(),
            });
        }
        c.manual_box = Some(b);
    }

    if let Some(dir) = r.entries.get("output.dir").map(|e| e.value.clone()) {
        if dir.is_empty() {
            r.fail("output.dir", "must not be empty".into());
        }
        c.output.dir = dir;
    }
    r.set("output.csv", "true or false", &mut c.output.csv);
    r.set("run.rng_seed", "an unsigned integer", &mut c.rng_seed);

    if r.errors.is_empty() {
        Ok(c)
    } else {
        r.errors.sort_by_key(|e| match e {
            ConfigError::Parse { line, .. } | ConfigError::Invalid { line, .. } => *line,
            ConfigError::Io { .. } => 0,
        });
        Err(ConfigErrors(r.errors))
    }
}
