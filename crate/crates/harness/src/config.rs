//! Experiment configuration: a TOML document with the sections `problem`,
//! `fine`, `coarse`, `parareal`, `theta` and `output`, plus a top-level
//! `seed`. See the README for every key and its default.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::HarnessError;

pub const PROBLEM_IDS: [&str; 8] = ["scalar", "harmonic", "forced", "heat", "wave", "spin_orbit", "kepler1", "kepler2"];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_re: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_im: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pulses: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub force_both: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dx: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bumps: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g12: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FineBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub substeps: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoarseBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(rename = "H", skip_serializing_if = "Option::is_none")]
    pub span: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub substeps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PararealBlock {
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(rename = "K", default)]
    pub iterations: usize,
    #[serde(default = "one")]
    pub windows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub skip_converged: bool,
    /// Truncate the written iterations at the first `k` whose largest error
    /// is below this value; absent means off.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub early_stop: Option<f64>,
}

fn one() -> usize {
    1
}

impl Default for PararealBlock {
    fn default() -> Self {
        PararealBlock {
            steps: None,
            t_final: None,
            iterations: 0,
            windows: 1,
            threads: None,
            skip_converged: false,
            early_stop: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaBlock {
    #[serde(default = "identity")]
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub im: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub form: Option<String>,
}

fn identity() -> String {
    "identity".into()
}

impl Default for ThetaBlock {
    fn default() -> Self {
        ThetaBlock { kind: identity(), value: None, im: None, tol: None, window: None, form: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    /// Write `states.bin`.
    #[serde(default)]
    pub states: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report_step: Option<usize>,
    #[serde(default = "default_cpus")]
    pub n_cpu: usize,
    #[serde(default)]
    pub c_com: f64,
}

fn default_cpus() -> usize {
    8
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { states: false, report_step: None, n_cpu: default_cpus(), c_com: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub problem: ProblemBlock,
    pub fine: FineBlock,
    pub coarse: CoarseBlock,
    pub parareal: PararealBlock,
    pub theta: ThetaBlock,
    pub output: OutputBlock,
}

pub fn config_error(key: impl Into<String>, msg: impl Into<String>) -> HarnessError {
    HarnessError::Config { key: key.into(), msg: msg.into() }
}

fn section<T: DeserializeOwned + Default>(table: &Table, key: &str) -> Result<T, HarnessError> {
    match table.get(key) {
        None => Ok(T::default()),
        Some(Value::Table(t)) => t.clone().try_into().map_err(|e: toml::de::Error| config_error(key, e.message())),
        Some(_) => Err(config_error(key, "expected a table")),
    }
}

/// Parses a TOML value literal, falling back to a plain string.
pub fn parse_literal(text: &str) -> Value {
    let doc = format!("v = {text}");
    match doc.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(text.into())),
        Err(_) => Value::String(text.into()),
    }
}

/// Applies `a.b.c=value` to a table, creating intermediate tables.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<(), HarnessError> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| config_error(assignment, "override must look like section.key=value"))?;
    let key = key.trim();
    set_dotted(table, key, parse_literal(value.trim()))
}

pub fn set_dotted(table: &mut Table, key: &str, value: Value) -> Result<(), HarnessError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(config_error(key, "empty key segment"));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| config_error(key, format!("`{part}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

pub fn get_dotted<'a>(table: &'a Table, key: &str) -> Option<&'a Value> {
    let mut parts = key.split('.');
    let mut cur = table.get(parts.next()?)?;
    for part in parts {
        cur = cur.as_table()?.get(part)?;
    }
    Some(cur)
}

pub fn load_table(path: &std::path::Path) -> Result<Table, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| config_error("--config", format!("{}: {e}", path.display())))?;
    text.parse::<Table>().map_err(|e| config_error("--config", format!("{}: {}", path.display(), e.message())))
}

impl ExperimentConfig {
    /// Typed view of a raw table with defaults filled in.
    pub fn from_table(table: &Table) -> Result<Self, HarnessError> {
        for key in table.keys() {
            if !["seed", "problem", "fine", "coarse", "parareal", "theta", "output"].contains(&key.as_str()) {
                return Err(config_error(key.as_str(), "unknown section"));
            }
        }
        let id = get_dotted(table, "problem.id");
        match id {
            None => return Err(config_error("problem.id", format!("missing; expected one of {}", PROBLEM_IDS.join(", ")))),
            Some(Value::String(s)) if PROBLEM_IDS.contains(&s.as_str()) => {}
            Some(v) => {
                return Err(config_error("problem.id", format!("unknown problem {v}; expected one of {}", PROBLEM_IDS.join(", "))))
            }
        }
        let seed = match table.get("seed") {
            None => 0,
            Some(Value::Integer(s)) if *s >= 0 => *s as u64,
            Some(v) => return Err(config_error("seed", format!("expected a non-negative integer, got {v}"))),
        };
        let mut cfg = ExperimentConfig {
            seed,
            problem: section(table, "problem")?,
            fine: section(table, "fine")?,
            coarse: section(table, "coarse")?,
            parareal: section(table, "parareal")?,
            theta: section(table, "theta")?,
            output: section(table, "output")?,
        };
        cfg.resolve()?;
        Ok(cfg)
    }

    fn resolve(&mut self) -> Result<(), HarnessError> {
        let p = &mut self.problem;
        let (fine_scheme, coarse_scheme, span, fine_h, steps) = match p.id.as_str() {
            "scalar" => {
                p.lambda_re.get_or_insert(0.0);
                p.lambda_im.get_or_insert(3.0);
                ("trap", "trap", 1.0, 1.0 / 20.0, 20)
            }
            "harmonic" => {
                p.omega.get_or_insert(1.0);
                ("verlet", "verlet", 0.5, 1e-2, 200)
            }
            "forced" => {
                p.pulses.get_or_insert(40);
                p.force_both.get_or_insert(false);
                ("rk4", "midpoint", 0.5, 1e-2, 200)
            }
            "heat" => {
                let eps = *p.eps.get_or_insert(0.04);
                let dx = *p.dx.get_or_insert(eps / 20.0);
                p.a0.get_or_insert(1.01);
                p.gamma.get_or_insert(0.0);
                p.boundary.get_or_insert_with(|| "dirichlet".into());
                let span = self.coarse.span.unwrap_or(2.0 * dx);
                ("cn", "cn", span, span / 50.0, 100)
            }
            "wave" => {
                p.alpha.get_or_insert(1.0 / 30.0);
                p.bumps.get_or_insert(true);
                let ratio = *p.ratio.get_or_insert(40);
                let span = self.coarse.span.unwrap_or(0.02);
                p.dx.get_or_insert(0.02);
                self.coarse.substeps.get_or_insert(2);
                ("leapfrog", "leapfrog", span, span / (2 * ratio) as f64, 200)
            }
            "spin_orbit" => {
                p.eps.get_or_insert(0.01);
                p.alpha.get_or_insert(1e-4);
                p.phi.get_or_insert(0.2);
                ("verlet", "verlet", 1.0, 1e-2, 100)
            }
            "kepler1" => {
                p.e.get_or_insert(0.5);
                ("verlet", "verlet", 0.02, 1e-3, 2000)
            }
            "kepler2" => {
                p.e1.get_or_insert(0.4);
                p.e2.get_or_insert(0.5);
                p.g12.get_or_insert(1e-5);
                ("verlet", "verlet", 0.02, 1e-3, 2000)
            }
            other => return Err(config_error("problem.id", format!("unknown problem `{other}`"))),
        };
        self.fine.scheme.get_or_insert_with(|| fine_scheme.into());
        self.coarse.scheme.get_or_insert_with(|| coarse_scheme.into());
        let span = *self.coarse.span.get_or_insert(span);
        self.coarse.substeps.get_or_insert(1);
        if !(span > 0.0 && span.is_finite()) {
            return Err(config_error("coarse.H", format!("must be positive, got {span}")));
        }
        match (self.fine.h, self.fine.substeps) {
            (Some(h), None) => {
                let ratio = span / h;
                if !(h > 0.0) || (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
                    return Err(config_error("fine.h", format!("H = {span} is not a positive integer multiple of h = {h}")));
                }
                self.fine.substeps = Some(ratio.round() as usize);
            }
            (None, Some(s)) => {
                if s == 0 {
                    return Err(config_error("fine.substeps", "must be positive"));
                }
                self.fine.h = Some(span / s as f64);
            }
            (None, None) => {
                self.fine.h = Some(fine_h);
                self.fine.substeps = Some((span / fine_h).round() as usize);
            }
            (Some(h), Some(s)) => {
                if ((span / s as f64) - h).abs() > 1e-12 * h {
                    return Err(config_error("fine.substeps", format!("{s} substeps of h = {h} do not span H = {span}")));
                }
            }
        }
        let steps = match (self.parareal.steps, self.parareal.t_final) {
            (Some(n), None) => n,
            (None, Some(t)) => {
                let n = t / span;
                if !(t > 0.0) || (n - n.round()).abs() > 1e-9 * n.max(1.0) {
                    return Err(config_error("parareal.T", format!("T = {t} is not a multiple of H = {span}")));
                }
                n.round() as usize
            }
            (None, None) => steps,
            (Some(n), Some(t)) => {
                if (n as f64 * span - t).abs() > 1e-9 * t.abs().max(1.0) {
                    return Err(config_error("parareal.T", format!("N·H = {} disagrees with T = {t}", n as f64 * span)));
                }
                n
            }
        };
        self.parareal.steps = Some(steps);
        self.parareal.t_final = Some(steps as f64 * span);
        if self.problem.id == "forced" {
            let t = *self.problem.t_final.get_or_insert(steps as f64 * span);
            if !(t > 0.0) {
                return Err(config_error("problem.t_final", "must be positive"));
            }
        }
        if self.parareal.windows == 0 || steps % self.parareal.windows != 0 {
            return Err(config_error(
                "parareal.windows",
                format!("{} windows do not divide N = {steps}", self.parareal.windows),
            ));
        }
        let theta = &mut self.theta;
        match theta.kind.as_str() {
            "identity" | "ratio" | "schedule" => {}
            "real" => {
                theta.value.get_or_insert(1.0);
            }
            "complex" => {
                theta.value.get_or_insert(1.0);
                theta.im.get_or_insert(0.0);
            }
            "interp" => {
                theta.tol.get_or_insert(1e-14);
                theta.form.get_or_insert_with(|| "anchored".into());
                if matches!(self.problem.id.as_str(), "heat" | "wave") {
                    theta.window.get_or_insert(11);
                }
            }
            other => {
                return Err(config_error(
                    "theta.kind",
                    format!("unknown kind `{other}`; expected identity, real, complex, ratio, interp or schedule"),
                ))
            }
        }
        let report = *self.output.report_step.get_or_insert(3 * steps / 4);
        if report > steps {
            return Err(config_error("output.report_step", format!("{report} exceeds N = {steps}")));
        }
        if self.output.n_cpu == 0 {
            return Err(config_error("output.n_cpu", "must be positive"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.parareal.steps.unwrap_or(0)
    }

    pub fn span(&self) -> f64 {
        self.coarse.span.unwrap_or(0.0)
    }

    /// Resolved configuration as TOML, without the thread count.
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.parareal.threads = None;
        toml::to_string(&c).expect("configuration serializes")
    }

    /// Hex SHA-256 of [`Self::canonical`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Key of the fine solution: everything the sequential fine run depends on.
    pub fn oracle_key(&self) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            seed: u64,
            problem: &'a ProblemBlock,
            fine: &'a FineBlock,
            span: f64,
            coarse_substeps: Option<usize>,
            steps: usize,
        }
        let seed = if self.problem.id == "forced" { self.seed } else { 0 };
        toml::to_string(&Key {
            seed,
            problem: &self.problem,
            fine: &self.fine,
            span: self.span(),
            coarse_substeps: if self.problem.id == "wave" { self.coarse.substeps } else { None },
            steps: self.steps(),
        })
        .expect("oracle key serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(text: &str) -> Table {
        text.parse().unwrap()
    }

    #[test]
    fn literals() {
        assert_eq!(parse_literal("20"), Value::Integer(20));
        assert_eq!(parse_literal("1e-3"), Value::Float(1e-3));
        assert_eq!(parse_literal("true"), Value::Boolean(true));
        assert_eq!(parse_literal("interp"), Value::String("interp".into()));
        assert_eq!(parse_literal("\"1\""), Value::String("1".into()));
    }

    #[test]
    fn overrides_create_sections() {
        let mut t = table("[problem]\nid = \"kepler1\"\n");
        apply_override(&mut t, "parareal.K=20").unwrap();
        apply_override(&mut t, "theta.kind = interp").unwrap();
        let cfg = ExperimentConfig::from_table(&t).unwrap();
        assert_eq!(cfg.parareal.iterations, 20);
        assert_eq!(cfg.theta.kind, "interp");
        assert_eq!(cfg.theta.tol, Some(1e-14));
        assert!(apply_override(&mut t, "novalue").is_err());
    }

    #[test]
    fn missing_id_is_named() {
        let err = ExperimentConfig::from_table(&table("[parareal]\nK = 2\n")).unwrap_err();
        assert!(matches!(&err, HarnessError::Config { key, .. } if key == "problem.id"));
    }

    #[test]
    fn defaults_are_resolved() {
        let cfg = ExperimentConfig::from_table(&table("[problem]\nid = \"heat\"\n")).unwrap();
        assert_eq!(cfg.problem.a0, Some(1.01));
        assert_eq!(cfg.fine.substeps, Some(50));
        assert_eq!(cfg.coarse.span, Some(0.004));
        assert_eq!(cfg.steps(), 100);
        assert_eq!(cfg.output.report_step, Some(75));
    }

    #[test]
    fn step_ratio_must_be_integral() {
        let err = ExperimentConfig::from_table(&table("[problem]\nid = \"kepler1\"\n[fine]\nh = 0.003\n")).unwrap_err();
        assert!(matches!(&err, HarnessError::Config { key, .. } if key == "fine.h"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_table(&table("[problem]\nid = \"scalar\"\n[theta]\nkin = \"real\"\n")).unwrap_err();
        assert!(matches!(&err, HarnessError::Config { key, .. } if key == "theta"));
    }

    #[test]
    fn hash_ignores_threads_only() {
        let mut t = table("[problem]\nid = \"harmonic\"\n");
        let base = ExperimentConfig::from_table(&t).unwrap().hash();
        apply_override(&mut t, "parareal.threads=8").unwrap();
        assert_eq!(ExperimentConfig::from_table(&t).unwrap().hash(), base);
        apply_override(&mut t, "parareal.K=3").unwrap();
        assert_ne!(ExperimentConfig::from_table(&t).unwrap().hash(), base);
    }
}
