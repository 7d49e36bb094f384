//! The `stability` subcommand: `Q_{N,0}` over a rectangle of complex θ.

use std::path::Path;

use theta_parareal::analysis::{stability_region, FineModel, StabilityGrid, StabilitySpec};
use theta_parareal::{Complex64, Error, SchemeId};

use crate::artifacts::write_atomic;
use crate::config::config_error;
use crate::HarnessError;

/// Parses `a`, `bi`, `a+bi`, `a-bi`, `i`, `-i` and `(a,b)`.
pub fn parse_complex(text: &str) -> Option<Complex64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return None;
    }
    if let Some(inner) = s.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
        let (re, im) = inner.split_once(',')?;
        return Some(Complex64::new(re.parse().ok()?, im.parse().ok()?));
    }
    let Some(body) = s.strip_suffix(['i', 'j']) else {
        return s.parse().ok().map(|re| Complex64::new(re, 0.0));
    };
    // Split at the last sign that is not the leading one or part of an exponent.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(i) => (&body[..i], &body[i..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        v => v.parse().ok()?,
    };
    Some(Complex64::new(re.parse().ok()?, im))
}

fn parse_range(key: &str, text: &str) -> Result<(f64, f64), HarnessError> {
    let bad = || config_error(key, format!("expected lo,hi, got `{text}`"));
    let (lo, hi) = text.split_once(',').ok_or_else(bad)?;
    Ok((lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?))
}

#[derive(Debug, Clone)]
pub struct StabilityArgs {
    pub lambda_h: String,
    pub coarse: String,
    /// Scheme name or `exact`.
    pub fine: String,
    pub substeps: u32,
    pub steps: usize,
    pub resolution: usize,
    pub re_range: String,
    pub im_range: String,
}

impl Default for StabilityArgs {
    fn default() -> Self {
        StabilityArgs {
            lambda_h: "0.1i".into(),
            coarse: "fe".into(),
            fine: "fe".into(),
            substeps: 20,
            steps: 10_000,
            resolution: 256,
            re_range: "-2,2".into(),
            im_range: "-2,2".into(),
        }
    }
}

pub fn spec_from_args(args: &StabilityArgs) -> Result<StabilitySpec, HarnessError> {
    let lambda_h = parse_complex(&args.lambda_h)
        .ok_or_else(|| config_error("--lambda-h", format!("not a complex literal: `{}`", args.lambda_h)))?;
    let coarse: SchemeId = args.coarse.parse().map_err(|e: Error| config_error("--coarse", e.to_string()))?;
    let fine = if args.fine.eq_ignore_ascii_case("exact") {
        FineModel::Exact
    } else {
        let scheme = args.fine.parse().map_err(|e: Error| config_error("--fine", e.to_string()))?;
        FineModel::Scheme { scheme, substeps: args.substeps }
    };
    let mut spec = StabilitySpec::new(lambda_h, coarse, fine, args.steps);
    spec.resolution = args.resolution;
    spec.re_range = parse_range("--re-range", &args.re_range)?;
    spec.im_range = parse_range("--im-range", &args.im_range)?;
    Ok(spec)
}

/// Computes the grid and writes it to `path`.
pub fn write_grid(spec: &StabilitySpec, path: &Path) -> Result<StabilityGrid, HarnessError> {
    let grid = stability_region(spec).map_err(|e| match e {
        Error::BadParameter(msg) => config_error("stability", msg),
        other => HarnessError::Numerical(other),
    })?;
    let mut text = Vec::new();
    grid.write_text(&mut text).map_err(|e| HarnessError::io(path.display().to_string(), e))?;
    write_atomic(path, &text)?;
    Ok(grid)
}
