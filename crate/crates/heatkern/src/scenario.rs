//! Declarative scenario files and report persistence.
//!
//! Scenarios are TOML documents binding a manifold, kernel, potential,
//! probe grid, quadrature and series configuration, and a certificate list.
//! Numeric fields are decimal strings (`t_min = "0.01"`), so a file loads
//! and saves byte-for-byte with no float round-trip drift; the raw document
//! is kept alongside the resolved configuration for that reason.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::certify::{CertificateKind, CertificateReport, ProbeGrid};
use crate::error::{Error, Result};
use crate::geometry::{ManifoldModel, Point};
use crate::kernel::{BaseKernel, EnvelopeForm};
use crate::potential::{ExhaustionSpec, GridPotential, Potential};
use crate::quadrature::{QuadratureConfig, QuadratureMode};
use crate::series::SeriesConfig;

pub const SCHEMA_VERSION: u32 = 1;

fn parse_decimal(field: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("{field}: not a decimal number: {s:?}")))
}

fn parse_point(field: &str, coords: &[String]) -> Result<Point> {
    let mut out = Vec::with_capacity(coords.len());
    for (i, c) in coords.iter().enumerate() {
        out.push(parse_decimal(&format!("{field}[{i}]"), c)?);
    }
    Ok(Point(out))
}

/// Raw manifold description; products nest through `factors`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<Vec<ManifoldSpec>>,
}

impl ManifoldSpec {
    pub fn resolve(&self) -> Result<ManifoldModel> {
        let model = match self.kind.as_str() {
            "euclidean" => ManifoldModel::Euclidean {
                dimension: self.dimension.ok_or_else(|| missing("manifold.dimension"))?,
            },
            "half-space" => ManifoldModel::HalfSpace {
                dimension: self.dimension.ok_or_else(|| missing("manifold.dimension"))?,
            },
            "hyperbolic3" => ManifoldModel::Hyperbolic3,
            "hyperbolic-n" => ManifoldModel::HyperbolicN {
                dimension: self.dimension.ok_or_else(|| missing("manifold.dimension"))?,
            },
            "product" => {
                let factors = self.factors.as_ref().ok_or_else(|| missing("manifold.factors"))?;
                if factors.len() != 2 {
                    return Err(Error::Parse("manifold.factors: need exactly two".into()));
                }
                ManifoldModel::Product(
                    Box::new(factors[0].resolve()?),
                    Box::new(factors[1].resolve()?),
                )
            }
            other => return Err(Error::Parse(format!("manifold.kind: unknown kind {other:?}"))),
        };
        model.validate()?;
        Ok(model)
    }
}

fn missing(field: &str) -> Error {
    Error::Parse(format!("{field}: missing required field"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    /// Spectral shift `lambda`, decimal string.
    #[serde(default = "zero_string")]
    pub shift: String,
    /// `exact`, `aronson`, `li-yau`, `hyperbolic-comparison`, `sub-gaussian`.
    #[serde(default = "exact_string")]
    pub exactness: String,
    /// Envelope constants: `[c1, c2, c3, c4]` for the Gaussian envelopes,
    /// `[lower, upper]` for the hyperbolic comparison,
    /// `[alpha, beta, c, lower, upper]` for the sub-Gaussian profile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<Vec<String>>,
}

fn zero_string() -> String {
    "0".into()
}

fn exact_string() -> String {
    "exact".into()
}

impl KernelSpec {
    pub fn resolve(&self, manifold: &ManifoldModel) -> Result<BaseKernel> {
        let shift = parse_decimal("kernel.shift", &self.shift)?;
        let constants: Vec<f64> = match &self.constants {
            Some(cs) => cs
                .iter()
                .enumerate()
                .map(|(i, c)| parse_decimal(&format!("kernel.constants[{i}]"), c))
                .collect::<Result<_>>()?,
            None => vec![],
        };
        let take = |n: usize| -> Result<Vec<f64>> {
            if constants.len() == n {
                Ok(constants.clone())
            } else if constants.is_empty() {
                Ok(vec![1.0; n])
            } else {
                Err(Error::Parse(format!(
                    "kernel.constants: expected {n} values for {}",
                    self.exactness
                )))
            }
        };
        let kernel = match self.exactness.as_str() {
            "exact" => BaseKernel::exact(manifold.clone())?,
            "aronson" => {
                let c = take(4)?;
                BaseKernel::envelope(
                    manifold.clone(),
                    EnvelopeForm::Aronson { c1: c[0], c2: c[1], c3: c[2], c4: c[3] },
                )?
            }
            "li-yau" => {
                let c = take(4)?;
                BaseKernel::envelope(
                    manifold.clone(),
                    EnvelopeForm::LiYau { c1: c[0], c2: c[1], c3: c[2], c4: c[3] },
                )?
            }
            "hyperbolic-comparison" => {
                let c = take(2)?;
                BaseKernel::envelope(
                    manifold.clone(),
                    EnvelopeForm::HyperbolicComparison { lower: c[0], upper: c[1] },
                )?
            }
            "sub-gaussian" => {
                let c = if constants.len() == 5 {
                    constants.clone()
                } else {
                    return Err(Error::Parse(
                        "kernel.constants: sub-gaussian needs [alpha, beta, c, lower, upper]"
                            .into(),
                    ));
                };
                BaseKernel::envelope(
                    manifold.clone(),
                    EnvelopeForm::SubGaussian {
                        alpha: c[0],
                        beta: c[1],
                        c: c[2],
                        lower: c[3],
                        upper: c[4],
                    },
                )?
            }
            other => return Err(Error::Parse(format!("kernel.exactness: unknown {other:?}"))),
        };
        Ok(kernel.shifted(shift))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    /// `ball`, `bump`, `radial-power`, `constant`, `grid-csv`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_cutoff: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<String>,
}

impl PotentialSpec {
    pub fn resolve(&self, dimension: usize, base_dir: &Path) -> Result<Potential> {
        let center = match &self.center {
            Some(c) => parse_point("potential.center", c)?,
            None => Point(vec![0.0; dimension]),
        };
        if center.dim() != dimension {
            return Err(Error::Config(format!(
                "potential.center: dimension {} does not match manifold dimension {}",
                center.dim(),
                dimension
            )));
        }
        let amp = || -> Result<f64> {
            parse_decimal(
                "potential.amplitude",
                self.amplitude.as_deref().ok_or_else(|| missing("potential.amplitude"))?,
            )
        };
        let rad = || -> Result<f64> {
            parse_decimal(
                "potential.radius",
                self.radius.as_deref().ok_or_else(|| missing("potential.radius"))?,
            )
        };
        match self.kind.as_str() {
            "ball" => Ok(Potential::ball_indicator(center, rad()?, amp()?)),
            "bump" => Ok(Potential::compact_bump(
                center,
                rad()?,
                amp()?,
                self.smoothness.unwrap_or(2),
            )),
            "radial-power" => Ok(Potential::radial_power_law(
                parse_decimal(
                    "potential.exponent",
                    self.exponent.as_deref().ok_or_else(|| missing("potential.exponent"))?,
                )?,
                parse_decimal("potential.inner_cutoff", self.inner_cutoff.as_deref().unwrap_or("0"))?,
                amp()?,
                dimension,
            )),
            "constant" => Ok(Potential::constant(amp()?)),
            "grid-csv" => {
                let rel = self.csv_path.as_deref().ok_or_else(|| missing("potential.csv_path"))?;
                let path = base_dir.join(rel);
                let grid = load_grid_csv(&path, dimension)?;
                Ok(Potential::GridSampled(grid))
            }
            other => Err(Error::Parse(format!("potential.kind: unknown {other:?}"))),
        }
    }
}

/// Loads a sampled potential from CSV with columns `x0,...,x(d-1),value`.
/// The coordinates must form a complete regular lattice; rows may come in
/// any order.
pub fn load_grid_csv(path: &Path, dimension: usize) -> Result<GridPotential> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if lineno == 0 && fields.iter().any(|f| f.parse::<f64>().is_err()) {
            continue; // header row
        }
        if fields.len() != dimension + 1 {
            return Err(Error::Parse(format!(
                "grid csv line {}: expected {} columns, got {}",
                lineno + 1,
                dimension + 1,
                fields.len()
            )));
        }
        let mut coords = Vec::with_capacity(dimension);
        for f in &fields[..dimension] {
            coords.push(
                f.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("grid csv line {}: bad number", lineno + 1)))?,
            );
        }
        let value = fields[dimension]
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("grid csv line {}: bad value", lineno + 1)))?;
        rows.push((coords, value));
    }
    if rows.is_empty() {
        return Err(Error::Parse("grid csv: no data rows".into()));
    }
    // axis coordinates: sorted unique values per axis
    let mut axes: Vec<Vec<f64>> = vec![Vec::new(); dimension];
    for (coords, _) in &rows {
        for (i, &c) in coords.iter().enumerate() {
            if !axes[i].iter().any(|&a| (a - c).abs() <= 1e-12 * a.abs().max(1.0)) {
                axes[i].push(c);
            }
        }
    }
    for axis in &mut axes {
        axis.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
    let expected: usize = shape.iter().product();
    if rows.len() != expected {
        return Err(Error::Parse(format!(
            "grid csv: {} rows do not fill the {:?} lattice",
            rows.len(),
            shape
        )));
    }
    let origin: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    let mut spacing = Vec::with_capacity(dimension);
    for (i, axis) in axes.iter().enumerate() {
        if axis.len() < 2 {
            return Err(Error::Parse(format!("grid csv: axis {i} needs at least two nodes")));
        }
        let h = axis[1] - axis[0];
        for w in axis.windows(2) {
            if ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs() {
                return Err(Error::Parse(format!("grid csv: axis {i} is not uniformly spaced")));
            }
        }
        spacing.push(h);
    }
    let mut values = vec![f64::NAN; expected];
    for (coords, value) in rows {
        let mut flat = 0;
        for i in 0..dimension {
            let idx = ((coords[i] - origin[i]) / spacing[i]).round() as usize;
            flat = flat * shape[i] + idx;
        }
        values[flat] = value;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Parse("grid csv: duplicate rows leave lattice holes".into()));
    }
    GridPotential::new(origin, spacing, shape, values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustionFileSpec {
    pub center: Vec<String>,
    pub radii: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFileSpec {
    pub t_min: String,
    pub t_max: String,
    pub per_decade: usize,
    #[serde(default = "default_far")]
    pub far_multipliers: Vec<String>,
}

fn default_far() -> Vec<String> {
    vec!["2".into(), "4".into(), "8".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureFileSpec {
    pub time_nodes: usize,
    pub mc_samples: usize,
    #[serde(default = "default_strata")]
    pub strata: usize,
    /// `monte-carlo-bridge` or `deterministic-tensor`.
    #[serde(default = "default_mode")]
    pub mode: String,
}

fn default_strata() -> usize {
    4
}

fn default_mode() -> String {
    "monte-carlo-bridge".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFileSpec {
    pub epsilon: String,
    #[serde(default = "default_max_terms")]
    pub max_terms: usize,
    #[serde(default = "default_rel_tol")]
    pub relative_tolerance: String,
    /// `"estimate"` to certify a constant by scanning, or a decimal value.
    #[serde(default = "default_three_k")]
    pub three_k_constant: String,
    #[serde(default = "default_depth")]
    pub nesting_depth: usize,
}

fn default_max_terms() -> usize {
    16
}

fn default_rel_tol() -> String {
    "1e-6".into()
}

fn default_three_k() -> String {
    "estimate".into()
}

fn default_depth() -> usize {
    8
}

/// The raw scenario document, field-for-field as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub name: String,
    pub seed: Option<u64>,
    /// Kept before the table-typed fields: TOML top-level keys must precede
    /// table headers.
    pub certificates: Vec<String>,
    pub manifold: ManifoldSpec,
    #[serde(default = "default_kernel")]
    pub kernel: KernelSpec,
    pub potential: PotentialSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exhaustion: Option<ExhaustionFileSpec>,
    pub grid: GridFileSpec,
    pub quadrature: QuadratureFileSpec,
    pub series: SeriesFileSpec,
}

fn default_kernel() -> KernelSpec {
    KernelSpec { shift: zero_string(), exactness: exact_string(), constants: None }
}

/// Where the series gets its 3k constant from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThreeKSource {
    /// Certify a constant with a scan before running the series.
    Estimate,
    /// A caller-supplied constant.
    Fixed(f64),
}

/// A validated, resolved scenario. Keeps the raw document for byte-stable
/// round trips.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub raw: ScenarioFile,
    pub name: String,
    pub seed: u64,
    pub manifold: ManifoldModel,
    pub kernel: BaseKernel,
    pub potential: Potential,
    pub exhaustion: ExhaustionSpec,
    pub grid: ProbeGrid,
    pub quadrature: QuadratureConfig,
    pub epsilon: f64,
    pub three_k: ThreeKSource,
    pub max_terms: usize,
    pub relative_tolerance: f64,
    pub nesting_depth: usize,
    pub certificates: Vec<CertificateKind>,
}

impl Scenario {
    pub fn resolve(raw: ScenarioFile, base_dir: &Path) -> Result<Scenario> {
        if raw.schema_version != SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {} (unknown version rejected)",
                raw.schema_version
            )));
        }
        let seed = raw.seed.ok_or_else(|| missing("seed"))?;
        let manifold = raw.manifold.resolve()?;
        let kernel = raw.kernel.resolve(&manifold)?;
        let dimension = manifold.dimension();
        let potential = raw.potential.resolve(dimension, base_dir)?;
        let t_min = parse_decimal("grid.t_min", &raw.grid.t_min)?;
        let t_max = parse_decimal("grid.t_max", &raw.grid.t_max)?;
        let far: Vec<f64> = raw
            .grid
            .far_multipliers
            .iter()
            .enumerate()
            .map(|(i, m)| parse_decimal(&format!("grid.far_multipliers[{i}]"), m))
            .collect::<Result<_>>()?;
        let grid = ProbeGrid::build(
            &manifold,
            potential.support_ball(),
            t_min,
            t_max,
            raw.grid.per_decade,
            &far,
        )?;
        let exhaustion = match &raw.exhaustion {
            Some(spec) => {
                let center = parse_point("exhaustion.center", &spec.center)?;
                if center.dim() != dimension {
                    return Err(Error::Config(
                        "exhaustion.center: dimension does not match the manifold".into(),
                    ));
                }
                let radii: Vec<f64> = spec
                    .radii
                    .iter()
                    .enumerate()
                    .map(|(i, r)| parse_decimal(&format!("exhaustion.radii[{i}]"), r))
                    .collect::<Result<_>>()?;
                ExhaustionSpec::new(center, radii)?
            }
            None => {
                let (c, r) = potential
                    .support_ball()
                    .unwrap_or((grid.reference_point.clone(), 1.0));
                ExhaustionSpec::new(c, (1..=7).map(|i| r * 1.5 * 1.5f64.powi(i)).collect())?
            }
        };
        let mode = match raw.quadrature.mode.as_str() {
            "monte-carlo-bridge" => QuadratureMode::MonteCarloBridge,
            "deterministic-tensor" => QuadratureMode::DeterministicTensor,
            other => return Err(Error::Parse(format!("quadrature.mode: unknown {other:?}"))),
        };
        let quadrature = QuadratureConfig {
            time_nodes: raw.quadrature.time_nodes,
            mc_samples: raw.quadrature.mc_samples,
            seed,
            mode,
            strata: raw.quadrature.strata,
        };
        quadrature.validate()?;
        let three_k = match raw.series.three_k_constant.as_str() {
            "estimate" => ThreeKSource::Estimate,
            s => ThreeKSource::Fixed(parse_decimal("series.three_k_constant", s)?),
        };
        let certificates: Vec<CertificateKind> = raw
            .certificates
            .iter()
            .map(|c| certificate_by_name(c))
            .collect::<Result<_>>()?;
        Ok(Scenario {
            name: raw.name.clone(),
            seed,
            manifold,
            kernel,
            potential,
            exhaustion,
            grid,
            quadrature,
            epsilon: parse_decimal("series.epsilon", &raw.series.epsilon)?,
            three_k,
            max_terms: raw.series.max_terms,
            relative_tolerance: parse_decimal(
                "series.relative_tolerance",
                &raw.series.relative_tolerance,
            )?,
            nesting_depth: raw.series.nesting_depth,
            certificates,
            raw,
        })
    }

    /// Series configuration with a resolved 3k constant.
    pub fn series_config(&self, three_k_constant: f64) -> SeriesConfig {
        SeriesConfig {
            epsilon: self.epsilon,
            max_terms: self.max_terms,
            relative_tolerance: self.relative_tolerance,
            three_k_constant,
            nesting_depth: self.nesting_depth,
            quadrature: self.quadrature,
        }
    }
}

pub fn certificate_by_name(name: &str) -> Result<CertificateKind> {
    Ok(match name {
        "three-k" => CertificateKind::ThreeK,
        "restricted-three-k" => CertificateKind::RestrictedThreeK,
        "doubling" => CertificateKind::Doubling,
        "small-perturbation-tail" => CertificateKind::SmallPerturbationTail,
        "semismall-tail" => CertificateKind::SemismallTail,
        "equivalence-ratio" => CertificateKind::EquivalenceRatio,
        "log-convexity" => CertificateKind::LogConvexity,
        "chapman-kolmogorov" => CertificateKind::ChapmanKolmogorov,
        "quasi-symmetry" => CertificateKind::QuasiSymmetry,
        "quasi-monotone" => CertificateKind::QuasiMonotone,
        "short-time-comparison" => CertificateKind::ShortTimeComparison,
        "ratio-limit-scan" => CertificateKind::RatioLimitScan,
        "martin-round-trip" => CertificateKind::MartinRoundTrip,
        other => return Err(Error::Parse(format!("certificates: unknown certificate {other:?}"))),
    })
}

/// Loads and validates a scenario file; invariant violations are reported
/// with their field paths.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path)?;
    let raw: ScenarioFile =
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    Scenario::resolve(raw, base)
}

/// Serializes the raw scenario document back to TOML.
pub fn save_scenario(raw: &ScenarioFile, path: &Path) -> Result<()> {
    let text = toml::to_string_pretty(raw).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

/// Writes a certificate report as a JSON document plus a flat CSV probe
/// table. Filenames embed the scenario name, certificate name, and seed, so
/// distinct seeds never overwrite each other. Returns the JSON path.
pub fn persist_report(
    report: &CertificateReport,
    directory: &Path,
    scenario_name: &str,
) -> Result<PathBuf> {
    fs::create_dir_all(directory)?;
    // per-level reports (exhaustion tails) carry their index in the name so
    // a sequence never overwrites itself
    let level = report
        .params
        .iter()
        .find(|(k, _)| k == "n")
        .map(|(_, v)| format!("__n{v}"))
        .unwrap_or_default();
    let stem = format!(
        "{}__{}{}__seed{}",
        sanitize(scenario_name),
        report.certificate.name(),
        level,
        report.seed
    );
    let json_path = directory.join(format!("{stem}.json"));
    let csv_path = directory.join(format!("{stem}.csv"));
    let json = serde_json::to_vec_pretty(report).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(&json_path, json)?;
    fs::write(&csv_path, probe_csv(report))?;
    Ok(json_path)
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '-' }).collect()
}

/// CSV probe table: `probe_id, x..., y..., t, value, stat_err, trunc_err`.
pub fn probe_csv(report: &CertificateReport) -> String {
    let dim = report.probes.first().map_or(0, |p| p.x.len());
    let mut out = String::from("probe_id");
    for i in 0..dim {
        out.push_str(&format!(",x{i}"));
    }
    for i in 0..dim {
        out.push_str(&format!(",y{i}"));
    }
    out.push_str(",t,value,stat_err,trunc_err\n");
    for p in &report.probes {
        out.push_str(&p.probe_id.to_string());
        for c in &p.x {
            out.push_str(&format!(",{c}"));
        }
        for c in &p.y {
            out.push_str(&format!(",{c}"));
        }
        out.push_str(&format!(",{},{},{},{}\n", p.t, p.value, p.stat_err, p.trunc_err));
    }
    out
}

/// Reads a persisted report back.
pub fn load_report(path: &Path) -> Result<CertificateReport> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_toml() -> String {
        r#"
schema_version = 1
name = "euclid3-bump"
seed = 42
certificates = ["three-k", "doubling"]

[manifold]
kind = "euclidean"
dimension = 3

[potential]
kind = "ball"
center = ["0", "0", "0"]
radius = "1"
amplitude = "0.5"

[grid]
t_min = "0.01"
t_max = "100"
per_decade = 3

[quadrature]
time_nodes = 8
mc_samples = 256

[series]
epsilon = "0.1"
"#
        .to_string()
    }

    #[test]
    fn minimal_scenario_loads() {
        let dir = std::env::temp_dir().join("heatkern-scn-load");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("minimal.toml");
        std::fs::write(&path, minimal_toml()).unwrap();
        let s = load_scenario(&path).unwrap();
        assert_eq!(s.name, "euclid3-bump");
        assert_eq!(s.seed, 42);
        assert_eq!(s.manifold.dimension(), 3);
        assert_eq!(s.certificates.len(), 2);
        assert_eq!(s.epsilon, 0.1);
    }

    #[test]
    fn dimension_mismatch_is_reported_with_field_path() {
        let bad = minimal_toml().replace(
            "center = [\"0\", \"0\", \"0\"]",
            "center = [\"0\", \"0\"]",
        );
        let raw: ScenarioFile = toml::from_str(&bad).unwrap();
        let err = Scenario::resolve(raw, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("potential.center"), "{err}");
    }

    #[test]
    fn missing_seed_is_an_error() {
        let bad = minimal_toml().replace("seed = 42\n", "");
        let raw: ScenarioFile = toml::from_str(&bad).unwrap();
        let err = Scenario::resolve(raw, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
    }

    #[test]
    fn unknown_schema_version_is_rejected() {
        let bad = minimal_toml().replace("schema_version = 1", "schema_version = 9");
        let raw: ScenarioFile = toml::from_str(&bad).unwrap();
        assert!(Scenario::resolve(raw, Path::new(".")).is_err());
    }

    #[test]
    fn scenario_round_trips_field_for_field() {
        let raw: ScenarioFile = toml::from_str(&minimal_toml()).unwrap();
        let dir = std::env::temp_dir().join("heatkern-scn-rt");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rt.toml");
        save_scenario(&raw, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let back: ScenarioFile = toml::from_str(&text).unwrap();
        assert_eq!(raw, back);
        // and a second save is byte-identical
        let path2 = dir.join("rt2.toml");
        save_scenario(&back, &path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn reports_persist_and_reload() {
        use crate::certify::{check_doubling, geometric_times};
        let k = BaseKernel::exact(ManifoldModel::euclidean(2)).unwrap();
        let x0 = Point::new(vec![0.0, 0.0]);
        let times = geometric_times(1.0, 100.0, 2).unwrap();
        let report = check_doubling(&k, &x0, &times, 0.5).unwrap();
        let dir = std::env::temp_dir().join("heatkern-report-rt");
        let p1 = persist_report(&report, &dir, "demo").unwrap();
        let back = load_report(&p1).unwrap();
        assert_eq!(report, back);
        // same seed twice: byte-identical JSON
        let before = std::fs::read(&p1).unwrap();
        let p2 = persist_report(&report, &dir, "demo").unwrap();
        assert_eq!(before, std::fs::read(&p2).unwrap());
        // the CSV table exists and has the header
        let csv = std::fs::read_to_string(p1.with_extension("csv")).unwrap();
        assert!(csv.starts_with("probe_id,x0,x1,y0,y1,t,value,stat_err,trunc_err"));
    }

    #[test]
    fn grid_csv_loader_round_trip() {
        let dir = std::env::temp_dir().join("heatkern-grid-csv");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("v.csv");
        let mut text = String::from("x0,x1,value\n");
        for i in 0..3 {
            for j in 0..4 {
                text.push_str(&format!("{},{},{}\n", i as f64 * 0.5, j as f64 * 0.25, i + j));
            }
        }
        std::fs::write(&path, text).unwrap();
        let grid = load_grid_csv(&path, 2).unwrap();
        assert_eq!(grid.shape, vec![3, 4]);
        let v = Potential::GridSampled(grid);
        let val = v.evaluate(&Point::new(vec![0.5, 0.25])).unwrap();
        assert!((val - 2.0).abs() < 1e-12);
    }
}
