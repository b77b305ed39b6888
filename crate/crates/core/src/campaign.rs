//! Randomized verification campaigns and their reports.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convexity::{convexity_check, ConvexityGrid, ConvexityReport};
use crate::curvature::{
    berwald_from_scalars, douglas_from_scalars, douglas_ode_residuals, landsberg_from_scalars, phi_r,
    ricci_flat_residuals, Rank3Tensor, Rank4Tensor,
};
use crate::error::{Error, Result};
use crate::family::{Domain, FamilySpec, MetricFamily};
use crate::oracle::{berwald_fd, douglas_fd, fd_projective_residual, hessian_fd, spray_fd, FdConfig};
use crate::point::EvalPoint;
use crate::tensor::{derived_scalars, DerivedScalars, FundamentalTensor};

pub const TOOL_VERSION: &str = concat!("warpfin ", env!("CARGO_PKG_VERSION"));

/// Check groups a campaign can request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Douglas,
    Berwald,
    Landsberg,
    Ricci,
    Projflat,
    Convexity,
    Oracle,
}

impl CheckKind {
    pub const ALL: [CheckKind; 7] = [
        CheckKind::Douglas,
        CheckKind::Berwald,
        CheckKind::Landsberg,
        CheckKind::Ricci,
        CheckKind::Projflat,
        CheckKind::Convexity,
        CheckKind::Oracle,
    ];

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown check '{name}'")))
    }

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Douglas => "douglas",
            CheckKind::Berwald => "berwald",
            CheckKind::Landsberg => "landsberg",
            CheckKind::Ricci => "ricci",
            CheckKind::Projflat => "projflat",
            CheckKind::Convexity => "convexity",
            CheckKind::Oracle => "oracle",
        }
    }

    /// Names of the report entries this group produces.
    pub fn entries(self) -> &'static [&'static str] {
        match self {
            CheckKind::Douglas => &["douglas", "douglas-ode"],
            CheckKind::Berwald => &["berwald"],
            CheckKind::Landsberg => &["landsberg"],
            CheckKind::Ricci => &["ricci"],
            CheckKind::Projflat => &["projflat", "phi-r"],
            CheckKind::Convexity => &["convexity"],
            CheckKind::Oracle => &["oracle-douglas", "oracle-berwald", "oracle-spray", "oracle-hessian"],
        }
    }
}

/// Tolerance per report entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub douglas: f64,
    pub douglas_ode: f64,
    pub berwald: f64,
    pub landsberg: f64,
    pub ricci: f64,
    pub projflat: f64,
    pub oracle: f64,
    pub oracle_hessian: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            douglas: 1e-9,
            douglas_ode: 1e-10,
            berwald: 1e-9,
            landsberg: 1e-9,
            ricci: 1e-9,
            projflat: 1e-7,
            oracle: 1e-5,
            oracle_hessian: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn for_entry(&self, name: &str) -> f64 {
        match name {
            "douglas" => self.douglas,
            "douglas-ode" => self.douglas_ode,
            "berwald" => self.berwald,
            "landsberg" => self.landsberg,
            "ricci" => self.ricci,
            "projflat" | "phi-r" => self.projflat,
            "oracle-hessian" => self.oracle_hessian,
            "convexity" => 0.0,
            _ => self.oracle,
        }
    }
}

/// Grid used by convexity scans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanSpec {
    pub z_min: f64,
    pub z_max: f64,
    pub z_count: usize,
    pub r_count: usize,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self {
            z_min: -50.0,
            z_max: 50.0,
            z_count: 201,
            r_count: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignSpec {
    pub family: FamilySpec,
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub rho: f64,
    /// Defaults to `0.05 ρ`.
    pub r_min: Option<f64>,
    /// Defaults to `[r_min, 0.95 ρ]`.
    pub r_range: Option<(f64, f64)>,
    pub y0_range: (f64, f64),
    pub ybar_range: (f64, f64),
    pub checks: Vec<CheckKind>,
    pub tolerances: Tolerances,
    pub fd: FdConfig,
    pub scan: ScanSpec,
    /// Turns sampled-point evaluation failures into a hard error.
    pub strict: bool,
}

impl Default for CampaignSpec {
    fn default() -> Self {
        Self {
            family: FamilySpec::Preset { name: "flat".into() },
            n: 3,
            samples: 100,
            seed: 0,
            rho: 1.0,
            r_min: None,
            r_range: None,
            y0_range: (-1.5, 1.5),
            ybar_range: (0.5, 2.0),
            checks: vec![CheckKind::Douglas],
            tolerances: Tolerances::default(),
            fd: FdConfig::default(),
            scan: ScanSpec::default(),
            strict: false,
        }
    }
}

impl CampaignSpec {
    pub fn domain(&self) -> Result<Domain> {
        Domain::new(self.rho, self.r_min)
    }

    pub fn radius_range(&self) -> Result<(f64, f64)> {
        let d = self.domain()?;
        let (a, b) = self.r_range.unwrap_or((d.r_min, 0.95 * d.rho));
        if !(a >= d.r_min && b < d.rho && a <= b) {
            return Err(Error::Config(format!(
                "r range [{a}, {b}] must lie within [{}, {})",
                d.r_min, d.rho
            )));
        }
        Ok((a, b))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config("n must be at least 2".into()));
        }
        if self.samples == 0 {
            return Err(Error::Config("samples must be at least 1".into()));
        }
        self.radius_range()?;
        let (a, b) = self.y0_range;
        if !(a <= b) {
            return Err(Error::Config("empty y0 range".into()));
        }
        let (a, b) = self.ybar_range;
        if !(a > 0.0 && a <= b) {
            return Err(Error::Config("|ȳ| range must be positive and non-empty".into()));
        }
        self.fd.validate()
    }

    pub fn build_family(&self) -> Result<MetricFamily> {
        MetricFamily::from_spec(&self.family, self.domain()?)
    }

    /// The `index`-th sample point; independent of evaluation order.
    pub fn sample_point(&self, index: usize) -> Result<EvalPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let (r0, r1) = self.radius_range()?;
        let r = uniform(&mut rng, r0, r1);
        let xbar = random_unit(&mut rng, self.n).into_iter().map(|v| v * r).collect();
        let u = uniform(&mut rng, self.ybar_range.0, self.ybar_range.1);
        let ybar = random_unit(&mut rng, self.n).into_iter().map(|v| v * u).collect();
        let y0 = uniform(&mut rng, self.y0_range.0, self.y0_range.1);
        let x0 = uniform(&mut rng, -1.0, 1.0);
        EvalPoint::new(x0, xbar, y0, ybar)
    }
}

fn uniform<R: Rng>(rng: &mut R, a: f64, b: f64) -> f64 {
    if a == b {
        a
    } else {
        rng.random_range(a..b)
    }
}

/// Uniform direction on the unit sphere in `ℝⁿ`.
pub fn random_unit<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return v.into_iter().map(|a| a / norm).collect();
        }
    }
}

/// Haar-random orthogonal `n × n` matrix, row-major.
pub fn random_orthogonal<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let a = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let qr = a.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(q[(i, j)]);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstPoint {
    pub index: usize,
    pub point: EvalPoint,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    /// Maximum over evaluated samples of the per-point value.
    pub sup_norm: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub worst_point: Option<WorstPoint>,
    pub evaluated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFailure {
    pub index: usize,
    pub point: EvalPoint,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub tool_version: String,
    pub spec: CampaignSpec,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    /// Sample points whose evaluation raised an error.
    pub failures: Vec<PointFailure>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<u64>,
}

impl CurvatureReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn without_timing(&self) -> Self {
        Self {
            runtime_ms: None,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Per-sample values keyed by report entry name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointValues {
    pub index: usize,
    pub point: EvalPoint,
    pub values: BTreeMap<String, f64>,
    pub error: Option<String>,
}

fn rel_dev(a: &[f64], b: &[f64], scale: f64) -> f64 {
    let dev = a.iter().zip(b).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    if scale > 0.0 {
        dev / scale
    } else {
        dev
    }
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Relative deviation of a third-derivative tensor. The denominator is the
/// larger of the closed-form tensor's sup norm and the Berwald sup norm
/// (the natural size of third spray derivatives), so tensors that vanish
/// identically are compared on the Berwald scale.
fn tensor_rel_dev(closed: &Rank4Tensor, fd: &Rank4Tensor, berwald_scale: f64, u: f64) -> f64 {
    let scale = closed.sup_norm().max(berwald_scale);
    if scale * u > 1e-12 {
        closed.max_abs_diff(fd) / scale
    } else {
        closed.max_abs_diff(fd) * u
    }
}

struct OracleValues {
    values: BTreeMap<String, f64>,
    douglas_components: Vec<f64>,
    berwald_components: Vec<f64>,
}

fn oracle_values(
    family: &MetricFamily,
    fd: &FdConfig,
    ds: &DerivedScalars,
    p: &EvalPoint,
    berwald: &Rank4Tensor,
) -> Result<OracleValues> {
    let u = p.u();
    let bscale = berwald.sup_norm();
    let douglas = douglas_from_scalars(ds, p);
    let dfd = douglas_fd(family, p, fd)?;
    let bfd = berwald_fd(family, p, fd)?;
    let mut values = BTreeMap::new();
    values.insert("oracle-douglas".to_string(), tensor_rel_dev(&douglas, &dfd, bscale, u));
    values.insert("oracle-berwald".to_string(), tensor_rel_dev(berwald, &bfd, bscale, u));
    let g = ds.spray_scalars().spray(p);
    let gfd = spray_fd(family, p, fd)?;
    // A vanishing spray is compared on the scale u² of F².
    values.insert("oracle-spray".to_string(), rel_dev(&g, &gfd, sup(&g).max(1e-8 * u * u)));
    let ft = FundamentalTensor::from_scalars(ds, p);
    let hfd = hessian_fd(family, p, fd)?;
    values.insert("oracle-hessian".to_string(), rel_dev(&ft.g, &hfd, sup(&ft.g)));
    let components = |closed: &Rank4Tensor, approx: &Rank4Tensor| -> Vec<f64> {
        let scale = closed.sup_norm().max(bscale);
        closed
            .data
            .iter()
            .zip(&approx.data)
            .map(|(a, b)| if scale * u > 1e-12 { (a - b).abs() / scale } else { (a - b).abs() * u })
            .collect()
    };
    Ok(OracleValues {
        douglas_components: components(&douglas, &dfd),
        berwald_components: components(berwald, &bfd),
        values,
    })
}

fn evaluate_point(family: &MetricFamily, spec: &CampaignSpec, p: &EvalPoint) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    let u = p.u();
    let wants = |k: CheckKind| spec.checks.contains(&k);

    if wants(CheckKind::Convexity) {
        let flag = match family.phi_jet_with_orders(p.z(), p.r(), 2, 0) {
            Ok(phi) => {
                let (f0, f1, f2) = (phi.value(), phi.get(1, 0), phi.get(2, 0));
                let ok = 2.0 * f0 - p.z() * f1 > 0.0 && 2.0 * f0 * f2 - f1 * f1 > 0.0;
                if ok {
                    0.0
                } else {
                    1.0
                }
            }
            Err(Error::ConvexityViolation { .. }) => 1.0,
            Err(e) => return Err(e),
        };
        out.insert("convexity".into(), flag);
    }

    let needs_scalars = spec
        .checks
        .iter()
        .any(|k| !matches!(k, CheckKind::Convexity | CheckKind::Projflat));
    let ds: Option<DerivedScalars> = if needs_scalars || wants(CheckKind::Projflat) {
        Some(derived_scalars(family, p)?)
    } else {
        None
    };

    if let Some(ds) = &ds {
        let berwald = (wants(CheckKind::Berwald) || wants(CheckKind::Landsberg) || wants(CheckKind::Oracle))
            .then(|| berwald_from_scalars(ds, p));
        if wants(CheckKind::Douglas) {
            out.insert("douglas".into(), douglas_from_scalars(ds, p).sup_norm() * u);
            let res = douglas_ode_residuals(ds);
            out.insert("douglas-ode".into(), sup(&res));
        }
        if wants(CheckKind::Berwald) {
            out.insert("berwald".into(), berwald.as_ref().map_or(0.0, |b| b.sup_norm() * u));
        }
        if wants(CheckKind::Landsberg) {
            out.insert("landsberg".into(), landsberg_from_scalars(ds, p).sup_norm());
        }
        if wants(CheckKind::Ricci) {
            let (pp, qq) = ricci_flat_residuals(ds);
            out.insert("ricci".into(), pp.abs().max(qq.abs()));
        }
        if wants(CheckKind::Projflat) {
            out.insert("projflat".into(), fd_projective_residual(family, p, &spec.fd)?);
            out.insert("phi-r".into(), phi_r(ds));
        }
        if wants(CheckKind::Oracle) {
            let b = berwald.expect("computed above");
            out.extend(oracle_values(family, &spec.fd, ds, p, &b)?.values);
        }
    }
    Ok(out)
}

/// Evaluates every sample point in parallel, in index order.
pub fn evaluate_samples(family: &MetricFamily, spec: &CampaignSpec) -> Result<Vec<PointValues>> {
    spec.validate()?;
    let points: Vec<EvalPoint> = (0..spec.samples).map(|i| spec.sample_point(i)).collect::<Result<_>>()?;
    Ok(points
        .into_par_iter()
        .enumerate()
        .map(|(index, point)| match evaluate_point(family, spec, &point) {
            Ok(values) => PointValues {
                index,
                point,
                values,
                error: None,
            },
            Err(e) => PointValues {
                index,
                point,
                values: BTreeMap::new(),
                error: Some(e.to_string()),
            },
        })
        .collect())
}

fn aggregate(spec: &CampaignSpec, samples: &[PointValues]) -> (Vec<CheckResult>, Vec<PointFailure>) {
    let mut names: Vec<&str> = Vec::new();
    let mut kinds = spec.checks.clone();
    kinds.sort();
    kinds.dedup();
    for k in kinds {
        names.extend(k.entries());
    }
    let checks = names
        .into_iter()
        .map(|name| {
            let tolerance = spec.tolerances.for_entry(name);
            let mut worst: Option<WorstPoint> = None;
            let mut evaluated = 0;
            for s in samples {
                if let Some(&v) = s.values.get(name) {
                    evaluated += 1;
                    let worse = match &worst {
                        None => true,
                        Some(w) => v > w.value || v.is_nan(),
                    };
                    if worse && !worst.as_ref().is_some_and(|w| w.value.is_nan()) {
                        worst = Some(WorstPoint {
                            index: s.index,
                            point: s.point.clone(),
                            value: v,
                        });
                    }
                }
            }
            let sup_norm = worst.as_ref().map_or(0.0, |w| w.value);
            CheckResult {
                name: name.to_string(),
                sup_norm,
                tolerance,
                pass: evaluated > 0 && sup_norm <= tolerance,
                worst_point: worst,
                evaluated,
            }
        })
        .collect();
    let failures = samples
        .iter()
        .filter_map(|s| {
            s.error.as_ref().map(|m| PointFailure {
                index: s.index,
                point: s.point.clone(),
                message: m.clone(),
            })
        })
        .collect();
    (checks, failures)
}

/// Runs a verification campaign.
pub fn verify(spec: &CampaignSpec) -> Result<CurvatureReport> {
    let start = Instant::now();
    let family = spec.build_family()?;
    let samples = evaluate_samples(&family, spec)?;
    let mut report = report_from_samples(spec, &samples)?;
    report.runtime_ms = Some(start.elapsed().as_millis() as u64);
    Ok(report)
}

/// Aggregates precomputed samples into a report (no timing).
pub fn report_from_samples(spec: &CampaignSpec, samples: &[PointValues]) -> Result<CurvatureReport> {
    let (checks, failures) = aggregate(spec, samples);
    if spec.strict {
        if let Some(f) = failures.first() {
            return Err(Error::Domain(format!("sample {} failed: {}", f.index, f.message)));
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(CurvatureReport {
        tool_version: TOOL_VERSION.to_string(),
        spec: spec.clone(),
        seed: spec.seed,
        checks,
        failures,
        pass,
        runtime_ms: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub tool_version: String,
    pub spec: CampaignSpec,
    pub seed: u64,
    pub n: usize,
    pub convexity: ConvexityReport,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<u64>,
}

/// Scans strong convexity over a `(z, r)` grid.
pub fn scan_convexity(spec: &CampaignSpec) -> Result<ScanReport> {
    let start = Instant::now();
    let family = spec.build_family()?;
    let (r0, r1) = spec.radius_range()?;
    let s = &spec.scan;
    if s.z_count == 0 || s.r_count == 0 || !(s.z_min <= s.z_max) {
        return Err(Error::Config("empty convexity scan grid".into()));
    }
    let grid = ConvexityGrid::uniform((s.z_min, s.z_max), s.z_count, (r0, r1), s.r_count);
    let convexity = convexity_check(&family, &grid, spec.n, spec.seed)?;
    Ok(ScanReport {
        tool_version: TOOL_VERSION.to_string(),
        spec: spec.clone(),
        seed: spec.seed,
        n: spec.n,
        pass: convexity.ok && convexity.hessian_agreement,
        convexity,
        runtime_ms: Some(start.elapsed().as_millis() as u64),
    })
}

/// Every closed-form quantity at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub tool_version: String,
    pub family: FamilySpec,
    pub point: EvalPoint,
    pub z: f64,
    pub r: f64,
    pub s: f64,
    pub u: f64,
    pub finsler: f64,
    pub phi: f64,
    pub omega: f64,
    pub lambda: f64,
    pub scalars: BTreeMap<String, f64>,
    pub g: Vec<f64>,
    pub ginv: Vec<f64>,
    pub det: f64,
    pub det_closed: f64,
    pub spray: Vec<f64>,
    pub spray_divergence: f64,
    pub douglas: Rank4Tensor,
    pub berwald: Rank4Tensor,
    pub landsberg: Rank3Tensor,
    pub douglas_ode: [f64; 3],
    pub ricci_p: f64,
    pub ricci_q: f64,
    pub ricci: f64,
    pub phi_r: f64,
}

pub fn point_report(family: &MetricFamily, p: &EvalPoint) -> Result<PointReport> {
    let ds = derived_scalars(family, p)?;
    let ft = FundamentalTensor::from_scalars(&ds, p);
    let sc = ds.spray_scalars();
    let (rp, rq) = ricci_flat_residuals(&ds);
    let mut scalars = BTreeMap::new();
    for (name, jet) in [
        ("U", &ds.u),
        ("V", &ds.v),
        ("W", &ds.w),
        ("R", &ds.douglas_r),
        ("T", &ds.douglas_t),
        ("E", &ds.berwald_e),
        ("H", &ds.berwald_h),
    ] {
        scalars.insert(name.to_string(), jet.value());
    }
    Ok(PointReport {
        tool_version: TOOL_VERSION.to_string(),
        family: family.spec().clone(),
        point: p.clone(),
        z: p.z(),
        r: p.r(),
        s: p.s(),
        u: p.u(),
        finsler: family.finsler(p)?,
        phi: ds.phi.value(),
        omega: ds.omega.value(),
        lambda: ds.lambda.value(),
        scalars,
        g: ft.g.clone(),
        ginv: ft.ginv.clone(),
        det: ft.det,
        det_closed: ft.det_closed,
        spray: sc.spray(p),
        spray_divergence: sc.divergence(p),
        douglas: douglas_from_scalars(&ds, p),
        berwald: berwald_from_scalars(&ds, p),
        landsberg: landsberg_from_scalars(&ds, p),
        douglas_ode: douglas_ode_residuals(&ds),
        ricci_p: rp,
        ricci_q: rq,
        ricci: p.u() * p.u() * (-rp + p.s() * p.s() * rq),
        phi_r: phi_r(&ds),
    })
}

/// Maximum relative deviation of one tensor component over the campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentDeviation {
    pub tensor: String,
    /// `[A, B, C, D]` with `B <= C <= D`.
    pub index: [usize; 4],
    pub max_rel_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub report: CurvatureReport,
    pub components: Vec<ComponentDeviation>,
}

type OraclePoint = (PointValues, Vec<f64>, Vec<f64>);

/// Closed-form versus finite-difference comparison with a per-component
/// table for `D` and `B`.
pub fn oracle_compare(spec: &CampaignSpec) -> Result<OracleReport> {
    let start = Instant::now();
    let mut spec = spec.clone();
    spec.checks = vec![CheckKind::Oracle];
    let family = spec.build_family()?;
    spec.validate()?;
    let dim = spec.n + 1;
    let per_point: Vec<Result<OraclePoint>> = (0..spec.samples)
        .into_par_iter()
        .map(|index| {
            let p = spec.sample_point(index)?;
            let ds = derived_scalars(&family, &p)?;
            let b = berwald_from_scalars(&ds, &p);
            let ov = oracle_values(&family, &spec.fd, &ds, &p, &b)?;
            Ok((
                PointValues {
                    index,
                    point: p,
                    values: ov.values,
                    error: None,
                },
                ov.douglas_components,
                ov.berwald_components,
            ))
        })
        .collect();
    let mut samples = Vec::with_capacity(per_point.len());
    let mut dmax = vec![0.0f64; dim.pow(4)];
    let mut bmax = vec![0.0f64; dim.pow(4)];
    for (index, r) in per_point.into_iter().enumerate() {
        match r {
            Ok((pv, dd, bd)) => {
                for (m, v) in dmax.iter_mut().zip(dd) {
                    *m = m.max(v);
                }
                for (m, v) in bmax.iter_mut().zip(bd) {
                    *m = m.max(v);
                }
                samples.push(pv);
            }
            Err(e) => samples.push(PointValues {
                index,
                point: spec.sample_point(index)?,
                values: BTreeMap::new(),
                error: Some(e.to_string()),
            }),
        }
    }
    let mut components = Vec::new();
    for (tensor, table) in [("douglas", &dmax), ("berwald", &bmax)] {
        for a in 0..dim {
            for b in 0..dim {
                for c in b..dim {
                    for d in c..dim {
                        components.push(ComponentDeviation {
                            tensor: tensor.to_string(),
                            index: [a, b, c, d],
                            max_rel_dev: table[((a * dim + b) * dim + c) * dim + d],
                        });
                    }
                }
            }
        }
    }
    let mut report = report_from_samples(&spec, &samples)?;
    report.runtime_ms = Some(start.elapsed().as_millis() as u64);
    Ok(OracleReport { report, components })
}
