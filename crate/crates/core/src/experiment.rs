//! End-to-end measurement pipelines: φ scans of `L_N`, the ±φ asymmetry
//! study, and the purity (η) threshold analysis of a scan.

use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    degrees, rotate_settings, standard_triplets, tetrahedron_triplets, BlochVector, SettingsEnsemble, SettingsTriplet,
    Side,
};
use crate::leggett::{leggett_bound, LeggettBoundParams};
use crate::quantum::{correlation, predicted_l, CorrelationModel};
use crate::stats::{
    derive_seed, expected_quad, l_from_estimates, simulate_quad, violation_sigmas, Estimate, QuadRecord,
};

/// Mean pairs per polarizer combination giving `σ_L3 ≈ 9.5·10⁻⁴` at
/// `φ = ±30°`, `V = 0.984` (the 60 s points).
pub const CALIBRATED_MEAN_PAIRS: f64 = 72_000.0;

/// A quarter of [`CALIBRATED_MEAN_PAIRS`]: the 15 s points of the wide scan,
/// `σ_L3 ≈ 0.0019`.
pub const SCAN_MEAN_PAIRS: f64 = 18_000.0;

/// Average visibility of the reference run.
pub const REFERENCE_VISIBILITY: f64 = 0.984;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    #[default]
    Standard,
    Tetrahedron,
}

impl Geometry {
    pub fn ensemble(&self, phi: f64) -> Result<SettingsEnsemble> {
        match self {
            Geometry::Standard => standard_triplets(phi),
            Geometry::Tetrahedron => tetrahedron_triplets(phi),
        }
    }
}

/// Systematic error in the realized settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Misalignment {
    /// Rigid rotation of one party's vectors by `delta` about `axis`.
    ///
    /// The set of vectors used at `−φ` equals the set used at `+φ`, so this
    /// leaves `L(−φ) = L(+φ)` exactly.
    Rigid { axis: BlochVector, delta: f64, side: Side },
    /// Offset of Bob's dial: `b` turns by `+delta` and `b'` by `−delta` about
    /// the pair normal `a × e`, so the realized separation is `φ + 2·delta`
    /// while the bisector stays on `a`.
    DialOffset { delta: f64 },
}

impl Misalignment {
    pub fn delta(&self) -> f64 {
        match *self {
            Misalignment::Rigid { delta, .. } | Misalignment::DialOffset { delta } => delta,
        }
    }

    /// Settings actually measured when `nominal` was requested.
    pub fn realize(&self, nominal: &SettingsEnsemble) -> Vec<SettingsTriplet> {
        match *self {
            Misalignment::Rigid { axis, delta, side } => {
                rotate_settings(nominal, &axis, delta, side).triplets().to_vec()
            }
            Misalignment::DialOffset { delta } => nominal
                .triplets()
                .iter()
                .zip(nominal.e_dirs())
                .map(|(t, e)| {
                    let normal = t.a.vec().cross(e.vec()).normalize().expect("a is orthogonal to e");
                    SettingsTriplet {
                        a: t.a,
                        b: t.b.rotate(&normal, delta),
                        b_prime: t.b_prime.rotate(&normal, -delta),
                    }
                })
                .collect(),
        }
    }
}

/// Inputs of a φ scan. Angles are radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScanConfigDocument", into = "ScanConfigDocument")]
pub struct ScanConfig {
    pub phi_list: Vec<f64>,
    pub model: CorrelationModel,
    pub mean_pairs_per_setting: f64,
    pub seed: u64,
    pub misalignment: Option<Misalignment>,
    pub eta_for_bound: f64,
    pub xi: f64,
    /// Use exact model correlations instead of simulated counts.
    pub exact: bool,
    pub geometry: Geometry,
}

impl ScanConfig {
    /// Noiseless-statistics-free defaults for the standard geometry.
    pub fn new(phi_list: Vec<f64>, model: CorrelationModel, mean_pairs_per_setting: f64, seed: u64) -> Self {
        ScanConfig {
            phi_list,
            model,
            mean_pairs_per_setting,
            seed,
            misalignment: None,
            eta_for_bound: 1.0,
            xi: 1.0 / 3.0,
            exact: false,
            geometry: Geometry::Standard,
        }
    }

    /// The 22-point wide scan: two interleaved series at 10° spacing covering
    /// −55°…55° in 5° steps (0° excluded), `V = 0.984`, 15 s budget.
    pub fn wide_scan_preset(seed: u64) -> Self {
        let phis = interleaved_phi_grid_deg().into_iter().map(f64::to_radians).collect();
        let model = CorrelationModel::singlet(REFERENCE_VISIBILITY).expect("valid visibility");
        ScanConfig::new(phis, model, SCAN_MEAN_PAIRS, seed)
    }

    /// The two 60 s points at `φ = ∓30°`.
    pub fn calibrated_pair_preset(seed: u64) -> Self {
        let model = CorrelationModel::singlet(REFERENCE_VISIBILITY).expect("valid visibility");
        ScanConfig::new(
            vec![(-30f64).to_radians(), 30f64.to_radians()],
            model,
            CALIBRATED_MEAN_PAIRS,
            seed,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.phi_list.is_empty() {
            return Err(Error::InvalidConfig("phi_list is empty".into()));
        }
        if let Some(&bad) = self
            .phi_list
            .iter()
            .find(|p| !p.is_finite() || p.abs() >= std::f64::consts::PI)
        {
            return Err(Error::InvalidAngle(bad));
        }
        if !(self.mean_pairs_per_setting > 0.0 && self.mean_pairs_per_setting.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "mean_pairs_per_setting = {} must be positive",
                self.mean_pairs_per_setting
            )));
        }
        self.bound_params()?;
        Ok(())
    }

    fn bound_params(&self) -> Result<LeggettBoundParams> {
        let n = match self.geometry {
            Geometry::Standard => 3,
            Geometry::Tetrahedron => 4,
        };
        LeggettBoundParams::new(n, self.xi, self.eta_for_bound)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `[-55, -45, …, 55]` followed by `[-50, …, -10, 10, …, 50]`, in degrees.
pub fn interleaved_phi_grid_deg() -> Vec<f64> {
    let odd = (-5..=5).map(|k| 10.0 * k as f64 + 5.0).filter(|p| *p <= 55.0);
    let odd: Vec<f64> = std::iter::once(-55.0).chain(odd.filter(|p| *p > -55.0)).collect();
    let even = (-5..=5).filter(|&k| k != 0).map(|k| 10.0 * k as f64);
    odd.into_iter().chain(even).collect()
}

/// One φ point of a scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub phi: f64,
    pub l_exp: Estimate,
    pub bound: f64,
    pub l_qm: f64,
    /// `(L_exp − bound) / σ`; absent when the estimate carries no uncertainty.
    pub sigmas: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOutput {
    pub rows: Vec<ScanRow>,
    /// Raw counts per setting; empty in exact mode.
    pub quads: Vec<QuadRecord>,
}

pub fn run_scan(config: &ScanConfig) -> Result<Vec<ScanRow>> {
    Ok(run_scan_detailed(config)?.rows)
}

/// Runs the scan and keeps the raw coincidence counts.
///
/// Each `(φ index, setting index)` gets its own seed derived from the master
/// seed, so results do not depend on scheduling. Rows are sorted by φ.
pub fn run_scan_detailed(config: &ScanConfig) -> Result<ScanOutput> {
    config.validate()?;
    let params = config.bound_params()?;
    let mut phis = config.phi_list.clone();
    phis.sort_by(f64::total_cmp);

    let per_phi = phis
        .par_iter()
        .enumerate()
        .map(|(k, &phi)| scan_point(config, &params, k as u64, phi))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(per_phi.len());
    let mut quads = Vec::new();
    for (row, q) in per_phi {
        rows.push(row);
        quads.extend(q);
    }
    Ok(ScanOutput { rows, quads })
}

fn scan_point(
    config: &ScanConfig,
    params: &LeggettBoundParams,
    phi_index: u64,
    phi: f64,
) -> Result<(ScanRow, Vec<QuadRecord>)> {
    let nominal = config.geometry.ensemble(phi)?;
    let realized = match &config.misalignment {
        Some(m) => m.realize(&nominal),
        None => nominal.triplets().to_vec(),
    };

    let mut quads = Vec::new();
    let mut pairs = Vec::with_capacity(realized.len());
    for (i, t) in realized.iter().enumerate() {
        let mut measure = |b: &BlochVector, member: u64, label: &str| -> Result<Estimate> {
            if config.exact {
                return Ok(Estimate::exact(correlation(&config.model, &t.a, b)));
            }
            let seed = derive_seed(config.seed, &[phi_index, 2 * i as u64 + member]);
            let q = simulate_quad(&config.model, &t.a, b, config.mean_pairs_per_setting, seed)?;
            let id = format!("phi{:+.2}/t{}/{}", phi.to_degrees(), i + 1, label);
            let rec = QuadRecord::new(id, &q)?;
            let e = Estimate::new(rec.c, rec.sigma_c);
            quads.push(rec);
            Ok(e)
        };
        let c = measure(&t.b, 0, "b")?;
        let c_p = measure(&t.b_prime, 1, "b'")?;
        pairs.push((c, c_p));
    }

    let l_exp = l_from_estimates(&pairs)?.estimate;
    let bound = leggett_bound(params, phi);
    let sigmas = violation_sigmas(&l_exp, bound).ok();
    let row = ScanRow {
        phi,
        l_exp,
        bound,
        l_qm: predicted_l(&config.model, &nominal),
        sigmas,
    };
    Ok((row, quads))
}

/// First-order `σ_L` expected for the given settings, from mean counts.
pub fn expected_sigma_l(model: &CorrelationModel, triplets: &[SettingsTriplet], mean_pairs: f64) -> f64 {
    let var_c = |a: &BlochVector, b: &BlochVector| {
        let [pp, mm, mp, pm] = expected_quad(model, a, b, mean_pairs);
        let (same, diff) = (pp + mm, mp + pm);
        let n = same + diff;
        let d_same = 2.0 * diff / (n * n);
        let d_diff = 2.0 * same / (n * n);
        d_same * d_same * same + d_diff * d_diff * diff
    };
    let total: f64 = triplets
        .iter()
        .map(|t| var_c(&t.a, &t.b) + var_c(&t.a, &t.b_prime))
        .sum();
    total.sqrt() / triplets.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymmetryRow {
    /// Positive separation angle; the pair is measured at `−phi` and `+phi`.
    pub phi: f64,
    pub l_minus: Estimate,
    pub l_plus: Estimate,
    /// `L(−φ) − L(+φ)`.
    pub asymmetry: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymmetryReport {
    pub rows: Vec<AsymmetryRow>,
    /// Every asymmetry is nonzero and all share one sign.
    pub sign_consistent: bool,
}

impl AsymmetryReport {
    /// Rows whose asymmetry lies within `k` standard deviations of zero.
    pub fn all_within(&self, k: f64) -> bool {
        self.rows
            .iter()
            .all(|r| r.asymmetry.value.abs() <= k * r.asymmetry.sigma)
    }
}

/// Measures every `|φ|` of the config at both signs and reports
/// `A(φ) = L(−φ) − L(+φ)`.
pub fn asymmetry_study(config: &ScanConfig) -> Result<AsymmetryReport> {
    if config.misalignment.is_none() {
        return Err(Error::InvalidConfig(
            "asymmetry study needs a misalignment (delta may be 0)".into(),
        ));
    }
    let mut mags: Vec<f64> = config.phi_list.iter().map(|p| p.abs()).filter(|p| *p > 0.0).collect();
    mags.sort_by(f64::total_cmp);
    mags.dedup();
    if mags.is_empty() {
        return Err(Error::DegenerateGrid);
    }
    let mut paired = config.clone();
    paired.phi_list = mags.iter().flat_map(|&p| [-p, p]).collect();
    let rows = run_scan(&paired)?;

    let find = |phi: f64| {
        rows.iter()
            .find(|r| r.phi == phi)
            .map(|r| r.l_exp)
            .expect("scanned angle")
    };
    let rows: Vec<AsymmetryRow> = mags
        .iter()
        .map(|&p| {
            let (l_minus, l_plus) = (find(-p), find(p));
            AsymmetryRow {
                phi: p,
                l_minus,
                l_plus,
                asymmetry: Estimate::new(l_minus.value - l_plus.value, l_minus.sigma.hypot(l_plus.sigma)),
            }
        })
        .collect();
    let first_sign = rows[0].asymmetry.value.signum();
    let sign_consistent = rows
        .iter()
        .all(|r| r.asymmetry.value != 0.0 && r.asymmetry.value.signum() == first_sign);
    Ok(AsymmetryReport { rows, sign_consistent })
}

/// Largest excess of a scan over the η-generalized bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaRow {
    pub eta: f64,
    pub max_excess: Estimate,
    pub best_phi: f64,
    pub sigmas: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaReport {
    pub rows: Vec<EtaRow>,
}

impl EtaReport {
    /// Smallest η whose best excess reaches `level` standard deviations.
    pub fn smallest_eta_at(&self, level: f64) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.sigmas.is_some_and(|s| s >= level))
            .map(|r| r.eta)
            .min_by(f64::total_cmp)
    }
}

/// For each η, the scanned angle with the most significant excess
/// `L_exp − (2 − 2ηξ|sin(φ/2)|)`. Rows without uncertainty are ranked by the
/// raw excess instead.
pub fn eta_threshold_report(scan: &[ScanRow], xi: f64, eta_grid: &[f64]) -> Result<EtaReport> {
    if scan.is_empty() {
        return Err(Error::InvalidConfig("empty scan".into()));
    }
    let rows = eta_grid
        .iter()
        .map(|&eta| {
            let params = LeggettBoundParams::new(3, xi, eta)?;
            let candidates = scan.iter().map(|r| {
                let excess = r.l_exp.value - leggett_bound(&params, r.phi);
                let sig = (r.l_exp.sigma > 0.0).then(|| excess / r.l_exp.sigma);
                (r, excess, sig)
            });
            let statistical = scan.iter().all(|r| r.l_exp.sigma > 0.0);
            let key = |c: &(&ScanRow, f64, Option<f64>)| {
                if statistical {
                    c.2.unwrap_or(f64::NEG_INFINITY)
                } else {
                    c.1
                }
            };
            let best = candidates
                .reduce(|best, c| if key(&c) > key(&best) { c } else { best })
                .expect("scan is non-empty");
            Ok(EtaRow {
                eta,
                max_excess: Estimate::new(best.1, best.0.l_exp.sigma),
                best_phi: best.0.phi,
                sigmas: best.2,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EtaReport { rows })
}

/// CSV row: `phi_deg, L_exp, sigma_L, bound, L_qm, sigmas`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanCsvRow {
    pub phi_deg: f64,
    #[serde(rename = "L_exp")]
    pub l_exp: f64,
    #[serde(rename = "sigma_L")]
    pub sigma_l: f64,
    pub bound: f64,
    #[serde(rename = "L_qm")]
    pub l_qm: f64,
    pub sigmas: Option<f64>,
}

impl From<&ScanRow> for ScanCsvRow {
    fn from(r: &ScanRow) -> Self {
        ScanCsvRow {
            phi_deg: degrees(r.phi),
            l_exp: r.l_exp.value,
            sigma_l: r.l_exp.sigma,
            bound: r.bound,
            l_qm: r.l_qm,
            sigmas: r.sigmas,
        }
    }
}

impl From<&ScanCsvRow> for ScanRow {
    fn from(r: &ScanCsvRow) -> Self {
        ScanRow {
            phi: r.phi_deg.to_radians(),
            l_exp: Estimate::new(r.l_exp, r.sigma_l),
            bound: r.bound,
            l_qm: r.l_qm,
            sigmas: r.sigmas,
        }
    }
}

pub fn write_scan_csv<W: io::Write>(writer: W, rows: &[ScanRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(ScanCsvRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scan_csv<R: io::Read>(reader: R) -> Result<Vec<ScanRow>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize::<ScanCsvRow>()
        .map(|row| Ok(ScanRow::from(&row?)))
        .collect()
}

/// CSV row: `eta, excess, sigma_excess, best_phi_deg, sigmas`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaCsvRow {
    pub eta: f64,
    pub excess: f64,
    pub sigma_excess: f64,
    pub best_phi_deg: f64,
    pub sigmas: Option<f64>,
}

pub fn write_eta_csv<W: io::Write>(writer: W, report: &EtaReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in &report.rows {
        w.serialize(EtaCsvRow {
            eta: r.eta,
            excess: r.max_excess.value,
            sigma_excess: r.max_excess.sigma,
            best_phi_deg: degrees(r.best_phi),
            sigmas: r.sigmas,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum MisalignmentDocument {
    Rigid {
        axis: BlochVector,
        delta_deg: f64,
        side: Side,
    },
    DialOffset {
        delta_deg: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScanConfigDocument {
    phi_deg: Vec<f64>,
    model: CorrelationModel,
    mean_pairs_per_setting: f64,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    misalignment: Option<MisalignmentDocument>,
    #[serde(default = "one")]
    eta_for_bound: f64,
    #[serde(default = "one_third")]
    xi: f64,
    #[serde(default)]
    exact: bool,
    #[serde(default)]
    geometry: Geometry,
}

fn one() -> f64 {
    1.0
}

fn one_third() -> f64 {
    1.0 / 3.0
}

impl From<ScanConfig> for ScanConfigDocument {
    fn from(c: ScanConfig) -> Self {
        ScanConfigDocument {
            phi_deg: c.phi_list.iter().map(|&p| degrees(p)).collect(),
            model: c.model,
            mean_pairs_per_setting: c.mean_pairs_per_setting,
            seed: c.seed,
            misalignment: c.misalignment.map(|m| match m {
                Misalignment::Rigid { axis, delta, side } => MisalignmentDocument::Rigid {
                    axis,
                    delta_deg: degrees(delta),
                    side,
                },
                Misalignment::DialOffset { delta } => MisalignmentDocument::DialOffset {
                    delta_deg: degrees(delta),
                },
            }),
            eta_for_bound: c.eta_for_bound,
            xi: c.xi,
            exact: c.exact,
            geometry: c.geometry,
        }
    }
}

impl TryFrom<ScanConfigDocument> for ScanConfig {
    type Error = Error;

    fn try_from(d: ScanConfigDocument) -> Result<Self> {
        let config = ScanConfig {
            phi_list: d.phi_deg.iter().map(|p| p.to_radians()).collect(),
            model: d.model,
            mean_pairs_per_setting: d.mean_pairs_per_setting,
            seed: d.seed,
            misalignment: d.misalignment.map(|m| match m {
                MisalignmentDocument::Rigid { axis, delta_deg, side } => Misalignment::Rigid {
                    axis,
                    delta: delta_deg.to_radians(),
                    side,
                },
                MisalignmentDocument::DialOffset { delta_deg } => Misalignment::DialOffset {
                    delta: delta_deg.to_radians(),
                },
            }),
            eta_for_bound: d.eta_for_bound,
            xi: d.xi,
            exact: d.exact,
            geometry: d.geometry,
        };
        config.validate()?;
        Ok(config)
    }
}
