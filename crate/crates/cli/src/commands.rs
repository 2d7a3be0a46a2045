use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use leggett_core::experiment::{
    eta_threshold_report, read_scan_csv, run_scan_detailed, write_eta_csv, write_scan_csv, ScanConfig, ScanCsvRow,
};
use leggett_core::geometry::{standard_triplets, tetrahedron_triplets, xi_lower_bound, BlochVector, SettingsEnsemble};
use leggett_core::leggett::{
    leggett_bound, max_violation_phi, min_falsifiable_eta, min_falsifiable_eta_continuum, threshold_visibility,
    violation_region, LeggettBoundParams,
};
use leggett_core::nosig::{audit, AuditOptions, AuditReport, DiscreteNSModel};
use leggett_core::quantum::{predicted_l, CorrelationModel, Noise};
use leggett_core::stats::write_quads_csv;

use crate::output::{config_hash, digest, emit, sibling_path, Provenance};
use crate::{Cli, CliError, Command, Family, Format, GeometryArg, NoiseArg, Preset};

/// Lowest purity values published for the ±25° data: main-text estimate and
/// the fitted value with its uncertainty.
const PUBLISHED_MIN_ETA: f64 = 0.56;
const PUBLISHED_FIT_ETA: (f64, f64) = (0.528, 0.07);

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Settings { phi, geometry } => settings(cli, *phi, *geometry),
        Command::Bound {
            phi,
            eta,
            xi,
            geometry,
            visibility,
        } => bound(cli, phi, *eta, *xi, *geometry, *visibility),
        Command::Predict {
            phi,
            geometry,
            visibility,
            noise,
            model,
        } => predict(cli, phi, *geometry, *visibility, *noise, model.as_deref()),
        Command::Scan {
            config,
            preset,
            mean_pairs,
        } => scan(cli, config.as_deref(), *preset, *mean_pairs),
        Command::Eta {
            scan,
            xi,
            eta_min,
            eta_max,
            eta_step,
            level,
        } => eta(cli, scan, *xi, (*eta_min, *eta_max, *eta_step), *level),
        Command::Audit {
            model,
            family,
            eta,
            lambda_samples,
            subdivisions,
        } => audit_cmd(cli, model.as_deref(), *family, *eta, *lambda_samples, *subdivisions),
        Command::Xi {
            geometry,
            dirs,
            resolution,
        } => xi(cli, *geometry, dirs.as_deref(), *resolution),
    }
}

fn ensemble(geometry: GeometryArg, phi_deg: f64) -> Result<SettingsEnsemble, CliError> {
    Ok(match geometry {
        GeometryArg::Standard => standard_triplets(phi_deg.to_radians())?,
        GeometryArg::Tetrahedron => tetrahedron_triplets(phi_deg.to_radians())?,
    })
}

fn geometry_name(g: GeometryArg) -> &'static str {
    match g {
        GeometryArg::Standard => "standard",
        GeometryArg::Tetrahedron => "tetrahedron",
    }
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(leggett_core::Error::from)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn settings(cli: &Cli, phi: f64, geometry: GeometryArg) -> Result<(), CliError> {
    let ens = ensemble(geometry, phi)?;
    let mut body = ens.to_json()?.into_bytes();
    body.push(b'\n');
    let hash = config_hash(&json!({ "phi_deg": phi, "geometry": geometry_name(geometry) }))?;
    emit(
        cli.global.out.as_deref(),
        &body,
        vec![],
        Provenance {
            command: "settings",
            config_hash: hash,
            seed: None,
        },
    )
}

fn default_phis(phi: &[f64]) -> Vec<f64> {
    if phi.is_empty() {
        (0..=18).map(|k| 5.0 * k as f64).collect()
    } else {
        phi.to_vec()
    }
}

#[derive(Serialize)]
struct BoundRow {
    phi_deg: f64,
    bound: f64,
    #[serde(rename = "L_qm")]
    l_qm: f64,
    excess: f64,
}

#[derive(Serialize)]
struct BoundSummary {
    n: usize,
    xi: f64,
    eta: f64,
    visibility: f64,
    threshold_visibility: f64,
    violation_region_deg: Option<[f64; 2]>,
    max_violation_phi_deg: Option<f64>,
    min_falsifiable_eta_grid: Option<f64>,
    min_falsifiable_eta_continuum: f64,
    min_falsifiable_eta_continuum_phi_deg: f64,
    published_min_eta: f64,
    published_fit_eta: f64,
    published_fit_eta_uncertainty: f64,
}

fn bound(cli: &Cli, phi: &[f64], eta: f64, xi: Option<f64>, geometry: GeometryArg, v: f64) -> Result<(), CliError> {
    let phis = default_phis(phi);
    let reference = ensemble(geometry, 0.0)?;
    let xi = xi.unwrap_or(reference.xi());
    let params = LeggettBoundParams::new(reference.len(), xi, eta)?;
    let model = CorrelationModel::singlet(v)?;

    let rows = phis
        .iter()
        .map(|&p| {
            let l_qm = predicted_l(&model, &ensemble(geometry, p)?);
            let b = leggett_bound(&params, p.to_radians());
            Ok(BoundRow {
                phi_deg: p,
                bound: b,
                l_qm,
                excess: l_qm - b,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let radians: Vec<f64> = phis.iter().map(|p| p.to_radians()).collect();
    let (cont, cont_phi) = min_falsifiable_eta_continuum(v, xi)?;
    let summary = BoundSummary {
        n: params.n(),
        xi,
        eta,
        visibility: v,
        threshold_visibility: threshold_visibility(&params),
        violation_region_deg: violation_region(&params, v).map(|r| [r.lower.to_degrees(), r.upper.to_degrees()]),
        max_violation_phi_deg: max_violation_phi(&params, v).ok().map(f64::to_degrees),
        min_falsifiable_eta_grid: min_falsifiable_eta(v, xi, &radians).ok(),
        min_falsifiable_eta_continuum: cont,
        min_falsifiable_eta_continuum_phi_deg: cont_phi.to_degrees(),
        published_min_eta: PUBLISHED_MIN_ETA,
        published_fit_eta: PUBLISHED_FIT_ETA.0,
        published_fit_eta_uncertainty: PUBLISHED_FIT_ETA.1,
    };

    let body = match cli.global.format {
        Format::Csv => {
            print_bound_summary(&summary);
            to_csv(&rows)?
        }
        Format::Json => to_json(&json!({ "summary": summary, "rows": rows }))?,
    };
    let hash = config_hash(&json!({
        "phi_deg": phis, "eta": eta, "xi": xi, "geometry": geometry_name(geometry), "visibility": v,
    }))?;
    emit(
        cli.global.out.as_deref(),
        &body,
        vec![],
        Provenance {
            command: "bound",
            config_hash: hash,
            seed: None,
        },
    )
}

fn print_bound_summary(s: &BoundSummary) {
    eprintln!("N = {}, xi = {:.6}, eta = {}, V = {}", s.n, s.xi, s.eta, s.visibility);
    eprintln!("threshold visibility: {:.6}", s.threshold_visibility);
    match (s.violation_region_deg, s.max_violation_phi_deg) {
        (Some([lo, hi]), Some(max)) => {
            eprintln!("violation region: {lo:.4} < |phi| < {hi:.4} deg, maximal at {max:.4} deg")
        }
        _ => eprintln!("violation region: empty"),
    }
    if let Some(e) = s.min_falsifiable_eta_grid {
        eprintln!("min falsifiable eta on the phi grid: {e:.4}");
    }
    eprintln!(
        "min falsifiable eta (continuum): {:.4} at |phi| = {:.2} deg; published: {} and {} +- {}",
        s.min_falsifiable_eta_continuum,
        s.min_falsifiable_eta_continuum_phi_deg,
        s.published_min_eta,
        s.published_fit_eta,
        s.published_fit_eta_uncertainty
    );
}

#[derive(Serialize)]
struct PredictRow {
    phi_deg: f64,
    #[serde(rename = "L_qm")]
    l_qm: f64,
}

fn predict(
    cli: &Cli,
    phi: &[f64],
    geometry: GeometryArg,
    v: f64,
    noise: NoiseArg,
    model_path: Option<&Path>,
) -> Result<(), CliError> {
    let model = match model_path {
        Some(p) => serde_json::from_str::<CorrelationModel>(&fs::read_to_string(p)?)?,
        None => CorrelationModel::noisy_singlet(
            v,
            match noise {
                NoiseArg::White => Noise::White,
                NoiseArg::Colored => Noise::Colored,
            },
        )?,
    };
    let phis = default_phis(phi);
    let rows = phis
        .iter()
        .map(|&p| {
            Ok(PredictRow {
                phi_deg: p,
                l_qm: predicted_l(&model, &ensemble(geometry, p)?),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let body = match cli.global.format {
        Format::Csv => to_csv(&rows)?,
        Format::Json => to_json(&json!({ "model": model, "rows": rows }))?,
    };
    let hash = config_hash(&json!({ "phi_deg": phis, "geometry": geometry_name(geometry), "model": model }))?;
    emit(
        cli.global.out.as_deref(),
        &body,
        vec![],
        Provenance {
            command: "predict",
            config_hash: hash,
            seed: None,
        },
    )
}

fn scan(cli: &Cli, config: Option<&Path>, preset: Option<Preset>, mean_pairs: Option<f64>) -> Result<(), CliError> {
    let seed = cli.global.seed.unwrap_or(1);
    let mut cfg = match (config, preset) {
        (Some(path), _) => ScanConfig::from_json(&fs::read_to_string(path)?)?,
        (None, Some(Preset::Calibrated)) => ScanConfig::calibrated_pair_preset(seed),
        (None, _) => ScanConfig::wide_scan_preset(seed),
    };
    if let Some(s) = cli.global.seed {
        cfg.seed = s;
    }
    if let Some(n) = mean_pairs {
        cfg.mean_pairs_per_setting = n;
    }
    cfg.exact |= cli.global.exact;
    cfg.validate()?;

    let result = run_scan_detailed(&cfg)?;
    let hash = config_hash(&cfg)?;
    let best = result
        .rows
        .iter()
        .filter_map(|r| r.sigmas.map(|s| (r.phi, s)))
        .max_by(|a, b| a.1.total_cmp(&b.1));
    if let Some((phi, s)) = best {
        eprintln!("max violation: {s:.1} sigma at phi = {:.1} deg", phi.to_degrees());
    }

    let body = match cli.global.format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_scan_csv(&mut buf, &result.rows)?;
            buf
        }
        Format::Json => {
            let rows: Vec<ScanCsvRow> = result.rows.iter().map(ScanCsvRow::from).collect();
            to_json(&json!({
                "provenance": { "seed": cfg.seed, "config_hash": hash, "version": env!("CARGO_PKG_VERSION") },
                "config": cfg,
                "rows": rows,
            }))?
        }
    };
    let mut extras = Vec::new();
    if let (Some(out), false) = (cli.global.out.as_deref(), result.quads.is_empty()) {
        let mut buf = Vec::new();
        write_quads_csv(&mut buf, &result.quads)?;
        extras.push((sibling_path(out, ".quads.csv"), buf));
    }
    emit(
        cli.global.out.as_deref(),
        &body,
        extras,
        Provenance {
            command: "scan",
            config_hash: hash,
            seed: Some(cfg.seed),
        },
    )
}

fn eta_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if !(step > 0.0 && min <= max) {
        return Err(CliError::Usage(format!(
            "empty eta grid: min {min}, max {max}, step {step}"
        )));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| ((min + k as f64 * step) * 1e9).round() / 1e9).collect())
}

fn eta(cli: &Cli, scan_path: &Path, xi: f64, range: (f64, f64, f64), level: f64) -> Result<(), CliError> {
    let bytes = fs::read(scan_path)?;
    let scan = read_scan_csv(bytes.as_slice())?;
    let grid = eta_grid(range.0, range.1, range.2)?;
    let report = eta_threshold_report(&scan, xi, &grid)?;
    let smallest = report.smallest_eta_at(level);
    match smallest {
        Some(e) => eprintln!("smallest eta with sigmas >= {level}: {e}"),
        None => eprintln!("no eta on the grid reaches {level} sigma"),
    }

    let body = match cli.global.format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_eta_csv(&mut buf, &report)?;
            buf
        }
        Format::Json => to_json(&json!({ "level": level, "smallest_eta_at_level": smallest, "rows": report.rows }))?,
    };
    let hash = config_hash(&json!({ "scan": digest(&bytes), "xi": xi, "eta_grid": grid, "level": level }))?;
    emit(
        cli.global.out.as_deref(),
        &body,
        vec![],
        Provenance {
            command: "eta",
            config_hash: hash,
            seed: None,
        },
    )
}

fn audit_cmd(
    cli: &Cli,
    model_path: Option<&Path>,
    family: Option<Family>,
    eta: f64,
    lambda_samples: usize,
    subdivisions: u32,
) -> Result<(), CliError> {
    let seed = cli.global.seed.unwrap_or(0);
    let (model, source) = match (model_path, family) {
        (Some(p), _) => {
            let text = fs::read_to_string(p)?;
            (
                DiscreteNSModel::from_json(&text)?,
                json!({ "model_file": digest(text.as_bytes()) }),
            )
        }
        (None, Some(Family::Leggett)) => (
            DiscreteNSModel::leggett_family(eta, lambda_samples, seed, subdivisions)?,
            json!({ "family": "leggett", "eta": eta, "lambda_samples": lambda_samples, "seed": seed, "subdivisions": subdivisions }),
        ),
        (None, Some(Family::Zero)) => (
            DiscreteNSModel::zero_family(subdivisions),
            json!({ "family": "zero", "subdivisions": subdivisions }),
        ),
        (None, None) => return Err(CliError::Usage("audit needs --model FILE or --family".into())),
    };
    let report = audit(&model, &AuditOptions::default())?;
    let text = audit_text(&report);
    let hash = config_hash(&source)?;
    let prov = Provenance {
        command: "audit",
        config_hash: hash,
        seed: Some(seed),
    };
    match (cli.global.out.as_deref(), cli.global.format) {
        (Some(out), _) => {
            print!("{text}");
            emit(Some(out), &to_json(&report)?, vec![], prov)
        }
        (None, Format::Json) => emit(None, &to_json(&report)?, vec![], prov),
        (None, Format::Csv) => emit(None, text.as_bytes(), vec![], prov),
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn audit_text(r: &AuditReport) -> String {
    let mut s = String::new();
    s += &format!(
        "oddness        {}  max excess {:.3e} (tol {:.0e})\n",
        verdict(r.oddness.passes),
        r.oddness.max_excess,
        r.oddness.tol
    );
    for f in &r.flatness {
        s += &format!(
            "flatness       {}  scale {:.0e}: max rate {:.3e} (tol {:.0e}){}\n",
            verdict(f.passes),
            f.pair_scale,
            f.max_rate,
            f.tol,
            if f.nonzero { ", nonzero" } else { "" }
        );
    }
    let c = &r.compatibility;
    s += &format!(
        "compatibility  {}  worst lhs {:.3e} vs rhs {:.3e} ({:?}) at b = {}, b' = {}\n",
        verdict(c.passes),
        c.worst.lhs,
        c.worst.rhs,
        c.worst.sign,
        c.worst.b,
        c.worst.b_prime
    );
    s += &format!("marginals vanish: {}\n", if r.marginals_vanish { "yes" } else { "no" });
    s += &format!("verdict: {}\n", verdict(r.passes));
    s
}

fn parse_dirs(spec: &str) -> Result<Vec<BlochVector>, CliError> {
    spec.split(';')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let xs: Vec<f64> = t
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Usage(format!("bad direction `{t}`: {e}")))?;
            let arr: [f64; 3] = xs
                .try_into()
                .map_err(|_| CliError::Usage(format!("direction `{t}` needs 3 components")))?;
            Ok(BlochVector::try_from(arr)?)
        })
        .collect()
}

fn xi(cli: &Cli, geometry: Option<GeometryArg>, dirs: Option<&str>, resolution: usize) -> Result<(), CliError> {
    let e_dirs = match dirs {
        Some(d) => parse_dirs(d)?,
        None => ensemble(geometry.unwrap_or(GeometryArg::Standard), 0.0)?
            .e_dirs()
            .to_vec(),
    };
    let value = xi_lower_bound(&e_dirs, resolution)?;
    #[derive(Serialize)]
    struct XiRow {
        n: usize,
        resolution: usize,
        xi: f64,
    }
    let row = XiRow {
        n: e_dirs.len(),
        resolution,
        xi: value,
    };
    let body = match cli.global.format {
        Format::Csv => to_csv(&[&row])?,
        Format::Json => to_json(&row)?,
    };
    let dirs_arr: Vec<[f64; 3]> = e_dirs.iter().map(|d| d.to_array()).collect();
    let hash = config_hash(&json!({ "e_dirs": dirs_arr, "resolution": resolution }))?;
    emit(
        cli.global.out.as_deref(),
        &body,
        vec![],
        Provenance {
            command: "xi",
            config_hash: hash,
            seed: None,
        },
    )
}
