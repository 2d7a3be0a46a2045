//! Coincidence counting: Poisson simulation of the four polarizer
//! combinations, the efficiency-robust correlation estimator, and first-order
//! error propagation through `L_N`.

use std::io;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BlochVector;
use crate::quantum::CorrelationModel;

/// Coincidences for `(a, b)`, `(−a, −b)`, `(−a, b)` and `(a, −b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CountQuad {
    pub c_pp: u64,
    pub c_mm: u64,
    pub c_mp: u64,
    pub c_pm: u64,
}

impl CountQuad {
    pub fn new(c_pp: u64, c_mm: u64, c_mp: u64, c_pm: u64) -> Self {
        CountQuad { c_pp, c_mm, c_mp, c_pm }
    }

    pub fn total(&self) -> u64 {
        self.c_pp + self.c_mm + self.c_mp + self.c_pm
    }
}

/// A value with its 1σ uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

impl Estimate {
    pub fn new(value: f64, sigma: f64) -> Self {
        debug_assert!(sigma >= 0.0);
        Estimate { value, sigma }
    }

    pub fn exact(value: f64) -> Self {
        Estimate { value, sigma: 0.0 }
    }
}

/// `C = (c_pp + c_mm − c_mp − c_pm) / total` with Poisson variance
/// `Σ_k (∂C/∂c_k)² c_k`.
pub fn correlation_from_counts(q: &CountQuad) -> Result<Estimate> {
    let total = q.total();
    if total == 0 {
        return Err(Error::ZeroCounts);
    }
    let n = total as f64;
    let same = (q.c_pp + q.c_mm) as f64;
    let diff = (q.c_mp + q.c_pm) as f64;
    let value = (same - diff) / n;
    let d_same = 2.0 * diff / (n * n);
    let d_diff = -2.0 * same / (n * n);
    let variance = d_same * d_same * same + d_diff * d_diff * diff;
    Ok(Estimate::new(value, variance.sqrt()))
}

/// Expected coincidences of the four combinations for `mean_pairs` pairs per
/// combination: `mean_pairs · P(±, ±)`.
pub fn expected_quad(model: &CorrelationModel, a: &BlochVector, b: &BlochVector, mean_pairs: f64) -> [f64; 4] {
    [(1, 1), (-1, -1), (-1, 1), (1, -1)].map(|(al, be)| mean_pairs * model.probability(al, be, a, b).max(0.0))
}

/// Draws the four counts independently from Poisson distributions around
/// [`expected_quad`]. Deterministic for a fixed `seed`.
pub fn simulate_quad(
    model: &CorrelationModel,
    a: &BlochVector,
    b: &BlochVector,
    mean_pairs: f64,
    seed: u64,
) -> Result<CountQuad> {
    if !(mean_pairs > 0.0 && mean_pairs.is_finite()) {
        return Err(Error::OutOfRange {
            name: "mean_pairs",
            value: mean_pairs,
            range: "(0, inf)",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |mean: f64| -> Result<u64> {
        if mean <= 0.0 {
            return Ok(0);
        }
        let dist = Poisson::new(mean).map_err(|e| Error::InvalidModel(format!("poisson mean {mean}: {e}")))?;
        Ok(dist.sample(&mut rng) as u64)
    };
    let [pp, mm, mp, pm] = expected_quad(model, a, b, mean_pairs);
    Ok(CountQuad::new(draw(pp)?, draw(mm)?, draw(mp)?, draw(pm)?))
}

/// `L` assembled from per-triplet correlation pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedL {
    pub estimate: Estimate,
    /// Indices of pairs where `C + C'` is exactly zero; the ±1 derivative
    /// convention was used there.
    pub nondifferentiable: Vec<usize>,
}

/// `(1/N) Σ |C_i + C_i'|` with `σ² = (1/N²) Σ (σ_i² + σ_i'²)`.
pub fn l_from_estimates(pairs: &[(Estimate, Estimate)]) -> Result<CombinedL> {
    if pairs.is_empty() {
        return Err(Error::InvalidConfig("L needs at least one correlation pair".into()));
    }
    let n = pairs.len() as f64;
    let mut nondifferentiable = Vec::new();
    let mut value = 0.0;
    let mut variance = 0.0;
    for (i, (c, c_p)) in pairs.iter().enumerate() {
        let s = c.value + c_p.value;
        if s == 0.0 {
            nondifferentiable.push(i);
        }
        value += s.abs();
        variance += c.sigma * c.sigma + c_p.sigma * c_p.sigma;
    }
    if !nondifferentiable.is_empty() {
        log::warn!("|C + C'| evaluated at its kink for pairs {nondifferentiable:?}; using unit derivative");
    }
    Ok(CombinedL {
        estimate: Estimate::new(value / n, variance.sqrt() / n),
        nondifferentiable,
    })
}

/// `(L − bound) / σ_L`; negative when there is no violation.
pub fn violation_sigmas(l: &Estimate, bound: f64) -> Result<f64> {
    if l.sigma <= 0.0 {
        return Err(Error::ZeroSigma);
    }
    Ok((l.value - bound) / l.sigma)
}

/// One CSV row of raw counts and the estimate derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadRecord {
    pub setting_id: String,
    pub c_pp: u64,
    pub c_mm: u64,
    pub c_mp: u64,
    pub c_pm: u64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "sigma_C")]
    pub sigma_c: f64,
}

impl QuadRecord {
    pub fn new(setting_id: impl Into<String>, q: &CountQuad) -> Result<Self> {
        let e = correlation_from_counts(q)?;
        Ok(QuadRecord {
            setting_id: setting_id.into(),
            c_pp: q.c_pp,
            c_mm: q.c_mm,
            c_mp: q.c_mp,
            c_pm: q.c_pm,
            c: e.value,
            sigma_c: e.sigma,
        })
    }
}

/// Writes `setting_id, c_pp, c_mm, c_mp, c_pm, C, sigma_C` rows.
pub fn write_quads_csv<W: io::Write>(writer: W, records: &[QuadRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_quads_csv<R: io::Read>(reader: R) -> Result<Vec<QuadRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}

/// Mixes a master seed with sub-simulation indices into an independent seed
/// (SplitMix64 finalizer applied per component).
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    path.iter()
        .fold(mix(master.wrapping_add(0x9e37_79b9_7f4a_7c15)), |acc, &k| {
            mix(acc
                ^ k.wrapping_add(0x9e37_79b9_7f4a_7c15)
                    .wrapping_mul(0x2545_f491_4f6c_dd1d))
        })
}
