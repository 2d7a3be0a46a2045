//! Leggett-model machinery: non-negativity of the per-λ distributions, the
//! resulting bounds on `L_N(φ)`, and the visibilities and purities at which
//! the quantum prediction crosses them.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::geometry::{BlochVector, SettingsEnsemble};
use crate::quantum::quantum_l;

/// Parameters of the bound `L_N(φ) ≤ 2 − 2 η ξ |sin(φ/2)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeggettBoundParams {
    n: usize,
    xi: f64,
    eta: f64,
}

impl LeggettBoundParams {
    pub fn new(n: usize, xi: f64, eta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::OutOfRange {
                name: "N",
                value: 0.0,
                range: ">= 1",
            });
        }
        if !(xi > 0.0 && xi <= 0.5) {
            return Err(Error::OutOfRange {
                name: "xi",
                value: xi,
                range: "(0, 1/2]",
            });
        }
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::OutOfRange {
                name: "eta",
                value: eta,
                range: "(0, 1]",
            });
        }
        Ok(LeggettBoundParams { n, xi, eta })
    }

    /// Original Leggett marginals (`η = 1`) on the given ensemble.
    pub fn for_ensemble(ensemble: &SettingsEnsemble, eta: f64) -> Result<Self> {
        Self::new(ensemble.len(), ensemble.xi(), eta)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    fn slope(&self) -> f64 {
        self.eta * self.xi
    }
}

/// Marginals and correlation of one `P_λ` at one setting pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalBox {
    pub m_a: f64,
    pub m_b: f64,
    pub c: f64,
}

impl LocalBox {
    pub fn new(m_a: f64, m_b: f64, c: f64) -> Result<Self> {
        check_range("mA", m_a, -1.0, 1.0, "[-1, 1]")?;
        check_range("mB", m_b, -1.0, 1.0, "[-1, 1]")?;
        check_range("C", c, -1.0, 1.0, "[-1, 1]")?;
        Ok(LocalBox { m_a, m_b, c })
    }

    /// `[P(+,+), P(+,−), P(−,+), P(−,−)]` from `(1 + α mA + β mB + αβ C) / 4`.
    pub fn probabilities(&self) -> [f64; 4] {
        let p = |al: f64, be: f64| 0.25 * (1.0 + al * self.m_a + be * self.m_b + al * be * self.c);
        [p(1.0, 1.0), p(1.0, -1.0), p(-1.0, 1.0), p(-1.0, -1.0)]
    }
}

/// `|mA + mB| ≤ 1 + C` and `|mA − mB| ≤ 1 − C`.
pub fn check_nonnegativity(b: &LocalBox) -> Result<bool> {
    let b = LocalBox::new(b.m_a, b.m_b, b.c)?;
    Ok((b.m_a + b.m_b).abs() <= 1.0 + b.c && (b.m_a - b.m_b).abs() <= 1.0 - b.c)
}

/// Range of correlations compatible with the given marginals.
pub fn correlation_window(m_a: f64, m_b: f64) -> (f64, f64) {
    ((m_a + m_b).abs() - 1.0, 1.0 - (m_a - m_b).abs())
}

/// `2 − 2 η ξ |sin(φ/2)|`.
pub fn leggett_bound(params: &LeggettBoundParams, phi: f64) -> f64 {
    2.0 - 2.0 * params.slope() * (0.5 * phi).sin().abs()
}

/// Open band `lower < |φ| < upper` where `2V|cos(φ/2)|` beats the bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViolationRegion {
    pub lower: f64,
    pub upper: f64,
}

impl ViolationRegion {
    pub fn contains(&self, phi: f64) -> bool {
        let p = phi.abs();
        p > self.lower && p < self.upper
    }
}

/// Solves `V cos x + k sin x > 1` with `x = |φ|/2`, `k = ηξ`.
///
/// Writing the left side as `R cos(x − α)` with `R = √(V² + k²)`,
/// `α = atan(k/V)` gives the band `|x − α| < arccos(1/R)`; it is empty unless
/// `R > 1`, i.e. `V > √(1 − k²)`.
pub fn violation_region(params: &LeggettBoundParams, visibility: f64) -> Option<ViolationRegion> {
    let k = params.slope();
    // R² − 1, arranged so that V = 1 with tiny k still registers.
    let excess = (visibility - 1.0) * (visibility + 1.0) + k * k;
    if excess <= 0.0 {
        return None;
    }
    let alpha = k.atan2(visibility);
    let beta = excess.sqrt().atan();
    Some(ViolationRegion {
        lower: 2.0 * (alpha - beta).max(0.0),
        upper: 2.0 * (alpha + beta).min(FRAC_PI_2),
    })
}

/// `|φ|` maximizing `2V|cos(φ/2)| − bound(φ)`: `2 atan(ηξ / V)`.
pub fn max_violation_phi(params: &LeggettBoundParams, visibility: f64) -> Result<f64> {
    if violation_region(params, visibility).is_none() {
        return Err(Error::EmptyRegion);
    }
    Ok(2.0 * params.slope().atan2(visibility))
}

/// Smallest visibility for which some `φ` violates the bound: `√(1 − (ηξ)²)`.
pub fn threshold_visibility(params: &LeggettBoundParams) -> f64 {
    (1.0 - params.slope().powi(2)).sqrt()
}

/// Purity `η` at which the bound at `φ` meets the noisy singlet prediction.
pub fn eta_at_crossing(visibility: f64, xi: f64, phi: f64) -> Option<f64> {
    let s = (0.5 * phi).sin().abs();
    if s == 0.0 {
        return None;
    }
    Some((2.0 - quantum_l(phi, visibility)) / (2.0 * xi * s))
}

/// Minimum over the scanned angles of [`eta_at_crossing`]; `φ = 0` entries are skipped.
pub fn min_falsifiable_eta(visibility: f64, xi: f64, phi_grid: &[f64]) -> Result<f64> {
    check_falsifiability_inputs(visibility, xi)?;
    phi_grid
        .iter()
        .filter_map(|&phi| eta_at_crossing(visibility, xi, phi))
        .min_by(f64::total_cmp)
        .ok_or(Error::DegenerateGrid)
}

/// Continuum version of [`min_falsifiable_eta`]: `√(1 − V²) / ξ`, reached at
/// `|φ| = 2 arccos V`.
pub fn min_falsifiable_eta_continuum(visibility: f64, xi: f64) -> Result<(f64, f64)> {
    check_falsifiability_inputs(visibility, xi)?;
    Ok(((1.0 - visibility * visibility).sqrt() / xi, 2.0 * visibility.acos()))
}

fn check_falsifiability_inputs(visibility: f64, xi: f64) -> Result<()> {
    if !(visibility > 0.0 && visibility <= 1.0) {
        return Err(Error::OutOfRange {
            name: "visibility",
            value: visibility,
            range: "(0, 1]",
        });
    }
    if !(xi > 0.0 && xi <= 0.5) {
        return Err(Error::OutOfRange {
            name: "xi",
            value: xi,
            range: "(0, 1/2]",
        });
    }
    Ok(())
}

/// Malus-law marginal of a partially polarized local state: `η u·a`.
pub fn leggett_marginal(u: &BlochVector, a: &BlochVector, eta: f64) -> f64 {
    eta * u.dot(a)
}

/// Largest `L_N` a single hidden state `λ = (u, v)` can reach once each
/// `C_λ` is pushed to the edge of its correlation window.
pub fn lambda_l_ceiling(ensemble: &SettingsEnsemble, u: &BlochVector, v: &BlochVector, eta: f64) -> f64 {
    let total: f64 = ensemble
        .triplets()
        .iter()
        .map(|t| {
            let m_a = leggett_marginal(u, &t.a, eta);
            let (lo, hi) = correlation_window(m_a, leggett_marginal(v, &t.b, eta));
            let (lo_p, hi_p) = correlation_window(m_a, leggett_marginal(v, &t.b_prime, eta));
            (hi + hi_p).max(-(lo + lo_p))
        })
        .sum();
    total / ensemble.len() as f64
}
