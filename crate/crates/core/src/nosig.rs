//! Necessary-condition audits for discrete non-signaling decompositions.
//!
//! A model is a finite mixture of hidden states `λ` whose marginals depend on
//! the local setting only. If such a model reproduces singlet correlations,
//! Bob's marginal in every `λ` must be odd (`M(−b) = −M(b)`), locally flat
//! (`|M(b) − M(b')| / ‖b − b'‖ → 0`), and hence zero. The audits below test
//! these conditions on a negation-closed grid of settings.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::geometry::sphere::{antipode_map, Icosphere};
use crate::geometry::{BlochVector, Vec3};
use crate::leggett::{correlation_window, LocalBox};

/// 642-vertex icosphere.
pub const DEFAULT_SUBDIVISIONS: u32 = 3;
pub const DEFAULT_PAIR_SCALE: f64 = 1e-3;
/// Angular separations used by the multi-scale flatness test.
pub const FLATNESS_SCALES: [f64; 3] = [1e-2, 1e-3, 1e-4];
/// Tangent directions probed around every grid vertex.
pub const PROBE_DIRECTIONS: usize = 36;
/// Rates above this are reported as nonzero even when they pass.
pub const NONZERO_FLOOR: f64 = 1e-10;

const WEIGHT_TOLERANCE: f64 = 1e-12;
const ANTIPODE_TOLERANCE: f64 = 1e-9;
const GRID_MATCH_TOLERANCE: f64 = 1e-12;
const BOX_TOLERANCE: f64 = 1e-12;

/// Marginal of one party as a function of that party's setting only.
#[derive(Debug, Clone, PartialEq)]
pub enum Marginal {
    Zero,
    Constant(f64),
    /// `η u·b`.
    Linear {
        u: BlochVector,
        eta: f64,
    },
    /// Values sampled on the model grid.
    Table(Vec<f64>),
}

impl Marginal {
    /// Closed-form value; `None` for sampled tables.
    pub fn eval(&self, b: &BlochVector) -> Option<f64> {
        match self {
            Marginal::Zero => Some(0.0),
            Marginal::Constant(c) => Some(*c),
            Marginal::Linear { u, eta } => Some(eta * u.dot(b)),
            Marginal::Table(_) => None,
        }
    }

    fn on_grid(&self, grid: &[BlochVector], i: usize) -> f64 {
        match self {
            Marginal::Table(t) => t[i],
            m => m.eval(&grid[i]).expect("closed form"),
        }
    }

    fn validate(&self, grid_len: usize) -> Result<()> {
        match self {
            Marginal::Zero => Ok(()),
            Marginal::Constant(c) => check_range("marginal", *c, -1.0, 1.0, "[-1, 1]"),
            Marginal::Linear { eta, .. } => check_range("eta", *eta, 0.0, 1.0, "[0, 1]"),
            Marginal::Table(t) => {
                if t.len() != grid_len {
                    return Err(Error::InvalidModel(format!(
                        "marginal table has {} entries for a {grid_len}-point grid",
                        t.len()
                    )));
                }
                t.iter()
                    .try_for_each(|&m| check_range("marginal", m, -1.0, 1.0, "[-1, 1]"))
            }
        }
    }
}

/// How `C_λ(a, b)` follows from the two marginals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrelationRule {
    /// `C = mA mB`, uncorrelated outcomes.
    Product,
    /// `C = lo + t (hi − lo)` inside the non-negativity window, `t ∈ [0, 1]`.
    Window(f64),
}

impl CorrelationRule {
    pub fn apply(&self, m_a: f64, m_b: f64) -> f64 {
        match *self {
            CorrelationRule::Product => m_a * m_b,
            CorrelationRule::Window(t) => {
                let (lo, hi) = correlation_window(m_a, m_b);
                lo + t * (hi - lo)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState {
    pub weight: f64,
    pub marginal_a: Marginal,
    pub marginal_b: Marginal,
    /// Audits need only marginals, so correlations may be left out.
    pub correlation: Option<CorrelationRule>,
}

/// Finite mixture of hidden states on a negation-closed setting grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteNSModel {
    grid: Vec<BlochVector>,
    lambdas: Vec<HiddenState>,
}

impl DiscreteNSModel {
    pub fn new(grid: Vec<BlochVector>, lambdas: Vec<HiddenState>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::InvalidModel("empty grid".into()));
        }
        if lambdas.is_empty() {
            return Err(Error::InvalidModel("no hidden states".into()));
        }
        for l in &lambdas {
            if !(l.weight > 0.0 && l.weight.is_finite()) {
                return Err(Error::InvalidModel(format!("weight {} is not positive", l.weight)));
            }
            l.marginal_a.validate(grid.len())?;
            l.marginal_b.validate(grid.len())?;
            if let Some(CorrelationRule::Window(t)) = l.correlation {
                check_range("window position", t, 0.0, 1.0, "[0, 1]")?;
            }
        }
        let total = compensated_sum(lambdas.iter().map(|l| l.weight));
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidModel(format!("weights sum to {total}, not 1")));
        }
        let model = DiscreteNSModel { grid, lambdas };
        model.check_boxes()?;
        Ok(model)
    }

    /// Leggett's model: `λ = (u, −u)` with `u` uniform on the sphere, Bob's
    /// marginal `η u·b`, Alice's `−η u·a`, correlations at the bottom of the
    /// window.
    pub fn leggett_family(eta: f64, lambda_samples: usize, seed: u64, subdivisions: u32) -> Result<Self> {
        check_range("eta", eta, f64::MIN_POSITIVE, 1.0, "(0, 1]")?;
        if lambda_samples == 0 {
            return Err(Error::InvalidModel("lambda_samples must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weight = 1.0 / lambda_samples as f64;
        let lambdas = (0..lambda_samples)
            .map(|_| {
                let u = BlochVector::try_from(UnitSphere.sample(&mut rng))?;
                Ok(HiddenState {
                    weight,
                    marginal_a: Marginal::Linear { u: -u, eta },
                    marginal_b: Marginal::Linear { u, eta },
                    correlation: Some(CorrelationRule::Window(0.0)),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        DiscreteNSModel::new(Icosphere::new(subdivisions).vertices, lambdas)
    }

    /// A single hidden state with vanishing marginals on both sides.
    pub fn zero_family(subdivisions: u32) -> Self {
        let lambda = HiddenState {
            weight: 1.0,
            marginal_a: Marginal::Zero,
            marginal_b: Marginal::Zero,
            correlation: Some(CorrelationRule::Window(0.0)),
        };
        DiscreteNSModel::new(Icosphere::new(subdivisions).vertices, vec![lambda]).expect("valid by construction")
    }

    pub fn grid(&self) -> &[BlochVector] {
        &self.grid
    }

    pub fn lambdas(&self) -> &[HiddenState] {
        &self.lambdas
    }

    /// All of Bob's marginals have closed forms, so off-grid probes are possible.
    pub fn is_evaluable(&self) -> bool {
        self.lambdas.iter().all(|l| !matches!(l.marginal_b, Marginal::Table(_)))
    }

    /// `M_λ^B(b)`; sampled tables are evaluated only at grid points.
    pub fn marginal_b(&self, lambda: usize, b: &BlochVector) -> Result<f64> {
        let m = &self.lambdas[lambda].marginal_b;
        if let Some(v) = m.eval(b) {
            return Ok(v);
        }
        let i = self
            .grid
            .iter()
            .position(|g| (g.vec() - b.vec()).norm() <= GRID_MATCH_TOLERANCE)
            .ok_or_else(|| Error::InvalidModel(format!("{b} is not a grid point")))?;
        Ok(m.on_grid(&self.grid, i))
    }

    /// Bob's marginals on the grid, indexed `[vertex][λ]`.
    fn bob_table(&self) -> Vec<Vec<f64>> {
        (0..self.grid.len())
            .map(|i| {
                self.lambdas
                    .iter()
                    .map(|l| l.marginal_b.on_grid(&self.grid, i))
                    .collect()
            })
            .collect()
    }

    fn weights(&self) -> Vec<f64> {
        self.lambdas.iter().map(|l| l.weight).collect()
    }

    /// Every `(λ, a, b)` on the grid must be a valid local box.
    fn check_boxes(&self) -> Result<()> {
        let n = self.grid.len();
        self.lambdas.par_iter().try_for_each(|l| {
            let Some(rule) = l.correlation else { return Ok(()) };
            for i in 0..n {
                let m_a = l.marginal_a.on_grid(&self.grid, i);
                for j in 0..n {
                    let m_b = l.marginal_b.on_grid(&self.grid, j);
                    let b = LocalBox::new(m_a, m_b, rule.apply(m_a, m_b).clamp(-1.0, 1.0))?;
                    if b.probabilities().iter().any(|&p| p < -BOX_TOLERANCE) {
                        return Err(Error::InvalidModel(format!("negative probability in box {b:?}")));
                    }
                }
            }
            Ok(())
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ModelFile = serde_json::from_str(s)?;
        doc.build()
    }
}

fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    sum + comp
}

/// Point at angular distance `scale` from `b` along tangent direction `k`.
fn probe(b: &BlochVector, scale: f64, k: usize) -> BlochVector {
    let (t1, t2) = b.tangent_basis();
    let theta = std::f64::consts::TAU * k as f64 / PROBE_DIRECTIONS as f64;
    let t = theta.cos() * t1.vec() + theta.sin() * t2.vec();
    (scale.cos() * b.vec() + scale.sin() * t)
        .normalize()
        .expect("unit inputs")
}

fn check_scale(pair_scale: f64) -> Result<()> {
    check_range("pair_scale", pair_scale, f64::MIN_POSITIVE, 0.5, "(0, 0.5]")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaOddness {
    pub index: usize,
    pub max_excess: f64,
    /// Grid indices where `|M(b) + M(−b)| > tol`.
    pub offending: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OddnessReport {
    pub tol: f64,
    /// `max_b Σ_λ w_λ |M_λ(b) + M_λ(−b)|`.
    pub max_excess: f64,
    pub worst_b: BlochVector,
    pub passes: bool,
    pub per_lambda: Vec<LambdaOddness>,
}

pub fn audit_oddness(model: &DiscreteNSModel, tol: f64) -> Result<OddnessReport> {
    let anti = antipode_map(&model.grid, ANTIPODE_TOLERANCE).map_err(Error::NotNegationClosed)?;
    let table = model.bob_table();
    let weights = model.weights();

    let per_lambda = (0..model.lambdas.len())
        .map(|k| {
            let excess: Vec<f64> = (0..table.len())
                .map(|i| (table[i][k] + table[anti[i]][k]).abs())
                .collect();
            LambdaOddness {
                index: k,
                max_excess: excess.iter().copied().fold(0.0, f64::max),
                offending: (0..excess.len()).filter(|&i| excess[i] > tol).collect(),
            }
        })
        .collect();

    let (worst, max_excess) = (0..table.len())
        .map(|i| {
            let s: f64 = weights
                .iter()
                .enumerate()
                .map(|(k, w)| w * (table[i][k] + table[anti[i]][k]).abs())
                .sum();
            (i, s)
        })
        .fold((0, 0.0), |best, c| if c.1 > best.1 { c } else { best });

    Ok(OddnessReport {
        tol,
        max_excess,
        worst_b: model.grid[worst],
        passes: max_excess <= tol,
        per_lambda,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlatnessMethod {
    /// Closed-form marginals probed at the requested angular scale.
    Probe,
    /// Sampled marginals compared across nearest grid neighbors.
    NearestNeighbor,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaFlatness {
    pub index: usize,
    pub max_rate: f64,
    pub nonzero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatnessReport {
    pub method: FlatnessMethod,
    /// Angular separation actually tested (smallest neighbor spacing for tables).
    pub pair_scale: f64,
    pub tol: f64,
    /// `max_b Σ_λ w_λ |M_λ(b) − M_λ(b')| / ‖b − b'‖`.
    pub max_rate: f64,
    pub worst_b: BlochVector,
    pub passes: bool,
    /// Some λ has a rate above [`NONZERO_FLOOR`], pass or not.
    pub nonzero: bool,
    pub per_lambda: Vec<LambdaFlatness>,
}

/// Finite-difference version of the zero-derivative condition.
///
/// Closed-form marginals are probed in [`PROBE_DIRECTIONS`] tangent
/// directions at distance `pair_scale` around every grid vertex; sampled
/// tables fall back to nearest-neighbor pairs of the grid.
pub fn audit_flatness(model: &DiscreteNSModel, pair_scale: f64, tol: f64) -> Result<FlatnessReport> {
    check_scale(pair_scale)?;
    let weights = model.weights();
    let n_lambda = weights.len();

    // Per vertex: (total rate, per-λ rates).
    let (method, scale, rates): (_, _, Vec<(f64, Vec<f64>)>) = if model.is_evaluable() {
        let rates = model
            .grid
            .par_iter()
            .map(|b| {
                let mut total = 0.0f64;
                let mut per = vec![0.0f64; n_lambda];
                for k in 0..PROBE_DIRECTIONS {
                    let bp = probe(b, pair_scale, k);
                    let d = (b.vec() - bp.vec()).norm();
                    let mut sum = 0.0;
                    for (l, lam) in model.lambdas.iter().enumerate() {
                        let diff = (lam.marginal_b.eval(b).unwrap() - lam.marginal_b.eval(&bp).unwrap()).abs() / d;
                        per[l] = per[l].max(diff);
                        sum += weights[l] * diff;
                    }
                    total = total.max(sum);
                }
                (total, per)
            })
            .collect();
        (FlatnessMethod::Probe, pair_scale, rates)
    } else {
        let table = model.bob_table();
        let grid = &model.grid;
        let n = grid.len();
        if n < 2 {
            return Err(Error::DegenerateGrid);
        }
        let dist = |i: usize, j: usize| (grid[i].vec() - grid[j].vec()).norm();
        let nearest: Vec<f64> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| dist(i, j))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let rates = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut total = 0.0f64;
                let mut per = vec![0.0f64; n_lambda];
                for j in (0..n).filter(|&j| j != i && dist(i, j) <= nearest[i] * (1.0 + 1e-6)) {
                    let d = dist(i, j);
                    let mut sum = 0.0;
                    for l in 0..n_lambda {
                        let diff = (table[i][l] - table[j][l]).abs() / d;
                        per[l] = per[l].max(diff);
                        sum += weights[l] * diff;
                    }
                    total = total.max(sum);
                }
                (total, per)
            })
            .collect();
        let spacing = nearest.iter().copied().fold(f64::INFINITY, f64::min);
        (FlatnessMethod::NearestNeighbor, 2.0 * (0.5 * spacing).asin(), rates)
    };

    let (worst, max_rate) = rates
        .iter()
        .enumerate()
        .map(|(i, r)| (i, r.0))
        .fold((0, 0.0), |best, c| if c.1 > best.1 { c } else { best });
    let per_lambda: Vec<LambdaFlatness> = (0..n_lambda)
        .map(|l| {
            let max_rate = rates.iter().map(|r| r.1[l]).fold(0.0, f64::max);
            LambdaFlatness {
                index: l,
                max_rate,
                nonzero: max_rate > NONZERO_FLOOR,
            }
        })
        .collect();

    Ok(FlatnessReport {
        method,
        pair_scale: scale,
        tol,
        max_rate,
        worst_b: model.grid[worst],
        passes: max_rate <= tol,
        nonzero: per_lambda.iter().any(|l| l.nonzero),
        per_lambda,
    })
}

/// Largest probed rate `Σ_λ w_λ |M_λ(b) − M_λ(b')| / ‖b − b'‖` around `b`.
pub fn flatness_rate_at(model: &DiscreteNSModel, b: &BlochVector, pair_scale: f64) -> Result<f64> {
    check_scale(pair_scale)?;
    if !model.is_evaluable() {
        return Err(Error::InvalidModel("off-grid probes need closed-form marginals".into()));
    }
    let m0: Vec<f64> = model.lambdas.iter().map(|l| l.marginal_b.eval(b).unwrap()).collect();
    Ok((0..PROBE_DIRECTIONS)
        .map(|k| {
            let bp = probe(b, pair_scale, k);
            let d = (b.vec() - bp.vec()).norm();
            model
                .lambdas
                .iter()
                .zip(&m0)
                .map(|(l, m)| l.weight * (m - l.marginal_b.eval(&bp).unwrap()).abs() / d)
                .sum::<f64>()
        })
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// `2 − ‖b − b'‖` for `Plus`, `2 − ‖b + b'‖` for `Minus`, without cancellation.
fn compatibility_rhs(b: &BlochVector, bp: &BlochVector, sign: Sign) -> f64 {
    let s = (b.vec() + bp.vec()).norm();
    let d = (b.vec() - bp.vec()).norm();
    match sign {
        Sign::Plus => s * s / (2.0 + d),
        Sign::Minus => d * d / (2.0 + s),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorstPair {
    pub b: BlochVector,
    pub b_prime: BlochVector,
    /// Sign in `M(b) ± M(b')`.
    pub sign: Sign,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatibilityVerdict {
    pub passes: bool,
    pub tol: f64,
    pub worst: WorstPair,
    pub pairs_checked: usize,
    /// Off-grid probe distances used in addition to grid pairs.
    pub probe_scales: Vec<f64>,
}

/// Checks `Σ_λ w_λ |M_λ(b) ± M_λ(b')| ≤ 2 − ‖b ∓ b'‖ + tol`.
///
/// All grid pairs are tested. With closed-form marginals, pairs `b' → b` and
/// `b' → −b` at the [`FLATNESS_SCALES`] are added: the right-hand side
/// vanishes quadratically there, so any nonzero slope is caught even when the
/// grid spacing is coarse.
pub fn singlet_compatibility(model: &DiscreteNSModel, tol: f64) -> Result<CompatibilityVerdict> {
    let grid = &model.grid;
    let table = model.bob_table();
    let weights = model.weights();
    let lhs_grid = |i: usize, j: usize, sign: Sign| -> f64 {
        weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * (table[i][k] + sign.value() * table[j][k]).abs())
            .sum()
    };

    let better = |a: WorstPair, b: WorstPair| if b.lhs - b.rhs > a.lhs - a.rhs { b } else { a };
    let start = WorstPair {
        b: grid[0],
        b_prime: grid[0],
        sign: Sign::Plus,
        lhs: f64::NEG_INFINITY,
        rhs: 0.0,
    };

    let mut worst = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mut w = start;
            for j in 0..grid.len() {
                for sign in [Sign::Plus, Sign::Minus] {
                    let cand = WorstPair {
                        b: grid[i],
                        b_prime: grid[j],
                        sign,
                        lhs: lhs_grid(i, j, sign),
                        rhs: compatibility_rhs(&grid[i], &grid[j], sign),
                    };
                    w = better(w, cand);
                }
            }
            w
        })
        .reduce(|| start, better);
    let mut pairs_checked = 2 * grid.len() * grid.len();

    let mut probe_scales = Vec::new();
    if model.is_evaluable() {
        probe_scales = FLATNESS_SCALES.to_vec();
        let m = |b: &BlochVector| -> Vec<f64> { model.lambdas.iter().map(|l| l.marginal_b.eval(b).unwrap()).collect() };
        let lhs = |x: &[f64], y: &[f64], sign: Sign| -> f64 {
            weights
                .iter()
                .zip(x.iter().zip(y))
                .map(|(w, (p, q))| w * (p + sign.value() * q).abs())
                .sum()
        };
        let near = grid
            .par_iter()
            .map(|b| {
                let mb = m(b);
                let mut w = start;
                for &s in &FLATNESS_SCALES {
                    for k in 0..PROBE_DIRECTIONS {
                        let close = probe(b, s, k);
                        let far = -close;
                        for (bp, sign) in [(close, Sign::Minus), (far, Sign::Plus)] {
                            let cand = WorstPair {
                                b: *b,
                                b_prime: bp,
                                sign,
                                lhs: lhs(&mb, &m(&bp), sign),
                                rhs: compatibility_rhs(b, &bp, sign),
                            };
                            w = better(w, cand);
                        }
                    }
                }
                w
            })
            .reduce(|| start, better);
        worst = better(worst, near);
        pairs_checked += grid.len() * FLATNESS_SCALES.len() * PROBE_DIRECTIONS * 2;
    }

    Ok(CompatibilityVerdict {
        passes: worst.lhs - worst.rhs <= tol,
        tol,
        worst,
        pairs_checked,
        probe_scales,
    })
}

/// Model ceiling `2 − Σ_λ w_λ |M_λ(b) ∓ M_λ(b')|` on `|C(a,b) ± C(a,b')|`,
/// where `sign` is the sign inside the correlation combination.
pub fn bound_from_marginals(
    model: &DiscreteNSModel,
    b: &BlochVector,
    b_prime: &BlochVector,
    sign: Sign,
) -> Result<f64> {
    let mut spread = 0.0;
    for (k, l) in model.lambdas.iter().enumerate() {
        let (m, mp) = (model.marginal_b(k, b)?, model.marginal_b(k, b_prime)?);
        spread += l.weight * (m - sign.value() * mp).abs();
    }
    Ok(2.0 - spread)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditOptions {
    pub oddness_tol: f64,
    pub flatness_tol: f64,
    pub compatibility_tol: f64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            oddness_tol: 1e-12,
            flatness_tol: 1e-6,
            compatibility_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub oddness: OddnessReport,
    /// One report per tested scale.
    pub flatness: Vec<FlatnessReport>,
    pub compatibility: CompatibilityVerdict,
    /// Every sampled marginal is zero to within the oddness tolerance.
    pub marginals_vanish: bool,
    pub passes: bool,
}

/// Oddness, multi-scale flatness and singlet compatibility in one pass.
pub fn audit(model: &DiscreteNSModel, options: &AuditOptions) -> Result<AuditReport> {
    let oddness = audit_oddness(model, options.oddness_tol)?;
    let flatness = if model.is_evaluable() {
        FLATNESS_SCALES
            .iter()
            .map(|&s| audit_flatness(model, s, options.flatness_tol))
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![audit_flatness(model, DEFAULT_PAIR_SCALE, options.flatness_tol)?]
    };
    let compatibility = singlet_compatibility(model, options.compatibility_tol)?;
    let marginals_vanish = model
        .bob_table()
        .iter()
        .flatten()
        .all(|m| m.abs() <= options.oddness_tol);
    let passes = oddness.passes && flatness.iter().all(|f| f.passes) && compatibility.passes;
    Ok(AuditReport {
        oddness,
        flatness,
        compatibility,
        marginals_vanish,
        passes,
    })
}

#[derive(Debug, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
enum ModelFile {
    Leggett {
        eta: f64,
        #[serde(default = "default_lambda_samples")]
        lambda_samples: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_subdivisions")]
        subdivisions: u32,
    },
    Zero {
        #[serde(default = "default_subdivisions")]
        subdivisions: u32,
    },
    Table {
        grid: Vec<[f64; 3]>,
        lambdas: Vec<TableLambda>,
    },
}

#[derive(Debug, Deserialize)]
struct TableLambda {
    weight: f64,
    #[serde(rename = "mB")]
    m_b: Vec<f64>,
    #[serde(rename = "mA", default)]
    m_a: Option<Vec<f64>>,
}

fn default_lambda_samples() -> usize {
    64
}

fn default_subdivisions() -> u32 {
    DEFAULT_SUBDIVISIONS
}

impl ModelFile {
    fn build(self) -> Result<DiscreteNSModel> {
        match self {
            ModelFile::Leggett {
                eta,
                lambda_samples,
                seed,
                subdivisions,
            } => DiscreteNSModel::leggett_family(eta, lambda_samples, seed, subdivisions),
            ModelFile::Zero { subdivisions } => Ok(DiscreteNSModel::zero_family(subdivisions)),
            ModelFile::Table { grid, lambdas } => {
                let grid = grid
                    .into_iter()
                    .map(BlochVector::try_from)
                    .collect::<Result<Vec<_>>>()?;
                let lambdas = lambdas
                    .into_iter()
                    .map(|l| HiddenState {
                        weight: l.weight,
                        marginal_b: Marginal::Table(l.m_b),
                        marginal_a: l.m_a.map_or(Marginal::Zero, Marginal::Table),
                        correlation: None,
                    })
                    .collect();
                DiscreteNSModel::new(grid, lambdas)
            }
        }
    }
}

/// Single-λ Leggett-type model with marginal `η u·b`, for tests and benches.
pub fn single_linear_model(u: BlochVector, eta: f64, subdivisions: u32) -> Result<DiscreteNSModel> {
    let lambda = HiddenState {
        weight: 1.0,
        marginal_a: Marginal::Linear { u: -u, eta },
        marginal_b: Marginal::Linear { u, eta },
        correlation: Some(CorrelationRule::Window(0.0)),
    };
    DiscreteNSModel::new(Icosphere::new(subdivisions).vertices, vec![lambda])
}

/// `‖u − (u·b) b‖`, the tangential gradient of `b ↦ u·b`.
pub fn linear_marginal_gradient(u: &BlochVector, b: &BlochVector) -> f64 {
    let g: Vec3 = u.vec() - u.dot(b) * b.vec();
    g.norm()
}
