//! Quantum predictions for two-qubit correlations.
//!
//! Every model reduces to a correlation tensor `T` and two marginal vectors
//! `mA`, `mB`, so that
//! `P(α, β | a, b) = (1 + α mA·a + β mB·b + αβ aᵀTb) / 4`.

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::geometry::sphere::Icosphere;
use crate::geometry::{BlochVector, SettingsEnsemble, Vec3};

pub type Matrix3 = [[f64; 3]; 3];

/// Admixture accompanying the singlet when `V < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Noise {
    /// Maximally mixed admixture: `C = −V a·b`.
    White,
    /// Equal mixture of `|HV⟩` and `|VH⟩` (z axis = H/V):
    /// `C = −V (a_x b_x + a_y b_y) − a_z b_z`.
    ///
    /// Reconstructed model for the residual noise of a type-II down-conversion
    /// source; correlations stay perfect in the H/V basis.
    Colored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDocument", into = "ModelDocument")]
pub enum CorrelationModel {
    Singlet { visibility: f64, noise: Noise },
    Tensor { t: Matrix3, m_a: [f64; 3], m_b: [f64; 3] },
}

impl CorrelationModel {
    pub fn singlet(visibility: f64) -> Result<Self> {
        Self::noisy_singlet(visibility, Noise::White)
    }

    pub fn noisy_singlet(visibility: f64, noise: Noise) -> Result<Self> {
        check_range("visibility", visibility, 0.0, 1.0, "[0, 1]")?;
        Ok(CorrelationModel::Singlet { visibility, noise })
    }

    /// General tensor model; rejected if any outcome probability is negative
    /// on a 162-point test grid for either party.
    pub fn tensor(t: Matrix3, m_a: [f64; 3], m_b: [f64; 3]) -> Result<Self> {
        if t.iter().flatten().chain(&m_a).chain(&m_b).any(|x| !x.is_finite()) {
            return Err(Error::InvalidModel("non-finite tensor entry".into()));
        }
        let model = CorrelationModel::Tensor { t, m_a, m_b };
        model.check_nonnegative_on_grid(2)?;
        Ok(model)
    }

    /// `(T, mA, mB)` representation.
    pub fn components(&self) -> (Matrix3, [f64; 3], [f64; 3]) {
        match *self {
            CorrelationModel::Singlet { visibility: v, noise } => {
                let tz = match noise {
                    Noise::White => -v,
                    Noise::Colored => -1.0,
                };
                ([[-v, 0.0, 0.0], [0.0, -v, 0.0], [0.0, 0.0, tz]], [0.0; 3], [0.0; 3])
            }
            CorrelationModel::Tensor { t, m_a, m_b } => (t, m_a, m_b),
        }
    }

    pub fn marginal_a(&self, a: &BlochVector) -> f64 {
        let (_, m_a, _) = self.components();
        Vec3::from(m_a).dot(a.vec())
    }

    pub fn marginal_b(&self, b: &BlochVector) -> f64 {
        let (_, _, m_b) = self.components();
        Vec3::from(m_b).dot(b.vec())
    }

    /// `P(α, β | a, b)` for outcomes `α, β ∈ {+1, −1}`.
    pub fn probability(&self, alpha: i8, beta: i8, a: &BlochVector, b: &BlochVector) -> f64 {
        let (al, be) = (f64::from(alpha.signum()), f64::from(beta.signum()));
        0.25 * (1.0 + al * self.marginal_a(a) + be * self.marginal_b(b) + al * be * correlation(self, a, b))
    }

    fn check_nonnegative_on_grid(&self, subdivisions: u32) -> Result<()> {
        let grid = Icosphere::new(subdivisions).vertices;
        for a in &grid {
            for b in &grid {
                for (al, be) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                    let p = self.probability(al, be, a, b);
                    if p < -1e-12 {
                        return Err(Error::InvalidModel(format!("P({al:+}, {be:+} | {a}, {b}) = {p} < 0")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Model correlation coefficient `C(a, b) = aᵀ T b`.
pub fn correlation(model: &CorrelationModel, a: &BlochVector, b: &BlochVector) -> f64 {
    match *model {
        CorrelationModel::Singlet {
            visibility,
            noise: Noise::White,
        } => -visibility * a.dot(b),
        CorrelationModel::Singlet {
            visibility,
            noise: Noise::Colored,
        } => -visibility * (a.x() * b.x() + a.y() * b.y()) - a.z() * b.z(),
        CorrelationModel::Tensor { t, .. } => {
            let (a, b) = (a.to_array(), b.to_array());
            (0..3).map(|i| a[i] * (0..3).map(|j| t[i][j] * b[j]).sum::<f64>()).sum()
        }
    }
}

/// `2 V |cos(φ/2)|`: the singlet's value of `L_N` on any ensemble whose
/// `a_i` bisect the pairs.
pub fn quantum_l(phi: f64, visibility: f64) -> f64 {
    2.0 * visibility * (0.5 * phi).cos().abs()
}

/// `(1/N) Σ |C(a_i, b_i) + C(a_i, b_i')|` with exact model correlations.
pub fn predicted_l(model: &CorrelationModel, ensemble: &SettingsEnsemble) -> f64 {
    let sum: f64 = ensemble
        .triplets()
        .iter()
        .map(|t| (correlation(model, &t.a, &t.b) + correlation(model, &t.a, &t.b_prime)).abs())
        .sum();
    sum / ensemble.len() as f64
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ModelDocument {
    Singlet {
        #[serde(rename = "V")]
        visibility: f64,
        #[serde(default = "default_noise")]
        noise: Noise,
    },
    Tensor {
        #[serde(rename = "T")]
        t: Matrix3,
        #[serde(rename = "mA", default)]
        m_a: [f64; 3],
        #[serde(rename = "mB", default)]
        m_b: [f64; 3],
    },
}

fn default_noise() -> Noise {
    Noise::White
}

impl From<CorrelationModel> for ModelDocument {
    fn from(m: CorrelationModel) -> Self {
        match m {
            CorrelationModel::Singlet { visibility, noise } => ModelDocument::Singlet { visibility, noise },
            CorrelationModel::Tensor { t, m_a, m_b } => ModelDocument::Tensor { t, m_a, m_b },
        }
    }
}

impl TryFrom<ModelDocument> for CorrelationModel {
    type Error = Error;

    fn try_from(d: ModelDocument) -> Result<Self> {
        match d {
            ModelDocument::Singlet { visibility, noise } => CorrelationModel::noisy_singlet(visibility, noise),
            ModelDocument::Tensor { t, m_a, m_b } => CorrelationModel::tensor(t, m_a, m_b),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::standard_triplets;

    #[test]
    fn singlet_correlation_examples() {
        let ideal = CorrelationModel::singlet(1.0).unwrap();
        let a = BlochVector::new(0.2, 0.3, -0.9).unwrap();
        assert!((correlation(&ideal, &a, &a) + 1.0).abs() < 1e-15);
        assert_eq!(correlation(&ideal, &BlochVector::X, &BlochVector::Y), 0.0);

        let noisy = CorrelationModel::singlet(0.984).unwrap();
        let b = BlochVector::X.rotate(&BlochVector::Z, 15f64.to_radians());
        let c = correlation(&noisy, &BlochVector::X, &b);
        assert!((c + 0.950_471).abs() < 1e-6, "{c}");
    }

    #[test]
    fn quantum_l_examples() {
        assert_eq!(quantum_l(0.0, 1.0), 2.0);
        assert!((quantum_l(30f64.to_radians(), 1.0) - 1.931_852).abs() < 1e-6);
        assert!((quantum_l(30f64.to_radians(), 0.984) - 1.900_942).abs() < 1e-6);
    }

    #[test]
    fn predicted_l_examples() {
        let phi = 30f64.to_radians();
        let ens = standard_triplets(phi).unwrap();
        let l = predicted_l(&CorrelationModel::singlet(1.0).unwrap(), &ens);
        assert!((l - quantum_l(phi, 1.0)).abs() < 1e-12);
        assert_eq!(predicted_l(&CorrelationModel::singlet(0.0).unwrap(), &ens), 0.0);

        let t = [[-0.9, 0.0, 0.0], [0.0, -0.9, 0.0], [0.0, 0.0, -0.9]];
        let tensor = CorrelationModel::tensor(t, [0.0; 3], [0.0; 3]).unwrap();
        let ens = standard_triplets(36.87f64.to_radians()).unwrap();
        assert!((predicted_l(&tensor, &ens) - 1.707_63).abs() < 1e-5);
    }

    #[test]
    fn colored_noise_keeps_hv_correlations_perfect() {
        let m = CorrelationModel::noisy_singlet(0.9, Noise::Colored).unwrap();
        assert!((correlation(&m, &BlochVector::Z, &BlochVector::Z) + 1.0).abs() < 1e-15);
        assert!((correlation(&m, &BlochVector::X, &BlochVector::X) + 0.9).abs() < 1e-15);
        m.check_nonnegative_on_grid(2).unwrap();
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(CorrelationModel::singlet(1.2).is_err());
        assert!(CorrelationModel::singlet(-0.1).is_err());
        // Full marginals with no correlation make some probabilities negative.
        let t = [[0.0; 3]; 3];
        assert!(CorrelationModel::tensor(t, [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]).is_err());
        let t = [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]];
        assert!(CorrelationModel::tensor(t, [0.5, 0.0, 0.0], [0.0; 3]).is_err());
    }

    #[test]
    fn product_state_tensor_is_valid() {
        // |0⟩|0⟩ along z: T = ẑẑᵀ, mA = mB = ẑ.
        let t = [[0.0; 3], [0.0; 3], [0.0, 0.0, 1.0]];
        let m = CorrelationModel::tensor(t, [0.0, 0.0, 1.0], [0.0, 0.0, 1.0]).unwrap();
        assert!((m.probability(1, 1, &BlochVector::Z, &BlochVector::Z) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn json_shapes() {
        let m = CorrelationModel::noisy_singlet(0.98, Noise::Colored).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"kind":"singlet","V":0.98,"noise":"colored"}"#);
        let back: CorrelationModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);

        let t: CorrelationModel =
            serde_json::from_str(r#"{"kind":"tensor","T":[[-1,0,0],[0,-1,0],[0,0,-1]]}"#).unwrap();
        assert!((correlation(&t, &BlochVector::X, &BlochVector::X) + 1.0).abs() < 1e-15);
        assert!(serde_json::from_str::<CorrelationModel>(r#"{"kind":"singlet","V":2}"#).is_err());
    }
}
