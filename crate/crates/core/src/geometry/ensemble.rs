use serde::{Deserialize, Serialize};

use super::sphere::fibonacci_lattice;
use super::{xi_objective, BlochVector};
use crate::error::{Error, Result};

const ANGLE_TOLERANCE: f64 = 1e-9;
const COMPONENT_TOLERANCE: f64 = 1e-9;
const XI_SAMPLE_POINTS: usize = 20_000;
const XI_SLACK: f64 = 1e-6;

/// Which party's settings an operation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Alice,
    Bob,
}

/// Alice's setting `a` and Bob's pair `(b, b')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettingsTriplet {
    pub a: BlochVector,
    pub b: BlochVector,
    pub b_prime: BlochVector,
}

/// `N` triplets sharing the separation angle `phi`, together with the
/// normalized difference directions `e_i` and a certified lower bound `xi` on
/// `min_v (1/N) Σ |v·e_i|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnsembleDocument", into = "EnsembleDocument")]
pub struct SettingsEnsemble {
    triplets: Vec<SettingsTriplet>,
    phi: f64,
    e_dirs: Vec<BlochVector>,
    xi: f64,
}

impl SettingsEnsemble {
    /// Builds `b_i = cos(φ/2) a_i + sin(φ/2) e_i` and `b_i' = cos(φ/2) a_i − sin(φ/2) e_i`.
    ///
    /// Each `a_i` must be orthogonal to its `e_i`; `a_i` is then the bisector of
    /// the pair, which is where the largest quantum violation sits.
    pub fn from_axes(phi: f64, a_dirs: &[BlochVector], e_dirs: &[BlochVector], xi: f64) -> Result<Self> {
        check_phi(phi)?;
        if a_dirs.is_empty() || a_dirs.len() != e_dirs.len() {
            return Err(Error::InvalidEnsemble(format!(
                "need matching non-empty axis lists, got {} and {}",
                a_dirs.len(),
                e_dirs.len()
            )));
        }
        let (s, c) = (0.5 * phi).sin_cos();
        let triplets = a_dirs
            .iter()
            .zip(e_dirs)
            .map(|(a, e)| {
                if a.dot(e).abs() > 1e-12 {
                    return Err(Error::InvalidEnsemble("a_i must be orthogonal to e_i".into()));
                }
                let b = (c * a.vec() + s * e.vec()).normalize()?;
                let b_prime = (c * a.vec() - s * e.vec()).normalize()?;
                Ok(SettingsTriplet { a: *a, b, b_prime })
            })
            .collect::<Result<Vec<_>>>()?;
        let ensemble = SettingsEnsemble {
            triplets,
            phi,
            e_dirs: e_dirs.to_vec(),
            xi,
        };
        ensemble.check_structure()?;
        Ok(ensemble)
    }

    /// Assembles an ensemble from explicit parts, checking every invariant,
    /// including that `xi` really lower-bounds the objective on a dense sample.
    pub fn from_parts(phi: f64, triplets: Vec<SettingsTriplet>, e_dirs: Vec<BlochVector>, xi: f64) -> Result<Self> {
        check_phi(phi)?;
        let ensemble = SettingsEnsemble {
            triplets,
            phi,
            e_dirs,
            xi,
        };
        ensemble.check_structure()?;
        ensemble.verify_xi()?;
        Ok(ensemble)
    }

    pub fn triplets(&self) -> &[SettingsTriplet] {
        &self.triplets
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn e_dirs(&self) -> &[BlochVector] {
        &self.e_dirs
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    /// Checks unit norms, pair angles and the `b − b' = 2 sin(φ/2) e` relation.
    pub fn check_structure(&self) -> Result<()> {
        if self.triplets.is_empty() || self.triplets.len() != self.e_dirs.len() {
            return Err(Error::InvalidEnsemble("triplet and direction counts differ".into()));
        }
        if !(self.xi > 0.0 && self.xi <= 0.5) {
            return Err(Error::InvalidEnsemble(format!("xi = {} not in (0, 1/2]", self.xi)));
        }
        let scale = 2.0 * (0.5 * self.phi).sin();
        for (i, (t, e)) in self.triplets.iter().zip(&self.e_dirs).enumerate() {
            let angle = t.b.angle_to(&t.b_prime);
            if (angle - self.phi.abs()).abs() > ANGLE_TOLERANCE {
                return Err(Error::InvalidEnsemble(format!(
                    "triplet {i}: angle(b, b') = {angle} but phi = {}",
                    self.phi
                )));
            }
            let diff = t.b.vec() - t.b_prime.vec() - scale * e.vec();
            if [diff.x, diff.y, diff.z].iter().any(|d| d.abs() > COMPONENT_TOLERANCE) {
                return Err(Error::InvalidEnsemble(format!(
                    "triplet {i}: b - b' is not 2 sin(phi/2) e"
                )));
            }
        }
        Ok(())
    }

    /// Confirms `xi` does not exceed the objective anywhere on a dense lattice.
    pub fn verify_xi(&self) -> Result<()> {
        let sampled_min = fibonacci_lattice(XI_SAMPLE_POINTS)
            .iter()
            .map(|v| xi_objective(&self.e_dirs, v))
            .fold(f64::INFINITY, f64::min);
        if sampled_min < self.xi - XI_SLACK {
            return Err(Error::InvalidEnsemble(format!(
                "xi = {} exceeds sampled minimum {sampled_min}",
                self.xi
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// The orthogonal-triad geometry used in the experiment: `a = (x̂, ŷ, ẑ)`,
/// `e = (ŷ, ẑ, x̂)`, `ξ = 1/3`.
pub fn standard_triplets(phi: f64) -> Result<SettingsEnsemble> {
    let a = [BlochVector::X, BlochVector::Y, BlochVector::Z];
    let e = [BlochVector::Y, BlochVector::Z, BlochVector::X];
    SettingsEnsemble::from_axes(phi, &a, &e, 1.0 / 3.0)
}

/// Four triplets whose difference directions point to the vertices of a
/// regular tetrahedron; `ξ = 1/√6`.
pub fn tetrahedron_triplets(phi: f64) -> Result<SettingsEnsemble> {
    let e = [
        BlochVector::new(1.0, 1.0, 1.0)?,
        BlochVector::new(1.0, -1.0, -1.0)?,
        BlochVector::new(-1.0, 1.0, -1.0)?,
        BlochVector::new(-1.0, -1.0, 1.0)?,
    ];
    // a_i ⟂ e_i: the cross product with the next vertex is never degenerate.
    let a = (0..4)
        .map(|i| e[i].vec().cross(e[(i + 1) % 4].vec()).normalize())
        .collect::<Result<Vec<_>>>()?;
    SettingsEnsemble::from_axes(phi, &a, &e, 1.0 / 6f64.sqrt())
}

/// Rigidly rotates one party's vectors by `delta` about `axis`.
///
/// For Bob the difference directions rotate with the pairs, so `φ` and the
/// pair relation are preserved; `ξ` is rotation invariant.
pub fn rotate_settings(ensemble: &SettingsEnsemble, axis: &BlochVector, delta: f64, side: Side) -> SettingsEnsemble {
    let rot = |v: &BlochVector| v.rotate(axis, delta);
    let triplets = ensemble
        .triplets
        .iter()
        .map(|t| match side {
            Side::Alice => SettingsTriplet { a: rot(&t.a), ..*t },
            Side::Bob => SettingsTriplet {
                a: t.a,
                b: rot(&t.b),
                b_prime: rot(&t.b_prime),
            },
        })
        .collect();
    let e_dirs = match side {
        Side::Alice => ensemble.e_dirs.clone(),
        Side::Bob => ensemble.e_dirs.iter().map(rot).collect(),
    };
    let rotated = SettingsEnsemble {
        triplets,
        phi: ensemble.phi,
        e_dirs,
        xi: ensemble.xi,
    };
    debug_assert!(rotated.check_structure().is_ok());
    rotated
}

fn check_phi(phi: f64) -> Result<()> {
    if !phi.is_finite() || phi.abs() >= std::f64::consts::PI {
        return Err(Error::InvalidAngle(phi));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct EnsembleDocument {
    phi_deg: f64,
    triplets: Vec<SettingsTriplet>,
    e_dirs: Vec<BlochVector>,
    xi: f64,
}

impl From<SettingsEnsemble> for EnsembleDocument {
    fn from(e: SettingsEnsemble) -> Self {
        EnsembleDocument {
            phi_deg: super::degrees(e.phi),
            triplets: e.triplets,
            e_dirs: e.e_dirs,
            xi: e.xi,
        }
    }
}

impl TryFrom<EnsembleDocument> for SettingsEnsemble {
    type Error = Error;

    fn try_from(d: EnsembleDocument) -> Result<Self> {
        SettingsEnsemble::from_parts(d.phi_deg.to_radians(), d.triplets, d.e_dirs, d.xi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn deg(d: f64) -> f64 {
        d.to_radians()
    }

    #[test]
    fn standard_vectors_at_thirty_degrees() {
        let e = standard_triplets(deg(30.0)).unwrap();
        let t = e.triplets()[0];
        assert!((t.b.x() - 0.965_925_826).abs() < 1e-8);
        assert!((t.b.y() - 0.258_819_045).abs() < 1e-8);
        assert_eq!(t.b.z(), 0.0);
        assert!((t.b_prime.y() + 0.258_819_045).abs() < 1e-8);
        let d = t.b.vec() - t.b_prime.vec();
        assert!(d.x.abs() < 1e-15 && (d.y - 0.517_638_090).abs() < 1e-8 && d.z.abs() < 1e-15);
        // b_2/b_2' = (0, cos, ±sin), b_3/b_3' = (±sin, 0, cos)
        let t2 = e.triplets()[1];
        assert!((t2.b.z() - (deg(15.0)).sin()).abs() < 1e-15);
        let t3 = e.triplets()[2];
        assert!((t3.b.x() - (deg(15.0)).sin()).abs() < 1e-15);
        assert!((t3.b_prime.x() + (deg(15.0)).sin()).abs() < 1e-15);
        assert_eq!(e.e_dirs(), &[BlochVector::Y, BlochVector::Z, BlochVector::X]);
        assert_eq!(e.xi(), 1.0 / 3.0);
    }

    #[test]
    fn zero_angle_pairs_coincide_with_bisector() {
        let e = standard_triplets(0.0).unwrap();
        for t in e.triplets() {
            assert_eq!(t.b, t.a);
            assert_eq!(t.b_prime, t.a);
        }
        assert_eq!(e.e_dirs()[0], BlochVector::Y);
    }

    #[test]
    fn out_of_range_angles_rejected() {
        for phi in [PI, -PI, 4.0, f64::NAN] {
            assert!(matches!(standard_triplets(phi), Err(Error::InvalidAngle(_))));
            assert!(matches!(tetrahedron_triplets(phi), Err(Error::InvalidAngle(_))));
        }
    }

    #[test]
    fn tetrahedron_directions() {
        let e = tetrahedron_triplets(deg(30.0)).unwrap();
        let dirs = e.e_dirs();
        for i in 0..4 {
            for j in (i + 1)..4 {
                assert!((dirs[i].dot(&dirs[j]) + 1.0 / 3.0).abs() < 1e-9);
            }
        }
        assert!((e.xi() - 0.408_248_29).abs() < 1e-8);
        for t in e.triplets() {
            assert!((t.b.angle_to(&t.b_prime) - deg(30.0)).abs() < 1e-12);
            let bisector = (t.b.vec() + t.b_prime.vec()).normalize().unwrap();
            assert!(bisector.angle_to(&t.a) < 1e-12);
        }
    }

    #[test]
    fn negative_angle_swaps_pair_members() {
        let p = standard_triplets(deg(20.0)).unwrap();
        let m = standard_triplets(deg(-20.0)).unwrap();
        for (tp, tm) in p.triplets().iter().zip(m.triplets()) {
            assert!(tp.b.angle_to(&tm.b_prime) < 1e-15);
            assert!(tp.b_prime.angle_to(&tm.b) < 1e-15);
        }
        assert!(m.check_structure().is_ok());
    }

    #[test]
    fn rotation_identity_and_full_turn() {
        let e = standard_triplets(deg(30.0)).unwrap();
        let axis = BlochVector::new(1.0, 2.0, 3.0).unwrap();
        assert_eq!(rotate_settings(&e, &axis, 0.0, Side::Bob), e);
        let turned = rotate_settings(&e, &axis, 2.0 * PI, Side::Bob);
        for (t, r) in e.triplets().iter().zip(turned.triplets()) {
            for (u, v) in [(t.a, r.a), (t.b, r.b), (t.b_prime, r.b_prime)] {
                for (x, y) in u.to_array().iter().zip(v.to_array()) {
                    assert!((x - y).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn small_bob_rotation_keeps_phi() {
        let e = standard_triplets(deg(30.0)).unwrap();
        let delta = deg(0.2);
        let r = rotate_settings(&e, &BlochVector::Z, delta, Side::Bob);
        assert!(r.check_structure().is_ok());
        for (t, rt) in e.triplets().iter().zip(r.triplets()) {
            assert!((rt.b.angle_to(&rt.b_prime) - deg(30.0)).abs() < 1e-12);
            assert_eq!(rt.a, t.a);
        }
        // b_1 lies in the xy-plane, so a z-rotation moves it by exactly delta.
        assert!((r.triplets()[0].b.angle_to(&e.triplets()[0].b) - delta).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let e = tetrahedron_triplets(deg(25.0)).unwrap();
        let json = e.to_json().unwrap();
        assert!(json.contains("\"phi_deg\""));
        assert!(json.contains("\"b_prime\""));
        let back = SettingsEnsemble::from_json(&json).unwrap();
        assert!((back.phi() - e.phi()).abs() < 1e-15);
        assert_eq!(back.len(), 4);

        let mut doc: serde_json::Value = serde_json::from_str(&json).unwrap();
        doc["xi"] = serde_json::json!(0.45);
        assert!(SettingsEnsemble::from_json(&doc.to_string()).is_err());
    }
}
