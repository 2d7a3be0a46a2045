use rayon::prelude::*;

use super::sphere::{fibonacci_lattice, minimize_on_sphere};
use super::BlochVector;
use crate::error::{check_range, Error, Result};

/// Lattice size used when callers do not ask for a specific resolution.
pub const DEFAULT_XI_RESOLUTION: usize = 20_000;

const POLISH_CANDIDATES: usize = 12;
const POLISH_RESTARTS: usize = 3;

/// `(1/N) Σ |v · e_i|`, the quantity whose minimum over `v` is ξ.
pub fn xi_objective(e_dirs: &[BlochVector], v: &BlochVector) -> f64 {
    e_dirs.iter().map(|e| v.dot(e).abs()).sum::<f64>() / e_dirs.len() as f64
}

/// Minimum over the unit sphere of [`xi_objective`].
///
/// Evaluates a Fibonacci lattice of `resolution` points, then polishes the
/// best few samples with Nelder–Mead. The result is deterministic for a fixed
/// resolution.
pub fn xi_lower_bound(e_dirs: &[BlochVector], resolution: usize) -> Result<f64> {
    if e_dirs.is_empty() {
        return Err(Error::EmptyDirections);
    }
    check_range("resolution", resolution as f64, 1e3, f64::INFINITY, "[1000, inf)")?;

    let lattice = fibonacci_lattice(resolution);
    let mut scored: Vec<(f64, usize)> = lattice
        .par_iter()
        .enumerate()
        .map(|(i, v)| (xi_objective(e_dirs, v), i))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let spacing = (4.0 * std::f64::consts::PI / resolution as f64).sqrt();
    let f = |v: &BlochVector| xi_objective(e_dirs, v);

    let best = scored
        .par_iter()
        .take(POLISH_CANDIDATES)
        .map(|&(value, i)| {
            let mut point = lattice[i];
            let mut value = value;
            let mut step = 2.0 * spacing;
            for _ in 0..POLISH_RESTARTS {
                let m = minimize_on_sphere(f, point, step, 1e-14, 4000);
                if m.value <= value {
                    point = m.point;
                    value = m.value;
                }
                step *= 0.1;
            }
            value
        })
        .reduce(|| f64::INFINITY, f64::min);

    Ok(best.min(scored[0].0).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_directions_rejected() {
        assert!(matches!(xi_lower_bound(&[], 5000), Err(Error::EmptyDirections)));
    }

    #[test]
    fn coarse_resolution_rejected() {
        assert!(xi_lower_bound(&[BlochVector::Z], 100).is_err());
    }

    #[test]
    fn single_direction_gives_zero() {
        let xi = xi_lower_bound(&[BlochVector::Z], 2000).unwrap();
        assert!(xi.abs() < 1e-4, "{xi}");
    }

    #[test]
    fn deterministic_for_fixed_resolution() {
        let dirs = [BlochVector::X, BlochVector::new(1.0, 1.0, 0.3).unwrap()];
        let a = xi_lower_bound(&dirs, 3000).unwrap();
        let b = xi_lower_bound(&dirs, 3000).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
