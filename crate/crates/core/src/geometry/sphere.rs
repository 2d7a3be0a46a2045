//! Deterministic point sets on the unit sphere and a local minimizer for
//! functions of a direction.

use std::collections::HashMap;

use super::{BlochVector, Vec3};

/// Quasi-uniform spherical Fibonacci lattice of `n` points.
pub fn fibonacci_lattice(n: usize) -> Vec<BlochVector> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let (s, c) = (golden * i as f64).sin_cos();
            BlochVector(Vec3::new(r * c, r * s, z))
        })
        .collect()
}

/// Geodesic grid obtained by repeatedly subdividing an icosahedron.
///
/// `subdivisions = 3` gives the 642-vertex default grid. The vertex set is
/// closed under `v -> -v` at every level.
#[derive(Debug, Clone)]
pub struct Icosphere {
    pub vertices: Vec<BlochVector>,
    pub faces: Vec<[usize; 3]>,
}

impl Icosphere {
    pub fn new(subdivisions: u32) -> Self {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let raw = [
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ];
        let mut vertices: Vec<Vec3> = raw.iter().map(|&a| Vec3::from(a)).collect();
        for v in vertices.iter_mut() {
            *v = (1.0 / v.norm()) * *v;
        }
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];

        for _ in 0..subdivisions {
            let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
            let mut next = Vec::with_capacity(faces.len() * 4);
            let mut midpoint = |i: usize, j: usize, vertices: &mut Vec<Vec3>| -> usize {
                let key = (i.min(j), i.max(j));
                *midpoints.entry(key).or_insert_with(|| {
                    let m = vertices[i] + vertices[j];
                    vertices.push((1.0 / m.norm()) * m);
                    vertices.len() - 1
                })
            };
            for &[a, b, c] in &faces {
                let ab = midpoint(a, b, &mut vertices);
                let bc = midpoint(b, c, &mut vertices);
                let ca = midpoint(c, a, &mut vertices);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }

        Icosphere {
            vertices: vertices.into_iter().map(BlochVector).collect(),
            faces,
        }
    }

    /// Undirected edges `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .faces
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(i, j)| (i.min(j), i.max(j)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }
}

/// For every vertex, the index of its antipode, or the first vertex lacking one.
pub fn antipode_map(points: &[BlochVector], tol: f64) -> Result<Vec<usize>, usize> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| points.iter().position(|q| (p.vec() + q.vec()).norm() <= tol).ok_or(i))
        .collect()
}

/// Result of [`minimize_on_sphere`].
#[derive(Debug, Clone, Copy)]
pub struct SphereMinimum {
    pub point: BlochVector,
    pub value: f64,
}

/// Nelder–Mead polish of `f` around `start`, in tangent-plane coordinates.
///
/// The simplex lives in the plane tangent at `start`; each trial point is
/// projected back to the sphere, so no pole singularity arises.
pub fn minimize_on_sphere<F>(f: F, start: BlochVector, initial_step: f64, tol: f64, max_iter: usize) -> SphereMinimum
where
    F: Fn(&BlochVector) -> f64,
{
    let (t1, t2) = start.tangent_basis();
    let to_sphere = |p: [f64; 2]| -> BlochVector {
        let v = start.vec() + p[0] * t1.vec() + p[1] * t2.vec();
        BlochVector((1.0 / v.norm()) * v)
    };
    let eval = |p: [f64; 2]| f(&to_sphere(p));

    let mut simplex = [[0.0, 0.0], [initial_step, 0.0], [0.0, initial_step]];
    let mut values = simplex.map(eval);

    for _ in 0..max_iter {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        simplex = order.map(|i| simplex[i]);
        values = order.map(|i| values[i]);

        let spread = values[2] - values[0];
        let size = dist(simplex[0], simplex[1]).max(dist(simplex[0], simplex[2]));
        if spread.abs() <= tol && size <= tol {
            break;
        }

        let centroid = [
            0.5 * (simplex[0][0] + simplex[1][0]),
            0.5 * (simplex[0][1] + simplex[1][1]),
        ];
        let along = |t: f64| {
            [
                centroid[0] + t * (simplex[2][0] - centroid[0]),
                centroid[1] + t * (simplex[2][1] - centroid[1]),
            ]
        };

        let reflected = along(-1.0);
        let fr = eval(reflected);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = eval(expanded);
            if fe < fr {
                simplex[2] = expanded;
                values[2] = fe;
            } else {
                simplex[2] = reflected;
                values[2] = fr;
            }
            continue;
        }
        if fr < values[1] {
            simplex[2] = reflected;
            values[2] = fr;
            continue;
        }
        let contracted = if fr < values[2] { along(-0.5) } else { along(0.5) };
        let fc = eval(contracted);
        if fc < values[2].min(fr) {
            simplex[2] = contracted;
            values[2] = fc;
            continue;
        }
        // Shrink toward the best vertex.
        for k in 1..3 {
            simplex[k] = [
                simplex[0][0] + 0.5 * (simplex[k][0] - simplex[0][0]),
                simplex[0][1] + 0.5 * (simplex[k][1] - simplex[0][1]),
            ];
            values[k] = eval(simplex[k]);
        }
    }

    let best = (0..3).min_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap();
    SphereMinimum {
        point: to_sphere(simplex[best]),
        value: values[best],
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}
