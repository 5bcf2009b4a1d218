//! Interpolation baselines over measured directions.

use crate::dataset::Direction;
use crate::error::{Error, Result};

/// Distance difference below which two training directions count as equally near.
pub const NEAREST_TIE_TOLERANCE: f64 = 1e-12;

/// Index of the training direction nearest to `query` in great-circle distance; ties go to
/// the lowest index.
pub fn nearest_index(train: &[Direction], query: &Direction) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, d) in train.iter().enumerate() {
        let dist = d.great_circle_distance(query);
        if best.is_none_or(|(_, b)| dist < b - NEAREST_TIE_TOLERANCE) {
            best = Some((i, dist));
        }
    }
    best.map(|(i, _)| i)
}

/// Spectrum of the nearest training direction.
pub fn baseline_nearest(train: &[Direction], spectra: &[Vec<f64>], query: &Direction) -> Result<Vec<f64>> {
    check_train(train, spectra)?;
    let i = nearest_index(train, query).expect("nonempty");
    Ok(spectra[i].clone())
}

fn check_train(train: &[Direction], spectra: &[Vec<f64>]) -> Result<()> {
    if train.is_empty() {
        return Err(Error::Split(
            "baseline needs at least one training direction".into(),
        ));
    }
    if train.len() != spectra.len() {
        return Err(Error::Shape(format!(
            "{} directions but {} spectra",
            train.len(),
            spectra.len()
        )));
    }
    Ok(())
}

type Vec3 = [f64; 3];

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn det3(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    dot(a, cross(b, c))
}

const HULL_EPS: f64 = 1e-12;

/// Convex-hull triangulation of training directions on the unit sphere.
#[derive(Clone, Debug)]
pub struct Triangulation {
    points: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
}

impl Triangulation {
    /// Builds the hull of the unit vectors by incremental insertion. Needs four directions
    /// that are not coplanar.
    pub fn new(dirs: &[Direction]) -> Result<Self> {
        let points: Vec<Vec3> = dirs.iter().map(Direction::unit_vector).collect();
        let degenerate = || Error::Split("VBAP needs at least four non-coplanar directions".into());
        let n = points.len();
        if n < 4 {
            return Err(degenerate());
        }
        // initial tetrahedron: first point, farthest from it, farthest from their line,
        // farthest from their plane
        let p0 = 0;
        let p1 = (1..n)
            .max_by(|&a, &b| {
                let da = dot(sub(points[a], points[p0]), sub(points[a], points[p0]));
                let db = dot(sub(points[b], points[p0]), sub(points[b], points[p0]));
                da.total_cmp(&db)
            })
            .expect("n >= 4");
        let line = sub(points[p1], points[p0]);
        let area = |i: usize| {
            let c = cross(line, sub(points[i], points[p0]));
            dot(c, c)
        };
        let p2 = (0..n)
            .max_by(|&a, &b| area(a).total_cmp(&area(b)))
            .expect("n >= 4");
        if area(p2) < HULL_EPS {
            return Err(degenerate());
        }
        let normal = cross(line, sub(points[p2], points[p0]));
        let height = |i: usize| dot(normal, sub(points[i], points[p0])).abs();
        let p3 = (0..n)
            .max_by(|&a, &b| height(a).total_cmp(&height(b)))
            .expect("n >= 4");
        if height(p3) < 1e-9 {
            return Err(degenerate());
        }

        let seed = [p0, p1, p2, p3];
        let inner = seed.iter().fold([0.0; 3], |acc, &i| {
            [
                acc[0] + points[i][0] / 4.0,
                acc[1] + points[i][1] / 4.0,
                acc[2] + points[i][2] / 4.0,
            ]
        });
        let orient = |f: [usize; 3]| {
            let [a, b, c] = f;
            if det3(
                sub(points[b], points[a]),
                sub(points[c], points[a]),
                sub(inner, points[a]),
            ) > 0.0
            {
                [a, c, b]
            } else {
                f
            }
        };
        let mut faces: Vec<[usize; 3]> = vec![
            orient([p0, p1, p2]),
            orient([p0, p1, p3]),
            orient([p0, p2, p3]),
            orient([p1, p2, p3]),
        ];
        let visible = |f: &[usize; 3], p: Vec3| {
            let [a, b, c] = *f;
            det3(
                sub(points[b], points[a]),
                sub(points[c], points[a]),
                sub(p, points[a]),
            ) > HULL_EPS
        };

        for (i, &p) in points.iter().enumerate() {
            if seed.contains(&i) {
                continue;
            }
            let (vis, keep): (Vec<[usize; 3]>, Vec<[usize; 3]>) =
                faces.into_iter().partition(|f| visible(f, p));
            if vis.is_empty() {
                // inside or on the hull; cannot happen for distinct unit vectors except in
                // exactly coplanar configurations, where the point is already covered
                faces = keep;
                continue;
            }
            // horizon: directed edges of visible faces whose reverse is not visible
            let mut edges = Vec::new();
            for f in &vis {
                for k in 0..3 {
                    edges.push((f[k], f[(k + 1) % 3]));
                }
            }
            let mut next = keep;
            for &(a, b) in &edges {
                if !edges.contains(&(b, a)) {
                    next.push([a, b, i]);
                }
            }
            faces = next;
        }
        Ok(Self { points, faces })
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Vertex indices and nonnegative gains (summing to one) of the triangle whose cone
    /// contains `query`, or `None` if no triangle does.
    pub fn weights(&self, query: &Direction) -> Option<[(usize, f64); 3]> {
        let q = query.unit_vector();
        let mut best: Option<([(usize, f64); 3], f64)> = None;
        for f in &self.faces {
            let [a, b, c] = f.map(|i| self.points[i]);
            let det = det3(a, b, c);
            if det.abs() < HULL_EPS {
                continue;
            }
            // Cramer's rule for q = g0 a + g1 b + g2 c
            let g = [det3(q, b, c) / det, det3(a, q, c) / det, det3(a, b, q) / det];
            let min = g[0].min(g[1]).min(g[2]);
            if min < -1e-9 {
                continue;
            }
            if best.as_ref().is_none_or(|(_, m)| min > *m) {
                let g = g.map(|v| v.max(0.0));
                let s: f64 = g.iter().sum();
                best = Some(([(f[0], g[0] / s), (f[1], g[1] / s), (f[2], g[2] / s)], min));
            }
        }
        best.map(|(w, _)| w)
    }
}

/// Result of a VBAP interpolation.
#[derive(Clone, Debug, PartialEq)]
pub struct VbapEstimate {
    pub spectrum: Vec<f64>,
    /// Gain per training index; empty when the nearest-neighbour fallback was used.
    pub weights: Vec<(usize, f64)>,
    pub fallback: bool,
}

/// Gain-weighted sum of the dB spectra at the vertices of the enclosing triangle. Falls
/// back to the nearest neighbour when no triangle encloses the query.
pub fn baseline_vbap(
    tri: &Triangulation,
    train: &[Direction],
    spectra: &[Vec<f64>],
    query: &Direction,
) -> Result<VbapEstimate> {
    check_train(train, spectra)?;
    if tri.points.len() != train.len() {
        return Err(Error::Shape(
            "triangulation was built for other directions".into(),
        ));
    }
    match tri.weights(query) {
        Some(w) => {
            let mut out = vec![0.0; spectra[0].len()];
            for &(i, g) in &w {
                for (o, v) in out.iter_mut().zip(&spectra[i]) {
                    *o += g * v;
                }
            }
            Ok(VbapEstimate {
                spectrum: out,
                weights: w.to_vec(),
                fallback: false,
            })
        }
        None => Ok(VbapEstimate {
            spectrum: baseline_nearest(train, spectra, query)?,
            weights: Vec::new(),
            fallback: true,
        }),
    }
}
