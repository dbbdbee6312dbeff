//! Incremental 3D convex hull returning outward facet half-spaces.

use std::collections::HashSet;

use crate::error::{Error, Result};

type P3 = [f64; 3];

fn sub(a: P3, b: P3) -> P3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: P3, b: P3) -> P3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: P3, b: P3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: P3) -> f64 {
    dot(a, a).sqrt()
}

/// Facet plane `normal·x = offset` with unit outward normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSpace {
    pub normal: P3,
    pub offset: f64,
}

impl HalfSpace {
    fn through(a: P3, b: P3, c: P3) -> Option<Self> {
        let n = cross(sub(b, a), sub(c, a));
        let len = norm(n);
        if len == 0.0 {
            return None;
        }
        let normal = [n[0] / len, n[1] / len, n[2] / len];
        Some(Self {
            normal,
            offset: dot(normal, a),
        })
    }

    #[inline]
    pub fn signed_distance(&self, x: P3) -> f64 {
        dot(self.normal, x) - self.offset
    }
}

#[derive(Debug, Clone)]
struct Face {
    v: [usize; 3],
    plane: HalfSpace,
}

/// Convex hull of a point cloud as a closed triangulated surface.
#[derive(Debug, Clone)]
pub struct ConvexHull {
    pub points: Vec<P3>,
    pub faces: Vec<[usize; 3]>,
    pub planes: Vec<HalfSpace>,
    /// Length of the bounding-box diagonal, the scale of all tolerances.
    pub scale: f64,
}

impl ConvexHull {
    pub fn new(points: &[P3]) -> Result<Self> {
        if points.len() < 4 {
            return Err(Error::InvalidConfig(format!("a 3D hull needs at least 4 points, got {}", points.len())));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("hull input contains non-finite coordinates".into()));
        }
        let mut lo = points[0];
        let mut hi = points[0];
        for p in points {
            for d in 0..3 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let scale = norm(sub(hi, lo));
        let eps = 1e-12 * scale.max(f64::MIN_POSITIVE);
        let degenerate = || Error::InvalidConfig("point cloud is degenerate (coplanar or collinear); no 3D hull".into());

        // initial tetrahedron from extreme points
        let i0 = (0..points.len())
            .min_by(|&a, &b| points[a][0].total_cmp(&points[b][0]))
            .ok_or_else(degenerate)?;
        let i1 = (0..points.len())
            .max_by(|&a, &b| norm(sub(points[a], points[i0])).total_cmp(&norm(sub(points[b], points[i0]))))
            .ok_or_else(degenerate)?;
        let axis = sub(points[i1], points[i0]);
        if norm(axis) <= eps {
            return Err(degenerate());
        }
        let line_dist = |p: P3| norm(cross(axis, sub(p, points[i0]))) / norm(axis);
        let i2 = (0..points.len())
            .max_by(|&a, &b| line_dist(points[a]).total_cmp(&line_dist(points[b])))
            .ok_or_else(degenerate)?;
        if line_dist(points[i2]) <= eps {
            return Err(degenerate());
        }
        let base = HalfSpace::through(points[i0], points[i1], points[i2]).ok_or_else(degenerate)?;
        let i3 = (0..points.len())
            .max_by(|&a, &b| base.signed_distance(points[a]).abs().total_cmp(&base.signed_distance(points[b]).abs()))
            .ok_or_else(degenerate)?;
        if base.signed_distance(points[i3]).abs() <= eps {
            return Err(degenerate());
        }

        let centroid = {
            let s = [i0, i1, i2, i3].iter().fold([0.0; 3], |acc, &i| {
                [acc[0] + points[i][0], acc[1] + points[i][1], acc[2] + points[i][2]]
            });
            [s[0] / 4.0, s[1] / 4.0, s[2] / 4.0]
        };
        let make = |a: usize, b: usize, c: usize| -> Option<Face> {
            let plane = HalfSpace::through(points[a], points[b], points[c])?;
            if plane.signed_distance(centroid) > 0.0 {
                let plane = HalfSpace::through(points[a], points[c], points[b])?;
                Some(Face { v: [a, c, b], plane })
            } else {
                Some(Face { v: [a, b, c], plane })
            }
        };
        let mut faces: Vec<Face> = [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]]
            .iter()
            .map(|f| make(f[0], f[1], f[2]))
            .collect::<Option<_>>()
            .ok_or_else(degenerate)?;

        let seeds = [i0, i1, i2, i3];
        for (pi, &p) in points.iter().enumerate() {
            if seeds.contains(&pi) {
                continue;
            }
            let visible: Vec<bool> = faces.iter().map(|f| f.plane.signed_distance(p) > eps).collect();
            if !visible.iter().any(|&v| v) {
                continue;
            }
            let mut edges: HashSet<(usize, usize)> = HashSet::new();
            for (f, _) in faces.iter().zip(&visible).filter(|(_, v)| **v) {
                for k in 0..3 {
                    edges.insert((f.v[k], f.v[(k + 1) % 3]));
                }
            }
            let mut horizon: Vec<(usize, usize)> = edges.iter().copied().filter(|&(a, b)| !edges.contains(&(b, a))).collect();
            horizon.sort_unstable();
            let mut kept: Vec<Face> = faces
                .into_iter()
                .zip(&visible)
                .filter(|(_, v)| !**v)
                .map(|(f, _)| f)
                .collect();
            for (a, b) in horizon {
                // keep the edge direction of the removed face
                match HalfSpace::through(points[a], points[b], p) {
                    Some(plane) => kept.push(Face { v: [a, b, pi], plane }),
                    None => return Err(Error::Numeric("degenerate facet while building hull".into())),
                }
            }
            faces = kept;
        }
        Ok(Self {
            points: points.to_vec(),
            faces: faces.iter().map(|f| f.v).collect(),
            planes: faces.iter().map(|f| f.plane).collect(),
            scale,
        })
    }

    /// Membership with an absolute tolerance `tol·scale`.
    pub fn contains_tol(&self, x: P3, tol: f64) -> bool {
        let t = tol * self.scale;
        self.planes.iter().all(|h| h.signed_distance(x) <= t)
    }

    pub fn contains(&self, x: P3) -> bool {
        self.contains_tol(x, 1e-10)
    }

    pub fn n_facets(&self) -> usize {
        self.faces.len()
    }

    /// Indices of points that are hull vertices.
    pub fn vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.faces.iter().flatten().copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Enclosed volume via the divergence theorem.
    pub fn volume(&self) -> f64 {
        let o = self.points[self.faces[0][0]];
        self.faces
            .iter()
            .map(|f| {
                let a = sub(self.points[f[0]], o);
                let b = sub(self.points[f[1]], o);
                let c = sub(self.points[f[2]], o);
                dot(a, cross(b, c)) / 6.0
            })
            .sum()
    }
}
