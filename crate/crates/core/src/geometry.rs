//! Convex bodies in dimension ≤ 3 and their Minkowski interpolants.
//!
//! Polytopes carry both descriptions: the hull vertices and the facet
//! half-spaces `{x : a·x ≤ b}` with unit normals. Balls are analytic.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};
use crate::linalg::dot;

/// Relative tolerance for hull predicates (orientation, coplanarity).
const HULL_EPS: f64 = 1e-10;
/// Radius of the smallest interior ball accepted as full-dimensional.
pub const MIN_INRADIUS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl HalfSpace {
    /// Signed slack `b - a·x`; positive inside.
    pub fn slack(&self, x: &[f64]) -> f64 {
        self.offset - dot(&self.normal, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BodyKind {
    Polytope,
    Ball,
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Polytope {
        vertices: Vec<Vec<f64>>,
        halfspaces: Vec<HalfSpace>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
}

/// A bounded, full-dimensional convex body in ℝᴺ, N ∈ {1, 2, 3}.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexBody {
    dim: usize,
    shape: Shape,
}

impl ConvexBody {
    /// Convex hull of a point cloud. Redundant points are dropped and the
    /// facet half-spaces are derived.
    pub fn polytope(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = match points.first() {
            Some(p) => p.len(),
            None => bail!(Geometry, "polytope needs at least one vertex"),
        };
        check_dim(dim)?;
        if points.iter().any(|p| p.len() != dim) {
            bail!(Geometry, "vertices have inconsistent dimensions");
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            bail!(Geometry, "vertex coordinates must be finite");
        }
        let (vertices, halfspaces) = match dim {
            1 => hull_1d(&points)?,
            2 => hull_2d(&points)?,
            _ => hull_3d(&points)?,
        };
        let body = ConvexBody {
            dim,
            shape: Shape::Polytope {
                vertices,
                halfspaces,
            },
        };
        body.check_full_dimensional()?;
        Ok(body)
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        check_dim(center.len())?;
        if !(radius.is_finite() && radius >= MIN_INRADIUS) || center.iter().any(|c| !c.is_finite())
        {
            bail!(
                Geometry,
                "ball needs finite center and radius ≥ {MIN_INRADIUS}, got {radius}"
            );
        }
        Ok(ConvexBody {
            dim: center.len(),
            shape: Shape::Ball { center, radius },
        })
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::polytope(vec![vec![a], vec![b]])
    }

    /// Axis-aligned box `[lo, hi]`.
    pub fn aabb(lo: &[f64], hi: &[f64]) -> Result<Self> {
        let n = lo.len();
        let pts = (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] })
                    .collect()
            })
            .collect();
        Self::polytope(pts)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> BodyKind {
        match self.shape {
            Shape::Polytope { .. } => BodyKind::Polytope,
            Shape::Ball { .. } => BodyKind::Ball,
        }
    }

    /// Hull vertices (empty for balls). In 2D they are in counter-clockwise order.
    pub fn vertices(&self) -> &[Vec<f64>] {
        match &self.shape {
            Shape::Polytope { vertices, .. } => vertices,
            Shape::Ball { .. } => &[],
        }
    }

    /// Facet half-spaces (empty for balls).
    pub fn halfspaces(&self) -> &[HalfSpace] {
        match &self.shape {
            Shape::Polytope { halfspaces, .. } => halfspaces,
            Shape::Ball { .. } => &[],
        }
    }

    pub fn ball_params(&self) -> Option<(&[f64], f64)> {
        match &self.shape {
            Shape::Ball { center, radius } => Some((center, *radius)),
            Shape::Polytope { .. } => None,
        }
    }

    /// Support function `h(u) = max_{x ∈ body} x·u` for a unit direction `u`.
    pub fn support(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim {
            bail!(
                Geometry,
                "direction has dimension {}, body has {}",
                u.len(),
                self.dim
            );
        }
        let n2 = dot(u, u);
        if (n2.sqrt() - 1.0).abs() > 1e-12 {
            bail!(
                Geometry,
                "support direction must be a unit vector (norm {})",
                n2.sqrt()
            );
        }
        Ok(self.support_unchecked(u))
    }

    fn support_unchecked(&self, u: &[f64]) -> f64 {
        match &self.shape {
            Shape::Polytope { vertices, .. } => vertices
                .iter()
                .map(|v| dot(v, u))
                .fold(f64::NEG_INFINITY, f64::max),
            Shape::Ball { center, radius } => dot(center, u) + radius * dot(u, u).sqrt(),
        }
    }

    /// `true` iff `x` lies in the body shrunk by `margin`.
    pub fn contains(&self, x: &[f64], margin: f64) -> bool {
        match &self.shape {
            Shape::Polytope { halfspaces, .. } => halfspaces
                .iter()
                .all(|h| dot(&h.normal, x) <= h.offset - margin),
            Shape::Ball { center, radius } => {
                let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                d2.sqrt() <= radius - margin
            }
        }
    }

    /// Signed depth: distance to the boundary for interior points of a ball,
    /// `min_i (b_i - a_i·x)` for polytopes. Negative outside.
    pub fn depth(&self, x: &[f64]) -> f64 {
        match &self.shape {
            Shape::Polytope { halfspaces, .. } => halfspaces
                .iter()
                .map(|h| h.slack(x))
                .fold(f64::INFINITY, f64::min),
            Shape::Ball { center, radius } => {
                let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                radius - d2.sqrt()
            }
        }
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.shape {
            Shape::Polytope { vertices, .. } => {
                let mut lo = vec![f64::INFINITY; self.dim];
                let mut hi = vec![f64::NEG_INFINITY; self.dim];
                for v in vertices {
                    for i in 0..self.dim {
                        lo[i] = lo[i].min(v[i]);
                        hi[i] = hi[i].max(v[i]);
                    }
                }
                (lo, hi)
            }
            Shape::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        }
    }

    /// Centre and radius of a largest inscribed ball.
    ///
    /// For polytopes this solves the Chebyshev-centre LP exactly by
    /// enumerating the basic solutions of `a_i·x + ρ = b_i` over all
    /// `(N+1)`-subsets of facets.
    pub fn chebyshev_center(&self) -> (Vec<f64>, f64) {
        match &self.shape {
            Shape::Ball { center, radius } => (center.clone(), *radius),
            Shape::Polytope { halfspaces, .. } => chebyshev_polytope(self.dim, halfspaces),
        }
    }

    pub fn inradius(&self) -> f64 {
        self.chebyshev_center().1
    }

    fn check_full_dimensional(&self) -> Result<()> {
        let r = self.inradius();
        if !(r >= MIN_INRADIUS) {
            bail!(
                Geometry,
                "degenerate body: inradius {r:e} below {MIN_INRADIUS:e}"
            );
        }
        Ok(())
    }

    /// Image under `x ↦ T x + shift`. `T` must be invertible.
    pub fn affine_image(&self, t: &crate::linalg::Matrix, shift: &[f64]) -> Result<Self> {
        let map = |x: &[f64]| -> Vec<f64> {
            t.mul_vec(x).iter().zip(shift).map(|(a, b)| a + b).collect()
        };
        match &self.shape {
            Shape::Polytope { vertices, .. } => {
                Self::polytope(vertices.iter().map(|v| map(v)).collect())
            }
            Shape::Ball { center, radius } => {
                if !t.is_diagonal()
                    || (0..self.dim).any(|i| (t.get(i, i).abs() - t.get(0, 0).abs()).abs() > 0.0)
                {
                    bail!(Geometry, "only similarity maps send balls to balls");
                }
                Self::ball(map(center), radius * t.get(0, 0).abs())
            }
        }
    }

    /// Lebesgue measure.
    pub fn volume(&self) -> Result<f64> {
        match &self.shape {
            Shape::Ball { radius, .. } => Ok(match self.dim {
                1 => 2.0 * radius,
                2 => std::f64::consts::PI * radius * radius,
                _ => 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3),
            }),
            Shape::Polytope {
                vertices,
                halfspaces,
            } => {
                let v = match self.dim {
                    1 => vertices[1][0] - vertices[0][0],
                    2 => shoelace(vertices),
                    _ => fan_volume_3d(vertices, halfspaces),
                };
                if !(v > 0.0) {
                    bail!(Geometry, "degenerate body has zero volume");
                }
                Ok(v)
            }
        }
    }

    /// Standard Gaussian measure of the body by the midpoint rule on a
    /// tensor grid over its bounding box.
    pub fn gaussian_volume(&self, nodes_per_axis: usize) -> Result<GaussianVolume> {
        if nodes_per_axis < 16 {
            bail!(
                Geometry,
                "gaussian_volume needs nodes_per_axis ≥ 16, got {nodes_per_axis}"
            );
        }
        Ok(gaussian_volume(self, nodes_per_axis))
    }

    fn spec(&self) -> BodySpec {
        match &self.shape {
            Shape::Polytope { vertices, .. } => BodySpec {
                dim: self.dim,
                kind: BodyKind::Polytope,
                vertices: Some(vertices.clone()),
                center: None,
                radius: None,
            },
            Shape::Ball { center, radius } => BodySpec {
                dim: self.dim,
                kind: BodyKind::Ball,
                vertices: None,
                center: Some(center.clone()),
                radius: Some(*radius),
            },
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if !(1..=3).contains(&dim) {
        bail!(Geometry, "dimension must be 1, 2 or 3, got {dim}");
    }
    Ok(())
}

/// `(1-r)·b0 + r·b1`.
pub fn minkowski_interpolate(b0: &ConvexBody, b1: &ConvexBody, r: f64) -> Result<ConvexBody> {
    if b0.dim != b1.dim {
        bail!(Geometry, "dimension mismatch: {} vs {}", b0.dim, b1.dim);
    }
    if !(0.0..=1.0).contains(&r) {
        bail!(Geometry, "interpolation parameter r={r} outside [0,1]");
    }
    match (&b0.shape, &b1.shape) {
        (
            Shape::Ball {
                center: c0,
                radius: r0,
            },
            Shape::Ball {
                center: c1,
                radius: r1,
            },
        ) => ConvexBody::ball(crate::linalg::lerp(c0, c1, r), (1.0 - r) * r0 + r * r1),
        (Shape::Polytope { vertices: v0, .. }, Shape::Polytope { vertices: v1, .. }) => {
            let mut pts = Vec::with_capacity(v0.len() * v1.len());
            for v in v0 {
                for w in v1 {
                    pts.push(crate::linalg::lerp(v, w, r));
                }
            }
            ConvexBody::polytope(pts)
        }
        _ => bail!(
            Geometry,
            "mixed polytope/ball Minkowski sums are not supported"
        ),
    }
}

/// Result of [`ConvexBody::gaussian_volume`].
#[derive(Debug, Clone, Serialize)]
pub struct GaussianVolume {
    pub value: f64,
    /// Cell widths per axis.
    pub spacing: Vec<f64>,
    /// Bound on |value - γ(body)|: Gaussian mass of cells the boundary may
    /// cross plus the interior midpoint-rule term.
    pub error_bound: f64,
}

fn gaussian_volume(body: &ConvexBody, n: usize) -> GaussianVolume {
    let dim = body.dim;
    let (lo, hi) = body.bounding_box();
    let h: Vec<f64> = (0..dim).map(|i| (hi[i] - lo[i]) / n as f64).collect();
    let cell_vol: f64 = h.iter().product();
    let half_diag = 0.5 * h.iter().map(|x| x * x).sum::<f64>().sqrt();
    let norm = (2.0 * std::f64::consts::PI).powf(-(dim as f64) / 2.0);
    let density = |x: &[f64]| norm * (-0.5 * dot(x, x)).exp();

    let total = n.pow(dim as u32);
    let mut value = 0.0;
    let mut uncertain = 0.0;
    let mut idx = vec![0usize; dim];
    let mut mid = vec![0.0; dim];
    let mut corner = vec![0.0; dim];
    for _ in 0..total {
        for i in 0..dim {
            mid[i] = lo[i] + (idx[i] as f64 + 0.5) * h[i];
        }
        if body.contains(&mid, 0.0) {
            value += density(&mid) * cell_vol;
        }
        if body.depth(&mid) > -half_diag {
            let all_in = (0..1usize << dim).all(|mask| {
                for i in 0..dim {
                    let s = if mask >> i & 1 == 1 { 0.5 } else { -0.5 };
                    corner[i] = mid[i] + s * h[i];
                }
                body.contains(&corner, 0.0)
            });
            if !all_in {
                let r = dot(&mid, &mid).sqrt();
                let peak = norm * (-0.5 * (r - half_diag).max(0.0).powi(2)).exp();
                uncertain += peak * cell_vol;
            }
        }
        for i in 0..dim {
            idx[i] += 1;
            if idx[i] < n {
                break;
            }
            idx[i] = 0;
        }
    }
    let vol = body.volume().unwrap_or(0.0);
    let midpoint_term = h.iter().map(|x| x * x).sum::<f64>() / 24.0 * norm * vol;
    GaussianVolume {
        value,
        spacing: h,
        error_bound: uncertain + midpoint_term,
    }
}

fn shoelace(v: &[Vec<f64>]) -> f64 {
    let n = v.len();
    let mut a = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        a += v[i][0] * v[j][1] - v[j][0] * v[i][1];
    }
    0.5 * a.abs()
}

fn scale_of(points: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .flatten()
        .fold(0.0f64, |m, c| m.max(c.abs()))
        .max(1.0)
}

fn dedup_points(points: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut pts: Vec<Vec<f64>> = points.to_vec();
    pts.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(pts.len());
    for p in pts {
        let dup = out
            .iter()
            .rev()
            .take(64)
            .any(|q| q.iter().zip(&p).all(|(a, b)| (a - b).abs() <= tol));
        if !dup {
            out.push(p);
        }
    }
    out
}

fn hull_1d(points: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<HalfSpace>)> {
    let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let hi = points
        .iter()
        .map(|p| p[0])
        .fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo > 2.0 * MIN_INRADIUS) {
        bail!(Geometry, "degenerate interval [{lo}, {hi}]");
    }
    Ok((
        vec![vec![lo], vec![hi]],
        vec![
            HalfSpace {
                normal: vec![-1.0],
                offset: -lo,
            },
            HalfSpace {
                normal: vec![1.0],
                offset: hi,
            },
        ],
    ))
}

fn cross2(o: &[f64], a: &[f64], b: &[f64]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain; collinear points are dropped. Output is CCW.
fn hull_2d(points: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<HalfSpace>)> {
    let scale = scale_of(points);
    let pts = dedup_points(points, 1e-14 * scale);
    if pts.len() < 3 {
        bail!(Geometry, "degenerate polygon: fewer than 3 distinct points");
    }
    let eps = HULL_EPS * scale * scale;
    let mut lower: Vec<Vec<f64>> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross2(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= eps
        {
            lower.pop();
        }
        lower.push(p.clone());
    }
    let mut upper: Vec<Vec<f64>> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross2(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= eps
        {
            upper.pop();
        }
        upper.push(p.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    let hull = lower;
    if hull.len() < 3 {
        bail!(Geometry, "degenerate polygon: all points collinear");
    }
    let n = hull.len();
    let mut hs = Vec::with_capacity(n);
    for i in 0..n {
        let a = &hull[i];
        let b = &hull[(i + 1) % n];
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len = dx.hypot(dy);
        let normal = vec![dy / len, -dx / len];
        let offset = dot(&normal, a).max(dot(&normal, b));
        hs.push(HalfSpace { normal, offset });
    }
    Ok((hull, hs))
}

type P3 = [f64; 3];

fn sub3(a: P3, b: P3) -> P3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
fn cross3(a: P3, b: P3) -> P3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
fn dot3(a: P3, b: P3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
fn norm3(a: P3) -> f64 {
    dot3(a, a).sqrt()
}

struct Face {
    v: [usize; 3],
    normal: P3,
    offset: f64,
    alive: bool,
}

fn make_face(p: &[P3], v: [usize; 3], interior: P3) -> Face {
    let n = cross3(sub3(p[v[1]], p[v[0]]), sub3(p[v[2]], p[v[0]]));
    let len = norm3(n);
    let mut normal = [n[0] / len, n[1] / len, n[2] / len];
    let mut v = v;
    if dot3(normal, sub3(interior, p[v[0]])) > 0.0 {
        normal = [-normal[0], -normal[1], -normal[2]];
        v.swap(1, 2);
    }
    let offset = dot3(normal, p[v[0]]);
    Face {
        v,
        normal,
        offset,
        alive: true,
    }
}

/// Incremental 3D hull. Coplanar triangles are merged into facets afterwards.
fn hull_3d(points: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<HalfSpace>)> {
    let scale = scale_of(points);
    let pts = dedup_points(points, 1e-14 * scale);
    let p: Vec<P3> = pts.iter().map(|q| [q[0], q[1], q[2]]).collect();
    let eps = HULL_EPS * scale;
    if p.len() < 4 {
        bail!(
            Geometry,
            "degenerate polyhedron: fewer than 4 distinct points"
        );
    }
    // Initial tetrahedron from extreme points.
    let i0 = 0;
    let i1 = (0..p.len())
        .max_by(|&a, &b| norm3(sub3(p[a], p[i0])).total_cmp(&norm3(sub3(p[b], p[i0]))))
        .unwrap();
    let dir = sub3(p[i1], p[i0]);
    let line_dist = |k: usize| norm3(cross3(dir, sub3(p[k], p[i0]))) / norm3(dir);
    let i2 = (0..p.len())
        .max_by(|&a, &b| line_dist(a).total_cmp(&line_dist(b)))
        .unwrap();
    if line_dist(i2) <= eps {
        bail!(Geometry, "degenerate polyhedron: all points collinear");
    }
    let pn = cross3(dir, sub3(p[i2], p[i0]));
    let pn = [pn[0] / norm3(pn), pn[1] / norm3(pn), pn[2] / norm3(pn)];
    let plane_dist = |k: usize| dot3(pn, sub3(p[k], p[i0])).abs();
    let i3 = (0..p.len())
        .max_by(|&a, &b| plane_dist(a).total_cmp(&plane_dist(b)))
        .unwrap();
    if plane_dist(i3) <= eps {
        bail!(Geometry, "degenerate polyhedron: all points coplanar");
    }
    let interior = {
        let s = [p[i0], p[i1], p[i2], p[i3]];
        [
            s.iter().map(|q| q[0]).sum::<f64>() / 4.0,
            s.iter().map(|q| q[1]).sum::<f64>() / 4.0,
            s.iter().map(|q| q[2]).sum::<f64>() / 4.0,
        ]
    };
    let mut faces = vec![
        make_face(&p, [i0, i1, i2], interior),
        make_face(&p, [i0, i1, i3], interior),
        make_face(&p, [i0, i2, i3], interior),
        make_face(&p, [i1, i2, i3], interior),
    ];
    for k in 0..p.len() {
        if [i0, i1, i2, i3].contains(&k) {
            continue;
        }
        let visible: Vec<usize> = (0..faces.len())
            .filter(|&f| faces[f].alive && dot3(faces[f].normal, p[k]) - faces[f].offset > eps)
            .collect();
        if visible.is_empty() {
            continue;
        }
        let mut edges = HashSet::new();
        for &f in &visible {
            let v = faces[f].v;
            edges.insert((v[0], v[1]));
            edges.insert((v[1], v[2]));
            edges.insert((v[2], v[0]));
        }
        let mut horizon: Vec<(usize, usize)> = edges
            .iter()
            .copied()
            .filter(|&(a, b)| !edges.contains(&(b, a)))
            .collect();
        horizon.sort_unstable();
        for &f in &visible {
            faces[f].alive = false;
        }
        for (a, b) in horizon {
            faces.push(make_face(&p, [a, b, k], interior));
        }
    }

    // Merge coplanar triangles into facets.
    let mut facets: Vec<HalfSpace> = Vec::new();
    for f in faces.iter().filter(|f| f.alive) {
        let dup = facets.iter().any(|h| {
            let d = dot3([h.normal[0], h.normal[1], h.normal[2]], f.normal);
            d > 1.0 - 1e-9 && (h.offset - f.offset).abs() <= 1e-9 * scale
        });
        if !dup {
            facets.push(HalfSpace {
                normal: f.normal.to_vec(),
                offset: f.offset,
            });
        }
    }
    // Tighten offsets so every candidate satisfies every facet.
    for h in facets.iter_mut() {
        h.offset = p
            .iter()
            .map(|q| dot(&h.normal, q))
            .fold(f64::NEG_INFINITY, f64::max);
    }
    let vertices = extreme_points(&pts, &facets, 3, 1e-9 * scale);
    Ok((vertices, facets))
}

/// Points active on facets whose normals span ℝᴺ.
fn extreme_points(pts: &[Vec<f64>], facets: &[HalfSpace], dim: usize, tol: f64) -> Vec<Vec<f64>> {
    pts.iter()
        .filter(|q| {
            let active: Vec<&HalfSpace> =
                facets.iter().filter(|h| h.slack(q).abs() <= tol).collect();
            spans(&active, dim)
        })
        .cloned()
        .collect()
}

fn spans(hs: &[&HalfSpace], dim: usize) -> bool {
    debug_assert_eq!(dim, 3);
    for i in 0..hs.len() {
        for j in i + 1..hs.len() {
            let c = cross3(
                [hs[i].normal[0], hs[i].normal[1], hs[i].normal[2]],
                [hs[j].normal[0], hs[j].normal[1], hs[j].normal[2]],
            );
            for k in j + 1..hs.len() {
                let d = dot3(c, [hs[k].normal[0], hs[k].normal[1], hs[k].normal[2]]);
                if d.abs() > 1e-9 {
                    return true;
                }
            }
        }
    }
    false
}

/// Fan triangulation of every facet towards the vertex centroid.
fn fan_volume_3d(vertices: &[Vec<f64>], facets: &[HalfSpace]) -> f64 {
    let n = vertices.len() as f64;
    let c: P3 = [
        vertices.iter().map(|v| v[0]).sum::<f64>() / n,
        vertices.iter().map(|v| v[1]).sum::<f64>() / n,
        vertices.iter().map(|v| v[2]).sum::<f64>() / n,
    ];
    let scale = scale_of(vertices);
    let mut vol = 0.0;
    for h in facets {
        let nrm: P3 = [h.normal[0], h.normal[1], h.normal[2]];
        let on: Vec<P3> = vertices
            .iter()
            .filter(|v| h.slack(v).abs() <= 1e-9 * scale)
            .map(|v| [v[0], v[1], v[2]])
            .collect();
        if on.len() < 3 {
            continue;
        }
        let m = on.len() as f64;
        let fc: P3 = [
            on.iter().map(|v| v[0]).sum::<f64>() / m,
            on.iter().map(|v| v[1]).sum::<f64>() / m,
            on.iter().map(|v| v[2]).sum::<f64>() / m,
        ];
        let e1 = sub3(on[0], fc);
        let u = {
            let l = norm3(e1);
            [e1[0] / l, e1[1] / l, e1[2] / l]
        };
        let w = cross3(nrm, u);
        let mut ring: Vec<(f64, P3)> = on
            .iter()
            .map(|&v| {
                let d = sub3(v, fc);
                (dot3(d, w).atan2(dot3(d, u)), v)
            })
            .collect();
        ring.sort_by(|a, b| a.0.total_cmp(&b.0));
        for i in 1..ring.len() - 1 {
            let a = ring[0].1;
            let b = ring[i].1;
            let cc = ring[i + 1].1;
            let t = dot3(cross3(sub3(b, a), sub3(cc, a)), sub3(c, a));
            vol += t.abs() / 6.0;
        }
    }
    vol
}

fn chebyshev_polytope(dim: usize, hs: &[HalfSpace]) -> (Vec<f64>, f64) {
    use nalgebra::{DMatrix, DVector};
    let m = hs.len();
    let k = dim + 1;
    let mut best = (vec![0.0; dim], f64::NEG_INFINITY);
    let mut subset: Vec<usize> = (0..k).collect();
    if m < k {
        return best;
    }
    loop {
        let a = DMatrix::from_fn(k, k, |i, j| {
            if j < dim {
                hs[subset[i]].normal[j]
            } else {
                1.0
            }
        });
        let b = DVector::from_fn(k, |i, _| hs[subset[i]].offset);
        if let Some(sol) = a.lu().solve(&b) {
            let x: Vec<f64> = sol.iter().take(dim).copied().collect();
            let rho = sol[dim];
            if rho > best.1 && rho.is_finite() {
                let tol = 1e-12 * (1.0 + rho.abs());
                if hs.iter().all(|h| h.slack(&x) >= rho - tol) {
                    best = (x, rho);
                }
            }
        }
        // Next combination in lexicographic order.
        let mut i = k;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if subset[i] != i + m - k {
                break;
            }
        }
        subset[i] += 1;
        for j in i + 1..k {
            subset[j] = subset[j - 1] + 1;
        }
    }
}

/// JSON form of a body: vertices for polytopes (half-spaces are derived on
/// load), center and radius for balls.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySpec {
    pub dim: usize,
    pub kind: BodyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

impl TryFrom<BodySpec> for ConvexBody {
    type Error = Error;

    fn try_from(s: BodySpec) -> Result<Self> {
        let body = match s.kind {
            BodyKind::Polytope => {
                let Some(v) = s.vertices else {
                    bail!(Geometry, "polytope body needs \"vertices\"");
                };
                if s.center.is_some() || s.radius.is_some() {
                    bail!(Geometry, "polytope body takes no \"center\"/\"radius\"");
                }
                ConvexBody::polytope(v)?
            }
            BodyKind::Ball => {
                let (Some(c), Some(r)) = (s.center, s.radius) else {
                    bail!(Geometry, "ball body needs \"center\" and \"radius\"");
                };
                if s.vertices.is_some() {
                    bail!(Geometry, "ball body takes no \"vertices\"");
                }
                ConvexBody::ball(c, r)?
            }
        };
        if body.dim != s.dim {
            bail!(
                Geometry,
                "\"dim\" is {} but the coordinates have dimension {}",
                s.dim,
                body.dim
            );
        }
        Ok(body)
    }
}

impl Serialize for ConvexBody {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.spec().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConvexBody {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = BodySpec::deserialize(d)?;
        ConvexBody::try_from(spec).map_err(serde::de::Error::custom)
    }
}
