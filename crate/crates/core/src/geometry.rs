//! Weighted point geometries, axis-aligned bounding boxes and synthetic
//! surface generators.
//!
//! Every point carries a positive weight that stands in for the surface
//! measure of the patch it represents. Kernel entries are scaled by these
//! weights, so the assembled matrices behave like Galerkin matrices of the
//! same surface.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs;
use std::ops::{Add, Mul, Sub};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Self) -> Self {
        Self::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Self {
        self * (1.0 / self.norm())
    }

    pub fn distance(self, other: Self) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn min(self, other: Self) -> Self {
        Self::new(
            self.x.min(other.x),
            self.y.min(other.y),
            self.z.min(other.z),
        )
    }

    pub fn max(self, other: Self) -> Self {
        Self::new(
            self.x.max(other.x),
            self.y.max(other.y),
            self.z.max(other.z),
        )
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl Add for Point3 {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Point3 {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Self::new(self.x * rhs, self.y * rhs, self.z * rhs)
    }
}

/// Axis-aligned bounding box, `lo <= hi` componentwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub lo: Point3,
    pub hi: Point3,
}

impl Aabb {
    pub fn new(lo: Point3, hi: Point3) -> Result<Self> {
        if !(lo.x <= hi.x && lo.y <= hi.y && lo.z <= hi.z) {
            return Err(invalid(format!("bounding box lo {lo:?} exceeds hi {hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    pub fn point(p: Point3) -> Self {
        Self { lo: p, hi: p }
    }

    /// Euclidean length of the diagonal.
    pub fn diam(&self) -> f64 {
        (self.hi - self.lo).norm()
    }

    /// Euclidean distance between the boxes; zero iff they intersect.
    pub fn dist(&self, other: &Aabb) -> f64 {
        let gap =
            |lo_a: f64, hi_a: f64, lo_b: f64, hi_b: f64| (lo_b - hi_a).max(lo_a - hi_b).max(0.0);
        let dx = gap(self.lo.x, self.hi.x, other.lo.x, other.hi.x);
        let dy = gap(self.lo.y, self.hi.y, other.lo.y, other.hi.y);
        let dz = gap(self.lo.z, self.hi.z, other.lo.z, other.hi.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn contains(&self, p: Point3) -> bool {
        self.lo.x <= p.x
            && p.x <= self.hi.x
            && self.lo.y <= p.y
            && p.y <= self.hi.y
            && self.lo.z <= p.z
            && p.z <= self.hi.z
    }

    pub fn extent(&self) -> Point3 {
        self.hi - self.lo
    }

    fn grow(&mut self, p: Point3) {
        self.lo = self.lo.min(p);
        self.hi = self.hi.max(p);
    }
}

/// `diam` of a box, as a free function.
pub fn aabb_diam(b: &Aabb) -> f64 {
    b.diam()
}

/// `dist` between two boxes, as a free function.
pub fn aabb_dist(a: &Aabb, b: &Aabb) -> f64 {
    a.dist(b)
}

/// Ordered points with one positive weight each.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    points: Vec<Point3>,
    weights: Vec<f64>,
    pub label: String,
}

impl Geometry {
    pub fn new(points: Vec<Point3>, weights: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("geometry needs at least one point"));
        }
        if points.len() != weights.len() {
            return Err(invalid(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(invalid(format!("point {i} has a non-finite coordinate")));
        }
        if let Some(i) = weights.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(invalid(format!(
                "weight {i} is not a positive finite number"
            )));
        }
        Ok(Self {
            points,
            weights,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Bounding box of all points.
    pub fn bounding_box(&self) -> Aabb {
        let mut b = Aabb::point(self.points[0]);
        for &p in &self.points[1..] {
            b.grow(p);
        }
        b
    }

    pub fn mean_weight(&self) -> f64 {
        self.weights.iter().sum::<f64>() / self.len() as f64
    }

    /// Writes the `x y z w` text format read by [`load_points`].
    pub fn write_points(&self, path: impl AsRef<Path>) -> Result<()> {
        use std::fmt::Write as _;
        let mut out = String::with_capacity(self.len() * 80);
        let _ = writeln!(out, "# {} ({} points)", self.label, self.len());
        for (p, w) in self.points.iter().zip(&self.weights) {
            let _ = writeln!(out, "{:e} {:e} {:e} {:e}", p.x, p.y, p.z, w);
        }
        fs::write(path, out)?;
        Ok(())
    }

    /// Largest nearest-neighbour distance over all points, the point-cloud
    /// analogue of the largest mesh edge length. Zero for a single point.
    pub fn max_nearest_neighbor_spacing(&self) -> f64 {
        let n = self.len();
        if n < 2 {
            return 0.0;
        }
        let bb = self.bounding_box();
        let ext = bb.extent();
        let vol_side = (ext.x.max(ext.y).max(ext.z)).max(f64::MIN_POSITIVE);
        // about one point per cell for surface-like clouds
        let cell = (vol_side / (n as f64).sqrt()).max(vol_side * 1e-9);
        let key = |p: Point3| -> (i64, i64, i64) {
            (
                ((p.x - bb.lo.x) / cell).floor() as i64,
                ((p.y - bb.lo.y) / cell).floor() as i64,
                ((p.z - bb.lo.z) / cell).floor() as i64,
            )
        };
        let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, &p) in self.points.iter().enumerate() {
            grid.entry(key(p)).or_default().push(i);
        }
        let mut worst: f64 = 0.0;
        for (i, &p) in self.points.iter().enumerate() {
            let (cx, cy, cz) = key(p);
            let mut best = f64::INFINITY;
            let mut radius = 1i64;
            loop {
                for dx in -radius..=radius {
                    for dy in -radius..=radius {
                        for dz in -radius..=radius {
                            if dx.abs().max(dy.abs()).max(dz.abs()) != radius && radius > 1 {
                                continue;
                            }
                            if let Some(ids) = grid.get(&(cx + dx, cy + dy, cz + dz)) {
                                for &j in ids {
                                    if j != i {
                                        best = best.min(p.distance(self.points[j]));
                                    }
                                }
                            }
                        }
                    }
                }
                // everything within `radius * cell` has been scanned
                if best <= radius as f64 * cell {
                    break;
                }
                radius += 1;
            }
            worst = worst.max(best);
        }
        worst
    }
}

/// Component-wise bounding box of the selected points.
pub fn bbox(geometry: &Geometry, indices: &[usize]) -> Result<Aabb> {
    let (&first, rest) = indices
        .split_first()
        .ok_or_else(|| invalid("bounding box of an empty index set"))?;
    let pts = geometry.points();
    let get = |i: usize| {
        pts.get(i)
            .copied()
            .ok_or_else(|| invalid(format!("index {i} out of range for {} points", pts.len())))
    };
    let mut b = Aabb::point(get(first)?);
    for &i in rest {
        b.grow(get(i)?);
    }
    Ok(b)
}

pub(crate) fn bbox_of_points(points: &[Point3]) -> Aabb {
    let mut b = Aabb::point(points[0]);
    for &p in &points[1..] {
        b.grow(p);
    }
    b
}

fn seeded_rotation(seed: u64) -> [[f64; 3]; 3] {
    // uniform random unit quaternion (Shoemake)
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (w, x, y, z) = (
        a * (2.0 * PI * u2).sin(),
        a * (2.0 * PI * u2).cos(),
        b * (2.0 * PI * u3).sin(),
        b * (2.0 * PI * u3).cos(),
    );
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

/// `n` points on a sphere: a Fibonacci lattice rotated by a seed-dependent
/// random rotation. Every point gets the weight `4 pi radius^2 / n`.
pub fn generate_sphere(n: usize, radius: f64, seed: u64) -> Result<Geometry> {
    if n == 0 {
        return Err(invalid("sphere needs n >= 1"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid(format!(
            "sphere radius must be positive, got {radius}"
        )));
    }
    let rot = seeded_rotation(seed);
    let golden_angle = PI * (3.0 - 5f64.sqrt());
    let points = (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden_angle * i as f64;
            let p = [rho * phi.cos(), rho * phi.sin(), z];
            let r = |row: [f64; 3]| row[0] * p[0] + row[1] * p[1] + row[2] * p[2];
            // renormalise so rounding in the rotation never moves points off the sphere
            Point3::new(r(rot[0]), r(rot[1]), r(rot[2])).normalized() * radius
        })
        .collect();
    let w = 4.0 * PI * radius * radius / n as f64;
    Geometry::new(
        points,
        vec![w; n],
        format!("sphere(n={n},r={radius},seed={seed})"),
    )
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Center curve of a `(p, q)` torus knot wound on a torus with major radius
/// `major` and winding radius `major / 2`.
#[derive(Clone, Copy, Debug)]
pub struct TorusKnotCurve {
    pub p: u32,
    pub q: u32,
    pub major: f64,
}

impl TorusKnotCurve {
    pub fn at(&self, t: f64) -> Point3 {
        let (p, q, rho) = (self.p as f64, self.q as f64, 0.5 * self.major);
        let s = self.major + rho * (q * t).cos();
        Point3::new(s * (p * t).cos(), s * (p * t).sin(), rho * (q * t).sin())
    }

    pub fn tangent(&self, t: f64) -> Point3 {
        let (p, q, rho) = (self.p as f64, self.q as f64, 0.5 * self.major);
        let s = self.major + rho * (q * t).cos();
        let ds = -rho * q * (q * t).sin();
        Point3::new(
            ds * (p * t).cos() - s * p * (p * t).sin(),
            ds * (p * t).sin() + s * p * (p * t).cos(),
            rho * q * (q * t).cos(),
        )
    }

    pub fn length(&self, samples: usize) -> f64 {
        let h = 2.0 * PI / samples as f64;
        (0..samples)
            .map(|k| self.tangent((k as f64 + 0.5) * h).norm() * h)
            .sum()
    }
}

/// `n` points on a tube of radius `tube` around a `(p, q)` torus knot.
///
/// The knot lives on a torus of major radius `major` and winding radius
/// `major / 2`; `(2, 3)` gives a trefoil. Points follow a golden-ratio
/// lattice in (curve parameter, tube angle), so no two coincide. Weights are
/// the tube area `2 pi tube * length` split evenly.
pub fn generate_torus_knot(n: usize, p: u32, q: u32, major: f64, tube: f64) -> Result<Geometry> {
    if n == 0 {
        return Err(invalid("torus knot needs n >= 1"));
    }
    if p == 0 || q == 0 || gcd(p, q) != 1 {
        return Err(invalid(format!(
            "torus knot needs coprime p, q >= 1, got ({p}, {q})"
        )));
    }
    if !(tube > 0.0 && major > tube && major.is_finite()) {
        return Err(invalid(format!(
            "torus knot needs major > tube > 0, got major={major}, tube={tube}"
        )));
    }
    let curve = TorusKnotCurve { p, q, major };
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let ez = Point3::new(0.0, 0.0, 1.0);
    let points = (0..n)
        .map(|i| {
            let t = 2.0 * PI * (i as f64 + 0.5) / n as f64;
            let theta = 2.0 * PI * (i as f64 * golden).fract();
            let c = curve.at(t);
            let tan = curve.tangent(t).normalized();
            // the tangent always has a horizontal component, so this frame never degenerates
            let normal = (ez - tan * ez.dot(tan)).normalized();
            let binormal = tan.cross(normal);
            c + (normal * theta.cos() + binormal * theta.sin()) * tube
        })
        .collect();
    let area = 2.0 * PI * tube * curve.length(4096.max(4 * n));
    Geometry::new(
        points,
        vec![area / n as f64; n],
        format!("knot(n={n},p={p},q={q},R={major},r={tube})"),
    )
}

/// Reads whitespace-separated `x y z w` rows; blank lines and lines starting
/// with `#` are skipped.
pub fn load_points(path: impl AsRef<Path>) -> Result<Geometry> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: line_no,
                msg: format!("expected 4 fields `x y z w`, found {}", fields.len()),
            });
        }
        let mut vals = [0.0; 4];
        for (v, f) in vals.iter_mut().zip(&fields) {
            *v = f.parse::<f64>().map_err(|e| Error::Parse {
                path: path.to_owned(),
                line: line_no,
                msg: format!("`{f}`: {e}"),
            })?;
        }
        let p = Point3::new(vals[0], vals[1], vals[2]);
        if !p.is_finite() {
            return Err(Error::InvalidData {
                path: path.to_owned(),
                line: line_no,
                msg: "non-finite coordinate".into(),
            });
        }
        if !(vals[3] > 0.0 && vals[3].is_finite()) {
            return Err(Error::InvalidData {
                path: path.to_owned(),
                line: line_no,
                msg: format!("weight must be positive, got {}", vals[3]),
            });
        }
        points.push(p);
        weights.push(vals[3]);
    }
    if points.is_empty() {
        return Err(Error::InvalidData {
            path: path.to_owned(),
            line: 0,
            msg: "no points".into(),
        });
    }
    let label = path.display().to_string();
    Geometry::new(points, weights, label)
}
