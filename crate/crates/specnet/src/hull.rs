//! Convex hulls in the complex plane and their uniform-density moments.
//!
//! The identification stage treats a cloud of eigenvalue estimates as a
//! region: the convex hull carries exact polygon formulas for area, centroid
//! and second moment of area, and degenerate clouds (collinear or single
//! point) fall back to segment and point moments so callers never divide by
//! a vanishing area.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Fraction of the squared span below which a polygon counts as collinear.
const DEGENERATE_AREA_TOL: f64 = 1e-12;

/// Convex hull of a point cloud with its uniform-density moments.
///
/// `vertices` are in counterclockwise order for a proper polygon; a
/// degenerate hull keeps the two extreme points (or the single point).
/// `second_moment` is the area-averaged z^2, i.e. E[x^2 - y^2] + 2i E[xy].
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct HullRegion {
    pub vertices: Vec<Complex64>,
    pub area: f64,
    pub centroid: Complex64,
    pub second_moment: Complex64,
    pub degenerate: bool,
}

/// Appends the complex conjugate of every point, mirroring the cloud across
/// the real axis.
pub fn mirror_conjugates(points: &[Complex64]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(points.len() * 2);
    out.extend_from_slice(points);
    out.extend(points.iter().map(|z| z.conj()));
    out
}

fn cross(o: Complex64, a: Complex64, b: Complex64) -> f64 {
    (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re)
}

/// Andrew's monotone chain; returns the hull counterclockwise with strictly
/// convex corners (collinear points dropped).
fn convex_hull(points: &[Complex64]) -> Vec<Complex64> {
    let mut pts: Vec<Complex64> = points.to_vec();
    pts.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).expect("finite points"));
    pts.dedup_by(|a, b| a.re == b.re && a.im == b.im);
    if pts.len() <= 2 {
        return pts;
    }
    let mut lower: Vec<Complex64> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Complex64> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn dist_to_segment(z: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (z - a).norm();
    }
    let t = ((z - a).re * ab.re + (z - a).im * ab.im) / len2;
    let t = t.clamp(0.0, 1.0);
    (z - (a + ab * t)).norm()
}

impl HullRegion {
    /// Builds the hull of a nonempty finite point cloud.
    pub fn from_points(points: &[Complex64]) -> Result<HullRegion> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("hull of an empty point set".into()));
        }
        if points.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite point in hull input".into()));
        }
        let hull = convex_hull(points);
        let span = {
            let mut s = 0.0_f64;
            for i in 0..hull.len() {
                for j in (i + 1)..hull.len() {
                    s = s.max((hull[i] - hull[j]).norm());
                }
            }
            s
        };
        let area = if hull.len() >= 3 { polygon_area(&hull) } else { 0.0 };
        if hull.len() >= 3 && area > DEGENERATE_AREA_TOL * span * span {
            let (centroid, second_moment) = polygon_moments(&hull, area);
            return Ok(HullRegion {
                vertices: hull,
                area,
                centroid,
                second_moment,
                degenerate: false,
            });
        }
        // Collinear or pointlike: keep the farthest pair as a segment.
        let mut ends = (hull[0], hull[0]);
        let mut best = 0.0_f64;
        for i in 0..hull.len() {
            for j in (i + 1)..hull.len() {
                let d = (hull[i] - hull[j]).norm();
                if d > best {
                    best = d;
                    ends = (hull[i], hull[j]);
                }
            }
        }
        let (a, b) = ends;
        let centroid = (a + b) * 0.5;
        // Uniform on the segment: E[z^2] = (a^2 + ab + b^2)/3.
        let second_moment = (a * a + a * b + b * b) / 3.0;
        let vertices = if best > 0.0 { vec![a, b] } else { vec![a] };
        Ok(HullRegion {
            vertices,
            area: 0.0,
            centroid,
            second_moment,
            degenerate: true,
        })
    }

    pub fn min_re(&self) -> f64 {
        self.vertices.iter().map(|v| v.re).fold(f64::INFINITY, f64::min)
    }

    pub fn max_re(&self) -> f64 {
        self.vertices.iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Euclidean distance from `z` to the hull (zero inside).
    pub fn distance(&self, z: Complex64) -> f64 {
        match self.vertices.len() {
            0 => f64::INFINITY,
            1 => (z - self.vertices[0]).norm(),
            2 => dist_to_segment(z, self.vertices[0], self.vertices[1]),
            n => {
                let scale = self
                    .vertices
                    .iter()
                    .map(|v| v.norm())
                    .fold(1.0_f64, f64::max);
                let mut inside = true;
                let mut best = f64::INFINITY;
                for i in 0..n {
                    let a = self.vertices[i];
                    let b = self.vertices[(i + 1) % n];
                    if cross(a, b, z) < -1e-12 * scale * scale {
                        inside = false;
                    }
                    best = best.min(dist_to_segment(z, a, b));
                }
                if inside {
                    0.0
                } else {
                    best
                }
            }
        }
    }

    /// Whether `z` lies in the hull dilated by `epsilon`.
    pub fn contains_dilated(&self, z: Complex64, epsilon: f64) -> bool {
        self.distance(z) <= epsilon
    }
}

fn polygon_area(v: &[Complex64]) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = v[i];
        let b = v[(i + 1) % n];
        acc += a.re * b.im - b.re * a.im;
    }
    acc / 2.0
}

/// Green's theorem moments of a counterclockwise simple polygon with known
/// positive area: centroid and area-averaged z^2.
fn polygon_moments(v: &[Complex64], area: f64) -> (Complex64, Complex64) {
    let n = v.len();
    let mut cx = 0.0;
    let mut cy = 0.0;
    let mut ixx = 0.0;
    let mut iyy = 0.0;
    let mut ixy = 0.0;
    for i in 0..n {
        let a = v[i];
        let b = v[(i + 1) % n];
        let w = a.re * b.im - b.re * a.im;
        cx += (a.re + b.re) * w;
        cy += (a.im + b.im) * w;
        ixx += (a.re * a.re + a.re * b.re + b.re * b.re) * w;
        iyy += (a.im * a.im + a.im * b.im + b.im * b.im) * w;
        ixy += (a.re * b.im + 2.0 * a.re * a.im + 2.0 * b.re * b.im + b.re * a.im) * w;
    }
    let centroid = Complex64::new(cx / (6.0 * area), cy / (6.0 * area));
    let ex2 = ixx / (12.0 * area);
    let ey2 = iyy / (12.0 * area);
    let exy = ixy / (24.0 * area);
    (centroid, Complex64::new(ex2 - ey2, 2.0 * exy))
}
