//! Hemisphere model of disks and spheres.
//!
//! `D^n` is the closed upper hemisphere of the unit sphere in `R^{n+1}`. It is
//! the image of the cube `[0,1]^n` under the iterated quotient map
//! `Q_n = q_{n-1} ∘ (q_{n-2} × 1) ∘ ... ∘ (q_0 × 1^{n-1})`, which in
//! coordinates is the usual hyperspherical parameterization with angles `π t_i`.
//! Its equator is the sphere `S̃^{n-1}`, the lower hemisphere is `D₋^n`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::smoothfn::lambda_fn;

/// Membership tolerance for norms and hemisphere sign conditions.
pub const POINT_TOLERANCE: f64 = 1e-9;

/// Tail radius below which [`section`] treats the remaining angles as a pole fiber.
pub const POLE_EPS: f64 = f64::MIN_POSITIVE;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// A point of `D^n`, stored as its `n + 1` ambient coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PointRepr", into = "PointRepr")]
pub struct DiskPoint {
    coords: Vec<f64>,
}

/// A point of a unit sphere `S^{n}` (either hemisphere), `n + 1` coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PointRepr", into = "PointRepr")]
pub struct SpherePoint {
    coords: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PointRepr {
    dim: usize,
    coords: Vec<f64>,
}

impl TryFrom<PointRepr> for DiskPoint {
    type Error = Error;

    fn try_from(r: PointRepr) -> Result<Self> {
        if r.coords.len() != r.dim + 1 {
            return Err(Error::domain("dim does not match coordinate count"));
        }
        DiskPoint::new(r.coords)
    }
}

impl From<DiskPoint> for PointRepr {
    fn from(p: DiskPoint) -> Self {
        PointRepr {
            dim: p.dim(),
            coords: p.coords,
        }
    }
}

impl TryFrom<PointRepr> for SpherePoint {
    type Error = Error;

    fn try_from(r: PointRepr) -> Result<Self> {
        if r.coords.len() != r.dim + 1 {
            return Err(Error::domain("dim does not match coordinate count"));
        }
        SpherePoint::new(r.coords)
    }
}

impl From<SpherePoint> for PointRepr {
    fn from(p: SpherePoint) -> Self {
        PointRepr {
            dim: p.dim(),
            coords: p.coords,
        }
    }
}

fn check_unit(coords: &[f64]) -> Result<()> {
    if coords.is_empty() {
        return Err(Error::domain("a sphere point needs at least one coordinate"));
    }
    if coords.iter().any(|c| !c.is_finite()) {
        return Err(Error::domain(format!("non-finite coordinates {coords:?}")));
    }
    let r = norm(coords);
    if (r - 1.0).abs() >= POINT_TOLERANCE {
        return Err(Error::domain(format!("|v| = {r} is not 1 for {coords:?}")));
    }
    Ok(())
}

impl DiskPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        check_unit(&coords)?;
        let last = *coords.last().unwrap();
        if last < -POINT_TOLERANCE {
            return Err(Error::domain(format!(
                "last coordinate {last} is below the upper hemisphere"
            )));
        }
        Ok(Self { coords })
    }

    /// The single point of `D^0`.
    pub fn origin() -> Self {
        Self { coords: vec![1.0] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    /// Last coordinate; zero exactly on the boundary sphere.
    pub fn height(&self) -> f64 {
        *self.coords.last().unwrap()
    }

    pub fn as_sphere(&self) -> SpherePoint {
        SpherePoint {
            coords: self.coords.clone(),
        }
    }

    /// Max-norm distance between ambient coordinates of equal-dimension points.
    pub fn distance(&self, other: &DiskPoint) -> f64 {
        max_abs_diff(&self.coords, &other.coords)
    }
}

impl SpherePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        check_unit(&coords)?;
        Ok(Self { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Upper-hemisphere view, if the last coordinate is non-negative.
    pub fn to_disk(&self) -> Result<DiskPoint> {
        DiskPoint::new(self.coords.clone())
    }

    pub fn distance(&self, other: &SpherePoint) -> f64 {
        max_abs_diff(&self.coords, &other.coords)
    }
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Cube coordinates in `[0,1]^n`, the source of `Q_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeCoords(Vec<f64>);

impl CubeCoords {
    pub fn new(t: Vec<f64>) -> Result<Self> {
        if let Some(bad) = t.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::domain(format!("cube coordinate {bad} outside [0,1]")));
        }
        Ok(Self(t))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// `q_n(v, t) = (v_1, ..., v_n, v_{n+1} cos πt, v_{n+1} sin πt)`, mapping `D^n × Ĩ` onto `D^{n+1}`.
pub fn q(v: &DiskPoint, t: f64) -> Result<DiskPoint> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!("q expects t in [0,1], got {t}")));
    }
    Ok(q_unchecked(v.coords(), t))
}

fn q_unchecked(v: &[f64], t: f64) -> DiskPoint {
    let (head, last) = v.split_at(v.len() - 1);
    let r = last[0];
    let mut coords = Vec::with_capacity(v.len() + 1);
    coords.extend_from_slice(head);
    coords.push(r * (PI * t).cos());
    coords.push(r * (PI * t).sin());
    DiskPoint { coords }
}

/// `Q_n : [0,1]^n → D^n`; the empty cube maps to the point of `D^0`.
pub fn q_cube(t: &CubeCoords) -> DiskPoint {
    q_cube_slice(t.as_slice())
}

pub(crate) fn q_cube_slice(t: &[f64]) -> DiskPoint {
    t.iter()
        .fold(DiskPoint::origin(), |acc, &ti| q_unchecked(acc.coords(), ti))
}

/// The generating plot `Q_n ∘ λ^n : R^n → D^n`.
pub fn gen_plot(x: &[f64]) -> DiskPoint {
    let t: Vec<f64> = x.iter().map(|&xi| lambda_fn(xi)).collect();
    q_cube_slice(&t)
}

/// Canonical right inverse of `Q_n`.
///
/// Angles are recovered from tail norms with `atan2`, so each `t_i` lies in
/// `[0,1]`. Once the remaining tail radius drops to [`POLE_EPS`], the point
/// sits on a pole fiber and all remaining coordinates are set to 0.
pub fn section(w: &DiskPoint) -> CubeCoords {
    let c = w.coords();
    let n = w.dim();
    let mut t = vec![0.0; n];
    // tails[i] = |(c_i, ..., c_n)|
    let mut tails = vec![0.0f64; n + 2];
    for i in (0..=n).rev() {
        tails[i] = tails[i + 1].hypot(c[i]);
    }
    for i in 0..n {
        if tails[i] <= POLE_EPS {
            break;
        }
        let y = if i + 1 == n {
            // upper hemisphere: the final angle uses the signed last coordinate
            if c[n] > 0.0 {
                c[n]
            } else {
                0.0
            }
        } else {
            tails[i + 1]
        };
        t[i] = (y.atan2(c[i]) / PI).clamp(0.0, 1.0);
    }
    CubeCoords(t)
}

/// Boundary inclusion `j_n : S̃^{n-1} → D^n`, `v ↦ (v, 0)`.
pub fn include_j(v: &SpherePoint) -> DiskPoint {
    let mut coords = v.coords().to_vec();
    coords.push(0.0);
    DiskPoint { coords }
}

/// Hemisphere inclusion `k_n : D^n → D^{n+1}`, `w ↦ (w, 0)`.
pub fn include_k(w: &DiskPoint) -> DiskPoint {
    let mut coords = w.coords().to_vec();
    coords.push(0.0);
    DiskPoint { coords }
}

/// Reflection `D^n ≅ D₋^n` negating the last coordinate.
pub fn reflect(w: &SpherePoint) -> SpherePoint {
    let mut coords = w.coords().to_vec();
    let last = coords.last_mut().unwrap();
    *last = -*last;
    SpherePoint { coords }
}

/// Retraction `D^{n+1} → D^n` induced by dropping the last cube coordinate.
pub fn retract(w: &DiskPoint) -> Result<DiskPoint> {
    if w.dim() == 0 {
        return Err(Error::domain("retract needs a disk of dimension at least 1"));
    }
    let t = section(w);
    let n = w.dim() - 1;
    Ok(q_cube_slice(&t.as_slice()[..n]))
}

/// Deformation from the identity (`s = 0`) to `include_k ∘ retract` (`s = 1`).
///
/// The last cube coordinate is scaled by `1 - λ(s)`, so the homotopy is
/// stationary near both ends.
pub fn retract_homotopy(w: &DiskPoint, s: f64) -> Result<DiskPoint> {
    if w.dim() == 0 {
        return Err(Error::domain("retract needs a disk of dimension at least 1"));
    }
    let l = lambda_fn(s);
    if l == 0.0 {
        return Ok(w.clone());
    }
    let mut t = section(w).into_vec();
    let last = t.last_mut().unwrap();
    *last *= 1.0 - l;
    Ok(q_cube_slice(&t))
}

/// Uniform sample of the generating plot over the unit cube of parameters.
pub fn sample_disk<R: rand::Rng>(n: usize, rng: &mut R) -> DiskPoint {
    let x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    gen_plot(&x)
}

/// Uniform-angle sample of the sphere `S̃^{n-1} ⊂ R^n` (for `n >= 1`).
pub fn sample_sphere<R: rand::Rng>(n: usize, rng: &mut R) -> SpherePoint {
    assert!(n >= 1, "S̃^-1 is empty");
    if n == 1 {
        let c = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        return SpherePoint { coords: vec![c] };
    }
    // upper or lower hemisphere of S^{n-1}
    let w = sample_disk(n - 1, rng);
    let p = w.as_sphere();
    if rng.gen::<bool>() {
        p
    } else {
        reflect(&p)
    }
}
