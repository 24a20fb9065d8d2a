//! The subdivision bijection `Ψₙ : D^{n+1} → D^n × Ĩ`.
//!
//! A point of `D^{n+1}` is written `q_n(q_{n-1}(v, λ(s)), λ(t))` with
//! `v ∈ D^{n-1}`; `(s, t)` are recovered from the canonical section through
//! `λ⁻¹`. The piecewise map `φ` sends the three strips `V_i = J_i × [0,1]` onto
//! the regions `W_i` of the cylinder, and the wrinkle `ρ` replaces `s` by
//! `ξ(s)` so that the seams at `s = 1/3, 2/3` become smooth.

use serde::{Deserialize, Serialize};

use crate::diskmodel::{self, DiskPoint};
use crate::error::{Error, Result};
use crate::smoothfn::{lambda_fn, lambda_inv, xi, xi_inv};

const THIRD: f64 = 1.0 / 3.0;
const TWO_THIRDS: f64 = 2.0 / 3.0;

/// Slack allowed when a closed-form inverse lands slightly outside `[0, 1]`.
pub const INVERSION_SLACK: f64 = 1e-9;

/// A point of `D^n × Ĩ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylPoint {
    pub disk: DiskPoint,
    pub time: f64,
}

impl CylPoint {
    pub fn new(disk: DiskPoint, time: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&time) {
            return Err(Error::domain(format!("time {time} is outside [0,1]")));
        }
        Ok(Self { disk, time })
    }

    pub fn dim(&self) -> usize {
        self.disk.dim()
    }

    /// Max-abs distance over disk coordinates and time.
    pub fn distance(&self, other: &CylPoint) -> f64 {
        self.disk.distance(&other.disk).max((self.time - other.time).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Source strips `V_i`, classified by `s ∈ J_i`.
    Source,
    /// Target regions `W_i`, classified by the pre-λ cylinder coordinates.
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionTag {
    pub value: u8,
    pub side: Side,
}

/// All region tags of `(s, t)`; points within `tol` of a boundary carry both neighbours.
pub fn region_tags(s: f64, t: f64, side: Side, tol: f64) -> Vec<RegionTag> {
    let (lo, hi) = match side {
        Side::Source => (THIRD, TWO_THIRDS),
        Side::Target => (t / 3.0, 1.0 - t / 3.0),
    };
    let mut tags = Vec::with_capacity(2);
    if s <= lo + tol {
        tags.push(1);
    }
    if s >= lo - tol && s <= hi + tol {
        tags.push(2);
    }
    if s >= hi - tol {
        tags.push(3);
    }
    tags.into_iter().map(|value| RegionTag { value, side }).collect()
}

/// Region tags with exact comparisons.
pub fn region_classify(s: f64, t: f64, side: Side) -> Vec<RegionTag> {
    region_tags(s, t, side, 0.0)
}

/// The pre-λ coordinates `(s', t')` of `φ(s, t)`.
pub fn phi_params(s: f64, t: f64) -> (f64, f64) {
    if s <= THIRD {
        phi_branch(1, s, t)
    } else if s <= TWO_THIRDS {
        phi_branch(2, s, t)
    } else {
        phi_branch(3, s, t)
    }
}

/// One branch of `φ`, evaluated regardless of which strip `s` lies in.
pub fn phi_branch(branch: u8, s: f64, t: f64) -> (f64, f64) {
    match branch {
        1 => (s * t, 1.0 - 3.0 * s * (1.0 - t)),
        2 => ((3.0 - 2.0 * t) * s + t - 1.0, t),
        _ => (1.0 - (1.0 - s) * t, 1.0 - 3.0 * (1.0 - s) * (1.0 - t)),
    }
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} = {x} is outside [0,1]")))
    }
}

/// `φ` on the source point `q_n(q_{n-1}(v, λ(s)), λ(t))`.
pub fn phi_map(s: f64, t: f64, v: &DiskPoint) -> Result<CylPoint> {
    check_unit("s", s)?;
    check_unit("t", t)?;
    let (a, b) = phi_params(s, t);
    CylPoint::new(diskmodel::q(v, lambda_fn(a))?, lambda_fn(b))
}

/// Decomposition of a point of `D^{n+1}` as `q_n(q_{n-1}(v, λ(s)), λ(t))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceCoords {
    pub v: DiskPoint,
    pub s: f64,
    pub t: f64,
}

/// Recovers `(v, s, t)` from `w ∈ D^{n+1}` via the canonical section (`n >= 1`).
pub fn source_coords(w: &DiskPoint) -> Result<SourceCoords> {
    let m = w.dim();
    if m < 2 {
        return Err(Error::domain(format!("source coordinates need D^(n+1) with n >= 1, got D^{m}")));
    }
    let tau = diskmodel::section(w).into_vec();
    Ok(SourceCoords {
        v: diskmodel::q_cube_slice(&tau[..m - 2]),
        s: lambda_inv(tau[m - 2]),
        t: lambda_inv(tau[m - 1]),
    })
}

/// `q_n(q_{n-1}(v, λ(s)), λ(t))`.
pub fn source_point(v: &DiskPoint, s: f64, t: f64) -> Result<DiskPoint> {
    diskmodel::q(&diskmodel::q(v, lambda_fn(s))?, lambda_fn(t))
}

/// The wrinkle `ρ`: replaces `s` by `ξ(s)`.
pub fn rho(w: &DiskPoint) -> Result<DiskPoint> {
    let c = source_coords(w)?;
    source_point(&c.v, xi(c.s), c.t)
}

/// `Ψₙ`, optionally without the wrinkle (a debugging control; the result is then not smooth).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PsiMap {
    pub wrinkle: bool,
}

impl Default for PsiMap {
    fn default() -> Self {
        Self { wrinkle: true }
    }
}

impl PsiMap {
    pub fn without_wrinkle() -> Self {
        Self { wrinkle: false }
    }

    /// Evaluates `Ψₙ(w)` with `n = w.dim() - 1`. `Ψ₀` is the inverse of `q₀`.
    pub fn apply(&self, w: &DiskPoint) -> Result<CylPoint> {
        match w.dim() {
            0 => Err(Error::domain("psi is defined on D^(n+1), n >= 0")),
            1 => {
                let t = diskmodel::section(w).as_slice()[0];
                CylPoint::new(DiskPoint::origin(), t)
            }
            _ => {
                let c = source_coords(w)?;
                let s = if self.wrinkle { xi(c.s) } else { c.s };
                phi_map(s, c.t, &c.v)
            }
        }
    }

    /// Closed-form inverse of [`PsiMap::apply`].
    pub fn invert(&self, c: &CylPoint) -> Result<DiskPoint> {
        let n = c.dim();
        if !(0.0..=1.0).contains(&c.time) {
            return Err(Error::domain(format!("time {} is outside [0,1]", c.time)));
        }
        if n == 0 {
            return diskmodel::q(&DiskPoint::origin(), c.time);
        }
        let tau = diskmodel::section(&c.disk).into_vec();
        let v = diskmodel::q_cube_slice(&tau[..n - 1]);
        let a = lambda_inv(tau[n - 1]);
        let b = lambda_inv(c.time);
        let (s_tilde, t) = phi_inverse(a, b)?;
        let s = if self.wrinkle { xi_inv(s_tilde)? } else { s_tilde };
        source_point(&v, s, t)
    }
}

/// Inverse of `φ` in pre-λ coordinates: `(s', t') ↦ (s, t)`.
pub fn phi_inverse(a: f64, b: f64) -> Result<(f64, f64)> {
    let tags = region_classify(a, b, Side::Target);
    let branch = tags.first().map(|r| r.value).unwrap_or(2);
    let (s, t) = match branch {
        1 => {
            let s = (1.0 + 3.0 * a - b) / 3.0;
            (s, if s <= 0.0 { 0.0 } else { a / s })
        }
        2 => ((a + 1.0 - b) / (3.0 - 2.0 * b), b),
        _ => {
            let a1 = 1.0 - a;
            let u = (1.0 + 3.0 * a1 - b) / 3.0;
            (1.0 - u, if u <= 0.0 { 0.0 } else { a1 / u })
        }
    };
    for (name, x) in [("s", s), ("t", t)] {
        if !(-INVERSION_SLACK..=1.0 + INVERSION_SLACK).contains(&x) || !x.is_finite() {
            return Err(Error::Numerical(format!(
                "branch {branch} inverse gave {name} = {x} for (s', t') = ({a}, {b})"
            )));
        }
    }
    Ok((s.clamp(0.0, 1.0), t.clamp(0.0, 1.0)))
}

pub fn psi(w: &DiskPoint) -> Result<CylPoint> {
    PsiMap::default().apply(w)
}

pub fn psi_inv(c: &CylPoint) -> Result<DiskPoint> {
    PsiMap::default().invert(c)
}

/// Whether `c` lies on a collapsed fiber: the last two disk coordinates vanish,
/// so `q_{n-1}(v, ·)` is constant and every time value shares one preimage.
/// `Ψₙ` is not surjective onto these segments; they are reported, not inverted.
pub fn collapsed_fiber(c: &CylPoint) -> bool {
    let d = c.disk.coords();
    c.dim() >= 2 && d[d.len() - 2].hypot(d[d.len() - 1]) <= diskmodel::POLE_EPS
}

/// Membership in `L^n = S̃^{n-1} × Ĩ ∪ D^n × {0}`.
pub fn in_l(c: &CylPoint, tol: f64) -> bool {
    c.time <= tol || c.disk.height().abs() <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disk_pt(c: &[f64]) -> DiskPoint {
        DiskPoint::new(c.to_vec()).unwrap()
    }

    #[test]
    fn branches_agree_at_seams() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let t: f64 = rng.gen();
            let (a1, b1) = phi_branch(1, THIRD, t);
            let (a2, b2) = phi_branch(2, THIRD, t);
            assert!((a1 - a2).abs() < 1e-12 && (b1 - b2).abs() < 1e-12);
            assert!((a1 - t / 3.0).abs() < 1e-12 && (b1 - t).abs() < 1e-12);
            let (a2, b2) = phi_branch(2, TWO_THIRDS, t);
            let (a3, b3) = phi_branch(3, TWO_THIRDS, t);
            assert!((a3 - a2).abs() < 1e-12 && (b3 - b2).abs() < 1e-12);
            assert!((a3 - (1.0 - t / 3.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn phi_midpoint_example() {
        let v = disk_pt(&[0.6, 0.8]);
        let c = phi_map(0.5, 1.0, &v).unwrap();
        assert_eq!(phi_params(0.5, 1.0), (0.5, 1.0));
        assert_eq!(c.time, 1.0);
        assert!(c.disk.distance(&diskmodel::q(&v, 0.5).unwrap()) < 1e-15);
        assert!(phi_map(1.5, 0.0, &v).is_err());
    }

    #[test]
    fn region_examples() {
        let tags = |s, t, side| region_classify(s, t, side).iter().map(|r| r.value).collect::<Vec<_>>();
        assert_eq!(tags(0.1, 0.0, Side::Source), vec![1]);
        assert_eq!(tags(0.5, 0.9, Side::Target), vec![2]);
        assert_eq!(tags(0.2, 0.9, Side::Target), vec![1]);
        assert_eq!(tags(THIRD, 0.0, Side::Source), vec![1, 2]);
        assert_eq!(tags(0.9, 0.6, Side::Target), vec![3]);
    }

    #[test]
    fn rho_examples() {
        let v = disk_pt(&[0.0, 1.0]);
        for s in [0.1, 0.5, 0.9] {
            let w = source_point(&v, s, 0.4).unwrap();
            assert!(rho(&w).unwrap().distance(&w) < 1e-10, "s = {s}");
        }
        let w = source_point(&v, 0.25, 0.4).unwrap();
        let once = rho(&w).unwrap();
        assert!(once.distance(&w) > 1e-6);
        assert!(rho(&once).unwrap().distance(&once) > 1e-6);
        assert!((source_coords(&once).unwrap().s - xi(0.25)).abs() < 1e-10);
    }

    #[test]
    fn psi_zero_inverts_q0() {
        for t in [0.0, 0.25, 0.5, 0.9] {
            let w = disk_pt(&[(std::f64::consts::PI * t).cos(), (std::f64::consts::PI * t).sin()]);
            let c = psi(&w).unwrap();
            assert_eq!(c.dim(), 0);
            assert!((c.time - t).abs() < 1e-12);
            assert!(psi_inv(&c).unwrap().distance(&w) < 1e-12);
        }
    }

    #[test]
    fn psi_boundary_examples() {
        let v = disk_pt(&[0.6, 0.8]);
        let w = source_point(&v, 0.5, 0.0).unwrap();
        let c = psi(&w).unwrap();
        assert_eq!(c.time, 0.0);
        assert!(c.disk.distance(&diskmodel::q(&v, 0.5).unwrap()) < 1e-10);

        let w = source_point(&v, 0.1, 0.0).unwrap();
        let c = psi(&w).unwrap();
        assert!((c.time - lambda_fn(0.7)).abs() < 1e-10);
        assert!(c.disk.distance(&diskmodel::q(&v, 0.0).unwrap()) < 1e-10);
        assert!(in_l(&c, 1e-8));

        let c = CylPoint::new(diskmodel::q(&v, 0.5).unwrap(), 0.0).unwrap();
        let w = psi_inv(&c).unwrap();
        let sc = source_coords(&w).unwrap();
        assert!((sc.s - 0.5).abs() < 1e-8 && sc.t == 0.0);
    }

    #[test]
    fn psi_after_psi_inv_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 1..=3 {
            for _ in 0..500 {
                let d = diskmodel::sample_disk(n, &mut rng);
                let c = CylPoint::new(d, rng.gen()).unwrap();
                if collapsed_fiber(&c) {
                    continue;
                }
                let back = psi(&psi_inv(&c).unwrap()).unwrap();
                assert!(back.distance(&c) < 1e-8, "n = {n}: {c:?} -> {back:?}");
            }
        }
    }

    #[test]
    fn region_preservation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..2000 {
            let (s, t): (f64, f64) = (rng.gen(), rng.gen());
            let (a, b) = phi_params(s, t);
            let source = region_classify(s, t, Side::Source);
            let target: Vec<u8> = region_tags(a, b, Side::Target, 1e-9).iter().map(|r| r.value).collect();
            assert!(source.iter().any(|r| target.contains(&r.value)), "({s}, {t})");
        }
    }

    #[test]
    fn in_l_examples() {
        let p = CylPoint::new(disk_pt(&[0.6, 0.8]), 0.0).unwrap();
        assert!(in_l(&p, 1e-8));
        let p = CylPoint::new(disk_pt(&[1.0, 0.0]), 0.7).unwrap();
        assert!(in_l(&p, 1e-8));
        let h = 0.5f64;
        let p = CylPoint::new(disk_pt(&[(1.0 - h * h).sqrt(), h]), 0.5).unwrap();
        assert!(!in_l(&p, 1e-8));
    }

    #[test]
    fn branch_inverse_degenerate_corner() {
        assert_eq!(phi_inverse(0.0, 1.0).unwrap(), (0.0, 0.0));
        assert_eq!(phi_inverse(1.0, 1.0).unwrap(), (1.0, 0.0));
    }
}
