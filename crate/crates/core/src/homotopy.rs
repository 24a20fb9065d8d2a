//! Homotopies, concatenation, and the disk-model group operations.
//!
//! Homotopies carry their time parameterization. [`concat`] glues two
//! homotopies with `λ(3t)` on `[0, 1/2]` and `λ(3t-2)` on `[1/2, 1]`, so the
//! result is stationary near the seam and smooth for `Ĩ`-homotopies.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffeology::{Point, Predicate};
use crate::diskmodel::{self, CubeCoords, DiskPoint, SpherePoint};
use crate::error::{Error, Result};
use crate::lifting::{CellComplex, ComplexPoint, DiskMap};
use crate::smoothfn::{lambda_fn, lambda_inv};

/// How the time variable of a homotopy is parameterized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamKind {
    /// Time ranges over `R` and is read on `[0, 1]`.
    R,
    /// The subspace interval.
    I,
    /// The quotient interval `Ĩ`.
    #[serde(rename = "I_tilde")]
    ITilde,
}

/// Spaces whose points can be compared numerically.
pub trait Distance {
    fn distance_to(&self, other: &Self) -> f64;
}

impl Distance for Point {
    fn distance_to(&self, other: &Self) -> f64 {
        self.distance(other)
    }
}

impl Distance for DiskPoint {
    fn distance_to(&self, other: &Self) -> f64 {
        self.distance(other)
    }
}

impl Distance for f64 {
    fn distance_to(&self, other: &Self) -> f64 {
        (self - other).abs()
    }
}

impl Distance for ComplexPoint {
    fn distance_to(&self, other: &Self) -> f64 {
        self.distance(other)
    }
}

type EvalFn<X, Y> = Arc<dyn Fn(&X, f64) -> Result<Y> + Send + Sync>;

/// A homotopy `X × T → Y`.
pub struct Homotopy<X, Y> {
    pub kind: ParamKind,
    eval: EvalFn<X, Y>,
}

impl<X, Y> Clone for Homotopy<X, Y> {
    fn clone(&self) -> Self {
        Self {
            kind: self.kind,
            eval: self.eval.clone(),
        }
    }
}

impl<X, Y> fmt::Debug for Homotopy<X, Y> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Homotopy").field("kind", &self.kind).finish()
    }
}

impl<X: 'static, Y: 'static> Homotopy<X, Y> {
    pub fn new(kind: ParamKind, eval: impl Fn(&X, f64) -> Result<Y> + Send + Sync + 'static) -> Self {
        Self {
            kind,
            eval: Arc::new(eval),
        }
    }

    /// The homotopy that ignores time.
    pub fn stationary(kind: ParamKind, f: impl Fn(&X) -> Result<Y> + Send + Sync + 'static) -> Self {
        Self::new(kind, move |x, _t| f(x))
    }

    /// Evaluates at `(x, t)`; `t` must lie in `[0, 1]`.
    pub fn eval(&self, x: &X, t: f64) -> Result<Y> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::domain(format!("homotopy time {t} outside [0, 1]")));
        }
        (self.eval)(x, t)
    }
}

/// Reparameterizes by `λ`, so the result is stationary near both ends.
///
/// `Ĩ`-homotopies are returned unchanged.
pub fn to_tilde<X: 'static, Y: 'static>(f: &Homotopy<X, Y>) -> Homotopy<X, Y> {
    match f.kind {
        ParamKind::ITilde => f.clone(),
        ParamKind::R | ParamKind::I => {
            let g = f.clone();
            Homotopy::new(ParamKind::ITilde, move |x, t| g.eval(x, lambda_fn(t)))
        }
    }
}

/// `F` then `G`, checked on `samples`: `F(x,1)` must match `G(x,0)` within `tol`.
pub fn concat<X, Y>(f: &Homotopy<X, Y>, g: &Homotopy<X, Y>, samples: &[X], tol: f64) -> Result<Homotopy<X, Y>>
where
    X: fmt::Debug + 'static,
    Y: Distance + 'static,
{
    for x in samples {
        let d = f.eval(x, 1.0)?.distance_to(&g.eval(x, 0.0)?);
        if d > tol {
            return Err(Error::precondition(
                "F(x,1) = G(x,0)",
                format!("x = {x:?}, deviation {d:e}"),
            ));
        }
    }
    let (f, g) = (f.clone(), g.clone());
    Ok(Homotopy::new(ParamKind::ITilde, move |x, t| {
        if t <= 0.5 {
            f.eval(x, lambda_fn(3.0 * t))
        } else {
            g.eval(x, lambda_fn(3.0 * t - 2.0))
        }
    }))
}

/// A representative of a class in `πₙ(X, A, x₀)`: a map `D^n → X` sending
/// `S̃^{n-1}` into `A` and the lower hemisphere `D₋^{n-1}` to `x₀`.
#[derive(Clone)]
pub struct PairMapRep {
    pub dim: usize,
    pub eval: DiskMap,
    pub basepoint: Point,
    /// Membership in `A`.
    pub in_subspace: Predicate,
    pub tolerance: f64,
}

impl fmt::Debug for PairMapRep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PairMapRep")
            .field("dim", &self.dim)
            .field("basepoint", &self.basepoint)
            .finish()
    }
}

/// Number of sphere samples used by the boundary checks.
pub const BOUNDARY_SAMPLES: usize = 64;

fn lower_hemisphere(v: &SpherePoint) -> bool {
    *v.coords().last().expect("spheres here have dimension >= 0") <= 0.0
}

fn sphere_probes(n: usize, seed: u64) -> Result<Vec<SpherePoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probes: Vec<SpherePoint> = (0..BOUNDARY_SAMPLES).map(|_| diskmodel::sample_sphere(n, &mut rng)).collect();
    let mut e = vec![0.0; n];
    e[0] = 1.0;
    probes.push(SpherePoint::new(e.clone())?);
    e[0] = -1.0;
    probes.push(SpherePoint::new(e)?);
    Ok(probes)
}

impl PairMapRep {
    /// A basepointed map of pairs into `(X, {x₀})`.
    pub fn absolute(dim: usize, eval: DiskMap, basepoint: Point, tolerance: f64) -> Self {
        let x0 = basepoint.clone();
        Self {
            dim,
            eval,
            basepoint,
            in_subspace: Arc::new(move |y: &Point| y.distance(&x0) <= tolerance),
            tolerance,
        }
    }

    pub fn call(&self, w: &DiskPoint) -> Result<Point> {
        if w.dim() != self.dim {
            return Err(Error::domain(format!("expected a point of D^{}, got D^{}", self.dim, w.dim())));
        }
        (self.eval)(w)
    }

    /// Samples the boundary conditions; returns the worst basepoint deviation.
    pub fn check_boundary(&self, seed: u64) -> Result<f64> {
        if self.dim == 0 {
            return Ok(0.0);
        }
        let mut worst = 0.0_f64;
        for v in sphere_probes(self.dim, seed)? {
            let y = self.call(&diskmodel::include_j(&v))?;
            if !(self.in_subspace)(&y) {
                return Err(Error::precondition(
                    "boundary lands in A",
                    format!("v = {:?} maps to {y}", v.coords()),
                ));
            }
            if lower_hemisphere(&v) {
                let d = y.distance(&self.basepoint);
                if d > self.tolerance {
                    return Err(Error::precondition(
                        "lower hemisphere lands on the basepoint",
                        format!("v = {:?}, deviation {d:e}", v.coords()),
                    ));
                }
                worst = worst.max(d);
            }
        }
        Ok(worst)
    }
}

/// `φ ⋆ ψ` evaluated in cube coordinates: `φ(Qₙ(λ(3t₁), t₂, …))` for
/// `t₁ ≤ 1/2`, `ψ(Qₙ(λ(3t₁-2), t₂, …))` otherwise.
pub fn star_on_cube(phi: &PairMapRep, psi: &PairMapRep, t: &CubeCoords) -> Result<Point> {
    let mut u = t.as_slice().to_vec();
    let (map, first) = if u[0] <= 0.5 {
        (phi, lambda_fn(3.0 * u[0]))
    } else {
        (psi, lambda_fn(3.0 * u[0] - 2.0))
    };
    u[0] = first;
    map.call(&diskmodel::q_cube(&CubeCoords::new(u)?))
}

/// The group operation on representatives, read through the section of `Qₙ`.
pub fn star(phi: &PairMapRep, psi: &PairMapRep) -> Result<PairMapRep> {
    let n = phi.dim;
    if n == 0 || psi.dim != n {
        return Err(Error::domain(format!("star needs equal dimensions >= 1, got {} and {}", n, psi.dim)));
    }
    let tol = phi.tolerance.max(psi.tolerance);
    let d = phi.basepoint.distance(&psi.basepoint);
    if d > tol {
        return Err(Error::precondition(
            "matching basepoints",
            format!("{} vs {} (deviation {d:e})", phi.basepoint, psi.basepoint),
        ));
    }
    let a = star_on_cube(phi, psi, &CubeCoords::new(vec![0.5; n])?)?;
    let b = psi.call(&diskmodel::q_cube(&CubeCoords::new(vec![0.0; n])?))?;
    let d = a.distance(&b);
    if d > tol {
        return Err(Error::precondition(
            "phi and psi agree at the seam",
            format!("phi gives {a}, psi gives {b} (deviation {d:e})"),
        ));
    }
    let (f, g) = (phi.clone(), psi.clone());
    Ok(PairMapRep {
        dim: n,
        eval: Arc::new(move |w: &DiskPoint| star_on_cube(&f, &g, &diskmodel::section(w))),
        basepoint: phi.basepoint.clone(),
        in_subspace: phi.in_subspace.clone(),
        tolerance: tol,
    })
}

/// The boundary map `πₙ(X, A, x₀) → πₙ₋₁(A, x₀)`: `v ↦ φ(v, 0)`.
pub fn delta_restrict(phi: &PairMapRep, seed: u64) -> Result<PairMapRep> {
    let n = phi.dim;
    if n == 0 {
        return Err(Error::domain("delta_restrict needs n >= 1"));
    }
    let f = phi.clone();
    let eval: DiskMap = Arc::new(move |v: &DiskPoint| f.call(&diskmodel::include_k(v)));
    let rep = PairMapRep::absolute(n - 1, eval, phi.basepoint.clone(), phi.tolerance);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..BOUNDARY_SAMPLES {
        let v = diskmodel::sample_disk(n - 1, &mut rng);
        let y = rep.call(&v)?;
        if !(phi.in_subspace)(&y) {
            return Err(Error::precondition(
                "phi maps the equator into A",
                format!("v = {:?} maps to {y}", v.coords()),
            ));
        }
    }
    rep.check_boundary(seed)?;
    Ok(rep)
}

/// `φ₀ ∨ φ₁` pulled back to `D^n`: at `Qₙ(t, λ(u))` evaluates
/// `φ₀(Qₙ(t, λ(2u)))` for `u ≤ 1/2` and `φ₁(Qₙ(t, λ(2-2u)))` otherwise.
///
/// Both maps must be constant with a common value on `D₋^{n-1}`.
pub fn glue_double(phi0: &PairMapRep, phi1: &PairMapRep, seed: u64) -> Result<DiskMap> {
    let n = phi0.dim;
    if n == 0 || phi1.dim != n {
        return Err(Error::domain(format!(
            "glue_double needs equal dimensions >= 1, got {} and {}",
            n, phi1.dim
        )));
    }
    let tol = phi0.tolerance.max(phi1.tolerance);
    let mut value: Option<Point> = None;
    for v in sphere_probes(n, seed)?.into_iter().filter(lower_hemisphere) {
        for phi in [phi0, phi1] {
            let y = phi.call(&diskmodel::include_j(&v))?;
            match &value {
                None => value = Some(y),
                Some(e) => {
                    let d = e.distance(&y);
                    if d > tol {
                        return Err(Error::precondition(
                            "constant common value on the lower hemisphere",
                            format!("v = {:?}: {e} vs {y} (deviation {d:e})", v.coords()),
                        ));
                    }
                }
            }
        }
    }
    let (f0, f1) = (phi0.clone(), phi1.clone());
    Ok(Arc::new(move |w: &DiskPoint| {
        let mut t = diskmodel::section(w).into_vec();
        let u = lambda_inv(t[n - 1]);
        let map = if u <= 0.5 {
            t[n - 1] = lambda_fn(2.0 * u);
            &f0
        } else {
            t[n - 1] = lambda_fn(2.0 - 2.0 * u);
            &f1
        };
        map.call(&diskmodel::q_cube(&CubeCoords::new(t)?))
    }))
}

/// A node of the component graph: the base or a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Node {
    Base,
    Cell(usize),
}

/// One path component, named by the 0-cells it contains.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Component {
    /// Whether the component meets the base.
    pub base: bool,
    pub zero_cells: Vec<usize>,
}

/// Boundary samples per cell used to find attachment targets.
pub const COMPONENT_PROBES: usize = 4;

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut i = i;
        while self.0[i] != r {
            let next = self.0[i];
            self.0[i] = r;
            i = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn node_of(p: &ComplexPoint) -> Node {
    match p {
        ComplexPoint::Base(_) => Node::Base,
        ComplexPoint::Cell { index, .. } => Node::Cell(*index),
    }
}

fn components_from(complex: &CellComplex, mut same: impl FnMut(Node) -> Node) -> Vec<Component> {
    let mut groups: BTreeMap<Node, Component> = BTreeMap::new();
    if complex.base().is_some() {
        groups.entry(same(Node::Base)).or_insert_with(|| Component {
            base: false,
            zero_cells: Vec::new(),
        });
    }
    for (i, cell) in complex.cells().iter().enumerate() {
        if cell.dim == 0 {
            groups
                .entry(same(Node::Cell(i)))
                .or_insert_with(|| Component {
                    base: false,
                    zero_cells: Vec::new(),
                })
                .zero_cells
                .push(i);
        }
    }
    if complex.base().is_some() {
        if let Some(c) = groups.get_mut(&same(Node::Base)) {
            c.base = true;
        }
    }
    let mut out: Vec<Component> = groups.into_values().collect();
    out.sort();
    out
}

fn probes_for(dim: usize) -> Result<Vec<SpherePoint>> {
    if dim == 1 {
        return Ok(vec![SpherePoint::new(vec![-1.0])?, SpherePoint::new(vec![1.0])?]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(dim as u64);
    Ok((0..COMPONENT_PROBES).map(|_| diskmodel::sample_sphere(dim, &mut rng)).collect())
}

/// Path components of a cell complex, by union-find over cells.
///
/// The base counts as one node. A cell of positive dimension joins the
/// component of every locus its boundary probes land in; `S̃^{n-1}` is
/// connected for `n ≥ 2`, so a few probes suffice there.
pub fn path_components(complex: &CellComplex) -> Result<Vec<Component>> {
    let nodes = complex.len() + 1;
    let id = |n: Node| match n {
        Node::Base => complex.len(),
        Node::Cell(i) => i,
    };
    let mut uf = UnionFind((0..nodes).collect());
    for (i, cell) in complex.cells().iter().enumerate() {
        if cell.dim == 0 {
            continue;
        }
        for v in probes_for(cell.dim)? {
            let target = node_of(&complex.boundary_image(i, &v)?);
            uf.union(i, id(target));
        }
    }
    let root = |n: Node, uf: &mut UnionFind| {
        let r = uf.find(id(n));
        if r == complex.len() {
            Node::Base
        } else {
            Node::Cell(r)
        }
    };
    Ok(components_from(complex, |n| root(n, &mut uf)))
}

/// Reference implementation: dense boundary sampling and breadth-first search.
pub fn path_components_bruteforce(complex: &CellComplex, samples_per_cell: usize) -> Result<Vec<Component>> {
    let mut edges: BTreeMap<Node, Vec<Node>> = BTreeMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    for (i, cell) in complex.cells().iter().enumerate() {
        if cell.dim == 0 {
            continue;
        }
        let mut probes: Vec<SpherePoint> = (0..samples_per_cell)
            .map(|_| diskmodel::sample_sphere(cell.dim, &mut rng))
            .collect();
        probes.extend(probes_for(cell.dim)?);
        for v in probes {
            let target = node_of(&complex.boundary_image(i, &v)?);
            edges.entry(Node::Cell(i)).or_default().push(target);
            edges.entry(target).or_default().push(Node::Cell(i));
        }
    }
    let mut label: BTreeMap<Node, Node> = BTreeMap::new();
    let mut all: Vec<Node> = (0..complex.len()).map(Node::Cell).collect();
    if complex.base().is_some() {
        all.insert(0, Node::Base);
    }
    for &start in &all {
        if label.contains_key(&start) {
            continue;
        }
        let mut queue = VecDeque::from([start]);
        label.insert(start, start);
        while let Some(n) = queue.pop_front() {
            for &m in edges.get(&n).map(Vec::as_slice).unwrap_or(&[]) {
                if let std::collections::btree_map::Entry::Vacant(e) = label.entry(m) {
                    e.insert(start);
                    queue.push_back(m);
                }
            }
        }
    }
    Ok(components_from(complex, |n| label[&n]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifting::AttachFn;
    use proptest::prelude::*;
    use rand::Rng;

    fn scalar(kind: ParamKind, f: fn(f64) -> f64) -> Homotopy<(), f64> {
        Homotopy::new(kind, move |_x: &(), t| Ok(f(t)))
    }

    #[test]
    fn to_tilde_reparameterizes_by_lambda() {
        let f = scalar(ParamKind::R, |t| t);
        let g = to_tilde(&f);
        assert_eq!(g.kind, ParamKind::ITilde);
        assert_eq!(g.eval(&(), 0.5).unwrap(), lambda_fn(0.5));
        assert_eq!(g.eval(&(), 0.0).unwrap(), 0.0);
        assert_eq!(g.eval(&(), 1.0).unwrap(), 1.0);
        assert!((g.eval(&(), 0.3).unwrap() - lambda_fn(0.3)).abs() < 1e-15);
        let tilde = scalar(ParamKind::ITilde, |t| t * t);
        assert_eq!(to_tilde(&tilde).eval(&(), 0.3).unwrap(), 0.09);
    }

    #[test]
    fn concat_uses_both_halves() {
        let f = scalar(ParamKind::ITilde, |t| t);
        let g = scalar(ParamKind::ITilde, |t| 1.0 + t);
        let c = concat(&f, &g, &[()], 1e-12).unwrap();
        assert_eq!(c.eval(&(), 0.5).unwrap(), 1.0);
        assert!((c.eval(&(), 0.25).unwrap() - lambda_fn(0.75)).abs() < 1e-15);
        assert!((c.eval(&(), 0.75).unwrap() - 1.0 - lambda_fn(0.25)).abs() < 1e-15);
        assert_eq!(c.eval(&(), 0.0).unwrap(), 0.0);
        assert_eq!(c.eval(&(), 1.0).unwrap(), 2.0);
        // stationary on the middle third
        for t in [1.0 / 3.0, 0.4, 0.5, 0.6, 2.0 / 3.0] {
            assert_eq!(c.eval(&(), t).unwrap(), 1.0);
        }
    }

    #[test]
    fn concat_rejects_mismatched_ends() {
        let f = scalar(ParamKind::ITilde, |t| t);
        let g = scalar(ParamKind::ITilde, |t| 2.0 + t);
        match concat(&f, &g, &[()], 1e-9) {
            Err(Error::Precondition { witness, .. }) => assert!(witness.contains("deviation")),
            other => panic!("expected a precondition error, got {other:?}"),
        }
    }

    #[test]
    fn homotopy_time_is_checked() {
        let f = scalar(ParamKind::I, |t| t);
        assert!(matches!(f.eval(&(), 1.5), Err(Error::Domain(_))));
        assert!(matches!(f.eval(&(), -0.1), Err(Error::Domain(_))));
    }

    fn origin2() -> Point {
        Point::coords(vec![0.0, 0.0])
    }

    fn rep(dim: usize, f: fn(&[f64]) -> Vec<f64>) -> PairMapRep {
        PairMapRep::absolute(dim, Arc::new(move |w: &DiskPoint| Ok(Point::coords(f(w.coords())))), origin2(), 1e-9)
    }

    fn phi1() -> PairMapRep {
        rep(1, |w| vec![w[1], w[1] * w[0]])
    }

    fn psi1() -> PairMapRep {
        rep(1, |w| vec![w[1] * w[1], w[0].sin() * w[1]])
    }

    // A relative class of (R^2, x-axis, 0).
    fn relative2() -> PairMapRep {
        let relu = |x: f64| x.max(0.0);
        PairMapRep {
            dim: 2,
            eval: Arc::new(move |w: &DiskPoint| {
                let c = w.coords();
                Ok(Point::coords(vec![c[2] + relu(c[1]).powi(2), c[0] * c[2]]))
            }),
            basepoint: origin2(),
            in_subspace: Arc::new(|y: &Point| y.flatten()[1].abs() <= 1e-9),
            tolerance: 1e-9,
        }
    }

    #[test]
    fn star_in_cube_coordinates() {
        let (phi, psi) = (phi1(), psi1());
        let quarter = star_on_cube(&phi, &psi, &CubeCoords::new(vec![0.25]).unwrap()).unwrap();
        let expect = phi.call(&diskmodel::q_cube(&CubeCoords::new(vec![lambda_fn(0.75)]).unwrap())).unwrap();
        assert_eq!(quarter, expect);
        let s = star(&phi, &psi).unwrap();
        let w = diskmodel::q_cube(&CubeCoords::new(vec![0.8]).unwrap());
        let expect = psi.call(&diskmodel::q_cube(&CubeCoords::new(vec![lambda_fn(0.4)]).unwrap())).unwrap();
        assert!(s.call(&w).unwrap().distance(&expect) < 1e-12);
    }

    #[test]
    fn star_keeps_boundary_conditions() {
        assert!(star(&phi1(), &psi1()).unwrap().check_boundary(3).is_ok());
        let r = relative2();
        assert!(r.check_boundary(3).is_ok());
        assert!(star(&r, &r).unwrap().check_boundary(4).is_ok());
    }

    #[test]
    fn star_is_constant_on_pole_fibers() {
        let s = relative2();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            // t₁ ∈ {0, 1} forgets t₂; these are distinct cube preimages of one disk point
            let t1 = if rng.gen_bool(0.5) { 0.0 } else { 1.0 };
            let a = CubeCoords::new(vec![t1, rng.gen()]).unwrap();
            let b = CubeCoords::new(vec![t1, rng.gen()]).unwrap();
            assert!(diskmodel::q_cube(&a).distance(&diskmodel::q_cube(&b)) < 1e-12);
            let (ya, yb) = (star_on_cube(&s, &s, &a).unwrap(), star_on_cube(&s, &s, &b).unwrap());
            assert!(ya.distance(&yb) < 1e-9);
        }
    }

    #[test]
    fn star_checks_its_inputs() {
        assert!(matches!(star(&phi1(), &relative2()), Err(Error::Domain(_))));
        let mut moved = psi1();
        moved.basepoint = Point::coords(vec![1.0, 0.0]);
        assert!(matches!(star(&phi1(), &moved), Err(Error::Precondition { .. })));
        let loose = PairMapRep {
            in_subspace: Arc::new(|_| true),
            ..rep(1, |w| vec![w[0], 0.0])
        };
        assert!(matches!(star(&phi1(), &loose), Err(Error::Precondition { .. })));
    }

    #[test]
    fn delta_restricts_to_the_equator() {
        let d = delta_restrict(&phi1(), 1).unwrap();
        assert_eq!(d.dim, 0);
        let expect = phi1().call(&DiskPoint::new(vec![1.0, 0.0]).unwrap()).unwrap();
        assert_eq!(d.call(&DiskPoint::origin()).unwrap(), expect);
        let r = relative2();
        let d = delta_restrict(&r, 1).unwrap();
        let v = DiskPoint::new(vec![0.6, 0.8]).unwrap();
        assert_eq!(d.call(&v).unwrap(), r.call(&DiskPoint::new(vec![0.6, 0.8, 0.0]).unwrap()).unwrap());
        assert!(d.check_boundary(2).is_ok());
    }

    #[test]
    fn glue_double_halves() {
        let g = glue_double(&phi1(), &psi1(), 5).unwrap();
        let at = |u: f64| diskmodel::q_cube(&CubeCoords::new(vec![u]).unwrap());
        let top = DiskPoint::new(vec![0.0, 1.0]).unwrap();
        assert!(g(&at(lambda_fn(0.25))).unwrap().distance(&phi1().call(&top).unwrap()) < 1e-12);
        assert!(g(&at(lambda_fn(0.75))).unwrap().distance(&psi1().call(&top).unwrap()) < 1e-12);
        let r = relative2();
        let g = glue_double(&r, &r, 5).unwrap();
        let w = diskmodel::q_cube(&CubeCoords::new(vec![0.3, lambda_fn(0.5)]).unwrap());
        assert!(g(&w).unwrap().distance(&origin2()) < 1e-9);
    }

    #[test]
    fn glue_double_needs_a_common_lower_value() {
        let mut moved = psi1();
        let inner = moved.eval.clone();
        moved.eval = Arc::new(move |w| {
            let y = inner(w)?.flatten();
            Ok(Point::coords(vec![y[0] + 1.0, y[1]]))
        });
        assert!(matches!(glue_double(&phi1(), &moved, 5), Err(Error::Precondition { .. })));
    }

    fn attach_to(p: ComplexPoint) -> Option<AttachFn> {
        Some(Arc::new(move |_| Ok(p.clone())))
    }

    #[test]
    fn components_of_small_complexes() {
        let two = CellComplex::new(None).attach_point().unwrap().attach_point().unwrap();
        assert_eq!(path_components(&two).unwrap().len(), 2);
        let edge: AttachFn = Arc::new(|v| {
            let i = if v.coords()[0] < 0.0 { 0 } else { 1 };
            Ok(ComplexPoint::cell(i, DiskPoint::origin()))
        });
        let joined = two.attach(1, Some(edge)).unwrap();
        let comps = path_components(&joined).unwrap();
        assert_eq!(comps, vec![Component { base: false, zero_cells: vec![0, 1] }]);
        let based = CellComplex::new(Some(crate::diffeology::DiffSpace::point()))
            .attach_point()
            .unwrap()
            .attach(1, attach_to(ComplexPoint::Base(Point::coords(Vec::new()))))
            .unwrap();
        let comps = path_components(&based).unwrap();
        assert_eq!(comps.len(), 2);
        assert!(comps.iter().any(|c| c.base && c.zero_cells.is_empty()));
    }

    /// Random complexes whose cells attach to existing points, including
    /// interior points of earlier 1-cells.
    fn random_complex(seed: u64, cells: usize) -> CellComplex {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let with_base = rng.gen_bool(0.5);
        let mut cx = CellComplex::new(with_base.then(crate::diffeology::DiffSpace::point));
        let mut existing: Vec<ComplexPoint> = Vec::new();
        if with_base {
            existing.push(ComplexPoint::Base(Point::coords(Vec::new())));
        }
        for _ in 0..cells {
            let roll = rng.gen_range(0..10);
            if existing.is_empty() || roll < 4 {
                cx = cx.attach_point().unwrap();
                existing.push(ComplexPoint::cell(cx.len() - 1, DiskPoint::origin()));
            } else if roll < 8 {
                let a = existing[rng.gen_range(0..existing.len())].clone();
                let b = existing[rng.gen_range(0..existing.len())].clone();
                cx = cx
                    .attach(1, Some(Arc::new(move |v| Ok(if v.coords()[0] < 0.0 { a.clone() } else { b.clone() }))))
                    .unwrap();
                let angle: f64 = rng.gen_range(0.1..3.0);
                existing.push(ComplexPoint::cell(cx.len() - 1, DiskPoint::new(vec![angle.cos(), angle.sin()]).unwrap()));
            } else {
                let a = existing[rng.gen_range(0..existing.len())].clone();
                cx = cx.attach(2, attach_to(a)).unwrap();
            }
        }
        cx
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn components_match_the_bruteforce_oracle(seed in any::<u64>(), cells in 0usize..=20) {
            let cx = random_complex(seed, cells);
            prop_assert_eq!(path_components(&cx).unwrap(), path_components_bruteforce(&cx, 32).unwrap());
        }

        #[test]
        fn concat_is_stationary_at_the_seam(a in -5.0f64..5.0, b in -5.0f64..5.0, t in 1.0f64/3.0..=2.0/3.0) {
            let f = Homotopy::new(ParamKind::ITilde, move |_x: &(), s| Ok(a * (1.0 - s) + s));
            let g = Homotopy::new(ParamKind::ITilde, move |_x: &(), s| Ok(1.0 + b * s));
            let c = concat(&f, &g, &[()], 1e-12).unwrap();
            prop_assert_eq!(c.eval(&(), t).unwrap(), 1.0);
        }
    }
}
