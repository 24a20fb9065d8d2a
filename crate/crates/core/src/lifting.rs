//! Finite relative cell complexes and the cell-by-cell lifting algorithms.
//!
//! A [`CellComplex`] is a base space `A` followed by cells attached along
//! maps `S̃^{n-1} → (complex so far)`. Fibrations are given by a `k_n`-lift
//! oracle ([`KLift`]); [`chep`] builds the covering homotopy one cell at a
//! time by pulling each lifting problem back along `Ψₙ`, and [`extend_lift`]
//! does the same for `j_n`-lift oracles.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffeology::{DiffSpace, Point, PointFn};
use crate::diskmodel::{self, DiskPoint, SpherePoint};
use crate::error::{Error, Result};
use crate::homotopy::Homotopy;
use crate::smoothfn::lambda_fn;
use crate::subdivision::{CylPoint, PsiMap};

/// Height below which a cell point is treated as lying on the attaching sphere.
pub const CANON_TOL: f64 = 1e-12;

/// Tolerance of the `L^n` membership test inside [`chep`].
pub const L_TOL: f64 = 1e-8;

pub type DiskMap = Arc<dyn Fn(&DiskPoint) -> Result<Point> + Send + Sync>;
pub type SphereMap = Arc<dyn Fn(&SpherePoint) -> Result<Point> + Send + Sync>;
pub type ComplexMap = Arc<dyn Fn(&ComplexPoint) -> Result<Point> + Send + Sync>;
pub type AttachFn = Arc<dyn Fn(&SpherePoint) -> Result<ComplexPoint> + Send + Sync>;

/// A point of a cell complex: a base point or a point of a closed cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComplexPoint {
    Base(Point),
    Cell { index: usize, point: DiskPoint },
}

impl ComplexPoint {
    pub fn cell(index: usize, point: DiskPoint) -> Self {
        ComplexPoint::Cell { index, point }
    }

    /// Max-abs distance of points in the same locus, infinite otherwise.
    pub fn distance(&self, other: &ComplexPoint) -> f64 {
        match (self, other) {
            (ComplexPoint::Base(a), ComplexPoint::Base(b)) => a.distance(b),
            (ComplexPoint::Cell { index: i, point: p }, ComplexPoint::Cell { index: j, point: q }) if i == j => {
                p.distance(q)
            }
            _ => f64::INFINITY,
        }
    }
}

impl fmt::Display for ComplexPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComplexPoint::Base(p) => write!(f, "base {p}"),
            ComplexPoint::Cell { index, point } => write!(f, "cell {index} at {:?}", point.coords()),
        }
    }
}

#[derive(Clone)]
pub struct Cell {
    pub dim: usize,
    attach: Option<AttachFn>,
}

impl Cell {
    pub fn attaching_map(&self) -> Option<&AttachFn> {
        self.attach.as_ref()
    }
}

impl fmt::Debug for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Cell").field("dim", &self.dim).finish()
    }
}

/// A finite relative cell complex.
#[derive(Clone, Debug)]
pub struct CellComplex {
    base: Option<DiffSpace>,
    cells: Vec<Cell>,
}

/// Projects a point of the closed disk with (near) zero height onto `S̃^{n-1}`.
fn sphere_of(point: &DiskPoint) -> Result<SpherePoint> {
    let c = point.coords();
    let head = &c[..c.len() - 1];
    let r = head.iter().map(|x| x * x).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(Error::domain("boundary projection of the disk pole"));
    }
    SpherePoint::new(head.iter().map(|x| x / r).collect())
}

impl CellComplex {
    /// A complex with base `A` (`None` for an absolute complex).
    pub fn new(base: Option<DiffSpace>) -> Self {
        Self {
            base,
            cells: Vec::new(),
        }
    }

    pub fn base(&self) -> Option<&DiffSpace> {
        self.base.as_ref()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Attaches an `n`-cell. `attaching` must be `None` exactly when `n = 0`.
    pub fn attach(&self, n: usize, attaching: Option<AttachFn>) -> Result<CellComplex> {
        match (n, &attaching) {
            (0, Some(_)) => return Err(Error::domain("a 0-cell has an empty attaching sphere")),
            (1.., None) => return Err(Error::domain(format!("a {n}-cell needs an attaching map"))),
            _ => {}
        }
        if let Some(f) = &attaching {
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            let mut probes: Vec<SpherePoint> = (0..16).map(|_| diskmodel::sample_sphere(n, &mut rng)).collect();
            if n == 1 {
                probes.push(SpherePoint::new(vec![-1.0])?);
                probes.push(SpherePoint::new(vec![1.0])?);
            }
            for v in probes {
                let y = f(&v).map_err(|e| Error::domain(format!("attaching map fails at {:?}: {e}", v.coords())))?;
                self.check_point(&y)?;
            }
        }
        let mut next = self.clone();
        next.cells.push(Cell { dim: n, attach: attaching });
        Ok(next)
    }

    /// Attaches a 0-cell.
    pub fn attach_point(&self) -> Result<CellComplex> {
        self.attach(0, None)
    }

    fn check_point(&self, p: &ComplexPoint) -> Result<()> {
        match p {
            ComplexPoint::Base(a) => match &self.base {
                Some(b) if b.contains(a) => Ok(()),
                Some(b) => Err(Error::domain(format!("{a} is not a point of {}", b.name()))),
                None => Err(Error::domain("the complex has no base")),
            },
            ComplexPoint::Cell { index, point } => match self.cells.get(*index) {
                Some(c) if c.dim == point.dim() => Ok(()),
                Some(c) => Err(Error::domain(format!(
                    "cell {index} has dimension {}, got a point of D^{}",
                    c.dim,
                    point.dim()
                ))),
                None => Err(Error::domain(format!("cell {index} does not exist yet"))),
            },
        }
    }

    /// Pushes boundary points down through attaching maps until they rest in
    /// an open cell or in the base.
    pub fn canonicalize(&self, p: &ComplexPoint) -> Result<ComplexPoint> {
        let mut p = p.clone();
        loop {
            self.check_point(&p)?;
            match &p {
                ComplexPoint::Cell { index, point } if self.cells[*index].dim >= 1 && point.height().abs() <= CANON_TOL => {
                    let v = sphere_of(point)?;
                    let attach = self.cells[*index].attach.as_ref().expect("positive-dimensional cells are attached");
                    p = attach(&v)?;
                }
                _ => return Ok(p),
            }
        }
    }

    /// Characteristic map `Φ_β : D^n → X` of cell `index`.
    pub fn characteristic(&self, index: usize, w: &DiskPoint) -> Result<ComplexPoint> {
        self.canonicalize(&ComplexPoint::cell(index, w.clone()))
    }

    /// Image of a boundary point of cell `index` under its attaching map, canonicalized.
    pub fn boundary_image(&self, index: usize, v: &SpherePoint) -> Result<ComplexPoint> {
        let cell = self
            .cells
            .get(index)
            .ok_or_else(|| Error::domain(format!("cell {index} does not exist")))?;
        let attach = cell
            .attach
            .as_ref()
            .ok_or_else(|| Error::domain("0-cells have no boundary"))?;
        self.canonicalize(&attach(v)?)
    }

    /// Distance of canonical representatives.
    pub fn distance(&self, a: &ComplexPoint, b: &ComplexPoint) -> Result<f64> {
        Ok(self.canonicalize(a)?.distance(&self.canonicalize(b)?))
    }

    /// Samples of the base, drawn from its generators on `[-2, 2]` windows.
    pub fn sample_base<R: Rng>(&self, count: usize, rng: &mut R) -> Vec<Point> {
        let Some(base) = &self.base else {
            return Vec::new();
        };
        let gens = base.generators();
        if gens.is_empty() {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(count);
        let mut attempts = 0;
        while out.len() < count && attempts < count * 20 {
            attempts += 1;
            let g = &gens[rng.gen_range(0..gens.len())];
            let w = g.domain.window(2.0);
            let u: Vec<f64> = (0..w.dim()).map(|i| rng.gen_range(w.lo[i]..w.hi[i])).collect();
            if let Ok(p) = g.call(&u) {
                out.push(p);
            }
        }
        out
    }

    /// A random point: a uniformly chosen locus, then a generating-plot sample of the disk.
    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> ComplexPoint {
        let loci = self.cells.len() + usize::from(self.base.is_some());
        let pick = rng.gen_range(0..loci.max(1));
        if pick < self.cells.len() {
            ComplexPoint::cell(pick, diskmodel::sample_disk(self.cells[pick].dim, rng))
        } else {
            match self.sample_base(1, rng).pop() {
                Some(p) => ComplexPoint::Base(p),
                None => ComplexPoint::Base(Point::coords(Vec::new())),
            }
        }
    }
}

/// `k_n`-lift oracle: given `top: D^n → E` and `bottom: D^{n+1} → B` with
/// `p∘top = bottom∘k_n`, returns `H: D^{n+1} → E` with `H∘k_n = top`, `p∘H = bottom`.
pub trait KLift: Send + Sync {
    fn lift_k(&self, n: usize, top: DiskMap, bottom: DiskMap) -> Result<DiskMap>;
}

/// `j_n`-lift oracle: given `top: S̃^{n-1} → E` and `bottom: D^n → B` with
/// `p∘top = bottom∘j_n`, returns `H: D^n → E` with `H∘j_n = top`, `p∘H = bottom`.
pub trait JLift: Send + Sync {
    fn lift_j(&self, n: usize, top: SphereMap, bottom: DiskMap) -> Result<DiskMap>;
}

/// A fibration presented by its projection and a `k_n`-lift oracle.
#[derive(Clone)]
pub struct Fibration {
    pub total: DiffSpace,
    pub base: DiffSpace,
    pub project: PointFn,
    pub oracle: Arc<dyn KLift>,
}

/// A map presented by its projection and a `j_n`-lift oracle.
#[derive(Clone)]
pub struct JFibration {
    pub total: DiffSpace,
    pub base: DiffSpace,
    pub project: PointFn,
    pub oracle: Arc<dyn JLift>,
}

fn first_factor(p: &Point) -> Result<Point> {
    p.as_pair()
        .map(|(a, _)| a.clone())
        .ok_or_else(|| Error::domain(format!("{p} is not a pair")))
}

fn second_factor(p: &Point) -> Result<Point> {
    p.as_pair()
        .map(|(_, b)| b.clone())
        .ok_or_else(|| Error::domain(format!("{p} is not a pair")))
}

struct ProductLift;

impl KLift for ProductLift {
    fn lift_k(&self, _n: usize, top: DiskMap, bottom: DiskMap) -> Result<DiskMap> {
        Ok(Arc::new(move |w: &DiskPoint| {
            let fiber = second_factor(&top(&diskmodel::retract(w)?)?)?;
            Ok(Point::pair(bottom(w)?, fiber))
        }))
    }
}

/// The trivial bundle `B × F → B`, lifting by `H(w) = (h(w), F-part of f(retract(w)))`.
pub fn product_fibration(base: &DiffSpace, fiber: &DiffSpace) -> Fibration {
    Fibration {
        total: DiffSpace::product(base, fiber),
        base: base.clone(),
        project: Arc::new(first_factor),
        oracle: Arc::new(ProductLift),
    }
}

struct RetractLift;

impl KLift for RetractLift {
    fn lift_k(&self, _n: usize, top: DiskMap, _bottom: DiskMap) -> Result<DiskMap> {
        Ok(Arc::new(move |w: &DiskPoint| top(&diskmodel::retract(w)?)))
    }
}

/// `Y → *`, lifting by `top ∘ retract`.
pub fn point_fibration(total: &DiffSpace) -> Fibration {
    Fibration {
        total: total.clone(),
        base: DiffSpace::point(),
        project: Arc::new(|_p: &Point| Ok(Point::coords(Vec::new()))),
        oracle: Arc::new(RetractLift),
    }
}

/// `j_n`-lifts for `B × R^m → B`: the fiber part of `top` is coned off to 0
/// with weight `1 - λ(2 w_{n+1})`.
pub struct TrivialBundleJLift {
    pub fiber_dim: usize,
}

impl JLift for TrivialBundleJLift {
    fn lift_j(&self, _n: usize, top: SphereMap, bottom: DiskMap) -> Result<DiskMap> {
        let m = self.fiber_dim;
        Ok(Arc::new(move |w: &DiskPoint| {
            let c = w.coords();
            let weight = 1.0 - lambda_fn(2.0 * w.height());
            let head = &c[..c.len() - 1];
            let r = head.iter().map(|x| x * x).sum::<f64>().sqrt();
            let fiber = if weight == 0.0 || r == 0.0 {
                vec![0.0; m]
            } else {
                let u = SpherePoint::new(head.iter().map(|x| x / r).collect())?;
                let f = second_factor(&top(&u)?)?.flatten();
                f.iter().map(|x| weight * x).collect()
            };
            Ok(Point::pair(bottom(w)?, Point::coords(fiber)))
        }))
    }
}

/// `B × R^m → B` with [`TrivialBundleJLift`].
pub fn trivial_bundle(base: &DiffSpace, fiber_dim: usize) -> JFibration {
    JFibration {
        total: DiffSpace::product(base, &DiffSpace::euclidean(fiber_dim)),
        base: base.clone(),
        project: Arc::new(first_factor),
        oracle: Arc::new(TrivialBundleJLift { fiber_dim }),
    }
}

/// Sampling knobs for the precondition and output checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiftConfig {
    pub samples: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LiftConfig {
    fn default() -> Self {
        Self {
            samples: 1000,
            tolerance: 1e-6,
            seed: 7,
        }
    }
}

type CellHomotopy = Arc<dyn Fn(&DiskPoint, f64) -> Result<Point> + Send + Sync>;

/// The homotopy assembled so far: `h` on the base and one lift per finished cell.
#[derive(Clone)]
struct Assembled {
    complex: CellComplex,
    h: Homotopy<Point, Point>,
    lifts: Vec<CellHomotopy>,
}

impl Assembled {
    fn eval(&self, x: &ComplexPoint, t: f64) -> Result<Point> {
        match self.complex.canonicalize(x)? {
            ComplexPoint::Base(a) => self.h.eval(&a, t),
            ComplexPoint::Cell { index, point } => {
                let lift = self
                    .lifts
                    .get(index)
                    .ok_or_else(|| Error::domain(format!("cell {index} is not lifted yet")))?;
                lift(&point, t)
            }
        }
    }
}

fn check_close(what: &str, a: &Point, b: &Point, tol: f64, at: impl FnOnce() -> String) -> Result<()> {
    let d = a.distance(b);
    if d <= tol {
        Ok(())
    } else {
        Err(Error::precondition(what, format!("{} (deviation {d:e})", at())))
    }
}

/// Covering homotopy extension.
///
/// Given `f: X → E`, a homotopy `h` on the base `A` and a homotopy `k` on `X`
/// with `k(x,0) = p(f(x))`, `f(a) = h(a,0)` and `p(h(a,t)) = k(a,t)`, returns
/// `H` on `X` with `H(x,0) = f(x)`, `H(a,t) = h(a,t)` and `p(H(x,t)) = k(x,t)`.
pub fn chep(
    p: &Fibration,
    complex: &CellComplex,
    f: ComplexMap,
    h: &Homotopy<Point, Point>,
    k: &Homotopy<ComplexPoint, Point>,
    cfg: &LiftConfig,
) -> Result<Homotopy<ComplexPoint, Point>> {
    check_chep_preconditions(p, complex, &f, h, k, cfg)?;
    let psi = PsiMap::default();
    let mut assembled = Assembled {
        complex: complex.clone(),
        h: h.clone(),
        lifts: Vec::with_capacity(complex.len()),
    };
    for (beta, cell) in complex.cells().iter().enumerate() {
        let n = cell.dim;
        let prev = assembled.clone();
        let (cx, f_top) = (complex.clone(), f.clone());
        let attach = cell.attach.clone();
        let top: DiskMap = Arc::new(move |w: &DiskPoint| {
            let c = psi.apply(&diskmodel::include_k(w))?;
            if c.time <= L_TOL {
                f_top(&cx.characteristic(beta, &c.disk)?)
            } else if c.disk.height().abs() <= L_TOL {
                let attach = attach
                    .as_ref()
                    .ok_or_else(|| Error::Numerical("0-cell slice left D^0 x {0}".into()))?;
                prev.eval(&attach(&sphere_of(&c.disk)?)?, c.time)
            } else {
                Err(Error::Numerical(format!(
                    "psi(k(w)) = ({:?}, {}) is not in L^{n}",
                    c.disk.coords(),
                    c.time
                )))
            }
        });
        let (cx, k_bottom) = (complex.clone(), k.clone());
        let bottom: DiskMap = Arc::new(move |w: &DiskPoint| {
            let c = psi.apply(w)?;
            k_bottom.eval(&cx.characteristic(beta, &c.disk)?, c.time)
        });
        let g = p
            .oracle
            .lift_k(n, top, bottom)
            .map_err(|e| Error::Oracle {
                cell: beta,
                source: Box::new(e),
            })?;
        let lift: CellHomotopy = Arc::new(move |d: &DiskPoint, t: f64| {
            let w = psi.invert(&CylPoint::new(d.clone(), t)?)?;
            g(&w).map_err(|e| Error::Oracle {
                cell: beta,
                source: Box::new(e),
            })
        });
        assembled.lifts.push(lift);
    }
    Ok(Homotopy::new(h.kind, move |x: &ComplexPoint, t: f64| assembled.eval(x, t)))
}

fn check_chep_preconditions(
    p: &Fibration,
    complex: &CellComplex,
    f: &ComplexMap,
    h: &Homotopy<Point, Point>,
    k: &Homotopy<ComplexPoint, Point>,
    cfg: &LiftConfig,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let tol = cfg.tolerance;
    for _ in 0..cfg.samples.min(200) {
        let x = complex.sample_point(&mut rng);
        let x = complex.canonicalize(&x)?;
        let px = (p.project)(&f(&x)?)?;
        check_close("k(x,0) = p(f(x))", &k.eval(&x, 0.0)?, &px, tol, || x.to_string())?;
    }
    for a in complex.sample_base(cfg.samples.min(50), &mut rng) {
        check_close("f(a) = h(a,0)", &f(&ComplexPoint::Base(a.clone()))?, &h.eval(&a, 0.0)?, tol, || {
            a.to_string()
        })?;
        for _ in 0..4 {
            let t: f64 = rng.gen();
            let pa = (p.project)(&h.eval(&a, t)?)?;
            check_close("p(h(a,t)) = k(a,t)", &pa, &k.eval(&ComplexPoint::Base(a.clone()), t)?, tol, || {
                format!("{a} at t = {t}")
            })?;
        }
    }
    Ok(())
}

/// Worst deviations of the three covering-homotopy equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChepReport {
    pub samples: usize,
    pub initial: f64,
    pub base: f64,
    pub projection: f64,
    pub tolerance: f64,
}

impl ChepReport {
    pub fn passed(&self) -> bool {
        self.initial <= self.tolerance && self.base <= self.tolerance && self.projection <= self.tolerance
    }
}

/// Grid check of `H(x,0) = f(x)`, `H(a,t) = h(a,t)`, `p(H(x,t)) = k(x,t)`.
///
/// Base samples include boundary points of cells that canonicalize into `A`.
pub fn verify_chep(
    p: &Fibration,
    complex: &CellComplex,
    f: &ComplexMap,
    h: &Homotopy<Point, Point>,
    k: &Homotopy<ComplexPoint, Point>,
    big_h: &Homotopy<ComplexPoint, Point>,
    cfg: &LiftConfig,
) -> Result<ChepReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37);
    let mut rep = ChepReport {
        samples: cfg.samples,
        initial: 0.0,
        base: 0.0,
        projection: 0.0,
        tolerance: cfg.tolerance,
    };
    let mut base_points = complex.sample_base(cfg.samples.min(100), &mut rng);
    for (i, cell) in complex.cells().iter().enumerate() {
        if cell.dim == 0 {
            continue;
        }
        for _ in 0..8 {
            let v = diskmodel::sample_sphere(cell.dim, &mut rng);
            if let ComplexPoint::Base(a) = complex.boundary_image(i, &v)? {
                base_points.push(a);
            }
        }
    }
    for i in 0..cfg.samples {
        let x = complex.sample_point(&mut rng);
        let t: f64 = rng.gen();
        rep.initial = rep.initial.max(big_h.eval(&x, 0.0)?.distance(&f(&x)?));
        let ph = (p.project)(&big_h.eval(&x, t)?)?;
        rep.projection = rep.projection.max(ph.distance(&k.eval(&x, t)?));
        if !base_points.is_empty() {
            let a = &base_points[i % base_points.len()];
            let d = big_h.eval(&ComplexPoint::Base(a.clone()), t)?.distance(&h.eval(a, t)?);
            rep.base = rep.base.max(d);
        }
    }
    Ok(rep)
}

/// Homotopy extension: [`chep`] for the fibration `Y → *`.
pub fn hep(
    complex: &CellComplex,
    target: &DiffSpace,
    f: ComplexMap,
    h: &Homotopy<Point, Point>,
    cfg: &LiftConfig,
) -> Result<Homotopy<ComplexPoint, Point>> {
    let p = point_fibration(target);
    let k = Homotopy::new(h.kind, |_x: &ComplexPoint, _t: f64| Ok(Point::coords(Vec::new())));
    chep(&p, complex, f, h, &k, cfg)
}

/// Lifts `bottom: X → B` through `g` extending `f: A → E`, one cell at a time.
pub fn extend_lift(
    g: &JFibration,
    complex: &CellComplex,
    f: PointFn,
    bottom: ComplexMap,
    cfg: &LiftConfig,
) -> Result<ComplexMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for a in complex.sample_base(cfg.samples.min(50), &mut rng) {
        let pa = (g.project)(&f(&a)?)?;
        check_close("p(f(a)) = bottom(a)", &pa, &bottom(&ComplexPoint::Base(a.clone()))?, cfg.tolerance, || {
            a.to_string()
        })?;
    }
    let mut lifts: Vec<DiskMap> = Vec::with_capacity(complex.len());
    for (beta, cell) in complex.cells().iter().enumerate() {
        let prev = assemble_lift(complex, &f, &lifts);
        let attach = cell.attach.clone();
        let top: SphereMap = Arc::new(move |v: &SpherePoint| {
            let attach = attach
                .as_ref()
                .ok_or_else(|| Error::domain("0-cells have an empty boundary"))?;
            prev(&attach(v)?)
        });
        let (cx, b) = (complex.clone(), bottom.clone());
        let cell_bottom: DiskMap = Arc::new(move |w: &DiskPoint| b(&cx.characteristic(beta, w)?));
        let lift = g
            .oracle
            .lift_j(cell.dim, top, cell_bottom)
            .map_err(|e| Error::Oracle {
                cell: beta,
                source: Box::new(e),
            })?;
        lifts.push(lift);
    }
    Ok(assemble_lift(complex, &f, &lifts))
}

fn assemble_lift(complex: &CellComplex, f: &PointFn, lifts: &[DiskMap]) -> ComplexMap {
    let (cx, f, lifts) = (complex.clone(), f.clone(), lifts.to_vec());
    Arc::new(move |x: &ComplexPoint| match cx.canonicalize(x)? {
        ComplexPoint::Base(a) => f(&a),
        ComplexPoint::Cell { index, point } => {
            let l = lifts
                .get(index)
                .ok_or_else(|| Error::domain(format!("cell {index} is not lifted yet")))?;
            l(&point)
        }
    })
}

/// Worst deviations of an extension lift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtendReport {
    pub samples: usize,
    /// `lift = f` on base points, including boundary points landing in `A`.
    pub restriction: f64,
    /// `p ∘ lift = bottom`.
    pub projection: f64,
    /// Each cell lift agrees with the earlier lift along its attaching map.
    pub attaching: f64,
    pub tolerance: f64,
}

impl ExtendReport {
    pub fn passed(&self) -> bool {
        self.restriction <= self.tolerance && self.projection <= self.tolerance && self.attaching <= self.tolerance
    }
}

pub fn verify_extend_lift(
    g: &JFibration,
    complex: &CellComplex,
    f: &PointFn,
    bottom: &ComplexMap,
    lift: &ComplexMap,
    cfg: &LiftConfig,
) -> Result<ExtendReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x51ed);
    let mut rep = ExtendReport {
        samples: cfg.samples,
        restriction: 0.0,
        projection: 0.0,
        attaching: 0.0,
        tolerance: cfg.tolerance,
    };
    for a in complex.sample_base(cfg.samples.min(100), &mut rng) {
        rep.restriction = rep.restriction.max(lift(&ComplexPoint::Base(a.clone()))?.distance(&f(&a)?));
    }
    for _ in 0..cfg.samples {
        let x = complex.sample_point(&mut rng);
        let px = (g.project)(&lift(&x)?)?;
        rep.projection = rep.projection.max(px.distance(&bottom(&x)?));
    }
    for (i, cell) in complex.cells().iter().enumerate() {
        if cell.dim == 0 {
            continue;
        }
        for _ in 0..(cfg.samples / complex.len().max(1)).max(8) {
            let v = diskmodel::sample_sphere(cell.dim, &mut rng);
            let image = complex.boundary_image(i, &v)?;
            if let ComplexPoint::Base(a) = &image {
                rep.restriction = rep.restriction.max(lift(&image)?.distance(&f(a)?));
            }
            let d = lift(&image)?.distance(&lift_just_inside(lift, i, &v)?);
            rep.attaching = rep.attaching.max(d);
        }
    }
    Ok(rep)
}

// The assembled lift canonicalizes boundary points away, so the cell's own
// lift at a boundary point is read off at height 1e-9.
fn lift_just_inside(lift: &ComplexMap, index: usize, v: &SpherePoint) -> Result<Point> {
    let eps: f64 = 1e-9;
    let scale = (1.0 - eps * eps).sqrt();
    let mut inner: Vec<f64> = v.coords().iter().map(|x| x * scale).collect();
    inner.push(eps);
    lift(&ComplexPoint::cell(index, DiskPoint::new(inner)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homotopy::ParamKind;
    use crate::instance::ChepInstance;

    fn point_base() -> CellComplex {
        CellComplex::new(Some(DiffSpace::point()))
    }

    fn a0() -> Point {
        Point::coords(Vec::new())
    }

    fn to_base(_: &SpherePoint) -> Result<ComplexPoint> {
        Ok(ComplexPoint::Base(a0()))
    }

    fn cfg() -> LiftConfig {
        LiftConfig::default()
    }

    #[test]
    fn attach_validates_targets() {
        let cx = point_base();
        assert!(cx.attach(1, None).is_err());
        assert!(cx.attach(0, Some(Arc::new(to_base))).is_err());
        let forward: AttachFn = Arc::new(|_| Ok(ComplexPoint::cell(3, DiskPoint::origin())));
        assert!(cx.attach(1, Some(forward)).is_err());
        assert!(CellComplex::new(None).attach(1, Some(Arc::new(to_base))).is_err());
        let wrong_dim: AttachFn = Arc::new(|_| Ok(ComplexPoint::cell(0, DiskPoint::new(vec![1.0, 0.0]).unwrap())));
        assert!(cx.attach_point().unwrap().attach(1, Some(wrong_dim)).is_err());
    }

    #[test]
    fn canonicalize_pushes_boundary_points_down() {
        let cx = point_base().attach(1, Some(Arc::new(to_base))).unwrap();
        let loop_attach: AttachFn = Arc::new(|v| {
            let x = v.coords();
            Ok(ComplexPoint::cell(0, DiskPoint::new(vec![x[0], x[1].abs()]).unwrap()))
        });
        let cx = cx.attach(2, Some(loop_attach)).unwrap();
        let edge = ComplexPoint::cell(1, DiskPoint::new(vec![0.6, 0.8, 0.0]).unwrap());
        let once = cx.canonicalize(&edge).unwrap();
        assert_eq!(once, ComplexPoint::cell(0, DiskPoint::new(vec![0.6, 0.8]).unwrap()));
        assert_eq!(cx.canonicalize(&once).unwrap(), once);
        let corner = ComplexPoint::cell(1, DiskPoint::new(vec![1.0, 0.0, 0.0]).unwrap());
        assert_eq!(cx.canonicalize(&corner).unwrap(), ComplexPoint::Base(a0()));
        let inner = ComplexPoint::cell(1, DiskPoint::new(vec![0.0, 0.0, 1.0]).unwrap());
        assert_eq!(cx.canonicalize(&inner).unwrap(), inner);
    }

    #[test]
    fn product_lift_solves_the_square() {
        let b = DiffSpace::euclidean(2);
        let p = product_fibration(&b, &DiffSpace::euclidean(1));
        let top: DiskMap = Arc::new(|w: &DiskPoint| {
            let c = w.coords();
            Ok(Point::pair(Point::coords(vec![c[0], c[1] * c[1]]), Point::coords(vec![c[0] + 2.0 * c[1]])))
        });
        // bottom∘k_n = p∘top because retract∘k_n = id
        let bottom: DiskMap = Arc::new(|w: &DiskPoint| {
            let r = diskmodel::retract(w)?;
            let c = r.coords();
            Ok(Point::coords(vec![c[0], c[1] * c[1]]))
        });
        let big = p.oracle.lift_k(1, top.clone(), bottom.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let v = diskmodel::sample_disk(1, &mut rng);
            assert!(big(&diskmodel::include_k(&v)).unwrap().distance(&top(&v).unwrap()) < 1e-9);
            let w = diskmodel::sample_disk(2, &mut rng);
            let pw = (p.project)(&big(&w).unwrap()).unwrap();
            assert!(pw.distance(&bottom(&w).unwrap()) < 1e-12);
        }
    }

    /// A 2-cell collapsed onto the base point: D^2/S^1 over the base R.
    fn sphere_instance() -> (Fibration, CellComplex, ComplexMap, Homotopy<Point, Point>, Homotopy<ComplexPoint, Point>) {
        let r = DiffSpace::euclidean(1);
        let p = product_fibration(&r, &r);
        let cx = point_base().attach(2, Some(Arc::new(to_base))).unwrap();
        // height of the cell point; zero on the base
        fn height(x: &ComplexPoint) -> f64 {
            match x {
                ComplexPoint::Base(_) => 0.0,
                ComplexPoint::Cell { point, .. } => point.height(),
            }
        }
        let f: ComplexMap = Arc::new(|x: &ComplexPoint| {
            let s = height(x);
            Ok(Point::pair(Point::coords(vec![s * s]), Point::coords(vec![s.sin()])))
        });
        let h = Homotopy::new(ParamKind::ITilde, |_a: &Point, t: f64| {
            Ok(Point::pair(Point::coords(vec![t]), Point::coords(vec![-t])))
        });
        let k = Homotopy::new(ParamKind::ITilde, |x: &ComplexPoint, t: f64| {
            let s = height(x);
            Ok(Point::coords(vec![s * s + t * (1.0 + s)]))
        });
        (p, cx, f, h, k)
    }

    #[test]
    fn chep_on_a_two_cell() {
        let (p, cx, f, h, k) = sphere_instance();
        let big = chep(&p, &cx, f.clone(), &h, &k, &cfg()).unwrap();
        let rep = verify_chep(&p, &cx, &f, &h, &k, &big, &LiftConfig { samples: 300, ..cfg() }).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    // Disk distances are read through λ⁻¹, so approach the ends in cube
    // coordinates: the deviation then shrinks linearly in δ.
    #[test]
    fn chep_is_continuous_at_the_attaching_points() {
        let inst = ChepInstance::load("chep_d1_demo").unwrap();
        let (big, _) = inst.run(&cfg()).unwrap();
        let at_cube = |u: f64| ComplexPoint::cell(1, diskmodel::q_cube(&diskmodel::CubeCoords::new(vec![u]).unwrap()));
        for d in [0.1, 0.07, 0.05, 0.04] {
            for t in [0.0, 0.2, 0.5, 0.8, 1.0] {
                let near_a = big.eval(&at_cube(lambda_fn(1.0 - d)), t).unwrap();
                assert!(near_a.distance(&inst.h.eval(&a0(), t).unwrap()) < 2.0 * d, "d = {d}, t = {t}");
                let near_x = big.eval(&at_cube(lambda_fn(d)), t).unwrap();
                let at_x = big.eval(&ComplexPoint::cell(0, DiskPoint::origin()), t).unwrap();
                assert!(near_x.distance(&at_x) < 1e-6, "d = {d}, t = {t}");
            }
        }
    }

    /// Two loops on two points; `order` permutes the cells.
    fn two_loops(order: [usize; 4]) -> (CellComplex, Vec<usize>) {
        // logical cells: 0 = x, 1 = y, 2 = loop on x, 3 = loop on y
        let mut slot = [0; 4];
        for (pos, &logical) in order.iter().enumerate() {
            slot[logical] = pos;
        }
        let mut cx = CellComplex::new(None);
        for &logical in &order {
            cx = if logical < 2 {
                cx.attach_point().unwrap()
            } else {
                let target = slot[logical - 2];
                cx.attach(1, Some(Arc::new(move |_| Ok(ComplexPoint::cell(target, DiskPoint::origin())))))
                    .unwrap()
            };
        }
        let logical_of = (0..4).map(|pos| order[pos]).collect();
        (cx, logical_of)
    }

    fn loops_chep(order: [usize; 4]) -> (Homotopy<ComplexPoint, Point>, Vec<usize>) {
        let (cx, logical_of) = two_loops(order);
        let r = DiffSpace::euclidean(1);
        let p = product_fibration(&r, &r);
        let lo = logical_of.clone();
        let label = move |x: &ComplexPoint| -> (f64, f64) {
            match x {
                ComplexPoint::Cell { index, point } => {
                    let l = lo[*index];
                    let s = if l < 2 { 0.0 } else { point.height() };
                    ((l % 2) as f64, s)
                }
                ComplexPoint::Base(_) => unreachable!(),
            }
        };
        let lf = label.clone();
        let f: ComplexMap = Arc::new(move |x| {
            let (c, s) = lf(x);
            Ok(Point::pair(Point::coords(vec![c + s]), Point::coords(vec![c - s * s])))
        });
        let k = Homotopy::new(ParamKind::ITilde, move |x: &ComplexPoint, t| {
            let (c, s) = label(x);
            Ok(Point::coords(vec![c + s + t * s.cos()]))
        });
        let h = Homotopy::new(ParamKind::ITilde, |_a: &Point, _t| Err(Error::domain("no base")));
        (chep(&p, &cx, f, &h, &k, &cfg()).unwrap(), logical_of)
    }

    #[test]
    fn chep_does_not_depend_on_the_order_of_independent_cells() {
        let (h1, l1) = loops_chep([0, 1, 2, 3]);
        let (h2, l2) = loops_chep([1, 0, 3, 2]);
        let pos = |l: &[usize], logical: usize| l.iter().position(|&x| x == logical).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let logical = rng.gen_range(0..4);
            let w = diskmodel::sample_disk(if logical < 2 { 0 } else { 1 }, &mut rng);
            let t: f64 = rng.gen();
            let a = h1.eval(&ComplexPoint::cell(pos(&l1, logical), w.clone()), t).unwrap();
            let b = h2.eval(&ComplexPoint::cell(pos(&l2, logical), w), t).unwrap();
            assert!(a.distance(&b) < 1e-8);
        }
    }

    #[test]
    fn hep_extends_a_homotopy_of_the_base() {
        let r2 = DiffSpace::euclidean(2);
        let cx = point_base().attach(1, Some(Arc::new(to_base))).unwrap();
        let f: ComplexMap = Arc::new(|x| match x {
            ComplexPoint::Base(_) => Ok(Point::coords(vec![0.0, 0.0])),
            ComplexPoint::Cell { point, .. } => Ok(Point::coords(vec![point.height(), point.coords()[0] * point.height()])),
        });
        let h = Homotopy::new(ParamKind::ITilde, |_a: &Point, t: f64| Ok(Point::coords(vec![t, t * t])));
        let big = hep(&cx, &r2, f.clone(), &h, &cfg()).unwrap();
        let p = point_fibration(&r2);
        let k = Homotopy::new(ParamKind::ITilde, |_x: &ComplexPoint, _t| Ok(Point::coords(Vec::new())));
        let rep = verify_chep(&p, &cx, &f, &h, &k, &big, &LiftConfig { samples: 300, ..cfg() }).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    struct FailingOracle;

    impl KLift for FailingOracle {
        fn lift_k(&self, n: usize, _top: DiskMap, _bottom: DiskMap) -> Result<DiskMap> {
            if n == 1 {
                Err(Error::Numerical("refused".into()))
            } else {
                Ok(Arc::new(|_| Ok(Point::coords(Vec::new()))))
            }
        }
    }

    #[test]
    fn oracle_failures_name_the_cell() {
        let cx = point_base().attach_point().unwrap();
        let cx = cx
            .attach(1, Some(Arc::new(|_| Ok(ComplexPoint::cell(0, DiskPoint::origin())))))
            .unwrap();
        let mut p = point_fibration(&DiffSpace::point());
        p.oracle = Arc::new(FailingOracle);
        let f: ComplexMap = Arc::new(|_| Ok(Point::coords(Vec::new())));
        let h = Homotopy::new(ParamKind::ITilde, |_a: &Point, _t| Ok(Point::coords(Vec::new())));
        let k = Homotopy::new(ParamKind::ITilde, |_x: &ComplexPoint, _t| Ok(Point::coords(Vec::new())));
        match chep(&p, &cx, f, &h, &k, &cfg()) {
            Err(Error::Oracle { cell, .. }) => assert_eq!(cell, 1),
            other => panic!("expected an oracle error, got {other:?}"),
        }
    }

    /// Base point, a loop, and a 2-cell wrapping the loop once.
    fn disk_over_loop() -> CellComplex {
        let cx = point_base().attach(1, Some(Arc::new(to_base))).unwrap();
        let wrap: AttachFn = Arc::new(|v| {
            let x = v.coords();
            let sign = if x[1] >= 0.0 { 1.0 } else { -1.0 };
            let p = DiskPoint::new(vec![sign * ((1.0 + x[0]) / 2.0).sqrt(), ((1.0 - x[0]) / 2.0).max(0.0).sqrt()])?;
            Ok(ComplexPoint::cell(0, p))
        });
        cx.attach(2, Some(wrap)).unwrap()
    }

    fn loop_bottom(x: &ComplexPoint) -> Result<Point> {
        Ok(Point::coords(match x {
            ComplexPoint::Base(_) => vec![0.0, 0.0],
            ComplexPoint::Cell { index: 0, point } => {
                let w = point.coords();
                vec![w[1] * w[1], w[0] * w[0] * w[1] * w[1]]
            }
            ComplexPoint::Cell { point, .. } => {
                let w = point.coords();
                vec![(1.0 - w[0]) / 2.0, (1.0 - w[0] * w[0]) / 4.0]
            }
        }))
    }

    #[test]
    fn extend_lift_over_a_two_cell() {
        let cx = disk_over_loop();
        let g = trivial_bundle(&DiffSpace::euclidean(2), 1);
        let f: PointFn = Arc::new(|_a| Ok(Point::pair(Point::coords(vec![0.0, 0.0]), Point::coords(vec![0.5]))));
        let bottom: ComplexMap = Arc::new(loop_bottom);
        let lift = extend_lift(&g, &cx, f.clone(), bottom.clone(), &cfg()).unwrap();
        let rep = verify_extend_lift(&g, &cx, &f, &bottom, &lift, &cfg()).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn extend_lift_of_a_point_is_the_oracle_value() {
        let cx = CellComplex::new(None).attach_point().unwrap();
        let g = trivial_bundle(&DiffSpace::euclidean(1), 2);
        let f: PointFn = Arc::new(|_a| Err(Error::domain("no base")));
        let bottom: ComplexMap = Arc::new(|_x| Ok(Point::coords(vec![3.0])));
        let lift = extend_lift(&g, &cx, f, bottom, &cfg()).unwrap();
        let y = lift(&ComplexPoint::cell(0, DiskPoint::origin())).unwrap();
        assert_eq!(y, Point::pair(Point::coords(vec![3.0]), Point::coords(vec![0.0, 0.0])));
    }

    #[test]
    fn extend_lift_checks_the_base_square() {
        let cx = disk_over_loop();
        let g = trivial_bundle(&DiffSpace::euclidean(2), 1);
        let f: PointFn = Arc::new(|_a| Ok(Point::pair(Point::coords(vec![1.0, 0.0]), Point::coords(vec![0.5]))));
        let bottom: ComplexMap = Arc::new(loop_bottom);
        assert!(matches!(
            extend_lift(&g, &cx, f, bottom, &cfg()),
            Err(Error::Precondition { .. })
        ));
    }
}
