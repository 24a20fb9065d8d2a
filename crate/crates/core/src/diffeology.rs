//! Plot-generated diffeological spaces.
//!
//! A [`DiffSpace`] carries a finite list of generating parameterizations and a
//! tolerance-based point equality. Derived spaces (subspace, quotient,
//! product, coproduct) build their generators structurally from their
//! components. Smoothness of a map is probed by composing it with every
//! generator of the source, checking finite-difference derivatives of the
//! composite and checking that the composite lands in the target's diffeology.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diskmodel::{self, DiskPoint};
use crate::error::{Error, Result};
use crate::smoothfn::{self, Expectation, FdConfig, Verdict};

/// Default equality tolerance of a space.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Default coefficient bound for irrational-torus equality.
pub const DEFAULT_COEFF_BOUND: i64 = 50;

/// A point of some carrier: coordinates, a pair (products) or a tagged point (coproducts).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Point {
    Coords(Vec<f64>),
    Pair(Box<Point>, Box<Point>),
    Tagged(usize, Box<Point>),
}

impl Point {
    pub fn coords(c: impl Into<Vec<f64>>) -> Self {
        Point::Coords(c.into())
    }

    pub fn pair(a: Point, b: Point) -> Self {
        Point::Pair(Box::new(a), Box::new(b))
    }

    pub fn tagged(tag: usize, p: Point) -> Self {
        Point::Tagged(tag, Box::new(p))
    }

    pub fn as_coords(&self) -> Option<&[f64]> {
        match self {
            Point::Coords(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_pair(&self) -> Option<(&Point, &Point)> {
        match self {
            Point::Pair(a, b) => Some((a, b)),
            _ => None,
        }
    }

    /// Coordinates in traversal order; tags contribute one coordinate each.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.flatten_into(&mut out);
        out
    }

    fn flatten_into(&self, out: &mut Vec<f64>) {
        match self {
            Point::Coords(c) => out.extend_from_slice(c),
            Point::Pair(a, b) => {
                a.flatten_into(out);
                b.flatten_into(out);
            }
            Point::Tagged(t, p) => {
                out.push(*t as f64);
                p.flatten_into(out);
            }
        }
    }

    /// Max-abs distance of same-shaped points, infinite on shape mismatch.
    pub fn distance(&self, other: &Point) -> f64 {
        match (self, other) {
            (Point::Coords(a), Point::Coords(b)) => diskmodel::max_abs_diff(a, b),
            (Point::Pair(a1, b1), Point::Pair(a2, b2)) => a1.distance(a2).max(b1.distance(b2)),
            (Point::Tagged(t1, p1), Point::Tagged(t2, p2)) if t1 == t2 => p1.distance(p2),
            _ => f64::INFINITY,
        }
    }
}

impl From<DiskPoint> for Point {
    fn from(p: DiskPoint) -> Self {
        Point::Coords(p.into_coords())
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Coords(c) => write!(f, "{c:?}"),
            Point::Pair(a, b) => write!(f, "({a}, {b})"),
            Point::Tagged(t, p) => write!(f, "#{t}:{p}"),
        }
    }
}

pub type PointFn = Arc<dyn Fn(&Point) -> Result<Point> + Send + Sync>;
pub type Predicate = Arc<dyn Fn(&Point) -> bool + Send + Sync>;
pub type EqFn = Arc<dyn Fn(&Point, &Point) -> bool + Send + Sync>;

/// An open box in `R^k`; bounds may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl OpenBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::domain(format!("invalid box {lo:?} .. {hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    pub fn whole(dim: usize) -> Self {
        Self {
            lo: vec![f64::NEG_INFINITY; dim],
            hi: vec![f64::INFINITY; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() == self.dim() && u.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (a, b))| a < x && x < b)
    }

    /// Finite sub-box clipped to `[-radius, radius]` on every axis.
    pub fn window(&self, radius: f64) -> OpenBox {
        OpenBox {
            lo: self.lo.iter().map(|a| a.max(-radius)).collect(),
            hi: self.hi.iter().map(|b| b.min(radius)).collect(),
        }
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn product(&self, other: &OpenBox) -> OpenBox {
        OpenBox {
            lo: self.lo.iter().chain(&other.lo).copied().collect(),
            hi: self.hi.iter().chain(&other.hi).copied().collect(),
        }
    }
}

/// An evaluable map from an open box into a carrier.
#[derive(Clone)]
pub struct Parameterization {
    pub domain: OpenBox,
    pub eval: Arc<dyn Fn(&[f64]) -> Result<Point> + Send + Sync>,
}

impl Parameterization {
    pub fn new(domain: OpenBox, eval: impl Fn(&[f64]) -> Result<Point> + Send + Sync + 'static) -> Self {
        Self {
            domain,
            eval: Arc::new(eval),
        }
    }

    pub fn call(&self, u: &[f64]) -> Result<Point> {
        (self.eval)(u)
    }
}

impl fmt::Debug for Parameterization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Parameterization").field("domain", &self.domain).finish()
    }
}

/// Provenance of a space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Construction {
    Euclidean,
    Subspace,
    Quotient,
    Product,
    Coproduct,
    Functional,
}

enum Kind {
    Euclidean {
        dim: usize,
    },
    Subspace {
        ambient: DiffSpace,
        member: Predicate,
    },
    Quotient {
        ambient: DiffSpace,
        carrier_dim: usize,
        project: PointFn,
        section: Option<PointFn>,
        eq: Option<EqFn>,
    },
    Product(DiffSpace, DiffSpace),
    Coproduct(DiffSpace, DiffSpace),
    Functional {
        source: DiffSpace,
        target: DiffSpace,
    },
}

struct Inner {
    name: String,
    kind: Kind,
    generators: Vec<Parameterization>,
    tolerance: f64,
}

/// A diffeological space given by finitely many generating plots.
#[derive(Clone)]
pub struct DiffSpace(Arc<Inner>);

impl fmt::Debug for DiffSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffSpace")
            .field("name", &self.0.name)
            .field("construction", &self.construction())
            .field("generators", &self.0.generators.len())
            .finish()
    }
}

/// Options for [`DiffSpace::quotient_with`].
#[derive(Clone)]
pub struct QuotientOptions {
    pub name: String,
    /// Number of coordinates of a carrier point.
    pub carrier_dim: usize,
    /// Canonical projection from the ambient carrier.
    pub project: PointFn,
    /// Closed-form right inverse of `project`, used to witness plot factorization.
    pub section: Option<PointFn>,
    /// Custom equality on carrier points; defaults to coordinate distance.
    pub eq: Option<EqFn>,
    pub tolerance: f64,
}

impl DiffSpace {
    fn build(name: String, kind: Kind, generators: Vec<Parameterization>, tolerance: f64) -> Self {
        DiffSpace(Arc::new(Inner {
            name,
            kind,
            generators,
            tolerance,
        }))
    }

    /// `R^n` generated by the identity plot.
    pub fn euclidean(dim: usize) -> Self {
        let gen = Parameterization::new(OpenBox::whole(dim), |u: &[f64]| Ok(Point::coords(u)));
        Self::build(format!("R^{dim}"), Kind::Euclidean { dim }, vec![gen], DEFAULT_TOLERANCE)
    }

    /// The one-point space `R^0`.
    pub fn point() -> Self {
        Self::euclidean(0)
    }

    pub fn product(x: &DiffSpace, y: &DiffSpace) -> Self {
        let mut gens = Vec::new();
        for p in &x.0.generators {
            for q in &y.0.generators {
                let (p, q) = (p.clone(), q.clone());
                let k = p.domain.dim();
                let domain = p.domain.product(&q.domain);
                gens.push(Parameterization::new(domain, move |u: &[f64]| {
                    Ok(Point::pair(p.call(&u[..k])?, q.call(&u[k..])?))
                }));
            }
        }
        let tol = x.tolerance().max(y.tolerance());
        Self::build(
            format!("({} x {})", x.name(), y.name()),
            Kind::Product(x.clone(), y.clone()),
            gens,
            tol,
        )
    }

    pub fn coproduct(x: &DiffSpace, y: &DiffSpace) -> Self {
        let mut gens = Vec::new();
        for (tag, space) in [(0usize, x), (1, y)] {
            for p in &space.0.generators {
                let p = p.clone();
                gens.push(Parameterization::new(p.domain.clone(), move |u: &[f64]| {
                    Ok(Point::tagged(tag, p.call(u)?))
                }));
            }
        }
        let tol = x.tolerance().max(y.tolerance());
        Self::build(
            format!("({} + {})", x.name(), y.name()),
            Kind::Coproduct(x.clone(), y.clone()),
            gens,
            tol,
        )
    }

    /// Subspace cut out by `member`. Generators are the ambient generators
    /// restricted to the largest sampled box whose image satisfies `member`.
    pub fn subspace(ambient: &DiffSpace, name: &str, member: impl Fn(&Point) -> bool + Send + Sync + 'static) -> Self {
        let member: Predicate = Arc::new(member);
        let gens = ambient
            .generators()
            .iter()
            .filter_map(|g| shrink_generator(g, &member))
            .collect();
        Self::build(
            name.to_string(),
            Kind::Subspace {
                ambient: ambient.clone(),
                member,
            },
            gens,
            ambient.tolerance(),
        )
    }

    /// Quotient by a canonical projection, with coordinate equality on carrier points.
    pub fn quotient(ambient: &DiffSpace, name: &str, carrier_dim: usize, project: PointFn) -> Self {
        Self::quotient_with(
            ambient,
            QuotientOptions {
                name: name.to_string(),
                carrier_dim,
                project,
                section: None,
                eq: None,
                tolerance: DEFAULT_TOLERANCE,
            },
        )
    }

    pub fn quotient_with(ambient: &DiffSpace, opts: QuotientOptions) -> Self {
        let gens = ambient
            .generators()
            .iter()
            .map(|g| {
                let (g, project) = (g.clone(), opts.project.clone());
                Parameterization::new(g.domain.clone(), move |u: &[f64]| project(&g.call(u)?))
            })
            .collect();
        Self::build(
            opts.name,
            Kind::Quotient {
                ambient: ambient.clone(),
                carrier_dim: opts.carrier_dim,
                project: opts.project,
                section: opts.section,
                eq: opts.eq,
            },
            gens,
            opts.tolerance,
        )
    }

    /// `C∞(X, Y)`; its points are only ever handled as curried evaluators.
    pub fn functional(source: &DiffSpace, target: &DiffSpace) -> Self {
        Self::build(
            format!("C({}, {})", source.name(), target.name()),
            Kind::Functional {
                source: source.clone(),
                target: target.clone(),
            },
            Vec::new(),
            DEFAULT_TOLERANCE,
        )
    }

    /// The same space with an explicit generating family.
    pub fn with_generators(&self, generators: Vec<Parameterization>) -> Self {
        let kind = match &self.0.kind {
            Kind::Euclidean { dim } => Kind::Euclidean { dim: *dim },
            Kind::Subspace { ambient, member } => Kind::Subspace {
                ambient: ambient.clone(),
                member: member.clone(),
            },
            Kind::Quotient {
                ambient,
                carrier_dim,
                project,
                section,
                eq,
            } => Kind::Quotient {
                ambient: ambient.clone(),
                carrier_dim: *carrier_dim,
                project: project.clone(),
                section: section.clone(),
                eq: eq.clone(),
            },
            Kind::Product(a, b) => Kind::Product(a.clone(), b.clone()),
            Kind::Coproduct(a, b) => Kind::Coproduct(a.clone(), b.clone()),
            Kind::Functional { source, target } => Kind::Functional {
                source: source.clone(),
                target: target.clone(),
            },
        };
        Self::build(self.0.name.clone(), kind, generators, self.0.tolerance)
    }

    pub fn with_tolerance(&self, tolerance: f64) -> Self {
        let s = self.with_generators(self.0.generators.clone());
        DiffSpace(Arc::new(Inner {
            name: s.0.name.clone(),
            kind: match Arc::try_unwrap(s.0) {
                Ok(inner) => inner.kind,
                Err(_) => unreachable!("fresh space is uniquely owned"),
            },
            generators: self.0.generators.clone(),
            tolerance,
        }))
    }

    pub fn name(&self) -> &str {
        &self.0.name
    }

    pub fn tolerance(&self) -> f64 {
        self.0.tolerance
    }

    pub fn generators(&self) -> &[Parameterization] {
        &self.0.generators
    }

    pub fn construction(&self) -> Construction {
        match self.0.kind {
            Kind::Euclidean { .. } => Construction::Euclidean,
            Kind::Subspace { .. } => Construction::Subspace,
            Kind::Quotient { .. } => Construction::Quotient,
            Kind::Product(..) => Construction::Product,
            Kind::Coproduct(..) => Construction::Coproduct,
            Kind::Functional { .. } => Construction::Functional,
        }
    }

    /// Factors of a product space.
    pub fn factors(&self) -> Option<(&DiffSpace, &DiffSpace)> {
        match &self.0.kind {
            Kind::Product(a, b) => Some((a, b)),
            _ => None,
        }
    }

    /// Number of flat coordinates of a point; `None` for functional spaces.
    pub fn flat_dim(&self) -> Option<usize> {
        match &self.0.kind {
            Kind::Euclidean { dim } => Some(*dim),
            Kind::Subspace { ambient, .. } => ambient.flat_dim(),
            Kind::Quotient { carrier_dim, .. } => Some(*carrier_dim),
            Kind::Product(a, b) => Some(a.flat_dim()? + b.flat_dim()?),
            Kind::Coproduct(a, b) => {
                let (da, db) = (a.flat_dim()?, b.flat_dim()?);
                (da == db).then_some(da + 1)
            }
            Kind::Functional { .. } => None,
        }
    }

    /// Rebuilds a structured point from flat coordinates (see [`Point::flatten`]).
    pub fn point_from_flat(&self, flat: &[f64]) -> Result<Point> {
        let want = self
            .flat_dim()
            .ok_or_else(|| Error::domain(format!("{} has no flat point form", self.name())))?;
        if flat.len() != want {
            return Err(Error::domain(format!(
                "{} expects {want} coordinates, got {}",
                self.name(),
                flat.len()
            )));
        }
        match &self.0.kind {
            Kind::Euclidean { .. } | Kind::Quotient { .. } => Ok(Point::coords(flat)),
            Kind::Subspace { ambient, .. } => ambient.point_from_flat(flat),
            Kind::Product(a, b) => {
                let k = a.flat_dim().unwrap_or(0);
                Ok(Point::pair(a.point_from_flat(&flat[..k])?, b.point_from_flat(&flat[k..])?))
            }
            Kind::Coproduct(a, b) => {
                let tag = flat[0];
                if tag == 0.0 {
                    Ok(Point::tagged(0, a.point_from_flat(&flat[1..])?))
                } else if tag == 1.0 {
                    Ok(Point::tagged(1, b.point_from_flat(&flat[1..])?))
                } else {
                    Err(Error::domain(format!("coproduct tag {tag} is not 0 or 1")))
                }
            }
            Kind::Functional { .. } => unreachable!(),
        }
    }

    /// Shape and membership test for a carrier point.
    pub fn contains(&self, p: &Point) -> bool {
        match (&self.0.kind, p) {
            (Kind::Euclidean { dim }, Point::Coords(c)) => c.len() == *dim,
            (Kind::Subspace { ambient, member }, _) => ambient.contains(p) && member(p),
            (Kind::Quotient { carrier_dim, .. }, Point::Coords(c)) => c.len() == *carrier_dim,
            (Kind::Product(a, b), Point::Pair(x, y)) => a.contains(x) && b.contains(y),
            (Kind::Coproduct(a, _), Point::Tagged(0, x)) => a.contains(x),
            (Kind::Coproduct(_, b), Point::Tagged(1, y)) => b.contains(y),
            _ => false,
        }
    }

    /// Tolerance-based equality of carrier points.
    pub fn eq(&self, x: &Point, y: &Point) -> bool {
        match (&self.0.kind, x, y) {
            (Kind::Subspace { ambient, .. }, _, _) => ambient.eq(x, y),
            (Kind::Quotient { eq: Some(eq), .. }, _, _) => eq(x, y),
            (Kind::Product(a, b), Point::Pair(x1, x2), Point::Pair(y1, y2)) => a.eq(x1, y1) && b.eq(x2, y2),
            (Kind::Coproduct(a, _), Point::Tagged(0, x), Point::Tagged(0, y)) => a.eq(x, y),
            (Kind::Coproduct(_, b), Point::Tagged(1, x), Point::Tagged(1, y)) => b.eq(x, y),
            (Kind::Functional { .. }, _, _) => false,
            (Kind::Euclidean { .. } | Kind::Quotient { .. }, Point::Coords(a), Point::Coords(b)) => {
                diskmodel::max_abs_diff(a, b) < self.tolerance()
            }
            _ => false,
        }
    }

    /// Checks that `y` is locally the value of a plot of this space.
    ///
    /// Euclidean targets accept any point (derivatives are probed separately),
    /// subspaces require membership plus ambient factorization, quotients
    /// require a preimage through an ambient generator.
    pub fn factor_check(&self, y: &Point, search: &PreimageSearch) -> std::result::Result<(), String> {
        match (&self.0.kind, y) {
            (Kind::Euclidean { dim }, Point::Coords(c)) if c.len() == *dim => Ok(()),
            (Kind::Subspace { ambient, member }, _) => {
                if !member(y) {
                    return Err(format!("{y} is not in {}", self.name()));
                }
                ambient.factor_check(y, search)
            }
            (Kind::Quotient { .. }, _) => self
                .local_preimage(y, search)
                .map(|_| ())
                .ok_or_else(|| format!("no generator of {} reaches {y}", self.name())),
            (Kind::Product(a, b), Point::Pair(p, q)) => {
                a.factor_check(p, search)?;
                b.factor_check(q, search)
            }
            (Kind::Coproduct(a, _), Point::Tagged(0, p)) => a.factor_check(p, search),
            (Kind::Coproduct(_, b), Point::Tagged(1, p)) => b.factor_check(p, search),
            (Kind::Functional { .. }, _) => Ok(()),
            _ => Err(format!("{y} has the wrong shape for {}", self.name())),
        }
    }

    /// A generator index and parameter `u` with `generator(u) ≈ y`, if one is found.
    pub fn local_preimage(&self, y: &Point, search: &PreimageSearch) -> Option<(usize, Vec<f64>)> {
        if let Kind::Quotient {
            ambient,
            section: Some(section),
            ..
        } = &self.0.kind
        {
            if let Ok(a) = section(y) {
                if let Some((gi, u)) = ambient.local_preimage(&a, search) {
                    if let Ok(v) = self.0.generators.get(gi)?.call(&u) {
                        if self.eq(&v, y) {
                            return Some((gi, u));
                        }
                    }
                }
            }
        }
        if let (Kind::Euclidean { dim }, Point::Coords(c)) = (&self.0.kind, y) {
            return (c.len() == *dim).then(|| (0, c.clone()));
        }
        search.find(self, y)
    }
}

fn shrink_generator(g: &Parameterization, member: &Predicate) -> Option<Parameterization> {
    let window = g.domain.window(4.0);
    let k = window.dim();
    if k == 0 {
        return g.call(&[]).ok().filter(|p| member(p)).map(|_| g.clone());
    }
    let inside = |u: &[f64]| g.call(u).map(|p| member(&p)).unwrap_or(false);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut centers = vec![window.center()];
    for _ in 0..256 {
        centers.push(
            (0..k)
                .map(|i| rng.gen_range(window.lo[i]..window.hi[i]))
                .collect(),
        );
    }
    let half_width = (0..k)
        .map(|i| 0.5 * (window.hi[i] - window.lo[i]))
        .fold(f64::INFINITY, f64::min);
    let probes: Vec<Vec<f64>> = (0..3usize.pow(k as u32).max(1))
        .map(|mut code| {
            (0..k)
                .map(|_| {
                    let d = (code % 3) as f64 - 1.0;
                    code /= 3;
                    d
                })
                .collect()
        })
        .collect();
    let fits = |c: &[f64], r: f64| {
        probes.iter().all(|d| {
            let u: Vec<f64> = c.iter().zip(d).map(|(ci, di)| ci + r * di).collect();
            let interior: Vec<f64> = c.iter().zip(d).map(|(ci, di)| ci + 0.999_999 * r * di).collect();
            g.domain.contains(&interior) && inside(&u)
        })
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for c in centers.into_iter().filter(|c| inside(c)) {
        let mut r = half_width;
        let mut found = false;
        for _ in 0..40 {
            if fits(&c, r) {
                found = true;
                break;
            }
            r *= 0.5;
        }
        if !found {
            continue;
        }
        // refine between the last fitting radius and the first failing one
        let (mut lo, mut hi) = (r, (2.0 * r).min(half_width));
        for _ in 0..30 {
            let mid = 0.5 * (lo + hi);
            if fits(&c, mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if best.as_ref().is_none_or(|(br, _)| lo > *br) {
            best = Some((lo, c));
        }
    }
    let (r, c) = best?;
    let domain = OpenBox::new(
        c.iter().map(|x| x - r).collect(),
        c.iter().map(|x| x + r).collect(),
    )
    .ok()?;
    Some(Parameterization {
        domain,
        eval: g.eval.clone(),
    })
}

/// Multistart Nelder-Mead search for plot preimages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PreimageSearch {
    pub tolerance: f64,
    pub starts: usize,
    pub iterations: usize,
    pub window: f64,
    pub seed: u64,
}

impl Default for PreimageSearch {
    fn default() -> Self {
        Self {
            tolerance: 1e-7,
            starts: 8,
            iterations: 400,
            window: 2.0,
            seed: 17,
        }
    }
}

impl PreimageSearch {
    fn find(&self, space: &DiffSpace, y: &Point) -> Option<(usize, Vec<f64>)> {
        let target = y.flatten();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for (gi, g) in space.generators().iter().enumerate() {
            let window = g.domain.window(self.window);
            let k = window.dim();
            let cost = |u: &[f64]| -> f64 {
                if !g.domain.contains(u) {
                    return f64::INFINITY;
                }
                match g.call(u) {
                    Ok(p) => {
                        let f = p.flatten();
                        if f.len() != target.len() {
                            return f64::INFINITY;
                        }
                        f.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                    }
                    Err(_) => f64::INFINITY,
                }
            };
            if k == 0 {
                if cost(&[]).sqrt() < self.tolerance {
                    return Some((gi, Vec::new()));
                }
                continue;
            }
            for _ in 0..self.starts {
                let start: Vec<f64> = (0..k)
                    .map(|i| rng.gen_range(window.lo[i]..window.hi[i]))
                    .collect();
                let (u, c) = nelder_mead(&cost, start, 0.25, self.iterations);
                if c.sqrt() < self.tolerance {
                    if let Ok(p) = g.call(&u) {
                        if space.eq(&p, y) || p.distance(y) < self.tolerance {
                            return Some((gi, u));
                        }
                    }
                }
            }
        }
        None
    }
}

fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, start: Vec<f64>, step: f64, iterations: usize) -> (Vec<f64>, f64) {
    let k = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(k + 1);
    let v0 = f(&start);
    simplex.push((start.clone(), v0));
    for i in 0..k {
        let mut p = start.clone();
        p[i] += step;
        let v = f(&p);
        simplex.push((p, v));
    }
    let combine = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };
    for _ in 0..iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 < 1e-30 {
            break;
        }
        let centroid: Vec<f64> = (0..k)
            .map(|j| simplex[..k].iter().map(|(p, _)| p[j]).sum::<f64>() / k as f64)
            .collect();
        let worst = simplex[k].clone();
        let reflected = combine(&centroid, &worst.0, -1.0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = combine(&centroid, &worst.0, -2.0);
            let fe = f(&expanded);
            simplex[k] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[k - 1].1 {
            simplex[k] = (reflected, fr);
        } else {
            let contracted = combine(&centroid, &worst.0, 0.5);
            let fc = f(&contracted);
            if fc < worst.1 {
                simplex[k] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let p = combine(&best, &entry.0, 0.5);
                    let v = f(&p);
                    *entry = (p, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// A candidate smooth map between two spaces.
#[derive(Clone)]
pub struct MapEvaluator {
    pub name: String,
    pub source: DiffSpace,
    pub target: DiffSpace,
    pub eval: PointFn,
}

impl fmt::Debug for MapEvaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MapEvaluator")
            .field("name", &self.name)
            .field("source", &self.source.name())
            .field("target", &self.target.name())
            .finish()
    }
}

impl MapEvaluator {
    pub fn new(
        name: &str,
        source: &DiffSpace,
        target: &DiffSpace,
        eval: impl Fn(&Point) -> Result<Point> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.to_string(),
            source: source.clone(),
            target: target.clone(),
            eval: Arc::new(eval),
        }
    }

    pub fn call(&self, x: &Point) -> Result<Point> {
        (self.eval)(x)
    }
}

/// Sampling knobs for [`smooth_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothCheckConfig {
    pub samples_per_generator: usize,
    pub random_directions: usize,
    pub max_order: usize,
    pub fd: FdConfig,
    /// Infinite generator domains are clipped to `[-window, window]`.
    pub window: f64,
    pub seed: u64,
    pub search: PreimageSearch,
}

impl Default for SmoothCheckConfig {
    fn default() -> Self {
        Self {
            samples_per_generator: 24,
            random_directions: 2,
            max_order: 2,
            fd: FdConfig::default(),
            window: 2.0,
            seed: 1,
            search: PreimageSearch::default(),
        }
    }
}

/// Where a smoothness probe failed or could not decide.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub generator: usize,
    pub parameter: Vec<f64>,
    pub direction: Vec<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothCheckReport {
    pub map: String,
    pub samples: usize,
    pub failures: Vec<Witness>,
    pub inconclusive: Vec<Witness>,
}

impl SmoothCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.inconclusive.is_empty()
    }
}

/// Probes whether `f ∘ P` is a plot of the target for every source generator `P`.
pub fn smooth_check(f: &MapEvaluator, cfg: &SmoothCheckConfig) -> SmoothCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = SmoothCheckReport {
        map: f.name.clone(),
        samples: 0,
        failures: Vec::new(),
        inconclusive: Vec::new(),
    };
    let margin = cfg.fd.base_step * (cfg.max_order as f64 + 1.0);
    for (gi, g) in f.source.generators().iter().enumerate() {
        let window = g.domain.window(cfg.window);
        let k = window.dim();
        let mut params = vec![window.center()];
        for _ in 1..cfg.samples_per_generator.max(1) {
            params.push(
                (0..k)
                    .map(|i| {
                        let (a, b) = (window.lo[i] + margin, window.hi[i] - margin);
                        if a < b {
                            rng.gen_range(a..b)
                        } else {
                            0.5 * (window.lo[i] + window.hi[i])
                        }
                    })
                    .collect(),
            );
        }
        for u in params {
            report.samples += 1;
            let composite = |v: &[f64]| -> Result<Point> { f.call(&g.call(v)?) };
            let y = match composite(&u) {
                Ok(y) => y,
                Err(e) => {
                    report.inconclusive.push(Witness {
                        generator: gi,
                        parameter: u.clone(),
                        direction: Vec::new(),
                        detail: format!("evaluation failed: {e}"),
                    });
                    continue;
                }
            };
            if let Err(detail) = f.target.factor_check(&y, &cfg.search) {
                report.failures.push(Witness {
                    generator: gi,
                    parameter: u.clone(),
                    direction: Vec::new(),
                    detail,
                });
                continue;
            }
            let width = y.flatten().len();
            let mut directions: Vec<Vec<f64>> = (0..k)
                .map(|i| {
                    let mut e = vec![0.0; k];
                    e[i] = 1.0;
                    e
                })
                .collect();
            for _ in 0..cfg.random_directions.min(if k > 1 { usize::MAX } else { 0 }) {
                let d: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let n = d.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n > 1e-3 {
                    directions.push(d.iter().map(|x| x / n).collect());
                }
            }
            'dirs: for dir in directions {
                for j in 0..width {
                    let line = |h: f64| -> f64 {
                        let v: Vec<f64> = u.iter().zip(&dir).map(|(a, d)| a + h * d).collect();
                        composite(&v)
                            .ok()
                            .and_then(|p| p.flatten().get(j).copied())
                            .unwrap_or(f64::NAN)
                    };
                    let r = match smoothfn::smoothness_check(line, 0.0, cfg.max_order, &cfg.fd, &Expectation::Exists) {
                        Ok(r) => r,
                        Err(e) => {
                            report.inconclusive.push(Witness {
                                generator: gi,
                                parameter: u.clone(),
                                direction: dir.clone(),
                                detail: e.to_string(),
                            });
                            break 'dirs;
                        }
                    };
                    let bad = r.verdict.iter().position(|v| *v != Verdict::Pass);
                    if let Some(i) = bad {
                        let w = Witness {
                            generator: gi,
                            parameter: u.clone(),
                            direction: dir.clone(),
                            detail: format!(
                                "coordinate {j}, order {}: forward {} vs backward {}",
                                i + 1,
                                r.forward[i],
                                r.backward[i]
                            ),
                        };
                        if r.verdict[i] == Verdict::Fail {
                            report.failures.push(w);
                        } else {
                            report.inconclusive.push(w);
                        }
                        break 'dirs;
                    }
                }
            }
        }
    }
    report
}

/// The exponential-law transpose `α(f)(x)(y) = f(x, y)` of a map out of a product.
#[derive(Clone)]
pub struct Curried {
    inner: MapEvaluator,
    left: DiffSpace,
    right: DiffSpace,
}

/// Curries a map `X × Y → Z`.
pub fn exponential_alpha(f: &MapEvaluator) -> Result<Curried> {
    let (left, right) = f
        .source
        .factors()
        .ok_or_else(|| Error::domain(format!("{} is not defined on a product", f.name)))?;
    Ok(Curried {
        left: left.clone(),
        right: right.clone(),
        inner: f.clone(),
    })
}

impl Curried {
    /// `α(f)(x)`, a map `Y → Z`.
    pub fn at(&self, x: &Point) -> MapEvaluator {
        let (x, f) = (x.clone(), self.inner.eval.clone());
        MapEvaluator::new(
            &format!("{}({x}, -)", self.inner.name),
            &self.right,
            &self.inner.target,
            move |y: &Point| f(&Point::pair(x.clone(), y.clone())),
        )
    }

    /// The functional space the curried map lands in.
    pub fn codomain(&self) -> DiffSpace {
        DiffSpace::functional(&self.right, &self.inner.target)
    }

    pub fn domain(&self) -> &DiffSpace {
        &self.left
    }

    /// Inverse transpose: `(x, y) ↦ α(f)(x)(y)`.
    pub fn uncurry(&self) -> MapEvaluator {
        let me = self.clone();
        MapEvaluator::new(
            &self.inner.name,
            &DiffSpace::product(&self.left, &self.right),
            &self.inner.target,
            move |p: &Point| {
                let (x, y) = p
                    .as_pair()
                    .ok_or_else(|| Error::domain("uncurried map expects a pair"))?;
                me.at(x).call(y)
            },
        )
    }
}

/// Knobs for the sampled D-topology openness test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpenSetConfig {
    pub random_probes: usize,
    pub initial_radius: f64,
    pub min_radius: f64,
    pub ball_samples: usize,
    pub window: f64,
    pub seed: u64,
}

impl Default for OpenSetConfig {
    fn default() -> Self {
        Self {
            random_probes: 200,
            initial_radius: 0.25,
            min_radius: 1e-6,
            ball_samples: 8,
            window: 2.0,
            seed: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpenSetVerdict {
    pub open_consistent: bool,
    pub probes_in_set: usize,
    pub counterexample: Option<Witness>,
}

/// Sampled test of openness in the D-topology (final topology of the plots).
///
/// For every probe `u` of every generator `P` with `P(u)` in the set, a ball
/// around `u` whose sampled points all stay in the set must exist at some
/// radius no smaller than `min_radius`. Explicit probes are `(generator, u)`.
pub fn d_topology_open_sample(
    space: &DiffSpace,
    member: &dyn Fn(&Point) -> bool,
    probes: &[(usize, Vec<f64>)],
    cfg: &OpenSetConfig,
) -> OpenSetVerdict {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut verdict = OpenSetVerdict {
        open_consistent: true,
        probes_in_set: 0,
        counterexample: None,
    };
    for (gi, g) in space.generators().iter().enumerate() {
        let window = g.domain.window(cfg.window);
        let k = window.dim();
        let mut points: Vec<Vec<f64>> = probes
            .iter()
            .filter(|(i, _)| *i == gi)
            .map(|(_, u)| u.clone())
            .collect();
        for _ in 0..cfg.random_probes {
            points.push((0..k).map(|i| rng.gen_range(window.lo[i]..window.hi[i])).collect());
        }
        let in_set = |u: &[f64]| g.domain.contains(u) && g.call(u).map(|p| member(&p)).unwrap_or(false);
        for u in points {
            if !in_set(&u) {
                continue;
            }
            verdict.probes_in_set += 1;
            let mut r = cfg.initial_radius;
            let mut escape = None;
            let mut found = false;
            while r >= cfg.min_radius {
                let mut ball: Vec<Vec<f64>> = Vec::new();
                for i in 0..k {
                    for s in [-1.0, 1.0] {
                        let mut v = u.clone();
                        v[i] += s * r;
                        ball.push(v);
                    }
                }
                for _ in 0..cfg.ball_samples {
                    let d: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let n = d.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                    ball.push(u.iter().zip(&d).map(|(a, x)| a + r * x / n).collect());
                }
                match ball.into_iter().find(|v| !in_set(v)) {
                    None => {
                        found = true;
                        break;
                    }
                    Some(v) => escape = Some(v),
                }
                r *= 0.5;
            }
            if !found {
                verdict.open_consistent = false;
                verdict.counterexample = Some(Witness {
                    generator: gi,
                    parameter: u.clone(),
                    direction: escape.unwrap_or_default(),
                    detail: format!("every ball down to radius {} leaves the set", cfg.min_radius),
                });
                return verdict;
            }
        }
    }
    verdict
}

/// `R` with identity plot, the carrier of several standard spaces.
pub fn real_line() -> DiffSpace {
    DiffSpace::euclidean(1)
}

/// `I`: the unit interval with the subspace diffeology of `R`.
pub fn interval() -> DiffSpace {
    DiffSpace::subspace(&real_line(), "I", |p: &Point| {
        p.as_coords().is_some_and(|c| c.len() == 1 && (0.0..=1.0).contains(&c[0]))
    })
}

/// `Ĩ`: the unit interval with the quotient diffeology along `λ`.
pub fn interval_tilde() -> DiffSpace {
    let project: PointFn = Arc::new(|p: &Point| {
        let c = p.as_coords().ok_or_else(|| Error::domain("expected a real"))?;
        Ok(Point::coords(vec![smoothfn::lambda_fn(c[0])]))
    });
    let section: PointFn = Arc::new(|p: &Point| {
        let c = p.as_coords().ok_or_else(|| Error::domain("expected a real"))?;
        Ok(Point::coords(vec![smoothfn::lambda_inv(c[0])]))
    });
    DiffSpace::quotient_with(
        &real_line(),
        QuotientOptions {
            name: "I~".into(),
            carrier_dim: 1,
            project,
            section: Some(section),
            eq: None,
            tolerance: DEFAULT_TOLERANCE,
        },
    )
}

/// `D^n` with the quotient diffeology of its generating plot `Q_n ∘ λ^n`.
pub fn disk(n: usize) -> DiffSpace {
    let project: PointFn = Arc::new(move |p: &Point| {
        let c = p.as_coords().ok_or_else(|| Error::domain("expected coordinates"))?;
        Ok(diskmodel::gen_plot(c).into())
    });
    let section: PointFn = Arc::new(move |p: &Point| {
        let c = p.as_coords().ok_or_else(|| Error::domain("expected coordinates"))?;
        let w = DiskPoint::new(c.to_vec())?;
        let t = diskmodel::section(&w);
        Ok(Point::coords(
            t.as_slice().iter().map(|&x| smoothfn::lambda_inv(x)).collect::<Vec<_>>(),
        ))
    });
    DiffSpace::quotient_with(
        &DiffSpace::euclidean(n),
        QuotientOptions {
            name: format!("D^{n}"),
            carrier_dim: n + 1,
            project,
            section: Some(section),
            eq: None,
            tolerance: DEFAULT_TOLERANCE,
        },
    )
}

/// The irrational torus `R / (Z + θZ)`.
///
/// Equality searches lattice vectors `m + nθ` with `|m|, |n| <= coeff_bound`;
/// the lattice is dense, so an unbounded search would identify every pair.
pub fn irrational_torus(theta: f64, coeff_bound: i64) -> Result<DiffSpace> {
    if !theta.is_finite() || coeff_bound < 1 {
        return Err(Error::domain("theta must be finite and coeff_bound positive"));
    }
    for q in 1..=coeff_bound {
        let p = (theta * q as f64).round();
        if (theta - p / q as f64).abs() < 1e-12 {
            return Err(Error::precondition(
                "theta is rational to machine precision",
                format!("theta ≈ {p}/{q}"),
            ));
        }
    }
    let tol = DEFAULT_TOLERANCE;
    let identity: PointFn = Arc::new(|p: &Point| Ok(p.clone()));
    let eq: EqFn = Arc::new(move |x: &Point, y: &Point| {
        let (Some(a), Some(b)) = (x.as_coords(), y.as_coords()) else {
            return false;
        };
        if a.len() != 1 || b.len() != 1 {
            return false;
        }
        let d = a[0] - b[0];
        (-coeff_bound..=coeff_bound).any(|n| {
            let rest = d - n as f64 * theta;
            let m = rest.round();
            m.abs() <= coeff_bound as f64 && (rest - m).abs() < tol
        })
    });
    Ok(DiffSpace::quotient_with(
        &real_line(),
        QuotientOptions {
            name: format!("T_{theta}"),
            carrier_dim: 1,
            project: identity.clone(),
            section: Some(identity),
            eq: Some(eq),
            tolerance: tol,
        },
    ))
}

/// JSON description of a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceSpec {
    Euclidean { n: usize },
    Point,
    Disk { n: usize },
    Interval,
    IntervalTilde,
    Product { left: Box<SpaceSpec>, right: Box<SpaceSpec> },
    Coproduct { left: Box<SpaceSpec>, right: Box<SpaceSpec> },
    /// Points whose every listed expression evaluates to a value `>= 0` (variables `x1..`).
    Subspace { of: Box<SpaceSpec>, member: Vec<String> },
    /// Quotient by a projection given as coordinate expressions in `x1..`.
    Quotient { of: Box<SpaceSpec>, map: Vec<String> },
    TorusTheta {
        theta: f64,
        #[serde(default = "default_coeff_bound")]
        coeff_bound: i64,
    },
}

fn default_coeff_bound() -> i64 {
    DEFAULT_COEFF_BOUND
}

impl SpaceSpec {
    pub fn build(&self) -> Result<DiffSpace> {
        use crate::expr::ExprVec;
        Ok(match self {
            SpaceSpec::Euclidean { n } => DiffSpace::euclidean(*n),
            SpaceSpec::Point => DiffSpace::point(),
            SpaceSpec::Disk { n } => disk(*n),
            SpaceSpec::Interval => interval(),
            SpaceSpec::IntervalTilde => interval_tilde(),
            SpaceSpec::Product { left, right } => DiffSpace::product(&left.build()?, &right.build()?),
            SpaceSpec::Coproduct { left, right } => DiffSpace::coproduct(&left.build()?, &right.build()?),
            SpaceSpec::Subspace { of, member } => {
                let ambient = of.build()?;
                let exprs = ExprVec::parse(member, &ExprVec::indexed_vars("x", ambient.flat_dim().unwrap_or(0)))?;
                DiffSpace::subspace(&ambient, "subspace", move |p: &Point| {
                    exprs
                        .eval(&p.flatten())
                        .map(|v| v.iter().all(|x| *x >= 0.0))
                        .unwrap_or(false)
                })
            }
            SpaceSpec::Quotient { of, map } => {
                let ambient = of.build()?;
                let exprs = ExprVec::parse(map, &ExprVec::indexed_vars("x", ambient.flat_dim().unwrap_or(0)))?;
                let project: PointFn = Arc::new(move |p: &Point| Ok(Point::coords(exprs.eval(&p.flatten())?)));
                DiffSpace::quotient(&ambient, "quotient", map.len(), project)
            }
            SpaceSpec::TorusTheta { theta, coeff_bound } => irrational_torus(*theta, *coeff_bound)?,
        })
    }
}
