//! Named verification suites and their reports.
//!
//! Every property draws from its own generator, seeded from the run seed and
//! the property name, so reports do not depend on suite order. Reports carry
//! no timings; the same configuration gives byte-identical JSON.

use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::diffeology::{
    self, d_topology_open_sample, exponential_alpha, smooth_check, DiffSpace, MapEvaluator, OpenSetConfig, Point,
    SmoothCheckConfig,
};
use crate::diskmodel::{self, CubeCoords, DiskPoint};
use crate::error::{Error, Result};
use crate::homotopy::{self, Component, Homotopy, PairMapRep, ParamKind};
use crate::lifting::{self, CellComplex, ComplexMap, ComplexPoint, LiftConfig};
use crate::smoothfn::{self, gamma, lambda_fn, xi, xi_inv, Expectation, FdConfig, MAX_FD_ORDER};
use crate::subdivision::{self, CylPoint, PsiMap, Side};
use crate::instance::ChepInstance;

/// Tolerances, sample counts and seed of a verification run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    /// Algebraic identities.
    pub tol_alg: f64,
    /// Round trips through inverses.
    pub tol_rt: f64,
    /// Finite-difference agreement (relative, floored at scale 1).
    pub tol_fd: f64,
    /// Lifting equations.
    pub tol_lift: f64,
    /// Overrides the large sample count (10⁴); small counts become a tenth of it.
    pub samples: Option<usize>,
    pub fd_order: usize,
    pub seed: u64,
    /// Debug switch: `false` evaluates `Ψ` without the wrinkle.
    pub wrinkle: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tol_alg: 1e-12,
            tol_rt: 1e-8,
            tol_fd: 1e-4,
            tol_lift: 1e-6,
            samples: None,
            fd_order: 3,
            seed: 1,
            wrinkle: true,
        }
    }
}

/// Tolerances the properties pin to fixed values.
pub const TOL_DISK_RT: f64 = 1e-10;
pub const TOL_BOUNDARY: f64 = 1e-9;
pub const TOL_IN_L: f64 = 1e-8;
/// Largest fraction of wrinkle-free seam curves allowed to pass.
pub const CONTROL_PASS_FRACTION: f64 = 0.1;

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [
            ("tol-alg", self.tol_alg),
            ("tol-rt", self.tol_rt),
            ("tol-fd", self.tol_fd),
            ("tol-lift", self.tol_lift),
        ] {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::domain(format!("--{name} must be a positive number, got {t}")));
            }
        }
        if !(1..=MAX_FD_ORDER).contains(&self.fd_order) {
            return Err(Error::domain(format!("--fd-order must be in 1..={MAX_FD_ORDER}")));
        }
        if self.samples == Some(0) {
            return Err(Error::domain("--samples must be positive"));
        }
        Ok(())
    }

    fn large(&self) -> usize {
        self.samples.unwrap_or(10_000)
    }

    fn small(&self) -> usize {
        self.samples.map_or(1_000, |s| (s / 10).max(1))
    }

    fn rng(&self, property: &str) -> ChaCha8Rng {
        // FNV-1a, so the stream is stable across platforms and suite orders
        let h = property
            .bytes()
            .fold(0xcbf29ce484222325_u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3));
        ChaCha8Rng::seed_from_u64(self.seed ^ h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    Smoothfn,
    Diskmodel,
    Homotopy,
    Subdivision,
    Diffeology,
    Lifting,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 7] = ["smoothfn", "diskmodel", "homotopy", "subdivision", "diffeology", "lifting", "all"];

    pub fn name(self) -> &'static str {
        Self::NAMES[self as usize]
    }

    fn members(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![
                Suite::Smoothfn,
                Suite::Diskmodel,
                Suite::Homotopy,
                Suite::Subdivision,
                Suite::Diffeology,
                Suite::Lifting,
            ],
            s => vec![s],
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        const ALL: [Suite; 7] = [
            Suite::Smoothfn,
            Suite::Diskmodel,
            Suite::Homotopy,
            Suite::Subdivision,
            Suite::Diffeology,
            Suite::Lifting,
            Suite::All,
        ];
        ALL.into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown suite {s:?}; expected one of {}", Self::NAMES.join(", "))))
    }
}

/// One measured property.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub suite: String,
    pub property: String,
    pub samples: usize,
    /// `null` in JSON when the measurement is not finite.
    pub worst_dev: f64,
    pub tol: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub suite: String,
    pub seed: u64,
    pub pass: bool,
    pub properties: Vec<PropertyResult>,
}

impl Report {
    pub fn property(&self, suite: &str, name: &str) -> Option<&PropertyResult> {
        self.properties.iter().find(|p| p.suite == suite && p.property == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Plain-text rendering of the JSON report.
    pub fn to_text(&self) -> String {
        let v: serde_json::Value = serde_json::from_str(&self.to_json()).expect("reports round-trip");
        let mut out = String::new();
        for p in v["properties"].as_array().into_iter().flatten() {
            let _ = writeln!(
                out,
                "{} {}/{} worst_dev={} tol={} samples={}{}",
                if p["pass"].as_bool() == Some(true) { "PASS" } else { "FAIL" },
                p["suite"].as_str().unwrap_or(""),
                p["property"].as_str().unwrap_or(""),
                p["worst_dev"],
                p["tol"],
                p["samples"],
                p.get("note").and_then(|n| n.as_str()).map(|n| format!(" ({n})")).unwrap_or_default(),
            );
        }
        let _ = writeln!(
            out,
            "{} suite {} (seed {})",
            if v["pass"].as_bool() == Some(true) { "PASS" } else { "FAIL" },
            v["suite"].as_str().unwrap_or(""),
            v["seed"]
        );
        out
    }
}

struct Recorder<'a> {
    suite: &'static str,
    cfg: &'a RunConfig,
    out: Vec<PropertyResult>,
}

impl Recorder<'_> {
    fn push(&mut self, property: &str, samples: usize, worst_dev: f64, tol: f64) {
        self.push_note(property, samples, worst_dev, tol, None);
    }

    fn push_note(&mut self, property: &str, samples: usize, worst_dev: f64, tol: f64, note: Option<String>) {
        self.out.push(PropertyResult {
            suite: self.suite.into(),
            property: property.into(),
            samples,
            worst_dev,
            tol,
            pass: worst_dev <= tol,
            note,
        });
    }

    /// Records a measurement that may fail outright; errors become failing properties.
    fn measure(&mut self, property: &str, tol: f64, f: impl FnOnce(&RunConfig, &mut ChaCha8Rng) -> Result<(usize, f64)>) {
        let mut rng = self.cfg.rng(property);
        match f(self.cfg, &mut rng) {
            Ok((n, d)) => self.push(property, n, d, tol),
            Err(e) => self.push_note(property, 0, f64::INFINITY, tol, Some(e.to_string())),
        }
    }
}

/// Runs a suite; `All` runs every module suite.
pub fn run(suite: Suite, cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    let mut properties = Vec::new();
    for s in suite.members() {
        let mut rec = Recorder {
            suite: s.name(),
            cfg,
            out: Vec::new(),
        };
        match s {
            Suite::Smoothfn => smoothfn_suite(&mut rec),
            Suite::Diskmodel => diskmodel_suite(&mut rec),
            Suite::Homotopy => homotopy_suite(&mut rec),
            Suite::Subdivision => subdivision_suite(&mut rec),
            Suite::Diffeology => diffeology_suite(&mut rec),
            Suite::Lifting => lifting_suite(&mut rec),
            Suite::All => unreachable!(),
        }
        properties.extend(rec.out);
    }
    properties.sort_by(|a, b| (&a.suite, &a.property).cmp(&(&b.suite, &b.property)));
    Ok(Report {
        suite: suite.name().into(),
        seed: cfg.seed,
        pass: properties.iter().all(|p| p.pass),
        properties,
    })
}

/// `n` evenly spaced points of `[a, b]`, both ends included.
pub fn grid(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 { (b - a) / (n - 1) as f64 } else { 0.0 };
    (0..n).map(move |i| if i + 1 == n && n > 1 { b } else { a + i as f64 * step })
}

// ---------------------------------------------------------------- smoothfn

fn smoothfn_suite(rec: &mut Recorder) {
    let cfg = rec.cfg.clone();
    let (large, small) = (cfg.large(), cfg.small());

    let d = grid(-1.0, 2.0, large)
        .map(|t| (lambda_fn(t) + lambda_fn(1.0 - t) - 1.0).abs())
        .fold(0.0, f64::max);
    rec.push("lambda_symmetry", large, d, cfg.tol_alg);

    let mut d = 0.0_f64;
    for t in grid(-1.0, 0.0, large / 2) {
        d = d.max(gamma(t).abs()).max(lambda_fn(t).abs());
    }
    for t in grid(1.0, 2.0, large / 2) {
        d = d.max((lambda_fn(t) - 1.0).abs());
    }
    rec.push("lambda_exact_outside_unit", large, d, 0.0);

    let fd = FdConfig::default().with_tolerance(cfg.tol_fd);
    for (name, point) in [("lambda_flat_at_0", 0.0), ("lambda_flat_at_1", 1.0)] {
        rec.measure(name, cfg.tol_fd, |c, _| {
            let r = smoothfn::smoothness_check(lambda_fn, point, c.fd_order, &fd, &Expectation::Values(vec![0.0; c.fd_order]))?;
            Ok((c.fd_order, r.worst_deviation(&Expectation::Values(vec![0.0; c.fd_order]))))
        });
    }

    let third = 1.0 / 3.0;
    let mut d = grid(third, 2.0 * third, small)
        .map(|s| (xi(s) - (lambda_fn(3.0 * s - 1.0) / 3.0 + third)).abs())
        .fold(0.0, f64::max);
    for s in grid(0.0, 1.0 / 6.0, small).chain(grid(5.0 / 6.0, 1.0, small)) {
        d = d.max((xi(s) - s).abs());
    }
    rec.push("xi_mandated_branches", 3 * small, d, cfg.tol_alg);

    let s: Vec<f64> = grid(0.0, 1.0, large).collect();
    let v: Vec<f64> = s.iter().map(|&x| xi(x)).collect();
    let drop = v.windows(2).map(|w| (w[0] - w[1]).max(0.0)).fold(0.0, f64::max);
    rec.push("xi_monotone", large, drop, cfg.tol_alg);

    // widest run of grid points sharing one value of xi
    let (mut widest, mut start) = (0.0_f64, 0);
    for i in 1..=v.len() {
        if i == v.len() || v[i] != v[start] {
            widest = widest.max(s[i - 1] - s[start]);
            start = i;
        }
    }
    rec.push_note(
        "xi_strictly_increasing",
        large,
        widest,
        cfg.tol_alg,
        Some("worst_dev is the widest s-interval on which xi is constant in f64".into()),
    );

    let d = [0.0, 1.0 / 6.0, third, 2.0 * third, 5.0 / 6.0, 1.0]
        .iter()
        .map(|&e| (xi(e) - e).abs())
        .fold(0.0, f64::max);
    rec.push("xi_fixes_interval_endpoints", 6, d, cfg.tol_alg);

    let d = grid(0.0, 1.0, small)
        .map(|s| (xi(s) + xi(1.0 - s) - 1.0).abs())
        .fold(0.0, f64::max);
    rec.push("xi_reflection", small, d, cfg.tol_alg);

    rec.measure("xi_inv_after_xi", cfg.tol_rt, |c, _| {
        let mut d = 0.0_f64;
        for s in grid(0.0, 1.0, c.small()) {
            d = d.max((xi_inv(xi(s))? - s).abs());
        }
        Ok((c.small(), d))
    });

    rec.measure("xi_after_xi_inv", cfg.tol_rt, |c, _| {
        let mut d = 0.0_f64;
        for y in grid(0.0, 1.0, c.small()) {
            d = d.max((xi(xi_inv(y)?) - y).abs());
        }
        Ok((c.small(), d))
    });

    // negative control: |t| has no first derivative at 0
    rec.measure("calibration_abs_not_smooth", 0.0, |c, _| {
        let r = smoothfn::smoothness_check(f64::abs, 0.0, c.fd_order, &fd, &Expectation::Exists)?;
        Ok((1, if r.first_failure() == Some(1) && r.failed() { 0.0 } else { 1.0 }))
    });
}

// ---------------------------------------------------------------- diskmodel

fn diskmodel_suite(rec: &mut Recorder) {
    let cfg = rec.cfg.clone();
    for n in 1..=3 {
        rec.measure(&format!("q_section_roundtrip_n{n}"), TOL_DISK_RT, |c, rng| {
            let mut d = 0.0_f64;
            for _ in 0..c.large() {
                let w = diskmodel::sample_disk(n, rng);
                d = d.max(diskmodel::q_cube(&diskmodel::section(&w)).distance(&w));
            }
            Ok((c.large(), d))
        });
    }

    rec.measure("q_at_zero_exact", 0.0, |c, rng| {
        let mut d = 0.0_f64;
        for n in 0..=3 {
            for _ in 0..c.small() / 4 {
                let v = diskmodel::sample_disk(n, rng);
                let mut want = v.coords().to_vec();
                want.push(0.0);
                d = d.max(DiskPoint::new(want)?.distance(&diskmodel::q(&v, 0.0)?));
            }
        }
        Ok((c.small(), d))
    });

    rec.measure("q_at_one_reflects", cfg.tol_alg, |c, rng| {
        let mut d = 0.0_f64;
        for n in 0..=3 {
            for _ in 0..c.small() / 4 {
                let v = diskmodel::sample_disk(n, rng);
                let w = diskmodel::q(&v, 1.0)?;
                let (vc, wc) = (v.coords(), w.coords());
                d = d.max(wc[n + 1].abs()).max((wc[n] + vc[n]).abs());
                for i in 0..n {
                    d = d.max((wc[i] - vc[i]).abs());
                }
            }
        }
        Ok((c.small(), d))
    });

    rec.measure("unit_norm", cfg.tol_alg, |c, rng| {
        let norm = |p: &DiskPoint| p.coords().iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut d = 0.0_f64;
        for n in 1..=3 {
            for _ in 0..c.small() / 3 {
                let x: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
                let g = diskmodel::gen_plot(&x);
                let q = diskmodel::q_cube(&CubeCoords::new(x.clone())?);
                let r = diskmodel::q(&diskmodel::sample_disk(n - 1, rng), rng.gen())?;
                for p in [g, q, r] {
                    d = d.max((norm(&p) - 1.0).abs());
                }
            }
        }
        Ok((c.small(), d))
    });

    rec.measure("retract_after_include_k", TOL_DISK_RT, |c, rng| {
        let mut d = 0.0_f64;
        for n in 1..=3 {
            for _ in 0..c.small() / 3 {
                let v = diskmodel::sample_disk(n, rng);
                d = d.max(diskmodel::retract(&diskmodel::include_k(&v))?.distance(&v));
            }
        }
        Ok((c.small(), d))
    });
}

// ---------------------------------------------------------------- homotopy

/// A basepointed class in `π₂(R², x-axis, 0)`, used by the star checks.
pub fn relative_disk_map() -> PairMapRep {
    PairMapRep {
        dim: 2,
        eval: Arc::new(|w: &DiskPoint| {
            let c = w.coords();
            Ok(Point::coords(vec![c[2] + c[1].max(0.0).powi(2), c[0] * c[2]]))
        }),
        basepoint: Point::coords(vec![0.0, 0.0]),
        in_subspace: Arc::new(|y: &Point| y.flatten()[1].abs() <= TOL_BOUNDARY),
        tolerance: TOL_BOUNDARY,
    }
}

/// An absolute class in `π₁(R², 0)`.
pub fn loop_map(a: f64) -> PairMapRep {
    PairMapRep::absolute(
        1,
        Arc::new(move |w: &DiskPoint| {
            let c = w.coords();
            Ok(Point::coords(vec![c[1] * (a + c[0]), c[1] * c[1]]))
        }),
        Point::coords(vec![0.0, 0.0]),
        TOL_BOUNDARY,
    )
}

/// One step of a random complex plan.
#[derive(Debug, Clone, PartialEq)]
pub enum PlanCell {
    Point,
    /// A 1-cell with ends at two earlier attachment points.
    Edge(PlanRef, PlanRef),
    /// A 2-cell collapsed onto one earlier point.
    Disk(PlanRef),
}

/// Where a plan cell attaches: the base, or a point of an earlier plan cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlanRef {
    Base,
    Vertex(usize),
    /// Interior point of an earlier 1-cell at the given angle.
    EdgeInterior(usize, f64),
}

/// A complex description whose cells may be reordered.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPlan {
    pub with_base: bool,
    pub cells: Vec<PlanCell>,
}

impl ComplexPlan {
    pub fn random<R: Rng>(rng: &mut R, max_cells: usize) -> Self {
        let with_base = rng.gen_bool(0.5);
        let count = rng.gen_range(0..=max_cells);
        let mut cells = Vec::with_capacity(count);
        let mut refs: Vec<PlanRef> = if with_base { vec![PlanRef::Base] } else { Vec::new() };
        for i in 0..count {
            let roll = rng.gen_range(0..10);
            let cell = if refs.is_empty() || roll < 4 {
                PlanCell::Point
            } else if roll < 8 {
                PlanCell::Edge(*refs.choose(rng).unwrap(), *refs.choose(rng).unwrap())
            } else {
                PlanCell::Disk(*refs.choose(rng).unwrap())
            };
            match cell {
                PlanCell::Point => refs.push(PlanRef::Vertex(i)),
                PlanCell::Edge(..) => refs.push(PlanRef::EdgeInterior(i, rng.gen_range(0.1..3.0))),
                PlanCell::Disk(_) => {}
            }
            cells.push(cell);
        }
        Self { with_base, cells }
    }

    fn deps(&self, i: usize) -> Vec<usize> {
        let of = |r: &PlanRef| match r {
            PlanRef::Base => None,
            PlanRef::Vertex(j) | PlanRef::EdgeInterior(j, _) => Some(*j),
        };
        match &self.cells[i] {
            PlanCell::Point => Vec::new(),
            PlanCell::Edge(a, b) => [of(a), of(b)].into_iter().flatten().collect(),
            PlanCell::Disk(a) => of(a).into_iter().collect(),
        }
    }

    /// A random order compatible with the attachment dependencies.
    pub fn shuffled_order<R: Rng>(&self, rng: &mut R) -> Vec<usize> {
        let mut placed = vec![false; self.cells.len()];
        let mut order = Vec::with_capacity(self.cells.len());
        while order.len() < self.cells.len() {
            let ready: Vec<usize> = (0..self.cells.len())
                .filter(|&i| !placed[i] && self.deps(i).iter().all(|&j| placed[j]))
                .collect();
            let pick = *ready.choose(rng).expect("plans are acyclic");
            placed[pick] = true;
            order.push(pick);
        }
        order
    }

    /// Builds the complex with plan cell `order[k]` at position `k`.
    pub fn build(&self, order: &[usize]) -> Result<CellComplex> {
        let mut pos = vec![usize::MAX; self.cells.len()];
        for (k, &i) in order.iter().enumerate() {
            pos[i] = k;
        }
        let point = |r: &PlanRef| -> Result<ComplexPoint> {
            Ok(match r {
                PlanRef::Base => ComplexPoint::Base(Point::coords(Vec::new())),
                PlanRef::Vertex(j) => ComplexPoint::cell(pos[*j], DiskPoint::origin()),
                PlanRef::EdgeInterior(j, a) => ComplexPoint::cell(pos[*j], DiskPoint::new(vec![a.cos(), a.sin()])?),
            })
        };
        let mut cx = CellComplex::new(self.with_base.then(DiffSpace::point));
        for &i in order {
            cx = match &self.cells[i] {
                PlanCell::Point => cx.attach_point()?,
                PlanCell::Edge(a, b) => {
                    let (pa, pb) = (point(a)?, point(b)?);
                    cx.attach(
                        1,
                        Some(Arc::new(move |v| Ok(if v.coords()[0] < 0.0 { pa.clone() } else { pb.clone() }))),
                    )?
                }
                PlanCell::Disk(a) => {
                    let pa = point(a)?;
                    cx.attach(2, Some(Arc::new(move |_| Ok(pa.clone()))))?
                }
            };
        }
        Ok(cx)
    }
}

fn relabel(components: &[Component], order: &[usize]) -> Vec<Component> {
    let mut out: Vec<Component> = components
        .iter()
        .map(|c| {
            let mut zero_cells: Vec<usize> = c.zero_cells.iter().map(|&k| order[k]).collect();
            zero_cells.sort_unstable();
            Component { base: c.base, zero_cells }
        })
        .collect();
    out.sort();
    out
}

fn homotopy_suite(rec: &mut Recorder) {
    let cfg = rec.cfg.clone();

    // F(x,t) = x(1-t) + g(x) t and G(x,t) = g(x) + t² x on R²
    let family = |a: f64| {
        let g = move |x: &[f64]| vec![x[0] * x[1] + a, (a * x[0]).sin()];
        let f = Homotopy::new(ParamKind::ITilde, move |x: &Vec<f64>, t: f64| {
            let gx = g(x);
            Ok(Point::coords(vec![x[0] * (1.0 - t) + gx[0] * t, x[1] * (1.0 - t) + gx[1] * t]))
        });
        let h = Homotopy::new(ParamKind::ITilde, move |x: &Vec<f64>, t: f64| {
            let gx = g(x);
            Ok(Point::coords(vec![gx[0] + t * t * x[0], gx[1] + t * t * x[1]]))
        });
        (f, h)
    };

    rec.measure("concat_seam", cfg.tol_alg, |c, rng| {
        let mut d = 0.0_f64;
        for _ in 0..c.small() {
            let (f, g) = family(rng.gen_range(-2.0..2.0));
            let x = vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let left = f.eval(&x, lambda_fn(3.0 * 0.5))?;
            let right = g.eval(&x, lambda_fn(3.0 * 0.5 - 2.0))?;
            d = d.max(left.distance(&right));
        }
        Ok((c.small(), d))
    });

    rec.measure("concat_endpoints", 0.0, |c, rng| {
        let mut d = 0.0_f64;
        for _ in 0..c.small() {
            let (f, g) = family(rng.gen_range(-2.0..2.0));
            let x = vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let fg = homotopy::concat(&f, &g, std::slice::from_ref(&x), c.tol_alg)?;
            d = d.max(fg.eval(&x, 0.0)?.distance(&f.eval(&x, 0.0)?));
            d = d.max(fg.eval(&x, 1.0)?.distance(&g.eval(&x, 1.0)?));
        }
        Ok((c.small(), d))
    });

    rec.measure("star_pole_fibers", TOL_BOUNDARY, |c, rng| {
        let (phi, psi) = (relative_disk_map(), relative_disk_map());
        let mut d = 0.0_f64;
        for _ in 0..c.small() {
            let t1 = if rng.gen_bool(0.5) { 0.0 } else { 1.0 };
            let a = CubeCoords::new(vec![t1, rng.gen()])?;
            let b = CubeCoords::new(vec![t1, rng.gen()])?;
            let ya = homotopy::star_on_cube(&phi, &psi, &a)?;
            let yb = homotopy::star_on_cube(&phi, &psi, &b)?;
            d = d.max(ya.distance(&yb));
        }
        Ok((c.small(), d))
    });

    rec.measure("star_boundary", TOL_BOUNDARY, |c, rng| {
        let mut d = 0.0_f64;
        let reps = [
            homotopy::star(&loop_map(0.5), &loop_map(-1.5))?,
            homotopy::star(&relative_disk_map(), &relative_disk_map())?,
        ];
        for rep in &reps {
            for _ in 0..c.small() / 2 {
                let v = diskmodel::sample_sphere(rep.dim, rng);
                let y = rep.call(&diskmodel::include_j(&v))?;
                let off_a = if (rep.in_subspace)(&y) { 0.0 } else { f64::INFINITY };
                d = d.max(off_a);
                if *v.coords().last().unwrap() <= 0.0 {
                    d = d.max(y.distance(&rep.basepoint));
                }
            }
        }
        Ok((c.small(), d))
    });

    let complexes = 100;
    rec.measure("path_components_oracle", 0.0, |_, rng| {
        let mut mismatches = 0;
        for _ in 0..complexes {
            let plan = ComplexPlan::random(rng, 20);
            let cx = plan.build(&(0..plan.cells.len()).collect::<Vec<_>>())?;
            if homotopy::path_components(&cx)? != homotopy::path_components_bruteforce(&cx, 32)? {
                mismatches += 1;
            }
        }
        Ok((complexes, mismatches as f64))
    });

    rec.measure("path_components_order_independent", 0.0, |_, rng| {
        let mut mismatches = 0;
        for _ in 0..complexes {
            let plan = ComplexPlan::random(rng, 20);
            let identity: Vec<usize> = (0..plan.cells.len()).collect();
            let order = plan.shuffled_order(rng);
            let a = homotopy::path_components(&plan.build(&identity)?)?;
            let b = relabel(&homotopy::path_components(&plan.build(&order)?)?, &order);
            if a != b || homotopy::path_components(&plan.build(&identity)?)? != a {
                mismatches += 1;
            }
        }
        Ok((complexes, mismatches as f64))
    });
}

// ---------------------------------------------------------------- subdivision

/// Seam curves `s ↦ Ψ(source(v, s, t))` probed at `s = 1/3, 2/3`: returns
/// (curves, failing curves, worst deviation over passing and failing probes).
pub fn seam_curves(map: PsiMap, curves: usize, fd_order: usize, tol: f64, rng: &mut ChaCha8Rng) -> Result<(usize, usize, f64)> {
    let fd = FdConfig::seam().with_tolerance(tol);
    let (mut fails, mut worst, mut total) = (0, 0.0_f64, 0);
    for _ in 0..curves.div_ceil(2) {
        let v = diskmodel::sample_disk(1, rng);
        let t: f64 = rng.gen_range(0.0..1.0);
        for seam in [1.0 / 3.0, 2.0 / 3.0] {
            total += 1;
            let mut failed = false;
            for j in 0..4 {
                let f = |s: f64| {
                    let c = subdivision::source_point(&v, s, t).and_then(|w| map.apply(&w));
                    c.map(|c| if j < 3 { c.disk.coords()[j] } else { c.time }).unwrap_or(f64::NAN)
                };
                let r = smoothfn::smoothness_check(f, seam, fd_order, &fd, &Expectation::Exists)?;
                failed |= !r.passed();
                worst = worst.max(r.worst_deviation(&Expectation::Exists) / r.fd_estimates.iter().fold(1.0, |m: f64, x| m.max(x.abs())));
            }
            fails += usize::from(failed);
        }
    }
    Ok((total, fails, worst))
}

fn subdivision_suite(rec: &mut Recorder) {
    let cfg = rec.cfg.clone();
    let map = PsiMap { wrinkle: cfg.wrinkle };

    rec.measure("phi_branch_agreement", cfg.tol_alg, |c, rng| {
        let mut d = 0.0_f64;
        for _ in 0..c.small() {
            let v = diskmodel::sample_disk(rng.gen_range(0..=2), rng);
            let t: f64 = rng.gen();
            for (s, l, r) in [(1.0 / 3.0, 1, 2), (2.0 / 3.0, 2, 3)] {
                let at = |b: u8| -> Result<CylPoint> {
                    let (a, bb) = subdivision::phi_branch(b, s, t);
                    CylPoint::new(diskmodel::q(&v, lambda_fn(a))?, lambda_fn(bb))
                };
                d = d.max(at(l)?.distance(&at(r)?));
            }
        }
        Ok((c.small(), d))
    });

    rec.measure("region_preservation", 0.0, |c, rng| {
        let mut bad = 0;
        for _ in 0..c.large() {
            let (s, t): (f64, f64) = (rng.gen(), rng.gen());
            let (a, b) = subdivision::phi_params(s, t);
            let src = subdivision::region_tags(s, t, Side::Source, TOL_BOUNDARY);
            let dst = subdivision::region_tags(a, b, Side::Target, TOL_BOUNDARY);
            if !src.iter().any(|x| dst.iter().any(|y| x.value == y.value)) {
                bad += 1;
            }
        }
        Ok((c.large(), bad as f64))
    });

    rec.measure("boundary_image_in_l", 0.0, |c, rng| {
        let mut bad = 0;
        for n in 0..=3 {
            for _ in 0..c.small() / 4 {
                let w = diskmodel::include_k(&diskmodel::sample_disk(n, rng));
                if !subdivision::in_l(&map.apply(&w)?, TOL_IN_L) {
                    bad += 1;
                }
            }
        }
        Ok((c.small(), bad as f64))
    });

    for n in 1..=3 {
        rec.measure(&format!("psi_inv_after_psi_n{n}"), cfg.tol_rt, |c, rng| {
            let mut d = 0.0_f64;
            for _ in 0..c.large() {
                let w = diskmodel::sample_disk(n + 1, rng);
                d = d.max(map.invert(&map.apply(&w)?)?.distance(&w));
            }
            Ok((c.large(), d))
        });
        let property = format!("psi_after_psi_inv_n{n}");
        let mut rng = cfg.rng(&property);
        let measured = (|| -> Result<(usize, usize, f64)> {
            let (mut d, mut skipped) = (0.0_f64, 0);
            for _ in 0..cfg.large() {
                let c = CylPoint::new(diskmodel::sample_disk(n, &mut rng), rng.gen())?;
                if subdivision::collapsed_fiber(&c) {
                    skipped += 1;
                    continue;
                }
                d = d.max(map.apply(&map.invert(&c)?)?.distance(&c));
            }
            Ok((cfg.large() - skipped, skipped, d))
        })();
        match measured {
            Ok((n_ok, skipped, d)) => rec.push_note(
                &property,
                n_ok,
                d,
                cfg.tol_rt,
                (skipped > 0).then(|| format!("{skipped} collapsed-fiber samples skipped")),
            ),
            Err(e) => rec.push_note(&property, 0, f64::INFINITY, cfg.tol_rt, Some(e.to_string())),
        }
    }

    let curves = (cfg.small() / 2).max(2);
    let mut rng = cfg.rng("seam_fd_smooth");
    match seam_curves(map, curves, cfg.fd_order, cfg.tol_fd, &mut rng) {
        Ok((total, fails, worst)) => rec.push_note(
            "seam_fd_smooth",
            total,
            if fails == 0 { worst } else { f64::INFINITY },
            cfg.tol_fd,
            (fails > 0).then(|| format!("{fails}/{total} seam curves fail")),
        ),
        Err(e) => rec.push_note("seam_fd_smooth", 0, f64::INFINITY, cfg.tol_fd, Some(e.to_string())),
    }
    let mut rng = cfg.rng("seam_fd_control_fails");
    match seam_curves(PsiMap::without_wrinkle(), curves, cfg.fd_order, cfg.tol_fd, &mut rng) {
        Ok((total, fails, _)) => rec.push_note(
            "seam_fd_control_fails",
            total,
            1.0 - fails as f64 / total as f64,
            CONTROL_PASS_FRACTION,
            Some(format!("worst_dev is the fraction of wrinkle-free curves that pass ({fails}/{total} fail)")),
        ),
        Err(e) => rec.push_note("seam_fd_control_fails", 0, f64::INFINITY, CONTROL_PASS_FRACTION, Some(e.to_string())),
    }
}

// ---------------------------------------------------------------- diffeology

fn standard_spaces() -> Result<Vec<DiffSpace>> {
    Ok(vec![
        diffeology::real_line(),
        diffeology::interval(),
        diffeology::interval_tilde(),
        diffeology::disk(1),
        diffeology::disk(2),
        diffeology::irrational_torus(std::f64::consts::SQRT_2, diffeology::DEFAULT_COEFF_BOUND)?,
    ])
}

fn diffeology_suite(rec: &mut Recorder) {
    let check = SmoothCheckConfig {
        samples_per_generator: 6,
        ..SmoothCheckConfig::default()
    };

    rec.measure("constant_plots_factor", 0.0, |_, rng| {
        let mut bad = 0;
        let mut n = 0;
        for x in standard_spaces()? {
            for g in x.generators() {
                let w = g.domain.window(2.0);
                let u: Vec<f64> = (0..w.dim()).map(|i| rng.gen_range(w.lo[i]..w.hi[i])).collect();
                let y = g.call(&u)?;
                let f = MapEvaluator::new("const", &DiffSpace::euclidean(2), &x, move |_| Ok(y.clone()));
                n += 1;
                bad += usize::from(!smooth_check(&f, &check).passed());
            }
        }
        Ok((n, bad as f64))
    });

    rec.measure("precomposition_closure", 0.0, |_, rng| {
        let mut bad = 0;
        let mut n = 0;
        for x in standard_spaces()? {
            for g in x.generators() {
                let k = g.domain.dim();
                let w = g.domain.window(2.0);
                let center = w.center();
                let coeffs: Vec<(f64, f64)> = (0..k).map(|_| (rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2))).collect();
                let lo = w.lo.clone();
                let hi = w.hi.clone();
                let g = g.clone();
                // a polynomial map R² → box, kept inside the window
                let f = MapEvaluator::new("P∘Q", &DiffSpace::euclidean(2), &x, move |p: &Point| {
                    let z = p.flatten();
                    let u: Vec<f64> = (0..k)
                        .map(|i| {
                            let (a, b) = coeffs[i];
                            let r = 0.25 * (hi[i] - lo[i]).min(2.0);
                            center[i] + r * (a * z[0] + b * z[1] * z[1] + 0.3 * z[0] * z[1]).tanh()
                        })
                        .collect();
                    g.call(&u)
                });
                n += 1;
                bad += usize::from(!smooth_check(&f, &check).passed());
            }
        }
        Ok((n, bad as f64))
    });

    rec.measure("exponential_roundtrip", 0.0, |c, rng| {
        let r = diffeology::real_line();
        let r2 = DiffSpace::euclidean(2);
        let src = DiffSpace::product(&r, &r2);
        let f = MapEvaluator::new("f", &src, &r2, |p: &Point| {
            let (a, b) = p.as_pair().ok_or_else(|| Error::domain("not a pair"))?;
            let (x, y) = (a.flatten()[0], b.flatten());
            Ok(Point::coords(vec![x * y[0] + y[1].sin(), (x - y[1]).exp()]))
        });
        let curried = exponential_alpha(&f)?;
        let back = curried.uncurry();
        let mut d = 0.0_f64;
        for _ in 0..c.small() {
            let x = Point::coords(vec![rng.gen_range(-3.0..3.0)]);
            let y = Point::coords(vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]);
            let direct = f.call(&Point::pair(x.clone(), y.clone()))?;
            d = d.max(direct.distance(&curried.at(&x).call(&y)?));
            d = d.max(direct.distance(&back.call(&Point::pair(x, y))?));
        }
        Ok((c.small(), d))
    });

    rec.measure("quotient_eq_reflexive_symmetric", 0.0, |c, rng| {
        let mut bad = 0;
        let spaces = [
            diffeology::interval_tilde(),
            diffeology::disk(1),
            diffeology::irrational_torus(std::f64::consts::SQRT_2, diffeology::DEFAULT_COEFF_BOUND)?,
        ];
        for _ in 0..c.small() {
            for x in &spaces {
                let g = &x.generators()[0];
                let w = g.domain.window(2.0);
                let mut draw = || -> Result<Point> {
                    let u: Vec<f64> = (0..w.dim()).map(|i| rng.gen_range(w.lo[i]..w.hi[i])).collect();
                    g.call(&u)
                };
                let (p, q) = (draw()?, draw()?);
                bad += usize::from(!x.eq(&p, &p)) + usize::from(x.eq(&p, &q) != x.eq(&q, &p));
            }
        }
        Ok((c.small(), bad as f64))
    });

    rec.measure("torus_eq_translation_invariant", 0.0, |c, rng| {
        let theta = std::f64::consts::SQRT_2;
        let t = diffeology::irrational_torus(theta, diffeology::DEFAULT_COEFF_BOUND)?;
        let p = |x: f64| Point::coords(vec![x]);
        let mut bad = 0;
        for _ in 0..c.small() {
            let x: f64 = rng.gen_range(-2.0..2.0);
            let y = if rng.gen_bool(0.5) {
                x + rng.gen_range(-3..=3) as f64 + rng.gen_range(-3..=3) as f64 * theta
            } else {
                rng.gen_range(-2.0..2.0)
            };
            let base = t.eq(&p(x), &p(y));
            for shifted in [t.eq(&p(x + 1.0), &p(y)), t.eq(&p(x), &p(y + theta))] {
                bad += usize::from(shifted != base);
            }
        }
        Ok((c.small(), bad as f64))
    });

    rec.measure("d_topology_interval_tilde_open", 0.0, |_, _| {
        let it = diffeology::interval_tilde();
        let member = |p: &Point| p.as_coords().is_some_and(|c| c[0] > 0.2 && c[0] < 0.6);
        let v = d_topology_open_sample(&it, &member, &[], &OpenSetConfig::default());
        Ok((v.probes_in_set, if v.open_consistent { 0.0 } else { 1.0 }))
    });

    // negative control: a singleton of R is not D-open
    rec.measure("calibration_singleton_not_open", 0.0, |_, _| {
        let zero = |p: &Point| p.as_coords().is_some_and(|c| c[0] == 0.0);
        let v = d_topology_open_sample(&diffeology::real_line(), &zero, &[(0, vec![0.0])], &OpenSetConfig::default());
        Ok((v.probes_in_set, if v.open_consistent { 1.0 } else { 0.0 }))
    });
}

// ---------------------------------------------------------------- lifting

/// The bundled covering-homotopy demo, checked at `cfg.tol_lift`.
pub fn chep_demo(cfg: &RunConfig) -> Result<lifting::ChepReport> {
    let inst = ChepInstance::load("chep_d1_demo")?;
    let lc = LiftConfig {
        samples: cfg.small(),
        tolerance: cfg.tol_lift,
        seed: cfg.seed,
    };
    Ok(inst.run(&lc)?.1)
}

/// Base point, a loop, and a 2-cell wrapping the loop once, over `R² × R → R²`.
pub fn extend_lift_demo(cfg: &RunConfig) -> Result<lifting::ExtendReport> {
    let a0 = || ComplexPoint::Base(Point::coords(Vec::new()));
    let cx = CellComplex::new(Some(DiffSpace::point()))
        .attach(1, Some(Arc::new(move |_| Ok(a0()))))?
        .attach(
            2,
            Some(Arc::new(|v| {
                let x = v.coords();
                let sign = if x[1] >= 0.0 { 1.0 } else { -1.0 };
                let p = DiskPoint::new(vec![sign * ((1.0 + x[0]) / 2.0).sqrt(), ((1.0 - x[0]) / 2.0).max(0.0).sqrt()])?;
                Ok(ComplexPoint::cell(0, p))
            })),
        )?;
    let g = lifting::trivial_bundle(&DiffSpace::euclidean(2), 1);
    let f: diffeology::PointFn = Arc::new(|_| Ok(Point::pair(Point::coords(vec![0.0, 0.0]), Point::coords(vec![0.5]))));
    let bottom: ComplexMap = Arc::new(|x: &ComplexPoint| {
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
    });
    let lc = LiftConfig {
        samples: cfg.small(),
        tolerance: cfg.tol_lift,
        seed: cfg.seed,
    };
    let lift = lifting::extend_lift(&g, &cx, f.clone(), bottom.clone(), &lc)?;
    lifting::verify_extend_lift(&g, &cx, &f, &bottom, &lift, &lc)
}

fn lifting_suite(rec: &mut Recorder) {
    let cfg = rec.cfg.clone();

    rec.measure("canonicalize_idempotent", 0.0, |c, rng| {
        let mut d = 0.0_f64;
        let mut n = 0;
        for _ in 0..20 {
            let plan = ComplexPlan::random(rng, 12);
            let cx = plan.build(&(0..plan.cells.len()).collect::<Vec<_>>())?;
            if cx.is_empty() {
                continue;
            }
            for _ in 0..c.small() / 20 {
                let i = rng.gen_range(0..cx.len());
                let dim = cx.cells()[i].dim;
                let p = if dim > 0 && rng.gen_bool(0.5) {
                    ComplexPoint::cell(i, diskmodel::include_j(&diskmodel::sample_sphere(dim, rng)))
                } else {
                    ComplexPoint::cell(i, diskmodel::sample_disk(dim, rng))
                };
                let once = cx.canonicalize(&p)?;
                d = d.max(once.distance(&cx.canonicalize(&once)?));
                n += 1;
            }
        }
        Ok((n, d))
    });

    rec.measure("product_lift_equations", 1e-8, |c, rng| {
        let p = lifting::product_fibration(&DiffSpace::euclidean(2), &DiffSpace::euclidean(1));
        let mut d = 0.0_f64;
        for n in 0..=3 {
            let coeffs: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let poly = move |t: &[f64], k: usize| -> f64 {
                t.iter().enumerate().map(|(i, x)| coeffs[(i + k) % 6] * x.powi(i as i32 + 1)).sum::<f64>() + coeffs[k]
            };
            let (p1, p2) = (poly.clone(), poly.clone());
            let base_of = move |t: &[f64]| Point::coords(vec![p1(t, 0), p1(t, 1)]);
            let b2 = base_of.clone();
            let top: lifting::DiskMap = Arc::new(move |w: &DiskPoint| {
                let t = diskmodel::section(w).into_vec();
                Ok(Point::pair(b2(&t), Point::coords(vec![p2(&t, 2)])))
            });
            // bottom depends only on the first n cube coordinates, so bottom∘k_n = p∘top
            let bottom: lifting::DiskMap = Arc::new(move |w: &DiskPoint| {
                let t = diskmodel::section(w).into_vec();
                Ok(base_of(&t[..n]))
            });
            let h = p.oracle.lift_k(n, top.clone(), bottom.clone())?;
            for _ in 0..c.small() / 4 {
                let v = diskmodel::sample_disk(n, rng);
                d = d.max(h(&diskmodel::include_k(&v))?.distance(&top(&v)?));
                let w = diskmodel::sample_disk(n + 1, rng);
                d = d.max((p.project)(&h(&w)?)?.distance(&bottom(&w)?));
            }
        }
        Ok((c.small(), d))
    });

    let property = "chep_demo_equations";
    match chep_demo(&cfg) {
        Ok(r) => rec.push_note(
            property,
            r.samples,
            r.initial.max(r.base).max(r.projection),
            cfg.tol_lift,
            Some(format!("initial {:e}, base {:e}, projection {:e}", r.initial, r.base, r.projection)),
        ),
        Err(e) => rec.push_note(property, 0, f64::INFINITY, cfg.tol_lift, Some(e.to_string())),
    }

    let property = "extend_lift_demo_equations";
    match extend_lift_demo(&cfg) {
        Ok(r) => rec.push_note(
            property,
            r.samples,
            r.restriction.max(r.projection).max(r.attaching),
            cfg.tol_lift,
            Some(format!(
                "restriction {:e}, projection {:e}, attaching {:e}",
                r.restriction, r.projection, r.attaching
            )),
        ),
        Err(e) => rec.push_note(property, 0, f64::INFINITY, cfg.tol_lift, Some(e.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn suite_names_round_trip() {
        for name in Suite::NAMES {
            assert_eq!(name.parse::<Suite>().unwrap().name(), name);
        }
        assert!("Smoothfn".parse::<Suite>().is_err());
    }

    #[test]
    fn grid_hits_both_ends() {
        let g: Vec<f64> = grid(-1.0, 2.0, 7).collect();
        assert_eq!(g.len(), 7);
        assert_eq!((g[0], g[6]), (-1.0, 2.0));
        assert_eq!(g[2], 0.0);
    }

    #[test]
    fn validate_rejects_bad_configs() {
        assert!(RunConfig::default().validate().is_ok());
        for cfg in [
            RunConfig { tol_rt: 0.0, ..RunConfig::default() },
            RunConfig { tol_fd: f64::NAN, ..RunConfig::default() },
            RunConfig { fd_order: 0, ..RunConfig::default() },
            RunConfig { samples: Some(0), ..RunConfig::default() },
        ] {
            assert!(matches!(cfg.validate(), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn report_is_sorted_and_text_follows_json() {
        let cfg = RunConfig {
            samples: Some(200),
            ..RunConfig::default()
        };
        let r = run(Suite::Diskmodel, &cfg).unwrap();
        let names: Vec<&str> = r.properties.iter().map(|p| p.property.as_str()).collect();
        let mut sorted = names.clone();
        sorted.sort_unstable();
        assert_eq!(names, sorted);
        let text = r.to_text();
        assert_eq!(text.lines().count(), names.len() + 1);
        assert!(text.lines().last().unwrap().starts_with("PASS suite diskmodel"));
    }

    #[test]
    fn property_streams_do_not_depend_on_suite_order() {
        let cfg = RunConfig {
            samples: Some(100),
            ..RunConfig::default()
        };
        let alone = run(Suite::Homotopy, &cfg).unwrap();
        let all = run(Suite::All, &cfg).unwrap();
        for p in &alone.properties {
            assert_eq!(all.property("homotopy", &p.property), Some(p));
        }
    }

    #[test]
    fn non_finite_deviation_serializes_as_null() {
        let r = Report {
            suite: "x".into(),
            seed: 0,
            pass: false,
            properties: vec![PropertyResult {
                suite: "x".into(),
                property: "p".into(),
                samples: 0,
                worst_dev: f64::INFINITY,
                tol: 1.0,
                pass: false,
                note: None,
            }],
        };
        assert!(r.to_json().contains("\"worst_dev\": null"));
        assert!(r.to_text().starts_with("FAIL x/p worst_dev=null"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn plans_build_in_any_dependency_order(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let plan = ComplexPlan::random(&mut rng, 12);
            let order = plan.shuffled_order(&mut rng);
            let cx = plan.build(&order).unwrap();
            prop_assert_eq!(cx.len(), plan.cells.len());
            let a = homotopy::path_components(&cx).unwrap();
            prop_assert_eq!(a, homotopy::path_components_bruteforce(&cx, 16).unwrap());
        }
    }
}
