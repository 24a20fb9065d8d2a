//! JSON lifting instances.
//!
//! A complex is `{"base": <space>|null, "cells": [{"dim": n, "attach": [...]}]}`.
//! Attaching maps are piecewise: each piece has an optional `when` expression
//! (the piece applies where it is `>= 0`; first match wins), a `target`
//! (`"base"` or `{"cell": i}`) and coordinate expressions in `x1..xn`.
//!
//! Maps on the complex are given per locus: `base` expressions in `a1..am`,
//! and one list per cell in `w1..w{n+1}`. Homotopies add the variable `t`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diffeology::{DiffSpace, Point, PointFn, SpaceSpec};
use crate::diskmodel::{DiskPoint, SpherePoint};
use crate::error::{Error, Result};
use crate::expr::{Expr, ExprVec};
use crate::homotopy::{Homotopy, ParamKind};
use crate::lifting::{
    self, AttachFn, CellComplex, ChepReport, ComplexMap, ComplexPoint, Fibration, LiftConfig,
};

/// Names of the instances shipped with the crate.
pub const BUNDLED: &[&str] = &["chep_d1_demo", "chep_base_only", "chep_incompatible"];

/// Source text of a bundled instance.
pub fn bundled(name: &str) -> Option<&'static str> {
    match name {
        "chep_d1_demo" => Some(include_str!("../instances/chep_d1_demo.json")),
        "chep_base_only" => Some(include_str!("../instances/chep_base_only.json")),
        "chep_incompatible" => Some(include_str!("../instances/chep_incompatible.json")),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetSpec {
    Base,
    Cell(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttachPiece {
    #[serde(default)]
    pub when: Option<String>,
    pub target: TargetSpec,
    #[serde(default)]
    pub coords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub dim: usize,
    #[serde(default)]
    pub attach: Vec<AttachPiece>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexSpec {
    #[serde(default)]
    pub base: Option<SpaceSpec>,
    pub cells: Vec<CellSpec>,
}

/// Expressions for a map on a complex, one list per locus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellwiseSpec {
    #[serde(default)]
    pub base: Vec<String>,
    #[serde(default)]
    pub cells: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FibrationSpec {
    Product { base: SpaceSpec, fiber: SpaceSpec },
    Point { total: SpaceSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChepSpec {
    pub name: String,
    pub fibration: FibrationSpec,
    pub complex: ComplexSpec,
    pub f: CellwiseSpec,
    /// Homotopy on the base, in `a1..am` and `t`.
    pub h: Vec<String>,
    pub k: CellwiseSpec,
}

/// A parsed, evaluable covering-homotopy instance.
#[derive(Clone)]
pub struct ChepInstance {
    pub name: String,
    pub fibration: Fibration,
    pub complex: CellComplex,
    pub f: ComplexMap,
    pub h: Homotopy<Point, Point>,
    pub k: Homotopy<ComplexPoint, Point>,
}

fn base_dim(complex: &CellComplex) -> usize {
    complex.base().and_then(DiffSpace::flat_dim).unwrap_or(0)
}

fn with_time(mut vars: Vec<String>) -> Vec<String> {
    vars.push("t".into());
    vars
}

struct Piece {
    when: Option<Expr>,
    target: TargetSpec,
    coords: ExprVec,
}

fn attach_fn(cell: usize, dim: usize, pieces: &[AttachPiece], base: Option<&DiffSpace>) -> Result<AttachFn> {
    let vars = ExprVec::indexed_vars("x", dim);
    let parsed: Vec<Piece> = pieces
        .iter()
        .map(|p| {
            Ok(Piece {
                when: p.when.as_deref().map(|w| Expr::parse(w, &vars)).transpose()?,
                target: p.target.clone(),
                coords: ExprVec::parse(&p.coords, &vars)?,
            })
        })
        .collect::<Result<_>>()?;
    let base = base.cloned();
    Ok(Arc::new(move |v: &SpherePoint| {
        let x = v.coords();
        let piece = parsed
            .iter()
            .find(|p| p.when.as_ref().is_none_or(|w| w.eval(x) >= 0.0))
            .ok_or_else(|| Error::domain(format!("no attaching piece of cell {cell} covers {x:?}")))?;
        let c = piece.coords.eval(x)?;
        match piece.target {
            TargetSpec::Base => {
                let b = base.as_ref().ok_or_else(|| Error::domain("attaching into a missing base"))?;
                Ok(ComplexPoint::Base(b.point_from_flat(&c)?))
            }
            TargetSpec::Cell(i) => Ok(ComplexPoint::cell(i, DiskPoint::new(c)?)),
        }
    }))
}

impl ComplexSpec {
    pub fn build(&self) -> Result<CellComplex> {
        let base = self.base.as_ref().map(SpaceSpec::build).transpose()?;
        let mut complex = CellComplex::new(base.clone());
        for (i, cell) in self.cells.iter().enumerate() {
            let attach = if cell.dim == 0 {
                if !cell.attach.is_empty() {
                    return Err(Error::Parse(format!("cell {i} is a 0-cell with an attaching map")));
                }
                None
            } else {
                Some(attach_fn(i, cell.dim, &cell.attach, base.as_ref())?)
            };
            complex = complex.attach(cell.dim, attach)?;
        }
        Ok(complex)
    }
}

/// Per-locus expressions, compiled against a complex.
struct Cellwise {
    base: ExprVec,
    cells: Vec<ExprVec>,
}

impl Cellwise {
    fn compile(spec: &CellwiseSpec, complex: &CellComplex, time: bool, what: &str) -> Result<Self> {
        if spec.cells.len() != complex.len() {
            return Err(Error::Parse(format!(
                "{what} lists {} cells, the complex has {}",
                spec.cells.len(),
                complex.len()
            )));
        }
        let vars = |v: Vec<String>| if time { with_time(v) } else { v };
        let base = ExprVec::parse(&spec.base, &vars(ExprVec::indexed_vars("a", base_dim(complex))))?;
        let cells = spec
            .cells
            .iter()
            .zip(complex.cells())
            .map(|(e, c)| ExprVec::parse(e, &vars(ExprVec::indexed_vars("w", c.dim + 1))))
            .collect::<Result<_>>()?;
        Ok(Self { base, cells })
    }

    fn eval(&self, x: &ComplexPoint, t: Option<f64>) -> Result<Vec<f64>> {
        let mut vals = match x {
            ComplexPoint::Base(a) => a.flatten(),
            ComplexPoint::Cell { point, .. } => point.coords().to_vec(),
        };
        vals.extend(t);
        match x {
            ComplexPoint::Base(_) => self.base.eval(&vals),
            ComplexPoint::Cell { index, .. } => self.cells[*index].eval(&vals),
        }
    }
}

impl ChepSpec {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn build(&self) -> Result<ChepInstance> {
        let fibration = match &self.fibration {
            FibrationSpec::Product { base, fiber } => lifting::product_fibration(&base.build()?, &fiber.build()?),
            FibrationSpec::Point { total } => lifting::point_fibration(&total.build()?),
        };
        let complex = self.complex.build()?;

        let f_exprs = Cellwise::compile(&self.f, &complex, false, "f")?;
        let (cx, total) = (complex.clone(), fibration.total.clone());
        let f: ComplexMap = Arc::new(move |x: &ComplexPoint| {
            let x = cx.canonicalize(x)?;
            total.point_from_flat(&f_exprs.eval(&x, None)?)
        });

        let h_exprs = ExprVec::parse(&self.h, &with_time(ExprVec::indexed_vars("a", base_dim(&complex))))?;
        let total = fibration.total.clone();
        let h = Homotopy::new(ParamKind::ITilde, move |a: &Point, t: f64| {
            let mut vals = a.flatten();
            vals.push(t);
            total.point_from_flat(&h_exprs.eval(&vals)?)
        });

        let k_exprs = Cellwise::compile(&self.k, &complex, true, "k")?;
        let (cx, base) = (complex.clone(), fibration.base.clone());
        let k = Homotopy::new(ParamKind::ITilde, move |x: &ComplexPoint, t: f64| {
            let x = cx.canonicalize(x)?;
            base.point_from_flat(&k_exprs.eval(&x, Some(t))?)
        });

        Ok(ChepInstance {
            name: self.name.clone(),
            fibration,
            complex,
            f,
            h,
            k,
        })
    }
}

impl ChepInstance {
    /// Loads a bundled instance by name, or parses `text` as JSON.
    pub fn load(name_or_text: &str) -> Result<Self> {
        let text = bundled(name_or_text).unwrap_or(name_or_text);
        ChepSpec::parse(text)?.build()
    }

    /// Runs [`lifting::chep`] and checks the result on a sample grid.
    pub fn run(&self, cfg: &LiftConfig) -> Result<(Homotopy<ComplexPoint, Point>, ChepReport)> {
        let big_h = lifting::chep(&self.fibration, &self.complex, self.f.clone(), &self.h, &self.k, cfg)?;
        let report = lifting::verify_chep(
            &self.fibration,
            &self.complex,
            &self.f,
            &self.h,
            &self.k,
            &big_h,
            cfg,
        )?;
        Ok((big_h, report))
    }
}

/// A point map `A → E` from expressions in `a1..am`.
pub fn point_map(exprs: &[String], source: &DiffSpace, target: &DiffSpace) -> Result<PointFn> {
    let e = ExprVec::parse(exprs, &ExprVec::indexed_vars("a", source.flat_dim().unwrap_or(0)))?;
    let target = target.clone();
    Ok(Arc::new(move |p: &Point| target.point_from_flat(&e.eval(&p.flatten())?)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> LiftConfig {
        LiftConfig::default()
    }

    #[test]
    fn bundled_instances_parse() {
        for name in BUNDLED {
            let spec = ChepSpec::parse(bundled(name).unwrap()).unwrap();
            assert_eq!(&spec.name, name);
            spec.build().unwrap();
        }
    }

    #[test]
    fn demo_satisfies_the_three_equations() {
        let inst = ChepInstance::load("chep_d1_demo").unwrap();
        let (_, report) = inst.run(&cfg()).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn base_only_instance_returns_h() {
        let inst = ChepInstance::load("chep_base_only").unwrap();
        let (big_h, report) = inst.run(&cfg()).unwrap();
        assert!(report.passed(), "{report:?}");
        let a = Point::coords(Vec::new());
        for t in [0.0, 0.3, 1.0] {
            let x = ComplexPoint::Base(a.clone());
            assert_eq!(big_h.eval(&x, t).unwrap(), inst.h.eval(&a, t).unwrap());
        }
    }

    #[test]
    fn incompatible_instance_is_a_precondition_error() {
        let inst = ChepInstance::load("chep_incompatible").unwrap();
        match inst.run(&cfg()) {
            Err(Error::Precondition { what, .. }) => assert!(what.contains("p(h(a,t))"), "{what}"),
            other => panic!("expected a precondition error, got {:?}", other.map(|r| r.1)),
        }
    }

    #[test]
    fn attach_pieces_pick_the_first_match() {
        let inst = ChepInstance::load("chep_d1_demo").unwrap();
        let lo = inst.complex.boundary_image(1, &SpherePoint::new(vec![-1.0]).unwrap()).unwrap();
        let hi = inst.complex.boundary_image(1, &SpherePoint::new(vec![1.0]).unwrap()).unwrap();
        assert!(matches!(lo, ComplexPoint::Base(_)));
        assert_eq!(hi, ComplexPoint::cell(0, DiskPoint::origin()));
    }

    #[test]
    fn malformed_instances_are_parse_errors() {
        assert!(matches!(ChepSpec::parse("{"), Err(Error::Parse(_))));
        let mut spec = ChepSpec::parse(bundled("chep_d1_demo").unwrap()).unwrap();
        spec.f.cells.pop();
        assert!(matches!(spec.build(), Err(Error::Parse(_))));
        let mut spec = ChepSpec::parse(bundled("chep_d1_demo").unwrap()).unwrap();
        spec.k.cells[1][0] = "cos(w9)".into();
        assert!(matches!(spec.build(), Err(Error::Parse(_))));
    }
}
