//! Continuous linear functionals on `C[0, t0]` in Stieltjes form: finitely
//! many point masses plus a piecewise-polynomial density,
//!
//! ```text
//! <alpha, v> = sum_k eta_k v(t_k) + int_0^t0 v(s) w(s) ds.
//! ```

use serde::Serialize;

use crate::dsl::{Env, Expr, Params};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::poly::{PiecewisePoly, PolyPiece, Polynomial};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointMass {
    pub t: f64,
    #[serde(rename = "w")]
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StieltjesFunctional {
    t0: f64,
    point_masses: Vec<PointMass>,
    density: PiecewisePoly,
}

impl StieltjesFunctional {
    pub fn new(t0: f64, point_masses: Vec<PointMass>, density: PiecewisePoly) -> Result<Self> {
        if !(t0.is_finite() && t0 > 0.0) {
            return Err(Error::config(format!("t0 must be positive, got {t0}")));
        }
        for m in &point_masses {
            if !m.weight.is_finite() || !(0.0..=t0).contains(&m.t) {
                return Err(Error::config(format!(
                    "point mass ({}, {}) must have finite weight and lie in [0, {t0}]",
                    m.t, m.weight
                )));
            }
        }
        if let Some((a, b)) = density.support() {
            if a < 0.0 || b > t0 {
                return Err(Error::config(format!(
                    "density support [{a}, {b}] leaves [0, {t0}]"
                )));
            }
        }
        Ok(StieltjesFunctional {
            t0,
            point_masses,
            density,
        })
    }

    pub fn zero(t0: f64) -> Result<Self> {
        Self::new(t0, Vec::new(), PiecewisePoly::zero())
    }

    pub fn point_mass(t0: f64, t: f64, weight: f64) -> Result<Self> {
        Self::new(t0, vec![PointMass { t, weight }], PiecewisePoly::zero())
    }

    /// Density `c` on the whole of `[0, t0]`.
    pub fn constant_density(t0: f64, c: f64) -> Result<Self> {
        Self::new(t0, Vec::new(), PiecewisePoly::constant(c, 0.0, t0)?)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn point_masses(&self) -> &[PointMass] {
        &self.point_masses
    }

    pub fn density(&self) -> &PiecewisePoly {
        &self.density
    }

    /// Abscissae that must be grid nodes for exact evaluation.
    pub fn required_nodes(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.point_masses.iter().map(|m| m.t).collect();
        v.extend(self.density.breakpoints());
        v
    }

    /// `<alpha, 1>`, with the density integrated in closed form.
    pub fn one_value(&self) -> f64 {
        self.point_masses.iter().map(|m| m.weight).sum::<f64>() + self.density.integral()
    }

    /// Norm in the dual of `C[0, t0]`: total variation of the representing
    /// measure, `sum |eta_k| + int |w|`.
    pub fn dual_norm(&self) -> f64 {
        self.point_masses.iter().map(|m| m.weight.abs()).sum::<f64>() + self.density.abs_integral()
    }

    /// Quadrature weights on the nodes of `grid` up to `t0`.
    pub fn discretize(&self, grid: &Grid) -> Result<DiscreteFunctional> {
        let i0 = grid.require_node(self.t0, "t0")?;
        let nodes = grid.nodes();
        let mut weights = vec![0.0; i0 + 1];
        for m in &self.point_masses {
            let i = grid.require_node(m.t, "point-mass abscissa")?;
            weights[i] += m.weight;
        }
        for b in self.density.breakpoints() {
            grid.require_node(b, "density breakpoint")?;
        }
        if !self.density.is_zero() {
            for i in 0..i0 {
                let (a, b) = (nodes[i], nodes[i + 1]);
                if let Some(w) = self.density.on_interval(a, b) {
                    let half = 0.5 * (b - a);
                    weights[i] += half * w.eval(a);
                    weights[i + 1] += half * w.eval(b);
                }
            }
        }
        Ok(DiscreteFunctional { weights })
    }

    /// `<alpha, v>` for `v` sampled on the nodes of `grid` (at least up to
    /// `t0`); the density part uses the composite trapezoidal rule.
    pub fn apply(&self, grid: &Grid, v: &[f64]) -> Result<f64> {
        self.discretize(grid)?.apply(v)
    }
}

/// A functional reduced to node weights on a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteFunctional {
    weights: Vec<f64>,
}

impl DiscreteFunctional {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn apply(&self, v: &[f64]) -> Result<f64> {
        if v.len() < self.weights.len() {
            return Err(Error::Index {
                index: self.weights.len(),
                len: v.len(),
            });
        }
        Ok(self.apply_strided(v, 1, 0))
    }

    /// Applies to component `offset` of row-major data with `stride` columns.
    pub(crate) fn apply_strided(&self, values: &[f64], stride: usize, offset: usize) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * values[i * stride + offset])
            .sum()
    }
}

/// A point mass whose abscissa and weight are expressions in `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassRule {
    pub t: Expr,
    pub weight: Expr,
}

/// A density piece whose bounds and coefficients are expressions in `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PieceRule {
    pub from: Expr,
    pub to: Expr,
    pub coeffs: Vec<Expr>,
}

/// Closed-form rule producing `alpha_n` for every index `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalGenerator {
    pub masses: Vec<MassRule>,
    pub pieces: Vec<PieceRule>,
    pub params: Params,
}

impl FunctionalGenerator {
    pub fn generate(&self, n: usize, t0: f64) -> Result<StieltjesFunctional> {
        let env = Env::new(&self.params).with_n(n as f64).with_t(0.0);
        let eval = |e: &Expr| -> Result<f64> { Ok(e.eval(&env)?) };
        let masses = self
            .masses
            .iter()
            .map(|m| {
                Ok(PointMass {
                    t: eval(&m.t)?,
                    weight: eval(&m.weight)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let pieces = self
            .pieces
            .iter()
            .map(|pc| {
                Ok(PolyPiece {
                    from: eval(&pc.from)?,
                    to: eval(&pc.to)?,
                    poly: Polynomial::new(pc.coeffs.iter().map(eval).collect::<Result<_>>()?),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        StieltjesFunctional::new(t0, masses, PiecewisePoly::new(pieces)?)
    }
}

/// How `alpha_n` is obtained beyond the explicitly listed functionals.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionalTail {
    /// No functionals beyond the list.
    None,
    /// `alpha_n = alpha_N` for `n > N` (finite-system padding).
    RepeatLast,
    Generator(FunctionalGenerator),
}

/// The family `(alpha_n)_{n >= 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalFamily {
    t0: f64,
    listed: Vec<StieltjesFunctional>,
    tail: FunctionalTail,
}

impl FunctionalFamily {
    pub fn new(t0: f64, listed: Vec<StieltjesFunctional>, tail: FunctionalTail) -> Result<Self> {
        if let Some(f) = listed.iter().find(|f| f.t0 != t0) {
            return Err(Error::config(format!(
                "functional defined on [0, {}] but t0 = {t0}",
                f.t0
            )));
        }
        if listed.is_empty() && matches!(tail, FunctionalTail::RepeatLast) {
            return Err(Error::config("padding requires at least one functional"));
        }
        Ok(FunctionalFamily { t0, listed, tail })
    }

    pub fn listed(t0: f64, listed: Vec<StieltjesFunctional>) -> Result<Self> {
        Self::new(t0, listed, FunctionalTail::None)
    }

    pub fn generated(t0: f64, generator: FunctionalGenerator) -> Result<Self> {
        Self::new(t0, Vec::new(), FunctionalTail::Generator(generator))
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn listed_len(&self) -> usize {
        self.listed.len()
    }

    pub fn tail(&self) -> &FunctionalTail {
        &self.tail
    }

    /// `alpha_n`, one-based.
    pub fn get(&self, n: usize) -> Result<StieltjesFunctional> {
        if n == 0 {
            return Err(Error::Index { index: 0, len: self.listed.len() });
        }
        if n <= self.listed.len() {
            return Ok(self.listed[n - 1].clone());
        }
        match &self.tail {
            FunctionalTail::None => Err(Error::config(format!(
                "no functional for component {n}: only {} listed and no generator",
                self.listed.len()
            ))),
            FunctionalTail::RepeatLast => Ok(self.listed.last().cloned().expect("non-empty")),
            FunctionalTail::Generator(g) => g.generate(n, self.t0),
        }
    }

    /// `alpha_1, ..., alpha_n`.
    pub fn first(&self, n: usize) -> Result<Vec<StieltjesFunctional>> {
        (1..=n).map(|k| self.get(k)).collect()
    }

    /// The family with every component beyond the first `n` equal to `alpha_n`.
    pub fn padded(&self, n: usize) -> Result<Self> {
        Self::new(self.t0, self.first(n)?, FunctionalTail::RepeatLast)
    }
}
