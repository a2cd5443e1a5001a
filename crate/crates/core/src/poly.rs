//! Real polynomials and piecewise-polynomial densities with closed-form
//! integrals.

use serde::Serialize;

use crate::error::{Error, Result};

/// `c_0 + c_1 s + c_2 s^2 + ...` in the absolute variable `s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Polynomial { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }

    fn antiderivative_at(&self, s: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            acc = acc * s + c / (k + 1) as f64;
        }
        acc * s
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() == 1 {
            return Polynomial::constant(0.0);
        }
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    /// `int_a^b p(s) ds`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.antiderivative_at(b) - self.antiderivative_at(a)
    }

    /// Real roots in the open interval `(a, b)`, ascending. Roots of
    /// multiplicity above one are reported once.
    pub fn roots_in(&self, a: f64, b: f64) -> Vec<f64> {
        if self.is_zero() || self.degree() == 0 || a >= b {
            return Vec::new();
        }
        if self.degree() == 1 {
            let r = -self.coeffs[0] / self.coeffs[1];
            return if r > a && r < b { vec![r] } else { Vec::new() };
        }
        // Between consecutive critical points p is monotone, so each such
        // segment holds at most one sign change.
        let mut marks = vec![a];
        marks.extend(self.derivative().roots_in(a, b));
        marks.push(b);
        let mut roots: Vec<f64> = Vec::new();
        for w in marks.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let (flo, fhi) = (self.eval(lo), self.eval(hi));
            if flo == 0.0 {
                if lo > a && roots.last() != Some(&lo) {
                    roots.push(lo);
                }
                continue;
            }
            if fhi == 0.0 {
                if hi < b {
                    roots.push(hi);
                }
                continue;
            }
            if flo.signum() != fhi.signum() {
                roots.push(bisect(|s| self.eval(s), lo, hi, flo));
            }
        }
        roots.dedup();
        roots
    }

    /// `int_a^b |p(s)| ds`, split at sign changes.
    pub fn abs_integral(&self, a: f64, b: f64) -> f64 {
        let mut marks = vec![a];
        marks.extend(self.roots_in(a, b));
        marks.push(b);
        marks
            .windows(2)
            .map(|w| self.integral(w[0], w[1]).abs())
            .sum()
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut flo: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// One polynomial piece supported on `[from, to]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolyPiece {
    pub from: f64,
    pub to: f64,
    pub poly: Polynomial,
}

/// A density that is polynomial on each of finitely many disjoint pieces
/// and zero elsewhere.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct PiecewisePoly {
    pieces: Vec<PolyPiece>,
}

impl PiecewisePoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64, from: f64, to: f64) -> Result<Self> {
        Self::new(vec![PolyPiece {
            from,
            to,
            poly: Polynomial::constant(c),
        }])
    }

    /// Pieces are sorted; overlapping or inverted pieces are rejected.
    pub fn new(mut pieces: Vec<PolyPiece>) -> Result<Self> {
        for pc in &pieces {
            if !(pc.from.is_finite() && pc.to.is_finite() && pc.from < pc.to) {
                return Err(Error::config(format!(
                    "density piece [{}, {}] is empty or not finite",
                    pc.from, pc.to
                )));
            }
            if pc.poly.coeffs().iter().any(|c| !c.is_finite()) {
                return Err(Error::config("density coefficients must be finite"));
            }
        }
        pieces.sort_by(|a, b| a.from.total_cmp(&b.from));
        if pieces.windows(2).any(|w| w[0].to > w[1].from) {
            return Err(Error::config("density pieces overlap"));
        }
        pieces.retain(|p| !p.poly.is_zero());
        Ok(PiecewisePoly { pieces })
    }

    pub fn pieces(&self) -> &[PolyPiece] {
        &self.pieces
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Piece boundaries, for grid alignment.
    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.pieces.iter().flat_map(|p| [p.from, p.to])
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        Some((self.pieces.first()?.from, self.pieces.last()?.to))
    }

    /// Density on the open interval `(a, b)`, taken from the piece that
    /// contains its midpoint; both endpoint values come from that piece so
    /// jumps at breakpoints are resolved from the inside.
    pub fn on_interval(&self, a: f64, b: f64) -> Option<&Polynomial> {
        let mid = 0.5 * (a + b);
        self.pieces
            .iter()
            .find(|p| p.from <= mid && mid <= p.to)
            .map(|p| &p.poly)
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.pieces
            .iter()
            .find(|p| p.from <= s && s <= p.to)
            .map_or(0.0, |p| p.poly.eval(s))
    }

    pub fn integral(&self) -> f64 {
        self.pieces.iter().map(|p| p.poly.integral(p.from, p.to)).sum()
    }

    pub fn abs_integral(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.poly.abs_integral(p.from, p.to))
            .sum()
    }

    /// Minimum over the support, sampled at piece ends and critical points.
    pub fn min_value(&self) -> f64 {
        let mut m = f64::INFINITY;
        for p in &self.pieces {
            let mut cands = vec![p.from, p.to];
            cands.extend(p.poly.derivative().roots_in(p.from, p.to));
            for s in cands {
                m = m.min(p.poly.eval(s));
            }
        }
        m
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        PiecewisePoly {
            pieces: self
                .pieces
                .iter()
                .map(|p| PolyPiece {
                    from: p.from,
                    to: p.to,
                    poly: Polynomial::new(p.poly.coeffs().iter().map(|c| c * lambda).collect()),
                })
                .collect(),
        }
    }
}
