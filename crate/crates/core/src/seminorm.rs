//! Sequence-space seminorms `[x]_n` and the time-weighted trajectory
//! seminorms `P_p`, `Q_p`, `R_p` used to measure convergence and to
//! describe the invariant balls of the existence argument.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Trajectory;

/// `[x]_n = max_{1 <= i <= n} |x_i|`.
pub fn seminorm_bracket(x: &[f64], n: usize) -> Result<f64> {
    if n == 0 || n > x.len() {
        return Err(Error::Index {
            index: n,
            len: x.len(),
        });
    }
    Ok(bracket_unchecked(x, n))
}

#[inline]
pub(crate) fn bracket_unchecked(x: &[f64], n: usize) -> f64 {
    x[..n].iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// The sequences `(n_p)`, `(t_p)` and weights `(theta_p)`, `p = 1..P`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeminormConfig {
    n_seq: Vec<usize>,
    t_seq: Vec<f64>,
    theta: Vec<f64>,
}

impl SeminormConfig {
    /// Validates monotonicity and positivity. `t0` is the nonlocal horizon;
    /// every `t_p` must exceed it.
    pub fn new(n_seq: Vec<usize>, t_seq: Vec<f64>, theta: Vec<f64>, t0: f64) -> Result<Self> {
        if n_seq.is_empty() {
            return Err(Error::config("seminorm config needs at least one p"));
        }
        if n_seq.len() != t_seq.len() || n_seq.len() != theta.len() {
            return Err(Error::config(format!(
                "seminorm sequences differ in length: n_seq {}, t_seq {}, theta {}",
                n_seq.len(),
                t_seq.len(),
                theta.len()
            )));
        }
        if n_seq[0] == 0 || n_seq.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("n_seq must be strictly increasing positive integers"));
        }
        if !t_seq.iter().all(|t| t.is_finite()) || t_seq[0] <= t0 || t_seq.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(format!(
                "t_seq must be strictly increasing with t_1 > t0 = {t0}"
            )));
        }
        if let Some(p) = theta.iter().position(|th| !(th.is_finite() && *th > 0.0)) {
            return Err(Error::config(format!("theta_{} must be positive", p + 1)));
        }
        Ok(SeminormConfig { n_seq, t_seq, theta })
    }

    /// `n_p = p`, `t_p = t0 + p (t_max - t0) / P`, `theta_p = 1`.
    pub fn default_rule(count: usize, t0: f64, t_max: f64) -> Result<Self> {
        let n_seq = (1..=count).collect();
        let t_seq = (1..=count)
            .map(|p| {
                if p == count {
                    t_max
                } else {
                    t0 + p as f64 * (t_max - t0) / count as f64
                }
            })
            .collect();
        Self::new(n_seq, t_seq, vec![1.0; count], t0)
    }

    pub fn len(&self) -> usize {
        self.n_seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_seq.is_empty()
    }

    /// `n_p` for one-based `p`.
    pub fn n(&self, p: usize) -> usize {
        self.n_seq[p - 1]
    }

    pub fn t(&self, p: usize) -> f64 {
        self.t_seq[p - 1]
    }

    pub fn theta(&self, p: usize) -> f64 {
        self.theta[p - 1]
    }

    pub fn n_seq(&self) -> &[usize] {
        &self.n_seq
    }

    pub fn t_seq(&self) -> &[f64] {
        &self.t_seq
    }

    pub fn thetas(&self) -> &[f64] {
        &self.theta
    }

    pub fn with_thetas(&self, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != self.len() {
            return Err(Error::config(format!(
                "expected {} theta values, got {}",
                self.len(),
                theta.len()
            )));
        }
        if let Some(p) = theta.iter().position(|th| !(th.is_finite() && *th > 0.0)) {
            return Err(Error::config(format!("theta_{} must be positive", p + 1)));
        }
        Ok(SeminormConfig {
            theta,
            ..self.clone()
        })
    }

    /// Every `n_p` replaced by `min(n_p, cap)`; duplicates are kept so
    /// that `p` indices still line up.
    pub(crate) fn capped_n(&self, cap: usize) -> Vec<usize> {
        self.n_seq.iter().map(|&n| n.min(cap)).collect()
    }
}

/// Values of the three seminorms for one `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeminormTriple {
    pub p: usize,
    #[serde(rename = "P")]
    pub p_value: f64,
    #[serde(rename = "Q")]
    pub q_value: f64,
    #[serde(rename = "R")]
    pub r_value: f64,
}

/// `P_p = max_{[0,t0]} [x]_{n_p}`, `Q_p = max_{[t0,t_p]} e^{-theta_p (t-t0)} [x]_{n_p}`
/// and `R_p = max(P_p, Q_p)`, all taken over grid nodes.
pub fn evaluate_seminorms(x: &Trajectory, cfg: &SeminormConfig, t0: f64) -> Result<Vec<SeminormTriple>> {
    if let Some(&n) = cfg.n_seq().iter().find(|&&n| n > x.n_components()) {
        return Err(Error::config(format!(
            "seminorm index n_p = {n} exceeds the {} trajectory components",
            x.n_components()
        )));
    }
    seminorms_with(x, cfg.n_seq(), cfg, t0)
}

pub(crate) fn seminorms_with(
    x: &Trajectory,
    n_seq: &[usize],
    cfg: &SeminormConfig,
    t0: f64,
) -> Result<Vec<SeminormTriple>> {
    let grid = x.grid();
    let i0 = grid.require_node(t0, "t0")?;
    let nodes = grid.nodes();
    let mut out = Vec::with_capacity(n_seq.len());
    for (idx, &n) in n_seq.iter().enumerate() {
        let p = idx + 1;
        let tp = cfg.t(p);
        if tp > grid.t_max() * (1.0 + 1e-12) {
            return Err(Error::config(format!(
                "t_{p} = {tp} exceeds the grid horizon {}",
                grid.t_max()
            )));
        }
        let theta = cfg.theta(p);
        let p_value = (0..=i0).fold(0.0f64, |m, i| m.max(bracket_unchecked(x.row(i), n)));
        let mut q_value = 0.0f64;
        for (i, &s) in nodes.iter().enumerate().skip(i0) {
            if s > tp * (1.0 + 1e-12) {
                break;
            }
            let w = (-theta * (s - t0)).exp();
            q_value = q_value.max(w * bracket_unchecked(x.row(i), n));
        }
        out.push(SeminormTriple {
            p,
            p_value,
            q_value,
            r_value: p_value.max(q_value),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::grid::Grid;

    #[test]
    fn bracket_examples() {
        let x = [3.0, -5.0, 2.0];
        assert_eq!(seminorm_bracket(&x, 1).unwrap(), 3.0);
        assert_eq!(seminorm_bracket(&x, 2).unwrap(), 5.0);
        assert_eq!(seminorm_bracket(&[0.0; 3], 3).unwrap(), 0.0);
        assert!(matches!(seminorm_bracket(&x, 4), Err(Error::Index { .. })));
        assert!(seminorm_bracket(&x, 0).is_err());
    }

    #[test]
    fn zero_and_constant_trajectories() {
        let g = Arc::new(Grid::uniform(3.0, 0.01).unwrap());
        let cfg = SeminormConfig::new(vec![1, 2], vec![2.0, 3.0], vec![0.7, 4.0], 1.0).unwrap();
        let zero = Trajectory::zeros(Arc::clone(&g), 2);
        for s in evaluate_seminorms(&zero, &cfg, 1.0).unwrap() {
            assert_eq!((s.p_value, s.q_value, s.r_value), (0.0, 0.0, 0.0));
        }
        let c = Trajectory::from_fn(g, 2, |_, _| 2.5).unwrap();
        for s in evaluate_seminorms(&c, &cfg, 1.0).unwrap() {
            assert_eq!((s.p_value, s.q_value, s.r_value), (2.5, 2.5, 2.5));
        }
    }

    #[test]
    fn linear_ramp_matches_brute_force_scan() {
        // Independent oracle: scan every node of [t0, t_1] directly.
        let g = Arc::new(Grid::uniform(2.0, 1e-3).unwrap());
        let x = Trajectory::from_fn(Arc::clone(&g), 1, |t, _| t).unwrap();
        let cfg = SeminormConfig::new(vec![1], vec![2.0], vec![1.0], 1.0).unwrap();
        let s = evaluate_seminorms(&x, &cfg, 1.0).unwrap()[0];
        let mut brute = 0.0f64;
        for k in 1000..=2000 {
            let t = k as f64 * 1e-3;
            brute = brute.max(t * (-(t - 1.0)).exp());
        }
        assert_eq!(s.p_value, 1.0);
        assert!((s.q_value - brute).abs() < 1e-15);
        // t e^{-(t-1)} is decreasing for t > 1, so the max sits at t0.
        assert!((s.q_value - 1.0).abs() < 1e-15);
        assert_eq!(s.r_value, s.p_value.max(s.q_value));
    }

    #[test]
    fn rejects_n_beyond_components() {
        let g = Arc::new(Grid::uniform(2.0, 0.1).unwrap());
        let x = Trajectory::zeros(g, 1);
        let cfg = SeminormConfig::new(vec![2], vec![2.0], vec![1.0], 1.0).unwrap();
        assert!(matches!(evaluate_seminorms(&x, &cfg, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn config_validation() {
        assert!(SeminormConfig::new(vec![2, 1], vec![2.0, 3.0], vec![1.0; 2], 1.0).is_err());
        assert!(SeminormConfig::new(vec![1, 2], vec![1.0, 3.0], vec![1.0; 2], 1.0).is_err());
        assert!(SeminormConfig::new(vec![1], vec![2.0], vec![0.0], 1.0).is_err());
        let d = SeminormConfig::default_rule(4, 1.0, 2.0).unwrap();
        assert_eq!(d.n_seq(), &[1, 2, 3, 4]);
        assert_eq!(d.t_seq(), &[1.25, 1.5, 1.75, 2.0]);
    }
}
