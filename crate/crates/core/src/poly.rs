//! Real polynomials with coefficients stored in ascending powers.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn one() -> Self {
        Poly(vec![1.0])
    }

    /// Π (x − rᵢ)
    pub fn from_roots(roots: &[f64]) -> Self {
        roots.iter().fold(Poly::one(), |acc, &r| acc.mul(&Poly(vec![-r, 1.0])))
    }

    pub fn degree(&self) -> usize {
        self.0.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.0.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Self {
        if self.0.len() <= 1 {
            return Poly(vec![0.0]);
        }
        Poly(self.0.iter().enumerate().skip(1).map(|(i, &c)| i as f64 * c).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        Poly(
            (0..n)
                .map(|i| self.0.get(i).copied().unwrap_or(0.0) + other.0.get(i).copied().unwrap_or(0.0))
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly(self.0.iter().map(|c| c * s).collect())
    }

    /// All complex roots, by Aberth–Ehrlich iteration followed by Newton polishing.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        let deg = self.degree();
        if deg == 0 {
            return Ok(Vec::new());
        }
        let lead = self.0[deg];
        let monic: Vec<f64> = self.0[..=deg].iter().map(|c| c / lead).collect();
        let p = Poly(monic);
        let dp = p.derivative();

        // Cauchy bound for the initial circle
        let radius = 1.0 + p.0[..deg].iter().map(|c| c.abs()).fold(0.0, f64::max);
        let mut z: Vec<Complex64> = (0..deg)
            .map(|k| Complex64::from_polar(0.5 * radius, 0.4 + 2.0 * std::f64::consts::PI * k as f64 / deg as f64))
            .collect();

        let mut converged = false;
        for _ in 0..500 {
            let mut max_step: f64 = 0.0;
            for k in 0..deg {
                let pk = p.eval_complex(z[k]);
                let dk = dp.eval_complex(z[k]);
                if pk.norm() == 0.0 {
                    continue;
                }
                let ratio = pk / dk;
                let repulsion: Complex64 = (0..deg)
                    .filter(|&j| j != k)
                    .map(|j| 1.0 / (z[k] - z[j]))
                    .sum();
                let step = ratio / (1.0 - ratio * repulsion);
                z[k] -= step;
                max_step = max_step.max(step.norm() / (1.0 + z[k].norm()));
            }
            if max_step < 1e-15 {
                converged = true;
                break;
            }
        }
        for zk in z.iter_mut() {
            for _ in 0..3 {
                let d = dp.eval_complex(*zk);
                if d.norm() == 0.0 {
                    break;
                }
                *zk -= p.eval_complex(*zk) / d;
            }
        }
        if !converged && z.iter().any(|zk| p.eval_complex(*zk).norm() > 1e-8 * (1.0 + zk.norm()).powi(deg as i32)) {
            return Err(Error::Factorization("polynomial root iteration did not converge".into()));
        }
        Ok(z)
    }
}
