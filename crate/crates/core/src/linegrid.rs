//! Piecewise-constant calculus on graded line grids.
//!
//! Cells come from a tangent map, dense near each center and algebraically
//! coarsening outward, so a few thousand cells span |x| up to scale*count/pi
//! while resolving unit-scale cores. Multi-center grids are unions of the
//! per-center edge sets.
//!
//! The fractional energy of a cell function u (extended by zero outside the
//! span) is evaluated exactly:
//!
//!   |u|^2 = (1/2 C0) iint (u(x) - u(y))^2 |x-y|^(-1-2s) dx dy,
//!
//! with every cell-pair integral in closed form via second differences of
//! the double antiderivative of |t|^(-1-2s), and the out-of-span tail in
//! closed form as well. No quadrature enters the form itself, so it is
//! exactly homogeneous under joint dilation of grid and function.

use crate::error::{Error, Result};
use crate::gamma::gamma;
use crate::quad::integrate_tol;
use nalgebra::DMatrix;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Normalization tying the squared-difference double integral to the
/// spectral Hs energy: |u|^2_Hs = (difference form) / C0 with
/// C0 = -2 Gamma(-2s) cos(pi s) > 0 for 0 < s < 1/2.
pub fn gagliardo_constant(s: f64) -> f64 {
    assert!(s > 0.0 && s < 0.5, "order out of range: {s}");
    -2.0 * gamma(-2.0 * s) * (PI * s).cos()
}

/// Double antiderivative of |t|^(-1-2s): F2''(t) = |t|^(-1-2s) away from 0.
/// Continuous at 0 because the outer exponent 1-2s is positive.
fn f2(t: f64, s: f64) -> f64 {
    let e = -1.0 - 2.0 * s;
    t.abs().powf(e + 2.0) / ((e + 1.0) * (e + 2.0))
}

/// Exact integral of |x-y|^(-1-2s) over [a,b] x [c,d] for non-overlapping
/// cells (touching is fine); second difference of the double antiderivative.
pub fn riesz_pair_integral(s: f64, a: f64, b: f64, c: f64, d: f64) -> f64 {
    f2(d - a, s) - f2(d - b, s) - f2(c - a, s) + f2(c - b, s)
}

/// A partition of an interval into cells, graded by tangent maps.
#[derive(Debug, Clone)]
pub struct LineGrid {
    /// Strictly increasing cell edges; cell i is [edges[i], edges[i+1]).
    pub edges: Vec<f64>,
    pub mids: Vec<f64>,
    pub widths: Vec<f64>,
}

impl LineGrid {
    fn from_edges(mut edges: Vec<f64>) -> Result<Self> {
        edges.sort_by(|a, b| a.partial_cmp(b).expect("edges must not be NaN"));
        edges.dedup();
        if edges.len() < 2 {
            return Err(Error::BadGrid("need at least one cell".into()));
        }
        let mids = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let widths: Vec<f64> = edges.windows(2).map(|w| w[1] - w[0]).collect();
        if widths.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::BadGrid("degenerate cell".into()));
        }
        Ok(Self { edges, mids, widths })
    }

    /// Cells of one tangent map around `center`: edges at
    /// center + scale * tan(pi (i/resolution - 1/2)), i = 1..resolution-1.
    pub fn tan_cells(center: f64, scale: f64, resolution: usize) -> Result<Self> {
        Self::composite(&[center], scale, resolution)
    }

    /// Union of tangent maps around several centers on a shared scale.
    pub fn composite(centers: &[f64], scale: f64, resolution: usize) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::BadGrid("need at least one center".into()));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::BadGrid(format!("bad scale {scale}")));
        }
        if resolution < 8 {
            return Err(Error::BadGrid(format!("resolution {resolution} too coarse")));
        }
        let mut edges = Vec::with_capacity(centers.len() * (resolution - 1));
        for &c in centers {
            if !c.is_finite() {
                return Err(Error::BadGrid(format!("bad center {c}")));
            }
            for i in 1..resolution {
                let t = PI * (i as f64 / resolution as f64 - 0.5);
                edges.push(c + scale * t.tan());
            }
        }
        Self::from_edges(edges)
    }

    pub fn len(&self) -> usize {
        self.mids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mids.is_empty()
    }

    /// Cell averages of a pointwise function, by adaptive quadrature.
    pub fn cell_averages<F: Fn(f64) -> f64 + Sync>(&self, f: &F) -> Result<Vec<f64>> {
        self.edges
            .par_windows(2)
            .map(|w| {
                let (v, _) = integrate_tol(f, w[0], w[1], 1e-11, 1e-14)?;
                Ok(v / (w[1] - w[0]))
            })
            .collect()
    }

    /// Per-cell integral of the kernel mass beyond the span:
    /// int_cell [ (X_R - x)^(-2s) + (x - X_L)^(-2s) ] dx / (2s), closed form.
    fn tail_mass(&self, s: f64) -> Vec<f64> {
        let (xl, xr) = (self.edges[0], *self.edges.last().expect("nonempty"));
        let q = 1.0 - 2.0 * s;
        let prim = |t: f64| t.powf(q) / q;
        self.edges
            .windows(2)
            .map(|w| {
                let right = prim(xr - w[0]) - prim(xr - w[1]);
                let left = prim(w[1] - xl) - prim(w[0] - xl);
                (right + left) / (2.0 * s)
            })
            .collect()
    }

    /// Exact Hs energy of the zero-extended cell function `u`.
    pub fn gagliardo_energy(&self, u: &[f64], s: f64) -> Result<f64> {
        if u.len() != self.len() {
            return Err(Error::BadGrid(format!(
                "value count {} does not match cell count {}",
                u.len(),
                self.len()
            )));
        }
        let c0 = gagliardo_constant(s);
        let edges = &self.edges;
        let pairs: f64 = (0..self.len())
            .into_par_iter()
            .map(|i| {
                let (a, b) = (edges[i], edges[i + 1]);
                let mut acc = 0.0;
                for j in i + 1..self.len() {
                    let d = u[i] - u[j];
                    if d != 0.0 {
                        acc += d * d * riesz_pair_integral(s, a, b, edges[j], edges[j + 1]);
                    }
                }
                acc
            })
            .sum();
        let tail: f64 = self
            .tail_mass(s)
            .iter()
            .zip(u)
            .map(|(t, &ui)| t * ui * ui)
            .sum();
        Ok((pairs + tail) / c0)
    }

    /// Dense matrix of the same quadratic form: u' A u = gagliardo_energy.
    /// Positive definite (the zero-extension tail sits on the diagonal).
    pub fn hs_form_matrix(&self, s: f64) -> DMatrix<f64> {
        let n = self.len();
        let c0 = gagliardo_constant(s);
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let v = riesz_pair_integral(
                    s,
                    self.edges[i],
                    self.edges[i + 1],
                    self.edges[j],
                    self.edges[j + 1],
                ) / c0;
                a[(i, j)] = -v;
                a[(j, i)] = -v;
            }
        }
        let tail = self.tail_mass(s);
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)]).sum();
            a[(i, i)] = -off + tail[i] / c0;
        }
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_tol;
    use approx::assert_relative_eq;

    #[test]
    fn normalization_constant_closed_form() {
        // At s = 1/4: -2 Gamma(-1/2) cos(pi/4) = 2 sqrt(2 pi).
        let want = 2.0 * (2.0 * PI).sqrt();
        assert_relative_eq!(gagliardo_constant(0.25), want, max_relative = 1e-12);
        for &s in &[0.05, 0.1, 1.0 / 6.0, 0.3, 0.45] {
            assert!(gagliardo_constant(s) > 0.0);
        }
    }

    #[test]
    fn pair_integral_matches_brute_quadrature() {
        let s = 0.1;
        let (a, b, c, d) = (-0.7, -0.2, 0.4, 1.9);
        let outer = |x: f64| {
            let inner = |y: f64| (x - y).abs().powf(-1.0 - 2.0 * s);
            integrate_tol(&inner, c, d, 1e-12, 1e-15).unwrap().0
        };
        let brute = integrate_tol(&outer, a, b, 1e-11, 1e-14).unwrap().0;
        let exact = riesz_pair_integral(s, a, b, c, d);
        assert_relative_eq!(exact, brute, max_relative = 1e-10);
        // Symmetry in the two cells.
        assert_relative_eq!(
            exact,
            riesz_pair_integral(s, c, d, a, b),
            max_relative = 1e-12
        );
    }

    #[test]
    fn pair_integral_is_homogeneous() {
        // I(kappa cells) = kappa^(1-2s) I(cells), and translation invariant.
        let s = 0.25;
        let base = riesz_pair_integral(s, 0.0, 1.0, 2.0, 3.5);
        let kappa = 7.3;
        let scaled = riesz_pair_integral(s, 0.0, kappa, 2.0 * kappa, 3.5 * kappa);
        assert_relative_eq!(scaled, kappa.powf(1.0 - 2.0 * s) * base, max_relative = 1e-12);
        let moved = riesz_pair_integral(s, 10.0, 11.0, 12.0, 13.5);
        assert_relative_eq!(moved, base, max_relative = 1e-12);
    }

    #[test]
    fn composite_grids_are_ordered_partitions() {
        let g = LineGrid::composite(&[-3.0, 3.0], 10.0, 256).unwrap();
        assert!(g.edges.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(g.len() + 1, g.edges.len());
        assert!(g.widths.iter().all(|&w| w > 0.0));
        // Two tangent fans minus shared edges.
        assert!(g.len() >= 2 * (256 - 2));

        assert!(LineGrid::composite(&[], 10.0, 64).is_err());
        assert!(LineGrid::composite(&[0.0], -1.0, 64).is_err());
        assert!(LineGrid::composite(&[0.0], 10.0, 4).is_err());
    }

    #[test]
    fn gaussian_energy_matches_spectral_closed_form() {
        // |exp(-x^2)|^2_Hs = 2^(s-1/2) Gamma(s+1/2).
        for &s in &[0.1, 0.25] {
            let g = LineGrid::tan_cells(0.0, 4.0, 2048).unwrap();
            let u = g.cell_averages(&|x: f64| (-x * x).exp()).unwrap();
            let e = g.gagliardo_energy(&u, s).unwrap();
            let want = 2.0_f64.powf(s - 0.5) * gamma(s + 0.5);
            assert_relative_eq!(e, want, max_relative = 2e-4);
        }
    }

    #[test]
    fn energy_is_exactly_scale_covariant() {
        // Joint dilation of grid and profile leaves the energy unchanged:
        // the form is closed-form homogeneous, so this holds to rounding.
        let s = 0.1;
        let lam = 3.7;
        let g1 = LineGrid::composite(&[-2.0, 2.0], 6.0, 512).unwrap();
        let u1 = g1.cell_averages(&|x: f64| (1.0 + x * x).powf(-0.45)).unwrap();
        let e1 = g1.gagliardo_energy(&u1, s).unwrap();

        let g2 = LineGrid::composite(&[-2.0 / lam, 2.0 / lam], 6.0 / lam, 512).unwrap();
        let u2 = g2
            .cell_averages(&|x: f64| (1.0 + (lam * x) * (lam * x)).powf(-0.45))
            .unwrap();
        let e2 = g2.gagliardo_energy(&u2, s).unwrap();
        // |u(lam x)|^2_Hs = lam^(2s-1) |u|^2_Hs.
        assert_relative_eq!(e2, lam.powf(2.0 * s - 1.0) * e1, max_relative = 1e-10);
    }

    #[test]
    fn matrix_matches_the_energy_sum() {
        let s = 0.25;
        let g = LineGrid::tan_cells(0.5, 3.0, 96).unwrap();
        let u: Vec<f64> = g.mids.iter().map(|&x| (x.sin() + 0.3) * (-x * x / 9.0).exp()).collect();
        let a = g.hs_form_matrix(s);
        let uv = nalgebra::DVector::from_column_slice(&u);
        let quad_form = (uv.transpose() * &a * &uv)[(0, 0)];
        let direct = g.gagliardo_energy(&u, s).unwrap();
        assert_relative_eq!(quad_form, direct, max_relative = 1e-11);
        // Positive definiteness: constants now carry tail energy.
        let ones = nalgebra::DVector::from_element(g.len(), 1.0);
        let c_energy = (ones.transpose() * &a * &ones)[(0, 0)];
        assert!(c_energy > 0.0);
    }

    #[test]
    fn rejects_mismatched_value_count() {
        let g = LineGrid::tan_cells(0.0, 2.0, 64).unwrap();
        assert!(g.gagliardo_energy(&[1.0, 2.0], 0.2).is_err());
    }
}
