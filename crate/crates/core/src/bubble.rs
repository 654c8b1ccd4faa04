//! Closed-form bubble profiles, kernel elements, interaction quantities,
//! and the bubble-tree order.
//!
//! A bubble is the profile `U[z,lambda](x) = alpha (lambda / (1 +
//! lambda^2 |x-z|^2))^{(n-2s)/2}`; families of them interact through the
//! pairwise quantity `q_ij` and the comparability scale `R_ij`. This module
//! evaluates everything pointwise in closed form and integrates bubble
//! products over the whole space with adaptive quadrature; no grid is
//! involved anywhere here.

use crate::error::{Error, Result};
use crate::params::SobolevParams;
use crate::quad;
use serde::{Deserialize, Serialize};

/// Center and inverse scale of a single bubble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleParams {
    /// Center in R^n; only the first n entries are meaningful.
    pub z: [f64; 3],
    /// Inverse scale, strictly positive.
    pub lambda: f64,
}

impl BubbleParams {
    /// Bubble at center `z` (1d convenience) with inverse scale `lambda`.
    pub fn new_1d(z: f64, lambda: f64) -> Self {
        Self { z: [z, 0.0, 0.0], lambda }
    }

    /// Bubble at a general center.
    pub fn new(z: [f64; 3], lambda: f64) -> Self {
        Self { z, lambda }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::BadScale(self.lambda));
        }
        if self.z[..n].iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("bubble center must be finite".into()));
        }
        Ok(())
    }

    fn dist2(&self, x: &[f64]) -> f64 {
        x.iter().zip(self.z.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

/// Squared distance between two centers in the first `n` coordinates.
fn center_dist2(a: &BubbleParams, b: &BubbleParams, n: usize) -> f64 {
    a.z[..n].iter().zip(b.z[..n].iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Pointwise bubble value `alpha (lambda/(1+lambda^2|x-z|^2))^{(n-2s)/2}`.
///
/// Strictly positive and radially decreasing about the center.
pub fn bubble_value(params: &SobolevParams, b: &BubbleParams, x: &[f64]) -> f64 {
    let m = params.m();
    let r2 = b.dist2(&x[..params.n]);
    params.alpha_ns * (b.lambda / (1.0 + b.lambda * b.lambda * r2)).powf(m)
}

/// Kernel element `Z^a`: scaled center derivative for `a <= n`, scaled
/// dilation derivative for `a = n+1`.
///
/// Closed forms (m = (n-2s)/2, r = |x-z|):
/// - a <= n:   lambda^{-1} dU/dz^a = 2 m alpha lambda^{m+1} (x-z)_a (1+lambda^2 r^2)^{-m-1}
/// - a = n+1:  lambda dU/dlambda  = m U (1 - lambda^2 r^2)/(1 + lambda^2 r^2)
///
/// # Errors
/// `a` outside 1..=n+1.
pub fn z_deriv_value(params: &SobolevParams, b: &BubbleParams, a: usize, x: &[f64]) -> Result<f64> {
    let n = params.n;
    if a == 0 || a > n + 1 {
        return Err(Error::InvalidArgument(format!(
            "kernel index a = {a} outside 1..={}",
            n + 1
        )));
    }
    let m = params.m();
    let r2 = b.dist2(&x[..n]);
    let lam = b.lambda;
    let denom = 1.0 + lam * lam * r2;
    if a <= n {
        let dx = x[a - 1] - b.z[a - 1];
        Ok(2.0 * m * params.alpha_ns * lam.powf(m + 1.0) * dx * denom.powf(-m - 1.0))
    } else {
        let u = params.alpha_ns * (lam / denom).powf(m);
        Ok(m * u * (1.0 - lam * lam * r2) / denom)
    }
}

/// A family of bubbles with all pairwise interaction quantities
/// precomputed, plus the partial order used to organize tail estimates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BubbleConfig {
    pub params: SobolevParams,
    pub bubbles: Vec<BubbleParams>,
    /// Symmetric pairwise interaction strengths; diagonal unused (zero).
    pub q: Vec<Vec<f64>>,
    /// Largest off-diagonal interaction.
    pub q_max: f64,
    /// Pairwise comparability scales R_ij; diagonal unused (zero).
    pub r_pair: Vec<Vec<f64>>,
    /// Half the smallest off-diagonal R_ij (infinite for a single bubble).
    pub r_min: f64,
    /// Strict partial order: (i, j) present means i precedes j.
    pub tree_order: Vec<(usize, usize)>,
    /// Separation threshold used by the order (see `make_config`).
    pub tree_threshold: f64,
}

/// Default separation threshold for the tree order: `i` precedes `j` only
/// when `lambda_i |z_j - z_i| <= T`. The underlying criterion is stated for
/// sequences; any finite T is a desk-scale proxy, so it is configurable.
pub const DEFAULT_TREE_THRESHOLD: f64 = 1e3;

/// Builds a [`BubbleConfig`] with the default tree threshold.
pub fn make_config(params: &SobolevParams, bubbles: Vec<BubbleParams>) -> Result<BubbleConfig> {
    make_config_with_threshold(params, bubbles, DEFAULT_TREE_THRESHOLD)
}

/// Builds a [`BubbleConfig`], computing q, Q_max, R_pair, R_min, and the
/// tree order.
///
/// `q_ij = (lambda_i/lambda_j + lambda_j/lambda_i + lambda_i lambda_j
/// |z_i-z_j|^2)^{-(n-2s)/2}` (symmetric in i, j) and `R_ij =
/// max{sqrt(li/lj), sqrt(lj/li), sqrt(li lj) |zi-zj|}`. The base of q is a
/// sum of three positive terms whose maximum is R_ij^2, so it lies in
/// [R_ij^2, 3 R_ij^2] and the two-sided comparability
/// `3^{-(n-2s)/2} <= q_ij R_ij^{n-2s} <= 1` always holds.
pub fn make_config_with_threshold(
    params: &SobolevParams,
    bubbles: Vec<BubbleParams>,
    tree_threshold: f64,
) -> Result<BubbleConfig> {
    if bubbles.is_empty() {
        return Err(Error::InvalidArgument("at least one bubble required".into()));
    }
    for b in &bubbles {
        b.validate(params.n)?;
    }
    let nu = bubbles.len();
    let e = params.n as f64 - 2.0 * params.s;
    let mut q = vec![vec![0.0; nu]; nu];
    let mut r_pair = vec![vec![0.0; nu]; nu];
    let mut q_max = 0.0f64;
    let mut r_min_pair = f64::INFINITY;
    for i in 0..nu {
        for j in (i + 1)..nu {
            let (li, lj) = (bubbles[i].lambda, bubbles[j].lambda);
            let d2 = center_dist2(&bubbles[i], &bubbles[j], params.n);
            let base = li / lj + lj / li + li * lj * d2;
            let qij = base.powf(-e / 2.0);
            let rij = (li / lj).sqrt().max((lj / li).sqrt()).max((li * lj).sqrt() * d2.sqrt());
            q[i][j] = qij;
            q[j][i] = qij;
            r_pair[i][j] = rij;
            r_pair[j][i] = rij;
            q_max = q_max.max(qij);
            r_min_pair = r_min_pair.min(rij);
        }
    }
    let r_min = 0.5 * r_min_pair;
    let tree_order = build_tree_order(&bubbles, params.n, tree_threshold);
    Ok(BubbleConfig {
        params: *params,
        bubbles,
        q,
        q_max,
        r_pair,
        r_min,
        tree_order,
        tree_threshold,
    })
}

/// Base relation: i precedes j when (lambda_i, i) < (lambda_j, j)
/// lexicographically and lambda_i |z_j - z_i| <= T; returned as its
/// transitive closure, which is a strict partial order because the base is
/// contained in a strict total order.
fn build_tree_order(bubbles: &[BubbleParams], n: usize, threshold: f64) -> Vec<(usize, usize)> {
    let nu = bubbles.len();
    let mut rel = vec![vec![false; nu]; nu];
    for i in 0..nu {
        for j in 0..nu {
            if i == j {
                continue;
            }
            let (li, lj) = (bubbles[i].lambda, bubbles[j].lambda);
            let lex = li < lj || (li == lj && i < j);
            if lex && li * center_dist2(&bubbles[i], &bubbles[j], n).sqrt() <= threshold {
                rel[i][j] = true;
            }
        }
    }
    // Transitive closure (Floyd-Warshall on booleans; nu is small).
    for k in 0..nu {
        for i in 0..nu {
            if rel[i][k] {
                for j in 0..nu {
                    if rel[k][j] {
                        rel[i][j] = true;
                    }
                }
            }
        }
    }
    let mut order = Vec::new();
    for i in 0..nu {
        for j in 0..nu {
            if rel[i][j] {
                order.push((i, j));
            }
        }
    }
    order
}

/// One tree of the bubble forest: a root index and its descendants in
/// depth-first order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BubbleTree {
    pub root: usize,
    pub descendants: Vec<usize>,
}

/// Partitions the configuration's indices into a rooted forest consistent
/// with the tree order: roots are order-minimal, and every other index is
/// attached below its tightest predecessor (largest lambda, index
/// tie-break), which yields one canonical ancestor chain per node.
pub fn bubble_tree(config: &BubbleConfig) -> Vec<BubbleTree> {
    let nu = config.bubbles.len();
    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); nu];
    for &(i, j) in &config.tree_order {
        pred[j].push(i);
    }
    let mut parent: Vec<Option<usize>> = vec![None; nu];
    for j in 0..nu {
        parent[j] = pred[j]
            .iter()
            .copied()
            .max_by(|&a, &b| {
                let la = config.bubbles[a].lambda;
                let lb = config.bubbles[b].lambda;
                la.total_cmp(&lb).then(a.cmp(&b))
            });
    }
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); nu];
    let mut roots = Vec::new();
    for j in 0..nu {
        match parent[j] {
            Some(p) => children[p].push(j),
            None => roots.push(j),
        }
    }
    roots
        .into_iter()
        .map(|root| {
            let mut descendants = Vec::new();
            let mut stack = children[root].clone();
            stack.reverse();
            while let Some(v) = stack.pop() {
                descendants.push(v);
                for &c in children[v].iter().rev() {
                    stack.push(c);
                }
            }
            BubbleTree { root, descendants }
        })
        .collect()
}

/// Relative tolerance used by the bubble quadrature routines.
pub const PAIR_QUAD_TOL: f64 = 1e-9;

/// Whole-space integral of `U_i^alpha U_j^beta` for two distinct bubbles,
/// with `alpha + beta = p + 1` and `alpha != beta`.
///
/// The integral is reduced to the axis joining the centers (cylindrical
/// coordinates for n >= 2) and evaluated by adaptive Gauss-Kronrod panels
/// on tan-mapped axes, so both cores and the algebraic tails are resolved
/// no matter how far the bubbles sit apart.
///
/// # Errors
/// Precondition violations (exponent budget, coincident bubbles) and
/// quadrature accuracy failures.
pub fn pair_integral(
    params: &SobolevParams,
    bi: &BubbleParams,
    bj: &BubbleParams,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    bi.validate(params.n)?;
    bj.validate(params.n)?;
    if !(alpha >= 0.0 && beta >= 0.0) {
        return Err(Error::InvalidArgument("exponents must be nonnegative".into()));
    }
    if (alpha + beta - (params.p + 1.0)).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "exponents must sum to p+1 = {}, got {}",
            params.p + 1.0,
            alpha + beta
        )));
    }
    if (alpha - beta).abs() < 1e-12 {
        return Err(Error::InvalidArgument("exponents must differ".into()));
    }
    if bi.z[..params.n] == bj.z[..params.n] && bi.lambda == bj.lambda {
        return Err(Error::InvalidArgument(
            "pair integral requires two distinct bubbles".into(),
        ));
    }
    let m = params.m();
    let a = params.alpha_ns;
    match params.n {
        1 => {
            let (zi, li) = (bi.z[0], bi.lambda);
            let (zj, lj) = (bj.z[0], bj.lambda);
            let f = |x: f64| {
                let ui = a * (li / (1.0 + li * li * (x - zi) * (x - zi))).powf(m);
                let uj = a * (lj / (1.0 + lj * lj * (x - zj) * (x - zj))).powf(m);
                ui.powf(alpha) * uj.powf(beta)
            };
            let (v, _) = quad::integrate_line(&f, PAIR_QUAD_TOL)?;
            Ok(v)
        }
        2 | 3 => {
            // Align the first axis with z_j - z_i; the integrand depends on
            // the axial coordinate and the transverse radius only.
            let d = center_dist2(bi, bj, params.n).sqrt();
            let (li, lj) = (bi.lambda, bj.lambda);
            let nf = params.n as f64;
            // Surface measure of the transverse sphere: 2 for n=2 (two
            // half-lines), 2 pi r for n=3.
            let f = move |x1: f64, r: f64| {
                let ri2 = x1 * x1 + r * r;
                let rj2 = (x1 - d) * (x1 - d) + r * r;
                let ui = a * (li / (1.0 + li * li * ri2)).powf(m);
                let uj = a * (lj / (1.0 + lj * lj * rj2)).powf(m);
                let jac = if nf == 2.0 { 2.0 } else { 2.0 * std::f64::consts::PI * r };
                ui.powf(alpha) * uj.powf(beta) * jac
            };
            let (v, _) = quad::integrate_half_plane(&f, PAIR_QUAD_TOL)?;
            Ok(v)
        }
        _ => Err(Error::BadDimension(params.n)),
    }
}

/// Whole-space integral of a single bubble power `U^q` by the same
/// quadrature machinery; a cross-check partner for the closed forms and
/// the spectral norms.
pub fn bubble_power_integral(params: &SobolevParams, b: &BubbleParams, power: f64) -> Result<f64> {
    b.validate(params.n)?;
    let m = params.m();
    let a = params.alpha_ns;
    if power * m * 2.0 <= params.n as f64 {
        return Err(Error::InvalidArgument(format!(
            "U^{power} is not integrable at n = {}",
            params.n
        )));
    }
    match params.n {
        1 => {
            let (z, lam) = (b.z[0], b.lambda);
            let f = |x: f64| (a * (lam / (1.0 + lam * lam * (x - z) * (x - z))).powf(m)).powf(power);
            let (v, _) = quad::integrate_line(&f, PAIR_QUAD_TOL)?;
            Ok(v)
        }
        2 | 3 => {
            let lam = b.lambda;
            let nf = params.n as f64;
            let f = move |x1: f64, r: f64| {
                let rr = x1 * x1 + r * r;
                let u = a * (lam / (1.0 + lam * lam * rr)).powf(m);
                let jac = if nf == 2.0 { 2.0 } else { 2.0 * std::f64::consts::PI * r };
                u.powf(power) * jac
            };
            let (v, _) = quad::integrate_half_plane(&f, PAIR_QUAD_TOL)?;
            Ok(v)
        }
        _ => Err(Error::BadDimension(params.n)),
    }
}

/// Whole-space integral of `U^{p-1} Z^a U` for a single bubble; vanishes
/// identically because it is proportional to a parameter derivative of the
/// constant `int U^{p+1}`. Exposed for the quadrature check.
pub fn kernel_orthogonality_defect(
    params: &SobolevParams,
    b: &BubbleParams,
    a_idx: usize,
) -> Result<f64> {
    b.validate(params.n)?;
    if params.n != 1 {
        return Err(Error::InvalidArgument(
            "orthogonality defect check implemented on the line".into(),
        ));
    }
    let f = |x: f64| {
        let xs = [x, 0.0, 0.0];
        let u = bubble_value(params, b, &xs);
        let z = z_deriv_value(params, b, a_idx, &xs).unwrap_or(f64::NAN);
        u.powf(params.p - 1.0) * z * u
    };
    // The integral cancels to zero, so anchor the stopping rule to the
    // magnitude of the positive part (the scale-invariant profile mass).
    let (v, _) = quad::integrate_line_tol(&f, 1e-11, 1e-11 * params.int_u_p1())?;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::SobolevParams;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn p14() -> SobolevParams {
        SobolevParams::new(1, 0.25).unwrap()
    }

    // ===== pointwise values =====

    #[test]
    fn center_value_is_alpha() {
        let p = p14();
        let b = BubbleParams::new_1d(0.0, 1.0);
        assert_relative_eq!(bubble_value(&p, &b, &[0.0]), p.alpha_ns, max_relative = 1e-14);
    }

    #[test]
    fn unit_radius_value() {
        // lambda |x-z| = 1 makes the denominator 2 regardless of scale.
        let p = p14();
        for &(z, lam) in &[(0.0, 1.0), (2.5, 4.0), (-1.0, 0.125)] {
            let b = BubbleParams::new_1d(z, lam);
            let x = z + 1.0 / lam;
            let want = p.alpha_ns * (lam / 2.0).powf(p.m());
            assert_relative_eq!(bubble_value(&p, &b, &[x]), want, max_relative = 1e-13);
        }
    }

    #[test]
    fn frozen_value_at_three() {
        // alpha * 10^{-1/4}, from direct evaluation of the profile formula.
        let p = p14();
        let b = BubbleParams::new_1d(0.0, 1.0);
        let got = bubble_value(&p, &b, &[3.0]);
        assert_relative_eq!(got, 0.388_784_425_626_994_563, max_relative = 1e-12);
        assert_relative_eq!(got, p.alpha_ns * 10f64.powf(-0.25), max_relative = 1e-14);
    }

    #[test]
    fn scale_covariance() {
        // U[z,lambda](x) = lambda^{(n-2s)/2} U[0,1](lambda (x-z)).
        let p = SobolevParams::new(1, 0.1).unwrap();
        let unit = BubbleParams::new_1d(0.0, 1.0);
        for &(z, lam, x) in &[(1.0, 3.0, 2.2), (-4.0, 0.2, 10.0), (0.0, 7.5, 0.3)] {
            let b = BubbleParams::new_1d(z, lam);
            let lhs = bubble_value(&p, &b, &[x]);
            let rhs = lam.powf(p.m()) * bubble_value(&p, &unit, &[lam * (x - z)]);
            assert_relative_eq!(lhs, rhs, max_relative = 1e-13);
        }
    }

    #[test]
    fn kernel_values_at_markers() {
        let p = SobolevParams::new(1, 0.1).unwrap();
        let b = BubbleParams::new_1d(0.5, 2.0);
        // Translation kernel vanishes at the center.
        let t = z_deriv_value(&p, &b, 1, &[0.5]).unwrap();
        assert_abs_diff_eq!(t, 0.0, epsilon = 1e-15);
        // Dilation kernel at the center equals m U(z).
        let d = z_deriv_value(&p, &b, 2, &[0.5]).unwrap();
        let want = p.m() * bubble_value(&p, &b, &[0.5]);
        assert_relative_eq!(d, want, max_relative = 1e-14);
        // Dilation kernel vanishes on the sphere lambda r = 1.
        let d0 = z_deriv_value(&p, &b, 2, &[1.0]).unwrap();
        assert_abs_diff_eq!(d0, 0.0, epsilon = 1e-15);
        // Index out of range is rejected.
        assert!(z_deriv_value(&p, &b, 0, &[0.0]).is_err());
        assert!(z_deriv_value(&p, &b, 3, &[0.0]).is_err());
    }

    #[test]
    fn translation_kernel_matches_finite_difference() {
        let p = SobolevParams::new(1, 1.0 / 6.0).unwrap();
        let b = BubbleParams::new_1d(0.3, 1.7);
        let x = [1.1];
        let h = 1e-6;
        let up = bubble_value(&p, &BubbleParams::new_1d(0.3 + h, 1.7), &x);
        let dn = bubble_value(&p, &BubbleParams::new_1d(0.3 - h, 1.7), &x);
        let fd = (up - dn) / (2.0 * h) / 1.7;
        let got = z_deriv_value(&p, &b, 1, &x).unwrap();
        assert_relative_eq!(got, fd, max_relative = 1e-8);
    }

    #[test]
    fn dilation_kernel_matches_finite_difference() {
        let p = SobolevParams::new(1, 1.0 / 6.0).unwrap();
        let b = BubbleParams::new_1d(-0.4, 0.9);
        let x = [0.7];
        let h = 1e-6;
        let up = bubble_value(&p, &BubbleParams::new_1d(-0.4, 0.9 + h), &x);
        let dn = bubble_value(&p, &BubbleParams::new_1d(-0.4, 0.9 - h), &x);
        let fd = 0.9 * (up - dn) / (2.0 * h);
        let got = z_deriv_value(&p, &b, 2, &x).unwrap();
        assert_relative_eq!(got, fd, max_relative = 1e-8);
    }

    // ===== interaction quantities =====

    #[test]
    fn equal_scale_pair_interaction() {
        let p = p14();
        let mk = |d: f64| {
            make_config(
                &p,
                vec![BubbleParams::new_1d(0.0, 1.0), BubbleParams::new_1d(d, 1.0)],
            )
            .unwrap()
        };
        // d = 0 (with distinct centers collapsed): q = 2^{-1/4}.
        let c = mk(0.0);
        assert_relative_eq!(c.q[0][1], 0.840_896_415_253_714_543, max_relative = 1e-13);
        // q = (2+d^2)^{-(n-2s)/2} and monotone decay in d.
        let mut last = f64::INFINITY;
        for &d in &[0.5, 1.0, 5.0, 50.0, 500.0] {
            let c = mk(d);
            let want = (2.0 + d * d).powf(-0.25);
            assert_relative_eq!(c.q[0][1], want, max_relative = 1e-13);
            assert!(c.q[0][1] < last, "q must decay monotonically in d");
            last = c.q[0][1];
        }
    }

    #[test]
    fn concentric_scale_ratio_pair() {
        // lambda_2 = mu, same center: q = (mu + 1/mu)^{-(n-2s)/2}, R = sqrt(mu).
        let p = p14();
        let mu = 25.0;
        let c = make_config(
            &p,
            vec![BubbleParams::new_1d(0.0, 1.0), BubbleParams::new_1d(0.0, mu)],
        )
        .unwrap();
        assert_relative_eq!(c.q[0][1], (mu + 1.0 / mu).powf(-0.25), max_relative = 1e-13);
        assert_relative_eq!(c.r_pair[0][1], mu.sqrt(), max_relative = 1e-13);
        assert_relative_eq!(c.r_min, 0.5 * mu.sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn comparability_band_holds() {
        // 3^{-(n-2s)/2} <= q R^{n-2s} <= 1 over a scatter of configurations
        // (the base of q is a three-term sum between its max R^2 and 3 R^2).
        let p = SobolevParams::new(1, 0.1).unwrap();
        let e = 1.0 - 2.0 * 0.1;
        let lams = [0.1, 0.7, 1.0, 4.0, 33.0];
        let seps = [0.0, 0.3, 2.0, 17.0, 400.0];
        for &l1 in &lams {
            for &l2 in &lams {
                for &d in &seps {
                    let c = make_config(
                        &p,
                        vec![BubbleParams::new_1d(0.0, l1), BubbleParams::new_1d(d, l2)],
                    )
                    .unwrap();
                    let prod = c.q[0][1] * c.r_pair[0][1].powf(e);
                    assert!(
                        (3f64.powf(-e / 2.0) - 1e-12..=1.0 + 1e-12).contains(&prod),
                        "comparability violated: lambda=({l1},{l2}) d={d} prod={prod}"
                    );
                }
            }
        }
    }

    #[test]
    fn symmetry_of_interaction_matrices() {
        let p = SobolevParams::new(1, 1.0 / 6.0).unwrap();
        let c = make_config(
            &p,
            vec![
                BubbleParams::new_1d(0.0, 1.0),
                BubbleParams::new_1d(3.0, 5.0),
                BubbleParams::new_1d(-2.0, 0.25),
            ],
        )
        .unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(c.q[i][j], c.q[j][i]);
                assert_eq!(c.r_pair[i][j], c.r_pair[j][i]);
            }
        }
        assert!(c.q_max > 0.0 && c.q_max <= 1.0);
    }

    // ===== tree order and forest =====

    #[test]
    fn single_bubble_tree() {
        let p = p14();
        let c = make_config(&p, vec![BubbleParams::new_1d(0.0, 1.0)]).unwrap();
        let forest = bubble_tree(&c);
        assert_eq!(forest, vec![BubbleTree { root: 0, descendants: vec![] }]);
        assert!(c.tree_order.is_empty());
    }

    #[test]
    fn nested_pair_forms_one_tree() {
        // lambda ratio 100 at scaled separation 0.5: coarse precedes fine.
        let p = p14();
        let c = make_config(
            &p,
            vec![BubbleParams::new_1d(0.0, 1.0), BubbleParams::new_1d(0.5, 100.0)],
        )
        .unwrap();
        assert_eq!(c.tree_order, vec![(0, 1)]);
        let forest = bubble_tree(&c);
        assert_eq!(forest, vec![BubbleTree { root: 0, descendants: vec![1] }]);
    }

    #[test]
    fn far_pair_forms_two_roots() {
        // Equal scales at scaled separation 1e6 (beyond the threshold).
        let p = p14();
        let c = make_config(
            &p,
            vec![BubbleParams::new_1d(0.0, 1.0), BubbleParams::new_1d(1e6, 1.0)],
        )
        .unwrap();
        assert!(c.tree_order.is_empty());
        let forest = bubble_tree(&c);
        assert_eq!(forest.len(), 2);
        assert_eq!(forest[0].root, 0);
        assert_eq!(forest[1].root, 1);
    }

    #[test]
    fn tree_order_is_strict_partial_order() {
        let p = SobolevParams::new(1, 0.1).unwrap();
        let c = make_config(
            &p,
            vec![
                BubbleParams::new_1d(0.0, 1.0),
                BubbleParams::new_1d(1.0, 10.0),
                BubbleParams::new_1d(1.1, 100.0),
                BubbleParams::new_1d(5e5, 1.0),
            ],
        )
        .unwrap();
        let has = |i, j| c.tree_order.contains(&(i, j));
        let nu = c.bubbles.len();
        for i in 0..nu {
            assert!(!has(i, i), "irreflexive");
            for j in 0..nu {
                if has(i, j) {
                    assert!(!has(j, i), "asymmetric");
                    for k in 0..nu {
                        if has(j, k) {
                            assert!(has(i, k), "transitive: {i} {j} {k}");
                        }
                    }
                }
            }
        }
    }

    // ===== quadrature =====

    #[test]
    fn pair_integral_rejects_bad_input() {
        let p = p14();
        let b1 = BubbleParams::new_1d(0.0, 1.0);
        let b2 = BubbleParams::new_1d(4.0, 1.0);
        // Same bubble twice.
        assert!(pair_integral(&p, &b1, &b1, p.p, 1.0).is_err());
        // Wrong exponent budget.
        assert!(pair_integral(&p, &b1, &b2, p.p, 2.0).is_err());
        // Equal exponents.
        let half = (p.p + 1.0) / 2.0;
        assert!(pair_integral(&p, &b1, &b2, half, half).is_err());
    }

    #[test]
    fn single_power_integrals_match_closed_forms() {
        for &s in &[0.1, 1.0 / 6.0, 0.25] {
            let p = SobolevParams::new(1, s).unwrap();
            let b = BubbleParams::new_1d(0.0, 1.0);
            let up = bubble_power_integral(&p, &b, p.p).unwrap();
            assert_relative_eq!(up, p.int_u_p(), max_relative = 1e-8);
            let up1 = bubble_power_integral(&p, &b, p.p + 1.0).unwrap();
            assert_relative_eq!(up1, p.int_u_p1(), max_relative = 1e-8);
        }
    }

    #[test]
    fn power_integral_scaling_laws() {
        // int U^{p+1} is scale and translation invariant; int U^p carries
        // exactly one factor lambda^{-(n-2s)/2}.
        let p = SobolevParams::new(1, 0.1).unwrap();
        let b = BubbleParams::new_1d(-7.0, 13.0);
        assert_relative_eq!(
            bubble_power_integral(&p, &b, p.p).unwrap(),
            p.int_u_p() * 13f64.powf(-p.m()),
            max_relative = 1e-8
        );
        assert_relative_eq!(
            bubble_power_integral(&p, &b, p.p + 1.0).unwrap(),
            p.int_u_p1(),
            max_relative = 1e-8
        );
    }

    #[test]
    fn kernel_orthogonality_vanishes() {
        // int U^{p-1} Z^a U = 0: parameter derivative of a constant.
        for &s in &[0.1, 0.25] {
            let p = SobolevParams::new(1, s).unwrap();
            let b = BubbleParams::new_1d(0.4, 2.0);
            let scale = p.int_u_p1();
            for a in 1..=2 {
                let defect = kernel_orthogonality_defect(&p, &b, a).unwrap();
                assert!(
                    defect.abs() < 1e-9 * scale,
                    "s={s} a={a}: defect {defect}"
                );
            }
        }
    }

    #[test]
    fn pair_integral_tracks_interaction_strength() {
        // (alpha, beta) = (p, 1): the integral scales like q^1 over a
        // decade; full two-decade slope regression lives in the
        // integration suite.
        let p = p14();
        let mut vals = Vec::new();
        for &d in &[40.0, 400.0] {
            let b1 = BubbleParams::new_1d(0.0, 1.0);
            let b2 = BubbleParams::new_1d(d, 1.0);
            let v = pair_integral(&p, &b1, &b2, p.p, 1.0).unwrap();
            let q = (2.0 + d * d).powf(-0.25);
            vals.push((q, v));
        }
        let slope = (vals[1].1 / vals[0].1).ln() / (vals[1].0 / vals[0].0).ln();
        assert!((slope - 1.0).abs() < 0.1, "local slope {slope}");
    }

    #[test]
    fn swapped_exponents_are_exactly_symmetric() {
        // int U_i^alpha U_j^beta with alpha + beta = p+1 is a conformal
        // invariant of the pair: the inversion swapping the two bubbles
        // carries Jacobian weight |phi'|^n = |phi'|^{(p+1)(n-2s)/2}, which
        // is exactly the weight the integrand picks up. Hence (p,1) and
        // (1,p) agree identically, even for asymmetric pairs.
        let p = p14();
        let b1 = BubbleParams::new_1d(0.0, 1.0);
        let b2 = BubbleParams::new_1d(30.0, 4.0);
        let v1 = pair_integral(&p, &b1, &b2, p.p, 1.0).unwrap();
        let v2 = pair_integral(&p, &b1, &b2, 1.0, p.p).unwrap();
        assert!(v1 > 0.0 && v2 > 0.0);
        assert_relative_eq!(v1, v2, max_relative = 1e-7);
    }
}
