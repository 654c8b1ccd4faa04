//! Best multi-bubble approximation of a sampled field.
//!
//! The fit minimizes the seminorm distance between a field and a sum of
//! periodized profiles over centers and log-concentrations, by damped
//! Gauss-Newton with the analytic tangent kernels as Jacobian columns. At a
//! converged fit the first-order conditions are exactly the discrete
//! seminorm orthogonalities of the residual to every kernel, which is the
//! decomposition normalization the rest of the crate assumes.
//!
//! The module never invents initial guesses: callers pass a configuration
//! already in the basin (sweeps always know the ground truth). The
//! single-bubble variant with a free amplitude eliminates the amplitude in
//! closed form each step (variable projection).

use crate::bubble::{make_config, BubbleConfig, BubbleParams};
use crate::error::{Error, Result};
use crate::grid::{hs_inner_spec, to_spectral, Field};
use crate::params::SobolevParams;
use crate::periodize::{periodize_profile_kernels, DEFAULT_IMAGES};

/// Outcome of a bubble fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    /// Fitted configuration, bubbles sorted by (lambda, then center).
    pub fitted: BubbleConfig,
    /// Residual u minus the fitted superposition.
    pub residual: Field,
    /// Seminorm of the residual.
    pub residual_hs: f64,
    /// Largest normalized seminorm pairing of the residual with a kernel.
    pub ortho_defect: f64,
    /// Gauss-Newton iterations taken.
    pub iterations: usize,
    /// Whether the orthogonality defect reached tolerance.
    pub converged: bool,
}

/// Single-bubble fit with a free multiplicative amplitude.
#[derive(Debug, Clone)]
pub struct AmplitudeFit {
    /// Best amplitude in front of the fitted profile.
    pub amplitude: f64,
    /// The positional fit; its residual accounts for the amplitude.
    pub result: FitResult,
}

const MAX_ITERS: usize = 60;
/// Convergence gate on the orthogonality defect, strictly inside the 1e-6
/// bound the converged flag promises.
const DEFECT_TOL: f64 = 1e-7;
/// Interaction strength beyond which two bubbles count as collapsing.
const COLLAPSE_Q: f64 = 0.9;
/// Residuals this small relative to the input count as exact fits; the
/// defect ratio is noise there.
const EXACT_FIT: f64 = 1e-13;

/// Rendered superposition and its parameter derivatives.
struct Model {
    sigma: Field,
    /// 2 nu gradient columns: for bubble i, d sigma/d z_i = lambda_i Z_i^1
    /// and d sigma/d log lambda_i = Z_i^2.
    jac: Vec<Field>,
    /// Raw kernels Z_i^a in the same order, for the defect measurement.
    kernels: Vec<Field>,
}

fn render(sp: &SobolevParams, grid: crate::grid::GridSpec, bubbles: &[BubbleParams]) -> Result<Model> {
    let mut sigma = Field::zeros(grid);
    let mut jac = Vec::with_capacity(2 * bubbles.len());
    let mut kernels = Vec::with_capacity(2 * bubbles.len());
    for b in bubbles {
        let (u, ks) = periodize_profile_kernels(grid, b, sp, DEFAULT_IMAGES)?;
        sigma = sigma.add(&u)?;
        jac.push(ks[0].scale(b.lambda));
        jac.push(ks[1].clone());
        kernels.extend(ks);
    }
    Ok(Model { sigma, jac, kernels })
}

fn max_pair_interaction(sp: &SobolevParams, bubbles: &[BubbleParams]) -> f64 {
    let mut q_max: f64 = 0.0;
    let e = (sp.n as f64 - 2.0 * sp.s) / 2.0;
    for (i, a) in bubbles.iter().enumerate() {
        for b in bubbles.iter().skip(i + 1) {
            let mut d2 = 0.0;
            for c in 0..sp.n {
                let d = a.z[c] - b.z[c];
                d2 += d * d;
            }
            let r = a.lambda / b.lambda;
            let q = (r + 1.0 / r + a.lambda * b.lambda * d2).powf(-e);
            q_max = q_max.max(q);
        }
    }
    q_max
}

fn defect_of(rho: &crate::grid::SpectralField, model: &Model, s: f64, u_scale: f64) -> f64 {
    let rho_norm = hs_inner_spec(rho, rho, s).max(0.0).sqrt();
    if rho_norm <= EXACT_FIT * u_scale {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    for k in &model.kernels {
        let ck = to_spectral(k);
        let kn = hs_inner_spec(&ck, &ck, s).max(0.0).sqrt();
        let pair = hs_inner_spec(rho, &ck, s).abs();
        worst = worst.max(pair / (rho_norm * kn));
    }
    worst
}

/// Fits `nu` bubbles to a field by damped Gauss-Newton from the supplied
/// initial configuration. See the module docs for the convergence and
/// orthogonality semantics.
pub fn fit_bubbles(u: &Field, nu: usize, init: &BubbleConfig) -> Result<FitResult> {
    let sp = init.params;
    if nu == 0 || init.bubbles.len() != nu {
        return Err(Error::InvalidArgument(format!(
            "init supplies {} bubbles for a {}-bubble fit",
            init.bubbles.len(),
            nu
        )));
    }
    if u.grid.n != 1 || sp.n != 1 {
        return Err(Error::InvalidArgument(
            "bubble fitting renders periodized profiles, available in one dimension".into(),
        ));
    }
    let grid = u.grid;
    let cu = to_spectral(u);
    let u_norm = hs_inner_spec(&cu, &cu, sp.s).max(0.0).sqrt();
    let mut bubbles = init.bubbles.clone();
    let started_degenerate = max_pair_interaction(&sp, &bubbles);
    if started_degenerate > COLLAPSE_Q {
        return Err(Error::DegenerateFit(format!(
            "initial bubbles already collapsed: q_max = {started_degenerate:.4}"
        )));
    }

    let mut model = render(&sp, grid, &bubbles)?;
    let mut rho = cu.clone();
    let c_sigma = to_spectral(&model.sigma);
    for (r, c) in rho.coeffs.iter_mut().zip(&c_sigma.coeffs) {
        *r -= c;
    }
    let mut objective = hs_inner_spec(&rho, &rho, sp.s).max(0.0);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_ITERS {
        let defect = defect_of(&rho, &model, sp.s, u_norm);
        if defect <= DEFECT_TOL {
            converged = true;
            break;
        }
        iterations += 1;

        let dim = model.jac.len();
        let spectra: Vec<_> = model.jac.iter().map(to_spectral).collect();
        let mut h = nalgebra::DMatrix::<f64>::zeros(dim, dim);
        let mut g = nalgebra::DVector::<f64>::zeros(dim);
        for a in 0..dim {
            g[a] = hs_inner_spec(&rho, &spectra[a], sp.s);
            for b in a..dim {
                let v = hs_inner_spec(&spectra[a], &spectra[b], sp.s);
                h[(a, b)] = v;
                h[(b, a)] = v;
            }
        }
        let step = h
            .clone()
            .cholesky()
            .map(|ch| ch.solve(&g))
            .ok_or_else(|| Error::DegenerateFit("singular Gauss-Newton normal matrix".into()))?;

        // Damped line search on the true objective.
        let mut alpha = 1.0f64;
        let mut accepted = None;
        for _ in 0..30 {
            let trial: Vec<BubbleParams> = bubbles
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    let mut nb = *b;
                    nb.z[0] += alpha * step[2 * i];
                    nb.lambda = (b.lambda.ln() + alpha * step[2 * i + 1]).exp();
                    nb
                })
                .collect();
            let q = max_pair_interaction(&sp, &trial);
            if q > COLLAPSE_Q {
                return Err(Error::DegenerateFit(format!(
                    "bubbles collapsed during the fit: q_max = {q:.4}"
                )));
            }
            let trial_model = render(&sp, grid, &trial)?;
            let c_sig = to_spectral(&trial_model.sigma);
            let mut trial_rho = cu.clone();
            for (r, c) in trial_rho.coeffs.iter_mut().zip(&c_sig.coeffs) {
                *r -= c;
            }
            let f = hs_inner_spec(&trial_rho, &trial_rho, sp.s).max(0.0);
            if f < objective {
                accepted = Some((trial, trial_model, trial_rho, f));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((nb, nm, nr, f)) => {
                bubbles = nb;
                model = nm;
                rho = nr;
                objective = f;
            }
            None => {
                // No descent direction left; either we are at the minimum
                // to roundoff (defect will close the loop next pass) or
                // the fit is stuck.
                let defect = defect_of(&rho, &model, sp.s, u_norm);
                if defect <= DEFECT_TOL {
                    converged = true;
                    break;
                }
                return Err(Error::FitStall { grad: defect, iters: iterations });
            }
        }
    }
    if !converged {
        let defect = defect_of(&rho, &model, sp.s, u_norm);
        if defect <= DEFECT_TOL {
            converged = true;
        } else {
            return Err(Error::FitStall { grad: defect, iters: iterations });
        }
    }

    bubbles.sort_by(|a, b| {
        a.lambda
            .partial_cmp(&b.lambda)
            .unwrap()
            .then(a.z.partial_cmp(&b.z).unwrap())
    });
    let model = render(&sp, grid, &bubbles)?;
    let residual = u.sub(&model.sigma)?;
    let c_rho = to_spectral(&residual);
    let residual_hs = hs_inner_spec(&c_rho, &c_rho, sp.s).max(0.0).sqrt();
    let ortho_defect = defect_of(&c_rho, &model, sp.s, u_norm);
    let fitted = make_config(&sp, bubbles)?;
    Ok(FitResult { fitted, residual, residual_hs, ortho_defect, iterations, converged })
}

/// Fits one bubble with a free amplitude: the amplitude is solved in
/// closed form for every trial position (variable projection), and the
/// outer Gauss-Newton runs over center and log-concentration. The initial
/// position comes from the field's own peak and half-width, so the caller
/// must hand in a field that actually looks like one bubble.
pub fn fit_single_bubble_be(u: &Field, sp: &SobolevParams) -> Result<AmplitudeFit> {
    if u.grid.n != 1 || sp.n != 1 {
        return Err(Error::InvalidArgument(
            "single-bubble fitting renders periodized profiles, available in one dimension".into(),
        ));
    }
    let grid = u.grid;
    let cu = to_spectral(u);
    let u_norm = hs_inner_spec(&cu, &cu, sp.s).max(0.0).sqrt();
    if !(u_norm > 0.0) {
        return Err(Error::InvalidArgument("cannot fit a bubble to the zero field".into()));
    }

    // Peak and half-width heuristic for the starting point.
    let (peak_idx, peak_val) = u
        .samples
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
        .expect("grids are never empty");
    let z0 = grid.site(peak_idx)[0];
    let h = grid.spacing();
    let mut half_dist = grid.half_width / 4.0;
    for k in 1..grid.nside / 2 {
        let idx = (peak_idx + k) % grid.nside;
        if u.samples[idx].abs() <= peak_val.abs() / 2.0 {
            half_dist = k as f64 * h;
            break;
        }
    }
    let m = sp.m();
    let lam0 = (2f64.powf(1.0 / m) - 1.0).sqrt() / half_dist.max(h);

    let mut z = z0;
    let mut ell = lam0.ln();
    let mut amplitude = 0.0;
    let mut objective = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut last_model: Option<(Model, crate::grid::SpectralField)> = None;

    let eval = |z: f64, ell: f64| -> Result<(Model, crate::grid::SpectralField, f64, f64)> {
        let b = BubbleParams::new_1d(z, ell.exp());
        let model = render(&sp.clone(), grid, std::slice::from_ref(&b))?;
        let c_sig = to_spectral(&model.sigma);
        let ss = hs_inner_spec(&c_sig, &c_sig, sp.s);
        let su = hs_inner_spec(&cu, &c_sig, sp.s);
        let c = if ss > 0.0 { su / ss } else { 0.0 };
        let mut rho = cu.clone();
        for (r, cs) in rho.coeffs.iter_mut().zip(&c_sig.coeffs) {
            *r -= cs * c;
        }
        let f = hs_inner_spec(&rho, &rho, sp.s).max(0.0);
        Ok((model, rho, c, f))
    };

    let (m0, r0, c0, f0) = eval(z, ell)?;
    amplitude = c0;
    objective = f0;
    let mut rho = r0;
    last_model = Some((m0, rho.clone()));

    while iterations < MAX_ITERS {
        let model = &last_model.as_ref().unwrap().0;
        let defect = defect_of(&rho, model, sp.s, u_norm);
        if defect <= DEFECT_TOL {
            converged = true;
            break;
        }
        iterations += 1;
        let lam = ell.exp();
        let cols = [model.kernels[0].scale(lam * amplitude), model.kernels[1].scale(amplitude)];
        let spectra: Vec<_> = cols.iter().map(to_spectral).collect();
        let mut h = nalgebra::DMatrix::<f64>::zeros(2, 2);
        let mut g = nalgebra::DVector::<f64>::zeros(2);
        for a in 0..2 {
            g[a] = hs_inner_spec(&rho, &spectra[a], sp.s);
            for b in a..2 {
                let v = hs_inner_spec(&spectra[a], &spectra[b], sp.s);
                h[(a, b)] = v;
                h[(b, a)] = v;
            }
        }
        let step = h
            .clone()
            .cholesky()
            .map(|ch| ch.solve(&g))
            .ok_or_else(|| Error::DegenerateFit("singular Gauss-Newton normal matrix".into()))?;
        let mut alpha = 1.0f64;
        let mut accepted = false;
        for _ in 0..30 {
            let (zt, lt) = (z + alpha * step[0], ell + alpha * step[1]);
            let (mt, rt, ct, ft) = eval(zt, lt)?;
            if ft < objective {
                z = zt;
                ell = lt;
                amplitude = ct;
                objective = ft;
                rho = rt.clone();
                last_model = Some((mt, rt));
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            let model = &last_model.as_ref().unwrap().0;
            let defect = defect_of(&rho, model, sp.s, u_norm);
            if defect <= DEFECT_TOL {
                converged = true;
                break;
            }
            return Err(Error::FitStall { grad: defect, iters: iterations });
        }
    }
    if !converged {
        let model = &last_model.as_ref().unwrap().0;
        let defect = defect_of(&rho, model, sp.s, u_norm);
        if defect > DEFECT_TOL {
            return Err(Error::FitStall { grad: defect, iters: iterations });
        }
        converged = true;
    }

    let b = BubbleParams::new_1d(z, ell.exp());
    let model = render(&sp.clone(), grid, std::slice::from_ref(&b))?;
    let residual = u.sub(&model.sigma.scale(amplitude))?;
    let c_rho = to_spectral(&residual);
    let residual_hs = hs_inner_spec(&c_rho, &c_rho, sp.s).max(0.0).sqrt();
    let ortho_defect = defect_of(&c_rho, &model, sp.s, u_norm);
    let fitted = make_config(sp, vec![b])?;
    Ok(AmplitudeFit {
        amplitude,
        result: FitResult {
            fitted,
            residual,
            residual_hs,
            ortho_defect,
            iterations,
            converged,
        },
    })
}
