//! Periodic-grid spectral calculus: truncated torus representation of
//! functions on R^n with Fourier-multiplier operators.
//!
//! The box is [-L, L)^n sampled on N points per axis. Spectral coefficients
//! follow the continuum transform convention: the mode with frequency
//! xi_q = pi q / L carries coefficient
//!
//!   c_q = (-1)^(q1+..+qn) (dx / sqrt(2 pi))^n DFT_q,
//!
//! so that sum_q w_q |c_q|^2 with w_q = (pi/L)^n reproduces the quadrature
//! L^2 norm exactly (discrete Parseval) and c_q approximates the continuum
//! transform at xi_q. Negative-power multipliers replace the zero-frequency
//! weight by the exact cell average of |xi|^(-2s) over the DC cell, which is
//! finite for 2s < n.

use std::cell::RefCell;
use std::io::{Read as _, Write as _};
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::quad;

/// Uniform periodic grid on [-L, L)^n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Space dimension, 1 to 3.
    pub n: usize,
    /// Points per axis; power of two, at least 8.
    pub nside: usize,
    /// Box half-width L.
    pub half_width: f64,
}

/// Default points per axis in one dimension.
pub const DEFAULT_NSIDE_1D: usize = 1 << 14;
/// Default points per axis in two dimensions.
pub const DEFAULT_NSIDE_2D: usize = 512;

impl GridSpec {
    pub fn new(n: usize, nside: usize, half_width: f64) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::BadDimension(n));
        }
        if nside < 8 || !nside.is_power_of_two() {
            return Err(Error::BadGrid(format!(
                "points per axis must be a power of two >= 8, got {nside}"
            )));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::BadGrid(format!(
                "box half-width must be positive and finite, got {half_width}"
            )));
        }
        Ok(GridSpec { n, nside, half_width })
    }

    /// Grid spacing 2L/N.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.nside as f64
    }

    /// Total number of sites N^n.
    pub fn len(&self) -> usize {
        self.nside.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume element dx^n.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.n as i32)
    }

    /// Spectral quadrature weight (pi/L)^n.
    pub fn spectral_weight(&self) -> f64 {
        (std::f64::consts::PI / self.half_width).powi(self.n as i32)
    }

    /// Coordinate of axis index i: -L + i dx.
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Signed frequency index of axis index i, in -N/2 .. N/2-1.
    pub fn signed_index(&self, i: usize) -> i64 {
        let half = (self.nside / 2) as i64;
        let i = i as i64;
        if i < half { i } else { i - self.nside as i64 }
    }

    /// Frequency xi = pi q / L for signed index q.
    pub fn frequency(&self, q: i64) -> f64 {
        std::f64::consts::PI * q as f64 / self.half_width
    }

    /// Decomposes a flat row-major index into per-axis indices (unused axes 0).
    pub fn axis_indices(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        let mut rem = flat;
        for a in (0..self.n).rev() {
            idx[a] = rem % self.nside;
            rem /= self.nside;
        }
        idx
    }

    /// Spatial position of a flat index (unused axes 0).
    pub fn site(&self, flat: usize) -> [f64; 3] {
        let idx = self.axis_indices(flat);
        let mut x = [0.0; 3];
        for a in 0..self.n {
            x[a] = self.coord(idx[a]);
        }
        x
    }

    /// |xi|^2 at a flat spectral index.
    pub fn freq_norm2(&self, flat: usize) -> f64 {
        let idx = self.axis_indices(flat);
        let mut acc = 0.0;
        for a in 0..self.n {
            let xi = self.frequency(self.signed_index(idx[a]));
            acc += xi * xi;
        }
        acc
    }

    /// Same resolution in a box of twice the half-width (N and L both doubled).
    pub fn doubled(&self) -> GridSpec {
        GridSpec { n: self.n, nside: self.nside * 2, half_width: self.half_width * 2.0 }
    }
}

/// Real-valued samples on a grid.
#[derive(Debug, Clone)]
pub struct Field {
    pub grid: GridSpec,
    pub samples: Vec<f64>,
}

impl Field {
    pub fn new(grid: GridSpec, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::BadGrid(format!(
                "sample count {} does not match grid size {}",
                samples.len(),
                grid.len()
            )));
        }
        if !samples.iter().all(|v| v.is_finite()) {
            return Err(Error::BadGrid("non-finite sample".into()));
        }
        Ok(Field { grid, samples })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Field { grid, samples: vec![0.0; grid.len()] }
    }

    /// Samples a function of position onto the grid.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let samples = (0..grid.len()).map(|j| f(&grid.site(j)[..grid.n])).collect();
        Field { grid, samples }
    }

    pub fn scale(&self, factor: f64) -> Field {
        Field { grid: self.grid, samples: self.samples.iter().map(|v| v * factor).collect() }
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.check_same_grid(other)?;
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| a + b).collect();
        Ok(Field { grid: self.grid, samples })
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.check_same_grid(other)?;
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| a - b).collect();
        Ok(Field { grid: self.grid, samples })
    }

    /// a*self + b*other.
    pub fn axpy(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        self.check_same_grid(other)?;
        let samples =
            self.samples.iter().zip(&other.samples).map(|(u, v)| a * u + b * v).collect();
        Ok(Field { grid: self.grid, samples })
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }
}

/// Complex spectral coefficients of a real field.
#[derive(Debug, Clone)]
pub struct SpectralField {
    pub grid: GridSpec,
    pub coeffs: Vec<Complex64>,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse { p.plan_fft_inverse(len) } else { p.plan_fft_forward(len) }
    })
}

/// In-place multidimensional FFT as nested one-dimensional transforms.
fn fft_nd(data: &mut [Complex64], grid: &GridSpec, inverse: bool) {
    let nside = grid.nside;
    let fft = plan(nside, inverse);
    let mut line = vec![Complex64::default(); nside];
    for axis in 0..grid.n {
        let stride = nside.pow((grid.n - 1 - axis) as u32);
        let outer = nside.pow(axis as u32);
        for o in 0..outer {
            for i in 0..stride {
                let base = o * nside * stride + i;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + j * stride];
                }
                fft.process(&mut line);
                for (j, slot) in line.iter().enumerate() {
                    data[base + j * stride] = *slot;
                }
            }
        }
    }
}

/// Parity of the summed axis indices; equals the parity of the summed signed
/// frequency indices because N is even.
fn index_parity(grid: &GridSpec, flat: usize) -> bool {
    let idx = grid.axis_indices(flat);
    (idx[..grid.n].iter().sum::<usize>()) % 2 == 1
}

/// Forward transform to continuum-normalized coefficients.
pub fn to_spectral(u: &Field) -> SpectralField {
    let grid = u.grid;
    let mut buf: Vec<Complex64> = u.samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(&mut buf, &grid, false);
    let factor = (grid.spacing() / (2.0 * std::f64::consts::PI).sqrt()).powi(grid.n as i32);
    for (j, c) in buf.iter_mut().enumerate() {
        let sign = if index_parity(&grid, j) { -factor } else { factor };
        *c *= sign;
    }
    SpectralField { grid, coeffs: buf }
}

/// Inverse transform back to real samples.
pub fn to_field(c: &SpectralField) -> Field {
    let grid = c.grid;
    let factor = (grid.spacing() / (2.0 * std::f64::consts::PI).sqrt()).powi(grid.n as i32);
    let mut buf: Vec<Complex64> = c
        .coeffs
        .iter()
        .enumerate()
        .map(|(j, &v)| if index_parity(&grid, j) { -v / factor } else { v / factor })
        .collect();
    fft_nd(&mut buf, &grid, true);
    let norm = 1.0 / grid.len() as f64;
    let samples = buf.iter().map(|v| v.re * norm).collect();
    Field { grid, samples }
}

/// Mean value of |xi|^(-2s) over the DC frequency cell [-h, h]^n, h = pi/(2L).
/// Reduces to h^(-2s) * J_n(s) with J_n a smooth corner integral.
pub fn dc_cell_average(n: usize, s: f64, half_width: f64) -> f64 {
    assert!(2.0 * s < n as f64, "negative power too strong for the dimension");
    assert!(s > 0.0);
    let h = std::f64::consts::PI / (2.0 * half_width);
    let j = match n {
        1 => 1.0 / (1.0 - 2.0 * s),
        2 => {
            let f = |a: f64| (1.0 + a * a).powf(-s);
            let (inner, _) = quad::integrate_tol(&f, 0.0, 1.0, 1e-13, 0.0)
                .expect("smooth unit-interval integral");
            2.0 / (2.0 - 2.0 * s) * inner
        }
        3 => {
            let f = |a: f64| {
                let g = |b: f64| (1.0 + a * a + b * b).powf(-s);
                quad::integrate_tol(&g, 0.0, 1.0, 1e-13, 0.0)
                    .expect("smooth unit-interval integral")
                    .0
            };
            let (inner, _) = quad::integrate_tol(&f, 0.0, 1.0, 1e-12, 0.0)
                .expect("smooth unit-square integral");
            3.0 / (3.0 - 2.0 * s) * inner
        }
        _ => unreachable!("grid dimension is validated at construction"),
    };
    h.powf(-2.0 * s) * j
}

/// Applies the Fourier multiplier |xi|^(2 sigma). For sigma < 0 the zero mode
/// uses the DC-cell average of the multiplier instead of the (infinite)
/// pointwise value.
///
/// Panics if sigma <= -n/2 (the regularizing cell integral diverges there).
pub fn fractional_laplacian(u: &Field, sigma: f64) -> Field {
    let grid = u.grid;
    assert!(
        sigma > -(grid.n as f64) / 2.0,
        "multiplier power must exceed -n/2"
    );
    if sigma == 0.0 {
        return u.clone();
    }
    let mut spec = to_spectral(u);
    let dc = if sigma < 0.0 { dc_cell_average(grid.n, -sigma, grid.half_width) } else { 0.0 };
    for (j, c) in spec.coeffs.iter_mut().enumerate() {
        let xi2 = grid.freq_norm2(j);
        let mult = if xi2 == 0.0 { dc } else { xi2.powf(sigma) };
        *c *= mult;
    }
    to_field(&spec)
}

/// Green operator of the fractional Laplacian: multiplier |xi|^(-2s) with the
/// DC cell regularized as in `fractional_laplacian`.
pub fn riesz_convolve(g: &Field, s: f64) -> Field {
    assert!(s > 0.0, "Riesz order must be positive");
    fractional_laplacian(g, -s)
}

/// Homogeneous Sobolev inner product sum_k w_k |xi_k|^(2s) u_k conj(v_k).
pub fn hs_inner(u: &Field, v: &Field, s: f64) -> Result<f64> {
    u.check_same_grid(v)?;
    let cu = to_spectral(u);
    let cv = to_spectral(v);
    Ok(hs_inner_spec(&cu, &cv, s))
}

/// `hs_inner` on precomputed spectra.
pub fn hs_inner_spec(cu: &SpectralField, cv: &SpectralField, s: f64) -> f64 {
    let grid = cu.grid;
    let w = grid.spectral_weight();
    let mut acc = 0.0;
    for (j, (a, b)) in cu.coeffs.iter().zip(&cv.coeffs).enumerate() {
        let xi2 = grid.freq_norm2(j);
        if xi2 > 0.0 {
            acc += xi2.powf(s) * (a * b.conj()).re;
        }
    }
    acc * w
}

/// Sobolev seminorm sqrt(hs_inner(u, u, s)).
pub fn hs_norm(u: &Field, s: f64) -> f64 {
    let c = to_spectral(u);
    hs_inner_spec(&c, &c, s).max(0.0).sqrt()
}

/// Dual-norm of order -s: sqrt(sum_k w_k |xi_k|^(-2s) |r_k|^2) with the zero
/// cell weighted by the exact cell integral of |xi|^(-2s).
pub fn hminus_s_norm(r: &Field, s: f64) -> f64 {
    let c = to_spectral(r);
    hminus_s_norm_spec(&c, s)
}

/// `hminus_s_norm` on a precomputed spectrum.
pub fn hminus_s_norm_spec(c: &SpectralField, s: f64) -> f64 {
    let grid = c.grid;
    assert!(2.0 * s < grid.n as f64, "dual order must satisfy 2s < n");
    let w = grid.spectral_weight();
    let dc = dc_cell_average(grid.n, s, grid.half_width);
    let mut acc = 0.0;
    for (j, a) in c.coeffs.iter().enumerate() {
        let xi2 = grid.freq_norm2(j);
        let mult = if xi2 == 0.0 { dc } else { xi2.powf(-s) };
        acc += mult * a.norm_sqr();
    }
    (acc * w).max(0.0).sqrt()
}

/// Quadrature L^p norm (sum |u|^p dx^n)^(1/p).
///
/// Panics if p < 1.
pub fn lp_norm(u: &Field, p: f64) -> f64 {
    assert!(p >= 1.0, "L^p norm requires p >= 1");
    let dv = u.grid.cell_volume();
    let sum: f64 = u.samples.iter().map(|v| v.abs().powf(p)).sum();
    (sum * dv).powf(1.0 / p)
}

/// Quadrature L^2 inner product sum u v dx^n.
pub fn l2_inner(u: &Field, v: &Field) -> Result<f64> {
    u.check_same_grid(v)?;
    let dv = u.grid.cell_volume();
    Ok(u.samples.iter().zip(&v.samples).map(|(a, b)| a * b).sum::<f64>() * dv)
}

/// Pointwise signed power sign(u) |u|^p.
pub fn signed_power(u: &Field, p: f64) -> Field {
    let samples = u.samples.iter().map(|&v| v.signum() * v.abs().powf(p)).collect();
    Field { grid: u.grid, samples }
}

/// Fraction of spectral energy beyond two thirds of the Nyquist index on any
/// axis. Large values mean pointwise nonlinearities are folding back.
pub fn aliasing_fraction(u: &Field) -> f64 {
    let c = to_spectral(u);
    let grid = u.grid;
    let cut = (grid.nside / 3) as i64;
    let mut tail = 0.0;
    let mut total = 0.0;
    for (j, a) in c.coeffs.iter().enumerate() {
        let idx = grid.axis_indices(j);
        let e = a.norm_sqr();
        total += e;
        let in_tail = (0..grid.n).any(|ax| grid.signed_index(idx[ax]).abs() > cut);
        if in_tail {
            tail += e;
        }
    }
    if total == 0.0 { 0.0 } else { tail / total }
}

/// Aliasing alarm threshold for pointwise nonlinear powers.
pub const ALIASING_ALARM: f64 = 1e-6;

/// `signed_power` with the spectral-tail aliasing alarm enforced.
pub fn signed_power_checked(u: &Field, p: f64) -> Result<Field> {
    let out = signed_power(u, p);
    let fraction = aliasing_fraction(&out);
    if fraction > ALIASING_ALARM {
        return Err(Error::Aliasing { fraction, threshold: ALIASING_ALARM });
    }
    Ok(out)
}

/// Cyclic translation by whole pixels along each axis.
pub fn translate_pixels(u: &Field, shift: [i64; 3]) -> Field {
    let grid = u.grid;
    let nside = grid.nside as i64;
    let mut samples = vec![0.0; grid.len()];
    for (j, slot) in samples.iter_mut().enumerate() {
        let idx = grid.axis_indices(j);
        let mut src = 0usize;
        for a in 0..grid.n {
            let i = (idx[a] as i64 - shift[a]).rem_euclid(nside) as usize;
            src = src * grid.nside + i;
        }
        *slot = u.samples[src];
    }
    Field { grid, samples }
}

/// Writes a field as a text header line "n N L" followed by the samples as
/// little-endian 64-bit reals.
pub fn save_field(u: &Field, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{} {} {}", u.grid.n, u.grid.nside, u.grid.half_width)?;
    for v in &u.samples {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a field written by `save_field`.
pub fn load_field(path: &Path) -> Result<Field> {
    let mut reader = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut header = Vec::new();
    loop {
        let mut byte = [0u8; 1];
        reader.read_exact(&mut byte)?;
        if byte[0] == b'\n' {
            break;
        }
        if header.len() > 256 {
            return Err(Error::BadGrid("unterminated field header".into()));
        }
        header.push(byte[0]);
    }
    let header = String::from_utf8(header).map_err(|_| Error::BadGrid("malformed header".into()))?;
    let mut parts = header.split_whitespace();
    let n: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::BadGrid("header missing dimension".into()))?;
    let nside: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::BadGrid("header missing point count".into()))?;
    let half_width: f64 = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::BadGrid("header missing box width".into()))?;
    if parts.next().is_some() {
        return Err(Error::BadGrid("trailing tokens in field header".into()));
    }
    let grid = GridSpec::new(n, nside, half_width)?;
    let mut samples = vec![0.0; grid.len()];
    let mut buf = [0u8; 8];
    for slot in samples.iter_mut() {
        reader.read_exact(&mut buf)?;
        *slot = f64::from_le_bytes(buf);
    }
    Field::new(grid, samples)
}
