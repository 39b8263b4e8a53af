//! Functions stored as Fourier samples on bounded frequency windows.
//!
//! Everything here uses the unitary transform
//! `f̂(ξ) = (2π)^{-1/2} ∫ e^{-iξx} f(x) dx` in one space dimension. A
//! [`SpectralPatch`] holds samples of `f̂` on the midpoint grid of a
//! [`FrequencyWindow`]; outside the window the function is taken to be zero.
//! Integrals in frequency are midpoint sums, which converge spectrally for the
//! smooth compactly supported transforms of wave packets.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

const MODULE: &str = "spectral_core";

/// Half-width (in samples) of the truncated sinc kernel used when two patches
/// live on incommensurate grids.
pub const SINC_HALF_WIDTH: i64 = 8;
const SINC_TAPER: f64 = 1.8;

/// Relative tolerance for deciding that two grids are sub-grids of one lattice.
const ALIGN_TOL: f64 = 1e-9;

/// A uniform frequency lattice with points `origin + (k + 1/2)·spacing`, `k ∈ ℤ`.
///
/// Patches cut from the same lattice can be paired without resampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    spacing: f64,
    origin: f64,
}

impl Lattice {
    pub fn new(spacing: f64, origin: f64) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) || !origin.is_finite() {
            return Err(Error::config(
                MODULE,
                format!("lattice spacing must be positive and finite (got {spacing}, origin {origin})"),
            ));
        }
        Ok(Lattice { spacing, origin })
    }

    /// The symmetric lattice about zero, `(k + 1/2)·spacing`.
    pub fn centered(spacing: f64) -> Result<Self> {
        Self::new(spacing, 0.0)
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn point(&self, k: i64) -> f64 {
        self.origin + (k as f64 + 0.5) * self.spacing
    }

    /// Smallest window of this lattice containing every lattice point in `[lo, hi]`.
    pub fn window_covering(&self, lo: f64, hi: f64) -> Result<FrequencyWindow> {
        let first = ((lo - self.origin) / self.spacing - 0.5).ceil() as i64;
        let last = ((hi - self.origin) / self.spacing - 0.5).floor() as i64;
        // at least two points, even for degenerate ranges
        let last = last.max(first + 1);
        let num_points = (last - first + 1) as usize;
        let start = self.origin + first as f64 * self.spacing;
        let half_width = 0.5 * num_points as f64 * self.spacing;
        FrequencyWindow::new(start + half_width, half_width, num_points)
    }
}

/// A uniform midpoint grid `ξ_n = center − half_width + (n + 1/2)·Δξ`,
/// `Δξ = 2·half_width / num_points`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyWindow {
    center: f64,
    half_width: f64,
    num_points: usize,
}

impl FrequencyWindow {
    pub fn new(center: f64, half_width: f64, num_points: usize) -> Result<Self> {
        if num_points < 2 {
            return Err(Error::config(MODULE, "frequency window needs at least two points"));
        }
        if !(half_width.is_finite() && half_width > 0.0) || !center.is_finite() {
            return Err(Error::config(
                MODULE,
                format!("frequency window needs finite center and positive half-width (got {center}, {half_width})"),
            ));
        }
        Ok(FrequencyWindow {
            center,
            half_width,
            num_points,
        })
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn num_points(&self) -> usize {
        self.num_points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.num_points as f64
    }

    pub fn start(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn end(&self) -> f64 {
        self.center + self.half_width
    }

    pub fn point(&self, n: usize) -> f64 {
        self.start() + (n as f64 + 0.5) * self.spacing()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.num_points).map(move |n| self.point(n))
    }

    pub fn overlaps(&self, other: &FrequencyWindow) -> bool {
        self.start() < other.end() && other.start() < self.end()
    }

    /// If `other` lies on the same lattice, the index of `other`'s first point
    /// in this window's numbering.
    fn aligned_offset(&self, other: &FrequencyWindow) -> Option<i64> {
        let h = self.spacing();
        if ((other.spacing() - h) / h).abs() > ALIGN_TOL {
            return None;
        }
        let shift = (other.start() - self.start()) / h;
        let rounded = shift.round();
        ((shift - rounded).abs() <= 1e-6).then_some(rounded as i64)
    }
}

/// Japanese bracket weight `(1 + |ξ|²)^β` of the Sobolev space `H^β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JapaneseBracketWeight {
    pub beta: f64,
}

impl JapaneseBracketWeight {
    pub fn new(beta: f64) -> Self {
        JapaneseBracketWeight { beta }
    }

    #[inline]
    pub fn weight(&self, xi: f64) -> f64 {
        if self.beta == 0.0 {
            1.0
        } else {
            (1.0 + xi * xi).powf(self.beta)
        }
    }
}

/// Samples of `f̂` on a frequency window.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPatch {
    window: FrequencyWindow,
    values: Vec<Complex64>,
    dim: usize,
}

impl SpectralPatch {
    pub fn new(window: FrequencyWindow, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != window.num_points() {
            return Err(Error::config(
                MODULE,
                format!(
                    "patch has {} values for a window of {} points",
                    values.len(),
                    window.num_points()
                ),
            ));
        }
        if let Some(n) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::numerical(
                MODULE,
                "patch values finite",
                format!("non-finite sample at index {n}"),
            ));
        }
        Ok(SpectralPatch {
            window,
            values,
            dim: 1,
        })
    }

    /// Builds a patch by sampling `f̂` at every grid point.
    pub fn from_fn(window: FrequencyWindow, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values = window.points().map(f).collect();
        Self::new(window, values)
    }

    pub fn zeros(window: FrequencyWindow) -> Self {
        SpectralPatch {
            values: vec![Complex64::new(0.0, 0.0); window.num_points()],
            window,
            dim: 1,
        }
    }

    pub fn window(&self) -> &FrequencyWindow {
        &self.window
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn l2_norm(&self) -> f64 {
        let h = self.window.spacing();
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * h).sqrt()
    }

    pub fn sobolev_norm(&self, weight: JapaneseBracketWeight) -> f64 {
        let h = self.window.spacing();
        let s: f64 = self
            .window
            .points()
            .zip(&self.values)
            .map(|(xi, v)| weight.weight(xi) * v.norm_sqr())
            .sum();
        (s * h).sqrt()
    }

    /// Multiplies the samples by `e^{-iξa}`, i.e. translates the function by `a`.
    pub fn translated(&self, a: f64) -> SpectralPatch {
        let values = self
            .window
            .points()
            .zip(&self.values)
            .map(|(xi, v)| v * Complex64::from_polar(1.0, -xi * a))
            .collect();
        SpectralPatch {
            window: self.window,
            values,
            dim: self.dim,
        }
    }

    /// Transform of the complex conjugate function, `conj(f̂(−ξ))`.
    pub fn conjugated(&self) -> SpectralPatch {
        let w = self.window;
        let window = FrequencyWindow {
            center: -w.center,
            half_width: w.half_width,
            num_points: w.num_points,
        };
        let values = self.values.iter().rev().map(|v| v.conj()).collect();
        SpectralPatch {
            window,
            values,
            dim: self.dim,
        }
    }

    /// Band-limited value of `f̂` at an arbitrary frequency (truncated sinc).
    pub fn interpolate(&self, xi: f64) -> Complex64 {
        let h = self.window.spacing();
        let u = (xi - self.window.start()) / h - 0.5;
        let k0 = u.floor() as i64;
        let n = self.values.len() as i64;
        let mut acc = Complex64::new(0.0, 0.0);
        for k in (k0 - SINC_HALF_WIDTH + 1)..=(k0 + SINC_HALF_WIDTH) {
            if k < 0 || k >= n {
                continue;
            }
            acc += self.values[k as usize] * tapered_sinc(u - k as f64);
        }
        acc
    }

    /// Resamples onto `window` by truncated sinc interpolation.
    pub fn resample(&self, window: FrequencyWindow) -> SpectralPatch {
        let values = window.points().map(|xi| self.interpolate(xi)).collect();
        SpectralPatch {
            window,
            values,
            dim: self.dim,
        }
    }
}

/// Sinc kernel under a Gaussian taper, cut at `SINC_HALF_WIDTH` samples.
#[inline]
fn tapered_sinc(u: f64) -> f64 {
    let s = u / SINC_TAPER;
    sinc(u) * (-0.5 * s * s).exp()
}

#[inline]
fn sinc(u: f64) -> f64 {
    if u == 0.0 {
        1.0
    } else {
        let a = PI * u;
        a.sin() / a
    }
}

/// `(f|g) = ∫ conj(f̂) ĝ dξ`.
pub fn inner_product_l2(f: &SpectralPatch, g: &SpectralPatch) -> Result<Complex64> {
    paired_sum(f, g, None)
}

/// `(f|g)_β = ∫ (1+|ξ|²)^β conj(f̂) ĝ dξ`. With `β = 0` this is the very same
/// computation as [`inner_product_l2`].
pub fn inner_product_sobolev(
    f: &SpectralPatch,
    g: &SpectralPatch,
    w: JapaneseBracketWeight,
) -> Result<Complex64> {
    if w.beta == 0.0 {
        paired_sum(f, g, None)
    } else {
        paired_sum(f, g, Some(w))
    }
}

fn paired_sum(
    f: &SpectralPatch,
    g: &SpectralPatch,
    weight: Option<JapaneseBracketWeight>,
) -> Result<Complex64> {
    if f.dim != g.dim {
        return Err(Error::config(
            MODULE,
            format!("patch dimensions differ ({} vs {})", f.dim, g.dim),
        ));
    }
    if !f.window.overlaps(&g.window) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if let Some(shift) = f.window.aligned_offset(&g.window) {
        return Ok(aligned_sum(f, g, shift, weight));
    }
    // Incommensurate grids: resample the coarser patch (ties: the later
    // starting one) onto the other grid. The choice depends only on the pair,
    // so (f|g) and (g|f) stay exact conjugates.
    let (hf, hg) = (f.window.spacing(), g.window.spacing());
    let resample_g = hg > hf || (hg == hf && g.window.start() > f.window.start());
    if resample_g {
        let g2 = g.resample(f.window);
        Ok(aligned_sum(f, &g2, 0, weight))
    } else {
        let f2 = f.resample(g.window);
        Ok(aligned_sum(&f2, g, 0, weight))
    }
}

/// Sum over the index overlap when `g`'s first sample sits at index `shift`
/// of `f`'s grid.
fn aligned_sum(
    f: &SpectralPatch,
    g: &SpectralPatch,
    shift: i64,
    weight: Option<JapaneseBracketWeight>,
) -> Complex64 {
    let nf = f.values.len() as i64;
    let ng = g.values.len() as i64;
    let lo = shift.max(0);
    let hi = (shift + ng).min(nf);
    let h = f.window.spacing();
    let mut acc = Complex64::new(0.0, 0.0);
    if lo >= hi {
        return acc;
    }
    for n in lo..hi {
        let a = f.values[n as usize];
        let b = g.values[(n - shift) as usize];
        let term = a.conj() * b;
        acc += match weight {
            Some(w) => term * w.weight(f.window.point(n as usize)),
            None => term,
        };
    }
    acc * h
}

/// `f(x) = (2π)^{-1/2} Σ_n e^{i x ξ_n} f̂(ξ_n) Δξ` at each `x`.
pub fn evaluate_physical(f: &SpectralPatch, xs: &[f64]) -> Result<Vec<Complex64>> {
    if let Some(x) = xs.iter().find(|x| !x.is_finite()) {
        return Err(Error::config(MODULE, format!("evaluation point {x} is not finite")));
    }
    let h = f.window.spacing();
    let xi0 = f.window.point(0);
    let scale = h / (2.0 * PI).sqrt();
    Ok(xs
        .iter()
        .map(|&x| {
            let step = Complex64::from_polar(1.0, x * h);
            let mut e = Complex64::from_polar(1.0, x * xi0);
            let mut acc = Complex64::new(0.0, 0.0);
            for v in &f.values {
                acc += e * v;
                e *= step;
            }
            acc * scale
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump_patch(center: f64, half_width: f64, n: usize, phase: f64) -> SpectralPatch {
        let w = FrequencyWindow::new(center, half_width, n).unwrap();
        SpectralPatch::from_fn(w, |xi| {
            let u = (xi - center) / half_width;
            let amp = if u.abs() < 1.0 { (-1.0 / (1.0 - u * u)).exp() } else { 0.0 };
            Complex64::from_polar(amp, phase * xi)
        })
        .unwrap()
    }

    #[test]
    fn window_grid_uses_midpoints() {
        let w = FrequencyWindow::new(0.0, 1.0, 4).unwrap();
        let pts: Vec<f64> = w.points().collect();
        assert_eq!(pts, vec![-0.75, -0.25, 0.25, 0.75]);
        assert_eq!(w.spacing(), 0.5);
    }

    #[test]
    fn window_rejects_bad_shapes() {
        assert!(FrequencyWindow::new(0.0, 1.0, 1).is_err());
        assert!(FrequencyWindow::new(0.0, 0.0, 8).is_err());
        assert!(FrequencyWindow::new(f64::NAN, 1.0, 8).is_err());
    }

    #[test]
    fn patch_rejects_non_finite_values() {
        let w = FrequencyWindow::new(0.0, 1.0, 2).unwrap();
        let err = SpectralPatch::new(w, vec![Complex64::new(f64::INFINITY, 0.0), Complex64::new(0.0, 0.0)]);
        assert!(matches!(err, Err(Error::Numerical { .. })));
    }

    #[test]
    fn lattice_windows_are_subgrids() {
        let lat = Lattice::new(0.25, 0.0).unwrap();
        let a = lat.window_covering(1.0, 3.0).unwrap();
        let b = lat.window_covering(2.1, 5.0).unwrap();
        assert_eq!(a.point(0), 1.125);
        assert_eq!(a.spacing(), 0.25);
        let expect = ((b.start() - a.start()) / 0.25).round() as i64;
        assert_eq!(a.aligned_offset(&b), Some(expect));
    }

    #[test]
    fn disjoint_windows_give_zero() {
        let f = bump_patch(100.0, 1.0, 64, 0.0);
        let g = bump_patch(-100.0, 1.0, 64, 0.0);
        assert_eq!(inner_product_l2(&f, &g).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn beta_zero_matches_l2_bitwise() {
        let f = bump_patch(3.0, 1.0, 64, 0.3);
        let g = bump_patch(3.4, 1.2, 96, -0.7);
        let a = inner_product_l2(&f, &g).unwrap();
        let b = inner_product_sobolev(&f, &g, JapaneseBracketWeight::new(0.0)).unwrap();
        assert_eq!(a.re.to_bits(), b.re.to_bits());
        assert_eq!(a.im.to_bits(), b.im.to_bits());
    }

    #[test]
    fn incommensurate_grids_are_resampled() {
        // same function on two grids: inner product should match the norm
        let f = bump_patch(2.0, 1.0, 128, 0.5);
        let g = bump_patch(2.0, 1.0, 96, 0.5);
        let fg = inner_product_l2(&f, &g).unwrap();
        let ff = inner_product_l2(&f, &f).unwrap();
        assert!((fg - ff).norm() < 1e-5 * ff.norm(), "{fg} vs {ff}");
        let gf = inner_product_l2(&g, &f).unwrap();
        assert_eq!(fg, gf.conj());
    }

    #[test]
    fn mismatched_dims_rejected() {
        let f = bump_patch(2.0, 1.0, 16, 0.0);
        let mut g = f.clone();
        g.dim = 2;
        assert!(matches!(inner_product_l2(&f, &g), Err(Error::Config { .. })));
    }

    #[test]
    fn zero_patch_evaluates_to_zero() {
        let w = FrequencyWindow::new(5.0, 2.0, 32).unwrap();
        let z = SpectralPatch::zeros(w);
        let vals = evaluate_physical(&z, &[-1.0, 0.0, 2.5]).unwrap();
        assert!(vals.iter().all(|v| *v == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn translation_shifts_physical_values() {
        let f = bump_patch(10.0, 2.0, 128, 0.0);
        let a = 0.37;
        let g = f.translated(a);
        let xs = [-0.5, 0.0, 0.2, 1.3];
        let shifted: Vec<f64> = xs.iter().map(|x| x + a).collect();
        let orig = evaluate_physical(&f, &xs).unwrap();
        let moved = evaluate_physical(&g, &shifted).unwrap();
        for (u, v) in orig.iter().zip(&moved) {
            assert!((u - v).norm() < 1e-10);
        }
    }

    #[test]
    fn conjugated_patch_is_transform_of_conjugate() {
        let f = bump_patch(4.0, 1.0, 64, 0.8);
        let g = f.conjugated();
        let xs = [-0.3, 0.1, 0.9];
        let fx = evaluate_physical(&f, &xs).unwrap();
        let gx = evaluate_physical(&g, &xs).unwrap();
        for (u, v) in fx.iter().zip(&gx) {
            assert!((u.conj() - v).norm() < 1e-12);
        }
    }

    #[test]
    fn plancherel_against_physical_quadrature() {
        let f = bump_patch(6.0, 1.5, 128, 0.4);
        let dx = 0.05;
        let xs: Vec<f64> = (-1200..=1200).map(|k| k as f64 * dx).collect();
        let vals = evaluate_physical(&f, &xs).unwrap();
        let phys: f64 = vals.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx;
        let freq = f.l2_norm().powi(2);
        assert!((phys.sqrt() - freq.sqrt()).abs() < 1e-4, "{phys} vs {freq}");
    }
}
