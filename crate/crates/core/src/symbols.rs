//! Classical symbols with finitely many homogeneous terms, and the quadratic
//! form `(f|Pf)` of the operator `Pf(x) = (2π)^{-1/2} ∫ e^{ixξ} a(x,ξ) f̂(ξ) dξ`.
//!
//! In one dimension the sphere is `{−1, +1}`, so a homogeneous term of order
//! `m` is `a(x, ξ) = ψ(|ξ|)·|ξ|^m·c_{sign ξ}(x)`, where `ψ` removes the
//! singularity at the origin and equals one for `|ξ| ≥ 1/2`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::packets::{PacketProfile, WavePacketFamily};
use crate::spectral::SpectralPatch;
use crate::spline::ComplexSpline;

const MODULE: &str = "symbols";

/// Default relative tolerance on the mass of `f` lying outside the x-grid.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-8;
/// Default `L²` tail mass of `χ` that the packet x-grid leaves out.
pub const DEFAULT_GRID_TAIL_MASS: f64 = 1e-12;

/// Smooth radial cutoff: 0 on `[0, inner]`, 1 on `[outer, ∞)`, quintic
/// smoothstep in between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowFrequencyCutoff {
    inner: f64,
    outer: f64,
}

impl Default for LowFrequencyCutoff {
    fn default() -> Self {
        LowFrequencyCutoff {
            inner: 0.25,
            outer: 0.5,
        }
    }
}

impl LowFrequencyCutoff {
    pub fn new(inner: f64, outer: f64) -> Result<Self> {
        if !(inner > 0.0 && inner < outer && outer <= 0.5) {
            return Err(Error::config(
                MODULE,
                format!("cutoff bridge needs 0 < inner < outer <= 1/2 (got [{inner}, {outer}])"),
            ));
        }
        Ok(LowFrequencyCutoff { inner, outer })
    }

    pub fn inner(&self) -> f64 {
        self.inner
    }

    pub fn outer(&self) -> f64 {
        self.outer
    }

    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        if r <= self.inner {
            0.0
        } else if r >= self.outer {
            1.0
        } else {
            let s = (r - self.inner) / (self.outer - self.inner);
            s * s * s * (10.0 + s * (6.0 * s - 15.0))
        }
    }
}

/// `x`-dependence of a homogeneous term on each half line of `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    /// `c(x)·h(sign ξ)` with `c` a closed-form expression.
    Expr {
        source: String,
        expr: Expr,
        h_minus: f64,
        h_plus: f64,
    },
    /// Separate interpolated tables for `ξ < 0` and `ξ > 0`.
    Tabulated {
        minus: Option<ComplexSpline>,
        plus: Option<ComplexSpline>,
    },
}

impl Coefficient {
    pub fn parse(source: &str, h_minus: f64, h_plus: f64) -> Result<Self> {
        if !(h_minus.is_finite() && h_plus.is_finite()) {
            return Err(Error::config(MODULE, "angular factors must be finite"));
        }
        Ok(Coefficient::Expr {
            source: source.to_string(),
            expr: Expr::parse(source)?,
            h_minus,
            h_plus,
        })
    }

    pub fn constant(c: f64) -> Self {
        Coefficient::Expr {
            source: format!("{c:?}"),
            expr: Expr::Num(c),
            h_minus: 1.0,
            h_plus: 1.0,
        }
    }

    /// `c_{sign}(x)`. A missing table reads as zero.
    pub fn value(&self, x: f64, sign: f64) -> Complex64 {
        match self {
            Coefficient::Expr {
                expr,
                h_minus,
                h_plus,
                ..
            } => {
                let h = if sign < 0.0 { *h_minus } else { *h_plus };
                if h == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(expr.eval(x) * h, 0.0)
                }
            }
            Coefficient::Tabulated { minus, plus } => {
                let table = if sign < 0.0 { minus } else { plus };
                table
                    .as_ref()
                    .map_or(Complex64::new(0.0, 0.0), |s| s.eval(x))
            }
        }
    }

    pub fn is_x_independent(&self) -> bool {
        match self {
            Coefficient::Expr { expr, .. } => !expr.depends_on_x(),
            Coefficient::Tabulated { .. } => false,
        }
    }
}

/// `a(x, ξ) = ψ(|ξ|)·|ξ|^order·c_{sign ξ}(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousTerm {
    pub order: f64,
    pub coefficient: Coefficient,
    pub cutoff: LowFrequencyCutoff,
}

impl HomogeneousTerm {
    pub fn new(order: f64, coefficient: Coefficient) -> Result<Self> {
        if !order.is_finite() {
            return Err(Error::config(MODULE, format!("term order must be finite (got {order})")));
        }
        Ok(HomogeneousTerm {
            order,
            coefficient,
            cutoff: LowFrequencyCutoff::default(),
        })
    }

    pub fn with_cutoff(mut self, cutoff: LowFrequencyCutoff) -> Self {
        self.cutoff = cutoff;
        self
    }

    /// The radial part `ψ(|ξ|)|ξ|^m`.
    #[inline]
    pub fn radial(&self, xi: f64) -> f64 {
        let r = xi.abs();
        let psi = self.cutoff.value(r);
        if psi == 0.0 {
            0.0
        } else {
            psi * r.powf(self.order)
        }
    }

    pub fn eval(&self, x: f64, xi: f64) -> Complex64 {
        let r = self.radial(xi);
        if r == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        self.coefficient.value(x, xi.signum()) * r
    }

    /// `a(x₀, ξ₀)` for `|ξ₀| = 1`.
    pub fn principal_value(&self, x0: f64, xi0: f64) -> Complex64 {
        self.coefficient.value(x0, xi0)
    }
}

/// Homogeneous terms with strictly decreasing orders.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolExpansion {
    terms: Vec<HomogeneousTerm>,
}

impl SymbolExpansion {
    pub fn new(terms: Vec<HomogeneousTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::config(MODULE, "a symbol expansion needs at least one term"));
        }
        if let Some(w) = terms.windows(2).find(|w| !(w[0].order > w[1].order)) {
            return Err(Error::config(
                MODULE,
                format!(
                    "term orders must be strictly decreasing (m_j > m_(j+1)), got {} then {}",
                    w[0].order, w[1].order
                ),
            ));
        }
        Ok(SymbolExpansion { terms })
    }

    pub fn terms(&self) -> &[HomogeneousTerm] {
        &self.terms
    }

    pub fn orders(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.order).collect()
    }

    pub fn eval(&self, x: f64, xi: f64) -> Complex64 {
        self.terms.iter().map(|t| t.eval(x, xi)).sum()
    }

    pub fn with_cutoff(mut self, cutoff: LowFrequencyCutoff) -> Self {
        for t in &mut self.terms {
            t.cutoff = cutoff;
        }
        self
    }
}

/// The operator whose symbol is the exact finite sum of the expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    pub symbol: SymbolExpansion,
}

impl Observable {
    pub fn new(symbol: SymbolExpansion) -> Self {
        Observable { symbol }
    }

    pub fn terms(&self) -> &[HomogeneousTerm] {
        self.symbol.terms()
    }

    pub fn leading_order(&self) -> f64 {
        self.symbol.terms()[0].order
    }
}

/// Uniform physical grid `center + k·spacing`, `|k| ≤ half_points`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalGrid {
    pub center: f64,
    pub spacing: f64,
    pub half_points: usize,
}

impl PhysicalGrid {
    pub fn new(center: f64, spacing: f64, half_points: usize) -> Result<Self> {
        if !(center.is_finite() && spacing.is_finite() && spacing > 0.0) {
            return Err(Error::config(MODULE, "physical grid needs finite center and positive spacing"));
        }
        Ok(PhysicalGrid {
            center,
            spacing,
            half_points,
        })
    }

    /// Grid for a packet of scale `t` sampled on a window of half-width
    /// `window_half_width`: spacing `π/(2·half-width)` and radius where the
    /// profile's `L²` tail drops below `tail_mass`.
    pub fn for_packet(
        profile: &PacketProfile,
        x0: f64,
        t: f64,
        window_half_width: f64,
        tail_mass: f64,
    ) -> Result<Self> {
        let spacing = PI / (2.0 * window_half_width);
        let radius = profile.mass_radius(tail_mass) / t;
        Self::new(x0, spacing, (radius / spacing).ceil() as usize)
    }

    pub fn len(&self) -> usize {
        2 * self.half_points + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, i: usize) -> f64 {
        self.center + (i as f64 - self.half_points as f64) * self.spacing
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }
}

/// Per-term values of `(f|Q_k f)` and the share of `‖f‖²` missed by the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticFormResult {
    pub per_term: Vec<Complex64>,
    pub tail_mass: f64,
}

impl QuadraticFormResult {
    pub fn total(&self) -> Complex64 {
        self.per_term.iter().sum()
    }
}

/// `(f|Pf)` for the sum of `terms`, evaluated term by term.
///
/// Terms whose coefficient does not depend on `x` use the frequency sum
/// `Σ a(ξ)|f̂(ξ)|²Δξ`; the rest go through the physical grid. Errors when the
/// grid misses more than `tail_tolerance` of `‖f‖²`.
pub fn quadratic_form(
    f: &SpectralPatch,
    terms: &[HomogeneousTerm],
    grid: &PhysicalGrid,
    tail_tolerance: f64,
) -> Result<QuadraticFormResult> {
    quadratic_form_impl(f, terms, grid, tail_tolerance, true)
}

/// As [`quadratic_form`] but always through the physical grid.
pub fn quadratic_form_full(
    f: &SpectralPatch,
    terms: &[HomogeneousTerm],
    grid: &PhysicalGrid,
    tail_tolerance: f64,
) -> Result<QuadraticFormResult> {
    quadratic_form_impl(f, terms, grid, tail_tolerance, false)
}

/// Frequency-only form `Σ a(ξ)|f̂(ξ)|²Δξ` for an `x`-independent term.
pub fn quadratic_form_fast(f: &SpectralPatch, term: &HomogeneousTerm) -> Result<Complex64> {
    if !term.coefficient.is_x_independent() {
        return Err(Error::config(MODULE, "frequency-only quadratic form needs an x-independent coefficient"));
    }
    let w = f.window();
    let h = w.spacing();
    let mut acc = Complex64::new(0.0, 0.0);
    for (xi, v) in w.points().zip(f.values()) {
        acc += term.eval(0.0, xi) * v.norm_sqr();
    }
    Ok(acc * h)
}

fn quadratic_form_impl(
    f: &SpectralPatch,
    terms: &[HomogeneousTerm],
    grid: &PhysicalGrid,
    tail_tolerance: f64,
    allow_fast: bool,
) -> Result<QuadraticFormResult> {
    let window = f.window();
    let h = window.spacing();
    let n_xi = window.num_points();
    let xis: Vec<f64> = window.points().collect();
    let fv = f.values();

    let full: Vec<usize> = (0..terms.len())
        .filter(|&k| !(allow_fast && terms[k].coefficient.is_x_independent()))
        .collect();

    // ξ-weights, split by the sign of ξ
    let has_neg = xis[0] < 0.0;
    let has_pos = xis[n_xi - 1] > 0.0;
    let signs: Vec<f64> = [(-1.0, has_neg), (1.0, has_pos)]
        .iter()
        .filter(|(_, on)| *on)
        .map(|(s, _)| *s)
        .collect();
    let n_acc = full.len() * signs.len();
    let mut weights = vec![0.0; n_acc * n_xi];
    for (a, (k, s)) in full
        .iter()
        .flat_map(|&k| signs.iter().map(move |&s| (k, s)))
        .enumerate()
    {
        for (n, &xi) in xis.iter().enumerate() {
            if xi.signum() == s {
                weights[a * n_xi + n] = terms[k].radial(xi);
            }
        }
    }

    let norm2: f64 = fv.iter().map(|v| v.norm_sqr()).sum::<f64>() * h;
    let scale = h / (2.0 * PI).sqrt();
    let dx = grid.spacing;
    let mut grid_mass = 0.0;
    let mut sums = vec![Complex64::new(0.0, 0.0); n_acc];
    let mut acc = vec![Complex64::new(0.0, 0.0); n_acc];
    for x in grid.points() {
        let rot = Complex64::from_polar(1.0, x * h);
        let mut e = Complex64::from_polar(1.0, x * xis[0]);
        let mut f_x = Complex64::new(0.0, 0.0);
        acc.iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
        for n in 0..n_xi {
            let v = e * fv[n];
            f_x += v;
            for (a, slot) in acc.iter_mut().enumerate() {
                let w = weights[a * n_xi + n];
                if w != 0.0 {
                    *slot += v * w;
                }
            }
            e *= rot;
        }
        let f_x = f_x * scale;
        grid_mass += f_x.norm_sqr() * dx;
        if n_acc > 0 {
            for (a, (k, s)) in full
                .iter()
                .flat_map(|&k| signs.iter().map(move |&s| (k, s)))
                .enumerate()
            {
                let c = terms[k].coefficient.value(x, s);
                sums[a] += f_x.conj() * c * acc[a] * scale;
            }
        }
    }

    let tail_mass = ((norm2 - grid_mass) / norm2.max(f64::MIN_POSITIVE)).max(0.0);
    if norm2 > 0.0 && tail_mass > tail_tolerance {
        return Err(Error::numerical(
            MODULE,
            "x-grid truncation tail",
            format!("grid misses {tail_mass:.3e} of the mass of f (tolerance {tail_tolerance:.1e})"),
        ));
    }

    let mut per_term = vec![Complex64::new(0.0, 0.0); terms.len()];
    for (a, k) in full
        .iter()
        .flat_map(|&k| signs.iter().map(move |_| k))
        .enumerate()
    {
        per_term[k] += sums[a] * dx;
    }
    for (k, term) in terms.iter().enumerate() {
        if !full.contains(&k) {
            per_term[k] = quadratic_form_fast(f, term)?;
        }
    }
    Ok(QuadraticFormResult {
        per_term,
        tail_mass,
    })
}

/// Noise-free errors `|t^{-λm₁}(f_t|Pf_t) − a₁(x₀, ξ₀)|` along `t_list`.
pub fn asymptotic_error_probe(
    observable: &Observable,
    family: &WavePacketFamily,
    t_list: &[f64],
) -> Result<Vec<f64>> {
    let lead = &observable.terms()[0];
    let truth = lead.principal_value(family.x0(), family.xi0());
    t_list
        .iter()
        .map(|&t| {
            let f = family.make_packet(t)?;
            let grid = PhysicalGrid::for_packet(
                family.profile(),
                family.x0(),
                t,
                f.window().half_width(),
                DEFAULT_GRID_TAIL_MASS,
            )?;
            let q = quadratic_form(&f, observable.terms(), &grid, DEFAULT_TAIL_TOLERANCE)?;
            let est = q.total() * t.powf(-family.lambda() * lead.order);
            Ok((est - truth).norm())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::inner_product_l2;

    fn term(order: f64, c: &str, hm: f64, hp: f64) -> HomogeneousTerm {
        HomogeneousTerm::new(order, Coefficient::parse(c, hm, hp).unwrap()).unwrap()
    }

    fn packet_grid(fam: &WavePacketFamily, f: &SpectralPatch, t: f64) -> PhysicalGrid {
        PhysicalGrid::for_packet(fam.profile(), fam.x0(), t, f.window().half_width(), DEFAULT_GRID_TAIL_MASS)
            .unwrap()
    }

    #[test]
    fn evaluation_examples() {
        assert_eq!(term(0.0, "1", 1.0, 1.0).eval(0.2, 3.0), Complex64::new(1.0, 0.0));
        let a = term(1.0, "1", -1.0, 1.0);
        assert_eq!(a.eval(0.0, 5.0).re, 5.0);
        assert_eq!(a.eval(0.0, -5.0).re, -5.0);
        let b = term(1.5, "2 + sin(x)", 1.0, 1.0);
        let r = b.eval(0.4, 2.0) / b.eval(0.4, 1.0);
        assert!((r.re - 2f64.powf(1.5)).abs() < 1e-15);
    }

    #[test]
    fn negative_order_is_finite_near_origin() {
        let a = term(-1.0, "1", 1.0, 1.0);
        assert_eq!(a.eval(0.0, 0.0), Complex64::new(0.0, 0.0));
        assert_eq!(a.eval(0.0, 0.1), Complex64::new(0.0, 0.0));
        assert!(a.eval(0.0, 0.3).re.is_finite());
    }

    #[test]
    fn cutoff_is_smooth_step() {
        let c = LowFrequencyCutoff::default();
        assert_eq!(c.value(0.25), 0.0);
        assert_eq!(c.value(0.5), 1.0);
        assert!((c.value(0.375) - 0.5).abs() < 1e-15);
        assert!(LowFrequencyCutoff::new(0.3, 0.6).is_err());
        assert!(LowFrequencyCutoff::new(0.125, 0.5).is_ok());
    }

    #[test]
    fn expansion_needs_decreasing_orders() {
        let err = SymbolExpansion::new(vec![term(0.0, "1", 1.0, 1.0), term(1.0, "1", 1.0, 1.0)]).unwrap_err();
        assert!(err.to_string().contains("strictly decreasing"));
        assert!(SymbolExpansion::new(vec![]).is_err());
    }

    #[test]
    fn identity_gives_norm() {
        let fam = WavePacketFamily::with_default_profile(0.2, 1.0, 2.0).unwrap();
        let t = 6.0;
        let f = fam.make_packet(t).unwrap();
        let g = packet_grid(&fam, &f, t);
        let id = [term(0.0, "1", 1.0, 1.0)];
        let q = quadratic_form_full(&f, &id, &g, DEFAULT_TAIL_TOLERANCE).unwrap();
        assert!((q.total() - 1.0).norm() < 1e-6, "{}", q.total());
    }

    #[test]
    fn derivative_symbol_gives_center_frequency() {
        for xi0 in [1.0, -1.0] {
            let fam = WavePacketFamily::with_default_profile(-0.4, xi0, 2.0).unwrap();
            for t in [4.0, 8.0] {
                let f = fam.make_packet(t).unwrap();
                let g = packet_grid(&fam, &f, t);
                let d = [term(1.0, "1", -1.0, 1.0)];
                let q = quadratic_form_full(&f, &d, &g, DEFAULT_TAIL_TOLERANCE).unwrap();
                let tl = t * t;
                assert!((q.total() - tl * xi0).norm() < 1e-6 * tl, "t = {t}: {}", q.total());
            }
        }
    }

    #[test]
    fn fast_and_full_paths_agree() {
        let fam = WavePacketFamily::with_default_profile(0.7, -1.0, 1.5).unwrap();
        let t = 10.0;
        let f = fam.make_packet(t).unwrap();
        let g = packet_grid(&fam, &f, t);
        let ts = [term(1.0, "2", 0.5, 1.0), term(0.3, "-0.7", 1.0, 1.0), term(-0.5, "3", 1.0, 0.0)];
        let fast = quadratic_form(&f, &ts, &g, DEFAULT_TAIL_TOLERANCE).unwrap();
        let full = quadratic_form_full(&f, &ts, &g, DEFAULT_TAIL_TOLERANCE).unwrap();
        for (a, b) in fast.per_term.iter().zip(&full.per_term) {
            assert!((a - b).norm() < 1e-8 * a.norm().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn quadratic_form_is_additive_over_terms() {
        let fam = WavePacketFamily::with_default_profile(0.1, 1.0, 2.0).unwrap();
        let t = 5.0;
        let f = fam.make_packet(t).unwrap();
        let g = packet_grid(&fam, &f, t);
        let ts = [term(1.0, "1 + 0.5*sin(x)", -1.0, 1.0), term(0.0, "0.7*cos(2*x)", 1.0, 1.0)];
        let both = quadratic_form(&f, &ts, &g, DEFAULT_TAIL_TOLERANCE).unwrap();
        let a = quadratic_form(&f, &ts[..1], &g, DEFAULT_TAIL_TOLERANCE).unwrap();
        let b = quadratic_form(&f, &ts[1..], &g, DEFAULT_TAIL_TOLERANCE).unwrap();
        assert!((both.total() - a.total() - b.total()).norm() < 1e-10);
    }

    #[test]
    fn narrow_grid_trips_tail_check() {
        let fam = WavePacketFamily::with_default_profile(0.0, 1.0, 2.0).unwrap();
        let t = 4.0;
        let f = fam.make_packet(t).unwrap();
        let mut g = packet_grid(&fam, &f, t);
        g.half_points = 4;
        let err = quadratic_form(&f, &[term(0.0, "x", 1.0, 1.0)], &g, DEFAULT_TAIL_TOLERANCE).unwrap_err();
        assert!(matches!(err, Error::Numerical { .. }));
    }

    #[test]
    fn multiplication_operator_matches_physical_quadrature() {
        // a(x, ξ) = c(x) for |ξ| ≥ 1/2 is multiplication by c
        let fam = WavePacketFamily::with_default_profile(0.3, 1.0, 2.0).unwrap();
        let t = 3.0;
        let f = fam.make_packet(t).unwrap();
        let g = packet_grid(&fam, &f, t);
        let q = quadratic_form(&f, &[term(0.0, "cos(2*x)", 1.0, 1.0)], &g, DEFAULT_TAIL_TOLERANCE).unwrap();
        let dx = 1e-4;
        let mut acc = 0.0;
        let mut x = 0.3 - 60.0 / t;
        while x < 0.3 + 60.0 / t {
            acc += fam.physical(t, x).norm_sqr() * (2.0 * x).cos() * dx;
            x += dx;
        }
        assert!((q.total().re - acc).abs() < 1e-6, "{} vs {acc}", q.total());
        assert!(q.total().im.abs() < 1e-10);
    }

    #[test]
    fn zeroth_order_remainder_stays_bounded() {
        let fam = WavePacketFamily::with_default_profile(0.0, 1.0, 2.0).unwrap();
        let r = [term(0.0, "1 + 0.5*sin(3*x)", 0.4, -2.0)];
        for t in [8.0, 16.0, 32.0] {
            let f = fam.make_packet(t).unwrap();
            let g = packet_grid(&fam, &f, t);
            let v = quadratic_form(&f, &r, &g, DEFAULT_TAIL_TOLERANCE).unwrap().total();
            assert!(v.norm() <= 3.0, "t = {t}: {v}");
        }
    }

    #[test]
    fn single_constant_term_has_no_asymptotic_error() {
        let fam = WavePacketFamily::with_default_profile(0.0, -1.0, 2.0).unwrap();
        let obs = Observable::new(SymbolExpansion::new(vec![term(1.0, "1.3", 2.0, 1.0)]).unwrap());
        let errs = asymptotic_error_probe(&obs, &fam, &[4.0, 8.0, 16.0]).unwrap();
        for e in errs {
            assert!(e < 1e-8, "{e}");
        }
    }

    #[test]
    fn leading_coefficient_is_recovered_at_large_t() {
        let fam = WavePacketFamily::with_default_profile(0.5, 1.0, 2.0).unwrap();
        let obs = Observable::new(
            SymbolExpansion::new(vec![term(1.0, "1 + 0.5*sin(x)", -1.0, 1.0), term(0.0, "0.7*cos(2*x)", 1.0, 1.0)])
                .unwrap(),
        );
        let e = asymptotic_error_probe(&obs, &fam, &[64.0]).unwrap();
        assert!(e[0] < 0.05, "{}", e[0]);
    }

    #[test]
    fn packet_pair_matches_physical_overlap() {
        let fam = WavePacketFamily::with_default_profile(0.25, 1.0, 2.0).unwrap();
        let lat = WavePacketFamily::shared_lattice(&[2.0, 3.0]).unwrap();
        let f2 = fam.make_packet_on(2.0, &lat).unwrap();
        let f3 = fam.make_packet_on(3.0, &lat).unwrap();
        let v = inner_product_l2(&f2, &f3).unwrap();
        let dx = 2e-4;
        let mut acc = Complex64::new(0.0, 0.0);
        let mut x = 0.25 - 100.0;
        while x < 0.25 + 100.0 {
            acc += fam.physical(2.0, x).conj() * fam.physical(3.0, x) * dx;
            x += dx;
        }
        assert!((v - acc).norm() < 1e-6, "{v} vs {acc}");
    }
}
