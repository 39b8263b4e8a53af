//! Wave packets `f_t(x) = t^{1/2} χ(t(x−x₀)) e^{i t^λ (x−x₀) ξ₀}`.
//!
//! The profile is fixed by its transform: `χ̂(η) = b·σ(|η|)` where `σ` equals
//! one on `[0, 1/2]`, vanishes from `1` on, and is joined by the standard
//! `exp(−k/s)` partition bridge in between. `b` normalises `‖χ̂‖ = 1`, so every
//! packet has unit `L²` norm. Its transform is
//! `f̂_t(ξ) = t^{−1/2} e^{−iξx₀} χ̂((ξ − t^λ ξ₀)/t)`, supported in
//! `|ξ − t^λ ξ₀| < t`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{inner_product_l2, FrequencyWindow, Lattice, SpectralPatch};

const MODULE: &str = "wave_packets";

/// Samples per packet window on a packet's own lattice, giving `Δξ = t/128`.
pub const DEFAULT_POINTS_PER_WINDOW: usize = 256;

pub const DEFAULT_SHARPNESS: f64 = 1.0;

const PROFILE_TABLE_POINTS: usize = 1 << 14;
const PROFILE_CUTOFF: f64 = 1e-12;
const TRANSFORM_POINTS: usize = 4096;
const NORMALISATION_POINTS: usize = 1 << 16;

/// The cutoff profile `χ` together with a tabulated physical-space copy.
#[derive(Debug)]
pub struct PacketProfile {
    sharpness: f64,
    b: f64,
    /// `χ(y)` sampled on `[-radius, radius]`; `χ` is real and even.
    table: Vec<f64>,
    radius: f64,
    table_step: f64,
}

impl PacketProfile {
    /// Builds the profile for a given bridge sharpness.
    pub fn new(bridge_sharpness: f64) -> Result<Self> {
        if !(bridge_sharpness.is_finite() && bridge_sharpness > 0.0) {
            return Err(Error::config(
                MODULE,
                format!("bridge sharpness must be positive (got {bridge_sharpness})"),
            ));
        }
        let k = bridge_sharpness;
        // ∫_{-1}^{1} σ(|η|)² dη by the midpoint rule, spectrally accurate here.
        let h = 1.0 / NORMALISATION_POINTS as f64;
        let mass: f64 = (0..NORMALISATION_POINTS)
            .map(|n| bridge(k, (n as f64 + 0.5) * h).powi(2))
            .sum::<f64>()
            * h
            * 2.0;
        let b = mass.powf(-0.5);

        let mut profile = PacketProfile {
            sharpness: k,
            b,
            table: Vec::new(),
            radius: 0.0,
            table_step: 0.0,
        };

        // Locate the radius beyond which |χ| stays under the cutoff.
        let peak = profile.chi_direct(0.0).abs();
        let coarse = 0.5;
        let mut radius = 8.0;
        let mut y = 0.0;
        while y < 4000.0 {
            if profile.chi_direct(y).abs() > PROFILE_CUTOFF * peak {
                radius = y + coarse;
            }
            y += coarse;
            if y > radius + 200.0 {
                break;
            }
        }
        let n = PROFILE_TABLE_POINTS;
        let step = 2.0 * radius / (n - 1) as f64;
        let half: Vec<f64> = (0..n / 2)
            .map(|i| profile.chi_direct((i as f64 + 0.5) * step))
            .collect();
        // grid symmetric about 0: y_i = -radius + i·step, i = 0..n-1
        let table = (0..n)
            .map(|i| {
                let j = if i >= n / 2 { i - n / 2 } else { n / 2 - 1 - i };
                half[j]
            })
            .collect();
        profile.table = table;
        profile.radius = radius;
        profile.table_step = step;
        Ok(profile)
    }

    /// Shared, lazily built profile per sharpness value.
    pub fn shared(bridge_sharpness: f64) -> Result<Arc<PacketProfile>> {
        static CACHE: OnceLock<Mutex<HashMap<u64, Arc<PacketProfile>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let key = bridge_sharpness.to_bits();
        if let Some(p) = cache.lock().expect("profile cache poisoned").get(&key) {
            return Ok(Arc::clone(p));
        }
        let p = Arc::new(PacketProfile::new(bridge_sharpness)?);
        cache
            .lock()
            .expect("profile cache poisoned")
            .entry(key)
            .or_insert_with(|| Arc::clone(&p));
        Ok(p)
    }

    pub fn sharpness(&self) -> f64 {
        self.sharpness
    }

    /// Normalisation constant: `χ̂ = b` on `|η| ≤ 1/2`.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// The bridge `σ(r)` alone.
    pub fn sigma(&self, r: f64) -> f64 {
        bridge(self.sharpness, r.abs())
    }

    /// `χ̂(η)`.
    pub fn chi_hat(&self, eta: f64) -> f64 {
        self.b * self.sigma(eta)
    }

    /// Radius beyond which `|χ|` is below `1e-12` of its peak.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `χ(y)` by cubic interpolation in the cached table.
    pub fn chi(&self, y: f64) -> f64 {
        let y = y.abs();
        if y >= self.radius {
            return 0.0;
        }
        let u = (y + self.radius) / self.table_step;
        let i = (u.floor() as usize).clamp(1, self.table.len() - 3);
        let s = u - i as f64;
        let (p0, p1, p2, p3) = (
            self.table[i - 1],
            self.table[i],
            self.table[i + 1],
            self.table[i + 2],
        );
        // four-point Lagrange through i-1..i+2
        let l0 = -s * (s - 1.0) * (s - 2.0) / 6.0;
        let l1 = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
        let l2 = -(s + 1.0) * s * (s - 2.0) / 2.0;
        let l3 = (s + 1.0) * s * (s - 1.0) / 6.0;
        p0 * l0 + p1 * l1 + p2 * l2 + p3 * l3
    }

    /// Radius `R` with `∫_{|y|>R} χ² dy ≤ tol` (`‖χ‖ = 1`).
    pub fn mass_radius(&self, tol: f64) -> f64 {
        let n = self.table.len();
        let step = self.table_step;
        let mut tail = 0.0;
        // walk inwards from the table edge over the positive half
        let mut i = n - 1;
        while i > n / 2 {
            let piece = 0.5 * (self.table[i].powi(2) + self.table[i - 1].powi(2)) * step;
            if 2.0 * (tail + piece) > tol {
                break;
            }
            tail += piece;
            i -= 1;
        }
        (-self.radius + i as f64 * step).max(4.0)
    }

    /// `χ(y) = (2π)^{-1/2} ∫ χ̂(η) e^{iyη} dη`, directly by quadrature.
    fn chi_direct(&self, y: f64) -> f64 {
        let h = 1.0 / TRANSFORM_POINTS as f64;
        let step = Complex64::from_polar(1.0, y * h);
        let mut e = Complex64::from_polar(1.0, 0.5 * y * h);
        let mut acc = 0.0;
        for n in 0..TRANSFORM_POINTS {
            let eta = (n as f64 + 0.5) * h;
            acc += e.re * self.chi_hat(eta);
            e *= step;
        }
        2.0 * acc * h / (2.0 * PI).sqrt()
    }
}

/// `σ(r)`: 1 on `[0, 1/2]`, 0 on `[1, ∞)`, `g(1−s)/(g(1−s)+g(s))` between,
/// with `s = 2r − 1` and `g(u) = exp(−k/u)`.
fn bridge(k: f64, r: f64) -> f64 {
    if r <= 0.5 {
        1.0
    } else if r >= 1.0 {
        0.0
    } else {
        let s = 2.0 * r - 1.0;
        let a = (-k / (1.0 - s)).exp();
        let c = (-k / s).exp();
        a / (a + c)
    }
}

/// Packets sharing a profile, a centre `x₀`, a direction `ξ₀ = ±1` and an
/// oscillation exponent `λ > 1`.
#[derive(Debug, Clone)]
pub struct WavePacketFamily {
    x0: f64,
    xi0: f64,
    lambda: f64,
    profile: Arc<PacketProfile>,
}

impl WavePacketFamily {
    pub fn new(x0: f64, xi0: f64, lambda: f64, profile: Arc<PacketProfile>) -> Result<Self> {
        if !x0.is_finite() {
            return Err(Error::config(MODULE, "packet centre x0 must be finite"));
        }
        if xi0 != 1.0 && xi0 != -1.0 {
            return Err(Error::config(
                MODULE,
                format!("direction xi0 must be +1 or -1 (got {xi0})"),
            ));
        }
        if !(lambda.is_finite() && lambda > 1.0) {
            return Err(Error::config(
                MODULE,
                format!("oscillation exponent lambda must exceed 1 (got {lambda})"),
            ));
        }
        Ok(WavePacketFamily {
            x0,
            xi0,
            lambda,
            profile,
        })
    }

    /// Family with the default profile.
    pub fn with_default_profile(x0: f64, xi0: f64, lambda: f64) -> Result<Self> {
        Self::new(x0, xi0, lambda, PacketProfile::shared(DEFAULT_SHARPNESS)?)
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn xi0(&self) -> f64 {
        self.xi0
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn profile(&self) -> &Arc<PacketProfile> {
        &self.profile
    }

    pub fn with_x0(&self, x0: f64) -> Result<Self> {
        Self::new(x0, self.xi0, self.lambda, Arc::clone(&self.profile))
    }

    pub fn with_xi0(&self, xi0: f64) -> Result<Self> {
        Self::new(self.x0, xi0, self.lambda, Arc::clone(&self.profile))
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.x0, self.xi0, lambda, Arc::clone(&self.profile))
    }

    /// Centre frequency `t^λ ξ₀`.
    pub fn center_frequency(&self, t: f64) -> f64 {
        t.powf(self.lambda) * self.xi0
    }

    /// Nominal spectral support `[t^λξ₀ − t, t^λξ₀ + t]`.
    pub fn support(&self, t: f64) -> (f64, f64) {
        let c = self.center_frequency(t);
        (c - t, c + t)
    }

    /// Lattice on which a packet alone is sampled: `Δξ = t/128`, starting at
    /// the left edge of its support.
    pub fn own_lattice(&self, t: f64) -> Result<Lattice> {
        let (lo, _) = self.support(t);
        Lattice::new(2.0 * t / DEFAULT_POINTS_PER_WINDOW as f64, lo)
    }

    /// Shared lattice for a node set: `Δξ = min t / 128`, symmetric about 0.
    pub fn shared_lattice(nodes: &[f64]) -> Result<Lattice> {
        let t_min = nodes.iter().copied().fold(f64::INFINITY, f64::min);
        if !t_min.is_finite() {
            return Err(Error::config(MODULE, "node set is empty"));
        }
        Lattice::centered(2.0 * t_min / DEFAULT_POINTS_PER_WINDOW as f64)
    }

    /// `f̂_t` on the packet's own lattice.
    pub fn make_packet(&self, t: f64) -> Result<SpectralPatch> {
        self.make_packet_on(t, &self.own_lattice(t)?)
    }

    /// `f̂_t` sampled on the given lattice.
    pub fn make_packet_on(&self, t: f64, lattice: &Lattice) -> Result<SpectralPatch> {
        check_t(t)?;
        let (lo, hi) = self.support(t);
        let window = lattice.window_covering(lo, hi)?;
        self.sample(t, window)
    }

    /// `f̂_t` on an explicit window.
    pub fn sample(&self, t: f64, window: FrequencyWindow) -> Result<SpectralPatch> {
        check_t(t)?;
        let c = self.center_frequency(t);
        let amp = t.powf(-0.5);
        SpectralPatch::from_fn(window, |xi| {
            let v = self.profile.chi_hat((xi - c) / t);
            if v == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::from_polar(amp * v, -xi * self.x0)
            }
        })
    }

    /// `f_t(x)` from the cached profile.
    pub fn physical(&self, t: f64, x: f64) -> Complex64 {
        let y = x - self.x0;
        let amp = t.sqrt() * self.profile.chi(t * y);
        Complex64::from_polar(amp, t.powf(self.lambda) * y * self.xi0)
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 1.0) {
        return Err(Error::config(
            MODULE,
            format!("packet scale t must be at least 1 (got {t})"),
        ));
    }
    Ok(())
}

/// Table of `|(f_t|f_s)|` over a sample of `[T, 2T]²` with a fitted envelope.
#[derive(Debug, Clone)]
pub struct OverlapTable {
    pub big_t: f64,
    /// `(t, s, |(f_t|f_s)|)`.
    pub entries: Vec<(f64, f64, f64)>,
    /// Smallest `C` with `|(f_t|f_s)| ≤ C / (1 + |t^λ − s^λ|/T)` on the table.
    pub envelope: f64,
}

impl OverlapTable {
    pub fn envelope_bound(&self, lambda: f64, t: f64, s: f64) -> f64 {
        self.envelope / (1.0 + (t.powf(lambda) - s.powf(lambda)).abs() / self.big_t)
    }
}

/// Overlaps `|(f_t|f_s)|` on the given `(t, s)` pairs, all inside `[T, 2T]`.
pub fn packet_overlap_decay(
    family: &WavePacketFamily,
    big_t: f64,
    pairs: &[(f64, f64)],
) -> Result<OverlapTable> {
    let lam = family.lambda();
    let threshold = 2f64.powf(1.0 / (lam - 1.0));
    if big_t <= threshold {
        return Err(Error::config(
            MODULE,
            format!("overlap decay needs T > 2^(1/(lambda-1)) = {threshold:.4} (got {big_t})"),
        ));
    }
    if let Some(&(t, s)) = pairs
        .iter()
        .find(|(t, s)| !(big_t..=2.0 * big_t).contains(t) || !(big_t..=2.0 * big_t).contains(s))
    {
        return Err(Error::config(
            MODULE,
            format!("pair ({t}, {s}) lies outside [T, 2T]"),
        ));
    }
    let lattice = Lattice::centered(2.0 * big_t / DEFAULT_POINTS_PER_WINDOW as f64)?;
    let mut entries = Vec::with_capacity(pairs.len());
    let mut envelope: f64 = 0.0;
    for &(t, s) in pairs {
        let ft = family.make_packet_on(t, &lattice)?;
        let fs = family.make_packet_on(s, &lattice)?;
        let v = inner_product_l2(&ft, &fs)?.norm();
        envelope = envelope.max(v * (1.0 + (t.powf(lam) - s.powf(lam)).abs() / big_t));
        entries.push((t, s, v));
    }
    Ok(OverlapTable {
        big_t,
        entries,
        envelope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn family(lambda: f64) -> WavePacketFamily {
        WavePacketFamily::with_default_profile(0.3, 1.0, lambda).unwrap()
    }

    #[test]
    fn bridge_values() {
        let p = PacketProfile::shared(1.0).unwrap();
        assert_eq!(p.sigma(0.4), 1.0);
        assert_eq!(p.sigma(0.5), 1.0);
        assert_eq!(p.sigma(1.1), 0.0);
        assert_eq!(p.sigma(-1.1), 0.0);
        assert!((p.sigma(0.75) - 0.5).abs() < 1e-15);
        assert_eq!(p.chi_hat(0.2), p.b());
    }

    #[test]
    fn sharpness_must_be_positive() {
        assert!(PacketProfile::new(0.0).is_err());
        assert!(PacketProfile::new(-1.0).is_err());
    }

    #[test]
    fn normalisation_against_simpson_oracle() {
        // independent composite Simpson rule on the bridge
        let p = PacketProfile::shared(1.0).unwrap();
        let n = 200_000;
        let h = 2.0 / n as f64;
        let mut s = 0.0;
        for i in 0..=n {
            let x = -1.0 + i as f64 * h;
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * p.chi_hat(x).powi(2);
        }
        let norm2 = s * h / 3.0;
        assert!((norm2 - 1.0).abs() < 1e-8, "‖χ̂‖² = {norm2}");
    }

    #[test]
    fn profile_table_matches_direct_transform() {
        let p = PacketProfile::shared(1.0).unwrap();
        for &y in &[0.0, 0.7, 3.3, 12.25, 57.0, 140.5] {
            let d = p.chi_direct(y);
            assert!((p.chi(y) - d).abs() < 1e-7, "y = {y}: {} vs {d}", p.chi(y));
        }
        assert!(p.radius() > 100.0);
        assert_eq!(p.chi(p.radius() + 1.0), 0.0);
    }

    #[test]
    fn packets_have_unit_norm() {
        let fam = family(2.0);
        for t in [2.0, 8.0, 32.0] {
            let f = fam.make_packet(t).unwrap();
            assert!((f.l2_norm() - 1.0).abs() < 1e-6, "t = {t}");
            assert_eq!(f.window().num_points(), DEFAULT_POINTS_PER_WINDOW);
        }
    }

    #[test]
    fn window_read_off_transform() {
        let fam = WavePacketFamily::with_default_profile(0.0, 1.0, 2.0).unwrap();
        let f = fam.make_packet(10.0).unwrap();
        assert!((f.window().center() - 100.0).abs() < 1e-12);
        assert!((f.window().half_width() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_small_t_and_bad_parameters() {
        let fam = family(2.0);
        assert!(fam.make_packet(0.5).is_err());
        assert!(WavePacketFamily::with_default_profile(0.0, 0.5, 2.0).is_err());
        assert!(WavePacketFamily::with_default_profile(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn spectral_support_is_exact() {
        let fam = family(2.0);
        let t = 5.0;
        let lat = Lattice::centered(0.01).unwrap();
        let w = lat.window_covering(10.0, 40.0).unwrap();
        let f = fam.sample(t, w).unwrap();
        let c = fam.center_frequency(t);
        for (xi, v) in w.points().zip(f.values()) {
            if (xi - c).abs() >= t {
                assert_eq!(*v, Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn conjugate_windows_never_meet() {
        for &lam in &[1.1, 1.5, 2.0, 3.0] {
            let fam = family(lam);
            for &t in &[1.01, 1.5, 3.0, 20.0] {
                for &s in &[1.01, 2.0, 7.0] {
                    let (lo_t, _) = fam.support(t);
                    let (_, hi_s) = fam.support(s);
                    // conj(f_s) lives on [-(s^λ+s), -(s^λ-s)]
                    assert!(lo_t > -(s.powf(lam) - s) || hi_s < 0.0);
                    assert!(lo_t >= 0.0 || t.powf(lam) - t >= 0.0);
                }
            }
        }
    }

    #[test]
    fn overlap_decay_table() {
        let fam = family(2.0);
        let big_t = 8.0;
        let mut pairs = vec![];
        for i in 0..=8 {
            for j in 0..=8 {
                pairs.push((8.0 + i as f64, 8.0 + j as f64 * 0.125));
            }
        }
        let table = packet_overlap_decay(&fam, big_t, &pairs).unwrap();
        for &(t, s, v) in &table.entries {
            if t == s {
                assert!((v - 1.0).abs() < 1e-6);
            }
            assert!(v <= table.envelope_bound(2.0, t, s) * (1.0 + 1e-12));
        }
        assert!(packet_overlap_decay(&fam, 1.5, &[(1.5, 1.5)]).is_err());
    }
}
