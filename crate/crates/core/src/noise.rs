//! Joint sampling of the measurement errors `E_β(f̄_t, f_t)` over a node set.
//!
//! The errors are centred circular complex Gaussians with covariance
//! `C_ts = |(f_t|f_s)_β|²`. Packets whose frequency windows are disjoint are
//! uncorrelated, so the kernel is stored as a variable band (row `i` keeps
//! columns `first[i]..=i`) and factored in place.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::packets::WavePacketFamily;
use crate::parallel::try_map_indexed;
use crate::rng::{circular_normal, purpose, stream};
use crate::spectral::{inner_product_sobolev, JapaneseBracketWeight, Lattice, SpectralPatch};

const MODULE: &str = "noise_engine";

/// Pivots below `-NEGATIVE_PIVOT_TOL·trace` mean the kernel is not PSD.
pub const NEGATIVE_PIVOT_TOL: f64 = 1e-10;
/// Pivots below `ZERO_PIVOT_TOL·max diag` are treated as exact zeros.
const ZERO_PIVOT_TOL: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct NoiseKernel {
    nodes: Vec<f64>,
    beta: f64,
    first: Vec<usize>,
    offsets: Vec<usize>,
    cov: Vec<f64>,
    factor: Vec<f64>,
}

impl NoiseKernel {
    /// Kernel from explicit banded entries: `rows[i]` holds `C_{i,first[i]..=i}`.
    pub fn from_band(nodes: Vec<f64>, beta: f64, first: Vec<usize>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = nodes.len();
        if first.len() != n || rows.len() != n {
            return Err(Error::config(MODULE, "band layout does not match the node count"));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cov = Vec::new();
        offsets.push(0);
        for i in 0..n {
            if first[i] > i || rows[i].len() != i - first[i] + 1 {
                return Err(Error::config(MODULE, format!("row {i} of the band is malformed")));
            }
            if i > 0 && first[i] < first[i - 1] {
                return Err(Error::config(MODULE, "band starts must be non-decreasing"));
            }
            if let Some(v) = rows[i].iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::numerical(
                    MODULE,
                    "kernel entries finite and nonnegative",
                    format!("row {i} has entry {v}"),
                ));
            }
            cov.extend_from_slice(&rows[i]);
            offsets.push(cov.len());
        }
        let mut k = NoiseKernel {
            nodes,
            beta,
            first,
            offsets,
            factor: vec![0.0; cov.len()],
            cov,
        };
        k.factorize()?;
        Ok(k)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `C_ij`, zero outside the band.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if j < self.first[i] {
            0.0
        } else {
            self.cov[self.offsets[i] + j - self.first[i]]
        }
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.entry(i, i)
    }

    pub fn trace(&self) -> f64 {
        (0..self.len()).map(|i| self.diag(i)).sum()
    }

    /// Largest number of stored entries in any row.
    pub fn bandwidth(&self) -> usize {
        (0..self.len()).map(|i| i - self.first[i] + 1).max().unwrap_or(0)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        (0..n).map(|i| (0..n).map(|j| self.entry(i, j)).collect()).collect()
    }

    /// `wᵀ C w`: the variance of `Σ w_k E_k`.
    pub fn weighted_variance(&self, w: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.len() {
            let row = &self.cov[self.offsets[i]..self.offsets[i + 1]];
            for (o, c) in row.iter().enumerate() {
                let j = self.first[i] + o;
                let pair = w[i] * w[j] * c;
                s += if i == j { pair } else { 2.0 * pair };
            }
        }
        s
    }

    /// `L z` with `C ≈ L Lᵀ`.
    pub fn apply_factor(&self, z: &[Complex64]) -> Vec<Complex64> {
        (0..self.len())
            .map(|i| {
                let row = &self.factor[self.offsets[i]..self.offsets[i + 1]];
                row.iter()
                    .zip(&z[self.first[i]..=i])
                    .map(|(l, z)| z * *l)
                    .sum()
            })
            .collect()
    }

    /// Semidefinite Cholesky on the band. Small pivots zero their column.
    fn factorize(&mut self) -> Result<()> {
        let n = self.len();
        let trace = self.trace();
        let max_diag = (0..n).map(|i| self.diag(i)).fold(0.0, f64::max);
        let neg_tol = NEGATIVE_PIVOT_TOL * trace;
        let zero_tol = ZERO_PIVOT_TOL * max_diag;
        for i in 0..n {
            for j in self.first[i]..=i {
                let lo = self.first[i].max(self.first[j]);
                let mut s = self.cov[self.offsets[i] + j - self.first[i]];
                for k in lo..j {
                    s -= self.factor[self.offsets[i] + k - self.first[i]]
                        * self.factor[self.offsets[j] + k - self.first[j]];
                }
                let slot = self.offsets[i] + j - self.first[i];
                if j < i {
                    let d = self.factor[self.offsets[j] + j - self.first[j]];
                    self.factor[slot] = if d > 0.0 { s / d } else { 0.0 };
                } else if s < -neg_tol {
                    return Err(Error::numerical(
                        MODULE,
                        "kernel positive semidefinite",
                        format!("pivot {s:.3e} at node {i} (t = {}) below -{neg_tol:.3e}", self.nodes[i]),
                    ));
                } else {
                    self.factor[slot] = if s > zero_tol { s.sqrt() } else { 0.0 };
                }
            }
        }
        Ok(())
    }
}

/// One joint draw of the errors at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub nodes: Vec<f64>,
    pub values: Vec<Complex64>,
    pub seed: u64,
}

/// Kernel for `nodes` on the lattice shared by the node set.
pub fn build_kernel(family: &WavePacketFamily, nodes: &[f64], beta: f64) -> Result<NoiseKernel> {
    let lattice = WavePacketFamily::shared_lattice(nodes)?;
    build_kernel_on(family, nodes, beta, &lattice)
}

/// Kernel for `nodes` with every packet sampled on `lattice`.
pub fn build_kernel_on(
    family: &WavePacketFamily,
    nodes: &[f64],
    beta: f64,
    lattice: &Lattice,
) -> Result<NoiseKernel> {
    check_nodes(nodes)?;
    if !beta.is_finite() {
        return Err(Error::config(MODULE, "beta must be finite"));
    }
    let patches: Vec<SpectralPatch> = try_map_indexed(nodes.len(), |i| family.make_packet_on(nodes[i], lattice))?;
    let w = JapaneseBracketWeight::new(beta);
    let n = nodes.len();
    let mut first = vec![0; n];
    for i in 0..n {
        let mut j = if i > 0 { first[i - 1] } else { 0 };
        while j < i && !patches[j].window().overlaps(patches[i].window()) {
            j += 1;
        }
        first[i] = j;
    }
    let rows = try_map_indexed(n, |i| {
        (first[i]..=i)
            .map(|j| inner_product_sobolev(&patches[i], &patches[j], w).map(|v| v.norm_sqr()))
            .collect::<Result<Vec<f64>>>()
    })?;
    NoiseKernel::from_band(nodes.to_vec(), beta, first, rows)
}

fn check_nodes(nodes: &[f64]) -> Result<()> {
    if nodes.is_empty() {
        return Err(Error::config(MODULE, "node set is empty"));
    }
    if let Some(t) = nodes.iter().find(|t| !(t.is_finite() && **t >= 1.0)) {
        return Err(Error::config(MODULE, format!("nodes must satisfy t >= 1 (got {t})")));
    }
    if nodes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::config(MODULE, "nodes must be strictly increasing"));
    }
    Ok(())
}

/// `L z` with `z` drawn from the stream addressed by `seed`.
pub fn sample_path(kernel: &NoiseKernel, seed: u64) -> NoisePath {
    let mut rng = stream(seed, purpose::KERNEL_PATH, &[]);
    sample_path_with(kernel, &mut rng, seed)
}

pub fn sample_path_with(kernel: &NoiseKernel, rng: &mut ChaCha8Rng, seed: u64) -> NoisePath {
    let z: Vec<Complex64> = (0..kernel.len()).map(|_| circular_normal(rng)).collect();
    NoisePath {
        nodes: kernel.nodes.clone(),
        values: kernel.apply_factor(&z),
        seed,
    }
}

/// Reusable setup for drawing explicit basis-expansion realisations.
#[derive(Debug, Clone)]
pub struct BasisOracle {
    nodes: Vec<f64>,
    /// `(f̄_t|e_n)_β` over the negative index range, per node.
    left: Vec<Vec<Complex64>>,
    /// `(f_t|e_m)_β` over the positive index range, per node.
    right: Vec<Vec<Complex64>>,
}

impl BasisOracle {
    /// Truncated basis `ê_n = ⟨ξ_n⟩^{-β} Δξ^{-1/2} 1_{cell n}` on the centred
    /// `lattice`, keeping `truncation` cells on each side of zero.
    pub fn new(
        family: &WavePacketFamily,
        nodes: &[f64],
        beta: f64,
        lattice: &Lattice,
        truncation: usize,
    ) -> Result<Self> {
        check_nodes(nodes)?;
        if lattice.origin() != 0.0 {
            return Err(Error::config(MODULE, "basis oracle needs a lattice centred at zero"));
        }
        if truncation == 0 || truncation > 128 {
            return Err(Error::config(
                MODULE,
                format!("basis truncation must be in 1..=128 (got {truncation})"),
            ));
        }
        let h = lattice.spacing();
        let limit = truncation as f64 * h;
        let w = JapaneseBracketWeight::new(beta);
        let patches: Vec<SpectralPatch> = nodes
            .iter()
            .map(|&t| family.make_packet_on(t, lattice))
            .collect::<Result<_>>()?;
        for (t, p) in nodes.iter().zip(&patches) {
            let win = p.window();
            if win.start() < -limit - 1e-12 || win.end() > limit + 1e-12 {
                return Err(Error::config(
                    MODULE,
                    format!(
                        "packet window [{:.4}, {:.4}] at t = {t} escapes the truncated basis [-{limit:.4}, {limit:.4}]",
                        win.start(),
                        win.end()
                    ),
                ));
            }
        }
        // cell k ↔ frequency (k + 1/2)h; label cells by |k| on either side
        let coeffs = |p: &SpectralPatch| -> Vec<Complex64> {
            let mut out = vec![Complex64::new(0.0, 0.0); truncation];
            for (xi, v) in p.window().points().zip(p.values()) {
                let k = (xi / h - 0.5).round() as i64;
                let label = if k >= 0 { k } else { -k - 1 } as usize;
                // (g|e_n)_β = conj(ĝ(ξ_n)) ⟨ξ_n⟩^β Δξ^{1/2}
                out[label] = v.conj() * w.weight(xi).sqrt() * h.sqrt();
            }
            out
        };
        // f̄_t has transform conj(f̂_t(−ξ)), so its coefficients on the
        // mirrored cells are the conjugates of those of f_t
        let right: Vec<Vec<Complex64>> = patches.iter().map(coeffs).collect();
        let left = right
            .iter()
            .map(|r| r.iter().map(|c| c.conj()).collect())
            .collect();
        Ok(BasisOracle {
            nodes: nodes.to_vec(),
            left,
            right,
        })
    }

    /// `E_β(f̄_t, f_t) = Σ_{n,m} (f̄_t|e_n)_β (f_t|e_m)_β X_{nm}`.
    pub fn sample(&self, seed: u64) -> NoisePath {
        let mut rng = stream(seed, purpose::BASIS_ORACLE, &[]);
        let active = |rows: &[Vec<Complex64>]| -> Vec<usize> {
            (0..rows[0].len())
                .filter(|&k| rows.iter().any(|r| r[k] != Complex64::new(0.0, 0.0)))
                .collect()
        };
        let ln = active(&self.left);
        let rm = active(&self.right);
        let mut values = vec![Complex64::new(0.0, 0.0); self.nodes.len()];
        for &n in &ln {
            for &m in &rm {
                let x = circular_normal(&mut rng);
                for (k, v) in values.iter_mut().enumerate() {
                    *v += self.left[k][n] * self.right[k][m] * x;
                }
            }
        }
        NoisePath {
            nodes: self.nodes.clone(),
            values,
            seed,
        }
    }
}

/// One basis-expansion realisation (see [`BasisOracle`]).
pub fn basis_oracle_sample(
    family: &WavePacketFamily,
    nodes: &[f64],
    beta: f64,
    lattice: &Lattice,
    truncation: usize,
    seed: u64,
) -> Result<NoisePath> {
    Ok(BasisOracle::new(family, nodes, beta, lattice, truncation)?.sample(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fam(lambda: f64) -> WavePacketFamily {
        WavePacketFamily::with_default_profile(0.1, 1.0, lambda).unwrap()
    }

    #[test]
    fn single_node_unit_variance() {
        let k = build_kernel(&fam(2.0), &[5.0], 0.0).unwrap();
        assert!((k.diag(0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn far_nodes_are_uncorrelated() {
        let k = build_kernel(&fam(2.0), &[4.0, 20.0], 0.0).unwrap();
        assert_eq!(k.entry(0, 1), 0.0);
        assert_eq!(k.bandwidth(), 1);
    }

    #[test]
    fn close_nodes_match_fine_lattice() {
        let f = fam(2.0);
        let nodes = [8.0, 8.05];
        let k = build_kernel(&f, &nodes, 0.0).unwrap();
        let fine = Lattice::centered(8.0 / 512.0).unwrap();
        let kf = build_kernel_on(&f, &nodes, 0.0, &fine).unwrap();
        assert!(k.entry(0, 1) > 0.1);
        assert!((k.entry(0, 1) - kf.entry(0, 1)).abs() < 1e-8, "{} vs {}", k.entry(0, 1), kf.entry(0, 1));
    }

    #[test]
    fn diagonal_is_sobolev_norm_to_fourth() {
        let f = fam(2.0);
        let nodes = [4.0, 4.5, 5.0];
        let k = build_kernel(&f, &nodes, 0.5).unwrap();
        let lat = WavePacketFamily::shared_lattice(&nodes).unwrap();
        for (i, &t) in nodes.iter().enumerate() {
            let n = f.make_packet_on(t, &lat).unwrap().sobolev_norm(JapaneseBracketWeight::new(0.5));
            assert!((k.diag(i) / n.powi(4) - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn non_psd_band_is_rejected() {
        let rows = vec![vec![1.0], vec![2.0, 1.0]];
        let err = NoiseKernel::from_band(vec![1.0, 2.0], 0.0, vec![0, 0], rows).unwrap_err();
        assert!(matches!(err, Error::Numerical { invariant: "kernel positive semidefinite", .. }));
    }

    #[test]
    fn factor_reproduces_kernel() {
        let f = fam(1.5);
        let nodes: Vec<f64> = (0..40).map(|i| 8.0 + i as f64 * 0.2).collect();
        let k = build_kernel(&f, &nodes, 0.25).unwrap();
        let n = nodes.len();
        let cols: Vec<Vec<Complex64>> = (0..n)
            .map(|j| {
                let mut e = vec![Complex64::new(0.0, 0.0); n];
                e[j] = Complex64::new(1.0, 0.0);
                k.apply_factor(&e)
            })
            .collect();
        for i in 0..n {
            for j in 0..n {
                let llt: f64 = (0..n).map(|c| cols[c][i].re * cols[c][j].re).sum();
                assert!((llt - k.entry(i, j)).abs() < 1e-9 * k.trace(), "({i},{j})");
            }
        }
    }

    #[test]
    fn paths_are_reproducible() {
        let k = build_kernel(&fam(2.0), &[3.0, 3.1, 3.2], 0.0).unwrap();
        assert_eq!(sample_path(&k, 11), sample_path(&k, 11));
        assert_ne!(sample_path(&k, 11), sample_path(&k, 12));
    }

    #[test]
    fn nodes_validated() {
        let f = fam(2.0);
        assert!(build_kernel(&f, &[], 0.0).is_err());
        assert!(build_kernel(&f, &[0.5], 0.0).is_err());
        assert!(build_kernel(&f, &[3.0, 2.0], 0.0).is_err());
    }

    #[test]
    fn basis_oracle_rejects_escaping_windows() {
        let f = fam(1.5);
        let lat = Lattice::centered(0.1).unwrap();
        assert!(BasisOracle::new(&f, &[2.0], 0.0, &lat, 20).is_err());
        assert!(BasisOracle::new(&f, &[2.0], 0.0, &lat, 60).is_ok());
        assert!(BasisOracle::new(&f, &[2.0], 0.0, &lat, 200).is_err());
    }

    #[test]
    fn basis_oracle_unit_variance() {
        let f = fam(1.5);
        let lat = Lattice::centered(0.1).unwrap();
        let oracle = BasisOracle::new(&f, &[2.0], 0.0, &lat, 60).unwrap();
        let n = 4000;
        let m2: f64 = (0..n).map(|s| oracle.sample(s).values[0].norm_sqr()).sum::<f64>() / n as f64;
        assert!((m2 - 1.0).abs() < 0.08, "{m2}");
    }
}
