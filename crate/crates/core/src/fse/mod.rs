//! Frequency selective extrapolation over a 3D Fourier dictionary.
//!
//! The model `g` is built greedily. Each iteration picks the DFT basis
//! function whose weighted projection removes the most residual energy,
//! adds a damped copy of it (`γ · projection`) to the model, and subtracts it
//! from the residual. For real input the chosen frequency and its mirror are
//! always added together with conjugate coefficients, so `g` stays real.
//!
//! Everything runs in the frequency domain. With `R = FFT(r·w)` and
//! `W = FFT(w)`, the projection onto basis `k` is `R[k] / Σw`, and
//! subtracting `c·φ_u` from the residual turns `R[k]` into
//! `R[k] − c·W[k − u]`. One iteration therefore costs one pass over the
//! grid. [`reference`] holds a direct spatial-domain implementation used to
//! check this path.

mod fft3;
pub mod reference;
mod weight;

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use thiserror::Error;

use crate::volume::ExtrapolationVolume;

pub use fft3::{BasisIndex, Fft3, GridDims};
pub use weight::{isotropic_weight, make_weight, WeightField};

#[derive(Debug, Error, PartialEq)]
pub enum FseError {
    #[error("volume has no support samples")]
    NoSupport,
    #[error("transform grid {grid} is smaller than the volume {volume:?}")]
    GridTooSmall {
        grid: GridDims,
        volume: (usize, usize, usize),
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FseConfig {
    pub fft_dims: GridDims,
    /// Orthogonality deficiency compensation factor, in `(0, 1]`.
    pub gamma: f64,
    /// Isotropic weight decay, in `(0, 1)`.
    pub rho: f64,
    pub max_iterations: usize,
}

impl Default for FseConfig {
    fn default() -> Self {
        FseConfig {
            fft_dims: GridDims::new(64, 64, 16),
            gamma: 0.6,
            rho: 0.8,
            max_iterations: 100,
        }
    }
}

impl FseConfig {
    pub fn validate(&self, volume_dims: (usize, usize, usize)) -> Result<(), FseError> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(FseError::InvalidConfig(format!(
                "gamma must be in (0, 1], got {}",
                self.gamma
            )));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(FseError::InvalidConfig(format!(
                "rho must be in (0, 1), got {}",
                self.rho
            )));
        }
        if !self.fft_dims.covers(volume_dims) {
            return Err(FseError::GridTooSmall {
                grid: self.fft_dims,
                volume: volume_dims,
            });
        }
        Ok(())
    }
}

/// One basis selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChosenBasis {
    /// 1-based iteration number.
    pub iteration: usize,
    /// Linear index of the lower member of the conjugate pair.
    pub index: usize,
    pub basis: BasisIndex,
    /// Coefficient added for `index`; the mirror gets its conjugate.
    pub coefficient: Complex64,
    /// False for self-conjugate frequencies, which are real basis functions.
    pub paired: bool,
}

/// Result of model generation over one volume.
#[derive(Debug, Clone, PartialEq)]
pub struct FseModel {
    dims: (usize, usize, usize),
    g: Vec<f64>,
    pub chosen: Vec<ChosenBasis>,
    /// Weighted residual energy `Σ w·r²`, starting with the initial residual.
    pub residual_energy_trace: Vec<f64>,
    /// Largest imaginary part seen when transforming the model back.
    pub max_imaginary: f64,
}

impl FseModel {
    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.g
    }

    pub fn get(&self, m: usize, n: usize, p: usize) -> f64 {
        self.g[(p * self.dims.1 + n) * self.dims.0 + m]
    }

    pub fn energy_non_increasing(&self) -> bool {
        self.residual_energy_trace.windows(2).all(|w| w[1] <= w[0])
    }

    /// `iteration,km,kn,kp,coef_re,coef_im,paired,residual_energy`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,km,kn,kp,coef_re,coef_im,paired,residual_energy\n");
        if let Some(e0) = self.residual_energy_trace.first() {
            let _ = writeln!(out, "0,,,,,,,{e0:.12e}");
        }
        for (c, e) in self
            .chosen
            .iter()
            .zip(self.residual_energy_trace.iter().skip(1))
        {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.12e},{:.12e},{},{:.12e}",
                c.iteration,
                c.basis.km,
                c.basis.kn,
                c.basis.kp,
                c.coefficient.re,
                c.coefficient.im,
                c.paired,
                e
            );
        }
        out
    }
}

/// Frequency of maximum `|spectrum|` among pair representatives
/// (`k ≤ −k` in linear order). Ties go to the lowest index.
///
/// With unit-modulus basis functions the projection denominator `Σw` is the
/// same for every `k`, so the largest projected energy is the largest
/// spectral magnitude.
pub fn select_basis(spectrum: &[Complex64], grid: GridDims) -> usize {
    let mut best = 0;
    let mut best_energy = f64::NEG_INFINITY;
    for (k, v) in spectrum.iter().enumerate() {
        let e = v.norm_sqr();
        if e > best_energy && k <= grid.conjugate(k) {
            best = k;
            best_energy = e;
        }
    }
    best
}

/// Shift tables for one axis: `(k − u) mod len` and `(k + u) mod len`.
fn shift_tables(len: usize, u: usize) -> (Vec<usize>, Vec<usize>) {
    let minus = (0..len).map(|k| (k + len - u) % len).collect();
    let plus = (0..len).map(|k| (k + u) % len).collect();
    (minus, plus)
}

/// Iteration state of the frequency-domain model generation.
pub struct FseState {
    config: FseConfig,
    volume_dims: (usize, usize, usize),
    grid: GridDims,
    fft: Fft3,
    weight_spectrum: Vec<Complex64>,
    spectrum: Vec<Complex64>,
    coefficients: Vec<Complex64>,
    weight_sum: f64,
    energy: f64,
    chosen: Vec<ChosenBasis>,
    trace: Vec<f64>,
    rep: Vec<bool>,
}

impl FseState {
    /// Starts from `g = 0` and `r = volume` on the support.
    pub fn new(volume: &ExtrapolationVolume, config: &FseConfig) -> Result<Self, FseError> {
        config.validate(volume.dims())?;
        let weight = make_weight(volume, config.rho)?;
        let weight_sum = weight.sum();
        if weight_sum <= 0.0 {
            return Err(FseError::NoSupport);
        }
        let grid = config.fft_dims;
        let (vm, vn, vp) = volume.dims();
        let mut fft = Fft3::new(grid);

        let mut weight_spectrum = vec![Complex64::default(); grid.len()];
        let mut spectrum = vec![Complex64::default(); grid.len()];
        let mut energy = 0.0;
        for p in 0..vp {
            for n in 0..vn {
                for m in 0..vm {
                    let w = weight.get(m, n, p);
                    let r = volume.sample(m, n, p);
                    let g = grid.index(m, n, p);
                    weight_spectrum[g] = Complex64::new(w, 0.0);
                    spectrum[g] = Complex64::new(w * r, 0.0);
                    energy += w * r * r;
                }
            }
        }
        fft.forward(&mut weight_spectrum);
        fft.forward(&mut spectrum);

        let rep = (0..grid.len()).map(|k| k <= grid.conjugate(k)).collect();
        Ok(FseState {
            config: config.clone(),
            volume_dims: volume.dims(),
            grid,
            fft,
            weight_spectrum,
            spectrum,
            coefficients: vec![Complex64::default(); grid.len()],
            weight_sum,
            energy,
            chosen: Vec::new(),
            trace: vec![energy],
            rep,
        })
    }

    pub fn iteration(&self) -> usize {
        self.chosen.len()
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn chosen(&self) -> &[ChosenBasis] {
        &self.chosen
    }

    /// Current spectrum of the weighted residual.
    pub fn residual_spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    pub fn weight_spectrum(&self) -> &[Complex64] {
        &self.weight_spectrum
    }

    fn select(&self) -> usize {
        let mut best = 0;
        let mut best_energy = f64::NEG_INFINITY;
        for (k, v) in self.spectrum.iter().enumerate() {
            let e = v.norm_sqr();
            if e > best_energy && self.rep[k] {
                best = k;
                best_energy = e;
            }
        }
        best
    }

    /// One greedy step: select, estimate the coefficient, update model,
    /// spectrum and energy.
    pub fn iterate(&mut self) -> ChosenBasis {
        let grid = self.grid;
        let gamma = self.config.gamma;
        let s = self.weight_sum;
        let u = self.select();
        let mirror = grid.conjugate(u);
        let paired = mirror != u;
        let r_u = self.spectrum[u];

        let coefficient = if paired {
            r_u * (gamma / s)
        } else {
            Complex64::new(r_u.re * gamma / s, 0.0)
        };

        let delta = if paired {
            let w_2u = self.weight_spectrum[grid.conjugate(self.double(u))];
            let r2 = r_u.norm_sqr();
            -4.0 * gamma * r2 / s
                + 2.0 * gamma * gamma * r2 / s
                + 2.0 * (coefficient * coefficient * w_2u).re
        } else {
            -(2.0 * gamma - gamma * gamma) * r_u.re * r_u.re / s
        };
        self.energy += delta;

        self.coefficients[u] += coefficient;
        if paired {
            self.coefficients[mirror] += coefficient.conj();
        }
        self.update_spectrum(u, coefficient, paired);

        let choice = ChosenBasis {
            iteration: self.chosen.len() + 1,
            index: u,
            basis: grid.coords(u),
            coefficient,
            paired,
        };
        self.chosen.push(choice);
        self.trace.push(self.energy);
        choice
    }

    /// Linear index of `2u`.
    fn double(&self, u: usize) -> usize {
        let g = self.grid;
        let k = g.coords(u);
        g.index((2 * k.km) % g.m, (2 * k.kn) % g.n, (2 * k.kp) % g.p)
    }

    /// `R[k] -= c·W[k − u]`, plus `conj(c)·W[k + u]` for a pair.
    fn update_spectrum(&mut self, u: usize, c: Complex64, paired: bool) {
        let g = self.grid;
        let uk = g.coords(u);
        let (m_minus, m_plus) = shift_tables(g.m, uk.km);
        let (n_minus, n_plus) = shift_tables(g.n, uk.kn);
        let (p_minus, p_plus) = shift_tables(g.p, uk.kp);
        let cc = c.conj();
        let w = &self.weight_spectrum;
        for kp in 0..g.p {
            for kn in 0..g.n {
                let row = (kp * g.n + kn) * g.m;
                let row_minus = (p_minus[kp] * g.n + n_minus[kn]) * g.m;
                let row_plus = (p_plus[kp] * g.n + n_plus[kn]) * g.m;
                let out = &mut self.spectrum[row..row + g.m];
                if paired {
                    for (km, r) in out.iter_mut().enumerate() {
                        *r -= c * w[row_minus + m_minus[km]] + cc * w[row_plus + m_plus[km]];
                    }
                } else {
                    for (km, r) in out.iter_mut().enumerate() {
                        *r -= c * w[row_minus + m_minus[km]];
                    }
                }
            }
        }
    }

    /// Model value at volume coordinates `coords` from the coefficients so far.
    pub fn evaluate_at(&self, coords: &[(usize, usize, usize)]) -> Vec<f64> {
        let mut out = vec![0.0; coords.len()];
        for c in &self.chosen {
            add_basis(&mut out, coords, self.grid, c);
        }
        out
    }

    /// Transforms the coefficients back and crops the grid to the volume.
    pub fn finish(mut self) -> FseModel {
        let grid = self.grid;
        let mut buf = std::mem::take(&mut self.coefficients);
        self.fft.inverse(&mut buf);
        let (vm, vn, vp) = self.volume_dims;
        let mut g = Vec::with_capacity(vm * vn * vp);
        let mut max_imaginary: f64 = 0.0;
        for p in 0..vp {
            for n in 0..vn {
                for m in 0..vm {
                    let v = buf[grid.index(m, n, p)];
                    max_imaginary = max_imaginary.max(v.im.abs());
                    g.push(v.re);
                }
            }
        }
        FseModel {
            dims: self.volume_dims,
            g,
            chosen: self.chosen,
            residual_energy_trace: self.trace,
            max_imaginary,
        }
    }
}

/// Adds the real contribution of one selection to `values` at `coords`.
fn add_basis(
    values: &mut [f64],
    coords: &[(usize, usize, usize)],
    grid: GridDims,
    choice: &ChosenBasis,
) {
    let k = choice.basis;
    let scale = if choice.paired { 2.0 } else { 1.0 };
    for (v, &(m, n, p)) in values.iter_mut().zip(coords) {
        let phase = 2.0
            * PI
            * (k.km as f64 * m as f64 / grid.m as f64
                + k.kn as f64 * n as f64 / grid.n as f64
                + k.kp as f64 * p as f64 / grid.p as f64);
        *v += scale * (choice.coefficient * Complex64::from_polar(1.0, phase)).re;
    }
}

/// Runs `config.max_iterations` iterations and returns the model.
pub fn fse_generate_model(
    volume: &ExtrapolationVolume,
    config: &FseConfig,
) -> Result<FseModel, FseError> {
    let mut state = FseState::new(volume, config)?;
    for _ in 0..config.max_iterations {
        state.iterate();
    }
    Ok(state.finish())
}

/// Like [`fse_generate_model`], additionally reporting the model on the
/// lost block after every iteration (`observer(iteration, values)`, values
/// in [`ExtrapolationVolume::lost_coords`] order).
pub fn fse_generate_model_observed(
    volume: &ExtrapolationVolume,
    config: &FseConfig,
    mut observer: impl FnMut(usize, &[f64]),
) -> Result<FseModel, FseError> {
    let mut state = FseState::new(volume, config)?;
    let coords = volume.lost_coords();
    let mut lost = vec![0.0; coords.len()];
    for _ in 0..config.max_iterations {
        let choice = state.iterate();
        add_basis(&mut lost, &coords, state.grid, &choice);
        observer(choice.iteration, &lost);
    }
    Ok(state.finish())
}

/// Clamps to `[0, 255]` and rounds half up.
pub fn to_pixel(v: f64) -> u8 {
    (v.clamp(0.0, 255.0) + 0.5).floor().min(255.0) as u8
}

/// The model on the lost block, as 8-bit samples in raster order.
pub fn cut_patch(model: &FseModel, volume: &ExtrapolationVolume) -> Vec<u8> {
    volume
        .lost_coords()
        .into_iter()
        .map(|(m, n, p)| to_pixel(model.get(m, n, p)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{BlockRect, Label};

    fn constant_volume(
        dims: (usize, usize, usize),
        value: f64,
        block: BlockRect,
        center: usize,
    ) -> ExtrapolationVolume {
        let len = dims.0 * dims.1 * dims.2;
        let mut labels = vec![Label::Support; len];
        for n in block.n0..block.n0 + block.size {
            for m in block.m0..block.m0 + block.size {
                labels[(center * dims.1 + n) * dims.0 + m] = Label::Lost;
            }
        }
        ExtrapolationVolume::from_parts(dims, vec![value; len], labels, center, block).unwrap()
    }

    fn small_config(iterations: usize) -> FseConfig {
        FseConfig {
            fft_dims: GridDims::new(8, 8, 4),
            gamma: 0.6,
            rho: 0.8,
            max_iterations: iterations,
        }
    }

    #[test]
    fn first_iteration_on_constant_volume() {
        let c = 50.0;
        let vol = constant_volume(
            (8, 8, 3),
            c,
            BlockRect {
                m0: 3,
                n0: 3,
                size: 2,
            },
            1,
        );
        let mut state = FseState::new(&vol, &small_config(1)).unwrap();
        let e0 = state.energy();
        let choice = state.iterate();
        assert_eq!(choice.index, 0);
        assert!(!choice.paired);
        assert!((choice.coefficient.re - 0.6 * c).abs() < 1e-12);
        let model = state.finish();
        for &v in model.values() {
            assert!((v - 0.6 * c).abs() < 1e-9, "{v}");
        }
        // residual on support is 0.4c everywhere
        let last = *model.residual_energy_trace.last().unwrap();
        assert!((last - 0.16 * e0).abs() < 1e-9 * e0);
    }

    #[test]
    fn geometric_residual_decay() {
        let c = 128.0;
        let vol = constant_volume(
            (8, 8, 3),
            c,
            BlockRect {
                m0: 3,
                n0: 3,
                size: 2,
            },
            1,
        );
        let model = fse_generate_model(&vol, &small_config(10)).unwrap();
        let e0 = model.residual_energy_trace[0];
        for (nu, e) in model.residual_energy_trace.iter().enumerate() {
            let expected = e0 * 0.4f64.powi(2 * nu as i32);
            assert!((e - expected).abs() <= 1e-9 * e0, "nu={nu}");
        }
        for &v in model.values() {
            assert!((v - c * (1.0 - 0.4f64.powi(10))).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_input_stays_zero() {
        let vol = constant_volume(
            (8, 8, 3),
            0.0,
            BlockRect {
                m0: 3,
                n0: 3,
                size: 2,
            },
            1,
        );
        let mut state = FseState::new(&vol, &small_config(3)).unwrap();
        let choice = state.iterate();
        assert_eq!(choice.coefficient, Complex64::default());
        assert_eq!(state.energy(), 0.0);
        assert!(state.finish().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn select_cosine_pair() {
        let grid = GridDims::new(8, 4, 2);
        let mut fft = Fft3::new(grid);
        let mut buf: Vec<Complex64> = (0..grid.len())
            .map(|i| {
                let k = grid.coords(i);
                Complex64::new((2.0 * PI * k.km as f64 / 8.0).cos(), 0.0)
            })
            .collect();
        fft.forward(&mut buf);
        assert_eq!(select_basis(&buf, grid), grid.index(1, 0, 0));

        let constant = {
            let mut b = vec![Complex64::new(3.0, 0.0); grid.len()];
            fft.forward(&mut b);
            b
        };
        assert_eq!(select_basis(&constant, grid), 0);

        let mut tie = vec![Complex64::default(); grid.len()];
        tie[3] = Complex64::new(1.0, 0.0);
        tie[grid.index(1, 1, 0)] = Complex64::new(0.0, 1.0);
        assert_eq!(select_basis(&tie, grid), 3);
        // index 5 is the conjugate of 3 and never a representative
        tie[3] = Complex64::default();
        tie[5] = Complex64::new(2.0, 0.0);
        assert_eq!(select_basis(&tie, grid), grid.index(1, 1, 0));
    }

    #[test]
    fn observed_model_matches_inverse_transform() {
        let dims = (8, 8, 3);
        let len = 8 * 8 * 3;
        let samples: Vec<f64> = (0..len)
            .map(|i| ((i * 37 % 101) as f64).sqrt() * 20.0)
            .collect();
        let mut labels = vec![Label::Support; len];
        let block = BlockRect {
            m0: 3,
            n0: 3,
            size: 2,
        };
        for (m, n) in [(3, 3), (4, 3), (3, 4), (4, 4)] {
            labels[(8 + n) * 8 + m] = Label::Lost;
        }
        labels[5] = Label::Unavailable;
        let vol = ExtrapolationVolume::from_parts(dims, samples, labels, 1, block).unwrap();
        let mut last = Vec::new();
        let mut calls = 0;
        let model = fse_generate_model_observed(&vol, &small_config(15), |_, v| {
            calls += 1;
            last = v.to_vec();
        })
        .unwrap();
        assert_eq!(calls, 15);
        for (v, (m, n, p)) in last.iter().zip(vol.lost_coords()) {
            assert!((v - model.get(m, n, p)).abs() < 1e-9);
        }
        assert!(model.max_imaginary < 1e-9);
        assert!(model.energy_non_increasing());
    }

    #[test]
    fn patch_rounding() {
        assert_eq!(to_pixel(-3.2), 0);
        assert_eq!(to_pixel(254.6), 255);
        assert_eq!(to_pixel(254.5), 255);
        assert_eq!(to_pixel(254.49), 254);
        assert_eq!(to_pixel(300.0), 255);
        assert_eq!(to_pixel(128.0), 128);
    }

    #[test]
    fn config_validation() {
        let vol = constant_volume(
            (8, 8, 3),
            1.0,
            BlockRect {
                m0: 3,
                n0: 3,
                size: 2,
            },
            1,
        );
        let mut cfg = small_config(1);
        cfg.fft_dims = GridDims::new(4, 8, 4);
        assert!(matches!(
            FseState::new(&vol, &cfg),
            Err(FseError::GridTooSmall { .. })
        ));
        let mut cfg = small_config(1);
        cfg.gamma = 0.0;
        assert!(matches!(
            FseState::new(&vol, &cfg),
            Err(FseError::InvalidConfig(_))
        ));
    }

    #[test]
    fn no_support() {
        let len = 8 * 8 * 3;
        let vol = ExtrapolationVolume::from_parts(
            (8, 8, 3),
            vec![0.0; len],
            vec![Label::Unavailable; len],
            1,
            BlockRect {
                m0: 3,
                n0: 3,
                size: 2,
            },
        )
        .unwrap();
        assert!(matches!(
            FseState::new(&vol, &small_config(1)),
            Err(FseError::NoSupport)
        ));
    }

    #[test]
    fn debug_csv_has_one_row_per_iteration() {
        let vol = constant_volume(
            (8, 8, 3),
            9.0,
            BlockRect {
                m0: 3,
                n0: 3,
                size: 2,
            },
            1,
        );
        let model = fse_generate_model(&vol, &small_config(4)).unwrap();
        let csv = model.to_csv();
        assert_eq!(csv.lines().count(), 1 + 1 + 4);
        assert!(csv.lines().nth(2).unwrap().starts_with("1,0,0,0,"));
    }
}
