//! Direct spatial-domain model generation.
//!
//! Every projection is a literal weighted sum over the volume and every
//! selection minimizes the weighted distance between the residual and its
//! projection. It is `O(grid × volume)` per iteration and exists to check
//! the frequency-domain path on small volumes.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{make_weight, ChosenBasis, FseConfig, FseError, FseModel, GridDims, WeightField};
use crate::volume::ExtrapolationVolume;

/// Per-axis phase tables `exp(2πi·k·j / len)`.
struct BasisTables {
    grid: GridDims,
    m: Vec<Vec<Complex64>>,
    n: Vec<Vec<Complex64>>,
    p: Vec<Vec<Complex64>>,
}

impl BasisTables {
    fn new(grid: GridDims, dims: (usize, usize, usize)) -> Self {
        let axis = |len: usize, count: usize| -> Vec<Vec<Complex64>> {
            (0..len)
                .map(|k| {
                    (0..count)
                        .map(|j| Complex64::from_polar(1.0, 2.0 * PI * (k * j) as f64 / len as f64))
                        .collect()
                })
                .collect()
        };
        BasisTables {
            grid,
            m: axis(grid.m, dims.0),
            n: axis(grid.n, dims.1),
            p: axis(grid.p, dims.2),
        }
    }

    #[inline]
    fn value(&self, k: usize, m: usize, n: usize, p: usize) -> Complex64 {
        let kk = self.grid.coords(k);
        self.m[kk.km][m] * self.n[kk.kn][n] * self.p[kk.kp][p]
    }
}

/// `φ_k[m,n,p] = exp(2πi(k_m·m/M + k_n·n/N + k_p·p/P))` on the grid.
pub fn basis_value(grid: GridDims, k: usize, m: usize, n: usize, p: usize) -> Complex64 {
    let kk = grid.coords(k);
    let phase = 2.0
        * PI
        * (kk.km as f64 * m as f64 / grid.m as f64
            + kk.kn as f64 * n as f64 / grid.n as f64
            + kk.kp as f64 * p as f64 / grid.p as f64);
    Complex64::from_polar(1.0, phase)
}

/// Weighted projection `Σ r·w·conj(φ_k) / Σ w·|φ_k|²` by direct summation.
pub fn project_reference(
    residual: &[f64],
    weight: &WeightField,
    grid: GridDims,
    k: usize,
) -> Result<Complex64, FseError> {
    let (vm, vn, vp) = weight.dims();
    let mut num = Complex64::default();
    let mut den = 0.0;
    for p in 0..vp {
        for n in 0..vn {
            for m in 0..vm {
                let i = (p * vn + n) * vm + m;
                let w = weight.values()[i];
                if w == 0.0 {
                    continue;
                }
                let phi = basis_value(grid, k, m, n, p);
                num += residual[i] * w * phi.conj();
                den += w * phi.norm_sqr();
            }
        }
    }
    if den <= 0.0 {
        return Err(FseError::NoSupport);
    }
    Ok(num / den)
}

/// Spatial-domain iteration state.
pub struct ReferenceFse {
    config: FseConfig,
    dims: (usize, usize, usize),
    grid: GridDims,
    tables: BasisTables,
    weight: WeightField,
    residual: Vec<f64>,
    model: Vec<f64>,
    chosen: Vec<ChosenBasis>,
    trace: Vec<f64>,
}

impl ReferenceFse {
    pub fn new(volume: &ExtrapolationVolume, config: &FseConfig) -> Result<Self, FseError> {
        config.validate(volume.dims())?;
        let weight = make_weight(volume, config.rho)?;
        if weight.sum() <= 0.0 {
            return Err(FseError::NoSupport);
        }
        let residual: Vec<f64> = volume
            .samples()
            .iter()
            .zip(weight.values())
            .map(|(&s, &w)| if w > 0.0 { s } else { 0.0 })
            .collect();
        let mut state = ReferenceFse {
            config: config.clone(),
            dims: volume.dims(),
            grid: config.fft_dims,
            tables: BasisTables::new(config.fft_dims, volume.dims()),
            weight,
            model: vec![0.0; residual.len()],
            residual,
            chosen: Vec::new(),
            trace: Vec::new(),
        };
        state.trace.push(state.energy());
        Ok(state)
    }

    pub fn energy(&self) -> f64 {
        self.residual
            .iter()
            .zip(self.weight.values())
            .map(|(r, w)| w * r * r)
            .sum()
    }

    fn coords(&self) -> impl Iterator<Item = (usize, usize, usize, usize)> {
        let (vm, vn, vp) = self.dims;
        (0..vp).flat_map(move |p| {
            (0..vn).flat_map(move |n| (0..vm).map(move |m| ((p * vn + n) * vm + m, m, n, p)))
        })
    }

    fn projection(&self, k: usize) -> Complex64 {
        let mut num = Complex64::default();
        let mut den = 0.0;
        for (i, m, n, p) in self.coords() {
            let w = self.weight.values()[i];
            if w == 0.0 {
                continue;
            }
            let phi = self.tables.value(k, m, n, p);
            num += self.residual[i] * w * phi.conj();
            den += w * phi.norm_sqr();
        }
        num / den
    }

    /// `Σ w·|r − p_k·φ_k|²`.
    fn distance(&self, k: usize, pk: Complex64) -> f64 {
        let mut d = 0.0;
        for (i, m, n, p) in self.coords() {
            let w = self.weight.values()[i];
            if w == 0.0 {
                continue;
            }
            d += w * (self.residual[i] - pk * self.tables.value(k, m, n, p)).norm_sqr();
        }
        d
    }

    pub fn iterate(&mut self) -> ChosenBasis {
        let grid = self.grid;
        let mut best = 0;
        let mut best_distance = f64::INFINITY;
        for k in 0..grid.len() {
            let d = self.distance(k, self.projection(k));
            if d < best_distance {
                best = k;
                best_distance = d;
            }
        }
        let u = best.min(grid.conjugate(best));
        let paired = grid.conjugate(u) != u;
        let pu = self.projection(u);
        let coefficient = if paired {
            pu * self.config.gamma
        } else {
            Complex64::new(pu.re * self.config.gamma, 0.0)
        };
        let scale = if paired { 2.0 } else { 1.0 };
        let idx: Vec<_> = self.coords().collect();
        for (i, m, n, p) in idx {
            let h = scale * (coefficient * self.tables.value(u, m, n, p)).re;
            self.model[i] += h;
            if self.weight.values()[i] > 0.0 {
                self.residual[i] -= h;
            }
        }
        let choice = ChosenBasis {
            iteration: self.chosen.len() + 1,
            index: u,
            basis: grid.coords(u),
            coefficient,
            paired,
        };
        self.chosen.push(choice);
        let e = self.energy();
        self.trace.push(e);
        choice
    }

    pub fn finish(self) -> FseModel {
        FseModel {
            dims: self.dims,
            g: self.model,
            chosen: self.chosen,
            residual_energy_trace: self.trace,
            max_imaginary: 0.0,
        }
    }
}

pub fn reference_generate_model(
    volume: &ExtrapolationVolume,
    config: &FseConfig,
) -> Result<FseModel, FseError> {
    let mut state = ReferenceFse::new(volume, config)?;
    for _ in 0..config.max_iterations {
        state.iterate();
    }
    Ok(state.finish())
}
