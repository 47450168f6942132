//! Separable 3D FFT on a dense `M × N × P` grid.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Size of the transform grid. Linear index is `(kp·N + kn)·M + km`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridDims {
    pub m: usize,
    pub n: usize,
    pub p: usize,
}

impl GridDims {
    pub const fn new(m: usize, n: usize, p: usize) -> Self {
        GridDims { m, n, p }
    }

    pub fn len(&self) -> usize {
        self.m * self.n * self.p
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, km: usize, kn: usize, kp: usize) -> usize {
        (kp * self.n + kn) * self.m + km
    }

    #[inline]
    pub fn coords(&self, index: usize) -> BasisIndex {
        BasisIndex {
            km: index % self.m,
            kn: (index / self.m) % self.n,
            kp: index / (self.m * self.n),
        }
    }

    /// Linear index of the mirrored frequency `-k`.
    #[inline]
    pub fn conjugate(&self, index: usize) -> usize {
        let k = self.coords(index);
        self.index(
            (self.m - k.km) % self.m,
            (self.n - k.kn) % self.n,
            (self.p - k.kp) % self.p,
        )
    }

    /// True if `dims` fits inside the grid on every axis.
    pub fn covers(&self, dims: (usize, usize, usize)) -> bool {
        self.m >= dims.0 && self.n >= dims.1 && self.p >= dims.2
    }
}

impl fmt::Display for GridDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.m, self.n, self.p)
    }
}

impl std::str::FromStr for GridDims {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<usize> = s
            .split(['x', 'X', ','])
            .map(|t| t.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| format!("invalid grid size {s:?}, expected e.g. 64x64x16"))?;
        match parts[..] {
            [m, n, p] if m > 0 && n > 0 && p > 0 => Ok(GridDims { m, n, p }),
            _ => Err(format!("invalid grid size {s:?}, expected e.g. 64x64x16")),
        }
    }
}

/// Frequency triple of a 3D DFT basis function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisIndex {
    pub km: usize,
    pub kn: usize,
    pub kp: usize,
}

impl fmt::Display for BasisIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.km, self.kn, self.kp)
    }
}

pub struct Fft3 {
    dims: GridDims,
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
    scratch: Vec<Complex64>,
    line: Vec<Complex64>,
}

impl Fft3 {
    pub fn new(dims: GridDims) -> Self {
        let mut planner = FftPlanner::new();
        let forward = [
            planner.plan_fft_forward(dims.m),
            planner.plan_fft_forward(dims.n),
            planner.plan_fft_forward(dims.p),
        ];
        let inverse = [
            planner.plan_fft_inverse(dims.m),
            planner.plan_fft_inverse(dims.n),
            planner.plan_fft_inverse(dims.p),
        ];
        let scratch_len = forward
            .iter()
            .chain(&inverse)
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Fft3 {
            dims,
            forward,
            inverse,
            scratch: vec![Complex64::default(); scratch_len],
            line: vec![Complex64::default(); dims.m.max(dims.n).max(dims.p)],
        }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    /// `X[k] = Σ x[j]·exp(-2πi⟨k, j/dims⟩)`, unnormalized.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        let plans = self.forward.clone();
        self.run(data, &plans);
    }

    /// `x[j] = Σ X[k]·exp(+2πi⟨k, j/dims⟩)`, unnormalized.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        let plans = self.inverse.clone();
        self.run(data, &plans);
    }

    fn run(&mut self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>; 3]) {
        let GridDims { m, n, p } = self.dims;
        assert_eq!(data.len(), m * n * p, "buffer does not match grid");

        // rows are contiguous
        plans[0].process_with_scratch(data, &mut self.scratch);

        let line = &mut self.line[..n];
        for kp in 0..p {
            for km in 0..m {
                let base = kp * n * m + km;
                for (j, v) in line.iter_mut().enumerate() {
                    *v = data[base + j * m];
                }
                plans[1].process_with_scratch(line, &mut self.scratch);
                for (j, v) in line.iter().enumerate() {
                    data[base + j * m] = *v;
                }
            }
        }

        if p > 1 {
            let line = &mut self.line[..p];
            let plane = m * n;
            for base in 0..plane {
                for (j, v) in line.iter_mut().enumerate() {
                    *v = data[base + j * plane];
                }
                plans[2].process_with_scratch(line, &mut self.scratch);
                for (j, v) in line.iter().enumerate() {
                    data[base + j * plane] = *v;
                }
            }
        }
    }
}
