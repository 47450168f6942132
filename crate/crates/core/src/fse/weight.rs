use crate::volume::{ExtrapolationVolume, Label};

use super::FseError;

/// Per-sample weights over a volume. Zero on lost and unavailable samples,
/// `ρ̂^distance` on support, where distance is measured from the centre of
/// the lost block.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightField {
    dims: (usize, usize, usize),
    w: Vec<f64>,
}

impl WeightField {
    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    pub fn get(&self, m: usize, n: usize, p: usize) -> f64 {
        self.w[(p * self.dims.1 + n) * self.dims.0 + m]
    }

    pub fn sum(&self) -> f64 {
        self.w.iter().sum()
    }
}

/// Isotropic decay weight `ρ̂^‖(m,n,p) − centre‖`.
pub fn isotropic_weight(rho: f64, dm: f64, dn: f64, dp: f64) -> f64 {
    rho.powf((dm * dm + dn * dn + dp * dp).sqrt())
}

pub fn make_weight(volume: &ExtrapolationVolume, rho: f64) -> Result<WeightField, FseError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(FseError::InvalidConfig(format!(
            "rho must be in (0, 1), got {rho}"
        )));
    }
    let (mm, nn, pp) = volume.dims();
    let (cm, cn, cp) = volume.block_center();
    let mut w = vec![0.0; mm * nn * pp];
    for p in 0..pp {
        for n in 0..nn {
            for m in 0..mm {
                let i = volume.index(m, n, p);
                if volume.labels()[i] == Label::Support {
                    w[i] = isotropic_weight(rho, m as f64 - cm, n as f64 - cn, p as f64 - cp);
                }
            }
        }
    }
    Ok(WeightField {
        dims: (mm, nn, pp),
        w,
    })
}
