use crate::error::{Error, Result};

/// Fixed cosine time encoding with a geometric frequency spectrum.
///
/// Component `j` of the encoding of `dt` is `cos(dt * alpha^(-j / beta))`.
/// The frequencies are never trained.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeEncoder {
    alpha: f64,
    beta: f64,
    frequencies: Vec<f64>,
}

impl TimeEncoder {
    pub fn new(alpha: f64, beta: f64, dim: usize) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0) || dim == 0 {
            return Err(Error::Config(format!(
                "time encoding needs alpha > 0, beta > 0, dim >= 1 (got {alpha}, {beta}, {dim})"
            )));
        }
        let frequencies = (0..dim).map(|j| alpha.powf(-(j as f64) / beta)).collect();
        Ok(TimeEncoder {
            alpha,
            beta,
            frequencies,
        })
    }

    pub fn dim(&self) -> usize {
        self.frequencies.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn encode_into(&self, dt: f64, out: &mut [f64]) -> Result<()> {
        if !dt.is_finite() || dt < 0.0 {
            return Err(Error::Contract(format!("time gap must be finite and >= 0, got {dt}")));
        }
        for (o, w) in out.iter_mut().zip(&self.frequencies) {
            *o = (dt * w).cos();
        }
        Ok(())
    }

    pub fn encode(&self, dt: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.encode_into(dt, &mut out)?;
        Ok(out)
    }
}
