//! Glue between series windows, XIRP images and generated samples.

use crate::wgan::{sample_xirps, GanError, GanModel};
use crate::xirp::{decode_sampled, encode_xirp, unscale_xirp, DecodeMode, ScaledXirp, XirpError, XirpScaler};

/// Encodes positive windows as XIRPs scaled with one scaler fitted on all of them.
pub fn encode_training_set(windows: &[Vec<f64>]) -> Result<(Vec<ScaledXirp>, XirpScaler), XirpError> {
    let xirps = windows.iter().map(|w| encode_xirp(w)).collect::<Result<Vec<_>, _>>()?;
    let scaler = XirpScaler::fit(&xirps);
    Ok((xirps.iter().map(|x| scaler.scale(x)).collect(), scaler))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesized {
    pub windows: Vec<Vec<f64>>,
    /// Diagonal entries raised to the decoding floor, summed over samples.
    pub clamped: usize,
}

/// Samples `n` images, unscales them and decodes each into a window.
pub fn synthesize(model: &GanModel, n: usize, mode: DecodeMode, seed: u64) -> Result<Synthesized, GanError> {
    let samples = sample_xirps(model, n, seed)?;
    let mut windows = Vec::with_capacity(n);
    let mut clamped = 0;
    for (k, s) in samples.iter().enumerate() {
        let decoded = decode_sampled(&unscale_xirp(s), mode, seed.wrapping_add(k as u64))
            .expect("generator output is square and non-empty");
        clamped += decoded.clamped;
        windows.push(decoded.values);
    }
    Ok(Synthesized { windows, clamped })
}
