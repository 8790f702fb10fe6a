//! A single LSTM step on plain vectors.
//!
//! Gate layout throughout the crate is `[i, f, g, o]`: input, forget,
//! candidate and output, each `hidden` wide.

use crate::error::{ForecastError, Result};

/// Weights of one LSTM layer.
///
/// `wx` is `input × 4·hidden` and `wh` is `hidden × 4·hidden`, both row-major,
/// so the pre-activation row for one sample is `x·wx + h·wh + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellWeights {
    pub input: usize,
    pub hidden: usize,
    pub wx: Vec<f64>,
    pub wh: Vec<f64>,
    pub bias: Vec<f64>,
}

impl CellWeights {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            input,
            hidden,
            wx: vec![0.0; input * 4 * hidden],
            wh: vec![0.0; hidden * 4 * hidden],
            bias: vec![0.0; 4 * hidden],
        }
    }

    fn check(&self) -> Result<()> {
        let g = 4 * self.hidden;
        if self.wx.len() != self.input * g
            || self.wh.len() != self.hidden * g
            || self.bias.len() != g
        {
            return Err(ForecastError::Shape(format!(
                "cell weights do not match input {} / hidden {}",
                self.input, self.hidden
            )));
        }
        Ok(())
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `i,f,o = σ(·)`, `g = tanh(·)`, `c = f⊙c_prev + i⊙g`, `h = o⊙tanh(c)`.
pub fn lstm_cell_forward(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    w: &CellWeights,
) -> Result<(Vec<f64>, Vec<f64>)> {
    w.check()?;
    let hd = w.hidden;
    if x.len() != w.input || h_prev.len() != hd || c_prev.len() != hd {
        return Err(ForecastError::Shape(format!(
            "cell expects x[{}], h[{hd}], c[{hd}]; got x[{}], h[{}], c[{}]",
            w.input,
            x.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    let g = 4 * hd;
    let mut z = w.bias.clone();
    for (k, xv) in x.iter().enumerate() {
        for (j, zj) in z.iter_mut().enumerate() {
            *zj += xv * w.wx[k * g + j];
        }
    }
    for (k, hv) in h_prev.iter().enumerate() {
        for (j, zj) in z.iter_mut().enumerate() {
            *zj += hv * w.wh[k * g + j];
        }
    }
    let mut h = vec![0.0; hd];
    let mut c = vec![0.0; hd];
    for j in 0..hd {
        let i_gate = sigmoid(z[j]);
        let f_gate = sigmoid(z[hd + j]);
        let cand = z[2 * hd + j].tanh();
        let o_gate = sigmoid(z[3 * hd + j]);
        c[j] = f_gate * c_prev[j] + i_gate * cand;
        h[j] = o_gate * c[j].tanh();
    }
    Ok((h, c))
}
