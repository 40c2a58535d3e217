//! LSTM cells and stacked (bi)directional layers, unrolled on the tape.

use super::params::{Builder, Init, ParamId};
use super::NnError;
use crate::autodiff::{AutodiffError, Tape, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Gate blocks are laid out `[input | forget | candidate | output]`, each of
/// width `hidden`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCell {
    pub hidden: usize,
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub b: ParamId,
}

impl LstmCell {
    pub(crate) fn build<R: Rng>(b: &mut Builder<'_, R>, prefix: &str, d_in: usize, hidden: usize) -> Result<Self, NnError> {
        let bound = 1.0 / (hidden as f64).sqrt();
        Ok(LstmCell {
            hidden,
            w_x: b.param(format!("{prefix}.w_x"), &[d_in, 4 * hidden], Init::Uniform(bound))?,
            w_h: b.param(format!("{prefix}.w_h"), &[hidden, 4 * hidden], Init::Uniform(bound))?,
            // Forget-gate bias starts at 1.
            b: b.param(
                format!("{prefix}.b"),
                &[4 * hidden],
                Init::Chunked { chunk: hidden, values: vec![0.0, 1.0, 0.0, 0.0] },
            )?,
        })
    }

    /// Runs over all time steps of `x` (`B × T × d_in`), forwards or in
    /// reverse. Returns hidden states indexed by original time.
    pub fn run(&self, tape: &mut Tape, vars: &[Var], x: Var, reverse: bool) -> Result<Vec<Var>, AutodiffError> {
        let shape = tape.value(x).shape().to_vec();
        let (batch, steps) = (shape[0], shape[1]);
        let h = self.hidden;
        // Input contributions for every step in one product.
        let xw = tape.matmul(x, vars[self.w_x.0])?;
        let xw = tape.add(xw, vars[self.b.0])?;
        let mut hs = vec![None; steps];
        let mut state: Option<(Var, Var)> = None;
        for step in 0..steps {
            let t = if reverse { steps - 1 - step } else { step };
            let xt = tape.slice(xw, 1, t, 1)?;
            let xt = tape.reshape(xt, &[batch, 4 * h])?;
            let z = match state {
                Some((h_prev, _)) => {
                    let hw = tape.matmul(h_prev, vars[self.w_h.0])?;
                    tape.add(xt, hw)?
                }
                None => xt,
            };
            let zi = tape.slice(z, 1, 0, h)?;
            let zf = tape.slice(z, 1, h, h)?;
            let zg = tape.slice(z, 1, 2 * h, h)?;
            let zo = tape.slice(z, 1, 3 * h, h)?;
            let i = tape.sigmoid(zi)?;
            let g = tape.tanh(zg)?;
            let o = tape.sigmoid(zo)?;
            let ig = tape.mul(i, g)?;
            let c = match state {
                Some((_, c_prev)) => {
                    let f = tape.sigmoid(zf)?;
                    let fc = tape.mul(f, c_prev)?;
                    tape.add(fc, ig)?
                }
                None => ig,
            };
            let tc = tape.tanh(c)?;
            let h_new = tape.mul(o, tc)?;
            hs[t] = Some(h_new);
            state = Some((h_new, c));
        }
        Ok(hs.into_iter().map(|v| v.expect("every step visited")).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub forward: LstmCell,
    pub backward: Option<LstmCell>,
}

/// Stack of LSTM layers; each layer after the first reads the previous
/// layer's per-step outputs (`fwd ‖ bwd` when bidirectional).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmStack {
    pub layers: Vec<LstmLayer>,
    pub hidden: usize,
    pub bidirectional: bool,
}

impl LstmStack {
    pub(crate) fn build<R: Rng>(
        b: &mut Builder<'_, R>,
        d_in: usize,
        hidden: usize,
        layers: usize,
        bidirectional: bool,
    ) -> Result<Self, NnError> {
        let dirs = if bidirectional { 2 } else { 1 };
        let mut out = Vec::with_capacity(layers);
        for l in 0..layers {
            let input = if l == 0 { d_in } else { dirs * hidden };
            let forward = LstmCell::build(b, &format!("decoder.l{l}.fwd"), input, hidden)?;
            let backward = if bidirectional {
                Some(LstmCell::build(b, &format!("decoder.l{l}.bwd"), input, hidden)?)
            } else {
                None
            };
            out.push(LstmLayer { forward, backward });
        }
        Ok(LstmStack { layers: out, hidden, bidirectional })
    }

    pub fn output_width(&self) -> usize {
        if self.bidirectional {
            2 * self.hidden
        } else {
            self.hidden
        }
    }

    /// Final features `B × width`: the forward direction's last hidden state,
    /// followed by the backward direction's state after reading back to the
    /// first step.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        x: Var,
        dropout: f64,
        train: bool,
        rng: &mut R,
    ) -> Result<Var, AutodiffError> {
        let shape = tape.value(x).shape().to_vec();
        let (batch, steps) = (shape[0], shape[1]);
        let h = self.hidden;
        let mut input = x;
        for (l, layer) in self.layers.iter().enumerate() {
            if l > 0 {
                input = tape.dropout(input, dropout, rng, train)?;
            }
            let fwd = layer.forward.run(tape, vars, input, false)?;
            let bwd = match &layer.backward {
                Some(cell) => Some(cell.run(tape, vars, input, true)?),
                None => None,
            };
            if l + 1 == self.layers.len() {
                return match bwd {
                    Some(b) => tape.concat(&[fwd[steps - 1], b[0]], 1),
                    None => Ok(fwd[steps - 1]),
                };
            }
            let mut per_step = Vec::with_capacity(steps);
            for t in 0..steps {
                let ft = tape.reshape(fwd[t], &[batch, 1, h])?;
                per_step.push(match &bwd {
                    Some(b) => {
                        let bt = tape.reshape(b[t], &[batch, 1, h])?;
                        tape.concat(&[ft, bt], 2)?
                    }
                    None => ft,
                });
            }
            input = tape.concat(&per_step, 1)?;
        }
        unreachable!("stack has at least one layer")
    }
}
