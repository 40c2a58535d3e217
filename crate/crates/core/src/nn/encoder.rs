//! Attention + convolution encoder.

use super::attention::{multi_head_self_attention, AttentionHead};
use super::params::{Builder, Init, ParamId};
use super::NnError;
use crate::autodiff::{AutodiffError, Tape, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncoderKind {
    /// Raw windows go straight to the decoder.
    None,
    /// Input projection and convolution block only.
    Conv,
    /// Multi-head self-attention added to the projection, then convolution.
    Attention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub kernel: usize,
    pub w: ParamId,
    pub b: ParamId,
}

impl ConvLayer {
    fn build<R: Rng>(b: &mut Builder<'_, R>, name: String, k: usize, c_in: usize, c_out: usize) -> Result<Self, NnError> {
        let bound = 1.0 / ((k * c_in) as f64).sqrt();
        Ok(ConvLayer {
            kernel: k,
            w: b.param(format!("{name}.w"), &[k, c_in, c_out], Init::Uniform(bound))?,
            b: b.param(format!("{name}.b"), &[c_out], Init::Uniform(bound))?,
        })
    }

    fn forward(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<Var, AutodiffError> {
        let y = tape.conv1d(x, vars[self.w.0])?;
        tape.add(y, vars[self.b.0])
    }
}

/// Encoder block: `z = proj(x) [+ MHA(x)]`, then
/// `out = z + conv(relu(concat_k conv_k(z)))`.
///
/// The first convolution runs one branch per kernel width, each with
/// `d_model / kernels` channels; the second uses the first width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcnnEncoder {
    pub kind: EncoderKind,
    pub heads: Vec<AttentionHead>,
    pub proj_w: ParamId,
    pub proj_b: ParamId,
    pub conv_in: Vec<ConvLayer>,
    pub conv_out: ConvLayer,
    pub causal: bool,
}

impl AcnnEncoder {
    pub(crate) fn build<R: Rng>(
        b: &mut Builder<'_, R>,
        kind: EncoderKind,
        d_in: usize,
        d_model: usize,
        num_heads: usize,
        kernels: &[usize],
        causal: bool,
    ) -> Result<Self, NnError> {
        let heads = if kind == EncoderKind::Attention {
            let d_head = d_model / num_heads;
            (0..num_heads)
                .map(|h| AttentionHead::build(b, &format!("encoder.head{h}"), d_in, d_head))
                .collect::<Result<_, _>>()?
        } else {
            Vec::new()
        };
        let bound = 1.0 / (d_in as f64).sqrt();
        let proj_w = b.param("encoder.proj.w".into(), &[d_in, d_model], Init::Uniform(bound))?;
        let proj_b = b.param("encoder.proj.b".into(), &[d_model], Init::Uniform(bound))?;
        let branch = d_model / kernels.len();
        let conv_in = kernels
            .iter()
            .map(|&k| ConvLayer::build(b, format!("encoder.conv1.k{k}"), k, d_model, branch))
            .collect::<Result<_, _>>()?;
        let conv_out = ConvLayer::build(b, "encoder.conv2".into(), kernels[0], d_model, d_model)?;
        Ok(AcnnEncoder { kind, heads, proj_w, proj_b, conv_in, conv_out, causal })
    }

    /// `x` is `B × T × d_in`; returns `B × T × d_model`.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        x: Var,
        dropout: f64,
        train: bool,
        rng: &mut R,
    ) -> Result<Var, AutodiffError> {
        let p = tape.matmul(x, vars[self.proj_w.0])?;
        let mut z = tape.add(p, vars[self.proj_b.0])?;
        if self.kind == EncoderKind::Attention {
            let att = multi_head_self_attention(tape, vars, x, &self.heads, self.causal)?;
            z = tape.add(z, att)?;
        }
        let branches = self
            .conv_in
            .iter()
            .map(|c| c.forward(tape, vars, z))
            .collect::<Result<Vec<_>, _>>()?;
        let c1 = if branches.len() == 1 { branches[0] } else { tape.concat(&branches, 2)? };
        let c1 = tape.relu(c1)?;
        let c2 = self.conv_out.forward(tape, vars, c1)?;
        let out = tape.add(z, c2)?;
        tape.dropout(out, dropout, rng, train)
    }
}
