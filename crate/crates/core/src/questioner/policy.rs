use crate::error::{Error, Result};
use crate::questioner::grammar::TokenId;

/// Linear map from features to one logit per vocabulary token, followed by
/// a softmax restricted to the legal tokens.
///
/// Parameters are stored flat: the `vocab x feature_dim` weight matrix in
/// row-major order, then one bias per token.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    vocab_size: usize,
    feature_dim: usize,
    params: Vec<f64>,
}

impl Policy {
    pub fn zeros(vocab_size: usize, feature_dim: usize) -> Self {
        Policy {
            vocab_size,
            feature_dim,
            params: vec![0.0; vocab_size * feature_dim + vocab_size],
        }
    }

    pub fn from_params(vocab_size: usize, feature_dim: usize, params: Vec<f64>) -> Result<Self> {
        if params.len() != vocab_size * feature_dim + vocab_size {
            return Err(Error::Checkpoint(format!(
                "policy expects {} parameters, got {}",
                vocab_size * feature_dim + vocab_size,
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Checkpoint("policy parameters must be finite".into()));
        }
        Ok(Policy {
            vocab_size,
            feature_dim,
            params,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn bias_offset(&self) -> usize {
        self.vocab_size * self.feature_dim
    }

    pub fn logit(&self, features: &[f64], token: TokenId) -> f64 {
        let row = &self.params[token * self.feature_dim..(token + 1) * self.feature_dim];
        let dot: f64 = row.iter().zip(features).map(|(w, x)| w * x).sum();
        dot + self.params[self.bias_offset() + token]
    }

    /// Softmax over legal tokens. Illegal tokens get exactly zero.
    pub fn distribution(&self, features: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
        debug_assert_eq!(features.len(), self.feature_dim);
        let logits: Vec<f64> = (0..self.vocab_size)
            .map(|t| if mask[t] { self.logit(features, t) } else { f64::NEG_INFINITY })
            .collect();
        masked_softmax(&logits, mask)
    }

    pub fn log_prob(&self, features: &[f64], mask: &[bool], action: TokenId) -> Result<f64> {
        if !mask.get(action).copied().unwrap_or(false) {
            return Err(Error::IllegalAction {
                token: format!("#{action}"),
            });
        }
        Ok(self.distribution(features, mask)?[action].ln())
    }

    /// Adds `scale * d log pi(action) / d params` into `out`.
    pub fn accumulate_grad_log_prob(
        &self,
        features: &[f64],
        mask: &[bool],
        action: TokenId,
        scale: f64,
        out: &mut [f64],
    ) -> Result<()> {
        if !mask.get(action).copied().unwrap_or(false) {
            return Err(Error::IllegalAction {
                token: format!("#{action}"),
            });
        }
        let probs = self.distribution(features, mask)?;
        for (tok, &p) in probs.iter().enumerate() {
            if !mask[tok] {
                continue;
            }
            let dz = scale * (f64::from(u8::from(tok == action)) - p);
            self.add_logit_grad(tok, features, dz, out);
        }
        Ok(())
    }

    pub fn grad_log_prob(&self, features: &[f64], mask: &[bool], action: TokenId) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.params.len()];
        self.accumulate_grad_log_prob(features, mask, action, 1.0, &mut g)?;
        Ok(g)
    }

    /// Adds `scale * d H(pi) / d params` into `out`, where `H` is the entropy
    /// of the masked distribution.
    pub fn accumulate_grad_entropy(&self, features: &[f64], mask: &[bool], scale: f64, out: &mut [f64]) -> Result<()> {
        let probs = self.distribution(features, mask)?;
        let h: f64 = -probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>();
        for (tok, &p) in probs.iter().enumerate() {
            if !mask[tok] || p <= 0.0 {
                continue;
            }
            let dz = -scale * p * (p.ln() + h);
            self.add_logit_grad(tok, features, dz, out);
        }
        Ok(())
    }

    fn add_logit_grad(&self, tok: TokenId, features: &[f64], dz: f64, out: &mut [f64]) {
        if dz == 0.0 {
            return;
        }
        let row = &mut out[tok * self.feature_dim..(tok + 1) * self.feature_dim];
        for (g, x) in row.iter_mut().zip(features) {
            *g += dz * x;
        }
        out[self.bias_offset() + tok] += dz;
    }

    /// `params += step * direction`.
    pub fn apply(&mut self, direction: &[f64], step: f64) {
        for (p, d) in self.params.iter_mut().zip(direction) {
            *p += step * d;
        }
    }
}

pub fn masked_softmax(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::EmptyMask);
    }
    let mut out: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&l, &m)| if m { (l - max).exp() } else { 0.0 })
        .collect();
    let z: f64 = out.iter().sum();
    for p in &mut out {
        *p /= z;
    }
    Ok(out)
}
