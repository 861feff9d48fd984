//! Test-time adaptation objective over a small adaptation head.
//!
//! The head stands in for the normalization affine parameters and linear
//! layers that are allowed to move at inference time: a per-class affine
//! map followed by a 3×3 class-mixing matrix, applied to incoming logits.
//! The objective combines prediction entropy, total variation of the
//! probability maps and the negative log measurement confidence.
//!
//! Entropy and TV gradients are analytic. The confidence term passes through
//! argmax, connected components and an ellipse fit, so it is differentiated
//! by central finite differences over the (at most 15) trainable scalars.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result, StageError};
use crate::geometry::compute_aop;
use crate::math;
use crate::raster::{self, ConfMap, LabelMask, LogitMap, PixelSpacing, ProbMap, NUM_CLASSES};

/// Number of scalars in the adaptation head.
pub const NUM_PARAMS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ParamGroup {
    Gamma,
    Beta,
    Mix,
}

impl ParamGroup {
    /// Group owning flat index `k` (gamma 0..3, beta 3..6, mix 6..15).
    pub fn of(k: usize) -> ParamGroup {
        match k {
            0..=2 => ParamGroup::Gamma,
            3..=5 => ParamGroup::Beta,
            _ => ParamGroup::Mix,
        }
    }
}

/// Which parameter groups receive updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainableMask {
    pub gamma: bool,
    pub beta: bool,
    pub mix: bool,
}

impl TrainableMask {
    pub const ALL: TrainableMask = TrainableMask { gamma: true, beta: true, mix: true };
    pub const NONE: TrainableMask = TrainableMask { gamma: false, beta: false, mix: false };

    pub fn allows(&self, group: ParamGroup) -> bool {
        match group {
            ParamGroup::Gamma => self.gamma,
            ParamGroup::Beta => self.beta,
            ParamGroup::Mix => self.mix,
        }
    }
}

impl Default for TrainableMask {
    fn default() -> Self {
        Self::ALL
    }
}

/// Adaptation head: `z'_c = Σ_{c'} mix[c][c'] · (gamma_{c'} · z_{c'} + beta_{c'})`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdaptParams {
    pub gamma: [f64; 3],
    pub beta: [f64; 3],
    pub mix: [[f64; 3]; 3],
    pub trainable: TrainableMask,
}

impl Default for AdaptParams {
    fn default() -> Self {
        Self::identity()
    }
}

impl AdaptParams {
    pub fn identity() -> Self {
        Self {
            gamma: [1.0; 3],
            beta: [0.0; 3],
            mix: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            trainable: TrainableMask::ALL,
        }
    }

    pub fn with_trainable(mut self, trainable: TrainableMask) -> Self {
        self.trainable = trainable;
        self
    }

    pub fn get(&self, k: usize) -> f64 {
        match k {
            0..=2 => self.gamma[k],
            3..=5 => self.beta[k - 3],
            _ => self.mix[(k - 6) / 3][(k - 6) % 3],
        }
    }

    pub fn set(&mut self, k: usize, v: f64) {
        match k {
            0..=2 => self.gamma[k] = v,
            3..=5 => self.beta[k - 3] = v,
            _ => self.mix[(k - 6) / 3][(k - 6) % 3] = v,
        }
    }

    pub fn to_array(&self) -> [f64; NUM_PARAMS] {
        core::array::from_fn(|k| self.get(k))
    }

    /// Flat indices of the trainable scalars.
    pub fn trainable_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..NUM_PARAMS).filter(move |&k| self.trainable.allows(ParamGroup::of(k)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.to_array().iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput("non-finite adaptation parameter".into()))
        }
    }
}

/// Gradient over the 15 head scalars; frozen coordinates stay zero.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamGrad(pub [f64; NUM_PARAMS]);

impl ParamGrad {
    pub const ZERO: ParamGrad = ParamGrad([0.0; NUM_PARAMS]);

    pub fn add(&self, other: &ParamGrad) -> ParamGrad {
        ParamGrad(core::array::from_fn(|k| self.0[k] + other.0[k]))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&g| g == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TtaConfig {
    pub lambda_ent: f64,
    pub lambda_tv: f64,
    pub lambda_aop: f64,
    /// Gradient-descent step size. Zero is allowed and leaves parameters unchanged.
    pub lr: f64,
    pub steps: usize,
    /// Stabilizer inside `−log(C_AoP + ε)`.
    pub epsilon: f64,
    /// Central-difference step for the confidence term.
    pub fd_step: f64,
}

impl Default for TtaConfig {
    fn default() -> Self {
        Self {
            lambda_ent: 1.0,
            lambda_tv: 1.0,
            lambda_aop: 1.0,
            lr: 1e-4,
            steps: 1,
            epsilon: 1e-6,
            fd_step: 1e-4,
        }
    }
}

impl TtaConfig {
    pub fn validate(&self) -> Result<()> {
        let lambdas = [self.lambda_ent, self.lambda_tv, self.lambda_aop];
        if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidInput("loss weights must be finite and nonnegative".into()));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::InvalidInput("learning rate must be finite and nonnegative".into()));
        }
        if self.steps == 0 {
            return Err(Error::InvalidInput("steps must be at least 1".into()));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidInput("epsilon must be positive".into()));
        }
        if !(self.fd_step.is_finite() && self.fd_step > 0.0) {
            return Err(Error::InvalidInput("fd_step must be positive".into()));
        }
        Ok(())
    }
}

/// One test image: network logits and the predicted confidence map.
#[derive(Debug, Clone, PartialEq)]
pub struct TtaSample {
    pub logits: LogitMap,
    pub conf: ConfMap,
}

impl TtaSample {
    pub fn new(logits: LogitMap, conf: ConfMap) -> Result<Self> {
        if logits.height() != conf.height() || logits.width() != conf.width() {
            return Err(Error::InvalidInput("logits and confidence extents differ".into()));
        }
        Ok(Self { logits, conf })
    }
}

// ── Head ───────────────────────────────────────────────────────────────────

#[inline]
fn head_pixel(params: &AdaptParams, z: [f64; 3]) -> [f64; 3] {
    let u: [f64; 3] = core::array::from_fn(|c| params.gamma[c] * z[c] + params.beta[c]);
    core::array::from_fn(|c| {
        params.mix[c][0] * u[0] + params.mix[c][1] * u[1] + params.mix[c][2] * u[2]
    })
}

pub fn apply_head(logits: &LogitMap, params: &AdaptParams) -> Result<LogitMap> {
    params.validate()?;
    let plane = logits.plane();
    let z = logits.values();
    let mut out = vec![0.0; z.len()];
    for i in 0..plane {
        let zp = head_pixel(params, [z[i], z[plane + i], z[2 * plane + i]]);
        out[i] = zp[0];
        out[plane + i] = zp[1];
        out[2 * plane + i] = zp[2];
    }
    LogitMap::new(logits.height(), logits.width(), out)
}

fn adapted_labels(logits: &LogitMap, params: &AdaptParams) -> LabelMask {
    let plane = logits.plane();
    let z = logits.values();
    let labels = (0..plane)
        .map(|i| raster::argmax3(head_pixel(params, [z[i], z[plane + i], z[2 * plane + i]])))
        .collect();
    // Labels come from argmax over three channels, so they are always valid.
    LabelMask::new(logits.height(), logits.width(), labels).expect("argmax labels are class ids")
}

// ── Losses ─────────────────────────────────────────────────────────────────

fn shared_extent(probs: &[ProbMap]) -> Result<(usize, usize)> {
    let first = probs.first().ok_or_else(|| Error::InvalidInput("empty batch".into()))?;
    let (h, w) = (first.height(), first.width());
    if probs.iter().any(|p| p.height() != h || p.width() != w) {
        return Err(Error::InvalidInput("batch members must share one extent".into()));
    }
    Ok((h, w))
}

#[inline]
fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * math::ln(p)
    } else {
        0.0
    }
}

/// Mean per-pixel entropy (natural log) over the whole batch.
pub fn entropy_loss(probs: &[ProbMap]) -> Result<f64> {
    let (h, w) = shared_extent(probs)?;
    let n = (probs.len() * h * w) as f64;
    let sum: f64 = probs.iter().flat_map(|p| p.values().iter()).map(|&p| plogp(p)).sum();
    Ok(-sum / n)
}

/// Anisotropic total variation anchored on rows `0..H-1` and columns
/// `0..W-1`, normalized by `B·H·W`.
pub fn tv_loss(probs: &[ProbMap]) -> Result<f64> {
    let (h, w) = shared_extent(probs)?;
    if h < 2 || w < 2 {
        return Err(Error::InvalidInput(format!("total variation needs H, W >= 2, got {h}x{w}")));
    }
    let n = (probs.len() * h * w) as f64;
    let mut sum = 0.0;
    for p in probs {
        for c in 0..NUM_CLASSES {
            for i in 0..h - 1 {
                for j in 0..w - 1 {
                    let here = p.get(c, i, j);
                    sum += (p.get(c, i + 1, j) - here).abs() + (p.get(c, i, j + 1) - here).abs();
                }
            }
        }
    }
    Ok(sum / n)
}

/// `−log(C_AoP + ε)`.
pub fn aop_conf_loss(c_aop: f64, epsilon: f64) -> f64 {
    -math::ln(c_aop + epsilon)
}

/// Per-image geometric outcome under the current parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AopOutcome {
    pub c_aop: Option<f64>,
    pub aop_deg: Option<f64>,
    pub failure: Option<StageError>,
    /// This image's `L_aop`, the failure penalty `−log ε` when measurement failed.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossComponents {
    pub l_ent: f64,
    pub l_tv: f64,
    /// Mean of per-image `L_aop`.
    pub l_aop: f64,
    /// `λ_ent·L_ent + λ_tv·L_tv + λ_aop·L_aop`.
    pub l_tta: f64,
    pub images: Vec<AopOutcome>,
}

fn aop_outcome(sample: &TtaSample, params: &AdaptParams, epsilon: f64) -> AopOutcome {
    let labels = adapted_labels(&sample.logits, params);
    match compute_aop(&labels, &sample.conf, PixelSpacing::default()) {
        Ok(res) => AopOutcome {
            c_aop: Some(res.c_aop),
            aop_deg: Some(res.aop_deg),
            failure: None,
            loss: aop_conf_loss(res.c_aop, epsilon),
        },
        Err(e) => AopOutcome { c_aop: None, aop_deg: None, failure: Some(e), loss: -math::ln(epsilon) },
    }
}

fn check_batch(samples: &[TtaSample]) -> Result<()> {
    let first = samples.first().ok_or_else(|| Error::InvalidInput("empty batch".into()))?;
    let (h, w) = (first.logits.height(), first.logits.width());
    for s in samples {
        if s.logits.height() != h || s.logits.width() != w {
            return Err(Error::InvalidInput("batch members must share one extent".into()));
        }
        if s.conf.height() != h || s.conf.width() != w {
            return Err(Error::InvalidInput("logits and confidence extents differ".into()));
        }
    }
    Ok(())
}

/// Full objective under `params`, with every component.
pub fn total_loss(samples: &[TtaSample], params: &AdaptParams, config: &TtaConfig) -> Result<LossComponents> {
    check_batch(samples)?;
    config.validate()?;
    params.validate()?;
    let mut probs = Vec::with_capacity(samples.len());
    for s in samples {
        probs.push(raster::softmax(&apply_head(&s.logits, params)?));
    }
    let l_ent = entropy_loss(&probs)?;
    let l_tv = tv_loss(&probs)?;
    let images: Vec<AopOutcome> = samples.iter().map(|s| aop_outcome(s, params, config.epsilon)).collect();
    let l_aop = images.iter().map(|o| o.loss).sum::<f64>() / images.len() as f64;
    let l_tta = config.lambda_ent * l_ent + config.lambda_tv * l_tv + config.lambda_aop * l_aop;
    Ok(LossComponents { l_ent, l_tv, l_aop, l_tta, images })
}

// ── Gradients ──────────────────────────────────────────────────────────────

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Analytic gradient of `λ_ent·L_ent + λ_tv·L_tv` over the trainable groups.
///
/// Back-propagates through softmax and the head; `|·|` in the TV term uses
/// subgradient 0 at exact zeros.
pub fn grad_ent_tv(samples: &[TtaSample], params: &AdaptParams, config: &TtaConfig) -> Result<ParamGrad> {
    check_batch(samples)?;
    params.validate()?;
    let (h, w) = (samples[0].logits.height(), samples[0].logits.width());
    if h < 2 || w < 2 {
        return Err(Error::InvalidInput(format!("total variation needs H, W >= 2, got {h}x{w}")));
    }
    let plane = h * w;
    let n = (samples.len() * plane) as f64;
    let mut grad = [0.0; NUM_PARAMS];
    let mut probs = vec![0.0; NUM_CLASSES * plane];
    let mut dprob = vec![0.0; NUM_CLASSES * plane];

    for s in samples {
        let z = s.logits.values();
        for i in 0..plane {
            let p = raster::softmax3(head_pixel(params, [z[i], z[plane + i], z[2 * plane + i]]));
            for c in 0..NUM_CLASSES {
                probs[c * plane + i] = p[c];
            }
        }
        // dL/dp
        for k in 0..probs.len() {
            let p = probs[k];
            dprob[k] = if p > 0.0 { -config.lambda_ent * (math::ln(p) + 1.0) / n } else { 0.0 };
        }
        if config.lambda_tv != 0.0 {
            let scale = config.lambda_tv / n;
            for c in 0..NUM_CLASSES {
                let base = c * plane;
                for i in 0..h - 1 {
                    for j in 0..w - 1 {
                        let here = base + i * w + j;
                        let down = here + w;
                        let right = here + 1;
                        let sd = sign(probs[down] - probs[here]) * scale;
                        let sr = sign(probs[right] - probs[here]) * scale;
                        dprob[down] += sd;
                        dprob[right] += sr;
                        dprob[here] -= sd + sr;
                    }
                }
            }
        }
        for i in 0..plane {
            let zi = [z[i], z[plane + i], z[2 * plane + i]];
            let p = [probs[i], probs[plane + i], probs[2 * plane + i]];
            let g = [dprob[i], dprob[plane + i], dprob[2 * plane + i]];
            let pg = p[0] * g[0] + p[1] * g[1] + p[2] * g[2];
            // dL/dz' through softmax
            let gz: [f64; 3] = core::array::from_fn(|c| p[c] * (g[c] - pg));
            let u: [f64; 3] = core::array::from_fn(|c| params.gamma[c] * zi[c] + params.beta[c]);
            for c in 0..3 {
                for cp in 0..3 {
                    grad[6 + c * 3 + cp] += gz[c] * u[cp];
                }
            }
            for cp in 0..3 {
                let gu = params.mix[0][cp] * gz[0] + params.mix[1][cp] * gz[1] + params.mix[2][cp] * gz[2];
                grad[cp] += gu * zi[cp];
                grad[3 + cp] += gu;
            }
        }
    }
    for (k, g) in grad.iter_mut().enumerate() {
        if !params.trainable.allows(ParamGroup::of(k)) {
            *g = 0.0;
        }
    }
    Ok(ParamGrad(grad))
}

/// Central finite-difference gradient of `λ_aop·L_aop`.
///
/// A coordinate whose `±fd_step` probe sends any image's measurement into
/// an error state contributes zero.
pub fn grad_aop_fd(samples: &[TtaSample], params: &AdaptParams, config: &TtaConfig) -> Result<ParamGrad> {
    check_batch(samples)?;
    config.validate()?;
    params.validate()?;
    let mut grad = ParamGrad::ZERO;
    if config.lambda_aop == 0.0 {
        return Ok(grad);
    }
    let probe = |p: &AdaptParams| -> Option<f64> {
        let mut sum = 0.0;
        for s in samples {
            let o = aop_outcome(s, p, config.epsilon);
            o.failure.is_none().then_some(())?;
            sum += o.loss;
        }
        Some(sum / samples.len() as f64)
    };
    for k in params.trainable_indices() {
        let mut plus = *params;
        let mut minus = *params;
        plus.set(k, params.get(k) + config.fd_step);
        minus.set(k, params.get(k) - config.fd_step);
        if let (Some(lp), Some(lm)) = (probe(&plus), probe(&minus)) {
            grad.0[k] = config.lambda_aop * (lp - lm) / (2.0 * config.fd_step);
        }
    }
    Ok(grad)
}

// ── Adaptation loop ────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct TtaRecord {
    pub step: usize,
    /// Losses evaluated at the parameters the step started from.
    pub losses: LossComponents,
    pub grad: ParamGrad,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TtaTrace {
    pub config: TtaConfig,
    pub records: Vec<TtaRecord>,
    pub params_before: AdaptParams,
    pub params_after: AdaptParams,
}

/// Plain gradient descent on the trainable groups for `config.steps` steps.
pub fn adapt(samples: &[TtaSample], params: &AdaptParams, config: &TtaConfig) -> Result<(AdaptParams, TtaTrace)> {
    config.validate()?;
    params.validate()?;
    let mut current = *params;
    let mut records = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let losses = total_loss(samples, &current, config)?;
        let grad = grad_ent_tv(samples, &current, config)?.add(&grad_aop_fd(samples, &current, config)?);
        for k in current.trainable_indices().collect::<Vec<_>>() {
            current.set(k, current.get(k) - config.lr * grad.0[k]);
        }
        current.validate()?;
        records.push(TtaRecord { step, losses, grad });
    }
    let trace = TtaTrace { config: *config, records, params_before: *params, params_after: current };
    Ok((current, trace))
}
