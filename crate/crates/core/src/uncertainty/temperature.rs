use serde::{Deserialize, Serialize};

use super::Scored;
use crate::error::{Error, Result};
use crate::nn::{argmax, softmax};
use crate::tasks::TaskModel;

pub const T_MIN: f64 = 0.01;
pub const T_MAX: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureFit {
    pub temperature: f64,
    pub nll_at_one: f64,
    pub nll: f64,
    /// The optimum sat on one of the bounds (typical of single-class sets).
    pub clamped: bool,
}

/// Mean negative log-likelihood of `softmax(z / t)`, in 64-bit.
pub fn nll(logits: &[Vec<f32>], labels: &[usize], t: f64) -> f64 {
    let beta = 1.0 / t;
    let total: f64 = logits
        .iter()
        .zip(labels)
        .map(|(z, &y)| {
            // Relative to the true logit, so confident-and-right stays precise.
            let zy = z[y] as f64;
            let d: Vec<f64> = z.iter().map(|&v| beta * (v as f64 - zy)).collect();
            let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if max == 0.0 {
                let rest: f64 = d.iter().enumerate().filter(|&(j, _)| j != y).map(|(_, v)| v.exp()).sum();
                rest.ln_1p()
            } else {
                max + d.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
            }
        })
        .sum();
    total / logits.len() as f64
}

/// Fits one temperature to the validation logits. The NLL is convex in the
/// inverse temperature, so a golden-section search over `1/T` finds the
/// optimum within `[T_MIN, T_MAX]`; `T = 1` is kept if nothing beats it.
pub fn fit_temperature<M: TaskModel<f32>>(model: &M, validation: &[M::Input]) -> Result<TemperatureFit> {
    if validation.is_empty() {
        return Err(Error::Empty("temperature scaling needs validation samples".into()));
    }
    let mut logits = Vec::with_capacity(validation.len());
    let mut labels = Vec::with_capacity(validation.len());
    for x in validation {
        logits.push(model.forward(x, None)?.logits);
        labels.push(M::label(x) as usize);
    }
    Ok(fit_logits(&logits, &labels))
}

pub(crate) fn fit_logits(logits: &[Vec<f32>], labels: &[usize]) -> TemperatureFit {
    let f = |beta: f64| nll(logits, labels, 1.0 / beta);
    let (mut lo, mut hi) = (1.0 / T_MAX, 1.0 / T_MIN);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if hi - lo < 1e-10 {
            break;
        }
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = f(b);
        }
    }
    let beta = if fa <= fb { a } else { b };
    let at_one = f(1.0);
    let best = f(beta);
    let clamped = beta <= 1.0 / T_MAX * (1.0 + 1e-6) || beta >= 1.0 / T_MIN * (1.0 - 1e-6);
    if clamped {
        log::warn!("temperature fit hit its bound (T = {:.4}); validation set may be degenerate", 1.0 / beta);
    }
    if best <= at_one {
        TemperatureFit { temperature: 1.0 / beta, nll_at_one: at_one, nll: best, clamped }
    } else {
        TemperatureFit { temperature: 1.0, nll_at_one: at_one, nll: at_one, clamped }
    }
}

/// `softmax(logits / T)` at the base model's predicted class, which the
/// scaling keeps by construction.
pub fn temp_scale<M: TaskModel<f32>>(model: &M, temperature: f64, samples: &[M::Input]) -> Result<Vec<Scored>> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::MissingState(format!("temperature {temperature} is not a fitted value")));
    }
    let t = temperature as f32;
    samples
        .iter()
        .map(|x| {
            let f = model.forward(x, None)?;
            let predicted = argmax(&f.probs);
            let z: Vec<f32> = f.logits.iter().map(|&v| v / t).collect();
            let c = softmax(&z)[predicted] as f64;
            Ok(Scored { predicted, raw_score: c, confidence: c })
        })
        .collect()
}
