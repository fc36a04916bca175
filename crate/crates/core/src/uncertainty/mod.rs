//! The five confidence estimators.
//!
//! Each estimator maps a trained [`TaskModel`] and its encoded inputs to one
//! [`Scored`] per sample; [`records`] attaches ids and label strings to turn
//! those into [`ConfidenceRecord`]s. Every confidence is "higher = more
//! likely correct" and lies in [0, 1].

mod dissector;
mod mutation;
mod records;
mod temperature;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{argmax, Real};
use crate::seed::rng_for;
use crate::tasks::{Noise, TaskModel};

pub use dissector::{dissector, growth_weights, sv_score, train_probes, Growth, LinearProbe, ProbeConfig, ProbeSet};
pub use mutation::{apply_operator, mmutant, mutate_model, MutationOperator, DEFAULT_DEGREE, DEFAULT_MUTANTS};
pub use records::{read_scores_csv, records, write_scores_csv, ConfidenceRecord, SCORES_HEADER};
pub use temperature::{fit_temperature, nll, temp_scale, TemperatureFit, T_MAX, T_MIN};

pub const DEFAULT_MC_PASSES: usize = 30;
pub const DEFAULT_MC_P: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Vanilla,
    TempScale,
    McDropout,
    #[serde(rename = "mmutant")]
    MMutant,
    Dissector,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Vanilla, Method::TempScale, Method::McDropout, Method::MMutant, Method::Dissector];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Vanilla => "vanilla",
            Method::TempScale => "temp_scale",
            Method::McDropout => "mc_dropout",
            Method::MMutant => "mmutant",
            Method::Dissector => "dissector",
        }
    }

    /// Variant tags in report order; `[""]` for methods without variants.
    pub fn variants(self) -> &'static [&'static str] {
        match self {
            Method::MMutant => &["GF", "WS", "NS", "NAI"],
            Method::Dissector => &["linear", "log", "exp"],
            _ => &[""],
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vanilla" => Ok(Method::Vanilla),
            "temp" | "temp_scale" => Ok(Method::TempScale),
            "mcdropout" | "mc_dropout" => Ok(Method::McDropout),
            "mmutant" => Ok(Method::MMutant),
            "dissector" => Ok(Method::Dissector),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

/// One estimator output before labels are attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub predicted: usize,
    pub raw_score: f64,
    pub confidence: f64,
}

/// Maximum softmax probability.
pub fn vanilla_from_probs<F: Real>(probs: &[F]) -> Scored {
    let predicted = argmax(probs);
    let c = probs[predicted].f64();
    Scored {
        predicted,
        raw_score: c,
        confidence: c,
    }
}

pub fn vanilla<M: TaskModel<f32>>(model: &M, samples: &[M::Input]) -> Result<Vec<Scored>> {
    samples.iter().map(|x| Ok(vanilla_from_probs(&model.forward(x, None)?.probs))).collect()
}

/// Mean of `passes` dropout-perturbed softmax vectors. Each sample draws
/// from its own generator, so scores do not depend on evaluation order.
pub fn mc_dropout<M: TaskModel<f32>>(model: &M, samples: &[M::Input], passes: usize, p: f64, seed: u64) -> Result<Vec<Scored>> {
    if passes == 0 {
        return Err(Error::InvalidArgument("MC-Dropout needs at least one pass".into()));
    }
    samples
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let mut rng = rng_for(seed, &format!("mc-dropout-{i}"));
            let mut mean = vec![0.0f64; model.num_classes()];
            for _ in 0..passes {
                let mut noise = Noise { p, rng: &mut rng };
                let f = model.forward(x, Some(&mut noise))?;
                for (m, &q) in mean.iter_mut().zip(&f.probs) {
                    *m += q as f64;
                }
            }
            mean.iter_mut().for_each(|m| *m /= passes as f64);
            Ok(vanilla_from_probs(&mean))
        })
        .collect()
}

/// Picks the variant whose records score best under `evaluate`. Variants
/// the evaluator cannot score (`None`) are passed over; `Ok(None)` means no
/// variant could be scored.
pub fn best_of_variants<'a, T>(
    groups: &'a [(String, T)],
    mut evaluate: impl FnMut(&T) -> Result<Option<f64>>,
    higher_is_better: bool,
) -> Result<Option<(&'a str, f64)>> {
    if groups.is_empty() {
        return Err(Error::Empty("no variants to choose from".into()));
    }
    let mut best: Option<(&str, f64)> = None;
    for (name, recs) in groups {
        let Some(score) = evaluate(recs)? else { continue };
        let better = match best {
            None => true,
            Some((_, b)) if higher_is_better => score > b,
            Some((_, b)) => score < b,
        };
        if better {
            best = Some((name, score));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng;
    use crate::tasks::{EncodedMethod, MlpCompletionModel, PathAttentionModel, EncodedCbow};

    fn cs_model() -> (PathAttentionModel<f32>, Vec<EncodedMethod>) {
        let m = PathAttentionModel::new(12, 9, 7, 6, 0.5, &mut rng(4));
        let xs = (0..20u32)
            .map(|i| EncodedMethod { contexts: (0..1 + i % 4).map(|j| [2 + (i + j) % 10, 2 + j % 7, 2 + i % 9]).collect(), label: 2 + i % 5 })
            .collect();
        (m, xs)
    }

    #[test]
    fn vanilla_examples() {
        let s = vanilla_from_probs(&[0.7f64, 0.2, 0.1]);
        assert_eq!((s.predicted, s.confidence), (0, 0.7));
        assert_eq!(vanilla_from_probs(&[0.25f32; 4]).confidence, 0.25);
        let (m, xs) = cs_model();
        let twice = vanilla(&m, &[xs[3].clone(), xs[3].clone()]).unwrap();
        assert_eq!(twice[0], twice[1]);
    }

    #[test]
    fn mc_dropout_at_zero_is_vanilla() {
        let (m, xs) = cs_model();
        let v = vanilla(&m, &xs).unwrap();
        for k in [1, 7] {
            let mc = mc_dropout(&m, &xs, k, 0.0, 3).unwrap();
            for (a, b) in v.iter().zip(&mc) {
                assert_eq!(a.predicted, b.predicted);
                assert_eq!(a.confidence.to_bits(), b.confidence.to_bits());
            }
        }
        let cc = MlpCompletionModel::<f32>::new(8, 5, &mut rng(6));
        let cx: Vec<EncodedCbow> = (0..10).map(|i| EncodedCbow { context: vec![2 + i % 6, 1, 3], target: 4 }).collect();
        let (a, b) = (vanilla(&cc, &cx).unwrap(), mc_dropout(&cc, &cx, 5, 0.0, 1).unwrap());
        assert_eq!(a, b);
        assert!(mc_dropout(&m, &xs, 0, 0.5, 1).is_err());
    }

    #[test]
    fn mc_dropout_is_seeded_and_converges() {
        let (m, xs) = cs_model();
        assert_eq!(mc_dropout(&m, &xs, 1, 0.5, 9).unwrap(), mc_dropout(&m, &xs, 1, 0.5, 9).unwrap());
        let a = mc_dropout(&m, &xs[..5], 100, 0.5, 1).unwrap();
        let b = mc_dropout(&m, &xs[..5], 200, 0.5, 2).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.confidence - y.confidence).abs() < 0.05);
            assert!((0.0..=1.0).contains(&x.confidence));
        }
    }

    #[test]
    fn best_of_examples() {
        let g = |v: &[f64]| v.iter().enumerate().map(|(i, &s)| (format!("v{i}"), s)).collect::<Vec<_>>();
        let single = g(&[42.0]);
        assert_eq!(best_of_variants(&single, |s| Ok(Some(*s)), true).unwrap(), Some(("v0", 42.0)));
        let auc = g(&[60.0, 70.0, 65.0]);
        assert_eq!(best_of_variants(&auc, |s| Ok(Some(*s)), true).unwrap(), Some(("v1", 70.0)));
        let brier = g(&[0.2, 0.1]);
        assert_eq!(best_of_variants(&brier, |s| Ok(Some(*s)), false).unwrap(), Some(("v1", 0.1)));
        let none: Vec<(String, f64)> = vec![];
        assert!(best_of_variants(&none, |s| Ok(Some(*s)), true).is_err());
        let undefined = g(&[1.0, 2.0]);
        assert_eq!(best_of_variants(&undefined, |_| Ok(None), true).unwrap(), None);
    }

    #[test]
    fn method_names() {
        assert_eq!("temp".parse::<Method>().unwrap(), Method::TempScale);
        assert_eq!("mcdropout".parse::<Method>().unwrap(), Method::McDropout);
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.as_str()));
        }
    }
}
