use rand::Rng;

use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

fn shape_err(msg: String) -> Error {
    Error::Shape(msg)
}

/// `y = W x + b` with `W` of shape `[out, in]`.
pub fn affine<F: Real>(x: &[F], w: &Tensor<F>, b: &[F]) -> Result<Vec<F>> {
    let (out, inp) = (w.rows(), w.cols());
    if x.len() != inp || b.len() != out {
        return Err(shape_err(format!(
            "affine: W is {out}x{inp}, x has {}, b has {}",
            x.len(),
            b.len()
        )));
    }
    Ok((0..out)
        .map(|o| {
            let row = w.row(o);
            let mut acc = b[o];
            for (wi, xi) in row.iter().zip(x) {
                acc += *wi * *xi;
            }
            acc
        })
        .collect())
}

/// Accumulates `dW += dy xᵀ`, `db += dy`, and returns `dx = Wᵀ dy`.
pub fn affine_backward<F: Real>(x: &[F], w: &mut Tensor<F>, b_grad: &mut [F], dy: &[F]) -> Vec<F> {
    let inp = w.cols();
    let mut dx = vec![F::zero(); inp];
    let (values, grad) = w.split_mut();
    for (o, &g) in dy.iter().enumerate() {
        b_grad[o] += g;
        if g == F::zero() {
            continue;
        }
        let row = &values[o * inp..(o + 1) * inp];
        let grow = &mut grad[o * inp..(o + 1) * inp];
        for i in 0..inp {
            grow[i] += g * x[i];
            dx[i] += g * row[i];
        }
    }
    dx
}

/// Rows of `table` for `ids`, concatenated.
pub fn embedding_lookup<F: Real>(table: &Tensor<F>, ids: &[u32]) -> Result<Vec<F>> {
    let d = table.cols();
    let mut out = Vec::with_capacity(ids.len() * d);
    for &id in ids {
        if id as usize >= table.rows() {
            return Err(shape_err(format!(
                "embedding id {id} out of range for {} rows",
                table.rows()
            )));
        }
        out.extend_from_slice(table.row(id as usize));
    }
    Ok(out)
}

/// Scatter-adds row gradients back into the table gradient.
pub fn embedding_backward<F: Real>(table: &mut Tensor<F>, ids: &[u32], drows: &[F]) {
    let d = table.cols();
    let grad = table.grad_mut();
    for (k, &id) in ids.iter().enumerate() {
        let dst = &mut grad[id as usize * d..(id as usize + 1) * d];
        for (g, dr) in dst.iter_mut().zip(&drows[k * d..(k + 1) * d]) {
            *g += *dr;
        }
    }
}

pub fn tanh<F: Real>(x: &[F]) -> Vec<F> {
    x.iter().map(|v| v.tanh()).collect()
}

/// Gradient through `tanh` given its output `y`.
pub fn tanh_backward<F: Real>(y: &[F], dy: &[F]) -> Vec<F> {
    y.iter().zip(dy).map(|(&y, &g)| g * (F::one() - y * y)).collect()
}

/// Max-subtracted softmax.
pub fn softmax<F: Real>(logits: &[F]) -> Vec<F> {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: F = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `dz = p ⊙ (dp − ⟨p, dp⟩)`.
pub fn softmax_backward<F: Real>(p: &[F], dp: &[F]) -> Vec<F> {
    let dot: F = p.iter().zip(dp).map(|(&a, &b)| a * b).sum();
    p.iter().zip(dp).map(|(&pi, &gi)| pi * (gi - dot)).collect()
}

pub fn cross_entropy<F: Real>(probs: &[F], label: usize) -> Result<F> {
    let p = probs.get(label).ok_or(Error::LabelOutOfRange {
        label,
        classes: probs.len(),
    })?;
    Ok(-p.ln())
}

pub fn cross_entropy_backward<F: Real>(probs: &[F], label: usize) -> Vec<F> {
    let mut d = vec![F::zero(); probs.len()];
    d[label] = -F::one() / probs[label];
    d
}

/// Fused gradient of `cross_entropy(softmax(z), label)` with respect to `z`.
pub fn softmax_cross_entropy_backward<F: Real>(probs: &[F], label: usize) -> Vec<F> {
    let mut d = probs.to_vec();
    d[label] -= F::one();
    d
}

/// Inverted dropout. Returns the output and, in training mode, the
/// per-element multiplier (`0` or `1/(1-p)`) needed for the backward pass.
pub fn dropout<F: Real, R: Rng + ?Sized>(x: &[F], p: f64, training: bool, rng: &mut R) -> Result<(Vec<F>, Option<Vec<F>>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("dropout probability {p} outside [0, 1)")));
    }
    if !training || p == 0.0 {
        return Ok((x.to_vec(), None));
    }
    let scale = F::of(1.0 / (1.0 - p));
    let mask: Vec<F> = x
        .iter()
        .map(|_| if rng.random::<f64>() < p { F::zero() } else { scale })
        .collect();
    let y = x.iter().zip(&mask).map(|(&v, &m)| v * m).collect();
    Ok((y, Some(mask)))
}

pub fn dropout_backward<F: Real>(mask: Option<&[F]>, dy: &[F]) -> Vec<F> {
    match mask {
        Some(m) => dy.iter().zip(m).map(|(&g, &m)| g * m).collect(),
        None => dy.to_vec(),
    }
}

/// Attention pooling of `n` row vectors of width `d`: weights
/// `softmax(C a)` and pooled vector `weightsᵀ C`.
pub fn attention_pool<F: Real>(contexts: &[F], d: usize, a: &[F]) -> Result<(Vec<F>, Vec<F>)> {
    if d == 0 || !contexts.len().is_multiple_of(d) || a.len() != d {
        return Err(shape_err(format!(
            "attention_pool: {} values with width {d}, attention vector {}",
            contexts.len(),
            a.len()
        )));
    }
    let n = contexts.len() / d;
    if n == 0 {
        return Err(Error::Empty("attention over zero contexts".into()));
    }
    let scores: Vec<F> = contexts
        .chunks_exact(d)
        .map(|c| c.iter().zip(a).map(|(&x, &y)| x * y).sum())
        .collect();
    let weights = softmax(&scores);
    let mut pooled = vec![F::zero(); d];
    for (c, &w) in contexts.chunks_exact(d).zip(&weights) {
        for (p, &x) in pooled.iter_mut().zip(c) {
            *p += w * x;
        }
    }
    Ok((pooled, weights))
}

/// Returns `(dC, da)` for `attention_pool` given `dpooled`.
pub fn attention_pool_backward<F: Real>(contexts: &[F], d: usize, a: &[F], weights: &[F], dpooled: &[F]) -> (Vec<F>, Vec<F>) {
    let dweights: Vec<F> = contexts
        .chunks_exact(d)
        .map(|c| c.iter().zip(dpooled).map(|(&x, &g)| x * g).sum())
        .collect();
    let dscores = softmax_backward(weights, &dweights);
    let mut dc = vec![F::zero(); contexts.len()];
    let mut da = vec![F::zero(); d];
    for (j, c) in contexts.chunks_exact(d).enumerate() {
        let dcj = &mut dc[j * d..(j + 1) * d];
        for k in 0..d {
            dcj[k] = weights[j] * dpooled[k] + dscores[j] * a[k];
            da[k] += dscores[j] * c[k];
        }
    }
    (dc, da)
}

/// Index of the largest value; the first one wins ties.
pub fn argmax<F: Real>(xs: &[F]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// `(argmax, largest, second largest)`.
pub fn top_two<F: Real>(xs: &[F]) -> (usize, F, F) {
    let best = argmax(xs);
    let second = xs
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != best)
        .map(|(_, &x)| x)
        .fold(F::neg_infinity(), F::max);
    let second = if second == F::neg_infinity() { F::zero() } else { second };
    (best, xs[best], second)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    const H: f64 = 1e-5;
    const TOL: f64 = 1e-4;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
    }

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    /// Central differences of `f` at `x`.
    fn numeric_grad(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let mut xp = x.to_vec();
        (0..x.len())
            .map(|i| {
                let orig = xp[i];
                xp[i] = orig + H;
                let up = f(&xp);
                xp[i] = orig - H;
                let down = f(&xp);
                xp[i] = orig;
                (up - down) / (2.0 * H)
            })
            .collect()
    }

    fn assert_close(analytic: &[f64], numeric: &[f64], what: &str) {
        assert_eq!(analytic.len(), numeric.len());
        for (a, n) in analytic.iter().zip(numeric) {
            assert!(rel_err(*a, *n) < TOL, "{what}: analytic {a} vs numeric {n}");
        }
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn softmax_values() {
        assert_eq!(softmax(&[0.0f64, 0.0]), [0.5, 0.5]);
        let p = softmax(&[1000.0f64, 0.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1] < 1e-300);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let z: Vec<f64> = rand_vec(&mut rng, 7).iter().map(|v| v * 50.0).collect();
            let p = softmax(&z);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn attention_single_context() {
        let (pooled, w) = attention_pool(&[0.3f64, -2.0, 5.0], 3, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(w, [1.0]);
        assert_eq!(pooled, [0.3, -2.0, 5.0]);
        assert!(attention_pool::<f64>(&[], 3, &[0.0; 3]).is_err());
        assert!(attention_pool(&[1.0f64; 4], 3, &[0.0; 3]).is_err());
    }

    #[test]
    fn dropout_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = vec![0.25f32, -1.5, 3.0];
        assert_eq!(dropout(&x, 0.0, true, &mut rng).unwrap().0, x);
        assert_eq!(dropout(&x, 0.5, false, &mut rng).unwrap().0, x);
        assert!(dropout(&x, 1.0, true, &mut rng).is_err());
        assert!(dropout(&x, -0.1, true, &mut rng).is_err());

        let ones = vec![1.0f64; 100_000];
        let (y, _) = dropout(&ones, 0.5, true, &mut rng).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn cross_entropy_values() {
        assert_eq!(cross_entropy(&[0.0f64, 1.0, 0.0], 1).unwrap(), 0.0);
        let l = cross_entropy(&[0.25f64; 4], 2).unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-15);
        assert!(matches!(cross_entropy(&[0.5f64, 0.5], 2), Err(Error::LabelOutOfRange { .. })));
    }

    #[test]
    fn gradcheck_affine() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let (out, inp) = (rng.random_range(1..6), rng.random_range(1..6));
            let x = rand_vec(&mut rng, inp);
            let wv = rand_vec(&mut rng, out * inp);
            let b = rand_vec(&mut rng, out);
            let r = rand_vec(&mut rng, out);
            let loss = |x: &[f64], wv: &[f64], b: &[f64]| {
                let w = Tensor::from_vec(&[out, inp], wv.to_vec()).unwrap();
                dot(&affine(x, &w, b).unwrap(), &r)
            };
            let mut w = Tensor::from_vec(&[out, inp], wv.clone()).unwrap();
            let mut db = vec![0.0; out];
            let dx = affine_backward(&x, &mut w, &mut db, &r);
            assert_close(&dx, &numeric_grad(&x, |x| loss(x, &wv, &b)), "affine dx");
            assert_close(w.grad().unwrap(), &numeric_grad(&wv, |wv| loss(&x, wv, &b)), "affine dW");
            assert_close(&db, &numeric_grad(&b, |b| loss(&x, &wv, b)), "affine db");
        }
    }

    #[test]
    fn gradcheck_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (rows, d) = (rng.random_range(2..6), rng.random_range(1..5));
            let ids: Vec<u32> = (0..rng.random_range(1..5)).map(|_| rng.random_range(0..rows as u32)).collect();
            let tv = rand_vec(&mut rng, rows * d);
            let r = rand_vec(&mut rng, ids.len() * d);
            let loss = |tv: &[f64]| {
                let t = Tensor::from_vec(&[rows, d], tv.to_vec()).unwrap();
                dot(&embedding_lookup(&t, &ids).unwrap(), &r)
            };
            let mut t = Tensor::from_vec(&[rows, d], tv.clone()).unwrap();
            embedding_backward(&mut t, &ids, &r);
            assert_close(t.grad().unwrap(), &numeric_grad(&tv, loss), "embedding");
        }
    }

    #[test]
    fn gradcheck_tanh_softmax_ce() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let n = rng.random_range(1..8);
            let x: Vec<f64> = rand_vec(&mut rng, n).iter().map(|v| v * 3.0).collect();
            let r = rand_vec(&mut rng, n);
            let dx = tanh_backward(&tanh(&x), &r);
            assert_close(&dx, &numeric_grad(&x, |x| dot(&tanh(x), &r)), "tanh");

            let dz = softmax_backward(&softmax(&x), &r);
            assert_close(&dz, &numeric_grad(&x, |x| dot(&softmax(x), &r)), "softmax");

            let label = rng.random_range(0..n);
            let dz = softmax_cross_entropy_backward(&softmax(&x), label);
            let num = numeric_grad(&x, |x| cross_entropy(&softmax(x), label).unwrap());
            assert_close(&dz, &num, "softmax+ce");

            let p: Vec<f64> = x.iter().map(|v| v.abs() + 0.1).collect();
            let dp = cross_entropy_backward(&p, label);
            assert_close(&dp, &numeric_grad(&p, |p| cross_entropy(p, label).unwrap()), "ce");
        }
    }

    #[test]
    fn gradcheck_dropout() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.random_range(1..10);
            let x = rand_vec(&mut rng, n);
            let r = rand_vec(&mut rng, n);
            let seed = rng.random::<u64>();
            let f = |x: &[f64]| {
                let mut local = ChaCha8Rng::seed_from_u64(seed);
                dot(&dropout(x, 0.5, true, &mut local).unwrap().0, &r)
            };
            let mut local = ChaCha8Rng::seed_from_u64(seed);
            let (_, mask) = dropout(&x, 0.5, true, &mut local).unwrap();
            assert_close(&dropout_backward(mask.as_deref(), &r), &numeric_grad(&x, f), "dropout");
        }
    }

    #[test]
    fn gradcheck_attention() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let (n, d) = (rng.random_range(1..6), rng.random_range(1..5));
            let c = rand_vec(&mut rng, n * d);
            let a = rand_vec(&mut rng, d);
            let r = rand_vec(&mut rng, d);
            let (_, w) = attention_pool(&c, d, &a).unwrap();
            let (dc, da) = attention_pool_backward(&c, d, &a, &w, &r);
            let fc = |c: &[f64]| dot(&attention_pool(c, d, &a).unwrap().0, &r);
            let fa = |a: &[f64]| dot(&attention_pool(&c, d, a).unwrap().0, &r);
            assert_close(&dc, &numeric_grad(&c, fc), "attention dC");
            assert_close(&da, &numeric_grad(&a, fa), "attention da");
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn argmax_ties_pick_first() {
        assert_eq!(argmax(&[1.0f32, 3.0, 3.0]), 1);
        assert_eq!(top_two(&[0.2f64, 0.7, 0.1]), (1, 0.7, 0.2));
        assert_eq!(top_two(&[1.0f64]), (0, 1.0, 0.0));
    }
}
