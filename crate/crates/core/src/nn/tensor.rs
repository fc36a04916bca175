use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;

use crate::error::{Error, Result};

pub trait Real:
    Float + FromPrimitive + ToPrimitive + AddAssign + SubAssign + MulAssign + Sum + Debug + Default + Send + Sync + 'static
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).unwrap()
    }

    fn f64(self) -> f64 {
        self.to_f64().unwrap()
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F = f32> {
    shape: Vec<usize>,
    values: Vec<F>,
    grad: Option<Vec<F>>,
}

impl<F: Real> Tensor<F> {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            values: vec![F::zero(); n],
            grad: None,
        }
    }

    pub fn from_vec(shape: &[usize], values: Vec<F>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {n} values, got {}",
                values.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            values,
            grad: None,
        })
    }

    /// Uniform in `±bound`.
    pub fn uniform<R: Rng + ?Sized>(shape: &[usize], bound: f64, rng: &mut R) -> Self {
        let n = shape.iter().product();
        let values = (0..n).map(|_| F::of(rng.random_range(-bound..=bound))).collect();
        Tensor {
            shape: shape.to_vec(),
            values,
            grad: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn rows(&self) -> usize {
        if self.shape.len() >= 2 { self.shape[0] } else { 1 }
    }

    pub fn cols(&self) -> usize {
        *self.shape.last().unwrap_or(&0)
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [F] {
        &mut self.values
    }

    pub fn row(&self, i: usize) -> &[F] {
        let c = self.cols();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        let c = self.cols();
        &mut self.values[i * c..(i + 1) * c]
    }

    pub fn grad(&self) -> Option<&[F]> {
        self.grad.as_deref()
    }

    /// Gradient buffer, allocated as zeros on first use.
    pub fn grad_mut(&mut self) -> &mut [F] {
        let n = self.values.len();
        self.grad.get_or_insert_with(|| vec![F::zero(); n])
    }

    /// Values and gradient buffer borrowed together.
    pub fn split_mut(&mut self) -> (&mut [F], &mut [F]) {
        let n = self.values.len();
        let grad = self.grad.get_or_insert_with(|| vec![F::zero(); n]);
        (&mut self.values, grad)
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = &mut self.grad {
            g.iter_mut().for_each(|x| *x = F::zero());
        }
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    pub fn scale_grad(&mut self, factor: F) {
        if let Some(g) = &mut self.grad {
            g.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn cast<G: Real>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            values: self.values.iter().map(|v| G::of(v.f64())).collect(),
            grad: None,
        }
    }

    /// Population standard deviation of the values.
    pub fn std(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        let n = self.values.len() as f64;
        let mean = self.values.iter().map(|v| v.f64()).sum::<f64>() / n;
        let var = self.values.iter().map(|v| (v.f64() - mean).powi(2)).sum::<f64>() / n;
        var.sqrt()
    }
}
