//! Dense row-major n-dimensional tensor over a float scalar type.

use alloc::vec;
use alloc::vec::Vec;

use super::NeuralError;

/// Float element type for network math. `f32` is used for training,
/// `f64` for finite-difference verification of the same kernels.
pub trait Scalar:
    num_traits::Float + core::fmt::Debug + core::iter::Sum + Default + Copy + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// Row-major dense tensor. The last axis is contiguous; kernels below
/// lean on that for tight inner loops.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self, NeuralError> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(NeuralError::ElementCount {
                shape: shape.to_vec(),
                expected,
                got: data.len(),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Same data, new shape; element count must match.
    pub fn reshaped(self, shape: &[usize]) -> Result<Self, NeuralError> {
        Tensor::from_vec(shape, self.data)
    }

    /// Elementwise copy into a new scalar type (f32 -> f64 widens
    /// exactly; f64 -> f32 rounds to nearest).
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| U::from_f64(Scalar::to_f64(v))).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_element_count() {
        assert!(Tensor::<f32>::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
        assert!(matches!(
            Tensor::<f32>::from_vec(&[2, 3], vec![0.0; 5]),
            Err(NeuralError::ElementCount {
                expected: 6,
                got: 5,
                ..
            })
        ));
    }

    #[test]
    fn zeros_and_reshape() {
        let t = Tensor::<f64>::zeros(&[2, 2, 2]);
        assert_eq!(t.len(), 8);
        let r = t.reshaped(&[4, 2]).unwrap();
        assert_eq!(r.shape(), &[4, 2]);
        assert!(Tensor::<f64>::zeros(&[4]).reshaped(&[5]).is_err());
    }

    #[test]
    fn cast_widens_exactly() {
        let t = Tensor::<f32>::from_vec(&[3], vec![0.1, -2.5, 7.0]).unwrap();
        let w: Tensor<f64> = t.cast();
        assert_eq!(w.data()[0], 0.1_f32 as f64);
        assert_eq!(w.data()[1], -2.5);
    }
}
