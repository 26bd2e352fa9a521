//! Dense row-major n-dimensional arrays.

use crate::scalar::Scalar;

/// Shape disagreement between operands.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{op}: {detail}")]
pub struct ShapeError {
    pub op: &'static str,
    pub detail: String,
}

impl ShapeError {
    pub fn new(op: &'static str, detail: impl Into<String>) -> Self {
        Self { op, detail: detail.into() }
    }
}

/// Dense tensor with an explicit shape. `shape.iter().product() == data.len()`
/// always holds.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self, ShapeError> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(ShapeError::new(
                "Tensor::new",
                format!("shape {:?} needs {} elements, got {}", shape, n, data.len()),
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        let n = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![value; n] }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> T) -> Self {
        let n = shape.iter().product();
        Self { shape: shape.to_vec(), data: (0..n).map(&mut f).collect() }
    }

    pub fn scalar(value: T) -> Self {
        Self { shape: vec![1], data: vec![value] }
    }

    pub fn vector(data: Vec<T>) -> Self {
        Self { shape: vec![data.len()], data }
    }

    pub fn zeros_like(other: &Self) -> Self {
        Self::zeros(&other.shape)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dim(&self, i: usize) -> usize {
        self.shape[i]
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
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

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self, ShapeError> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(ShapeError::new(
                "reshape",
                format!("cannot view {:?} as {:?}", self.shape, shape),
            ));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// View as `rows × cols` where `rows = shape[0]`.
    pub fn as_matrix(self) -> Self {
        let rows = self.shape.first().copied().unwrap_or(1);
        let cols = if rows == 0 { 0 } else { self.data.len() / rows };
        Self { shape: vec![rows, cols], data: self.data }
    }

    pub fn flatten(self) -> Self {
        let n = self.data.len();
        Self { shape: vec![n], data: self.data }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self, ShapeError> {
        self.check_same(other, "zip_map")?;
        Ok(Self {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self, ShapeError> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: T, other: &Self) -> Result<(), ShapeError> {
        self.check_same(other, "axpy")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn dot(&self, other: &Self) -> Result<T, ShapeError> {
        self.check_same(other, "dot")?;
        Ok(self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).sum())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| U::of(v.f64())).collect() }
    }

    /// Row `i` of a matrix.
    pub fn row(&self, i: usize) -> &[T] {
        let cols = self.data.len() / self.shape[0];
        &self.data[i * cols..(i + 1) * cols]
    }

    /// Concatenate along the first axis. All trailing dimensions must agree.
    pub fn concat0(parts: &[&Self]) -> Result<Self, ShapeError> {
        let first = parts.first().ok_or_else(|| ShapeError::new("concat0", "no inputs"))?;
        let tail = &first.shape[1..];
        let mut rows = 0;
        let mut data = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
        for p in parts {
            if p.shape.len() != first.shape.len() || &p.shape[1..] != tail {
                return Err(ShapeError::new(
                    "concat0",
                    format!("trailing dims {:?} vs {:?}", &p.shape[1..], tail),
                ));
            }
            rows += p.shape[0];
            data.extend_from_slice(&p.data);
        }
        let mut shape = vec![rows];
        shape.extend_from_slice(tail);
        Ok(Self { shape, data })
    }

    /// Stack equally shaped tensors into a new leading axis.
    pub fn stack(parts: &[&Self]) -> Result<Self, ShapeError> {
        let first = parts.first().ok_or_else(|| ShapeError::new("stack", "no inputs"))?;
        let mut data = Vec::with_capacity(first.len() * parts.len());
        for p in parts {
            first.check_same(p, "stack")?;
            data.extend_from_slice(&p.data);
        }
        let mut shape = vec![parts.len()];
        shape.extend_from_slice(&first.shape);
        Ok(Self { shape, data })
    }

    pub fn check_same(&self, other: &Self, op: &'static str) -> Result<(), ShapeError> {
        if self.shape != other.shape {
            return Err(ShapeError::new(op, format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_wrong_length() {
        assert!(Tensor::<f64>::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::<f64>::new(vec![2, 3], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn concat_and_stack_shapes() {
        let a = Tensor::<f32>::zeros(&[2, 3]);
        let b = Tensor::<f32>::zeros(&[1, 3]);
        assert_eq!(Tensor::concat0(&[&a, &b]).unwrap().shape(), &[3, 3]);
        assert!(Tensor::stack(&[&a, &b]).is_err());
        assert_eq!(Tensor::stack(&[&a, &a]).unwrap().shape(), &[2, 2, 3]);
    }

    #[test]
    fn reshape_checks_count() {
        let t = Tensor::<f64>::zeros(&[4, 2]);
        assert!(t.clone().reshape(&[3, 3]).is_err());
        assert_eq!(t.reshape(&[2, 2, 2]).unwrap().ndim(), 3);
    }
}
