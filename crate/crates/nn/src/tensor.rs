use crate::error::{Error, Result};

/// Dense `(batch, channels, rows, cols)` array. Lower-rank data uses trailing 1s.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: [usize; 4],
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: [usize; 4], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!("shape {shape:?} holds {n} values, got {}", data.len())));
        }
        let t = Self { shape, data };
        t.debug_check_finite();
        Ok(t)
    }

    pub fn zeros(shape: [usize; 4]) -> Self {
        Self { shape, data: vec![0.0; shape.iter().product()] }
    }

    /// `(batch, features)` matrix.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new([rows, cols, 1, 1], data)
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    /// Values per batch entry.
    pub fn sample_len(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let k = self.sample_len();
        &self.data[i * k..(i + 1) * k]
    }

    /// Batch entries at `indices`, in that order.
    pub fn gather(&self, indices: &[usize]) -> Tensor {
        let k = self.sample_len();
        let mut data = Vec::with_capacity(indices.len() * k);
        for &i in indices {
            data.extend_from_slice(self.sample(i));
        }
        Tensor { shape: [indices.len(), self.shape[1], self.shape[2], self.shape[3]], data }
    }

    pub fn reshape(self, shape: [usize; 4]) -> Result<Tensor> {
        Tensor::new(shape, self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn debug_check_finite(&self) {
        debug_assert!(self.is_finite(), "tensor of shape {:?} contains NaN or Inf", self.shape);
    }
}
