use crate::error::{Error, Result};

/// Dense row-major f64 array of up to four dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 4 {
            return Err(Error::ShapeMismatch(format!("{} dimensions; expected 1 to 4", shape.len())));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::ShapeMismatch(format!("shape {shape:?} needs {n} values, got {}", data.len())));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `(batch, channels, height, width)` of a 4D tensor.
    pub fn dims4(&self) -> Result<(usize, usize, usize, usize)> {
        match self.shape[..] {
            [n, c, h, w] => Ok((n, c, h, w)),
            _ => Err(Error::ShapeMismatch(format!("expected NCHW, got {:?}", self.shape))),
        }
    }

    /// `(batch, features)` of a 2D tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape[..] {
            [n, f] => Ok((n, f)),
            _ => Err(Error::ShapeMismatch(format!("expected (batch, features), got {:?}", self.shape))),
        }
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn ensure_finite(self, origin: &'static str) -> Result<Self> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(self)
        } else {
            Err(Error::NonFinite(origin))
        }
    }

    pub fn same_shape(&self, other: &Tensor) -> Result<()> {
        if self.shape == other.shape {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!("{:?} vs {:?}", self.shape, other.shape)))
        }
    }
}

/// Concatenates along dimension 1 (channels or features). All inputs must
/// agree on every other dimension.
pub fn concat(parts: &[&Tensor]) -> Result<Tensor> {
    let first = parts.first().ok_or_else(|| Error::ShapeMismatch("nothing to concatenate".into()))?;
    let rank = first.shape.len();
    if rank < 2 {
        return Err(Error::ShapeMismatch("concatenation needs a batch dimension".into()));
    }
    let n = first.shape[0];
    let inner: usize = first.shape[2..].iter().product();
    for p in parts {
        if p.shape.len() != rank || p.shape[0] != n || p.shape[2..] != first.shape[2..] {
            return Err(Error::ShapeMismatch(format!("cannot concatenate {:?} with {:?}", first.shape, p.shape)));
        }
    }
    let total: usize = parts.iter().map(|p| p.shape[1]).sum();
    let mut data = Vec::with_capacity(n * total * inner);
    for b in 0..n {
        for p in parts {
            let chunk = p.shape[1] * inner;
            data.extend_from_slice(&p.data[b * chunk..(b + 1) * chunk]);
        }
    }
    let mut shape = first.shape.clone();
    shape[1] = total;
    Tensor::new(shape, data)
}

/// Inverse of [`concat`]: splits dimension 1 into pieces of the given sizes.
pub fn split(t: &Tensor, sizes: &[usize]) -> Result<Vec<Tensor>> {
    if t.shape.len() < 2 || sizes.iter().sum::<usize>() != t.shape[1] {
        return Err(Error::ShapeMismatch(format!("cannot split {:?} into {sizes:?}", t.shape)));
    }
    let n = t.shape[0];
    let inner: usize = t.shape[2..].iter().product();
    let mut out: Vec<Vec<f64>> = sizes.iter().map(|s| Vec::with_capacity(n * s * inner)).collect();
    let row = t.shape[1] * inner;
    for b in 0..n {
        let mut offset = b * row;
        for (buf, s) in out.iter_mut().zip(sizes) {
            buf.extend_from_slice(&t.data[offset..offset + s * inner]);
            offset += s * inner;
        }
    }
    out.into_iter()
        .zip(sizes)
        .map(|(data, &s)| {
            let mut shape = t.shape.clone();
            shape[1] = s;
            Tensor::new(shape, data)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_is_checked() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![1, 1, 1, 1, 1], vec![0.0]).is_err());
        assert!(Tensor::zeros(&[2, 2]).ensure_finite("t").is_ok());
        let bad = Tensor::new(vec![1], vec![f64::NAN]).unwrap();
        assert!(matches!(bad.ensure_finite("t"), Err(Error::NonFinite("t"))));
    }

    #[test]
    fn concat_split_round_trip() {
        let a = Tensor::new(vec![2, 1, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::new(vec![2, 2, 2], (5..13).map(f64::from).collect()).unwrap();
        let c = concat(&[&a, &b]).unwrap();
        assert_eq!(c.shape(), &[2, 3, 2]);
        assert_eq!(&c.data()[..6], &[1.0, 2.0, 5.0, 6.0, 7.0, 8.0]);
        let parts = split(&c, &[1, 2]).unwrap();
        assert_eq!(parts, vec![a, b]);
    }
}
