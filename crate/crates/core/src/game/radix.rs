use serde::{Deserialize, Serialize};

/// Mixed-radix indexing of profiles. Position 0 is the most significant digit,
/// so increasing indices enumerate profiles in lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Radix {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl Radix {
    pub fn new(sizes: Vec<usize>) -> Self {
        let mut strides = vec![1; sizes.len()];
        for i in (0..sizes.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * sizes[i + 1];
        }
        let len = sizes.iter().product();
        Radix { sizes, strides, len }
    }

    /// Number of profiles.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dims(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn encode(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.sizes.len());
        digits.iter().zip(&self.strides).map(|(d, s)| d * s).sum()
    }

    pub fn decode(&self, idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.sizes.len()];
        self.decode_into(idx, &mut out);
        out
    }

    pub fn decode_into(&self, idx: usize, out: &mut [usize]) {
        for (pos, o) in out.iter_mut().enumerate() {
            *o = (idx / self.strides[pos]) % self.sizes[pos];
        }
    }

    pub fn digit(&self, idx: usize, pos: usize) -> usize {
        (idx / self.strides[pos]) % self.sizes[pos]
    }

    /// The radix with position `pos` removed.
    pub fn without(&self, pos: usize) -> Radix {
        let mut sizes = self.sizes.clone();
        sizes.remove(pos);
        Radix::new(sizes)
    }

    /// Splits a profile index into (digit at `pos`, index of the remaining profile in `self.without(pos)`).
    pub fn split(&self, idx: usize, pos: usize) -> (usize, usize) {
        let stride = self.strides[pos];
        let size = self.sizes[pos];
        let high = idx / (stride * size);
        let digit = (idx / stride) % size;
        let low = idx % stride;
        (digit, high * stride + low)
    }

    /// Inverse of [`Radix::split`].
    pub fn join(&self, pos: usize, digit: usize, rest: usize) -> usize {
        let stride = self.strides[pos];
        let size = self.sizes[pos];
        let high = rest / stride;
        let low = rest % stride;
        high * stride * size + digit * stride + low
    }
}
