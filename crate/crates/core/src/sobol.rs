//! Unscrambled Sobol sequence in up to 8 dimensions (Joe-Kuo direction numbers),
//! generated in Gray-code order with the all-zero first point skipped.

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 8;
const BITS: usize = 32;

/// (degree s, coefficient word a, initial direction integers m) for dimensions 2..=8.
const TABLE: [(u32, u32, &[u32]); MAX_DIM - 1] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
];

#[derive(Debug, Clone)]
pub struct SobolSequence {
    directions: Vec<[u32; BITS]>,
    state: Vec<u32>,
    index: u64,
}

impl SobolSequence {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::UnsupportedDimension(dim));
        }
        let mut directions = Vec::with_capacity(dim);
        let mut first = [0u32; BITS];
        for (i, v) in first.iter_mut().enumerate() {
            *v = 1 << (BITS - 1 - i);
        }
        directions.push(first);
        for &(s, a, m) in TABLE.iter().take(dim - 1) {
            let s = s as usize;
            let mut v = [0u32; BITS];
            for i in 0..BITS {
                if i < s {
                    v[i] = m[i] << (BITS - 1 - i);
                } else {
                    let mut x = v[i - s] ^ (v[i - s] >> s);
                    for k in 1..s {
                        if (a >> (s - 1 - k)) & 1 == 1 {
                            x ^= v[i - k];
                        }
                    }
                    v[i] = x;
                }
            }
            directions.push(v);
        }
        Ok(Self {
            directions,
            state: vec![0; dim],
            index: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    /// Next point of `[0, 1)^D`.
    pub fn next_point(&mut self) -> Vec<f64> {
        // Gray code: flip the direction number at the lowest zero bit of the index
        let c = (!self.index).trailing_zeros() as usize;
        assert!(c < BITS, "Sobol sequence exhausted");
        self.index += 1;
        for (x, v) in self.state.iter_mut().zip(&self.directions) {
            *x ^= v[c];
        }
        self.state
            .iter()
            .map(|x| *x as f64 / (1u64 << BITS) as f64)
            .collect()
    }

    /// The next `n` points.
    pub fn take(&mut self, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| self.next_point()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_prefix() {
        let mut s = SobolSequence::new(1).unwrap();
        let pts: Vec<f64> = s.take(7).into_iter().map(|p| p[0]).collect();
        assert_eq!(pts, vec![0.5, 0.75, 0.25, 0.375, 0.875, 0.625, 0.125]);
    }

    #[test]
    fn two_dimensional_prefix() {
        let mut s = SobolSequence::new(2).unwrap();
        let expected = [
            [0.5, 0.5],
            [0.75, 0.25],
            [0.25, 0.75],
            [0.375, 0.375],
            [0.875, 0.875],
            [0.625, 0.125],
            [0.125, 0.625],
        ];
        for e in expected {
            assert_eq!(s.next_point(), e.to_vec());
        }
    }

    #[test]
    fn third_dimension_prefix() {
        // reference values of the Joe-Kuo construction
        let mut s = SobolSequence::new(3).unwrap();
        let third: Vec<f64> = s.take(7).into_iter().map(|p| p[2]).collect();
        assert_eq!(third, vec![0.5, 0.25, 0.75, 0.625, 0.125, 0.875, 0.375]);
    }

    #[test]
    fn dyadic_prefixes_are_stratified() {
        // every block of 2^k points (plus the skipped origin) hits each 1/2^k interval once
        for dim in 1..=MAX_DIM {
            let mut s = SobolSequence::new(dim).unwrap();
            let mut pts = vec![vec![0.0; dim]];
            pts.extend(s.take(255));
            for d in 0..dim {
                let mut counts = [0usize; 256];
                for p in &pts {
                    counts[(p[d] * 256.0) as usize] += 1;
                }
                assert!(counts.iter().all(|c| *c == 1), "dimension {d} of {dim}");
            }
        }
    }

    #[test]
    fn rejects_unsupported_dimensions() {
        assert!(matches!(SobolSequence::new(0), Err(Error::UnsupportedDimension(0))));
        assert!(matches!(SobolSequence::new(9), Err(Error::UnsupportedDimension(9))));
    }
}
