//! Factorial-normalized derivative series.
//!
//! A series of order `K` over base dimension `m` stores blocks `b_0..b_K`
//! with `b_i = a^(i) / i!`. Raw derivatives only appear at conversion
//! boundaries.

use nalgebra::{DVector, DVectorView};

use crate::error::{Error, Result};
use crate::spatial::Vec6;

#[derive(Clone, Debug, PartialEq)]
pub struct DerivSeries {
    dim: usize,
    data: DVector<f64>,
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

impl DerivSeries {
    pub fn zeros(dim: usize, order: usize) -> Self {
        Self {
            dim,
            data: DVector::zeros(dim * (order + 1)),
        }
    }

    /// Wraps a stacked vector; its length must be a positive multiple of `dim`.
    pub fn from_vector(dim: usize, data: DVector<f64>) -> Result<Self> {
        if dim == 0 || data.len() == 0 || data.len() % dim != 0 {
            return Err(Error::Dimension(format!(
                "stacked length {} is not a positive multiple of block size {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_blocks(blocks: &[DVector<f64>]) -> Result<Self> {
        let dim = blocks.first().map(|b| b.len()).unwrap_or(0);
        if dim == 0 || blocks.iter().any(|b| b.len() != dim) {
            return Err(Error::Dimension("series blocks must share a nonzero dimension".into()));
        }
        let mut data = DVector::zeros(dim * blocks.len());
        for (i, b) in blocks.iter().enumerate() {
            data.rows_mut(i * dim, dim).copy_from(b);
        }
        Ok(Self { dim, data })
    }

    pub fn from_blocks6(blocks: &[Vec6]) -> Self {
        let mut s = Self::zeros(6, blocks.len().saturating_sub(1));
        for (i, b) in blocks.iter().enumerate() {
            s.set_block(i, &DVector::from_column_slice(b.as_slice()));
        }
        s
    }

    /// Builds the normalized series from raw derivatives `a, a', a'', ...`.
    pub fn from_raw_derivatives(raw: &[DVector<f64>]) -> Result<Self> {
        let scaled: Vec<DVector<f64>> = raw
            .iter()
            .enumerate()
            .map(|(i, b)| b / factorial(i))
            .collect();
        Self::from_blocks(&scaled)
    }

    pub fn to_raw_derivatives(&self) -> Vec<DVector<f64>> {
        (0..=self.order())
            .map(|i| self.block(i).into_owned() * factorial(i))
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.data.len() / self.dim - 1
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.len() == 0
    }

    pub fn block(&self, i: usize) -> DVectorView<'_, f64> {
        self.data.rows(i * self.dim, self.dim)
    }

    /// Block `i` as a spatial 6-vector. Panics unless `dim == 6`.
    pub fn block6(&self, i: usize) -> Vec6 {
        assert_eq!(self.dim, 6, "block6 on a series of base dimension {}", self.dim);
        Vec6::from_column_slice(&self.data.as_slice()[6 * i..6 * i + 6])
    }

    pub fn set_block(&mut self, i: usize, v: &DVector<f64>) {
        self.data.rows_mut(i * self.dim, self.dim).copy_from(v);
    }

    pub fn set_block6(&mut self, i: usize, v: &Vec6) {
        assert_eq!(self.dim, 6);
        self.data.as_mut_slice()[6 * i..6 * i + 6].copy_from_slice(v.as_slice());
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.data
    }

    /// Keeps blocks `0..=order`.
    pub fn truncate(&self, order: usize) -> Result<Self> {
        if order > self.order() {
            return Err(Error::Order(format!(
                "cannot truncate order {} series to order {order}",
                self.order()
            )));
        }
        Ok(Self {
            dim: self.dim,
            data: self.data.rows(0, self.dim * (order + 1)).into_owned(),
        })
    }

    /// Pads with zero blocks up to `order`; never shortens.
    pub fn zero_extend(&self, order: usize) -> Self {
        let mut out = Self::zeros(self.dim, order.max(self.order()));
        out.data.rows_mut(0, self.data.len()).copy_from(&self.data);
        out
    }

    /// Series of the time derivative, one order lower: block `i` becomes `(i+1) b_{i+1}`.
    pub fn time_derivative(&self) -> Result<Self> {
        let k = self.order();
        if k == 0 {
            return Err(Error::Order("order-0 series has no derivative blocks".into()));
        }
        let mut out = Self::zeros(self.dim, k - 1);
        for i in 0..k {
            out.set_block(i, &(self.block(i + 1).into_owned() * (i + 1) as f64));
        }
        Ok(out)
    }
}
