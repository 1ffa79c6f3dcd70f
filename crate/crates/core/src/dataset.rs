use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::space::{squared_distance, Bounds, DUPLICATE_TOLERANCE};

/// The growing node set: a `D x m` input matrix and the matching `P x m` outputs.
///
/// Every node carries all `P` outputs. Inputs stay inside `bounds` and no two nodes
/// coincide in unit-cube coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    bounds: Bounds,
    output_dim: usize,
    // column-major, one node per column
    inputs: Vec<f64>,
    normalized: Vec<f64>,
    outputs: Vec<f64>,
}

impl Dataset {
    pub fn new(bounds: Bounds, output_dim: usize) -> Result<Self> {
        if output_dim == 0 {
            return Err(Error::invalid("output dimension must be at least 1"));
        }
        Ok(Self {
            bounds,
            output_dim,
            inputs: Vec::new(),
            normalized: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn from_nodes(bounds: Bounds, inputs: &[Vec<f64>], outputs: &[Vec<f64>]) -> Result<Self> {
        if inputs.len() != outputs.len() {
            return Err(Error::invalid(format!(
                "{} input nodes but {} output vectors",
                inputs.len(),
                outputs.len()
            )));
        }
        let p = outputs.first().map_or(1, Vec::len);
        let mut ds = Self::new(bounds, p)?;
        for (x, y) in inputs.iter().zip(outputs) {
            ds.push(x, y)?;
        }
        Ok(ds)
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn input_dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.input_dim()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        let d = self.input_dim();
        &self.inputs[i * d..(i + 1) * d]
    }

    pub fn normalized_input(&self, i: usize) -> &[f64] {
        let d = self.input_dim();
        &self.normalized[i * d..(i + 1) * d]
    }

    pub fn output(&self, i: usize) -> &[f64] {
        let p = self.output_dim;
        &self.outputs[i * p..(i + 1) * p]
    }

    /// Index of a node within the duplicate tolerance of `x`, if any.
    pub fn find_duplicate(&self, x: &[f64]) -> Option<usize> {
        let u = self.bounds.normalize(x);
        let tol = DUPLICATE_TOLERANCE * DUPLICATE_TOLERANCE;
        (0..self.len()).find(|&i| squared_distance(self.normalized_input(i), &u) < tol)
    }

    /// Appends a node. Rejects out-of-bounds inputs, duplicates, and output vectors
    /// missing any of the `P` outputs.
    pub fn push(&mut self, x: &[f64], y: &[f64]) -> Result<()> {
        self.bounds.check(x)?;
        if y.len() != self.output_dim {
            return Err(Error::invalid(format!(
                "node has {} outputs, dataset expects {}",
                y.len(),
                self.output_dim
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite output {y:?}")));
        }
        if self.find_duplicate(x).is_some() {
            return Err(Error::DuplicateNode { point: x.to_vec() });
        }
        self.inputs.extend_from_slice(x);
        self.normalized.extend(self.bounds.normalize(x));
        self.outputs.extend_from_slice(y);
        Ok(())
    }

    /// Inputs as a `D x m` matrix.
    pub fn input_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.input_dim(), self.len(), &self.inputs)
    }

    /// Unit-cube inputs as a `D x m` matrix.
    pub fn normalized_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.input_dim(), self.len(), &self.normalized)
    }

    /// Outputs as a `P x m` matrix.
    pub fn output_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.output_dim, self.len(), &self.outputs)
    }

    /// Row `p` of the output matrix.
    pub fn output_row(&self, p: usize) -> DVector<f64> {
        DVector::from_iterator(self.len(), (0..self.len()).map(|i| self.output(i)[p]))
    }

    /// Writes the node set as CSV with header `x1..xD,y1..yP`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.input_dim())
            .map(|d| format!("x{d}"))
            .chain((1..=self.output_dim).map(|p| format!("y{p}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.len() {
            let row: Vec<String> = self
                .input(i)
                .iter()
                .chain(self.output(i))
                .map(|v| format!("{v:?}"))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}
