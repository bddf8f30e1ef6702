use crate::error::{invalid, Error, Result};

/// A row-major collection of points in a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    dim: usize,
    data: Vec<f64>,
}

impl Samples {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("sample dimension must be positive"));
        }
        if data.len() % dim != 0 {
            return Err(invalid(format!(
                "buffer of length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        assert!(dim > 0);
        Self { dim, data: Vec::with_capacity(dim * rows) }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptySampleSet("rows"))?;
        let dim = first.as_ref().len();
        let mut data = Vec::with_capacity(dim * rows.len());
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Samples::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn push(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.dim);
        self.data.extend_from_slice(row);
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.data
    }

    /// Rows reordered by `order` (which must index rows of `self`).
    pub fn select(&self, order: &[usize]) -> Samples {
        let mut out = Samples::with_capacity(self.dim, order.len());
        for &i in order {
            out.push(self.row(i));
        }
        out
    }
}

/// Joint samples `(a_i, b_i)` stored as concatenated rows `[a_i | b_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSamples {
    a_dim: usize,
    joint: Samples,
}

impl PairedSamples {
    pub fn new(a_dim: usize, joint: Samples) -> Result<Self> {
        if a_dim == 0 || a_dim >= joint.dim() {
            return Err(invalid(format!(
                "a-part dimension {a_dim} must lie in 1..{}",
                joint.dim()
            )));
        }
        Ok(Self { a_dim, joint })
    }

    pub fn from_parts(a: &Samples, b: &Samples) -> Result<Self> {
        if a.len() != b.len() {
            return Err(invalid(format!("{} a-samples but {} b-samples", a.len(), b.len())));
        }
        let mut joint = Samples::with_capacity(a.dim() + b.dim(), a.len());
        let mut row = vec![0.0; a.dim() + b.dim()];
        for (ra, rb) in a.rows().zip(b.rows()) {
            row[..a.dim()].copy_from_slice(ra);
            row[a.dim()..].copy_from_slice(rb);
            joint.push(&row);
        }
        PairedSamples::new(a.dim(), joint)
    }

    pub fn a_dim(&self) -> usize {
        self.a_dim
    }

    pub fn b_dim(&self) -> usize {
        self.joint.dim() - self.a_dim
    }

    pub fn dim(&self) -> usize {
        self.joint.dim()
    }

    pub fn len(&self) -> usize {
        self.joint.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joint.is_empty()
    }

    pub fn joint(&self) -> &Samples {
        &self.joint
    }

    pub fn a(&self, i: usize) -> &[f64] {
        &self.joint.row(i)[..self.a_dim]
    }

    pub fn b(&self, i: usize) -> &[f64] {
        &self.joint.row(i)[self.a_dim..]
    }

    /// Write `(a_i, b_j)` into `out`.
    pub fn write_mixed(&self, i: usize, j: usize, out: &mut [f64]) {
        out[..self.a_dim].copy_from_slice(self.a(i));
        out[self.a_dim..].copy_from_slice(self.b(j));
    }
}
