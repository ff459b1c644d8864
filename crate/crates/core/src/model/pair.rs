use super::MatrixKind;
use crate::error::{Error, Result};

/// Interaction matrix between fields `k < l`, shaped `dims[k] x dims[l]`.
///
/// Only one matrix is stored per unordered pair; the `l -> k` direction
/// applies the transpose.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldPairMatrix {
    pub pair: (usize, usize),
    kind: MatrixKind,
    rows: usize,
    cols: usize,
    payload: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// `v x M`, from the first field's space to the second's.
    Forward,
    /// `v x M^T`
    Backward,
}

impl FieldPairMatrix {
    pub fn identity(dim: usize) -> Self {
        Self::from_raw((0, 1), MatrixKind::Identity, dim, dim, Vec::new())
    }

    pub fn scalar(dim: usize, r: f64) -> Self {
        Self::from_raw((0, 1), MatrixKind::Scalar, dim, dim, vec![r])
    }

    pub fn diagonal(d: Vec<f64>) -> Self {
        let dim = d.len();
        Self::from_raw((0, 1), MatrixKind::Diagonal, dim, dim, d)
    }

    /// Row-major `rows x cols` matrix.
    pub fn full(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self::from_raw((0, 1), MatrixKind::Full, rows, cols, data))
    }

    pub(crate) fn from_raw(pair: (usize, usize), kind: MatrixKind, rows: usize, cols: usize, payload: Vec<f64>) -> Self {
        Self {
            pair,
            kind,
            rows,
            cols,
            payload,
        }
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    /// `(rows, cols)`: the dimensions of the first and second field.
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn payload(&self) -> &[f64] {
        &self.payload
    }

    /// Swaps the roles of the two fields.
    pub fn transposed(&self) -> Self {
        let payload = match self.kind {
            MatrixKind::Full => {
                let mut t = vec![0.0; self.payload.len()];
                for a in 0..self.rows {
                    for b in 0..self.cols {
                        t[b * self.rows + a] = self.payload[a * self.cols + b];
                    }
                }
                t
            }
            _ => self.payload.clone(),
        };
        Self::from_raw((self.pair.1, self.pair.0), self.kind, self.cols, self.rows, payload)
    }

    /// Dense row-major form.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.rows * self.cols];
        match self.kind {
            MatrixKind::Full => m.copy_from_slice(&self.payload),
            MatrixKind::Identity => (0..self.rows).for_each(|a| m[a * self.cols + a] = 1.0),
            MatrixKind::Scalar => (0..self.rows).for_each(|a| m[a * self.cols + a] = self.payload[0]),
            MatrixKind::Diagonal => (0..self.rows).for_each(|a| m[a * self.cols + a] = self.payload[a]),
        }
        m
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maps `v` through the matrix: `v x M` forward, `v x M^T` backward.
pub fn transform(v: &[f64], pm: &FieldPairMatrix, dir: Direction) -> Result<Vec<f64>> {
    let (src, dst) = match dir {
        Direction::Forward => (pm.rows, pm.cols),
        Direction::Backward => (pm.cols, pm.rows),
    };
    if v.len() != src {
        return Err(Error::DimensionMismatch {
            expected: src,
            found: v.len(),
        });
    }
    Ok(match pm.kind {
        MatrixKind::Identity => v.to_vec(),
        MatrixKind::Scalar => v.iter().map(|x| x * pm.payload[0]).collect(),
        MatrixKind::Diagonal => v.iter().zip(&pm.payload).map(|(x, d)| x * d).collect(),
        MatrixKind::Full => {
            let mut out = vec![0.0; dst];
            match dir {
                Direction::Forward => {
                    for (a, &x) in v.iter().enumerate() {
                        let row = &pm.payload[a * pm.cols..(a + 1) * pm.cols];
                        out.iter_mut().zip(row).for_each(|(o, m)| *o += x * m);
                    }
                }
                Direction::Backward => {
                    for (o, row) in out.iter_mut().zip(pm.payload.chunks_exact(pm.cols)) {
                        *o = dot(row, v);
                    }
                }
            }
            out
        }
    })
}

/// `<v_i x M, v_j>` with `v_i` from the matrix's first field.
pub fn pair_score(vi: &[f64], vj: &[f64], pm: &FieldPairMatrix) -> Result<f64> {
    if vi.len() != pm.rows {
        return Err(Error::DimensionMismatch {
            expected: pm.rows,
            found: vi.len(),
        });
    }
    if vj.len() != pm.cols {
        return Err(Error::DimensionMismatch {
            expected: pm.cols,
            found: vj.len(),
        });
    }
    Ok(pair_forward(pm.kind, pm.cols, &pm.payload, vi, vj))
}

/// Unchecked interaction kernel; `vk` has the matrix's row dimension, `vl`
/// its column dimension `cols`.
#[inline]
pub(crate) fn pair_forward(kind: MatrixKind, cols: usize, payload: &[f64], vk: &[f64], vl: &[f64]) -> f64 {
    match kind {
        MatrixKind::Identity => dot(vk, vl),
        MatrixKind::Scalar => payload[0] * dot(vk, vl),
        MatrixKind::Diagonal => vk.iter().zip(vl).zip(payload).map(|((a, b), d)| a * b * d).sum(),
        MatrixKind::Full => vk
            .iter()
            .zip(payload.chunks_exact(cols))
            .map(|(x, row)| x * dot(row, vl))
            .sum(),
    }
}

/// Adds `coef * d(pair_forward)/d(...)` into the three gradient buffers.
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn pair_backward(
    kind: MatrixKind,
    cols: usize,
    payload: &[f64],
    vk: &[f64],
    vl: &[f64],
    coef: f64,
    gk: &mut [f64],
    gl: &mut [f64],
    gpayload: &mut [f64],
) {
    match kind {
        MatrixKind::Identity => {
            gk.iter_mut().zip(vl).for_each(|(g, x)| *g += coef * x);
            gl.iter_mut().zip(vk).for_each(|(g, x)| *g += coef * x);
        }
        MatrixKind::Scalar => {
            let r = payload[0];
            gk.iter_mut().zip(vl).for_each(|(g, x)| *g += coef * r * x);
            gl.iter_mut().zip(vk).for_each(|(g, x)| *g += coef * r * x);
            gpayload[0] += coef * dot(vk, vl);
        }
        MatrixKind::Diagonal => {
            for a in 0..vk.len() {
                gk[a] += coef * payload[a] * vl[a];
                gl[a] += coef * payload[a] * vk[a];
                gpayload[a] += coef * vk[a] * vl[a];
            }
        }
        MatrixKind::Full => {
            for (a, (row, grow)) in payload
                .chunks_exact(cols)
                .zip(gpayload.chunks_exact_mut(cols))
                .enumerate()
            {
                let x = vk[a];
                gk[a] += coef * dot(row, vl);
                let cx = coef * x;
                for b in 0..cols {
                    gl[b] += cx * row[b];
                    grow[b] += cx * vl[b];
                }
            }
        }
    }
}
