use super::{dot, pair_backward, pair_forward, FmModel, LinearMode, MatrixKind, Params, Variant};
use crate::error::{Error, Result};
use crate::ingest::{Dataset, EncodedInstance};

/// Logits are clamped to this magnitude before the sigmoid.
pub const LOGIT_CLAMP: f64 = 35.0;

pub fn sigmoid(x: f64) -> f64 {
    let x = x.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
    1.0 / (1.0 + (-x).exp())
}

pub fn predict_proba(model: &FmModel, inst: &EncodedInstance) -> Result<f64> {
    Ok(sigmoid(model.score(&inst.active)?))
}

impl FmModel {
    pub fn check_instance(&self, active: &[u32]) -> Result<()> {
        let counts = self.arch.feature_counts();
        if active.len() != counts.len() {
            return Err(Error::SchemaMismatch(format!(
                "instance has {} fields, model expects {}",
                active.len(),
                counts.len()
            )));
        }
        for (f, (&a, &c)) in active.iter().zip(counts).enumerate() {
            if a as usize >= c {
                return Err(Error::SchemaMismatch(format!(
                    "feature {a} out of range for field {f} ({c} features)"
                )));
            }
        }
        Ok(())
    }

    /// Logit for one instance given as one active local index per field.
    pub fn score(&self, active: &[u32]) -> Result<f64> {
        self.check_instance(active)?;
        Ok(self.logit(active))
    }

    /// Logits for every instance of `data`.
    pub fn score_all(&self, data: &Dataset) -> Result<Vec<f64>> {
        data.validate(self.arch.feature_counts())?;
        Ok(data.iter().map(|(_, a)| self.logit(a)).collect())
    }

    /// Unchecked logit; `active` must be valid for this model.
    pub(crate) fn logit(&self, active: &[u32]) -> f64 {
        let arch = &self.arch;
        let p = &self.params;
        let mut s = p.bias;
        for (f, &a) in active.iter().enumerate() {
            let a = a as usize;
            s += match arch.linear_mode() {
                LinearMode::PerFeature => p.linear[f][a],
                LinearMode::FieldShared => dot(self.embedding(f, a), &p.linear[f]),
            };
        }
        match (arch.variant(), arch.matrix_kind()) {
            (Variant::Lr, _) => {}
            (Variant::Ffm, _) => {
                let k = arch.dims()[0];
                for (fk, fl) in arch.pairs() {
                    let vk = self.embedding(fk, active[fk] as usize);
                    let vl = self.embedding(fl, active[fl] as usize);
                    // fk's block facing fl, fl's block facing fk
                    let bk = (fl - 1) * k;
                    let bl = fk * k;
                    s += dot(&vk[bk..bk + k], &vl[bl..bl + k]);
                }
            }
            (_, Some(MatrixKind::Identity)) => {
                // sum over pairs of <v_k, v_l> = (|sum v|^2 - sum |v|^2) / 2
                let k = arch.dims()[0];
                let mut total = vec![0.0; k];
                let mut squares = 0.0;
                for (f, &a) in active.iter().enumerate() {
                    let v = self.embedding(f, a as usize);
                    total.iter_mut().zip(v).for_each(|(t, x)| *t += x);
                    squares += dot(v, v);
                }
                s += 0.5 * (dot(&total, &total) - squares);
            }
            (_, Some(kind)) => {
                let dims = arch.dims();
                for (pi, (fk, fl)) in arch.pairs().enumerate() {
                    let vk = self.embedding(fk, active[fk] as usize);
                    let vl = self.embedding(fl, active[fl] as usize);
                    s += pair_forward(kind, dims[fl], &p.matrices[pi], vk, vl);
                }
            }
            (_, None) => unreachable!("shared-embedding variants always have a matrix kind"),
        }
        s
    }

    /// Adds `coef * dLogit/dParams` into `grads`.
    pub(crate) fn accumulate_logit_gradient(&self, active: &[u32], coef: f64, grads: &mut Params) {
        let arch = &self.arch;
        let p = &self.params;
        grads.bias += coef;
        for (f, &a) in active.iter().enumerate() {
            let a = a as usize;
            match arch.linear_mode() {
                LinearMode::PerFeature => grads.linear[f][a] += coef,
                LinearMode::FieldShared => {
                    let w = arch.row_width(f);
                    let v = self.embedding(f, a);
                    grads.linear[f].iter_mut().zip(v).for_each(|(g, x)| *g += coef * x);
                    let gv = &mut grads.embeddings[f][a * w..(a + 1) * w];
                    gv.iter_mut().zip(&p.linear[f]).for_each(|(g, x)| *g += coef * x);
                }
            }
        }
        match (arch.variant(), arch.matrix_kind()) {
            (Variant::Lr, _) => {}
            (Variant::Ffm, _) => {
                let k = arch.dims()[0];
                let w = arch.row_width(0);
                for (fk, fl) in arch.pairs() {
                    let (ak, al) = (active[fk] as usize, active[fl] as usize);
                    let bk = ak * w + (fl - 1) * k;
                    let bl = al * w + fk * k;
                    let (ek, el) = (&p.embeddings[fk], &p.embeddings[fl]);
                    for j in 0..k {
                        let (xk, xl) = (ek[bk + j], el[bl + j]);
                        grads.embeddings[fk][bk + j] += coef * xl;
                        grads.embeddings[fl][bl + j] += coef * xk;
                    }
                }
            }
            (_, Some(MatrixKind::Identity)) => {
                // d/dv_f = sum of the other active embeddings
                let k = arch.dims()[0];
                let mut total = vec![0.0; k];
                for (f, &a) in active.iter().enumerate() {
                    total.iter_mut().zip(self.embedding(f, a as usize)).for_each(|(t, x)| *t += x);
                }
                for (f, &a) in active.iter().enumerate() {
                    let a = a as usize;
                    let v = &p.embeddings[f][a * k..(a + 1) * k];
                    let g = &mut grads.embeddings[f][a * k..(a + 1) * k];
                    for j in 0..k {
                        g[j] += coef * (total[j] - v[j]);
                    }
                }
            }
            (_, Some(kind)) => {
                let dims = arch.dims();
                for (pi, (fk, fl)) in arch.pairs().enumerate() {
                    let (ak, al) = (active[fk] as usize, active[fl] as usize);
                    let (dk, dl) = (dims[fk], dims[fl]);
                    let vk = &p.embeddings[fk][ak * dk..(ak + 1) * dk];
                    let vl = &p.embeddings[fl][al * dl..(al + 1) * dl];
                    // fk < fl, so the two tables are distinct borrows
                    let (lo, hi) = grads.embeddings.split_at_mut(fl);
                    let gk = &mut lo[fk][ak * dk..(ak + 1) * dk];
                    let gl = &mut hi[0][al * dl..(al + 1) * dl];
                    pair_backward(kind, dl, &p.matrices[pi], vk, vl, coef, gk, gl, &mut grads.matrices[pi]);
                }
            }
            (_, None) => unreachable!(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Architecture, FieldPairMatrix};

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(3f64.ln()) - 0.75).abs() < 1e-15);
        let hi = sigmoid(1e3);
        assert!(hi < 1.0 && hi.is_finite());
        assert!(sigmoid(-1e3) > 0.0);
    }

    #[test]
    fn zero_model_scores_zero() {
        for v in Variant::ALL {
            let arch = Architecture::uniform(v, vec![3, 4, 2], 2).unwrap();
            let m = FmModel::zeros(arch, 0);
            assert_eq!(m.score(&[2, 3, 1]).unwrap(), 0.0);
        }
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let arch = Architecture::uniform(Variant::Fm, vec![3, 4], 2).unwrap();
        let m = FmModel::zeros(arch, 0);
        assert!(m.score(&[0]).is_err());
        assert!(m.score(&[3, 0]).is_err());
    }

    #[test]
    fn full_variable_dims_score_by_hand() {
        let arch = Architecture::new(Variant::FmFm, LinearMode::PerFeature, vec![1, 1], vec![2, 3]).unwrap();
        let mut m = FmModel::zeros(arch, 0);
        m.params.embeddings[0] = vec![1.0, 2.0];
        m.params.embeddings[1] = vec![1.0, 1.0, 1.0];
        m.params.matrices[0] = vec![1.0, 0.0, 1.0, 0.0, 2.0, 0.0];
        m.params.bias = 0.5;
        // [1,2] x M = [1,4,1]; dot with ones = 6
        assert_eq!(m.score(&[0, 0]).unwrap(), 6.5);
        let pm = m.pair_matrix(0, 1).unwrap();
        assert_eq!(pm, FieldPairMatrix::full(2, 3, vec![1.0, 0.0, 1.0, 0.0, 2.0, 0.0]).unwrap());
    }

    #[test]
    fn ffm_uses_field_aware_blocks() {
        // three fields, K = 1, rows hold one entry per partner field
        let arch = Architecture::uniform(Variant::Ffm, vec![1, 1, 1], 1).unwrap();
        let mut m = FmModel::zeros(arch, 0);
        m.params.embeddings[0] = vec![2.0, 3.0]; // facing f1, f2
        m.params.embeddings[1] = vec![5.0, 7.0]; // facing f0, f2
        m.params.embeddings[2] = vec![11.0, 13.0]; // facing f0, f1
        let expected = 2.0 * 5.0 + 3.0 * 11.0 + 7.0 * 13.0;
        assert_eq!(m.score(&[0, 0, 0]).unwrap(), expected);
    }
}
