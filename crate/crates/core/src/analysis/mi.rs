use std::collections::HashMap;

use crate::ingest::Dataset;

/// Plug-in mutual information (bits) between the joint value of fields `k`
/// and `l` and the label.
pub fn field_pair_mi(data: &Dataset, k: usize, l: usize) -> f64 {
    let mut joint: HashMap<(u32, u32), [u64; 2]> = HashMap::new();
    let mut label = [0u64; 2];
    for (y, active) in data.iter() {
        let c = (y > 0) as usize;
        joint.entry((active[k], active[l])).or_insert([0, 0])[c] += 1;
        label[c] += 1;
    }
    let total = data.len() as f64;
    if total == 0.0 {
        return 0.0;
    }
    let py = [label[0] as f64 / total, label[1] as f64 / total];
    let mut mi = 0.0;
    for counts in joint.values() {
        let px = (counts[0] + counts[1]) as f64 / total;
        for c in 0..2 {
            if counts[c] > 0 {
                let pxy = counts[c] as f64 / total;
                mi += pxy * (pxy / (px * py[c])).log2();
            }
        }
    }
    // rounding can leave tiny negatives for independent pairs
    mi.max(0.0)
}

/// Symmetric `n x n` matrix of [`field_pair_mi`]; the diagonal is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct MiMatrix {
    pub values: Vec<Vec<f64>>,
}

impl MiMatrix {
    pub fn to_csv(&self) -> String {
        self.values
            .iter()
            .map(|row| row.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
            .join("\n")
            + "\n"
    }

    /// Upper-triangle entries in pair order.
    pub fn upper(&self) -> Vec<f64> {
        let n = self.values.len();
        (0..n)
            .flat_map(|k| (k + 1..n).map(move |l| (k, l)))
            .map(|(k, l)| self.values[k][l])
            .collect()
    }
}

pub fn mi_matrix(data: &Dataset) -> MiMatrix {
    let n = data.field_count();
    let upper: Vec<Vec<f64>> = (0..n)
        .map(|k| (k + 1..n).map(|l| field_pair_mi(data, k, l)).collect())
        .collect();
    let values = (0..n)
        .map(|k| {
            (0..n)
                .map(|l| match k.cmp(&l) {
                    std::cmp::Ordering::Less => upper[k][l - k - 1],
                    std::cmp::Ordering::Greater => upper[l][k - l - 1],
                    std::cmp::Ordering::Equal => 0.0,
                })
                .collect()
        })
        .collect();
    MiMatrix { values }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determined_balanced_label_is_one_bit() {
        let mut ds = Dataset::new(2);
        for a in 0..2u32 {
            for b in 0..2u32 {
                for _ in 0..5 {
                    ds.push(if a ^ b == 1 { 1 } else { -1 }, &[a, b]).unwrap();
                }
            }
        }
        assert!((field_pair_mi(&ds, 0, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_label_is_zero() {
        let mut ds = Dataset::new(2);
        for a in 0..3u32 {
            for b in 0..2u32 {
                ds.push(1, &[a, b]).unwrap();
                ds.push(-1, &[a, b]).unwrap();
            }
        }
        assert!(field_pair_mi(&ds, 0, 1).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_table() {
        // joint (x, y) counts: x=(0,0): 3 pos 1 neg; x=(1,1): 1 pos 3 neg
        let mut ds = Dataset::new(2);
        for (x, pos, neg) in [(0u32, 3, 1), (1u32, 1, 3)] {
            (0..pos).for_each(|_| ds.push(1, &[x, x]).unwrap());
            (0..neg).for_each(|_| ds.push(-1, &[x, x]).unwrap());
        }
        // I = 2 * [3/8 log2((3/8)/(1/4)) + 1/8 log2((1/8)/(1/4))]
        let expected = 2.0 * (0.375 * (1.5f64).log2() + 0.125 * (0.5f64).log2());
        assert!((field_pair_mi(&ds, 0, 1) - expected).abs() < 1e-12);
        let m = mi_matrix(&ds);
        assert_eq!(m.values[0][1], m.values[1][0]);
        assert_eq!(m.values[0][0], 0.0);
    }
}
