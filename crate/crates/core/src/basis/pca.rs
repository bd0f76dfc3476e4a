use nalgebra::{DMatrix, DVector};

use super::BasisComponent;
use crate::dictionary::EmbeddingSet;
use crate::error::{Error, Result};

/// Round through `f32`, the storage precision of a basis file.
pub(crate) fn to_storage(v: f64) -> f64 {
    f64::from(v as f32)
}

pub fn compute_mean(set: &EmbeddingSet) -> Result<DVector<f64>> {
    if set.is_empty() {
        return Err(Error::TooFewRows {
            role: set.role.to_string(),
            rows: 0,
        });
    }
    Ok(set.rows.row_mean().transpose())
}

/// Principal directions of `set` by SVD of the mean-centred rows.
///
/// Directions are the top-`p` right singular vectors, each flipped so that its
/// largest-magnitude entry is positive. Explained variance is `s^2 / (m - 1)`.
/// All outputs, including the mean used for centring, are rounded to `f32`
/// so that a saved basis reloads bit-exactly.
pub fn compute_pca(set: &EmbeddingSet, p: usize) -> Result<BasisComponent> {
    let (m, d) = set.rows.shape();
    if m < 2 {
        return Err(Error::TooFewRows {
            role: set.role.to_string(),
            rows: m,
        });
    }
    if p == 0 {
        return Err(Error::InvalidArgument("p must be positive".into()));
    }
    let limit = (m - 1).min(d);
    if p > limit {
        return Err(Error::Rank {
            requested: p,
            achievable: limit,
        });
    }

    let mean = compute_mean(set)?.map(to_storage);
    let mut centered = set.rows.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }

    let svd = centered.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::InvalidArgument("SVD did not produce right singular vectors".into()))?;
    let sigma = svd.singular_values;

    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));

    let sigma_max = sigma[order[0]];
    let tol = sigma_max * (m.max(d) as f64) * f64::EPSILON;
    let rank = sigma.iter().filter(|&&s| s > tol).count();
    if p > rank {
        return Err(Error::Rank {
            requested: p,
            achievable: rank,
        });
    }

    let mut directions = DMatrix::zeros(p, d);
    for (out_row, &idx) in order.iter().take(p).enumerate() {
        let v = v_t.row(idx);
        let pivot = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, &x)| {
                if x.abs() > best.1.abs() {
                    (i, x)
                } else {
                    best
                }
            })
            .0;
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for c in 0..d {
            directions[(out_row, c)] = to_storage(sign * v[c]);
        }
    }
    let explained_variance = DVector::from_iterator(
        p,
        order
            .iter()
            .take(p)
            .map(|&i| to_storage(sigma[i] * sigma[i] / (m - 1) as f64)),
    );

    BasisComponent::new(mean, directions, explained_variance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::TokenId;
    use crate::dictionary::SetRole;

    fn set(rows: &[&[f64]]) -> EmbeddingSet {
        let vs: Vec<DVector<f64>> = rows.iter().map(|r| DVector::from_row_slice(r)).collect();
        EmbeddingSet::from_rows(
            SetRole::First,
            vs.iter().enumerate().map(|(i, v)| (TokenId(i as u64), v)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn mean_of_single_row_and_arithmetic() {
        let s = set(&[&[1.0, 0.0], &[-1.0, 0.0], &[3.0, 0.0]]);
        assert_eq!(compute_mean(&s).unwrap().as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn axis_aligned_variance() {
        let s = set(&[&[1.0, 0.0], &[-1.0, 0.0], &[3.0, 0.0]]);
        let c = compute_pca(&s, 1).unwrap();
        assert_eq!(c.mean.as_slice(), &[1.0, 0.0]);
        assert!((c.directions[(0, 0)] - 1.0).abs() < 1e-7);
        assert!(c.directions[(0, 1)].abs() < 1e-7);
        // deviations -0, -2, 2 -> variance 8 / 2
        assert!((c.explained_variance[0] - 4.0).abs() < 1e-6);
        // the second axis carries nothing, so p = 2 exceeds the rank
        assert!(matches!(
            compute_pca(&s, 2),
            Err(Error::Rank { requested: 2, achievable: 1 })
        ));
    }

    #[test]
    fn sign_fix_makes_largest_entry_positive() {
        let s = set(&[&[0.0, 2.0, 0.1], &[0.0, -2.0, 0.3], &[0.5, 0.0, -0.2], &[-0.4, 0.1, 0.0]]);
        let c = compute_pca(&s, 2).unwrap();
        for r in 0..2 {
            let row = c.directions.row(r);
            let max = row.iter().cloned().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            assert!(max > 0.0);
        }
    }

    #[test]
    fn p_out_of_range() {
        let s = set(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        assert!(matches!(compute_pca(&s, 3), Err(Error::Rank { achievable: 2, .. })));
        assert!(matches!(compute_pca(&s, 0), Err(Error::InvalidArgument(_))));
        assert!(compute_pca(&s, 2).is_ok());
    }
}
