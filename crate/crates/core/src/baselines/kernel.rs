use ndarray::{Array2, ArrayView1, ArrayView2};

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// `K[i, j] = exp(−‖aᵢ − bⱼ‖² / (2σ²))`.
pub fn gaussian_kernel_matrix(a: ArrayView2<f64>, b: ArrayView2<f64>, bandwidth: f64) -> Array2<f64> {
    let gamma = 1.0 / (2.0 * bandwidth * bandwidth);
    Array2::from_shape_fn((a.nrows(), b.nrows()), |(i, j)| {
        (-gamma * sq_dist(a.row(i), b.row(j))).exp()
    })
}

/// Median of pairwise distances over the stacked rows of `a` and `b`,
/// computed on at most the first 500 rows of each. Falls back to 1 when the
/// median is zero.
pub fn median_bandwidth(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    let rows: Vec<ArrayView1<f64>> = a
        .rows()
        .into_iter()
        .take(500)
        .chain(b.rows().into_iter().take(500))
        .collect();
    let mut d = Vec::with_capacity(rows.len() * rows.len().saturating_sub(1) / 2);
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            d.push(sq_dist(rows[i], rows[j]).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    let mid = d.len() / 2;
    let (_, median, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    if *median > 0.0 {
        *median
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn kernel_values() {
        let a = array![[0.0], [1.0]];
        let k = gaussian_kernel_matrix(a.view(), a.view(), 1.0);
        assert_eq!(k[[0, 0]], 1.0);
        assert!((k[[0, 1]] - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(k[[0, 1]], k[[1, 0]]);
    }

    #[test]
    fn median_of_three_points() {
        let a = array![[0.0], [1.0]];
        let b = array![[3.0]];
        // distances 1, 3, 2
        assert_eq!(median_bandwidth(a.view(), b.view()), 2.0);
        let same = array![[1.0], [1.0]];
        assert_eq!(median_bandwidth(same.view(), same.view()), 1.0);
    }
}
