use nalgebra::{DMatrix, DVector};

/// Non-negative least squares, min |A x - b| subject to x >= 0, by the
/// Lawson-Hanson active set method.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let norm1 = a.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max);
    let tol = 10.0 * f64::EPSILON * norm1 * a.nrows().max(n) as f64 * b.amax().max(1.0);
    let max_outer = 3 * n + 10;

    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let mut s = DVector::zeros(n);
        if cols.is_empty() {
            return s;
        }
        let sub = a.select_columns(&cols);
        let eps = 1e-14 * sub.amax();
        let z = sub.svd(true, true).solve(b, eps).expect("svd with u and v");
        for (k, &j) in cols.iter().enumerate() {
            s[j] = z[k];
        }
        s
    };

    for _ in 0..max_outer {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n).filter(|&j| !passive[j] && w[j] > tol).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;
        let mut s = solve_passive(&passive);
        for _ in 0..max_outer {
            if (0..n).filter(|&i| passive[i]).all(|i| s[i] > 0.0) {
                x = s;
                break;
            }
            let mut alpha = f64::INFINITY;
            let mut blocking = j;
            for i in (0..n).filter(|&i| passive[i] && s[i] <= 0.0) {
                let t = x[i] / (x[i] - s[i]);
                if t < alpha {
                    alpha = t;
                    blocking = i;
                }
            }
            x += (&s - &x) * alpha;
            // Rounding can leave the blocking variable a hair above zero.
            x[blocking] = 0.0;
            for i in 0..n {
                if passive[i] && x[i] <= 0.0 {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
            s = solve_passive(&passive);
        }
    }
    x
}
