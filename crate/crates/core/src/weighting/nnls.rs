//! Lawson–Hanson non-negative least squares on precomputed normal equations.

use nalgebra::{DMatrix, DVector};

/// `argmin_{x ≥ 0} ‖A·x − y‖₂` given `AᵀA` and `Aᵀy`.
pub(super) fn nnls(ata: &DMatrix<f64>, aty: &DVector<f64>) -> DVector<f64> {
    let k = aty.len();
    let mut x = DVector::zeros(k);
    let mut passive = vec![false; k];
    let scale = ata.diagonal().max().max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale * aty.amax().max(1.0);
    let max_outer = 3 * k + 10;

    for _ in 0..max_outer {
        // Gradient of ½‖Ax − y‖² negated: w = Aᵀy − AᵀA·x.
        let w = aty - ata * &x;
        let candidate = (0..k)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(j) = candidate else { break };
        passive[j] = true;

        loop {
            let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            let z_p = solve_passive(ata, aty, &idx);
            if z_p.iter().all(|&v| v > 0.0) {
                for (&i, &v) in idx.iter().zip(z_p.iter()) {
                    x[i] = v;
                }
                break;
            }
            // Step from x towards z until the first passive entry hits zero.
            let mut alpha = 1.0f64;
            for (&i, &zi) in idx.iter().zip(z_p.iter()) {
                if zi <= 0.0 {
                    alpha = alpha.min(x[i] / (x[i] - zi));
                }
            }
            for (&i, &zi) in idx.iter().zip(z_p.iter()) {
                x[i] += alpha * (zi - x[i]);
                if x[i] <= 1e-15 * scale {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            if idx.iter().all(|&i| !passive[i]) {
                break;
            }
        }
    }
    x
}

fn solve_passive(ata: &DMatrix<f64>, aty: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    let sub = ata.select_rows(idx).select_columns(idx);
    let rhs = DVector::from_iterator(idx.len(), idx.iter().map(|&i| aty[i]));
    if let Some(ch) = sub.clone().cholesky() {
        return ch.solve(&rhs);
    }
    // Collinear passive columns: fall back to a minimum-norm solve.
    sub.svd(true, true)
        .solve(&rhs, 1e-13)
        .unwrap_or_else(|_| DVector::zeros(idx.len()))
}
