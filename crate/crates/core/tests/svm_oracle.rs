//! Linear SVM against an independent dual solver (projected gradient on the
//! box-constrained QP), including data where every sample appears twice.

use chaoslearn::readout::{linear_svm_fit, SvmConfig};
use chaoslearn::rng::SeededRng;
use nalgebra::{DMatrix, DVector};

fn primal(w: &DVector<f64>, b: f64, x: &DMatrix<f64>, y: &[f64], c: f64) -> f64 {
    let hinge: f64 = (0..x.nrows())
        .map(|i| (1.0 - y[i] * (x.row(i).dot(&w.transpose()) + b)).max(0.0))
        .sum();
    0.5 * (w.norm_squared() + b * b) + c * hinge
}

/// min ½αᵀQα − Σα over 0 ≤ α ≤ C with Q = (y yᵀ) ∘ (X̃ X̃ᵀ), X̃ = [X 1].
fn qp_oracle(x: &DMatrix<f64>, y: &[f64], c: f64) -> (DVector<f64>, f64) {
    let n = x.nrows();
    let aug = DMatrix::from_fn(n, x.ncols() + 1, |i, j| if j < x.ncols() { x[(i, j)] } else { 1.0 });
    let g = &aug * aug.transpose();
    let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * g[(i, j)]);
    let step = 1.0 / q.symmetric_eigenvalues().max();
    let mut alpha = DVector::zeros(n);
    for _ in 0..200_000 {
        let grad = &q * &alpha - DVector::from_element(n, 1.0);
        alpha = (alpha - grad * step).map(|a: f64| a.clamp(0.0, c));
    }
    let wt = aug.transpose() * alpha.component_mul(&DVector::from_column_slice(y));
    let w = wt.rows(0, x.ncols()).into_owned();
    (w, wt[x.ncols()])
}

fn two_blobs(n: usize, overlap: f64, seed: u32) -> (DMatrix<f64>, Vec<usize>) {
    let mut rng = SeededRng::new(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let l = i % 2;
        let centre = if l == 0 { -1.0 } else { 1.0 };
        rows.push(centre + overlap * rng.uniform(-1.0, 1.0));
        rows.push(0.5 * centre + overlap * rng.uniform(-1.0, 1.0));
        labels.push(l);
    }
    (DMatrix::from_row_slice(n, 2, &rows), labels)
}

fn check(x: &DMatrix<f64>, labels: &[usize], c: f64) {
    let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let cfg = SvmConfig { max_epochs: 5000, tol: 1e-6, ..SvmConfig::with_c(c) };
    let model = linear_svm_fit(x, labels, 2, &cfg).unwrap();
    let p = &model.problems[0];
    let ours = primal(&p.weights, p.bias, x, &y, c);
    let (w, b) = qp_oracle(x, &y, c);
    let oracle = primal(&w, b, x, &y, c);
    assert!(
        (ours - oracle).abs() <= 1e-4 * oracle.max(1.0),
        "primal {ours} vs oracle {oracle}"
    );
    let last = *p.objective_history.last().unwrap();
    assert!((last - ours).abs() <= 1e-9 * ours.max(1.0));
}

#[test]
fn matches_qp_oracle_on_overlapping_classes() {
    let (x, labels) = two_blobs(40, 1.5, 7);
    check(&x, &labels, 1.0);
    check(&x, &labels, 0.1);
}

#[test]
fn matches_qp_oracle_with_duplicated_samples() {
    let (x, labels) = two_blobs(30, 1.5, 11);
    let n = x.nrows();
    let doubled = DMatrix::from_fn(2 * n, 2, |i, j| x[(i % n, j)]);
    let doubled_labels: Vec<usize> = (0..2 * n).map(|i| labels[i % n]).collect();
    check(&doubled, &doubled_labels, 1.0);
}
