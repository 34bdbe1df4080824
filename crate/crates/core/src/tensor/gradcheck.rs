//! Central finite-difference verification of tape gradients.

use super::adam::{Bound, ParamStore};
use super::tape::{Tape, Tensor, TensorError};

/// Outcome of a finite-difference sweep over every parameter entry.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub worst_entry: (usize, usize),
    pub checked: usize,
    /// Entries skipped because an evaluation landed within `2*epsilon` of a
    /// relu kink, where the central difference is meaningless.
    pub skipped: usize,
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compare tape gradients of a scalar-valued program against central finite
/// differences with step `epsilon`, entry by entry.
///
/// The program must be a deterministic function of the parameter store (pass
/// noise and data as captured constants).
pub fn grad_check<F>(
    store: &ParamStore,
    epsilon: f64,
    program: F,
) -> Result<GradCheckReport, TensorError>
where
    F: Fn(&Bound<'_>) -> Result<Tensor, TensorError>,
{
    // Analytic pass.
    let tape = Tape::new();
    let bound = Bound::new(&tape, store);
    let loss = program(&bound)?;
    tape.backward(&loss)?;
    let analytic = bound.grads();

    let eval = |store: &ParamStore| -> Result<(f64, f64), TensorError> {
        let tape = Tape::new();
        let bound = Bound::new(&tape, store);
        let loss = program(&bound)?;
        Ok((loss.item()?, tape.min_relu_input_abs()))
    };

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_entry: (0, 0),
        checked: 0,
        skipped: 0,
    };

    let (_, base_kink) = eval(store)?;
    let mut perturbed = store.clone();
    for (name, grad) in &analytic {
        for i in 0..grad.rows() {
            for j in 0..grad.cols() {
                let original = perturbed.get(name).unwrap().get(i, j);
                perturbed.get_mut(name).unwrap().set(i, j, original + epsilon);
                let (f_plus, kink_plus) = eval(&perturbed)?;
                perturbed.get_mut(name).unwrap().set(i, j, original - epsilon);
                let (f_minus, kink_minus) = eval(&perturbed)?;
                perturbed.get_mut(name).unwrap().set(i, j, original);

                // A relu input near 0 only invalidates the difference if the
                // perturbation actually moves it; untouched inputs reproduce
                // the baseline witness bitwise.
                let moved = kink_plus != base_kink || kink_minus != base_kink;
                if moved && kink_plus.min(kink_minus) <= 2.0 * epsilon {
                    report.skipped += 1;
                    continue;
                }
                let numeric = (f_plus - f_minus) / (2.0 * epsilon);
                let rel = relative_error(grad.get(i, j), numeric);
                report.checked += 1;
                if rel > report.max_rel_err {
                    report.max_rel_err = rel;
                    report.worst_param = name.clone();
                    report.worst_entry = (i, j);
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::mat::Mat;
    use crate::tensor::tape::bce_with_logits_sum;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
        Mat::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
    }

    #[test]
    fn linear_program_checks_to_machine_precision() {
        let mut store = ParamStore::new();
        store.insert("w", Mat::from_rows(&[&[1.5, -2.0], &[0.5, 3.0]]));
        let report = grad_check(&store, 1e-5, |b| {
            let w = b.param("w")?;
            w.scalar_mul(3.0)?.reduce_sum()
        })
        .unwrap();
        assert!(report.max_rel_err <= 1e-9, "rel err {}", report.max_rel_err);
        assert_eq!(report.checked, 4);
    }

    /// Every op kind gets a randomized finite-difference pass.
    #[test]
    fn every_op_kind_passes_gradient_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x_const = random_mat(&mut rng, 4, 3);
        let t_const = Mat::from_vec(4, 4, (0..16).map(|_| f64::from(rng.random::<bool>())).collect());
        let w_const = random_mat(&mut rng, 4, 4).map(|v| v.abs() + 0.5);

        let mut store = ParamStore::new();
        store.insert("a", random_mat(&mut rng, 4, 3));
        store.insert("b", random_mat(&mut rng, 3, 4));
        store.insert("bias", random_mat(&mut rng, 1, 3));
        store.insert("pos", random_mat(&mut rng, 4, 3).map(|v| v.abs() + 0.7));

        // Compose every op into one scalar so a single sweep covers them all.
        let program = |bound: &Bound<'_>| {
            let a = bound.param("a")?;
            let b = bound.param("b")?;
            let bias = bound.param("bias")?;
            let pos = bound.param("pos")?;
            let x = bound.tape().constant(x_const.clone());
            let targets = bound.tape().constant(t_const.clone());
            let weights = bound.tape().constant(w_const.clone());

            let mm = a.matmul(&b)?; // 4x4
            let bce = bce_with_logits_sum(&mm, &targets, Some(&weights))?;
            let added = a.add(&x)?.add_bias(&bias)?;
            let sub = added.sub(&a.hadamard(&x)?)?;
            let act = sub.relu()?.sub(&sub.sigmoid()?)?;
            let cat = act.concat_cols(&a.transpose()?.transpose()?)?;
            let norm = cat.row_l2_normalize()?;
            let expd = pos.clamp(-3.0, 3.0)?.exp()?;
            let logd = pos.log()?;
            let s1 = norm.reduce_sum()?;
            let s2 = expd.reduce_sum()?.scalar_mul(0.1)?;
            let s3 = logd.reduce_sum()?;
            s1.scale_by(&s2)?.add(&s3)?.add(&bce.scalar_mul(0.05)?)
        };

        let report = grad_check(&store, 1e-5, program).unwrap();
        assert!(report.max_rel_err <= 1e-6, "rel err {} at {} {:?}", report.max_rel_err, report.worst_param, report.worst_entry);
        assert!(report.checked > 0);
    }

    #[test]
    fn sampled_gram_and_softmax_ops_pass_gradient_check() {
        use crate::tensor::tape::{sampled_gram_bce, softmax_cross_entropy_masked};
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut store = ParamStore::new();
        store.insert("z", random_mat(&mut rng, 5, 3));
        store.insert("logits", random_mat(&mut rng, 5, 4));

        let pairs: Vec<(u32, u32)> = vec![(0, 1), (2, 2), (4, 3), (1, 1), (3, 0)];
        let targets = vec![1.0, 1.0, 0.0, 1.0, 0.0];
        let weights = vec![1.0, 2.0, 1.0, 0.5, 1.5];
        let labels = vec![0, 3, 1, 2, 0];
        let mask = vec![0, 2, 4];

        let report = grad_check(&store, 1e-5, |bound| {
            let z = bound.param("z")?;
            let logits = bound.param("logits")?;
            let est = sampled_gram_bce(&z, pairs.clone(), targets.clone(), weights.clone(), 25.0 / 5.0)?;
            let ce = softmax_cross_entropy_masked(&logits, &labels, &mask)?;
            est.scalar_mul(0.2)?.add(&ce)
        })
        .unwrap();
        assert!(report.max_rel_err <= 1e-6, "rel err {}", report.max_rel_err);
    }

    #[test]
    fn relu_kink_entries_are_skipped_not_failed() {
        let mut store = ParamStore::new();
        store.insert("w", Mat::from_rows(&[&[0.0, 1.0]]));
        let report = grad_check(&store, 1e-5, |b| b.param("w")?.relu()?.reduce_sum()).unwrap();
        assert_eq!(report.skipped, 1);
        assert_eq!(report.checked, 1);
        assert!(report.max_rel_err <= 1e-9);
    }
}
