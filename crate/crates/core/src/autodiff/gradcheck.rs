use serde::Serialize;

use super::{Tape, Tensor, TensorError, Var};

/// Outcome of comparing analytic gradients with central differences.
#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    /// Largest `|analytic - numeric| / max(1, |analytic|, |numeric|)`
    /// over comparable coordinates.
    pub max_rel_err: f64,
    pub worst_index: Option<usize>,
    /// Coordinates whose perturbation moves some relu input across zero.
    pub non_comparable: Vec<usize>,
    pub checked: usize,
    pub tol: f64,
    pub passed: bool,
}

/// Checks `d f / d x` for a scalar-valued `f` built on a fresh tape.
///
/// `f` receives the tape and `x` registered as a trainable leaf. Anything
/// else it needs should be registered inside `f` as constants.
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64, tol: f64) -> Result<GradCheckReport, TensorError>
where
    F: Fn(&mut Tape, Var) -> Result<Var, TensorError>,
{
    if eps <= 0.0 || !eps.is_finite() {
        return Err(TensorError::Invalid {
            op: "grad_check",
            reason: format!("eps must be positive, got {eps}"),
        });
    }
    let mut tape = Tape::new();
    let leaf = tape.leaf(x.clone());
    let out = f(&mut tape, leaf)?;
    let value = tape.value(out).item();
    if !value.is_finite() {
        return Err(TensorError::NonFinite { op: "grad_check" });
    }
    tape.backward(out)?;
    let analytic = tape
        .grad(leaf)
        .map(|g| g.data().to_vec())
        .unwrap_or_else(|| vec![0.0; x.len()]);

    let eval = |probe: &Tensor| -> Result<(f64, Vec<i8>), TensorError> {
        let mut tape = Tape::new();
        let leaf = tape.leaf(probe.clone());
        let out = f(&mut tape, leaf)?;
        Ok((tape.value(out).item(), tape.relu_signature()))
    };

    let mut max_rel_err = 0.0;
    let mut worst_index = None;
    let mut non_comparable = Vec::new();
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = x.data()[i];
        probe.data_mut()[i] = orig + eps;
        let (plus, sig_plus) = eval(&probe)?;
        probe.data_mut()[i] = orig - eps;
        let (minus, sig_minus) = eval(&probe)?;
        probe.data_mut()[i] = orig;

        if sig_plus != sig_minus {
            non_comparable.push(i);
            continue;
        }
        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic[i];
        let err = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
        if err > max_rel_err || worst_index.is_none() {
            max_rel_err = err.max(max_rel_err);
            worst_index = Some(i);
        }
    }
    let checked = x.len() - non_comparable.len();
    Ok(GradCheckReport {
        max_rel_err,
        worst_index,
        non_comparable,
        checked,
        tol,
        passed: max_rel_err < tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap()
    }

    #[test]
    fn linear_function_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(&mut rng, &[3, 4]);
        let r = grad_check(|t, x| t.sum(x), &x, 1e-5, 1e-9).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.max_rel_err < 1e-9);
        assert_eq!(r.checked, 12);
    }

    #[test]
    fn tanh_of_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random(&mut rng, &[2, 3]);
        let w = random(&mut rng, &[3, 4]);
        let f = |t: &mut Tape, x: Var| {
            let w = t.constant(w.clone());
            let y = t.matmul(x, w)?;
            let y = t.tanh(y)?;
            t.sum(y)
        };
        let r = grad_check(f, &x, 1e-5, 1e-6).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn relu_kink_is_flagged() {
        let x = Tensor::vector(vec![0.0, 1.0, -1.0]);
        let r = grad_check(
            |t, x| {
                let y = t.relu(x)?;
                t.sum(y)
            },
            &x,
            1e-5,
            1e-6,
        )
        .unwrap();
        assert_eq!(r.non_comparable, vec![0]);
        assert_eq!(r.checked, 2);
        assert!(r.passed);
    }

    #[test]
    fn non_finite_output_is_an_error() {
        let x = Tensor::vector(vec![1.0]);
        let r = grad_check(
            |t, x| {
                let big = t.constant(Tensor::vector(vec![1e300]));
                let y = t.mul(x, big)?;
                let y = t.mul(y, big)?;
                t.sum(y)
            },
            &x,
            1e-5,
            1e-6,
        );
        assert!(r.is_err());
    }

    #[test]
    fn catches_a_wrong_gradient() {
        // A function whose analytic path goes through a constant copy of x
        // misses half of the gradient of x·x.
        let x = Tensor::vector(vec![1.5, -0.5]);
        let r = grad_check(
            |t, x| {
                let c = t.constant(t.value(x).clone());
                let y = t.mul(x, c)?;
                t.sum(y)
            },
            &x,
            1e-5,
            1e-6,
        )
        .unwrap();
        assert!(!r.passed);
    }
}
