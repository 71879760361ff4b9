use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Compares reverse-mode gradients against central finite differences.
///
/// `f` builds a scalar loss on a fresh tape from the registered parameters.
/// The result is the maximum over all parameter entries of
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-12)`.
pub fn grad_check<F>(f: F, params: &[Tensor], epsilon: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    Ok(grad_check_detailed(f, params, epsilon)?.max_relative_error)
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// (parameter index, flat entry index) of the worst entry.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub entries_checked: usize,
}

pub fn grad_check_detailed<F>(f: F, params: &[Tensor], epsilon: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(Error::Contract(format!(
            "epsilon must lie in (0, 1e-2], got {epsilon}"
        )));
    }

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;
    let analytic: Vec<Tensor> = vars.iter().map(|&v| grads.wrt(v)).collect();

    let eval = |ps: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.param(p.clone())).collect();
        let loss = f(&mut tape, &vars)?;
        let v = tape
            .value(loss)
            .item()
            .ok_or_else(|| Error::Contract("loss is not a scalar".into()))?;
        if !v.is_finite() {
            return Err(Error::Numerical(
                "loss evaluated to a non-finite value".into(),
            ));
        }
        Ok(v)
    };

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        entries_checked: 0,
    };
    let mut work = params.to_vec();
    for (pi, p) in params.iter().enumerate() {
        for ei in 0..p.len() {
            let orig = p.data()[ei];
            work[pi].data_mut()[ei] = orig + epsilon;
            let up = eval(&work)?;
            work[pi].data_mut()[ei] = orig - epsilon;
            let down = eval(&work)?;
            work[pi].data_mut()[ei] = orig;

            let numeric = (up - down) / (2.0 * epsilon);
            let a = analytic[pi].data()[ei];
            if !a.is_finite() || !numeric.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite gradient at parameter {pi}, entry {ei}"
                )));
            }
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12);
            report.entries_checked += 1;
            if rel > report.max_relative_error {
                report.max_relative_error = rel;
                report.worst = (pi, ei);
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let p = Tensor::vector(vec![1.0, 2.0]).unwrap();
        let err = grad_check(
            |t, v| {
                let sq = t.mul(v[0], v[0])?;
                t.sum(sq)
            },
            &[p],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn relu_away_from_kink() {
        let p = Tensor::vector(vec![1.0]).unwrap();
        let err = grad_check(
            |t, v| {
                let r = t.relu(v[0])?;
                t.sum(r)
            },
            &[p],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn epsilon_out_of_range() {
        let p = Tensor::vector(vec![1.0]).unwrap();
        let r = grad_check(|t, v| t.sum(v[0]), &[p], 0.1);
        assert!(matches!(r, Err(Error::Contract(_))));
    }
}
