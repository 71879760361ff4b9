//! Records a small two-layer network on a tape, back-propagates a
//! log-sum-exp loss and checks the adjoints against central differences.
//! The second half breaks the matmul adjoint on purpose to show the check
//! catching it.

use mmle::autodiff::{grad_check, OpKind, Tape, Tensor, Var};
use mmle::Result;

fn loss(tape: &mut Tape, p: &[Var]) -> Result<Var> {
    let x = tape.constant(Tensor::from_rows(&[[0.5, -1.0, 2.0], [1.5, 0.25, -0.75]])?);
    let ones = tape.constant(Tensor::filled(&[2, 1], 1.0));
    let h = tape.matmul(x, p[0])?;
    let b = tape.matmul(ones, p[1])?;
    let h = tape.add(h, b)?;
    let h = tape.relu(h)?;
    let out = tape.matmul(h, p[2])?;
    let lse = tape.log_sum_exp(out)?;
    tape.sum(lse)
}

fn params() -> Result<Vec<Tensor>> {
    Ok(vec![
        Tensor::matrix(
            3,
            4,
            (0..12)
                .map(|i| 0.3 * ((i * 7 % 11) as f64 - 5.0) / 5.0)
                .collect(),
        )?,
        Tensor::matrix(1, 4, vec![0.1, -0.2, 0.05, 0.3])?,
        Tensor::matrix(
            4,
            2,
            (0..8).map(|i| 0.25 * ((i * 5 % 7) as f64 - 3.0)).collect(),
        )?,
    ])
}

fn main() -> Result<()> {
    let params = params()?;

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let l = loss(&mut tape, &vars)?;
    let grads = tape.backward(l)?;
    println!(
        "loss = {:.6}  ({} nodes on the tape)",
        tape.value(l).data()[0],
        tape.len()
    );
    for (i, v) in vars.iter().enumerate() {
        println!("d loss / d p{i} = {:?}", grads.wrt(*v).data());
    }

    let err = grad_check(loss, &params, 1e-5)?;
    println!("max relative error, clean tape:       {err:.3e}");

    let corrupted = grad_check(
        |tape: &mut Tape, p: &[Var]| {
            tape.corrupt_adjoint(OpKind::MatMul);
            loss(tape, p)
        },
        &params,
        1e-5,
    )?;
    println!("max relative error, broken matmul:    {corrupted:.3e}");
    Ok(())
}
