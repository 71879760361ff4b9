//! Runs the embedded verification suite, the same checks as `mmle verify`.
//! Pass an op name (for example `matmul`) to corrupt that op's adjoint and
//! watch the gradient checks fail.

use mmle::autodiff::OpKind;
use mmle::verify::{render, run_all, VerifyOptions};

fn main() {
    let corrupt = std::env::args()
        .nth(1)
        .map(|s| s.parse::<OpKind>().expect("unknown op name"));
    let results = run_all(VerifyOptions { corrupt, seed: 0 });
    print!("{}", render(&results));
    if results.iter().any(|r| !r.passed) {
        std::process::exit(1);
    }
}
