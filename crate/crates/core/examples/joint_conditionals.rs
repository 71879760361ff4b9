//! Builds the explicitly normalized joint table over a small alphabet and
//! compares its conditionals with the closed forms used for training:
//! `Q(z | x, y)` for complete samples and `Q(z | x)` with `y` summed out
//! over the candidate pool.

use mmle::autodiff::Tensor;
use mmle::likelihood::{
    eval_joint_oracle, log_q_z_given_x, log_q_z_given_xy, CandidatePool, LabelDistribution,
};
use mmle::model::{init_model, FusionKind, ModelSpec};
use mmle::Result;

fn main() -> Result<()> {
    let xs = vec![vec![0.3, -1.2], vec![1.1, 0.4], vec![-0.7, 0.9]];
    let ys = vec![vec![0.5, 0.0, -0.5], vec![-1.0, 2.0, 0.1]];
    let r_x = [0.5, 0.3, 0.2];
    let r_y = [0.6, 0.4];
    let r_z = LabelDistribution::from_probs(&[0.5, 0.3, 0.2])?;

    for fusion in FusionKind::ALL {
        let model = init_model(
            &ModelSpec {
                dim_x: 2,
                dim_y: 3,
                hidden_layers: vec![4],
                k: 2,
                num_classes: 3,
                fusion,
            },
            11,
        )?;
        let fx: Vec<Vec<f64>> = model
            .encode_x(&Tensor::from_rows(&xs)?)?
            .rows()
            .map(<[f64]>::to_vec)
            .collect();
        let gy: Vec<Vec<f64>> = model
            .encode_y(&Tensor::from_rows(&ys)?)?
            .rows()
            .map(<[f64]>::to_vec)
            .collect();
        let table = eval_joint_oracle(&fx, &gy, &r_x, &r_y, &r_z, &model)?;
        let pool = CandidatePool::with_weights(Tensor::from_rows(&ys)?, &r_y)?;

        let mut worst: f64 = 0.0;
        for (i, x) in xs.iter().enumerate() {
            for (j, y) in ys.iter().enumerate() {
                let closed = log_q_z_given_xy(&model, &r_z, x, y)?;
                for (c, p) in table.z_given_xy(i, j).iter().enumerate() {
                    worst = worst.max((closed[c].exp() - p).abs());
                }
            }
            let closed = log_q_z_given_x(&model, &r_z, &pool, x)?;
            for (c, p) in table.z_given_x(i).iter().enumerate() {
                worst = worst.max((closed[c].exp() - p).abs());
            }
        }
        let q: Vec<String> = log_q_z_given_x(&model, &r_z, &pool, &xs[0])?
            .iter()
            .map(|l| format!("{:.4}", l.exp()))
            .collect();
        println!(
            "{fusion:<14} table mass {:.15}  Q(z|x0) = [{}]  max deviation {worst:.2e}",
            table.total(),
            q.join(", ")
        );
    }
    Ok(())
}
