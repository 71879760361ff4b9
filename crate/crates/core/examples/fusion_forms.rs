//! The three ways of combining the two modality features, and the scores
//! a label table assigns to the fused vector.

use mmle::model::{fuse, init_model, FusionKind, ModelSpec};
use mmle::Result;

fn main() -> Result<()> {
    let f = [1.0, 2.0];
    let g = [3.0, 4.0];
    for kind in FusionKind::ALL {
        let fused = fuse(kind, &f, &g)?;
        println!(
            "{kind:<14} d_phi = {}  fuse(f, g) = {fused:?}",
            kind.fused_dim(f.len())
        );
    }

    // A zero feature wipes out the outer product whatever the other side is,
    // which is why zero padding cannot be combined with it.
    println!(
        "outer(0, g) = {:?}",
        fuse(FusionKind::OuterProduct, &[0.0, 0.0], &g)?
    );

    for kind in FusionKind::ALL {
        let model = init_model(
            &ModelSpec {
                dim_x: 5,
                dim_y: 4,
                hidden_layers: vec![16],
                k: 3,
                num_classes: 3,
                fusion: kind,
            },
            7,
        )?;
        let fx = model.encode_x(&mmle::autodiff::Tensor::from_rows(&[[
            0.2, -0.1, 0.4, 1.0, -0.3,
        ]])?)?;
        let gy = model.encode_y(&mmle::autodiff::Tensor::from_rows(&[[
            0.5, 0.5, -1.0, 0.0,
        ]])?)?;
        let fused = fuse(kind, fx.data(), gy.data())?;
        let scores = model.label_scores(&fused)?;
        println!(
            "{kind:<14} h table {:?}  logits {:?}",
            model.h.table.shape(),
            scores
                .iter()
                .map(|s| (s * 1e4).round() / 1e4)
                .collect::<Vec<_>>()
        );
    }
    Ok(())
}
