// Figures for a training run: the loss curve from a training log and a
// truth/prediction overlay for one reconstructed sample.

use raydio::bundled;
use raydio::cli::{render_loss_curve, render_overlay, LossRecord, SampleReport};

pub fn run_example() -> raydio::Result<(image::RgbImage, image::RgbImage)> {
    // a log as the trainer writes it, one JSON object per epoch
    let log_text: String = (1..=20)
        .map(|e| {
            let e = e as f64;
            format!(
                "{{\"epoch\":{e},\"train_loss\":{:.5},\"val_loss\":{:.5}}}\n",
                0.02 / e.sqrt() + 0.001,
                0.022 / e.sqrt() + 0.0013 + 0.0002 * (e * 1.7).sin()
            )
        })
        .collect();
    let log: Vec<LossRecord> = log_text.lines().map(|l| serde_json::from_str(l).expect("valid log line")).collect();
    let curve = render_loss_curve(&log, 800, 500)?;

    let sample = SampleReport {
        sample_id: "shoebox_t000_r0000".into(),
        scene: "shoebox".into(),
        tx: [1.0, 1.0, 1.0],
        rx: [4.0, 3.0, 1.5],
        truth: vec![
            vec![[1.0, 1.0, 1.0], [4.0, 3.0, 1.5]],
            vec![[1.0, 1.0, 1.0], [2.6, 2.07, 0.0], [4.0, 3.0, 1.5]],
        ],
        polylines: vec![
            vec![[1.0, 1.0, 1.0], [4.0, 3.0, 1.5]],
            vec![[1.0, 1.0, 1.0], [2.63, 2.05, 0.02], [4.0, 3.0, 1.5]],
        ],
        residual_2d: vec![],
        flags: vec![],
        precision: 1.0,
        recall: 1.0,
        rmse_m: Some(0.02),
        rmse_px: Some(0.7),
        well_separated: true,
    };
    let overlay = render_overlay(&bundled::shoebox(), &sample, 384)?;
    println!("loss curve {:?}, overlay {:?}", curve.dimensions(), overlay.dimensions());
    Ok((curve, overlay))
}

#[allow(dead_code)]
fn main() {
    let (curve, overlay) = run_example().expect("figures failed");
    curve.save("loss.png").expect("write loss.png");
    overlay.save("overlay.png").expect("write overlay.png");
}
