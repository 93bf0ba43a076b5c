//! Trains the tiny model on the synthetic fixture's training tiles and
//! reports training-set pixel accuracy.
//!
//! `cargo run --release --example overfit_fixture -- [seed]`

use std::time::Instant;

use landseg::classes::NODATA;
use landseg::fixture::{self, Fixture};
use landseg::train::{evaluate_tiles, train_on_tiles, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map_or(Ok(0), |s| s.parse())?;
    let tcfg = TrainConfig {
        seed,
        ..fixture::train_config()
    };
    let fx = Fixture::generate(0)?;
    let train = fx.training_tiles();
    println!("{} training tiles", train.len());

    let t0 = Instant::now();
    let out = train_on_tiles(&train, &tcfg, &fixture::model_config(), |r| {
        if r.step % 25 == 0 {
            println!("step {:4}  lr {:.2e}  loss {:.4}", r.step, r.lr, r.loss);
        }
    })?;
    let losses: Vec<f64> = out.log.iter().map(|r| r.loss).collect();
    let avg: Vec<f64> = losses.windows(20).map(|w| w.iter().sum::<f64>() / 20.0).collect();
    let rises = avg.windows(2).filter(|p| p[1] > p[0]).count();
    let (cm, _) = evaluate_tiles(&out.model, &train, fixture::FIXTURE_TILE_PX, 32, NODATA)?;
    println!("trained in {:.1}s", t0.elapsed().as_secs_f64());
    println!("20-step moving average rises {rises} times out of {}", avg.len() - 1);
    print!("{}", cm.report());
    Ok(())
}
