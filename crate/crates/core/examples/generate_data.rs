//! Draw the two synthetic benchmarks and print a few summary statistics.
//!
//!     cargo run --release --example generate_data -- [zeta] [flip_prob]

use cegan::datagen::{generate_toy, generate_twins_like, ProxyScheme, ToyGenConfig, TwinsLikeConfig};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn main() -> cegan::Result<()> {
    let mut args = std::env::args().skip(1);
    let zeta: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let flip: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.1);

    let toy = generate_toy(&ToyGenConfig { n: 5000, zeta, seed: 1, ..Default::default() })?;
    let (y0, y1) = toy.potential_outcomes().expect("toy data carries both outcomes");
    let ate = mean(y1.as_slice()) - mean(y0.as_slice());
    let treated = toy.t().iter().filter(|&&t| t == 1).count();
    println!("toy (zeta = {zeta}): n = {}, x_dim = {}, treated = {treated}, true ATE = {ate:.4}", toy.len(), toy.schema().x_dim());

    for scheme in [ProxyScheme::GestatScalar, ProxyScheme::Gestat10Onehot] {
        let cfg = TwinsLikeConfig { n: 5000, scheme, flip_prob: flip, seed: 1, ..Default::default() };
        let d = generate_twins_like(&cfg)?;
        let (y0, y1) = d.potential_outcomes().expect("twins-like data carries both outcomes");
        println!(
            "twins-like {scheme:?}: x_dim = {}, P(t=1) = {:.3}, P(y0=1) = {:.3}, P(y1=1) = {:.3}",
            d.schema().x_dim(),
            d.t().iter().map(|&t| t as f64).sum::<f64>() / d.len() as f64,
            mean(y0.as_slice()),
            mean(y1.as_slice()),
        );
    }
    Ok(())
}
