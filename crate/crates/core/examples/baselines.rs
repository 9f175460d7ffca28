//! The three non-adversarial comparators on one twins-like realization.

use cegan::datagen::{generate_twins_like, split, SplitFractions, TwinsLikeConfig};
use cegan::eval::{ate_error, fit_knn, fit_lr1, fit_lr2, pehe, Counterfactuals};

fn score(name: &str, cf: &Counterfactuals, y1: &[f64], y0: &[f64]) -> cegan::Result<()> {
    let root = pehe(y1, y0, &cf.y1, &cf.y0)?.sqrt();
    let ate = ate_error(y1, y0, &cf.y1, &cf.y0)?;
    println!("{name:<4} sqrt-PEHE {root:.4}  ATE error {ate:.4}");
    Ok(())
}

fn main() -> cegan::Result<()> {
    let data = generate_twins_like(&TwinsLikeConfig { n: 4000, seed: 2, ..Default::default() })?;
    let (train, _, test) = split(&data, SplitFractions::default(), 2)?;
    let (y0, y1) = test.potential_outcomes().expect("twins-like data carries both outcomes");
    let (y0, y1) = (y0.as_slice(), y1.as_slice());

    score("lr1", &fit_lr1(&train)?.predict(test.x())?, y1, y0)?;
    score("lr2", &fit_lr2(&train)?.predict(test.x())?, y1, y0)?;
    score("knn", &fit_knn(&train, 5)?.predict(test.x())?, y1, y0)?;
    Ok(())
}
