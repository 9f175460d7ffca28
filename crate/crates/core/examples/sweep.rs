//! Sweep the proxy noise level and render the chart to `sweep.svg`.

use cegan::datagen::ToyGenConfig;
use cegan::eval::{run_sweep, sweep_svg, DataSource, ExperimentSpec, MethodId, SweepAxis};
use cegan::model::ModelConfig;
use cegan::training::TrainConfig;

fn main() -> cegan::Result<()> {
    let spec = ExperimentSpec {
        realizations: 2,
        methods: vec![MethodId::Cegan, MethodId::Lr1, MethodId::Knn],
        model: ModelConfig::default().with_hidden(vec![32, 32]).with_latent_dim(5),
        train: TrainConfig { max_iterations: 400, ..Default::default() },
        ..ExperimentSpec::new(DataSource::Toy(ToyGenConfig { n: 500, ..Default::default() }))
    };
    let sweep = run_sweep(&spec, &SweepAxis::Zeta(vec![0.0, 2.0, 5.0]))?;
    for p in &sweep.points {
        for m in &spec.methods {
            if let Some(s) = p.report.get(*m, "out", "sqrt-pehe") {
                println!("zeta {:<4} {m:<4} sqrt-PEHE {:.4} ± {:.4}", p.value, s.mean, s.std);
            }
        }
    }
    std::fs::write("sweep.svg", sweep_svg(&sweep, "out", "sqrt-pehe")).map_err(|e| cegan::Error::io("sweep.svg", e))?;
    println!("wrote sweep.svg");
    Ok(())
}
