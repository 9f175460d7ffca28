//! Drive the command-line interface in-process: generate, train, ite.

use cegan::cli;

fn main() {
    let dir = std::env::temp_dir().join("cegan-cli-example");
    let cfg = dir.join("config.toml");
    std::fs::create_dir_all(&dir).expect("temp dir");
    std::fs::write(
        &cfg,
        "seed = 4\n[generator]\nkind = \"toy\"\nn = 500\n[model]\nhidden_dims = [32, 32]\n\
         propensity_hidden_dims = [32, 32]\nlatent_dim = 5\n[train]\nmax_iterations = 300\n",
    )
    .expect("write config");
    let (cfg, out) = (cfg.to_str().unwrap(), dir.to_str().unwrap());
    let ck = dir.join("model.json");
    for args in [
        vec!["cegan", "generate", "--config", cfg, "--out", out],
        vec!["cegan", "train", "--config", cfg, "--out", out],
        vec!["cegan", "ite", "--config", cfg, "--out", out, "--checkpoint", ck.to_str().unwrap()],
    ] {
        let code = cli::run(&args);
        println!("{} -> exit {code}", args[1]);
        if code != 0 {
            std::process::exit(code);
        }
    }
}
