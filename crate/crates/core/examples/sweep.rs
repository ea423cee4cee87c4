//! Quick per-task sweep: `cargo run --release --example sweep -- task [widths] [d_bias] [epochs] [init_std] [lr] [batch]`.

use latent_ilp::datasets::{gen_task, Dataset, TaskName, TaskSpec};
use latent_ilp::pipeline::{run_symbolic, RunConfig};

fn main() {
    let a: Vec<String> = std::env::args().skip(1).collect();
    let tasks: Vec<TaskName> = if a.is_empty() || a[0] == "all" {
        TaskName::ALL.iter().copied().filter(|t| t.is_relational()).collect()
    } else {
        a[0].split(',').map(|s| s.parse().unwrap()).collect()
    };
    let mut cfg = RunConfig::default();
    if let Some(w) = a.get(1) {
        cfg.network.widths = w.split('x').map(|v| v.parse().unwrap()).collect();
    }
    if let Some(v) = a.get(2) { cfg.network.d_bias = v.parse().unwrap(); }
    if let Some(v) = a.get(3) { cfg.network.epochs = v.parse().unwrap(); }
    if let Some(v) = a.get(4) { cfg.network.init_std = v.parse().unwrap(); }
    if let Some(v) = a.get(5) { cfg.network.rule_lr = v.parse().unwrap(); }
    if let Some(v) = a.get(6) { cfg.network.batch = v.parse().unwrap(); }
    if let Ok(v) = std::env::var("EXTRA") {
        cfg.extra_thresholds = v.split(',').map(|x| x.parse().unwrap()).collect();
    }
    for t in tasks {
        let Dataset::Relational(task) = gen_task(&TaskSpec::new(t)).unwrap() else { continue };
        let res = run_symbolic(&task, &cfg).unwrap();
        let best = res.best_run().unwrap();
        println!(
            "{t}: runs {} best seed {} metrics {:?} secs {:.1}\n{}",
            res.runs.len(),
            best.seed,
            best.metrics,
            res.secs,
            best.program.to_text(&task.train.preds, &task.train.constants)
        );
        for r in &res.runs {
            println!("  seed {} extracted {} kept {} mse {:?}", r.seed, r.extracted.len(), r.program.len(), r.history.last().map(|h| h.mse));
            if std::env::var("SHOW").is_ok() { print!("{}", r.extracted.to_text(&task.train.preds, &task.train.constants)); }
        }
    }
}
