//! Sequence and instance runs: `cargo run --release --example latent -- mnist|red|triangle|pair [lambda] [epochs] [lr]`.

use latent_ilp::datasets::{gen_kandinsky, gen_mnist_sequence, KandinskyPattern, Parity};
use latent_ilp::pipeline::{run_kandinsky, run_sequence, RunConfig};

fn main() {
    let a: Vec<String> = std::env::args().skip(1).collect();
    let what = a.first().map(String::as_str).unwrap_or("mnist");
    let mut cfg = if what == "mnist" { RunConfig::sequence() } else { RunConfig::kandinsky() };
    if let Some(v) = a.get(1) { cfg.network.lambda = v.parse().unwrap(); }
    if let Some(v) = a.get(2) { cfg.network.epochs = v.parse().unwrap(); }
    if let Some(v) = a.get(3) { cfg.network.rule_lr = v.parse().unwrap(); }
    if let Ok(v) = std::env::var("SEED") { cfg.network.seed = v.parse().unwrap(); }
    if what == "mnist" {
        for parity in [Parity::OddIndex, Parity::EvenIndex] {
            let task = gen_mnist_sequence(12, parity, 0).unwrap();
            let res = run_sequence(&task, &cfg).unwrap();
            for r in &res.runs {
                println!("{parity:?} seed {} image {:?} cluster {:?} assign {:?} secs {:.1}", r.seed, r.image_metrics, r.cluster_precision, r.assignment, r.secs);
                print!("{}", r.program.to_text(&task.train.preds, &task.train.constants));
                if std::env::var("SHOW").is_ok() { println!("-- cluster"); print!("{}", r.cluster_program.to_text(&task.train.preds, &task.train.constants)); }
            }
        }
        return;
    }
    let pattern = match what {
        "red" => KandinskyPattern::OneRed,
        "triangle" => KandinskyPattern::OneTriangle,
        _ => KandinskyPattern::TwoPair,
    };
    let set = gen_kandinsky(pattern, 30, 30, 0);
    let mock = latent_ilp::invent::MockTranslator::new();
    let res = run_kandinsky(&set, &cfg, 0, Some(&mock)).unwrap();
    for r in &res.runs {
        println!("seed {} train {:.3} test {:.3} secs {:.1} rules {}", r.seed, r.train_accuracy, r.test_accuracy, r.secs, r.program.len());
        print!("{}", r.program.to_text(&r.preds, &Default::default()));
        if let Some(inv) = &r.invention {
            println!("  invented: train {:.3} test {:.3} {:?}", inv.train_accuracy, inv.test_accuracy, inv.test_metrics);
            print!("{}", inv.generalized.to_text(&inv.preds, &Default::default()));
            println!("  selected:");
            print!("{}", inv.program.to_text(&inv.preds, &Default::default()));
        }
    }
}
