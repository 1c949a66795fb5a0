//! Scratch calibration harness (not part of the deliverable test suite).

use memchain::data::{expand_corpus, load_split, synth_generate, EmbeddingTable, SynthSpec};
use memchain::model::{GateMode, ModelConfig};
use memchain::train::{
    default_tied_targets, prepare_table, run_experiment, TrainConfig,
};
use std::time::Instant;

fn split_instances(
    corpus: &memchain::data::SynthCorpus,
    seed: u64,
) -> (Vec<memchain::data::Instance>, Vec<memchain::data::Instance>, Vec<memchain::data::Instance>) {
    // Write records to a temp file and reuse the 70/10/20 splitter.
    let dir = std::env::temp_dir().join(format!("memchain-calib-{seed}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("corpus.json");
    std::fs::write(&path, serde_json::to_string(&corpus.records).unwrap()).unwrap();
    let splits = load_split(&path, seed).unwrap();
    let a = corpus.aspects.clone();
    (
        expand_corpus(&splits.train, &a).unwrap(),
        expand_corpus(&splits.val, &a).unwrap(),
        expand_corpus(&splits.test, &a).unwrap(),
    )
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("delay");

    match mode {
        "overfit" => overfit(&args),
        "delay" => delay_benefit(&args),
        "chains" => chain_capacity(&args),
        other => eprintln!("unknown mode {other}"),
    }
}

fn getf(args: &[String], key: &str, default: f64) -> f64 {
    args.iter()
        .position(|a| a == key)
        .and_then(|i| args.get(i + 1))
        .and_then(|v| v.parse().ok())
        .unwrap_or(default)
}

fn getu(args: &[String], key: &str, default: usize) -> usize {
    getf(args, key, default as f64) as usize
}

fn overfit(args: &[String]) {
    let dim = getu(args, "--dim", 32);
    let epochs = getu(args, "--epochs", 200);
    let spec = SynthSpec {
        sentences: 20,
        targets_per_sentence: 2,
        seed: 7,
        distance_min: 0,
        distance_max: 3,
        opinions_min: 1,
        opinions_max: 2,
        filler_vocab: 8,
        cues_per_slot: 1,
        embed_dim: dim,
        embed_scale: 1.0,
        cue_before_prob: 0.0,
    };
    let corpus = synth_generate(&spec).unwrap();
    let instances = expand_corpus(&corpus.records, &corpus.aspects).unwrap();
    println!("{} instances", instances.len());
    let mut table = EmbeddingTable::<f64>::from_pairs(dim, &corpus.embeddings).unwrap();
    let tied = default_tied_targets(2);
    prepare_table(&mut table, &[&instances], &corpus.aspects, &tied);
    let model_cfg = ModelConfig::small(dim, 4, 2);
    let train_cfg = TrainConfig {
        epochs,
        batch_size: getu(args, "--batch", 128),
        learning_rate: getf(args, "--lr", 0.05),
        dropout_rate: getf(args, "--dropout", 0.0),
        seed: 1,
        ..TrainConfig::default()
    };
    let t0 = Instant::now();
    let out = run_experiment(
        &instances, &instances, &instances, &table, &corpus.aspects, &tied, &model_cfg,
        &train_cfg,
    )
    .unwrap();
    // slot accuracy = 3-class accuracy over all train slots
    let records = memchain::eval::predict_records(
        &out.train.params, &model_cfg, &table, &corpus.aspects, &instances,
    )
    .unwrap();
    let correct = records.iter().filter(|r| r.predicted == r.gold).count();
    println!(
        "epochs {epochs}: slot acc {:.4} ({} / {}), best epoch {:?}, took {:.1?}",
        correct as f64 / records.len() as f64,
        correct,
        records.len(),
        out.train.best_epoch,
        t0.elapsed()
    );
    for rec in out.train.log.iter().step_by(20.max(epochs / 10)) {
        println!("  epoch {:>3}  loss {:.4}  val f1 {:.4}", rec.epoch, rec.mean_loss, rec.val.aspect_macro_f1);
    }
}

fn delay_benefit(args: &[String]) {
    let dim = getu(args, "--dim", 12);
    let sentences = getu(args, "--sentences", 80);
    let epochs = getu(args, "--epochs", 50);
    let chains = getu(args, "--chains", 2);
    let seeds = getu(args, "--seeds", 3) as u64;
    let spec = SynthSpec {
        sentences,
        targets_per_sentence: 2,
        seed: 13,
        distance_min: getu(args, "--dmin", 5),
        distance_max: getu(args, "--dmax", 10),
        opinions_min: getu(args, "--opmin", 1),
        opinions_max: getu(args, "--opmax", 1),
        filler_vocab: getu(args, "--fillers", 20),
        cues_per_slot: getu(args, "--cues", 1),
        embed_dim: dim,
        embed_scale: 1.0,
        cue_before_prob: 0.0,
    };
    let corpus = synth_generate(&spec).unwrap();
    let (train, val, test) = split_instances(&corpus, 5);
    println!("instances: train {}, val {}, test {}", train.len(), val.len(), test.len());
    let mut table = EmbeddingTable::<f64>::from_pairs(dim, &corpus.embeddings).unwrap();
    let tied = default_tied_targets(2);
    prepare_table(&mut table, &[&train, &val, &test], &corpus.aspects, &tied);

    for gate_mode in [GateMode::Delayed, GateMode::Entnet] {
        let model_cfg = ModelConfig {
            gate_mode,
            ..ModelConfig::small(dim, chains, 2)
        };
        let mut f1s = Vec::new();
        for seed in 0..seeds {
            let train_cfg = TrainConfig {
                epochs,
                batch_size: getu(args, "--batch", 120),
                learning_rate: getf(args, "--lr", 0.05),
                dropout_rate: getf(args, "--dropout", 0.1),
                seed: 100 + seed,
                ..TrainConfig::default()
            };
            let t0 = Instant::now();
            let out = run_experiment(
                &train, &val, &test, &table, &corpus.aspects, &tied, &model_cfg, &train_cfg,
            )
            .unwrap();
            println!(
                "  {:?} seed {} -> test F1 {:.4} strict {:.4} sent-acc {:.4} ({:.1?}, best ep {:?})",
                gate_mode,
                seed,
                out.test_report.aspect_macro_f1,
                out.test_report.aspect_strict_acc,
                out.test_report.sentiment_acc,
                t0.elapsed(),
                out.train.best_epoch,
            );
            f1s.push(out.test_report.aspect_macro_f1);
        }
        let (m, s) = memchain::train::mean_std(&f1s);
        println!("{gate_mode:?}: mean F1 {m:.4} +- {s:.4}");
    }
}

fn chain_capacity(args: &[String]) {
    let dim = getu(args, "--dim", 12);
    let sentences = getu(args, "--sentences", 60);
    let epochs = getu(args, "--epochs", 40);
    let seeds = getu(args, "--seeds", 2) as u64;
    let spec = SynthSpec {
        sentences,
        targets_per_sentence: 2,
        seed: 29,
        distance_min: 1,
        distance_max: 4,
        opinions_min: getu(args, "--opmin", 2),
        opinions_max: getu(args, "--opmax", 3),
        filler_vocab: getu(args, "--fillers", 12),
        cues_per_slot: getu(args, "--cues", 2),
        embed_dim: dim,
        embed_scale: 1.0,
        cue_before_prob: 0.0,
    };
    let corpus = synth_generate(&spec).unwrap();
    let (train, val, test) = split_instances(&corpus, 5);
    println!("instances: train {}, val {}, test {}", train.len(), val.len(), test.len());
    let mut table = EmbeddingTable::<f64>::from_pairs(dim, &corpus.embeddings).unwrap();
    let tied = default_tied_targets(2);
    prepare_table(&mut table, &[&train, &val, &test], &corpus.aspects, &tied);

    for n in [2usize, 6] {
        let model_cfg = ModelConfig::small(dim, n, 2);
        let mut f1s = Vec::new();
        for seed in 0..seeds {
            let train_cfg = TrainConfig {
                epochs,
                batch_size: getu(args, "--batch", 112),
                learning_rate: getf(args, "--lr", 0.05),
                dropout_rate: getf(args, "--dropout", 0.1),
                seed: 300 + seed,
                ..TrainConfig::default()
            };
            let t0 = Instant::now();
            let out = run_experiment(
                &train, &val, &test, &table, &corpus.aspects, &tied, &model_cfg, &train_cfg,
            )
            .unwrap();
            println!(
                "  n {} seed {} -> test F1 {:.4} ({:.1?})",
                n, seed, out.test_report.aspect_macro_f1, t0.elapsed()
            );
            f1s.push(out.test_report.aspect_macro_f1);
        }
        let (m, s) = memchain::train::mean_std(&f1s);
        println!("n = {n}: mean F1 {m:.4} +- {s:.4}");
    }
}
