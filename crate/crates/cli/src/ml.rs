use std::fs::File;
use std::io::{BufReader, BufWriter, Write};

use anyhow::Context;
use smartbag_core::dataset::{
    default_profiles, generate, load_csv, save_csv, split, ClassVocabulary, Dataset,
};
use smartbag_core::nn::{evaluate, train_and_evaluate, ConfusionMatrix, TrainedModel};
use smartbag_core::{Hyperparams, ModelSpec, FEATURE_COUNT};

use crate::{CliError, CliResult, EvalArgs, GenArgs, TrainArgs};

fn load(path: &std::path::Path, vocab: &ClassVocabulary) -> Result<Dataset, CliError> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let data = load_csv(BufReader::new(file), vocab)
        .with_context(|| format!("reading {}", path.display()))?;
    if data.is_empty() {
        return Err(CliError::Failed(anyhow::anyhow!(
            "{} has no rows",
            path.display()
        )));
    }
    Ok(data)
}

fn check_fraction(f: f64) -> Result<(), CliError> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "--split must lie strictly between 0 and 1, got {f}"
        )))
    }
}

fn print_matrix(title: &str, accuracy: f64, m: &ConfusionMatrix, vocab: &ClassVocabulary) {
    println!(
        "{title} accuracy: {accuracy:.4} ({}/{})",
        m.trace(),
        m.total()
    );
    print!("{}", m.render(vocab.names()));
    let recalls: Vec<String> = (0..m.classes())
        .map(|c| {
            let name = vocab.name(c).unwrap_or("?");
            match m.recall(c) {
                Some(r) => format!("{name}={r:.4}"),
                None => format!("{name}=n/a"),
            }
        })
        .collect();
    println!("recall: {}", recalls.join(" "));
}

pub fn gen(args: GenArgs) -> CliResult {
    let vocab = ClassVocabulary::default();
    let data = generate(&default_profiles(), &vocab, args.n as usize, args.seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let file =
        File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut out = BufWriter::new(file);
    save_csv(&data, &mut out)?;
    out.flush()?;
    println!("wrote {} rows to {}", data.len(), args.out.display());
    Ok(())
}

pub fn train(args: TrainArgs) -> CliResult {
    check_fraction(args.split)?;
    let mut sizes = vec![FEATURE_COUNT];
    sizes.extend(&args.hidden);
    let vocab = ClassVocabulary::default();
    sizes.push(vocab.len());
    let spec = ModelSpec::new(sizes).map_err(|e| CliError::Usage(e.to_string()))?;
    let hyper = Hyperparams {
        learning_rate: args.lr,
        batch_size: args.batch,
        epochs: args.epochs,
        lambda: args.lambda,
        seed: args.seed,
        ..Hyperparams::default()
    };
    hyper
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let data = load(&args.data, &vocab)?;
    let (train_set, test_set) = split(&data, args.split, args.seed)?;
    if train_set.is_empty() || test_set.is_empty() {
        return Err(CliError::Failed(anyhow::anyhow!(
            "split {} of {} rows leaves an empty side",
            args.split,
            data.len()
        )));
    }
    let (params, report) = train_and_evaluate(&train_set, &test_set, &spec, &hyper)?;
    let model = TrainedModel::new(params, vocab.clone())?;
    model
        .save(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;

    println!(
        "architecture {:?}, {} train / {} test rows",
        spec.layer_sizes(),
        train_set.len(),
        test_set.len()
    );
    for (i, loss) in report.epoch_losses.iter().enumerate() {
        println!("epoch {:>3}  loss {loss:.6}", i + 1);
    }
    print_matrix(
        "train",
        report.train_accuracy,
        &report.train_confusion,
        &vocab,
    );
    if let (Some(acc), Some(m)) = (report.test_accuracy, &report.test_confusion) {
        print_matrix("test", acc, m, &vocab);
    }
    println!("model written to {}", args.out.display());
    Ok(())
}

pub fn eval(args: EvalArgs) -> CliResult {
    if let Some(f) = args.split {
        check_fraction(f)?;
    }
    let model = TrainedModel::load(&args.model)
        .with_context(|| format!("loading {}", args.model.display()))?;
    let data = load(&args.data, &model.vocabulary)?;
    let data = match args.split {
        Some(f) => split(&data, f, args.seed)?.1,
        None => data,
    };
    if data.is_empty() {
        return Err(CliError::Failed(anyhow::anyhow!("nothing to evaluate")));
    }
    let result = evaluate(&model.params, &data)?;
    let counts = data.class_counts();
    debug_assert!(result
        .confusion
        .row_sums()
        .iter()
        .zip(&counts)
        .all(|(r, c)| *r == *c as u64));
    print_matrix(
        "eval",
        result.accuracy,
        &result.confusion,
        &model.vocabulary,
    );
    Ok(())
}
