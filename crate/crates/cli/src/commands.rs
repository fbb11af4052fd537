use std::path::{Path, PathBuf};
use std::time::Instant;

use scorecam_core::io::{load_image, load_manifest, load_model, write_heatmap, write_overlay, PreprocessConfig};
use scorecam_core::sanity::cascading_test;
use scorecam_core::{
    run_curves_eval, run_pointing_eval, run_recognition_eval, scorecam, with_workers, Error, EvalConfig, ModelGraph,
    ScoreCamConfig, ScoreMode, TargetClass, UpsampleMode,
};
use serde_json::{json, Value};

use crate::{Cli, Command, EngineArgs, EvalArgs, EvalKind, ExplainArgs, Failure, PreprocessArgs, SanityArgs};

type Model = ModelGraph<f32>;

const SCHEMA: u32 = 1;

pub fn run(cli: &Cli) -> Result<(), Failure> {
    let model_path = cli
        .model
        .as_deref()
        .ok_or_else(|| Failure::usage("--model is required"))?;
    let model = load_model(model_path)?;
    let workers = match cli.workers {
        Some(n) => usize::try_from(n).map_err(|_| Failure::usage("--workers is too large"))?,
        None => scorecam_core::parallel::default_workers(),
    };
    if let Command::ModelInfo = cli.command {
        print!("{}", model_table(&model));
        return Ok(());
    }
    std::fs::create_dir_all(&cli.out).map_err(|e| Error::io(&cli.out, e))?;
    let started = Instant::now();
    let (command, config, results) = with_workers(workers, || -> Result<_, Failure> {
        Ok(match &cli.command {
            Command::Explain(args) => ("explain", engine_json(&args.engine), explain(cli, &model, args)?),
            Command::Eval(args) => (
                eval_name(args.kind),
                engine_json(&args.engine),
                eval(cli, &model, args)?,
            ),
            Command::Sanity(args) => ("sanity", engine_json(&args.engine), sanity(cli, &model, args)?),
            Command::ModelInfo => unreachable!(),
        })
    })??;
    let mut config = config;
    config["workers"] = json!(workers);
    config["seed"] = json!(cli.seed);
    let report = json!({
        "schema": SCHEMA,
        "command": command,
        "model": model_path.display().to_string(),
        "config": config,
        "results": results,
        "timing_ms": started.elapsed().as_secs_f64() * 1e3,
    });
    let file = match &cli.command {
        Command::Explain(_) => "explain.json".to_string(),
        Command::Sanity(_) => "sanity.json".to_string(),
        Command::Eval(args) => format!("{}.json", eval_name(args.kind)),
        Command::ModelInfo => unreachable!(),
    };
    let path = cli.out.join(file);
    write_text(
        &path,
        &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"),
    )?;
    println!("{}", path.display());
    Ok(())
}

fn eval_name(kind: EvalKind) -> &'static str {
    match kind {
        EvalKind::Recognition => "recognition",
        EvalKind::Curves => "curves",
        EvalKind::Pointing => "pointing",
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

fn score_mode_name(mode: ScoreMode) -> &'static str {
    match mode {
        ScoreMode::PostSoftmax => "post-softmax",
        ScoreMode::Logit => "logit",
    }
}

fn engine_config(args: &EngineArgs, class: Option<usize>) -> ScoreCamConfig<f32> {
    ScoreCamConfig {
        target_layer: args.layer,
        target_class: class.map_or(TargetClass::Predicted, TargetClass::Index),
        score_mode: args.score_mode.into(),
        batch_size: args.batch,
        upsample: args.upsample.into(),
        ..Default::default()
    }
}

fn engine_json(args: &EngineArgs) -> Value {
    json!({
        "layer": args.layer,
        "score_mode": score_mode_name(args.score_mode.into()),
        "upsample": match UpsampleMode::from(args.upsample) {
            UpsampleMode::Bilinear => "bilinear",
            UpsampleMode::Nearest => "nearest",
        },
        "batch_size": args.batch,
    })
}

/// Images are always resized to the model input.
fn preprocess_config(args: &PreprocessArgs, model: &Model) -> PreprocessConfig {
    let [c, h, w] = model.input_shape();
    if args.no_normalize {
        return PreprocessConfig {
            value_scale: args.value_scale,
            ..PreprocessConfig::identity(c, h, w)
        };
    }
    PreprocessConfig {
        target_h: h,
        target_w: w,
        mean: args.mean.clone(),
        std: args.std.clone(),
        value_scale: args.value_scale,
    }
}

fn preprocess_json(cfg: &PreprocessConfig) -> Value {
    json!({
        "target": [cfg.target_h, cfg.target_w],
        "mean": cfg.mean,
        "std": cfg.std,
        "value_scale": cfg.value_scale,
    })
}

fn class_name(model: &Model, class: usize) -> Option<&str> {
    model.class_names().and_then(|n| n.get(class)).map(String::as_str)
}

fn explain(cli: &Cli, model: &Model, args: &ExplainArgs) -> Result<Value, Failure> {
    let image = load_image(&args.image)?;
    let pre = preprocess_config(&args.preprocess, model);
    let input = pre.apply(&image.pixels).map_err(|e| e.in_file(&args.image))?;
    let cfg = engine_config(&args.engine, args.class);
    let exp = scorecam(model, &input, &cfg)?;
    let meta = &exp.map.meta;

    let mut files = vec![file_name(cli, "saliency.pgm")];
    write_heatmap(&exp.map, cli.out.join("saliency.pgm"))?;
    if args.overlay {
        write_overlay(&exp.map, &image.pixels, cli.out.join("overlay.ppm"))?;
        files.push(file_name(cli, "overlay.ppm"));
    }
    let to64 = |v: &[f32]| v.iter().map(|&x| x as f64).collect::<Vec<_>>();
    Ok(json!({
        "image": args.image.display().to_string(),
        "preprocess": preprocess_json(&pre),
        "class": meta.class,
        "class_name": class_name(model, meta.class),
        "layer": meta.layer,
        "score_mode": score_mode_name(meta.score_mode),
        "map_shape": [exp.map.height(), exp.map.width()],
        "alpha": to64(&exp.channel_scores.weights),
        "raw_scores": to64(&exp.channel_scores.raw),
        "files": files,
    }))
}

fn file_name(cli: &Cli, name: &str) -> String {
    cli.out.join(name).display().to_string()
}

fn eval(cli: &Cli, model: &Model, args: &EvalArgs) -> Result<Value, Failure> {
    let records = load_manifest(&args.manifest)?;
    let mut cfg = EvalConfig::new(
        engine_config(&args.engine, None),
        preprocess_config(&args.preprocess, model),
    );
    cfg.keep_fraction = args.keep;
    let mut results = match args.kind {
        EvalKind::Recognition => to_value(&run_recognition_eval(model, &records, &cfg)?),
        EvalKind::Pointing => to_value(&run_pointing_eval(model, &records, &cfg)?),
        EvalKind::Curves => {
            let report = run_curves_eval(model, &records, &cfg)?;
            let dir = cli.out.join("curves");
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let mut files = Vec::new();
            for (i, img) in report.per_image.iter().enumerate() {
                for (tag, curve) in [("deletion", &img.deletion), ("insertion", &img.insertion)] {
                    let path: PathBuf = dir.join(format!("{i:03}_{}_{tag}.csv", sanitize(&img.id)));
                    write_text(&path, &curve.to_csv())?;
                    files.push(path.display().to_string());
                }
            }
            let mut v = to_value(&report);
            v["files"] = json!(files);
            v
        }
    };
    results["manifest"] = json!(args.manifest.display().to_string());
    results["images"] = json!(records.len());
    results["preprocess"] = preprocess_json(&cfg.preprocess);
    Ok(results)
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn sanity(cli: &Cli, model: &Model, args: &SanityArgs) -> Result<Value, Failure> {
    let image = load_image(&args.image)?;
    let pre = preprocess_config(&args.preprocess, model);
    let input = pre.apply(&image.pixels).map_err(|e| e.in_file(&args.image))?;
    let report = cascading_test(model, &input, &engine_config(&args.engine, args.class), cli.seed)?;
    let mut v = to_value(&report);
    v["image"] = json!(args.image.display().to_string());
    v["preprocess"] = preprocess_json(&pre);
    Ok(v)
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

fn model_table(model: &Model) -> String {
    let shape = |s: &[usize]| s.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("x");
    let [c, h, w] = model.input_shape();
    let mut out = format!("input {c}x{h}x{w}, {} classes\n", model.class_count());
    out.push_str(&format!(
        "{:>5}  {:<10} {:>14} {:>14} {:>10}\n",
        "index", "kind", "input", "output", "params"
    ));
    for (i, layer) in model.layers().iter().enumerate() {
        let input = model.layer_input_shape(i).map(shape).unwrap_or_default();
        let output = model.layer_output_shape(i).map(shape).unwrap_or_default();
        out.push_str(&format!(
            "{i:>5}  {:<10} {input:>14} {output:>14} {:>10}\n",
            layer.kind().name(),
            layer.parameter_count()
        ));
    }
    out.push_str(&format!("total parameters: {}\n", model.parameter_count()));
    out
}
