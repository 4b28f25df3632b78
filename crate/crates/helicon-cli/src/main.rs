//! Command-line front end: tension analysis, key estimation, track-role
//! classification, model training, corpus generation, and batch runs.
//!
//! Exit codes: 0 success, 1 runtime failure (unreadable or malformed
//! input, unwritable output, training failure), 2 usage error (bad
//! flags, missing model directory). Standard output carries data only;
//! diagnostics go to standard error.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};

use helicon::classify::{
    assign_roles, evaluate_role, extract_features, extract_tracks, keyword_role,
    load_model, parse_label_file, save_model, split_by_song, train_forest, EvalTable,
    ForestParams, KeywordTable, LabeledTrack, Role, RoleAssignment, RoleModels,
};
use helicon::config::Config;
use helicon::midi::{build_note_list, parse_smf, write_smf, MidiFile, Note, TimeSigMap};
use helicon::report::{strain_svg, tension_csv, AnalysisReport, DiagnosticsReport};
use helicon::tension::{
    compute_tension, detect_key_changes_with, rekeyed_series, ChangeDirection,
};
use helicon::tonal::analyze_key;

pub const MODEL_DIR_ENV: &str = "HELICON_MODEL_DIR";
const MODEL_FILES: [(&str, Role); 3] = [
    ("melody.hfor", Role::Melody),
    ("bass.hfor", Role::Bass),
    ("harmony.hfor", Role::Harmony),
];

#[derive(Parser)]
#[command(name = "helicon", version, about = "MIDI tonal tension and track-role analysis")]
struct Cli {
    /// Configuration file with key = value overrides.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute cloud diameter, cloud momentum, and tensile strain.
    Tension(TensionArgs),
    /// Estimate the global key of a MIDI file.
    Key(KeyArgs),
    /// Score each track against trained role models.
    Classify(ClassifyArgs),
    /// Write a copy keeping only the melody, bass, and harmony tracks.
    Extract(ExtractArgs),
    /// Train role models from a labeled corpus and print an evaluation table.
    Train(TrainArgs),
    /// Run one analysis over every MIDI file in a directory.
    Batch(BatchArgs),
    /// Generate a deterministic synthetic corpus with a label file.
    GenCorpus(GenCorpusArgs),
}

#[derive(Args)]
struct TensionArgs {
    /// Input MIDI file.
    file: PathBuf,
    /// Analysis window length in beats.
    #[arg(long, default_value_t = 2.0)]
    window: f64,
    /// Write the JSON report here instead of standard output.
    #[arg(long, value_name = "FILE")]
    out_json: Option<PathBuf>,
    /// Write per-window CSV here.
    #[arg(long, value_name = "FILE")]
    out_csv: Option<PathBuf>,
    /// Write an SVG plot of per-bar tensile strain here.
    #[arg(long, value_name = "FILE")]
    out_svg: Option<PathBuf>,
    /// Re-estimate the key per segment between detected key changes and
    /// recompute strain against each segment's key.
    #[arg(long)]
    rekey: bool,
    /// SVG plot width in pixels.
    #[arg(long, default_value_t = 800)]
    svg_width: u32,
    /// SVG plot height in pixels.
    #[arg(long, default_value_t = 400)]
    svg_height: u32,
}

#[derive(Args)]
struct KeyArgs {
    /// Input MIDI file.
    file: PathBuf,
    /// Print JSON instead of plain text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Input MIDI file.
    file: PathBuf,
    /// Directory holding melody.hfor, bass.hfor, harmony.hfor.
    #[arg(long, value_name = "DIR")]
    model_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    /// Input MIDI file.
    file: PathBuf,
    /// Directory holding melody.hfor, bass.hfor, harmony.hfor.
    #[arg(long, value_name = "DIR")]
    model_dir: Option<PathBuf>,
    /// Output MIDI path.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Label file: tab-separated file_id, track_index, role.
    #[arg(long, value_name = "FILE")]
    labels: PathBuf,
    /// Directory of .mid training files.
    #[arg(long, value_name = "DIR")]
    corpus: PathBuf,
    /// Directory to write the three model files into.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Random seed for the split and the forests.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Trees per forest.
    #[arg(long, default_value_t = 100)]
    trees: usize,
    /// Maximum tree depth.
    #[arg(long, default_value_t = 12)]
    depth: usize,
}

#[derive(Args)]
struct BatchArgs {
    /// Directory of .mid files to process.
    dir: PathBuf,
    /// Write one report file per input here.
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Worker threads; changes wall time, never outputs.
    #[arg(long)]
    jobs: Option<usize>,
    #[command(subcommand)]
    op: BatchOp,
}

#[derive(Subcommand)]
enum BatchOp {
    /// Tension analysis per file; reports written to --out-dir.
    Tension {
        #[arg(long, default_value_t = 2.0)]
        window: f64,
        #[arg(long)]
        rekey: bool,
    },
    /// Key estimate per file, recorded in the summary.
    Key,
    /// Role assignment per file, recorded in the summary.
    Classify {
        #[arg(long, value_name = "DIR")]
        model_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GenCorpusArgs {
    /// Directory to write songs and labels.tsv into.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Number of songs.
    #[arg(long, default_value_t = 600)]
    count: usize,
    /// Generator seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

/// Failures carrying their process exit code.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Failure {
        Failure::Usage(msg.into())
    }
    fn runtime(msg: impl std::fmt::Display) -> Failure {
        Failure::Runtime(msg.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn main() {
    let cli = Cli::parse();
    let code = match dispatch(cli) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    };
    std::process::exit(code);
}

fn dispatch(cli: Cli) -> CliResult {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Tension(args) => cmd_tension(args, &cfg),
        Command::Key(args) => cmd_key(args, &cfg),
        Command::Classify(args) => cmd_classify(args),
        Command::Extract(args) => cmd_extract(args),
        Command::Train(args) => cmd_train(args, &cfg),
        Command::Batch(args) => cmd_batch(args, &cfg),
        Command::GenCorpus(args) => cmd_gen_corpus(args),
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, Failure> {
    match path {
        Some(p) => Config::load(p).map_err(|e| Failure::usage(format!("config {}: {e}", p.display()))),
        None => Ok(Config::default()),
    }
}

fn read_midi(path: &Path) -> Result<MidiFile, Failure> {
    let bytes = std::fs::read(path)
        .map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
    parse_smf(&bytes).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))
}

fn write_output(path: &Path, data: &[u8]) -> CliResult {
    std::fs::write(path, data).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))
}

/// One full tension analysis; shared by the single-file and batch paths.
fn tension_report(
    path: &Path,
    window: f64,
    rekey: bool,
    cfg: &Config,
) -> Result<(AnalysisReport, TimeSigMap), Failure> {
    let midi = read_midi(path)?;
    let (notes, sigs, diag) = build_note_list(&midi);
    let drum_notes = notes.iter().filter(|n| n.is_drum()).count();
    let (spelled, key) = analyze_key(&notes, &cfg.spiral)
        .map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
    let mut series = compute_tension(&spelled, key.key, window, &sigs, &cfg.spiral);
    if cfg.change_direction != ChangeDirection::Backward {
        series.key_changes = detect_key_changes_with(&series, &sigs, cfg.change_direction);
    }
    let segments = if rekey {
        let (rekeyed, segs) = rekeyed_series(&spelled, &series, &sigs, &cfg.spiral);
        series = rekeyed;
        Some(segs)
    } else {
        None
    };
    let report = AnalysisReport::new(
        path.display().to_string(),
        &key,
        series,
        segments.as_deref(),
        DiagnosticsReport::new(diag, drum_notes),
    );
    Ok((report, sigs))
}

fn cmd_tension(args: TensionArgs, cfg: &Config) -> CliResult {
    if !(args.window > 0.0) {
        return Err(Failure::usage("--window must be a positive number of beats"));
    }
    let (report, sigs) = tension_report(&args.file, args.window, args.rekey, cfg)?;
    if let Some(path) = &args.out_csv {
        write_output(path, tension_csv(&report.tension, &sigs).as_bytes())?;
    }
    if let Some(path) = &args.out_svg {
        write_output(
            path,
            strain_svg(&report.tension, args.svg_width, args.svg_height).as_bytes(),
        )?;
    }
    let json = report.to_json();
    match &args.out_json {
        Some(path) => write_output(path, json.as_bytes())?,
        None => println!("{json}"),
    }
    Ok(())
}

fn cmd_key(args: KeyArgs, cfg: &Config) -> CliResult {
    let midi = read_midi(&args.file)?;
    let (notes, _, _) = build_note_list(&midi);
    let (_, key) = analyze_key(&notes, &cfg.spiral)
        .map_err(|e| Failure::runtime(format!("{}: {e}", args.file.display())))?;
    if args.json {
        let value = serde_json::json!({
            "schema_version": helicon::report::SCHEMA_VERSION,
            "tonic_name": key.tonic_name(),
            "mode": key.key.mode.as_str(),
            "confidence": key.confidence,
        });
        println!("{}", serde_json::to_string_pretty(&value).expect("static shape"));
    } else {
        println!("{} (confidence {:.4})", key.full_name(), key.confidence);
    }
    Ok(())
}

/// Resolves the model directory from the flag or the environment and
/// loads the three role models. Missing directory or files are usage
/// errors; unreadable or corrupt contents are runtime errors.
fn load_models(flag: Option<&Path>) -> Result<RoleModels, Failure> {
    let dir = match flag {
        Some(d) => d.to_path_buf(),
        None => match std::env::var_os(MODEL_DIR_ENV) {
            Some(v) => PathBuf::from(v),
            None => {
                return Err(Failure::usage(format!(
                    "no model directory; pass --model-dir or set {MODEL_DIR_ENV}"
                )))
            }
        },
    };
    if !dir.is_dir() {
        return Err(Failure::usage(format!("model directory {} not found", dir.display())));
    }
    let mut loaded = Vec::with_capacity(3);
    for (file, role) in MODEL_FILES {
        let path = dir.join(file);
        if !path.is_file() {
            return Err(Failure::usage(format!("model file {} not found", path.display())));
        }
        let bytes = std::fs::read(&path)
            .map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
        let model = load_model(&bytes)
            .map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
        if model.role != role {
            return Err(Failure::runtime(format!(
                "{}: holds a {} model, expected {}",
                path.display(),
                model.role.as_str(),
                role.as_str()
            )));
        }
        loaded.push(model);
    }
    let mut it = loaded.into_iter();
    Ok(RoleModels {
        melody: it.next().expect("three models"),
        bass: it.next().expect("three models"),
        harmony: it.next().expect("three models"),
    })
}

fn assignment_lines(midi: &MidiFile, assignment: &RoleAssignment) -> String {
    let role_of = |track: usize| -> &str {
        if assignment.melody == Some(track) {
            "melody"
        } else if assignment.bass == Some(track) {
            "bass"
        } else if assignment.harmony.contains(&track) {
            "harmony"
        } else {
            "discarded"
        }
    };
    let mut out = String::new();
    for s in &assignment.scores {
        let name = midi
            .tracks
            .get(s.track)
            .and_then(|t| t.name_lossy())
            .unwrap_or_default();
        out.push_str(&format!(
            "track {} {:?}: melody={:.3} bass={:.3} harmony={:.3} -> {}\n",
            s.track,
            name,
            s.melody,
            s.bass,
            s.harmony,
            role_of(s.track)
        ));
    }
    out
}

fn cmd_classify(args: ClassifyArgs) -> CliResult {
    let models = load_models(args.model_dir.as_deref())?;
    let midi = read_midi(&args.file)?;
    let assignment = assign_roles(&midi, &models);
    if assignment.scores.is_empty() {
        eprintln!("no scorable tracks in {}", args.file.display());
    }
    print!("{}", assignment_lines(&midi, &assignment));
    Ok(())
}

fn cmd_extract(args: ExtractArgs) -> CliResult {
    let models = load_models(args.model_dir.as_deref())?;
    let midi = read_midi(&args.file)?;
    let assignment = assign_roles(&midi, &models);
    if assignment.assigned_in_role_order().is_empty() {
        eprintln!(
            "no tracks assigned in {}; writing tempo-only file",
            args.file.display()
        );
    }
    let filtered = extract_tracks(&midi, &assignment);
    write_output(&args.out, &write_smf(&filtered))?;
    print!("{}", assignment_lines(&midi, &assignment));
    Ok(())
}

/// Per-track note lists of one song, with the merged song list.
fn notes_by_track(midi: &MidiFile) -> (Vec<Note>, BTreeMap<usize, Vec<Note>>) {
    let (notes, _, _) = build_note_list(midi);
    let mut per_track: BTreeMap<usize, Vec<Note>> = BTreeMap::new();
    for n in &notes {
        per_track.entry(n.track).or_default().push(*n);
    }
    (notes, per_track)
}

fn gather_labeled_tracks(
    corpus: &Path,
    label_map: &BTreeMap<(String, usize), BTreeSet<Role>>,
    keywords: &KeywordTable,
) -> Result<Vec<LabeledTrack>, Failure> {
    let mut data = Vec::new();
    for path in midi_files(corpus)? {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let midi = match read_midi(&path) {
            Ok(m) => m,
            Err(Failure::Runtime(msg)) | Err(Failure::Usage(msg)) => {
                eprintln!("skipping {}: {msg}", path.display());
                continue;
            }
        };
        let (song_notes, per_track) = notes_by_track(&midi);
        for (track_index, track_notes) in &per_track {
            let labels: BTreeSet<Role> =
                match label_map.get(&(stem.clone(), *track_index)) {
                    Some(set) => set.clone(),
                    None => {
                        let name = midi
                            .tracks
                            .get(*track_index)
                            .and_then(|t| t.name_lossy())
                            .unwrap_or_default();
                        match keyword_role(&name, keywords) {
                            Some(role) => BTreeSet::from([role]),
                            None => continue,
                        }
                    }
                };
            match extract_features(track_notes, &song_notes) {
                Ok(features) => data.push(LabeledTrack {
                    features,
                    labels,
                    file_id: stem.clone(),
                    track_index: *track_index,
                }),
                Err(e) => eprintln!("skipping {} track {track_index}: {e}", path.display()),
            }
        }
    }
    Ok(data)
}

fn cmd_train(args: TrainArgs, cfg: &Config) -> CliResult {
    if args.trees == 0 {
        return Err(Failure::usage("--trees must be at least 1"));
    }
    if args.depth == 0 {
        return Err(Failure::usage("--depth must be at least 1"));
    }
    let label_text = std::fs::read_to_string(&args.labels)
        .map_err(|e| Failure::runtime(format!("{}: {e}", args.labels.display())))?;
    let entries = parse_label_file(&label_text)
        .map_err(|e| Failure::runtime(format!("{}: {e}", args.labels.display())))?;
    let mut label_map: BTreeMap<(String, usize), BTreeSet<Role>> = BTreeMap::new();
    for (file_id, track_index, role) in entries {
        label_map.entry((file_id, track_index)).or_default().insert(role);
    }
    let data = gather_labeled_tracks(&args.corpus, &label_map, &cfg.keywords)?;
    if data.is_empty() {
        return Err(Failure::Runtime(format!(
            "no labeled tracks found under {}",
            args.corpus.display()
        )));
    }
    let (train_idx, test_idx) = split_by_song(&data, 0.25, args.seed);
    eprintln!(
        "training on {} tracks, evaluating on {}",
        train_idx.len(),
        test_idx.len()
    );

    let params = ForestParams {
        n_trees: args.trees,
        max_depth: args.depth,
        seed: args.seed,
        ..ForestParams::default()
    };
    let train_features: Vec<_> = train_idx.iter().map(|&i| data[i].features).collect();
    std::fs::create_dir_all(&args.out)
        .map_err(|e| Failure::runtime(format!("{}: {e}", args.out.display())))?;

    let mut rows = Vec::new();
    for role in Role::ALL {
        let train_labels: Vec<bool> =
            train_idx.iter().map(|&i| data[i].labels.contains(&role)).collect();
        let model = train_forest(&train_features, &train_labels, role, params)
            .map_err(Failure::runtime)?;
        let predictions: Vec<bool> = test_idx
            .iter()
            .map(|&i| {
                helicon::classify::predict(&model, &data[i].features).expect("same width") > 0.5
            })
            .collect();
        let truth: Vec<bool> = test_idx.iter().map(|&i| data[i].labels.contains(&role)).collect();
        rows.extend(evaluate_role(role, &predictions, &truth));
        let path = args.out.join(format!("{}.hfor", role.as_str()));
        write_output(&path, &save_model(&model))?;
    }
    print!("{}", EvalTable { rows });
    eprintln!("wrote 3 models to {}", args.out.display());
    Ok(())
}

fn midi_files(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    if !dir.is_dir() {
        return Err(Failure::usage(format!("{} is not a directory", dir.display())));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Failure::runtime(format!("{}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .map(|ext| ext.eq_ignore_ascii_case("mid") || ext.eq_ignore_ascii_case("midi"))
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Outcome of one batch work item. Ordering and content are independent
/// of worker count.
struct BatchRow {
    file: String,
    result: Result<serde_json::Value, String>,
}

fn batch_one(path: &Path, op: &BatchOp, out_dir: Option<&Path>, cfg: &Config,
    models: Option<&RoleModels>) -> Result<serde_json::Value, Failure> {
    match op {
        BatchOp::Tension { window, rekey } => {
            let (report, _) = tension_report(path, *window, *rekey, cfg)?;
            if let Some(dir) = out_dir {
                let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                write_output(&dir.join(format!("{stem}.json")), report.to_json().as_bytes())?;
            }
            Ok(serde_json::json!({
                "windows": report.tension.windows.len(),
                "key_changes": report.tension.key_changes.len(),
            }))
        }
        BatchOp::Key => {
            let midi = read_midi(path)?;
            let (notes, _, _) = build_note_list(&midi);
            let (_, key) = analyze_key(&notes, &cfg.spiral)
                .map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
            Ok(serde_json::json!({
                "key": key.full_name(),
                "confidence": key.confidence,
            }))
        }
        BatchOp::Classify { .. } => {
            let models = models.expect("loaded before the pool starts");
            let midi = read_midi(path)?;
            let assignment = assign_roles(&midi, models);
            Ok(serde_json::json!({
                "melody": assignment.melody,
                "bass": assignment.bass,
                "harmony": assignment.harmony,
                "discarded": assignment.discarded,
            }))
        }
    }
}

fn cmd_batch(args: BatchArgs, cfg: &Config) -> CliResult {
    if let BatchOp::Tension { window, .. } = &args.op {
        if !(*window > 0.0) {
            return Err(Failure::usage("--window must be a positive number of beats"));
        }
    }
    let models = match &args.op {
        BatchOp::Classify { model_dir } => Some(load_models(model_dir.as_deref())?),
        _ => None,
    };
    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| Failure::runtime(format!("{}: {e}", dir.display())))?;
    }
    let files = midi_files(&args.dir)?;
    let jobs = args
        .jobs
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        })
        .clamp(1, files.len().max(1));

    // Shared work queue; each slot is written by exactly one worker, so
    // results are identical for any worker count.
    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<Option<BatchRow>>> = Mutex::new((0..files.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= files.len() {
                    break;
                }
                let path = &files[i];
                let result = batch_one(path, &args.op, args.out_dir.as_deref(), cfg,
                    models.as_ref())
                .map_err(|f| match f {
                    Failure::Usage(m) | Failure::Runtime(m) => m,
                });
                let row = BatchRow {
                    file: path.file_name().map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default(),
                    result,
                };
                rows.lock().expect("no panics hold the lock")[i] = Some(row);
            });
        }
    });

    let rows = rows.into_inner().expect("workers joined");
    let mut results = Vec::with_capacity(rows.len());
    let mut failures = Vec::new();
    for row in rows.into_iter().map(|r| r.expect("every slot filled")) {
        match row.result {
            Ok(value) => results.push(serde_json::json!({"file": row.file, "ok": true,
                "result": value})),
            Err(msg) => {
                failures.push(serde_json::json!({"file": row.file, "error": msg}));
                results.push(serde_json::json!({"file": row.file, "ok": false}));
            }
        }
    }
    let summary = serde_json::json!({
        "schema_version": helicon::report::SCHEMA_VERSION,
        "processed": results.len(),
        "ok": results.len() - failures.len(),
        "failed": failures.len(),
        "failures": failures,
        "results": results,
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("static shape"));
    Ok(())
}

fn cmd_gen_corpus(args: GenCorpusArgs) -> CliResult {
    if args.count == 0 {
        return Err(Failure::usage("--count must be at least 1"));
    }
    std::fs::create_dir_all(&args.out)
        .map_err(|e| Failure::runtime(format!("{}: {e}", args.out.display())))?;
    let songs = helicon::classify::gen_corpus(args.count, args.seed);
    let mut labels = String::from("# file_id\ttrack_index\trole\n");
    for song in &songs {
        write_output(
            &args.out.join(format!("{}.mid", song.name)),
            &write_smf(&song.midi),
        )?;
        for (track, role) in &song.labels {
            labels.push_str(&format!("{}\t{}\t{}\n", song.name, track, role.as_str()));
        }
    }
    write_output(&args.out.join("labels.tsv"), labels.as_bytes())?;
    eprintln!("wrote {} songs and labels.tsv to {}", songs.len(), args.out.display());
    Ok(())
}
