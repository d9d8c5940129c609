use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use hdm_core::audio::{augment_with, read_wav, resample, write_wav, AugmentOverrides, WavEncoding};
use hdm_core::corpus::{
    corpus_stats, extract_hdm_events, map_act_tags, parse_corpus, parse_corpus_with, read_events,
    write_events, CsvOptions,
};
use hdm_core::detectors::PromptTemplate;
use hdm_core::eval::{compare as compare_reports, mccv_registry, run_mccv};
use hdm_core::export::export_finetune as export_records;
use hdm_core::rng::rng_for;
use hdm_core::streamer::{export_signal_csv, render_plot_svg, stream_scores};
use hdm_core::synth::{synthesize, SynthConfig};
use hdm_core::timeline::{build_dataset as sample_dataset, read_examples};
use hdm_core::{
    ActTagMap, AudioStore, AugmentConfig, Corpus, CorpusFormat, Detector, DetectorConfig,
    DetectorKind, EvalReport, HdmEvent, HotwordLexicon, MccvConfig, MockConfig, MockServer,
    MockService, RefinementList, Registry, SamplingConfig, StreamConfig, CANONICAL_RATE_HZ,
};

use crate::{
    AugmentArgs, BuildDatasetArgs, Classify, CliError, CliResult, CompareArgs, DetectorArgs,
    EvaluateArgs, ExportArgs, ImportArgs, MockServeArgs, SamplingArgs, StreamArgs, SynthArgs,
};

fn read_input(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).invalid(&format!("cannot read {}", path.display()))
}

fn write_output(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).runtime(&format!("cannot write {}", path.display()))
}

fn load_corpus(path: &Path) -> CliResult<Corpus> {
    parse_corpus(&read_input(path)?, CorpusFormat::NormalizedJsonl).invalid(&path.display().to_string())
}

fn load_events(path: &Path, corpus: Option<&Corpus>) -> CliResult<Vec<HdmEvent>> {
    let events = read_events(&read_input(path)?).invalid(&path.display().to_string())?;
    if let Some(c) = corpus {
        c.check_events(&events).invalid(&path.display().to_string())?;
    }
    Ok(events)
}

fn audio_base(corpus_path: &Path, audio_dir: Option<&PathBuf>) -> PathBuf {
    match audio_dir {
        Some(d) => d.clone(),
        None => corpus_path.parent().map(Path::to_path_buf).unwrap_or_default(),
    }
}

fn load_audio(corpus: &Corpus, base: &Path) -> CliResult<AudioStore> {
    AudioStore::load_for_corpus(corpus, base).invalid("loading audio")
}

fn mccv_config(a: &SamplingArgs) -> CliResult<MccvConfig> {
    let config = MccvConfig {
        k: a.k,
        test_frac: a.test_frac,
        sampling: SamplingConfig {
            context_s: a.context_s,
            min_elapsed_s: a.min_elapsed_s,
            neg_ratio: a.ratio,
            seed: a.seed,
            ..SamplingConfig::default()
        },
        seed: a.seed,
    };
    config.validate().invalid("invalid sampling flags")?;
    Ok(config)
}

fn build_detector(a: &DetectorArgs, force_meta: bool) -> CliResult<Detector> {
    let kind: DetectorKind = a.detector.parse().invalid("--detector")?;
    let endpoint = a
        .endpoint
        .clone()
        .ok_or_else(|| CliError::Invalid("--endpoint or HDM_ENDPOINT is required".into()))?;
    let mut config = DetectorConfig::new(kind).with_endpoint(endpoint);
    config.timeout_s = a.timeout_s;
    config.max_retries = a.retries;
    config.backoff_ms = a.backoff_ms;
    config.in_flight = a.in_flight;
    config.shots = a.shots;
    config.attach_meta = a.attach_meta || force_meta || kind == DetectorKind::LmText;
    config.validate().invalid("invalid detector flags")?;
    let mut detector = Detector::from_config(config).invalid("detector")?;
    if let Some(path) = &a.lexicon {
        let text = String::from_utf8(read_input(path)?).invalid(&path.display().to_string())?;
        detector = detector.with_lexicon(HotwordLexicon::from_text(&text).invalid(&path.display().to_string())?);
    }
    if let Some(path) = &a.prompt {
        let variant = kind
            .prompt_variant()
            .ok_or_else(|| CliError::Invalid(format!("--prompt does not apply to the {kind} detector")))?;
        let text = String::from_utf8(read_input(path)?).invalid(&path.display().to_string())?;
        let template = PromptTemplate::from_text(variant, &text).invalid(&path.display().to_string())?;
        detector = detector.with_template(template).invalid("--prompt")?;
    }
    Ok(detector)
}

fn json_bytes<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("value serializes");
    out.push(b'\n');
    out
}

pub fn synth(a: SynthArgs) -> CliResult<()> {
    let config = SynthConfig {
        conversations: a.conversations,
        events_per_conv: a.events_per_conv,
        decoys_per_conv: a.decoys_per_conv,
        duration_s: a.duration_s,
        seed: a.seed,
        ..SynthConfig::default()
    };
    let data = synthesize(&config).invalid("synth")?;
    data.write_dir(&a.out_dir).runtime(&format!("writing {}", a.out_dir.display()))?;
    println!(
        "wrote {} conversations, {} events to {}",
        data.corpus.len(),
        data.events.len(),
        a.out_dir.display()
    );
    Ok(())
}

pub fn import(a: ImportArgs) -> CliResult<()> {
    let format: CorpusFormat = a.format.parse().invalid("--format")?;
    let options = CsvOptions {
        sample_rate_hz: a.sample_rate,
        audio_dir: a.audio_dir.clone(),
    };
    let mut corpus = parse_corpus_with(&read_input(&a.input)?, format, &options).invalid(&a.input.display().to_string())?;
    let map = match (&a.tagmap, a.no_tagmap, format) {
        (Some(path), _, _) => Some(ActTagMap::from_json(&read_input(path)?).invalid(&path.display().to_string())?),
        (None, false, CorpusFormat::UtteranceCsv) => Some(ActTagMap::swda_damsl()),
        _ => None,
    };
    if let Some(map) = map {
        corpus = map_act_tags(&corpus, &map).invalid("mapping act tags")?;
    }
    let refinement = match &a.refinement {
        Some(path) => {
            let text = String::from_utf8(read_input(path)?).invalid(&path.display().to_string())?;
            RefinementList::parse(&text).invalid(&path.display().to_string())?
        }
        None => RefinementList::new(),
    };
    let events = extract_hdm_events(&corpus, &a.target_tag, &refinement).invalid("refinement")?;
    write_output(&a.out, &corpus.to_jsonl())?;
    if let Some(path) = &a.events_out {
        write_output(path, &write_events(&events))?;
    }
    if let Some(path) = &a.stats_out {
        write_output(path, &json_bytes(&corpus_stats(&corpus, &events)))?;
    }
    println!("{} conversations, {} events", corpus.len(), events.len());
    Ok(())
}

pub fn build_dataset(a: BuildDatasetArgs) -> CliResult<()> {
    let config = mccv_config(&a.sampling)?;
    let corpus = load_corpus(&a.corpus)?;
    let events = load_events(&a.events, Some(&corpus))?;
    let store = match &a.registry {
        Some(_) => Some(load_audio(&corpus, &audio_base(&a.corpus, a.audio_dir.as_ref()))?),
        None => None,
    };
    let dataset = sample_dataset(&corpus, &events, &config.sampling).invalid("sampling")?;
    write_output(&a.out, &dataset.to_jsonl())?;
    if let (Some(path), Some(store)) = (&a.registry, &store) {
        let mut registry = mccv_registry(&corpus, &events, store, &config).runtime("building registry")?;
        registry.register_examples(store, &dataset.examples).runtime("building registry")?;
        if registry.conflicts() > 0 {
            log::warn!("{} windows share audio with a different window", registry.conflicts());
        }
        write_output(path, &registry.to_bytes())?;
    }
    println!(
        "{} positives, {} negatives, {} events dropped",
        dataset.positive_count(),
        dataset.negative_count(),
        dataset.dropped_events
    );
    Ok(())
}

pub fn augment(a: AugmentArgs) -> CliResult<()> {
    let config = AugmentConfig {
        apply_prob: a.prob,
        seed: a.seed,
        ..AugmentConfig::default()
    };
    config.validate().invalid("augment flags")?;
    let w = read_wav(&read_input(&a.input)?).invalid(&a.input.display().to_string())?;
    let w = if w.sample_rate_hz() == CANONICAL_RATE_HZ { w } else { resample(&w, CANONICAL_RATE_HZ) };
    let overrides = AugmentOverrides {
        noise_amp: a.noise,
        stretch_rate: a.stretch,
        pitch_semitones: a.pitch,
    };
    let mut rng = rng_for(a.seed, &["augment"]);
    let (out, trace) = augment_with(&w, &config, &overrides, &mut rng).invalid("augment")?;
    write_output(&a.out, &write_wav(&out, WavEncoding::Pcm16))?;
    println!("{}", serde_json::to_string(&trace).expect("trace serializes"));
    Ok(())
}

pub fn mock_serve(a: MockServeArgs) -> CliResult<()> {
    let corpus = load_corpus(&a.corpus)?;
    let events = load_events(&a.events, Some(&corpus))?;
    let registry = match &a.registry {
        Some(path) => Registry::from_bytes(&read_input(path)?).invalid(&path.display().to_string())?,
        None => Registry::new(),
    };
    let config = MockConfig {
        word_drop_prob: a.wer,
        score_noise_sigma: a.noise,
        miscalibration_bias: a.bias,
        seed: a.seed,
        port: a.port,
    };
    if a.threads == 0 {
        return Err(CliError::Invalid("--threads must be at least 1".into()));
    }
    let service = MockService::new(corpus, &events, registry, config).invalid("mock config")?;
    let server = MockServer::start(Arc::new(service), &format!("{}:{}", a.host, a.port), a.threads)
        .runtime("starting server")?;
    println!("listening on {}", server.url());
    let _ = std::io::stdout().flush();
    server.join();
    Ok(())
}

pub fn evaluate(a: EvaluateArgs) -> CliResult<()> {
    let config = mccv_config(&a.sampling)?;
    let detector = build_detector(&a.detector, false)?;
    let corpus = load_corpus(&a.corpus)?;
    let events = load_events(&a.events, Some(&corpus))?;
    let store = load_audio(&corpus, &audio_base(&a.corpus, a.audio_dir.as_ref()))?;
    let report = run_mccv(&corpus, &events, &store, &detector, &config).runtime("evaluation")?;
    write_output(&a.out, &report.to_json())?;
    println!(
        "{}: avg_f1 {:.4} over {} folds ({} skipped)",
        report.detector,
        report.avg_f1,
        report.folds.len(),
        report.skipped.len()
    );
    Ok(())
}

pub fn stream(a: StreamArgs) -> CliResult<()> {
    let detector = build_detector(&a.detector, true)?;
    let conversation_id = a
        .conversation_id
        .clone()
        .or_else(|| a.audio.file_stem().map(|s| s.to_string_lossy().into_owned()));
    let config = StreamConfig {
        window_s: a.window_s,
        hop_ms: a.hop_ms,
        conversation_id: conversation_id.clone(),
    };
    let events = match &a.events {
        Some(path) => Some(load_events(path, None)?),
        None => None,
    };
    let audio = read_wav(&read_input(&a.audio)?).invalid(&a.audio.display().to_string())?;
    let mut signal = stream_scores(&audio, &detector, &config).map_err(|e| match e {
        hdm_core::streamer::StreamError::Detector(_) => CliError::Runtime(format!("streaming: {e}")),
        other => CliError::Invalid(format!("streaming: {other}")),
    })?;
    if let Some(events) = events {
        let own = events
            .into_iter()
            .filter(|e| conversation_id.as_deref().is_none_or(|id| e.conversation_id == id))
            .collect();
        signal = signal.with_ground_truth(own);
    }
    write_output(&a.out, &export_signal_csv(&signal))?;
    if let Some(path) = &a.plot {
        write_output(path, &render_plot_svg(&signal).runtime("plot")?)?;
    }
    println!("{} scores", signal.len());
    Ok(())
}

pub fn compare(a: CompareArgs) -> CliResult<()> {
    let ra = EvalReport::from_json(&read_input(&a.a)?).invalid(&a.a.display().to_string())?;
    let rb = EvalReport::from_json(&read_input(&a.b)?).invalid(&a.b.display().to_string())?;
    let result = compare_reports(&ra, &rb).invalid("compare")?;
    print!("{}", String::from_utf8(json_bytes(&result)).expect("utf-8 json"));
    Ok(())
}

pub fn export_finetune(a: ExportArgs) -> CliResult<()> {
    let augmentation = if a.augment {
        let cfg = AugmentConfig {
            apply_prob: a.augment_prob,
            seed: a.seed,
            ..AugmentConfig::default()
        };
        cfg.validate().invalid("augment flags")?;
        Some(cfg)
    } else {
        None
    };
    let examples = read_examples(&read_input(&a.dataset)?).invalid(&a.dataset.display().to_string())?;
    let corpus = load_corpus(&a.corpus)?;
    let store = load_audio(&corpus, &audio_base(&a.corpus, a.audio_dir.as_ref()))?;
    let bytes = export_records(&examples, &store, a.seed, augmentation.as_ref()).runtime("export")?;
    write_output(&a.out, &bytes)?;
    println!("{} records", bytes.iter().filter(|b| **b == b'\n').count());
    Ok(())
}
