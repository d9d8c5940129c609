use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::client::{ClassifyRequest, HttpClient, LogprobsRequest, ModelClient, TranscribeRequest, WindowMeta};
use super::hotword::{detect_hotword, HotwordLexicon};
use super::prompt::{build_prompt, pn_probability, FewShotSet, PromptTemplate, PromptVariant, ShotContent};
use super::{DetectorError, Score, WindowInput};
use crate::audio::{encode_window_wav, AudioStore};
use crate::timeline::ExampleSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    Hotword,
    LmAudio,
    LmText,
    Classifier,
}

impl DetectorKind {
    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Hotword => "hotword",
            DetectorKind::LmAudio => "lm-audio",
            DetectorKind::LmText => "lm-text",
            DetectorKind::Classifier => "classifier",
        }
    }

    pub fn prompt_variant(self) -> Option<PromptVariant> {
        match self {
            DetectorKind::LmAudio => Some(PromptVariant::Audio),
            DetectorKind::LmText => Some(PromptVariant::TextOnly),
            _ => None,
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = DetectorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hotword" => Ok(DetectorKind::Hotword),
            "lm-audio" => Ok(DetectorKind::LmAudio),
            "lm-text" => Ok(DetectorKind::LmText),
            "classifier" => Ok(DetectorKind::Classifier),
            other => Err(DetectorError::InvalidConfig(format!("unknown detector {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    pub endpoint: Option<String>,
    pub timeout_s: f64,
    pub max_retries: u32,
    pub backoff_ms: u64,
    /// Concurrent requests per detector.
    pub in_flight: usize,
    /// Few-shot examples per prompt (LM detectors only).
    pub shots: usize,
    /// Send conversation id and end time alongside each request.
    pub attach_meta: bool,
}

impl DetectorConfig {
    pub fn new(kind: DetectorKind) -> Self {
        Self {
            kind,
            endpoint: None,
            timeout_s: 30.0,
            max_retries: 3,
            backoff_ms: 100,
            in_flight: 4,
            shots: 0,
            attach_meta: false,
        }
    }

    pub fn with_endpoint(mut self, url: impl Into<String>) -> Self {
        self.endpoint = Some(url.into());
        self
    }

    pub fn validate(&self) -> Result<(), DetectorError> {
        if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
            return Err(DetectorError::InvalidConfig(format!("timeout {} s", self.timeout_s)));
        }
        if self.in_flight == 0 {
            return Err(DetectorError::InvalidConfig("in_flight must be at least 1".into()));
        }
        if self.shots % 2 != 0 {
            return Err(DetectorError::OddShotCount(self.shots));
        }
        if self.shots > 0 && self.kind.prompt_variant().is_none() {
            return Err(DetectorError::InvalidConfig(format!(
                "{} detector does not take few-shot examples",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn http_client(&self) -> Result<HttpClient, DetectorError> {
        let endpoint = self
            .endpoint
            .as_deref()
            .ok_or_else(|| DetectorError::MissingEndpoint(self.kind.to_string()))?;
        Ok(HttpClient::new(
            endpoint,
            Duration::from_secs_f64(self.timeout_s),
            self.max_retries,
            Duration::from_millis(self.backoff_ms),
        ))
    }
}

/// A configured scoring function over windows.
#[derive(Clone)]
pub struct Detector {
    config: DetectorConfig,
    client: Arc<dyn ModelClient>,
    lexicon: HotwordLexicon,
    template: Option<PromptTemplate>,
    fewshot: FewShotSet<ShotContent>,
}

impl fmt::Debug for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Detector")
            .field("config", &self.config)
            .field("fewshot", &self.fewshot.len())
            .finish()
    }
}

impl Detector {
    pub fn new(config: DetectorConfig, client: Arc<dyn ModelClient>) -> Result<Self, DetectorError> {
        config.validate()?;
        Ok(Self {
            template: config.kind.prompt_variant().map(PromptTemplate::for_variant),
            config,
            client,
            lexicon: HotwordLexicon::default(),
            fewshot: FewShotSet::empty(),
        })
    }

    /// Detector talking HTTP to `config.endpoint`.
    pub fn from_config(config: DetectorConfig) -> Result<Self, DetectorError> {
        let client = Arc::new(config.http_client()?);
        Self::new(config, client)
    }

    pub fn with_lexicon(mut self, lexicon: HotwordLexicon) -> Self {
        self.lexicon = lexicon;
        self
    }

    pub fn with_template(mut self, template: PromptTemplate) -> Result<Self, DetectorError> {
        if self.config.kind.prompt_variant() != Some(template.variant()) {
            return Err(DetectorError::ModalityMismatch(format!(
                "{:?} template does not fit the {} detector",
                template.variant(),
                self.config.kind
            )));
        }
        self.template = Some(template);
        Ok(self)
    }

    pub fn with_fewshot(mut self, fewshot: FewShotSet<ShotContent>) -> Self {
        self.fewshot = fewshot;
        self
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn kind(&self) -> DetectorKind {
        self.config.kind
    }

    pub fn client(&self) -> &Arc<dyn ModelClient> {
        &self.client
    }

    fn meta(&self, conversation_id: Option<&str>, end_time_s: f64) -> Option<WindowMeta> {
        match (self.config.attach_meta, conversation_id) {
            (true, Some(id)) => Some(WindowMeta {
                conversation_id: id.to_string(),
                end_time_s,
            }),
            _ => None,
        }
    }

    fn transcript_of(&self, window: &WindowInput) -> Result<String, DetectorError> {
        if let Some(t) = &window.transcript {
            return Ok(t.clone());
        }
        let resp = self.client.transcribe(&TranscribeRequest {
            audio_b64: B64.encode(encode_window_wav(&window.waveform)),
            meta: self.meta(window.conversation_id.as_deref(), window.end_time_s),
        })?;
        Ok(resp.transcript)
    }

    pub fn score_window(&self, window: &WindowInput) -> Result<Score, DetectorError> {
        match self.config.kind {
            DetectorKind::Hotword => Ok(detect_hotword(&self.transcript_of(window)?, &self.lexicon)),
            DetectorKind::LmAudio | DetectorKind::LmText => {
                let template = self.template.as_ref().expect("LM detectors always carry a template");
                let payload = if self.config.kind == DetectorKind::LmText && window.transcript.is_none() {
                    let with_text = window.clone().with_transcript(self.transcript_of(window)?);
                    build_prompt(template, &self.fewshot, &with_text)?
                } else {
                    build_prompt(template, &self.fewshot, window)?
                };
                let resp = self.client.logprobs(&LogprobsRequest {
                    prompt: payload.prompt,
                    segments: payload.segments,
                    meta: self.meta(window.conversation_id.as_deref(), window.end_time_s),
                })?;
                pn_probability(resp.logprob_p, resp.logprob_n)
            }
            DetectorKind::Classifier => {
                let resp = self.client.classify(&ClassifyRequest {
                    audio_b64: B64.encode(encode_window_wav(&window.waveform)),
                    meta: self.meta(window.conversation_id.as_deref(), window.end_time_s),
                })?;
                Score::new(resp.probability).map_err(|_| {
                    DetectorError::MalformedResponse(format!("probability {} outside [0, 1]", resp.probability))
                })
            }
        }
    }

    /// Score many windows with at most `in_flight` concurrent requests.
    /// Results come back in input order.
    pub fn score_windows(&self, windows: &[WindowInput]) -> Vec<Result<Score, DetectorError>> {
        let workers = self.config.in_flight.min(windows.len()).max(1);
        if workers == 1 {
            return windows.iter().map(|w| self.score_window(w)).collect();
        }
        let next = AtomicUsize::new(0);
        let results: Mutex<Vec<Option<Result<Score, DetectorError>>>> =
            Mutex::new((0..windows.len()).map(|_| None).collect());
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= windows.len() {
                        break;
                    }
                    let r = self.score_window(&windows[i]);
                    results.lock().expect("no worker panics while holding the lock")[i] = Some(r);
                });
            }
        });
        results
            .into_inner()
            .expect("workers joined")
            .into_iter()
            .map(|r| r.expect("every index scored"))
            .collect()
    }

    /// Turn sampled few-shot examples into prompt content: context audio for
    /// the audio prompt, transcripts of that audio for the text prompt.
    pub fn prepare_fewshot(
        &self,
        specs: FewShotSet<ExampleSpec>,
        store: &AudioStore,
    ) -> Result<FewShotSet<ShotContent>, DetectorError> {
        let variant = self.config.kind.prompt_variant();
        specs.try_map(|spec| {
            let audio = store.window(&spec)?;
            match variant {
                Some(PromptVariant::TextOnly) => {
                    let w = WindowInput::new(audio, spec.t_s).with_conversation(spec.conversation_id.clone());
                    Ok(ShotContent::Transcript(self.transcript_of(&w)?))
                }
                _ => Ok(ShotContent::Audio(audio)),
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::Waveform;
    use crate::detectors::client::{ClassifyResponse, LogprobsResponse, TranscribeResponse};
    use crate::timeline::Label;

    /// Answers from fixed values, recording requests.
    struct Canned {
        transcript: String,
        logprobs: (f64, f64),
        probability: f64,
        seen: Mutex<Vec<String>>,
    }

    impl Canned {
        fn new() -> Self {
            Self {
                transcript: "Pardon?".into(),
                logprobs: (-0.4, -0.4),
                probability: 0.8,
                seen: Mutex::new(Vec::new()),
            }
        }
    }

    impl ModelClient for Canned {
        fn transcribe(&self, req: &TranscribeRequest) -> Result<TranscribeResponse, DetectorError> {
            self.seen.lock().unwrap().push(format!("transcribe {:?}", req.meta));
            Ok(TranscribeResponse {
                transcript: self.transcript.clone(),
            })
        }
        fn logprobs(&self, req: &LogprobsRequest) -> Result<LogprobsResponse, DetectorError> {
            self.seen.lock().unwrap().push(format!("logprobs {}", req.segments.len()));
            Ok(LogprobsResponse {
                logprob_p: self.logprobs.0,
                logprob_n: self.logprobs.1,
            })
        }
        fn classify(&self, _: &ClassifyRequest) -> Result<ClassifyResponse, DetectorError> {
            Ok(ClassifyResponse {
                probability: self.probability,
            })
        }
    }

    fn window() -> WindowInput {
        WindowInput::new(Waveform::silence(4.0, 16000), 10.0).with_conversation("c1")
    }

    #[test]
    fn hotword_transcribes_then_matches() {
        let client = Arc::new(Canned::new());
        let d = Detector::new(DetectorConfig::new(DetectorKind::Hotword), client.clone()).unwrap();
        assert_eq!(d.score_window(&window()).unwrap(), Score::ONE);
        assert_eq!(client.seen.lock().unwrap()[0], "transcribe None");
        // A supplied transcript skips the endpoint.
        assert_eq!(d.score_window(&window().with_transcript("fine thanks")).unwrap(), Score::ZERO);
        assert_eq!(client.seen.lock().unwrap().len(), 1);
    }

    #[test]
    fn lm_audio_equal_logprobs_is_half() {
        let d = Detector::new(DetectorConfig::new(DetectorKind::LmAudio), Arc::new(Canned::new())).unwrap();
        assert_eq!(d.score_window(&window()).unwrap().value(), 0.5);
    }

    #[test]
    fn lm_text_transcribes_first() {
        let client = Arc::new(Canned::new());
        let mut config = DetectorConfig::new(DetectorKind::LmText);
        config.attach_meta = true;
        let d = Detector::new(config, client.clone()).unwrap();
        d.score_window(&window()).unwrap();
        let seen = client.seen.lock().unwrap();
        assert!(seen[0].starts_with("transcribe Some"));
        assert_eq!(seen[1], "logprobs 0");
    }

    #[test]
    fn classifier_rejects_out_of_range() {
        let mut canned = Canned::new();
        canned.probability = 1.5;
        let d = Detector::new(DetectorConfig::new(DetectorKind::Classifier), Arc::new(canned)).unwrap();
        assert!(matches!(d.score_window(&window()), Err(DetectorError::MalformedResponse(_))));
    }

    #[test]
    fn concurrent_scoring_keeps_order() {
        struct ByEnd;
        impl ModelClient for ByEnd {
            fn transcribe(&self, _: &TranscribeRequest) -> Result<TranscribeResponse, DetectorError> {
                unreachable!()
            }
            fn logprobs(&self, _: &LogprobsRequest) -> Result<LogprobsResponse, DetectorError> {
                unreachable!()
            }
            fn classify(&self, req: &ClassifyRequest) -> Result<ClassifyResponse, DetectorError> {
                let t = req.meta.as_ref().unwrap().end_time_s;
                thread::sleep(Duration::from_millis((7 * t as u64) % 5));
                Ok(ClassifyResponse { probability: t / 100.0 })
            }
        }
        let mut config = DetectorConfig::new(DetectorKind::Classifier);
        config.attach_meta = true;
        let d = Detector::new(config, Arc::new(ByEnd)).unwrap();
        let windows: Vec<WindowInput> = (0..40)
            .map(|i| WindowInput::new(Waveform::silence(0.01, 16000), i as f64).with_conversation("c"))
            .collect();
        let scores: Vec<f64> = d.score_windows(&windows).into_iter().map(|r| r.unwrap().value()).collect();
        let expected: Vec<f64> = (0..40).map(|i| i as f64 / 100.0).collect();
        assert_eq!(scores, expected);
    }

    #[test]
    fn config_validation() {
        let mut c = DetectorConfig::new(DetectorKind::LmAudio);
        c.shots = 3;
        assert!(c.validate().is_err());
        let mut c = DetectorConfig::new(DetectorKind::Hotword);
        c.shots = 2;
        assert!(c.validate().is_err());
        let c = DetectorConfig::new(DetectorKind::Classifier);
        assert!(matches!(c.http_client(), Err(DetectorError::MissingEndpoint(_))));
        assert_eq!("lm-text".parse::<DetectorKind>().unwrap(), DetectorKind::LmText);
        assert!("gemini".parse::<DetectorKind>().is_err());
    }

    #[test]
    fn template_must_match_kind() {
        let d = Detector::new(DetectorConfig::new(DetectorKind::LmAudio), Arc::new(Canned::new())).unwrap();
        assert!(d.with_template(PromptTemplate::text_only()).is_err());
    }

    #[test]
    fn fewshot_preparation() {
        let mut store = AudioStore::new();
        store.insert("c", Waveform::silence(20.0, 16000));
        let specs = FewShotSet::new(vec![
            (ExampleSpec::at("c", 6.0, 4.0, Label::Positive), Label::Positive),
            (ExampleSpec::at("c", 12.0, 4.0, Label::Negative), Label::Negative),
        ])
        .unwrap();
        let audio = Detector::new(DetectorConfig::new(DetectorKind::LmAudio), Arc::new(Canned::new())).unwrap();
        let prepared = audio.prepare_fewshot(specs.clone(), &store).unwrap();
        assert!(matches!(&prepared.items()[0].0, ShotContent::Audio(w) if w.len() == 64_000));
        let text = Detector::new(DetectorConfig::new(DetectorKind::LmText), Arc::new(Canned::new())).unwrap();
        let prepared = text.prepare_fewshot(specs, &store).unwrap();
        assert_eq!(prepared.items()[1].0, ShotContent::Transcript("Pardon?".into()));
    }
}
