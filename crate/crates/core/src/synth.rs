//! Synthetic annotated conversations with audio, for tests and demos.
//!
//! Speech is imitated by harmonic tone bursts over a noise bed. Hearing
//! difficulty utterances ("huh?", "pardon?") are short, higher pitched and
//! louder. A few of them per conversation are decoys excluded through the
//! refinement list, and some ordinary sentences contain lexicon words.

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::audio::{write_wav, AudioStore, WavEncoding, Waveform};
use crate::corpus::{
    extract_hdm_events, map_act_tags, write_csv, write_events, ActTagMap, Conversation, Corpus,
    CorpusError, HdmEvent, RefinementAction, RefinementList, Utterance,
};
use crate::rng::rng_for;
use crate::SIGNAL_NON_UNDERSTANDING;

const PLAIN: &[(&str, &str)] = &[
    ("i was thinking about the weekend", "sd"),
    ("we drove up to the lake last summer", "sd"),
    ("the kids have been busy with school", "sd"),
    ("what time does the game start", "qw"),
    ("yeah that sounds right", "aa"),
    ("uh-huh", "b"),
    ("do you think it will rain tomorrow", "qy"),
    ("my neighbor just bought a new truck", "sd"),
    ("i am sorry to hear about that", "sv"),
    ("the doctor said it was nothing serious", "sd"),
    ("we should plan something for next month", "sv"),
    ("right", "b"),
    ("i read about that in the paper", "sd"),
    ("prices at the store keep going up", "sv"),
    ("she called me on tuesday", "sd"),
    ("that is a good point", "ba"),
];

const HDM: &[&str] = &[
    "huh?",
    "what?",
    "pardon?",
    "sorry?",
    "what was that?",
    "can you repeat that?",
    "i didn't catch that",
    "say again?",
];

const SPEAKERS: [&str; 2] = ["A", "B"];
const SPEAKER_F0: [f64; 2] = [120.0, 200.0];
const NOISE_STD: f64 = 0.005;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub conversations: usize,
    pub events_per_conv: usize,
    /// Extra `br` utterances excluded by the refinement list.
    pub decoys_per_conv: usize,
    pub duration_s: f64,
    pub sample_rate_hz: u32,
    pub seed: u64,
    /// Skip waveform generation when only annotations are needed.
    pub with_audio: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            conversations: 20,
            events_per_conv: 2,
            decoys_per_conv: 1,
            duration_s: 60.0,
            sample_rate_hz: crate::CANONICAL_RATE_HZ,
            seed: 0,
            with_audio: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    /// Source (SWDA-style) act tags.
    pub raw: Corpus,
    /// Tags mapped to DAMSL names.
    pub corpus: Corpus,
    pub tag_map: ActTagMap,
    pub refinement: RefinementList,
    pub events: Vec<HdmEvent>,
    pub audio: AudioStore,
}

struct Planned {
    utterance: Utterance,
    hdm: bool,
}

fn plan_conversation<R: Rng>(config: &SynthConfig, rng: &mut R) -> Result<(Vec<Planned>, Vec<usize>), CorpusError> {
    let dur = config.duration_s;
    let mut out = Vec::new();
    let mut t = rng.random_range(0.2..0.7);
    let mut speaker = 0usize;
    loop {
        let end = (t + rng.random_range(1.0..3.2f64)).min(dur - 0.2);
        if end - t < 0.6 {
            break;
        }
        let (text, tag) = PLAIN.choose(rng).expect("non-empty bank");
        out.push(Planned {
            utterance: Utterance {
                speaker_id: SPEAKERS[speaker].to_string(),
                start_s: t,
                end_s: end,
                text: text.to_string(),
                act_tag: tag.to_string(),
            },
            hdm: false,
        });
        t = end + rng.random_range(0.15..0.7);
        if rng.random_bool(0.8) {
            speaker ^= 1;
        }
    }

    // One br slot per equal slice of the time after the first context
    // window, adjacent to the previous slot only when nothing else fits.
    let wanted = config.events_per_conv + config.decoys_per_conv;
    let slice = (dur - 5.0) / wanted as f64;
    let mut chosen: Vec<usize> = Vec::new();
    for k in 0..wanted {
        let (lo, hi) = (5.0 + slice * k as f64, 5.0 + slice * (k + 1) as f64);
        let in_slice: Vec<usize> = (0..out.len())
            .filter(|&i| (lo..hi).contains(&out[i].utterance.start_s))
            .filter(|&i| chosen.last().is_none_or(|&p| i > p))
            .collect();
        let spaced: Vec<usize> = in_slice
            .iter()
            .copied()
            .filter(|&i| chosen.last().is_none_or(|&p| i >= p + 2))
            .collect();
        let options = if spaced.is_empty() { in_slice } else { spaced };
        match options.choose(rng) {
            Some(&i) => chosen.push(i),
            None => {
                return Err(CorpusError::InvalidConversation {
                    conversation_id: String::new(),
                    message: format!("no room for {wanted} planted utterances"),
                })
            }
        }
    }
    for &i in &chosen {
        let u = &mut out[i].utterance;
        u.end_s = u.start_s + rng.random_range(0.3..0.9f64).min(u.end_s - u.start_s);
        u.text = HDM.choose(rng).expect("non-empty bank").to_string();
        u.act_tag = "br".into();
        out[i].hdm = true;
    }
    chosen.shuffle(rng);
    let decoys: Vec<usize> = chosen[..config.decoys_per_conv].to_vec();
    Ok((out, decoys))
}

fn render<R: Rng>(config: &SynthConfig, plan: &[Planned], rng: &mut R) -> Waveform {
    let sr = f64::from(config.sample_rate_hz);
    let n = (config.duration_s * sr).round() as usize;
    let noise = Normal::new(0.0, NOISE_STD).expect("valid std");
    let mut samples: Vec<f64> = (0..n).map(|_| noise.sample(rng)).collect();
    for p in plan {
        let u = &p.utterance;
        let spk = SPEAKERS.iter().position(|s| *s == u.speaker_id).unwrap_or(0);
        let (f0, amp) = if p.hdm {
            (SPEAKER_F0[spk] * 1.35, 0.3)
        } else {
            (SPEAKER_F0[spk] * rng.random_range(0.9..1.1), 0.18)
        };
        let syllable_hz = rng.random_range(3.0..5.0);
        let a = (u.start_s * sr).round() as usize;
        let b = ((u.end_s * sr).round() as usize).min(n);
        let fade = (0.015 * sr) as usize;
        let mut phase = 0.0;
        for (k, s) in samples[a..b].iter_mut().enumerate() {
            let t = k as f64 / sr;
            let f = f0 * (1.0 + 0.04 * (2.0 * PI * 2.5 * t).sin());
            phase += 2.0 * PI * f / sr;
            let tone: f64 = (1..=4).map(|h| (phase * f64::from(h)).sin() / f64::from(h)).sum();
            let syll = 0.55 - 0.45 * (2.0 * PI * syllable_hz * t).cos();
            let edge = (k.min(b - a - 1 - k) as f64 / fade as f64).min(1.0);
            *s += amp * 0.5 * tone * syll * edge;
        }
    }
    Waveform::new(samples.into_iter().map(|x| x.clamp(-1.0, 1.0) as f32).collect(), config.sample_rate_hz)
        .expect("finite samples")
}

/// Generate a corpus, its refinement list, events and audio.
pub fn synthesize(config: &SynthConfig) -> Result<SynthCorpus, CorpusError> {
    if config.conversations == 0 || !(config.duration_s >= 10.0 && config.duration_s.is_finite()) {
        return Err(CorpusError::InvalidConversation {
            conversation_id: String::new(),
            message: "need at least one conversation of 10 s or more".into(),
        });
    }
    let mut conversations = Vec::new();
    let mut refinement = RefinementList::new();
    let mut audio = AudioStore::new();
    for c in 0..config.conversations {
        let id = format!("synth{c:03}");
        let mut rng = rng_for(config.seed, &["synth", &id]);
        let (plan, decoys) = plan_conversation(config, &mut rng).map_err(|e| match e {
            CorpusError::InvalidConversation { message, .. } => CorpusError::InvalidConversation {
                conversation_id: id.clone(),
                message,
            },
            other => other,
        })?;
        for d in decoys {
            refinement
                .push(RefinementAction::Exclude, &id, d)
                .expect("fresh entries never conflict");
        }
        if config.with_audio {
            let mut audio_rng = rng_for(config.seed, &["synth-audio", &id]);
            audio.insert(&id, render(config, &plan, &mut audio_rng));
        }
        conversations.push(Conversation {
            audio_ref: config.with_audio.then(|| format!("audio/{id}.wav")),
            id,
            sample_rate_hz: config.sample_rate_hz,
            duration_s: config.duration_s,
            utterances: plan.into_iter().map(|p| p.utterance).collect(),
        });
    }
    let raw = Corpus::new(conversations)?;
    let tag_map = ActTagMap::swda_damsl();
    let corpus = map_act_tags(&raw, &tag_map)?;
    let events = extract_hdm_events(&corpus, SIGNAL_NON_UNDERSTANDING, &refinement)?;
    Ok(SynthCorpus {
        raw,
        corpus,
        tag_map,
        refinement,
        events,
        audio,
    })
}

impl SynthCorpus {
    /// Write `utterances.csv`, `tagmap.json`, `refinement.txt`,
    /// `corpus.jsonl`, `events.jsonl` and `audio/<id>.wav` under `dir`.
    pub fn write_dir(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("utterances.csv"), write_csv(&self.raw))?;
        let mut map = serde_json::to_vec_pretty(&self.tag_map).map_err(std::io::Error::other)?;
        map.push(b'\n');
        std::fs::write(dir.join("tagmap.json"), map)?;
        std::fs::write(dir.join("refinement.txt"), self.refinement.to_text())?;
        std::fs::write(dir.join("corpus.jsonl"), self.corpus.to_jsonl())?;
        std::fs::write(dir.join("events.jsonl"), write_events(&self.events))?;
        if !self.audio.is_empty() {
            std::fs::create_dir_all(dir.join("audio"))?;
            for id in self.corpus.ids() {
                if let Some(w) = self.audio.get(&id) {
                    std::fs::write(dir.join("audio").join(format!("{id}.wav")), write_wav(w, WavEncoding::Pcm16))?;
                }
            }
        }
        Ok(())
    }
}
