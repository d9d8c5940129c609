use rand::Rng;

use super::{Dataset, ExampleSpec, Label, Provenance, SamplingConfig, TimelineError};
use crate::corpus::{events_by_conversation, Corpus, HdmEvent};
use crate::rng::rng_for;

/// Rejection attempts allowed per requested negative.
pub const REJECTION_ATTEMPTS_PER_SAMPLE: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PositiveDraw {
    pub examples: Vec<ExampleSpec>,
    /// Events whose context window would start before time 0.
    pub dropped: usize,
}

/// One positive per usable event.
///
/// `t_s` is uniform over `[start + min_elapsed, end]`, narrowed so that the
/// context never starts before 0. Events shorter than `min_elapsed_s` use
/// `t_s = end` and are flagged `short_event`. Events ending before
/// `context_s` are dropped.
pub fn sample_positive_timesteps<R: Rng + ?Sized>(
    events: &[HdmEvent],
    config: &SamplingConfig,
    rng: &mut R,
) -> PositiveDraw {
    let mut draw = PositiveDraw::default();
    for ev in events {
        if ev.end_s < config.context_s {
            draw.dropped += 1;
            continue;
        }
        let short = ev.duration_s() < config.min_elapsed_s;
        let t_s = if short {
            ev.end_s
        } else {
            let lo = (ev.start_s + config.min_elapsed_s).max(config.context_s);
            if lo >= ev.end_s {
                ev.end_s
            } else {
                rng.random_range(lo..=ev.end_s)
            }
        };
        let mut ex = ExampleSpec::at(&ev.conversation_id, t_s, config.context_s, Label::Positive);
        ex.short_event = short;
        draw.examples.push(ex);
    }
    draw
}

/// Measure (seconds) of decision times `t` in `[context_s, duration_s]`
/// whose window `[t - context_s, t)` misses every event.
pub fn feasible_negative_mass(events: &[HdmEvent], duration_s: f64, context_s: f64) -> f64 {
    if duration_s <= context_s {
        return 0.0;
    }
    // A window ending at t overlaps [s, e) iff t ∈ (s, e + context_s).
    let mut blocked: Vec<(f64, f64)> = events
        .iter()
        .map(|e| (e.start_s.max(context_s), (e.end_s + context_s).min(duration_s)))
        .filter(|(a, b)| b > a)
        .collect();
    blocked.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut covered = 0.0;
    let mut current: Option<(f64, f64)> = None;
    for (a, b) in blocked {
        match current {
            Some((ca, cb)) if a <= cb => current = Some((ca, cb.max(b))),
            Some((ca, cb)) => {
                covered += cb - ca;
                current = Some((a, b));
            }
            None => current = Some((a, b)),
        }
    }
    if let Some((ca, cb)) = current {
        covered += cb - ca;
    }
    (duration_s - context_s - covered).max(0.0)
}

/// `count` negatives with `t_s` uniform over the feasible set, by
/// rejection sampling.
pub fn sample_negative_timesteps<R: Rng + ?Sized>(
    conversation_id: &str,
    events: &[HdmEvent],
    duration_s: f64,
    count: usize,
    config: &SamplingConfig,
    rng: &mut R,
) -> Result<Vec<ExampleSpec>, TimelineError> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let ctx = config.context_s;
    let feasible = feasible_negative_mass(events, duration_s, ctx);
    let infeasible = |attempts: usize| TimelineError::Infeasible {
        conversation_id: conversation_id.to_string(),
        requested: count,
        attempts,
        feasible_mass_s: feasible,
        span_s: (duration_s - ctx).max(0.0),
    };
    if feasible <= 0.0 {
        return Err(infeasible(0));
    }

    let max_attempts = REJECTION_ATTEMPTS_PER_SAMPLE * count;
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        if attempts == max_attempts {
            return Err(infeasible(attempts));
        }
        attempts += 1;
        let t: f64 = rng.random_range(ctx..=duration_s);
        if events.iter().all(|e| !e.overlaps(t - ctx, t)) {
            out.push(ExampleSpec::at(conversation_id, t, ctx, Label::Negative));
        }
    }
    Ok(out)
}

/// Positives from every usable event and `neg_ratio` negatives per positive,
/// drawn within the positive's own conversation.
///
/// Each conversation samples from streams keyed by `(seed, conversation_id)`,
/// so the result does not depend on conversation order.
pub fn build_dataset(
    corpus: &Corpus,
    events: &[HdmEvent],
    config: &SamplingConfig,
) -> Result<Dataset, TimelineError> {
    config.validate()?;
    corpus.check_events(events)?;
    let by_conv = events_by_conversation(events);
    let mut examples = Vec::new();
    let mut dropped = 0;
    for conv in corpus.conversations() {
        let conv_events = by_conv.get(&conv.id).map(Vec::as_slice).unwrap_or(&[]);
        let mut pos_rng = rng_for(config.seed, &["positive", &conv.id]);
        let draw = sample_positive_timesteps(conv_events, config, &mut pos_rng);
        dropped += draw.dropped;
        let n_neg = draw.examples.len() * config.neg_ratio;
        let mut neg_rng = rng_for(config.seed, &["negative", &conv.id]);
        let negatives = sample_negative_timesteps(
            &conv.id,
            conv_events,
            conv.duration_s,
            n_neg,
            config,
            &mut neg_rng,
        )?;
        examples.extend(draw.examples);
        examples.extend(negatives);
    }
    if dropped > 0 {
        log::warn!("{dropped} event(s) dropped: context window would start before 0 s");
    }
    Ok(Dataset {
        examples,
        config: config.clone(),
        provenance: Provenance {
            corpus_hash: corpus.content_hash(),
            seed: config.seed,
        },
        dropped_events: dropped,
    })
}
