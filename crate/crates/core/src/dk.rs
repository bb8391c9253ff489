//! Mining "Don't know" demonstrations from the model's own mistakes.
//!
//! Pure object generation is run on pairs from the reference KB. Pairs the
//! model gets wrong become abstention examples; pairs it gets right become
//! ordinary examples with the gold answer.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{CompletionBackend, CompletionRequest, Decoding, LIST_MAX_TOKENS};
use crate::error::{Error, Result};
use crate::graph::{EntityName, RelationName, DEFAULT_DEDUP_THRESHOLD};
use crate::prompt::{build_qa_prompt, object_query, parse_object_answer, ObjectAnswer};
use crate::reference::{join_list, InContextExample, ReferenceKb, DONT_KNOW};
use crate::text::{normalize, token_f1};

pub const DEFAULT_DK_EXAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeVerdict {
    Correct,
    Wrong,
    Abstained,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DkProbeResult {
    pub subject: EntityName,
    pub relation: RelationName,
    pub gold_objects: Vec<EntityName>,
    pub predicted: ObjectAnswer,
    pub verdict: ProbeVerdict,
}

impl DkProbeResult {
    fn query(&self) -> String {
        object_query(self.subject.as_str(), self.relation.as_str())
    }
}

/// A prediction matches gold on normalized equality or token F1 of at
/// least the dedup threshold.
pub fn matches_gold(predicted: &str, gold: &str) -> bool {
    normalize(predicted) == normalize(gold) || token_f1(predicted, gold) >= DEFAULT_DEDUP_THRESHOLD
}

pub fn judge(predicted: &ObjectAnswer, gold: &[EntityName]) -> ProbeVerdict {
    match predicted {
        ObjectAnswer::DontKnow => ProbeVerdict::Abstained,
        ObjectAnswer::Objects(objs) => {
            let hit = objs
                .iter()
                .any(|o| gold.iter().any(|g| matches_gold(o.as_str(), g.as_str())));
            if hit {
                ProbeVerdict::Correct
            } else {
                ProbeVerdict::Wrong
            }
        }
    }
}

/// Runs greedy pure object generation on each pair and grades it against
/// the reference KB. Results keep the input order; a failing pair yields an
/// `Err` in its slot without stopping the batch.
pub fn probe(
    kb: &ReferenceKb,
    backend: &dyn CompletionBackend,
    pure_examples: &[InContextExample],
    pairs: &[(EntityName, RelationName)],
    max_in_flight: usize,
) -> Result<Vec<Result<DkProbeResult>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(max_in_flight.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    use rayon::prelude::*;
    Ok(pool.install(|| {
        pairs
            .par_iter()
            .map(|(s, r)| {
                let fact = kb.get(s.as_str(), r.as_str()).ok_or_else(|| {
                    Error::Config(format!("pair {:?} is not in the reference KB", object_query(s.as_str(), r.as_str())))
                })?;
                let req = CompletionRequest::new(
                    build_qa_prompt(pure_examples, &object_query(s.as_str(), r.as_str())),
                    Decoding::Greedy,
                    LIST_MAX_TOKENS,
                );
                let resp = backend.complete(&req)?;
                let predicted = parse_object_answer(&resp.texts[0]);
                let verdict = judge(&predicted, &fact.objects);
                Ok(DkProbeResult {
                    subject: s.clone(),
                    relation: r.clone(),
                    gold_objects: fact.objects.clone(),
                    predicted,
                    verdict,
                })
            })
            .collect()
    }))
}

/// Builds `k_dk` demonstrations: half "Don't know" answers for pairs the
/// model got wrong, half gold answers for pairs it got right, shuffled with
/// `rng_seed`.
pub fn build_dk_examples(results: &[DkProbeResult], k_dk: usize, rng_seed: u64) -> Result<Vec<InContextExample>> {
    if k_dk == 0 || !k_dk.is_multiple_of(2) {
        return Err(Error::Config(format!("k_dk must be a positive even number, got {k_dk}")));
    }
    let half = k_dk / 2;
    let mut seen = HashSet::new();
    let mut wrong = Vec::new();
    let mut correct = Vec::new();
    for r in results {
        if r.verdict == ProbeVerdict::Abstained || !seen.insert(normalize(&r.query())) {
            continue;
        }
        match r.verdict {
            ProbeVerdict::Wrong => wrong.push(r),
            ProbeVerdict::Correct => correct.push(r),
            ProbeVerdict::Abstained => {}
        }
    }
    if wrong.len() < half {
        return Err(Error::Insufficient {
            what: "wrong probe results",
            needed: half,
            available: wrong.len(),
        });
    }
    if correct.len() < half {
        return Err(Error::Insufficient {
            what: "correct probe results",
            needed: half,
            available: correct.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut examples = Vec::with_capacity(k_dk);
    for r in wrong.choose_multiple(&mut rng, half) {
        examples.push(InContextExample::new(r.query(), DONT_KNOW)?);
    }
    for r in correct.choose_multiple(&mut rng, half) {
        let answer = join_list(r.gold_objects.iter().map(EntityName::as_str));
        examples.push(InContextExample::new(r.query(), answer)?);
    }
    examples.shuffle(&mut rng);
    Ok(examples)
}
