use curata_core::prompt::PromptTemplate;
use curata_core::scoring::{
    askllm_score, askllm_scorer_id, perplexity_score, perplexity_scorer_id, Outcome, ScoreBatch, ScoredExample,
    YES_TOKEN,
};
use curata_core::ExampleRecord;
use futures::stream::{self, StreamExt};

use crate::client::{ScoringClient, SequenceNllRequest, TokenScoreRequest};

/// Runs `jobs` with at most `limit` in flight and returns results in input
/// order.
async fn ordered<F, T>(limit: usize, jobs: impl Iterator<Item = F>) -> Vec<T>
where
    F: std::future::Future<Output = T>,
{
    let mut done: Vec<(usize, T)> = stream::iter(jobs.enumerate().map(|(i, f)| async move { (i, f.await) }))
        .buffer_unordered(limit.max(1))
        .collect()
        .await;
    done.sort_unstable_by_key(|(i, _)| *i);
    done.into_iter().map(|(_, t)| t).collect()
}

fn unscored(reason: impl ToString) -> Outcome {
    Outcome::Unscored {
        reason: reason.to_string(),
    }
}

/// Scores every example by the probability of "yes" after its prompt.
/// Failures become [`Outcome::Unscored`]; the run always covers every
/// example.
pub async fn askllm_score_all<C: ScoringClient + ?Sized>(
    client: &C,
    template: &PromptTemplate,
    examples: &[ExampleRecord],
) -> ScoreBatch {
    let jobs = examples.iter().map(|ex| async move {
        let rendered = match template.render(ex) {
            Ok(r) => r,
            Err(e) => {
                return ScoredExample {
                    id: ex.id.clone(),
                    outcome: unscored(e),
                    truncated: false,
                }
            }
        };
        let request = TokenScoreRequest::new(rendered.prompt, YES_TOKEN);
        let outcome = match client.score_token(&ex.id, &request).await {
            Ok(lp) => askllm_score(lp).map_or_else(unscored, Outcome::Scored),
            Err(e) => unscored(e),
        };
        ScoredExample {
            id: ex.id.clone(),
            outcome,
            truncated: rendered.truncated,
        }
    });
    ScoreBatch {
        scorer_id: askllm_scorer_id(client.model_id(), template),
        entries: ordered(client.max_in_flight(), jobs).await,
    }
}

/// Scores every example by its negated perplexity under the client's model.
pub async fn perplexity_score_all<C: ScoringClient + ?Sized>(client: &C, examples: &[ExampleRecord]) -> ScoreBatch {
    let jobs = examples.iter().map(|ex| async move {
        let outcome = if !ex.is_scorable() {
            unscored("empty text")
        } else {
            match client.sequence_nll(&ex.id, &SequenceNllRequest::new(ex.text.as_str())).await {
                Ok(r) => perplexity_score(r.nll, r.token_count).map_or_else(unscored, Outcome::Scored),
                Err(e) => unscored(e),
            }
        };
        ScoredExample {
            id: ex.id.clone(),
            outcome,
            truncated: false,
        }
    });
    ScoreBatch {
        scorer_id: perplexity_scorer_id(client.model_id()),
        entries: ordered(client.max_in_flight(), jobs).await,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::MockClient;

    fn examples(n: usize) -> Vec<ExampleRecord> {
        (0..n)
            .map(|i| ExampleRecord::new(format!("e{i}"), format!("example number {i} with some words")))
            .collect()
    }

    #[tokio::test]
    async fn askllm_preserves_order_and_ids() {
        let client = MockClient::new().max_in_flight(3);
        let tpl = PromptTemplate::new("### {text} ### Keep? yes/no").unwrap();
        let ex = examples(20);
        let batch = askllm_score_all(&client, &tpl, &ex).await;
        assert_eq!(batch.entries.len(), 20);
        for (e, x) in batch.entries.iter().zip(&ex) {
            assert_eq!(e.id, x.id);
            let Outcome::Scored(s) = e.outcome else { panic!() };
            assert!(s > 0.0 && s <= 1.0);
        }
        assert!(batch.scorer_id.starts_with("askllm/mock/tpl-"));
    }

    #[tokio::test]
    async fn empty_text_is_unscored_not_dropped() {
        let client = MockClient::new();
        let mut ex = examples(3);
        ex[1].text = "   ".into();
        let batch = perplexity_score_all(&client, &ex).await;
        assert_eq!(batch.entries.len(), 3);
        assert_eq!(batch.scored_count(), 2);
        assert_eq!(batch.unscored().next().unwrap().0, "e1");
        for r in batch.records() {
            assert!(r.raw_score <= -1.0);
        }
        let tpl = PromptTemplate::new("{text}?").unwrap();
        assert_eq!(askllm_score_all(&client, &tpl, &ex).await.scored_count(), 2);
    }

    #[tokio::test]
    async fn permutation_equivariant() {
        let client = MockClient::new();
        let tpl = PromptTemplate::new("{text}?").unwrap();
        let ex = examples(10);
        let mut rev = ex.clone();
        rev.reverse();
        let a = askllm_score_all(&client, &tpl, &ex).await;
        let mut b = askllm_score_all(&client, &tpl, &rev).await;
        b.entries.reverse();
        assert_eq!(a, b);
    }
}
