//! Prompt templates for the three enrichment steps.
//!
//! Template wording is versioned: any change here must bump
//! [`PROMPT_VERSION`], which keys the response cache and is stamped
//! into the enriched corpus file. The offline mock client keys on the
//! instruction phrases and the "Title:" / "Candidate:" / "Entities:"
//! field lines, so those markers are part of the template contract.

use crate::data::NewsRecord;

pub const PROMPT_VERSION: &str = "v1";

/// Step 1: ask for a clearer rewrite of the headline.
pub fn direct_prompt_text(news: &NewsRecord) -> String {
    format!(
        "You are an editor improving news headlines for a recommender system.\n\
         Rewrite the headline below so it is clearer and more informative while staying faithful to the article.\n\
         Respond with the rewritten headline only, on a single line.\n\
         \n\
         Title: {}\n\
         Abstract: {}\n\
         Category: {}\n",
        news.title, news.abstract_text, news.category
    )
}

/// Step 2: ask for the entities the article is about.
pub fn explore_prompt_text(news: &NewsRecord) -> String {
    format!(
        "List the named entities (people, places, organizations, works) most relevant to this news article.\n\
         Respond with the entity names only, one per line, no numbering.\n\
         \n\
         Title: {}\n\
         Abstract: {}\n\
         Category: {}\n",
        news.title, news.abstract_text, news.category
    )
}

/// Step 3: ask for a final title grounded in the verified entities.
pub fn refine_prompt_text(news: &NewsRecord, candidate_title: &str, entity_names: &[&str]) -> String {
    format!(
        "Refine the candidate headline below into a final, compelling headline that aligns with the listed entities.\n\
         Use at most 40 words. Respond with the final headline only, on a single line.\n\
         \n\
         Candidate: {}\n\
         Entities: {}\n\
         Original title: {}\n\
         Abstract: {}\n",
        candidate_title,
        entity_names.join(", "),
        news.title,
        news.abstract_text
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> NewsRecord {
        NewsRecord {
            news_id: "N1".into(),
            category: "sports".into(),
            subcategory: "golf".into(),
            title: "Tiger Woods wins again".into(),
            abstract_text: "A comeback story.".into(),
            title_entities: vec![],
        }
    }

    #[test]
    fn templates_carry_their_markers_and_fields() {
        let n = sample();
        let direct = direct_prompt_text(&n);
        assert!(direct.contains("Rewrite the headline"));
        assert!(direct.contains("Title: Tiger Woods wins again"));
        assert!(direct.contains("Abstract: A comeback story."));

        let explore = explore_prompt_text(&n);
        assert!(explore.contains("one per line"));
        assert!(explore.contains("Title: Tiger Woods wins again"));

        let refine = refine_prompt_text(&n, "Cand title", &["Tiger Woods", "PGA"]);
        assert!(refine.contains("Refine"));
        assert!(refine.contains("Candidate: Cand title"));
        assert!(refine.contains("Entities: Tiger Woods, PGA"));
        assert!(refine.contains("at most 40 words"));
    }

    #[test]
    fn refine_with_no_entities_keeps_field_line() {
        let refine = refine_prompt_text(&sample(), "Cand", &[]);
        assert!(refine.contains("Entities: \n"));
    }
}
