//! Picking k-shot demonstrations from a scored pool: top or bottom k by
//! semantic score, simulated-user sentiment, or their sum.

use proact::corpus::{ElementKind, ProactiveResponse};
use proact::promptcraft::{
    render_demonstrations, select_demonstrations, Demonstration, SelectionCriterion,
    SelectionDirection,
};

fn main() -> proact::Result<()> {
    let mk = |q: &str, e: &str, semantic: f64, user_sim: f64| -> proact::Result<Demonstration> {
        Ok(Demonstration::new(
            q,
            ProactiveResponse::with_element("An answer.", e, ElementKind::FollowUpQuestion)?,
        )
        .with_scores(semantic, user_sim))
    };
    let pool = vec![
        mk("q0", "Want to know more about A?", 0.82, 0.40)?,
        mk("q1", "Want to know more about B?", 0.55, 0.90)?,
        mk("q2", "Want to know more about C?", 0.30, 0.10)?,
        mk("q3", "Want to know more about D?", 0.70, 0.70)?,
    ];

    for criterion in [
        SelectionCriterion::Semantic,
        SelectionCriterion::Sentiment,
        SelectionCriterion::Sum,
    ] {
        let top = select_demonstrations(&pool, 2, criterion, SelectionDirection::Top)?;
        let bottom = select_demonstrations(&pool, 2, criterion, SelectionDirection::Bottom)?;
        let names = |ds: &[Demonstration]| {
            ds.iter().map(|d| d.query.clone()).collect::<Vec<_>>().join(", ")
        };
        println!("{criterion:?}: top 2 = [{}], bottom 2 = [{}]", names(&top), names(&bottom));
    }

    // how the chosen demonstrations appear inside a prompt
    let chosen = select_demonstrations(&pool, 2, SelectionCriterion::Sum, SelectionDirection::Top)?;
    println!("\nrendered prompt block:\n{}", render_demonstrations(&chosen));
    Ok(())
}
