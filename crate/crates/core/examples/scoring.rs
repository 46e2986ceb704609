//! Turn per-document clarity counts into language scores, universe ranks
//! and quintile ratings, under both a constant and a step scaling factor.
//!
//! ```text
//! cargo run --example scoring
//! ```

use anyhow::Result;
use esg_clarity::scoring::{language_score, score_universe, ClarityCounts, Scaling, ScoreConfig, StepBucket};

fn main() -> Result<()> {
    let universe = vec![
        ClarityCounts::new("alpha", 6, 2, 3),
        ClarityCounts::new("beta", 1, 4, 5),
        ClarityCounts::new("gamma", 3, 0, 1),
        ClarityCounts::new("delta", 0, 3, 6),
        ClarityCounts::new("epsilon", 9, 3, 0),
        ClarityCounts::new("zeta", 2, 2, 2),
        ClarityCounts::new("eta", 4, 1, 1),
    ];

    let constant = ScoreConfig::default();
    let report = score_universe(&universe, &constant);
    print!("{}", report.to_csv());

    // reward funds that are specific more often, not just in proportion
    let step = ScoreConfig {
        scaling: Scaling::Step {
            buckets: vec![
                StepBucket {
                    min_specific: 0,
                    factor: 1.0,
                },
                StepBucket {
                    min_specific: 3,
                    factor: 1.5,
                },
                StepBucket {
                    min_specific: 8,
                    factor: 2.0,
                },
            ],
        },
        ..ScoreConfig::default()
    };
    step.validate()?;
    println!("\nwith {}:", step.version());
    for c in &universe {
        let s = language_score(c, &step);
        println!(
            "{:<8} ratio {:.3} x {:.1} = {:.3}",
            s.doc_id, s.ratio, s.scaling_factor, s.score
        );
    }
    let stepped = score_universe(&universe, &step);
    for row in &stepped.rows {
        println!("{:<8} rank {} rating {}", row.doc_id, row.rank, row.rating);
    }
    Ok(())
}
