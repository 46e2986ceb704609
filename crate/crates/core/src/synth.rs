//! Seeded synthetic corpora for tests, examples and benchmarks.
//!
//! Sentences are assembled from prospectus-style templates. The relevance
//! corpus is labeled by the bundled lexicon, so it is lexicon-separable by
//! construction; both classes share the same fund boilerplate vocabulary so a
//! classifier cannot succeed on sentence shape alone.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::label::{ClarityLabel, RelevanceLabel};
use crate::relevance::{weak_label_lexicon, Lexicon};

const SUBJECTS: &[&str] = &[
    "The Fund",
    "The Portfolio",
    "The Adviser",
    "The Sub-Adviser",
    "The portfolio managers",
    "The Trust",
    "The Series",
];

const ASSETS: &[&str] = &[
    "equity securities",
    "investment grade bonds",
    "common stocks",
    "money market instruments",
    "U.S. Treasury securities",
    "depositary receipts",
    "mortgage-backed securities",
    "municipal obligations",
    "exchange-traded funds",
    "convertible securities",
];

const MARKETS: &[&str] = &[
    "emerging markets",
    "developed markets",
    "the United States",
    "Europe",
    "Asia",
    "large capitalization companies",
    "small and mid-sized companies",
];

const ESG_TERMS: &[&str] = &[
    "ESG criteria",
    "climate risk",
    "carbon emissions",
    "thermal coal",
    "controversial weapons",
    "tobacco",
    "human rights",
    "board independence",
    "renewable energy",
    "green bonds",
    "sustainability ratings",
    "greenhouse gas intensity",
    "the UN Global Compact",
    "biodiversity loss",
    "gender diversity",
    "shareholder engagement",
];

const NON_ESG_TEMPLATES: &[&str] = &[
    "{S} invests at least {P}% of its net assets in {A}.",
    "{S} may invest up to {P}% of its total assets in {A} issued in {M}.",
    "{S} seeks long-term capital appreciation by investing in {A}.",
    "{S} may use derivatives such as futures and options to manage duration.",
    "{S} generally sells a security when it reaches its target price.",
    "{S} may lend portfolio securities to generate additional income.",
    "The average portfolio maturity is expected to be between {N} and {N2} years.",
    "{S} may invest in {A} of any maturity or credit quality.",
    "{S} may engage in active and frequent trading of {A}.",
    "The fiscal year of {S} ends on October {N}.",
    "{S} is non-diversified and may hold fewer than {N0} issuers.",
    "{S} focuses on {A} of companies located in {M}.",
    "{S} uses a bottom-up approach to select {A}.",
    "Under normal market conditions, {S} invests in {A} denominated in U.S. dollars.",
    "{S} may hold cash for temporary defensive purposes.",
];

const ESG_TEMPLATES: &[&str] = &[
    "{S} considers {E} when selecting {A}.",
    "{S} excludes issuers involved in {E}.",
    "{S} invests at least {P}% of its net assets in {A} of issuers with strong {E} profiles.",
    "{S} evaluates {E} as part of its research on {A} in {M}.",
    "{S} integrates {E} into the analysis of {A}.",
    "{S} screens out companies with significant exposure to {E}.",
    "{S} engages with management of companies in {M} on {E}.",
    "{S} seeks to reduce the portfolio's exposure to {E} relative to its benchmark.",
];

fn fill(template: &str, rng: &mut impl Rng) -> String {
    let mut out = template.to_string();
    let pick = |xs: &[&str], rng: &mut dyn rand::RngCore| xs[rng.gen_range(0..xs.len())].to_string();
    for (slot, value) in [
        ("{S}", pick(SUBJECTS, rng)),
        ("{A}", pick(ASSETS, rng)),
        ("{M}", pick(MARKETS, rng)),
        ("{E}", pick(ESG_TERMS, rng)),
        ("{P}", (rng.gen_range(5..=19) * 5).to_string()),
        ("{N0}", rng.gen_range(20..60).to_string()),
        ("{N2}", rng.gen_range(8..30).to_string()),
        ("{N}", rng.gen_range(1..8).to_string()),
    ] {
        out = out.replacen(slot, &value, 1);
    }
    out
}

/// `n` sentences, about `esg_fraction` of them ESG, shuffled. Labels come
/// from the bundled lexicon.
pub fn synthetic_relevance_corpus(n: usize, esg_fraction: f64, seed: u64) -> Vec<(String, RelevanceLabel)> {
    let lexicon = Lexicon::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_esg = (n as f64 * esg_fraction).round() as usize;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let pool = if i < n_esg { ESG_TEMPLATES } else { NON_ESG_TEMPLATES };
        let text = fill(pool[rng.gen_range(0..pool.len())], &mut rng);
        let label = weak_label_lexicon(&text, &lexicon);
        out.push((text, label));
    }
    out.shuffle(&mut rng);
    out
}

const SPECIFIC_TEMPLATES: &[&str] = &[
    "{S} excludes issuers that derive more than {P}% of revenue from {X}.",
    "{S} will not invest in companies that manufacture {X}.",
    "{S} excludes companies rated below {R} by {V}.",
    "{S} invests at least {P}% of net assets in green bonds certified under the {C}.",
    "{S} excludes companies in the bottom {P}% of their sector by {V} ESG score.",
    "{S} will not hold issuers found in violation of the UN Global Compact principles.",
    "{S} targets a weighted average carbon intensity at least {P}% below that of its benchmark.",
    "Companies engaged in the business of {X} or that own {P}% or more of a company engaged in this activity are excluded.",
];

const AMBIGUOUS_TEMPLATES: &[&str] = &[
    "{S} may consider ESG factors as part of its investment process.",
    "{S} believes that companies with strong ESG practices may outperform over time.",
    "ESG considerations may be one of many factors {S} evaluates.",
    "{S} generally seeks companies it views as sustainability leaders.",
    "{S} may, in its discretion, take {T} into account.",
    "{S} aims to favor issuers it believes manage {T} well.",
    "Where appropriate, {S} may engage with companies on {T}.",
    "{S} considers ESG information alongside other factors it deems relevant.",
];

const GENERIC_TEMPLATES: &[&str] = &[
    "ESG stands for environmental, social and governance.",
    "Environmental factors include {T} and resource use.",
    "Social factors relate to {T} and community relations.",
    "Governance factors include board structure and executive compensation.",
    "Sustainable investing is an approach that incorporates ESG information.",
    "{T} can affect the value of companies over the long term.",
    "Climate change is a systemic risk for the global economy.",
    "Third-party ESG data providers assess companies on {T}.",
];

const EXCLUSIONS: &[&str] = &[
    "thermal coal",
    "tobacco products",
    "controversial weapons",
    "civilian firearms",
    "oil sands",
    "adult entertainment",
    "gambling",
];

const TOPICS: &[&str] = &[
    "climate change",
    "human rights",
    "labor standards",
    "biodiversity",
    "water scarcity",
    "data privacy",
    "supply chain management",
];

fn fill_clarity(template: &str, rng: &mut impl Rng) -> String {
    let pick = |xs: &[&str], rng: &mut dyn rand::RngCore| xs[rng.gen_range(0..xs.len())].to_string();
    let mut out = template.to_string();
    for (slot, value) in [
        ("{S}", pick(SUBJECTS, rng)),
        ("{X}", pick(EXCLUSIONS, rng)),
        ("{T}", pick(TOPICS, rng)),
        ("{R}", pick(&["BB", "BBB", "A"], rng)),
        ("{V}", pick(&["MSCI", "Sustainalytics", "ISS"], rng)),
        ("{C}", pick(&["Climate Bonds Standard", "Green Bond Principles"], rng)),
        ("{P}", (rng.gen_range(1..=10) * 5).to_string()),
    ] {
        out = out.replace(slot, &value);
    }
    out
}

/// `n_per_class` sentences of each clarity class, shuffled.
pub fn synthetic_clarity_corpus(n_per_class: usize, seed: u64) -> Vec<(String, ClarityLabel)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(3 * n_per_class);
    for (label, pool) in [
        (ClarityLabel::Specific, SPECIFIC_TEMPLATES),
        (ClarityLabel::Ambiguous, AMBIGUOUS_TEMPLATES),
        (ClarityLabel::Generic, GENERIC_TEMPLATES),
    ] {
        for _ in 0..n_per_class {
            out.push((fill_clarity(pool[rng.gen_range(0..pool.len())], &mut rng), label));
        }
    }
    out.shuffle(&mut rng);
    out
}

/// A short prospectus with a strategy section holding one sentence per
/// clarity class plus non-ESG boilerplate.
pub fn fixture_prospectus() -> &'static str {
    include_str!("../data/fixture_prospectus.txt")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relevance_corpus_shape() {
        let corpus = synthetic_relevance_corpus(4000, 0.2, 1);
        assert_eq!(corpus.len(), 4000);
        let esg = corpus.iter().filter(|(_, l)| *l == RelevanceLabel::Esg).count();
        assert_eq!(esg, 800);
        assert_eq!(corpus, synthetic_relevance_corpus(4000, 0.2, 1));
    }

    #[test]
    fn non_esg_templates_never_hit_the_lexicon() {
        let lex = Lexicon::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for t in NON_ESG_TEMPLATES {
            for _ in 0..50 {
                let s = fill(t, &mut rng);
                assert!(lex.matches(&s).is_empty(), "{s}: {:?}", lex.matches(&s));
            }
        }
        for t in ESG_TEMPLATES {
            for _ in 0..50 {
                assert!(lex.is_match(&fill(t, &mut rng)));
            }
        }
    }

    #[test]
    fn clarity_corpus_is_balanced_and_filled() {
        let corpus = synthetic_clarity_corpus(40, 2);
        assert_eq!(corpus.len(), 120);
        for l in [ClarityLabel::Specific, ClarityLabel::Ambiguous, ClarityLabel::Generic] {
            assert_eq!(corpus.iter().filter(|(_, x)| *x == l).count(), 40);
        }
        assert!(corpus.iter().all(|(t, _)| !t.contains('{')));
    }
}
