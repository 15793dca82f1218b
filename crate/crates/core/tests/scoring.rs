mod common;

use common::naive_score;
use moralscope::moral::{score_tweet, toy_lexicon, Foundation, Polarity};
use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FILLER: [&str; 8] = ["the", "city", "today", "people", "news", "report", "water", "road"];

fn fuzzed_tweet(rng: &mut impl Rng, lexicon_words: &[String]) -> Vec<String> {
    let len = rng.random_range(0..25);
    (0..len)
        .map(|_| {
            if rng.random_bool(0.4) {
                lexicon_words.choose(rng).unwrap().clone()
            } else {
                FILLER.choose(rng).unwrap().to_string()
            }
        })
        .collect()
}

fn assert_same(tokens: &[String]) {
    let lexicon = toy_lexicon();
    let ours = score_tweet(tokens, &lexicon);
    let naive = naive_score(tokens, &lexicon);
    for f in Foundation::ALL {
        let (a, b) = (ours.get(f), naive.get(f));
        assert_eq!(a.polarity, b.polarity, "{f:?} on {tokens:?}");
        assert_eq!(a.matched, b.matched, "{f:?} on {tokens:?}");
        assert!((a.loading - b.loading).abs() < 1e-12, "{f:?}: {} vs {}", a.loading, b.loading);
    }
}

#[test]
fn toy_lexicon_has_twenty_words() {
    assert_eq!(toy_lexicon().len(), 20);
}

#[test]
fn score_matches_naive_enumeration() {
    let lexicon = toy_lexicon();
    let words: Vec<String> = lexicon.entries().iter().map(|e| e.word.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let tokens = fuzzed_tweet(&mut rng, &words);
        assert_same(&tokens);
        let score = score_tweet(&tokens, &lexicon);
        for f in Foundation::ALL {
            let fs = score.get(f);
            let vice = fs.loading_for(Polarity::Vice);
            let virtue = fs.loading_for(Polarity::Virtue);
            assert!(vice == 0.0 || virtue == 0.0, "both poles loaded for {f:?}");
            if fs.polarity == Polarity::None {
                assert_eq!(fs.loading, 0.0);
            }
        }
    }
}

proptest! {
    #[test]
    fn exclusivity_holds(idx in proptest::collection::vec(0usize..28, 0..30)) {
        let lexicon = toy_lexicon();
        let mut pool: Vec<String> = lexicon.entries().iter().map(|e| e.word.clone()).collect();
        pool.extend(FILLER.iter().map(|s| s.to_string()));
        let tokens: Vec<String> = idx.iter().map(|&i| pool[i].clone()).collect();
        let score = score_tweet(&tokens, &lexicon);
        for f in Foundation::ALL {
            let fs = score.get(f);
            let loaded = [fs.loading_for(Polarity::Vice), fs.loading_for(Polarity::Virtue)];
            prop_assert!(loaded.iter().filter(|&&x| x > 0.0).count() <= 1);
            prop_assert!(fs.loading >= 0.0 && fs.loading <= 1.0);
        }
    }

    #[test]
    fn token_order_is_irrelevant(idx in proptest::collection::vec(0usize..28, 0..30), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let lexicon = toy_lexicon();
        let mut pool: Vec<String> = lexicon.entries().iter().map(|e| e.word.clone()).collect();
        pool.extend(FILLER.iter().map(|s| s.to_string()));
        let tokens: Vec<String> = idx.iter().map(|&i| pool[i].clone()).collect();
        let mut shuffled = tokens.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (a, b) = (score_tweet(&tokens, &lexicon), score_tweet(&shuffled, &lexicon));
        for f in Foundation::ALL {
            prop_assert_eq!(a.get(f).polarity, b.get(f).polarity);
            prop_assert!((a.get(f).loading - b.get(f).loading).abs() < 1e-12);
        }
    }
}
