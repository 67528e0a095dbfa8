use std::sync::OnceLock;

use regex::Regex;

/// ASCII punctuation, the same set Python's `string.punctuation` holds.
fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
}

fn articles() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b(a|an|the)\b").expect("static regex"))
}

/// Lowercase, strip punctuation, drop the articles `a`/`an`/`the`, collapse
/// whitespace, and split into tokens.
pub fn normalize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let no_punct: String = lowered.chars().filter(|c| !is_punct(*c)).collect();
    let no_articles = articles().replace_all(&no_punct, " ");
    no_articles.split_whitespace().map(str::to_owned).collect()
}

/// Keeps at most `target.len()` tokens from the front of `pred`.
pub fn truncate_to_target<'a>(pred: &'a [String], target: &[String]) -> &'a [String] {
    &pred[..pred.len().min(target.len())]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn rule_application() {
        assert_eq!(normalize("The Capital, of Germany!"), toks(&["capital", "of", "germany"]));
        assert_eq!(normalize("NYC"), toks(&["nyc"]));
        assert_eq!(normalize(""), Vec::<String>::new());
        assert_eq!(normalize("  a   an  the "), Vec::<String>::new());
        assert_eq!(normalize("Theatre and anthem"), toks(&["theatre", "and", "anthem"]));
    }

    #[test]
    fn punctuation_removal_joins_words() {
        // apostrophes vanish rather than split, as in the SQuAD reference
        assert_eq!(normalize("Côte d'Ivoire"), toks(&["côte", "divoire"]));
        assert_eq!(normalize("Saint-Étienne"), toks(&["saintétienne"]));
    }

    #[test]
    fn truncation() {
        let t = toks(&["paris", "france", "is"]);
        assert_eq!(truncate_to_target(&t, &toks(&["paris"])), &toks(&["paris"])[..]);
        let short = toks(&["berlin"]);
        assert_eq!(truncate_to_target(&short, &toks(&["new", "york"])), &short[..]);
        let nyc = toks(&["new", "york", "city", "usa"]);
        assert_eq!(
            truncate_to_target(&nyc, &toks(&["new", "york", "city"])),
            &toks(&["new", "york", "city"])[..]
        );
    }
}
