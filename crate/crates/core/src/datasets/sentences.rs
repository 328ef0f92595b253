use std::ops::Range;

/// Words whose final period never ends a sentence.
pub const ABBREVIATIONS: &[&str] = &["Mr.", "Mrs.", "Ms.", "Dr.", "e.g.", "i.e.", "etc.", "vs.", "U.S."];

const TERMINALS: &[char] = &['.', '!', '?'];
const CLOSERS: &[char] = &['"', '\'', ')', ']', '}', '\u{201d}', '\u{2019}', '\u{bb}'];
const OPENERS: &[char] = &['"', '\'', '(', '[', '{', '\u{201c}', '\u{2018}', '\u{ab}'];

fn is_abbreviation(word: &str) -> bool {
    let word = word.trim_start_matches(OPENERS);
    if ABBREVIATIONS.contains(&word) {
        return true;
    }
    let mut chars = word.chars();
    matches!((chars.next(), chars.next(), chars.next()), (Some(c), Some('.'), None) if c.is_uppercase())
}

/// Splits `text` into sentence byte ranges, trimmed of surrounding
/// whitespace. A break follows a run of `.`, `!` or `?` (plus any closing
/// quotes or brackets) when whitespace and then an uppercase letter or digit
/// come next, unless the run is a single period ending a known abbreviation
/// or an initial.
pub fn split_sentences(text: &str) -> Vec<Range<usize>> {
    let bytes_end = text.len();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let at = |k: usize| chars.get(k).map(|&(_, c)| c);
    let offset = |k: usize| chars.get(k).map_or(bytes_end, |&(o, _)| o);

    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let mut last_non_ws_end = 0;
    let mut k = 0;
    while k < chars.len() {
        let (o, c) = chars[k];
        if c.is_whitespace() {
            k += 1;
            continue;
        }
        start.get_or_insert(o);
        last_non_ws_end = o + c.len_utf8();
        if !TERMINALS.contains(&c) {
            k += 1;
            continue;
        }
        let run_start = k;
        let mut j = k;
        while at(j).is_some_and(|c| TERMINALS.contains(&c)) {
            j += 1;
        }
        let run_end = j;
        while at(j).is_some_and(|c| CLOSERS.contains(&c)) {
            j += 1;
        }
        let mut n = j;
        while at(n).is_some_and(char::is_whitespace) {
            n += 1;
        }
        let boundary = n > j
            && at(n).is_some_and(|c| c.is_uppercase() || c.is_ascii_digit())
            && !(run_end - run_start == 1 && c == '.' && {
                let word_start = chars[..run_start]
                    .iter()
                    .rposition(|&(_, c)| c.is_whitespace())
                    .map_or(0, |p| p + 1);
                is_abbreviation(&text[offset(word_start)..offset(run_end)])
            });
        let end = offset(j);
        last_non_ws_end = end;
        if boundary {
            if let Some(s) = start.take() {
                out.push(s..end);
            }
        }
        k = j;
    }
    if let Some(s) = start {
        out.push(s..last_non_ws_end);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(t: &str) -> Vec<&str> {
        split_sentences(t).into_iter().map(|r| &t[r]).collect()
    }

    #[test]
    fn basic_splits() {
        assert_eq!(texts("One. Two! Three? four."), vec!["One.", "Two!", "Three? four."]);
        assert_eq!(texts("  Built in 1068.  It fell in 1200.\n"), vec!["Built in 1068.", "It fell in 1200."]);
        assert_eq!(texts("Ends. 42 is next."), vec!["Ends.", "42 is next."]);
        assert_eq!(texts("No terminal here"), vec!["No terminal here"]);
        assert!(texts("   ").is_empty());
    }

    #[test]
    fn abbreviations_do_not_split() {
        assert_eq!(texts("Mr. Smith met Dr. Jones. Then left."), vec!["Mr. Smith met Dr. Jones.", "Then left."]);
        assert_eq!(texts("Fruit, e.g. Apples, etc. Are good."), vec!["Fruit, e.g. Apples, etc. Are good."]);
        assert_eq!(texts("The U.S. Army arrived."), vec!["The U.S. Army arrived."]);
        assert_eq!(texts("J. R. Tolkien wrote. It sold."), vec!["J. R. Tolkien wrote.", "It sold."]);
    }

    #[test]
    fn closers_and_runs() {
        assert_eq!(texts("He said \"stop.\" Then ran."), vec!["He said \"stop.\"", "Then ran."]);
        assert_eq!(texts("Really?! Yes."), vec!["Really?!", "Yes."]);
        assert_eq!(texts("(A note.) Next one."), vec!["(A note.)", "Next one."]);
        assert_eq!(texts("v1.2 is out. Done."), vec!["v1.2 is out.", "Done."]);
    }

    proptest! {
        #[test]
        fn ranges_ordered_trimmed_and_in_bounds(s in "[ a-zA-Z0-9.!?\"()\u{e9}\u{201d}\n]{0,80}") {
            let rs = split_sentences(&s);
            let mut prev = 0;
            for r in &rs {
                prop_assert!(r.start >= prev && r.start < r.end && r.end <= s.len());
                prop_assert!(s.is_char_boundary(r.start) && s.is_char_boundary(r.end));
                let t = &s[r.clone()];
                prop_assert_eq!(t.trim(), t);
                prev = r.end;
            }
            let covered: String = rs.iter().map(|r| &s[r.clone()]).collect::<Vec<_>>().concat();
            let all: String = s.chars().filter(|c| !c.is_whitespace()).collect();
            let got: String = covered.chars().filter(|c| !c.is_whitespace()).collect();
            prop_assert_eq!(got, all);
        }
    }
}
