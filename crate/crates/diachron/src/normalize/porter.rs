//! Suffix-stripping stemmer implementing the original Porter algorithm
//! (steps 1a through 5b), operating on lowercase ASCII words.
//!
//! Words shorter than three letters and tokens containing anything outside
//! `[a-z]` are returned unchanged.

/// A letter is a consonant if it is not a/e/i/o/u, except that `y` counts
/// as a vowel when the preceding letter is a consonant.
fn is_consonant(word: &[u8], i: usize) -> bool {
    match word[i] {
        b'a' | b'e' | b'i' | b'o' | b'u' => false,
        b'y' => i == 0 || !is_consonant(word, i - 1),
        _ => true,
    }
}

/// The measure m of a stem: the number of vowel-consonant transitions
/// in its [C](VC)^m[V] decomposition.
fn measure(stem: &[u8]) -> usize {
    let n = stem.len();
    let mut i = 0;
    while i < n && is_consonant(stem, i) {
        i += 1;
    }
    let mut m = 0;
    loop {
        while i < n && !is_consonant(stem, i) {
            i += 1;
        }
        if i == n {
            return m;
        }
        m += 1;
        while i < n && is_consonant(stem, i) {
            i += 1;
        }
    }
}

fn has_vowel(stem: &[u8]) -> bool {
    (0..stem.len()).any(|i| !is_consonant(stem, i))
}

/// *d: the stem ends with a double consonant.
fn ends_double_consonant(stem: &[u8]) -> bool {
    let n = stem.len();
    n >= 2 && stem[n - 1] == stem[n - 2] && is_consonant(stem, n - 1)
}

/// *o: the stem ends consonant-vowel-consonant where the final consonant
/// is not w, x or y.
fn ends_cvc(stem: &[u8]) -> bool {
    let n = stem.len();
    n >= 3
        && is_consonant(stem, n - 3)
        && !is_consonant(stem, n - 2)
        && is_consonant(stem, n - 1)
        && !matches!(stem[n - 1], b'w' | b'x' | b'y')
}

fn ends(word: &[u8], suffix: &[u8]) -> bool {
    word.len() >= suffix.len() && &word[word.len() - suffix.len()..] == suffix
}

/// Plural and -ed/-ing stripping.
fn step_1a(word: &mut Vec<u8>) {
    if ends(word, b"sses") || ends(word, b"ies") {
        word.truncate(word.len() - 2);
    } else if ends(word, b"ss") {
        // keep
    } else if ends(word, b"s") {
        word.pop();
    }
}

fn step_1b(word: &mut Vec<u8>) {
    // Within a step only the rule with the longest matching suffix is
    // considered; if its condition fails no other rule fires ("feed" ends
    // in "eed", so the bare "ed" rule never sees it).
    if ends(word, b"eed") {
        if measure(&word[..word.len() - 3]) > 0 {
            word.pop();
        }
        return;
    }
    let stripped = if ends(word, b"ed") && has_vowel(&word[..word.len() - 2]) {
        word.truncate(word.len() - 2);
        true
    } else if ends(word, b"ing") && has_vowel(&word[..word.len() - 3]) {
        word.truncate(word.len() - 3);
        true
    } else {
        false
    };
    if stripped {
        if ends(word, b"at") || ends(word, b"bl") || ends(word, b"iz") {
            word.push(b'e');
        } else if ends_double_consonant(word) && !matches!(word[word.len() - 1], b'l' | b's' | b'z')
        {
            word.pop();
        } else if measure(word) == 1 && ends_cvc(word) {
            word.push(b'e');
        }
    }
}

fn step_1c(word: &mut Vec<u8>) {
    if ends(word, b"y") && has_vowel(&word[..word.len() - 1]) {
        let n = word.len();
        word[n - 1] = b'i';
    }
}

/// Tries suffix rules in order; rules must be listed longest suffix first.
/// The first matching suffix is the only one considered: the replacement
/// happens only if the remaining stem has measure greater than `min_m`.
fn apply_rule_list(word: &mut Vec<u8>, min_m: usize, rules: &[(&[u8], &[u8])]) {
    for (suffix, replacement) in rules {
        if ends(word, suffix) {
            let stem_len = word.len() - suffix.len();
            if measure(&word[..stem_len]) > min_m {
                word.truncate(stem_len);
                word.extend_from_slice(replacement);
            }
            return;
        }
    }
}

fn step_2(word: &mut Vec<u8>) {
    apply_rule_list(
        word,
        0,
        &[
            (b"ational", b"ate"),
            (b"ization", b"ize"),
            (b"iveness", b"ive"),
            (b"fulness", b"ful"),
            (b"ousness", b"ous"),
            (b"tional", b"tion"),
            (b"biliti", b"ble"),
            (b"entli", b"ent"),
            (b"ousli", b"ous"),
            (b"ation", b"ate"),
            (b"alism", b"al"),
            (b"aliti", b"al"),
            (b"iviti", b"ive"),
            (b"enci", b"ence"),
            (b"anci", b"ance"),
            (b"izer", b"ize"),
            (b"abli", b"able"),
            (b"alli", b"al"),
            (b"ator", b"ate"),
            (b"eli", b"e"),
        ],
    );
}

fn step_3(word: &mut Vec<u8>) {
    apply_rule_list(
        word,
        0,
        &[
            (b"icate", b"ic"),
            (b"ative", b""),
            (b"alize", b"al"),
            (b"iciti", b"ic"),
            (b"ical", b"ic"),
            (b"ness", b""),
            (b"ful", b""),
        ],
    );
}

fn step_4(word: &mut Vec<u8>) {
    // "ion" carries the extra condition that the stem end in s or t.
    const SUFFIXES: &[&[u8]] = &[
        b"ement", b"ance", b"ence", b"able", b"ible", b"ment", b"ant", b"ent", b"ion", b"ism",
        b"ate", b"iti", b"ous", b"ive", b"ize", b"al", b"er", b"ic", b"ou",
    ];
    for suffix in SUFFIXES {
        if ends(word, suffix) {
            let stem_len = word.len() - suffix.len();
            let stem = &word[..stem_len];
            let extra_ok =
                *suffix != b"ion" || (stem_len > 0 && matches!(stem[stem_len - 1], b's' | b't'));
            if measure(stem) > 1 && extra_ok {
                word.truncate(stem_len);
            }
            return;
        }
    }
}

fn step_5a(word: &mut Vec<u8>) {
    if ends(word, b"e") {
        let stem = &word[..word.len() - 1];
        let m = measure(stem);
        if m > 1 || (m == 1 && !ends_cvc(stem)) {
            word.pop();
        }
    }
}

fn step_5b(word: &mut Vec<u8>) {
    if measure(word) > 1 && ends_double_consonant(word) && word[word.len() - 1] == b'l' {
        word.pop();
    }
}

/// Stems a lowercase token. Tokens of one or two letters and tokens with
/// characters outside `[a-z]` (digits, non-ASCII) pass through unchanged.
pub fn stem(token: &str) -> String {
    if token.len() <= 2 || !token.bytes().all(|b| b.is_ascii_lowercase()) {
        return token.to_string();
    }
    let mut word = token.as_bytes().to_vec();
    step_1a(&mut word);
    step_1b(&mut word);
    step_1c(&mut word);
    step_2(&mut word);
    step_3(&mut word);
    step_4(&mut word);
    step_5a(&mut word);
    step_5b(&mut word);
    String::from_utf8(word).expect("stemming preserves ascii")
}
