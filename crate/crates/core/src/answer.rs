//! Boxed-answer extraction, normalization, and correctness judging.

/// Returns the contents of the last balanced `\boxed{...}` group.
///
/// Brace matching is a balanced-depth scan; an occurrence whose group never
/// closes is skipped (a later occurrence inside it may still be balanced).
/// `None` means the completion carries no parseable final answer.
pub fn extract_boxed(completion: &str) -> Option<String> {
    const MARKER: &str = "\\boxed{";
    let mut found = None;
    let mut from = 0;
    while let Some(rel) = completion[from..].find(MARKER) {
        let open = from + rel + MARKER.len();
        let mut depth = 1usize;
        let mut close = None;
        for (i, ch) in completion[open..].char_indices() {
            match ch {
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        close = Some(open + i);
                        break;
                    }
                }
                _ => {}
            }
        }
        match close {
            Some(end) => {
                found = Some(completion[open..end].to_string());
                from = end + 1;
            }
            None => from = open,
        }
    }
    found
}

/// Canonical answer form: whitespace trimmed and collapsed, lowercased,
/// trailing periods stripped, surrounding `$...$` stripped. The strip steps
/// run to a fixpoint so the function is idempotent ("$42.$." needs two
/// passes).
pub fn normalize_answer(answer: &str) -> String {
    let mut s = collapse_ws(answer).to_lowercase();
    loop {
        let before = s.clone();
        while s.ends_with('.') {
            s.pop();
        }
        if s.len() >= 2 && s.starts_with('$') && s.ends_with('$') {
            s = s[1..s.len() - 1].to_string();
        }
        s = collapse_ws(&s);
        if s == before {
            return s;
        }
    }
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// True iff the normalized strings match, or both parse as finite numbers
/// within relative tolerance 1e-6 (absolute 1e-9 near zero). Empty input is
/// never judged correct.
pub fn judge_correct(extracted: &str, ground_truth: &str) -> bool {
    if extracted.is_empty() || ground_truth.is_empty() {
        return false;
    }
    let a = normalize_answer(extracted);
    let b = normalize_answer(ground_truth);
    if a == b {
        return true;
    }
    match (parse_finite(&a), parse_finite(&b)) {
        (Some(x), Some(y)) => {
            (x - y).abs() <= f64::max(1e-9, 1e-6 * f64::max(x.abs(), y.abs()))
        }
        _ => false,
    }
}

fn parse_finite(s: &str) -> Option<f64> {
    let v: f64 = s.parse().ok()?;
    v.is_finite().then_some(v)
}
